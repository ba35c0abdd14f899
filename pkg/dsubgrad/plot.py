"""Plot a trace CSV: python -m dsubgrad.plot TRACE.csv [--out FIGURE.png]

Needs matplotlib (the `plot` extra). The CSV is the contract; this script
is a convenience.
"""

import argparse
import pathlib
import sys

import numpy as np

from dsubgrad.diagnostics import read_csv


PANELS = (
    ("consensus_error", "consensus error"),
    ("stationarity_at_mean", "stationarity at mean"),
    ("objective_at_mean", "objective at mean"),
)


def plot_trace(trace_path, figure_path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    trace = read_csv(trace_path)
    nu = trace.column("nu")
    fig, axes = plt.subplots(1, len(PANELS), figsize=(4 * len(PANELS), 3.2))
    for ax, (column, label) in zip(axes, PANELS):
        values = trace.column(column)
        keep = ~np.isnan(values)
        ax.plot(nu[keep], values[keep])
        if column != "objective_at_mean" and np.all(values[keep] > 0):
            ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_title(label)
    fig.tight_layout()
    fig.savefig(figure_path, dpi=120)
    plt.close(fig)


def main(args=None):
    parser = argparse.ArgumentParser(description="plot a dsubgrad trace CSV")
    parser.add_argument("trace", type=pathlib.Path, help="trace CSV written by run")
    parser.add_argument("--out", type=pathlib.Path, help="figure path (default: TRACE.png)")
    args = parser.parse_args(args)

    try:
        plot_trace(args.trace, args.out or args.trace.with_suffix(".png"))
    except ImportError:
        print("matplotlib is not installed; install dsubgrad[plot]")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
