"""One-hidden-layer ReLU network with sigmoid outputs and l1 loss.

Parameters are packed as theta = [V (H x d), c (H), W (K x H), b (K)] and
the agent loss on its samples (a_s, y_s) is

    sum_s sum_k |sigmoid(W relu(V a_s + c) + b)_k - y_sk| + lam * ||theta||_1

Every relu, every output absolute value and every regularizer coordinate
is a max of two smooth pieces. Branches are stored compactly as slope and
sign arrays rather than one tuple per kink.
"""

import csv
import itertools
import logging
import pathlib
import typing
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from dsubgrad.constants import ACTIVE_RELATIVE_TOLERANCE
from dsubgrad.errors import BadParams, BranchUnavailable
from dsubgrad.objectives import (
    Branch,
    DistributedProblem,
    Objective,
    Selection,
    TieRule,
    check_dimension,
)
from dsubgrad.problems.base import CatalogProblem

logger = logging.getLogger(__name__)

# tied hidden units per sample expanded into exact vertex averages
MAX_TIED_UNITS = 4

_PIECES = {1: (0,), 2: (1,), 3: (0, 1)}


@dataclass(frozen=True, eq=False)
class NetChoices:
    """Resolved pieces: +-1 signs for |.| kinks, 0/1 relu slopes.

    Averaged kinks carry sign 0 and slope 0.5.
    """

    reg_sign: np.ndarray
    slopes: np.ndarray
    signs: np.ndarray


class ReluNetObjective(Objective):
    def __init__(
        self,
        features,
        targets,
        n_hidden: int,
        l1_penalty: float = 1e-4,
        active_tolerance: typing.Optional[float] = None,
    ):
        self.features = np.array(features, dtype=float)
        self.targets = np.array(targets, dtype=float)
        self.features.setflags(write=False)
        self.targets.setflags(write=False)
        self.n_samples, self.n_features = self.features.shape
        self.n_classes = self.targets.shape[1]
        self.n_hidden = int(n_hidden)
        self.l1_penalty = float(l1_penalty)
        self.active_tolerance = active_tolerance
        H, d, K = self.n_hidden, self.n_features, self.n_classes
        self.dimension = H * d + H + K * H + K

    @property
    def n_terms(self):
        return self.n_samples

    @property
    def n_kinks(self):
        return self.dimension + self.n_samples * (self.n_hidden + self.n_classes)

    def unpack(self, x):
        H, d, K = self.n_hidden, self.n_features, self.n_classes
        V = x[: H * d].reshape(H, d)
        c = x[H * d : H * d + H]
        W = x[H * d + H : H * d + H + K * H].reshape(K, H)
        b = x[H * d + H + K * H :]
        return V, c, W, b

    def _rows(self, batch):
        if batch is None:
            return np.arange(self.n_samples)
        return np.asarray(batch, dtype=int)

    def _forward(self, x, rows):
        V, c, W, b = self.unpack(x)
        Z = self.features[rows] @ V.T + c
        U = np.maximum(Z, 0.0) @ W.T + b
        R = expit(U) - self.targets[rows]
        return Z, R

    def value(self, x):
        x = check_dimension(x, self.dimension)
        _, R = self._forward(x, self._rows(None))
        return float(np.abs(R).sum() + self.l1_penalty * np.abs(x).sum())

    def _active(self, x, batch):
        """Masks of active piece 0 and piece 1 for reg, relu and abs kinks."""
        x = check_dimension(x, self.dimension)
        Z, R = self._forward(x, self._rows(batch))

        def band(top):
            if self.active_tolerance is not None:
                return self.active_tolerance
            return ACTIVE_RELATIVE_TOLERANCE * (1.0 + top)

        reg_band = band(np.abs(x))
        relu_band = band(np.maximum(Z, 0.0))
        abs_band = band(np.abs(R))
        return (
            (x >= -reg_band, x <= reg_band),
            (Z <= relu_band, Z >= -relu_band),
            (R >= -abs_band, R <= abs_band),
        )

    def choice_sets(self, x, batch=None):
        (reg0, reg1), (relu0, relu1), (abs0, abs1) = self._active(x, batch)
        reg = reg0 * 1 + reg1 * 2
        per_sample = np.concatenate([relu0 * 1 + relu1 * 2, abs0 * 1 + abs1 * 2], axis=1)
        codes = np.concatenate([reg, per_sample.ravel()])
        return [_PIECES[code] for code in codes.tolist()]

    def count_active(self, x):
        (reg0, reg1), (relu0, relu1), (abs0, abs1) = self._active(x, None)
        ties = int((reg0 & reg1).sum() + (relu0 & relu1).sum() + (abs0 & abs1).sum())
        return 2**ties

    def select(
        self, x, tie_rule=TieRule.lowest_index, rng=None, batch=None, scale=1.0
    ):
        tie_rule = TieRule(tie_rule)
        (reg0, reg1), (relu0, relu1), (abs0, abs1) = self._active(x, batch)

        def resolve(piece0, piece1, averaged):
            """Chosen piece per kink (0.0/1.0), or `averaged` at convex-average ties."""
            piece = np.where(piece1 & ~piece0, 1.0, 0.0)
            tied = piece0 & piece1
            if tie_rule == TieRule.convex_average:
                piece[tied] = averaged
            elif tie_rule == TieRule.uniform_random and tied.any():
                if rng is None:
                    raise ValueError("tie_rule=uniform-random needs a random stream")
                piece[tied] = rng.integers(2, size=int(tied.sum()))
            return piece

        choices = NetChoices(
            reg_sign=1.0 - 2.0 * resolve(reg0, reg1, 0.5),
            slopes=resolve(relu0, relu1, 0.5),
            signs=1.0 - 2.0 * resolve(abs0, abs1, 0.5),
        )
        branch = Branch(
            choices=choices,
            batch=None if batch is None else tuple(batch),
            scale=scale,
        )
        return Selection(
            branch=branch, gradient=self.gradient(x, choices, batch, scale)
        )

    def _decode(self, choices, n_rows) -> NetChoices:
        if isinstance(choices, NetChoices):
            return choices
        choices = tuple(choices)
        H, K = self.n_hidden, self.n_classes
        if len(choices) != self.dimension + n_rows * (H + K):
            raise BranchUnavailable(
                f"branch has {len(choices)} kinks, expected {self.dimension + n_rows * (H + K)}"
            )
        mean_piece = np.array([sum(p) / len(p) for p in choices])
        per_sample = mean_piece[self.dimension :].reshape(n_rows, H + K)
        return NetChoices(
            reg_sign=1.0 - 2.0 * mean_piece[: self.dimension],
            slopes=per_sample[:, :H],
            signs=1.0 - 2.0 * per_sample[:, H:],
        )

    def gradient(self, x, choices, batch=None, scale=1.0):
        x = check_dimension(x, self.dimension)
        rows = self._rows(batch)
        choices = self._decode(choices, len(rows))

        if not np.any(choices.slopes == 0.5):
            data = self._backprop(
                x, rows, choices.slopes, choices.signs, np.ones(len(rows))
            )
            return self.l1_penalty * choices.reg_sign + scale * data

        # ties averaged over relu vertices; the loss is not linear in slopes
        expanded_rows, slope_rows, sign_rows, weights = [], [], [], []
        for s, row in enumerate(rows):
            tied = np.flatnonzero(choices.slopes[s] == 0.5)
            if len(tied) == 0:
                patterns = [choices.slopes[s]]
            elif len(tied) > MAX_TIED_UNITS:
                logger.warning(
                    f"sample={row} has {len(tied)} tied hidden units (more than {MAX_TIED_UNITS}), using the lowest-index piece"
                )
                pattern = choices.slopes[s].copy()
                pattern[tied] = 0.0
                patterns = [pattern]
            else:
                patterns = []
                for vertex in itertools.product((0.0, 1.0), repeat=len(tied)):
                    pattern = choices.slopes[s].copy()
                    pattern[tied] = vertex
                    patterns.append(pattern)
            for pattern in patterns:
                expanded_rows.append(row)
                slope_rows.append(pattern)
                sign_rows.append(choices.signs[s])
                weights.append(1.0 / len(patterns))

        data = self._backprop(
            x,
            np.array(expanded_rows, dtype=int),
            np.array(slope_rows).reshape(-1, self.n_hidden),
            np.array(sign_rows).reshape(-1, self.n_classes),
            np.array(weights),
        )
        return self.l1_penalty * choices.reg_sign + scale * data

    def _backprop(self, x, rows, slopes, signs, weights):
        V, c, W, b = self.unpack(x)
        A = self.features[rows]
        Hidden = slopes * (A @ V.T + c)
        P = expit(Hidden @ W.T + b)
        dU = weights[:, None] * signs * P * (1.0 - P)
        dW = dU.T @ Hidden
        db = dU.sum(axis=0)
        dZ = (dU @ W) * slopes
        dV = dZ.T @ A
        dc = dZ.sum(axis=0)
        return np.concatenate([dV.ravel(), dc, dW.ravel(), db])


def read_labelled_csv(path, feature_scale=1.0):
    """Rows of features followed by an integer label; a header row is skipped."""
    rows = []
    try:
        with pathlib.Path(path).open() as f:
            records = list(csv.reader(f))
    except OSError as e:
        raise BadParams(f"unable to read data_path={path}: {e}")

    for i, record in enumerate(records):
        if not record:
            continue
        try:
            rows.append([float(v) for v in record])
        except ValueError:
            if i == 0:
                continue
            raise BadParams(f"data_path={path} row {i} is not numeric")
    data = np.array(rows)
    if data.ndim != 2 or data.shape[1] < 2:
        raise BadParams(f"data_path={path} needs at least one feature and a label")
    return feature_scale * data[:, :-1], data[:, -1].astype(int)


def one_hot(labels, n_classes):
    targets = np.zeros((len(labels), n_classes))
    targets[np.arange(len(labels)), labels] = 1.0
    return targets


class TinyReluNet(CatalogProblem):
    """Small classification network on agent-partitioned data.

    Synthetic data labels standard normal features with the argmax of a
    random linear map. With `data_path`, rows are dealt to agents
    round-robin.
    """

    name = "tiny_relu_net"
    defaults = {
        "n_agents": 4,
        "samples_per_agent": 100,
        "n_features": 8,
        "n_hidden": 6,
        "n_classes": 2,
        "l1_penalty": 1e-4,
        "init_scale": 0.5,
        "data_path": None,
        "feature_scale": 1.0,
        "x0": None,
    }

    def validate(self):
        super().validate()
        for key in ("samples_per_agent", "n_features", "n_hidden"):
            value = self.params[key]
            self.require(
                isinstance(value, int) and value >= 1,
                f"{key}={value} must be a positive integer",
            )
        self.require(
            isinstance(self.params["n_classes"], int) and self.params["n_classes"] >= 2,
            f"n_classes={self.params['n_classes']} must be an integer >= 2",
        )
        self.require(
            self.params["l1_penalty"] >= 0,
            f"l1_penalty={self.params['l1_penalty']} must be nonnegative",
        )

    def dataset(self):
        n, K = self.params["n_agents"], self.params["n_classes"]
        if self.params["data_path"] is not None:
            features, labels = read_labelled_csv(
                self.params["data_path"], self.params["feature_scale"]
            )
            self.require(
                labels.min() >= 0 and labels.max() < K,
                f"labels must lie in [0, n_classes={K})",
            )
            self.require(
                len(labels) >= n, f"data_path has fewer rows than n_agents={n}"
            )
            logger.info(
                f"loaded {len(labels)} rows with {features.shape[1]} features from data_path={self.params['data_path']}"
            )
        else:
            d = self.params["n_features"]
            features = self.rng.standard_normal(
                (n * self.params["samples_per_agent"], d)
            )
            labeller = self.rng.standard_normal((K, d))
            labels = np.argmax(features @ labeller.T, axis=1)
        return features, one_hot(labels, K)

    def build(self):
        n = self.params["n_agents"]
        features, targets = self.dataset()
        partition = [(features[i::n], targets[i::n]) for i in range(n)]
        agents = [
            ReluNetObjective(A, Y, self.params["n_hidden"], self.params["l1_penalty"])
            for A, Y in partition
        ]
        m = agents[0].dimension

        if self.params["x0"] is not None:
            x0 = np.array(self.params["x0"], dtype=float).reshape(m)
        else:
            x0 = self.params["init_scale"] * self.rng.standard_normal(m)

        return DistributedProblem(
            agents=agents, dimension=m, name=self.name, x0=x0, data=tuple(partition)
        )
