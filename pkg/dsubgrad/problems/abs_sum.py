import numpy as np

from dsubgrad.objectives import (
    DistributedProblem,
    SeparableObjective,
    absolute_value_term,
)
from dsubgrad.problems.base import CatalogProblem


def coordinate_term(coordinate, center, dimension):
    """|x_d - c_d| as max(x_d - c_d, c_d - x_d)."""
    direction = np.zeros(dimension)
    direction[coordinate] = 1.0
    direction.setflags(write=False)
    return absolute_value_term(
        lambda x: x[coordinate] - center,
        lambda x: direction.copy(),
        dimension,
    )


class AbsSum(CatalogProblem):
    """f_i(x) = sum_d |x_d - c_id|.

    Convex and piecewise linear; the coordinate-wise median of the centers
    minimizes F. Kinks lie on the hyperplanes x_d = c_id.
    """

    name = "abs_sum"
    defaults = {
        "n_agents": 3,
        "dimension": 1,
        "centers": None,
        "center_scale": 1.0,
        "x0": None,
    }

    def validate(self):
        super().validate()
        centers = self.params["centers"]
        if centers is not None:
            centers = np.array(centers, dtype=float)
            if centers.ndim == 1:
                centers = centers[:, None]
            self.require(
                centers.shape == (self.params["n_agents"], self.params["dimension"]),
                f"centers has shape={centers.shape}, expected (n_agents, dimension)",
            )

    def centers(self) -> np.ndarray:
        n, m = self.params["n_agents"], self.params["dimension"]
        if self.params["centers"] is None:
            return self.params["center_scale"] * self.rng.standard_normal((n, m))
        return np.array(self.params["centers"], dtype=float).reshape(n, m)

    def build(self):
        m = self.params["dimension"]
        centers = self.centers()
        agents = [
            SeparableObjective(
                [coordinate_term(d, float(c[d]), m) for d in range(m)]
            )
            for c in centers
        ]
        x0 = self.params["x0"]
        return DistributedProblem(
            agents=agents,
            dimension=m,
            name=self.name,
            x0=None if x0 is None else np.array(x0, dtype=float).reshape(m),
            minimizer=np.median(centers, axis=0),
        )
