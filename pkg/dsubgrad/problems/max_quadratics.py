import numpy as np

from dsubgrad.objectives import (
    DistributedProblem,
    MaxOfSmoothObjective,
    SmoothComponent,
)
from dsubgrad.problems.base import CatalogProblem


def quadratic_component(Q, b, offset):
    Q = np.array(Q, dtype=float)
    b = np.array(b, dtype=float)
    Q.setflags(write=False)
    b.setflags(write=False)
    return SmoothComponent(
        value_fn=lambda x: float(0.5 * x @ Q @ x + b @ x + offset),
        gradient_fn=lambda x: Q @ x + b,
        lipschitz_grad_bound=float(np.linalg.norm(Q, 2)),
    )


class MaxQuadratics(CatalogProblem):
    """f_i(x) = max_j (1/2 x^T Q_ij x + b_ij^T x + d_ij).

    Component 0 of every agent is strongly convex, so F is coercive; the
    remaining components are symmetric indefinite, making F nonconvex.
    """

    name = "max_quadratics"
    defaults = {
        "n_agents": 2,
        "dimension": 2,
        "n_components": 3,
        "curvature": 1.0,
        "linear_scale": 1.0,
        "offset_scale": 1.0,
        "x0_radius": 2.0,
        "x0": None,
    }

    def validate(self):
        super().validate()
        n_components = self.params["n_components"]
        self.require(
            isinstance(n_components, int) and n_components >= 1,
            f"n_components={n_components} must be a positive integer",
        )
        self.require(
            self.params["curvature"] > 0,
            f"curvature={self.params['curvature']} must be positive",
        )

    def agent_components(self):
        m = self.params["dimension"]
        curvature = self.params["curvature"]
        components = []
        for j in range(self.params["n_components"]):
            M = self.rng.standard_normal((m, m))
            if j == 0:
                Q = curvature * (M.T @ M / m + 0.5 * np.eye(m))
            else:
                Q = curvature * (M + M.T) / 2.0
            b = self.params["linear_scale"] * self.rng.standard_normal(m)
            offset = self.params["offset_scale"] * self.rng.standard_normal()
            components.append(quadratic_component(Q, b, offset))
        return components

    def build(self):
        m = self.params["dimension"]
        agents = [
            MaxOfSmoothObjective(self.agent_components(), dimension=m)
            for _ in range(self.params["n_agents"])
        ]

        if self.params["x0"] is not None:
            x0 = np.array(self.params["x0"], dtype=float).reshape(m)
        else:
            direction = self.rng.standard_normal(m)
            x0 = self.params["x0_radius"] * direction / np.linalg.norm(direction)

        return DistributedProblem(agents=agents, dimension=m, name=self.name, x0=x0)
