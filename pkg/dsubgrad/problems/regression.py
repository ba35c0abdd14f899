"""Data-backed problems: l1 regression and a toy robust phase retrieval."""

import numpy as np

from dsubgrad.objectives import (
    DistributedProblem,
    SeparableObjective,
    absolute_value_term,
)
from dsubgrad.problems.base import CatalogProblem


def linear_residual(a, y):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return absolute_value_term(
        lambda x: float(a @ x - y), lambda x: a.copy(), a.size
    )


def quadratic_residual(a, y):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return absolute_value_term(
        lambda x: float((a @ x) ** 2 - y),
        lambda x: 2.0 * (a @ x) * a,
        a.size,
        residual_lipschitz=2.0 * float(a @ a),
    )


def validate_samples(problem):
    samples = problem.params["samples_per_agent"]
    problem.require(
        isinstance(samples, int) and samples >= 1,
        f"samples_per_agent={samples} must be a positive integer",
    )


def sample_features(problem):
    n, m = problem.params["n_agents"], problem.params["dimension"]
    return problem.rng.standard_normal((n, problem.params["samples_per_agent"], m))


class RobustRegressionL1(CatalogProblem):
    """f_i(x) = sum_s |a_s^T x - y_s| with y = A x_true plus sparse outliers.

    Convex. Without outliers x_true is the global minimizer.
    """

    name = "robust_regression_l1"
    defaults = {
        "n_agents": 4,
        "dimension": 3,
        "samples_per_agent": 20,
        "outlier_fraction": 0.1,
        "outlier_scale": 10.0,
        "x0": None,
    }

    def validate(self):
        super().validate()
        validate_samples(self)
        fraction = self.params["outlier_fraction"]
        self.require(
            0.0 <= fraction < 0.5,
            f"outlier_fraction={fraction} must lie in [0, 0.5)",
        )

    def build(self):
        m = self.params["dimension"]
        A = sample_features(self)
        x_true = self.rng.standard_normal(m)
        y = A @ x_true
        outliers = self.rng.random(y.shape) < self.params["outlier_fraction"]
        y = y + outliers * self.params["outlier_scale"] * self.rng.standard_normal(
            y.shape
        )

        agents = [
            SeparableObjective([linear_residual(a, t) for a, t in zip(A_i, y_i)])
            for A_i, y_i in zip(A, y)
        ]
        x0 = self.params["x0"]
        return DistributedProblem(
            agents=agents,
            dimension=m,
            name=self.name,
            x0=None if x0 is None else np.array(x0, dtype=float).reshape(m),
            minimizer=x_true if not outliers.any() else None,
            data=tuple(zip(A, y)),
        )


class PhaseRetrievalToy(CatalogProblem):
    """f_i(x) = sum_s |(a_s^T x)^2 - y_s| with y_s = (a_s^T x_true)^2.

    Nonconvex; x_true and -x_true are global minimizers with F = 0.
    """

    name = "phase_retrieval_toy"
    defaults = {
        "n_agents": 4,
        "dimension": 3,
        "samples_per_agent": 10,
        "x0": None,
    }

    def validate(self):
        super().validate()
        validate_samples(self)

    def build(self):
        m = self.params["dimension"]
        A = sample_features(self)
        x_true = self.rng.standard_normal(m)
        y = (A @ x_true) ** 2

        agents = [
            SeparableObjective([quadratic_residual(a, t) for a, t in zip(A_i, y_i)])
            for A_i, y_i in zip(A, y)
        ]
        if self.params["x0"] is not None:
            x0 = np.array(self.params["x0"], dtype=float).reshape(m)
        else:
            x0 = self.rng.standard_normal(m)
        return DistributedProblem(
            agents=agents,
            dimension=m,
            name=self.name,
            x0=x0,
            minimizer=x_true,
            data=tuple(zip(A, y)),
        )
