from dsubgrad.problems.base import CatalogProblem, catalog_problem, dump_problem_data

# registering the catalog
from dsubgrad.problems import abs_sum, max_quadratics, regression, relu_net  # noqa

__all__ = ["CatalogProblem", "catalog_problem", "dump_problem_data"]
