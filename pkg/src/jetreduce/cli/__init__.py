"""Parser, problem files and the command line driver."""
from .parser import ExprSyntaxError, UnknownField, parse_expr
from .problem import Problem, ProblemError, load_bundled, load_problem, problem_from_dict
from .runner import Report, run

__all__ = [
    "parse_expr", "ExprSyntaxError", "UnknownField", "Problem", "ProblemError", "load_problem",
    "load_bundled", "problem_from_dict", "Report", "run", "main",
]


def main(argv=None):
    from .main import main as _main

    return _main(argv)
