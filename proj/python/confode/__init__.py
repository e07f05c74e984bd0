"""Closed-form solving and numeric verification of fractional-order ODEs.

The calculus of order 0 < alpha <= 1 used throughout weights the classical
derivative by x^(1-alpha).  Expressions are strings over x (and y for
equations); problems use the same flat ``key = value`` text format as the
command line tool.
"""

from ._core import (
    DegenerateCase,
    ExprParseError,
    ProblemFormatError,
    UnsupportedForm,
    classify_file,
    classify_text,
    derive,
    fixture_ids,
    integrate,
    solve_file,
    solve_text,
    verify_file,
    verify_fixture,
    verify_text,
)

__all__ = [
    "DegenerateCase",
    "ExprParseError",
    "ProblemFormatError",
    "UnsupportedForm",
    "classify_file",
    "classify_text",
    "derive",
    "fixture_ids",
    "integrate",
    "solve_file",
    "solve_text",
    "verify_file",
    "verify_fixture",
    "verify_text",
]
