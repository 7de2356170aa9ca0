"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies rather than bare ValueError.
"""

from __future__ import annotations


class BsdeLabError(Exception):
    """Base class for all package errors."""


class ValidationError(BsdeLabError):
    """Bad inputs: config values, shape mismatches, violated preconditions."""

    exit_code = 2


class HypothesisError(ValidationError):
    """An experiment's standing hypothesis failed its empirical pre-check.

    Message always starts with ``HYPOTHESIS_FAIL`` so scripts can grep for it.
    """

    def __init__(self, detail: str):
        super().__init__(f"HYPOTHESIS_FAIL {detail}")


class NumericalError(BsdeLabError):
    """Numerical breakdown: NaN/Inf, non-convergent iteration, conditioning."""

    exit_code = 3


class PicardError(NumericalError):
    """The implicit y-step failed to converge even with the bisection fallback."""


class ExperimentFailure(BsdeLabError):
    """An experiment ran fine numerically but its assertion did not hold."""

    exit_code = 4
