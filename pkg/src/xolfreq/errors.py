"""Exception types for triangle data handling and model fitting."""

from __future__ import annotations


class XolfreqError(Exception):
    """Base class for all package errors."""


# --- triangle / file ingestion -------------------------------------------

class TriangleDataError(XolfreqError, ValueError):
    """Base class for malformed or inadmissible triangle data."""


class DimensionMismatch(TriangleDataError):
    """Two triangles that must share the same number of years do not."""


class NegativeCumulative(TriangleDataError):
    """The cumulative recursion produced a negative claim count."""


class DropExceedsStock(TriangleDataError):
    """A drop count exceeds the claims at risk in the previous column."""


class NegativeCount(TriangleDataError):
    """A triangle cell holds a negative value."""


class NonInteger(TriangleDataError):
    """A triangle cell holds a non-integer value."""


class DuplicateCell(TriangleDataError):
    """The same (origin, dev) cell appears more than once in a file."""


class MissingCell(TriangleDataError):
    """A cell required to complete the upper triangle is absent."""


class OutOfTriangle(TriangleDataError):
    """A cell lies outside the observable upper triangle."""


class MalformedCsv(TriangleDataError):
    """A CSV file does not follow the expected long format."""


class InvalidExposure(TriangleDataError):
    """An exposure value is missing or not strictly positive."""


class InvalidTriangleData(TriangleDataError):
    """A triangle decomposition violates at least one admissibility rule.

    Carries the full :class:`~xolfreq.triangle.ValidationReport` on the
    ``report`` attribute.
    """

    def __init__(self, report):
        self.report = report
        lines = "; ".join(v.message for v in report.violations)
        super().__init__(f"inadmissible triangle data: {lines}")


# --- model fitting / distributions ---------------------------------------

class ModelError(XolfreqError):
    """Base class for estimation and distribution errors."""


class InvalidParameter(ModelError, ValueError):
    """A distribution parameter is outside its admissible range."""


class DegenerateP(ModelError):
    """A success probability reached 1, collapsing the negative binomial."""


class DegenerateFit(ModelError):
    """The negative-binomial fit degenerated to the Poisson limit."""


class OptimizerFailed(ModelError):
    """A likelihood optimizer could not locate a finite optimum."""


class IndexOutsideLowerTriangle(ModelError, IndexError):
    """A prediction target does not lie in the unobserved lower triangle."""


class EmptySampleSet(ModelError, ValueError):
    """Summary statistics were requested for an empty sample."""
