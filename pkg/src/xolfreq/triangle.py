"""Run-off triangle data model for excess-claim counts.

A portfolio of claims above a priority is observed as two incremental
triangles: ``N`` counts newly reported excess claims and ``D`` counts claims
that dropped back below the priority. The cumulative triangle ``C`` follows

    C[i, 1]     = N[i, 1]
    C[i, j + 1] = C[i, j] + N[i, j + 1] - D[i, j + 1]

All indices are 1-based, matching the CSV formats: origin year ``i`` runs
from 1 to ``n`` and development year ``j`` from 1 to ``n - i + 1``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .errors import (
    DimensionMismatch,
    DropExceedsStock,
    DuplicateCell,
    InvalidExposure,
    InvalidTriangleData,
    MalformedCsv,
    MissingCell,
    NegativeCount,
    NegativeCumulative,
    NonInteger,
    OutOfTriangle,
)

TRIANGLE_CSV_HEADER = ("origin", "dev", "value")
EXPOSURE_CSV_HEADER = ("origin", "exposure")


@dataclass(frozen=True)
class ClaimTriangle:
    """Upper-left run-off triangle of non-negative integer claim counts.

    ``cells`` maps ``(origin, dev)`` to a count and must cover exactly the
    cells with ``1 <= i <= n`` and ``1 <= j <= n - i + 1``. Instances are
    immutable and safe to share across threads.
    """

    n: int
    cells: Mapping[tuple[int, int], int]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DimensionMismatch(f"triangle needs at least one year, got n={self.n}")
        checked: dict[tuple[int, int], int] = {}
        for (i, j), value in self.cells.items():
            if not (1 <= i <= self.n and 1 <= j <= self.n - i + 1):
                raise OutOfTriangle(f"cell ({i},{j}) lies outside the upper triangle for n={self.n}")
            if isinstance(value, bool) or not isinstance(value, int):
                raise NonInteger(f"cell ({i},{j}) holds non-integer value {value!r}")
            if value < 0:
                raise NegativeCount(f"cell ({i},{j}) holds negative count {value}")
            checked[(i, j)] = int(value)
        for i in range(1, self.n + 1):
            for j in range(1, self.n - i + 2):
                if (i, j) not in checked:
                    raise MissingCell(f"cell ({i},{j}) is missing")
        object.__setattr__(self, "cells", MappingProxyType(checked))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "ClaimTriangle":
        """Build a triangle from per-origin rows; row ``i`` holds ``n - i + 1`` values."""
        n = len(rows)
        cells = {
            (i, j): value
            for i, row in enumerate(rows, start=1)
            for j, value in enumerate(row, start=1)
        }
        return cls(n=n, cells=cells)

    def value(self, i: int, j: int) -> int:
        """Count in cell ``(i, j)``; raises :class:`OutOfTriangle` outside the triangle."""
        try:
            return self.cells[(i, j)]
        except KeyError:
            raise OutOfTriangle(f"cell ({i},{j}) is not observed for n={self.n}") from None

    def row(self, i: int) -> tuple[int, ...]:
        """Observed development of origin year ``i``."""
        return tuple(self.cells[(i, j)] for j in range(1, self.n - i + 2))

    def column(self, j: int) -> tuple[int, ...]:
        """Observed counts in development year ``j`` (origins 1 to ``n - j + 1``)."""
        return tuple(self.cells[(i, j)] for i in range(1, self.n - j + 2))

    def latest(self, i: int) -> int:
        """Most recent observed count for origin ``i``, i.e. cell ``(i, n - i + 1)``."""
        return self.cells[(i, self.n - i + 1)]

    def to_rows(self) -> list[list[int]]:
        return [list(self.row(i)) for i in range(1, self.n + 1)]


@dataclass(frozen=True)
class ExposureVector:
    """Strictly positive exposures per origin year, optionally with next year's.

    ``values[i - 1]`` is the exposure of origin year ``i``; ``next_year`` is
    the exposure for origin ``n + 1`` when pricing the upcoming year.
    """

    values: tuple[float, ...]
    next_year: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise InvalidExposure("exposure vector is empty")
        for i, v in enumerate(self.values, start=1):
            if not math.isfinite(v) or v <= 0.0:
                raise InvalidExposure(f"exposure for origin {i} must be > 0, got {v}")
        if self.next_year is not None:
            nxt = float(self.next_year)
            if not math.isfinite(nxt) or nxt <= 0.0:
                raise InvalidExposure(f"next-year exposure must be > 0, got {nxt}")
            object.__setattr__(self, "next_year", nxt)

    @property
    def n(self) -> int:
        return len(self.values)

    def of(self, i: int) -> float:
        """Exposure of origin ``i``; ``i = n + 1`` returns the next-year exposure."""
        if 1 <= i <= self.n:
            return self.values[i - 1]
        if i == self.n + 1 and self.next_year is not None:
            return self.next_year
        raise InvalidExposure(f"no exposure available for origin {i}")


@dataclass(frozen=True)
class Violation:
    """A single admissibility failure located at a triangle cell."""

    code: str
    message: str
    origin: int | None = None
    dev: int | None = None

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "origin": self.origin, "dev": self.dev}


@dataclass(frozen=True)
class ValidationReport:
    """Collection of admissibility violations; empty means the data is usable."""

    violations: tuple[Violation, ...] = ()

    def __bool__(self) -> bool:
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


def build_cumulative(n_triangle: ClaimTriangle, d_triangle: ClaimTriangle) -> ClaimTriangle:
    """Reconstruct the cumulative triangle from the (new, dropped) decomposition.

    Applies ``C[i, j+1] = C[i, j] + N[i, j+1] - D[i, j+1]`` along each origin
    row, starting from ``C[i, 1] = N[i, 1]``.

    Raises:
        DimensionMismatch: the two triangles differ in size.
        DropExceedsStock: some ``D[i, j+1]`` exceeds the claims at risk ``C[i, j]``.
        NegativeCumulative: a computed count is negative (unreachable when the
            drop bound holds; kept as a defensive check).
    """
    if n_triangle.n != d_triangle.n:
        raise DimensionMismatch(
            f"N and D triangles differ in size: {n_triangle.n} vs {d_triangle.n}"
        )
    n = n_triangle.n
    cells: dict[tuple[int, int], int] = {}
    for i in range(1, n + 1):
        running = n_triangle.value(i, 1)
        cells[(i, 1)] = running
        for j in range(1, n - i + 1):
            drop = d_triangle.value(i, j + 1)
            if drop > running:
                raise DropExceedsStock(
                    f"drop {drop} at ({i},{j + 1}) exceeds claims at risk {running}"
                )
            running = running + n_triangle.value(i, j + 1) - drop
            if running < 0:
                raise NegativeCumulative(f"cumulative count at ({i},{j + 1}) is {running}")
            cells[(i, j + 1)] = running
    return ClaimTriangle(n=n, cells=cells)


def validate(
    n_triangle: ClaimTriangle,
    d_triangle: ClaimTriangle,
    exposures: ExposureVector | None = None,
) -> ValidationReport:
    """Check a decomposition for admissibility without raising.

    Violations are data, not exceptions: every failed rule is reported with
    the offending cell so corrupt files can be diagnosed in one pass.
    """
    violations: list[Violation] = []
    if n_triangle.n != d_triangle.n:
        violations.append(
            Violation(
                code="dimension-mismatch",
                message=f"N has {n_triangle.n} years but D has {d_triangle.n}",
            )
        )
        return ValidationReport(tuple(violations))
    n = n_triangle.n
    if exposures is not None and exposures.n != n:
        violations.append(
            Violation(
                code="dimension-mismatch",
                message=f"exposure vector has {exposures.n} entries but triangles have {n} years",
            )
        )
    for i in range(1, n + 1):
        if d_triangle.value(i, 1) != 0:
            violations.append(
                Violation(
                    code="first-column-drop",
                    message=f"D first column nonzero at i={i}",
                    origin=i,
                    dev=1,
                )
            )
        # Walk the recursion leniently so later cells are still checked.
        running = n_triangle.value(i, 1)
        for j in range(1, n - i + 1):
            drop = d_triangle.value(i, j + 1)
            if drop > running:
                violations.append(
                    Violation(
                        code="drop-exceeds-stock",
                        message=f"drop exceeds stock at ({i},{j + 1}): {drop} > {running}",
                        origin=i,
                        dev=j + 1,
                    )
                )
            running = running + n_triangle.value(i, j + 1) - drop
            if running < 0:
                violations.append(
                    Violation(
                        code="negative-cumulative",
                        message=f"cumulative count at ({i},{j + 1}) is {running}",
                        origin=i,
                        dev=j + 1,
                    )
                )
    return ValidationReport(tuple(violations))


@dataclass(frozen=True)
class TrianglePair:
    """Admissible (N, D, E) decomposition with the derived cumulative triangle.

    Use :meth:`build` to construct; it validates the decomposition and
    computes ``C`` through the cumulative recursion.
    """

    N: ClaimTriangle
    D: ClaimTriangle
    E: ExposureVector
    C: ClaimTriangle = field(compare=False)

    @classmethod
    def build(
        cls,
        n_triangle: ClaimTriangle,
        d_triangle: ClaimTriangle,
        exposures: ExposureVector,
    ) -> "TrianglePair":
        report = validate(n_triangle, d_triangle, exposures)
        if not report.ok:
            raise InvalidTriangleData(report)
        return cls(
            N=n_triangle,
            D=d_triangle,
            E=exposures,
            C=build_cumulative(n_triangle, d_triangle),
        )

    @property
    def n(self) -> int:
        return self.N.n

    def validate(self) -> ValidationReport:
        """Re-run the admissibility checks on the held decomposition."""
        return validate(self.N, self.D, self.E)


# --- CSV ingestion and serialization --------------------------------------

def _read_rows(text: str, expected_header: tuple[str, ...]) -> Iterable[list[str]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedCsv("empty file") from None
    if [h.strip().lower() for h in header] != list(expected_header):
        raise MalformedCsv(
            f"expected header {','.join(expected_header)!r}, got {','.join(header)!r}"
        )
    for row in reader:
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != len(expected_header):
            raise MalformedCsv(f"expected {len(expected_header)} fields, got {row!r}")
        yield row


def _parse_int(text: str, what: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise NonInteger(f"{what} must be an integer, got {text!r}") from None


def parse_triangle_csv(text: str, n: int | None = None) -> ClaimTriangle:
    """Parse a long-format triangle CSV with header ``origin,dev,value``.

    Rows may appear in any order; duplicates are rejected. When ``n`` is not
    given it is inferred as the largest calendar index ``origin + dev - 1``
    present in the file, so a complete triangle round-trips without metadata.
    """
    cells: dict[tuple[int, int], int] = {}
    for row in _read_rows(text, TRIANGLE_CSV_HEADER):
        i = _parse_int(row[0], "origin")
        j = _parse_int(row[1], "dev")
        value = _parse_int(row[2], "value")
        if i < 1 or j < 1:
            raise OutOfTriangle(f"origin and dev must be >= 1, got ({i},{j})")
        if (i, j) in cells:
            raise DuplicateCell(f"cell ({i},{j}) appears more than once")
        cells[(i, j)] = value
    if not cells:
        raise MalformedCsv("no data rows")
    size = n if n is not None else max(i + j - 1 for i, j in cells)
    for i, j in cells:
        if i + j - 1 > size or i > size:
            raise OutOfTriangle(f"cell ({i},{j}) lies outside the upper triangle for n={size}")
    for i in range(1, size + 1):
        for j in range(1, size - i + 2):
            if (i, j) not in cells:
                raise MissingCell(f"cell ({i},{j}) is missing")
    return ClaimTriangle(n=size, cells=cells)


def serialize_triangle_csv(triangle: ClaimTriangle) -> str:
    """Serialize to the long CSV format, rows ordered by (origin, dev)."""
    lines = [",".join(TRIANGLE_CSV_HEADER)]
    for i in range(1, triangle.n + 1):
        for j in range(1, triangle.n - i + 2):
            lines.append(f"{i},{j},{triangle.value(i, j)}")
    return "\n".join(lines) + "\n"


def parse_exposure_csv(text: str) -> ExposureVector:
    """Parse an exposure CSV with header ``origin,exposure``.

    Origins must cover 1..n contiguously; an extra row with origin ``n + 1``
    supplies the exposure of the upcoming year.
    """
    found: dict[int, float] = {}
    for row in _read_rows(text, EXPOSURE_CSV_HEADER):
        i = _parse_int(row[0], "origin")
        try:
            value = float(row[1].strip())
        except ValueError:
            raise InvalidExposure(f"exposure must be a number, got {row[1]!r}") from None
        if i in found:
            raise DuplicateCell(f"origin {i} appears more than once")
        found[i] = value
    if not found:
        raise MalformedCsv("no data rows")
    top = max(found)
    base = sorted(found)
    if base != list(range(1, top + 1)):
        missing = sorted(set(range(1, top + 1)) - set(base))
        raise MissingCell(f"exposure rows missing for origins {missing}")
    # A single trailing origin is ambiguous between E_n and E_{n+1}; the
    # triangle size decides, so we expose both readings.
    return ExposureVector(values=tuple(found[i] for i in range(1, top + 1)))


def split_next_year_exposure(exposures: ExposureVector, n: int) -> ExposureVector:
    """Re-shape a parsed exposure vector against a known triangle size ``n``.

    A vector of length ``n + 1`` is interpreted as origins 1..n plus the
    next-year exposure; length ``n`` means no next-year exposure is supplied.
    """
    if exposures.n == n:
        return exposures
    if exposures.n == n + 1:
        return ExposureVector(values=exposures.values[:n], next_year=exposures.values[n])
    raise DimensionMismatch(
        f"exposure file has {exposures.n} origins but the triangles have {n} years"
    )


def serialize_exposure_csv(exposures: ExposureVector) -> str:
    lines = [",".join(EXPOSURE_CSV_HEADER)]
    for i, v in enumerate(exposures.values, start=1):
        lines.append(f"{i},{v:g}")
    if exposures.next_year is not None:
        lines.append(f"{exposures.n + 1},{exposures.next_year:g}")
    return "\n".join(lines) + "\n"
