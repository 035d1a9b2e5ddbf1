"""Empirical strong-order fits and convergence report assembly.

The empirical order is the slope of an ordinary least-squares line through
(log2 dt, log2 error). Both axes use base 2: slopes are base-invariant but
intercepts and plot coordinates are not, and the dyadic ladder makes base 2
the natural choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, UsageError
from .montecarlo import BatchErrorReport
from .schemes import SchemeKind

# The two named point subsets reported for every scheme: the coarse-step
# regime (first four points of the ladder) and the full ladder.
DEFAULT_FIT_SPECS: tuple[tuple[str, int | None], ...] = (("first4", 4), ("all", None))


@dataclass(frozen=True)
class ReportRow:
    scheme: SchemeKind
    level_exponent: int
    dt: float
    err_mean: float
    ci_half_width: float
    n_overflowed: int


@dataclass(frozen=True)
class ReportFit:
    scheme: SchemeKind
    subset: str
    points_used: int
    slope: float
    intercept: float


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[ReportRow, ...]
    fits: tuple[ReportFit, ...]


def fit_order(points: Iterable[tuple[float, float]]) -> tuple[float, float]:
    """OLS fit of log2(err) against log2(dt); the slope is the empirical order."""
    pts = list(points)
    if len(pts) < 2:
        raise UsageError(f"fit_order needs at least 2 points, got {len(pts)}")
    for dt, err in pts:
        if not (dt > 0 and err > 0 and math.isfinite(dt) and math.isfinite(err)):
            raise DomainError(f"fit_order needs positive finite points, got ({dt}, {err})")
    x = np.log2([p[0] for p in pts])
    y = np.log2([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def _fittable(row: ReportRow) -> bool:
    return (
        row.n_overflowed == 0
        and math.isfinite(row.err_mean)
        and row.err_mean > 0
    )


def build_report(
    error_reports: Sequence[BatchErrorReport],
    fit_specs: Sequence[tuple[str, int | None]] = DEFAULT_FIT_SPECS,
) -> ConvergenceReport:
    """Assemble sorted rows and run one fit per (scheme, subset spec).

    A subset spec is ``(name, count)``: the fit uses the first ``count`` rows
    of the scheme in ascending level order (coarsest steps first), or every
    row when count is None. Rows with flagged errors are kept in the table
    but excluded from fits; a subset that ends up with fewer than 2 usable
    points is skipped.
    """
    if not error_reports:
        raise UsageError("build_report needs at least one error report")
    rows = tuple(
        ReportRow(
            scheme=rep.scheme,
            level_exponent=rep.level_exponent,
            dt=rep.dt,
            err_mean=rep.grand_mean,
            ci_half_width=rep.ci_half_width,
            n_overflowed=rep.n_overflowed,
        )
        for rep in sorted(error_reports, key=lambda r: (r.scheme.value, r.level_exponent))
    )
    fits = []
    schemes = sorted({row.scheme for row in rows}, key=lambda s: s.value)
    for scheme in schemes:
        ladder = [row for row in rows if row.scheme is scheme and _fittable(row)]
        for name, count in fit_specs:
            if count is not None and count < 1:
                raise UsageError(f"fit subset {name!r} selects no points")
            subset = ladder if count is None else ladder[:count]
            if len(subset) < 2:
                continue
            slope, intercept = fit_order([(row.dt, row.err_mean) for row in subset])
            fits.append(
                ReportFit(
                    scheme=scheme,
                    subset=name,
                    points_used=len(subset),
                    slope=slope,
                    intercept=intercept,
                )
            )
    return ConvergenceReport(rows=rows, fits=tuple(fits))
