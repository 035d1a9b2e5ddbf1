"""Coupled-path experiments: endpoint-error estimation and negativity census.

The endpoint-error experiment drives every scheme and step size with the same
Brownian paths: per path one fine lattice is generated and coarsened exactly,
and the reference scheme runs on the finest grid. Errors are grouped into M
batches of L paths (batch j owns path indices [j*L, (j+1)*L)); the batch
means feed a Student-t confidence interval.

Work is split into fixed-size chunks of consecutive path indices. Chunks are
pure functions of (config, path range), so the number of workers changes only
the wall clock, never a single bit of the output.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import ReferenceOverflowError, UsageError
from .models import ModelSpec
from .paths import GridSpec, coarsen_increments, gaussian_increments, increment_matrix
from .schemes import SchemeKind, simulate_ensemble

# Arbitrary fixed fallback seed, recorded in run manifests whenever a
# configuration does not name one.
DEFAULT_SEED = 63018

# Paths per vectorized chunk. Fixed so that the chunk layout (and therefore
# every floating-point intermediate) is independent of the worker count.
CHUNK_SIZE = 512

_T_TABLE_ALPHA_010 = {
    10: 1.83,
    20: 1.73,
    30: 1.70,
    40: 1.68,
    60: 1.67,
    100: 1.66,
    200: 1.65,
}


def t_quantile(alpha: float, M: int, override: float | None = None) -> float:
    """Student-t quantile t_{1-alpha, M-1} used for the batch-mean interval.

    Values come from an embedded two-decimal table at alpha = 0.10; any other
    (alpha, M) pair requires an explicit caller-supplied override.
    """
    if override is not None:
        return float(override)
    if alpha == 0.10 and M in _T_TABLE_ALPHA_010:
        return _T_TABLE_ALPHA_010[M]
    raise UsageError(
        f"no embedded t-quantile for alpha={alpha}, M={M}; the table covers alpha=0.10 with "
        f"M in {sorted(_T_TABLE_ALPHA_010)} - pass an explicit override"
    )


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    schemes: tuple[SchemeKind, ...]
    grid: GridSpec
    batches: int
    paths_per_batch: int
    alpha: float = 0.10
    seed: int = DEFAULT_SEED
    reference_scheme: SchemeKind = SchemeKind.HMS
    sd_mode: str = "left_point"
    t_quantile_override: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(SchemeKind(s) for s in self.schemes))
        if not self.schemes:
            raise UsageError("at least one scheme is required")
        if self.batches < 2:
            raise UsageError(f"need at least 2 batches, got {self.batches}")
        if self.paths_per_batch < 15:
            raise UsageError(
                f"paths_per_batch must be >= 15 so batch means can be treated as Gaussian, "
                f"got {self.paths_per_batch}"
            )
        if not (0.0 < self.alpha < 1.0):
            raise UsageError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.grid.levels:
            raise UsageError("grid must name at least one level")
        # fail fast if the confidence quantile cannot be resolved
        t_quantile(self.alpha, self.batches, self.t_quantile_override)

    @property
    def n_paths(self) -> int:
        return self.batches * self.paths_per_batch

    @property
    def reference(self) -> str:
        return f"{self.reference_scheme.value}@{self.grid.reference_exponent}"


@dataclass(frozen=True)
class BatchErrorReport:
    scheme: SchemeKind
    level_exponent: int
    dt: float
    batch_means: np.ndarray
    grand_mean: float
    ci_half_width: float
    quantile_used: float
    n_overflowed: int = 0
    path_errors: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class NegativityCensus:
    scheme: SchemeKind
    n_paths: int
    n_steps: int
    dt: float
    fraction_negative: float
    step_histogram: dict[int, int]
    example_first_values: tuple[float, ...]
    min_iterate: float
    first_negative_path_index: int | None


def _chunk_ranges(n_paths: int) -> list[tuple[int, int]]:
    return [(s, min(s + CHUNK_SIZE, n_paths)) for s in range(0, n_paths, CHUNK_SIZE)]


def _chunk_endpoint_errors(config: ExperimentConfig, chunk: tuple[int, int]):
    """Absolute endpoint errors for paths [start, stop) at every (scheme, level)."""
    start, stop = chunk
    grid = config.grid
    fine = increment_matrix(config.seed, start, stop - start, grid)
    dt_ref = grid.dt(grid.reference_exponent)
    ref = simulate_ensemble(
        config.reference_scheme, config.model, fine, dt_ref, config.sd_mode
    )
    bad = ~np.isfinite(ref.terminals)
    if np.any(bad):
        idx = start + int(np.argmax(bad))
        raise ReferenceOverflowError(
            f"reference scheme {config.reference_scheme.value} overflowed on path {idx}",
            path_index=idx,
        )
    out = {}
    mats = {}
    arr, e = fine, grid.reference_exponent
    for level in sorted(set(grid.levels), reverse=True):
        arr = coarsen_increments(arr, e - level)
        e = level
        mats[level] = arr
    for scheme in config.schemes:
        for level in grid.levels:
            res = simulate_ensemble(scheme, config.model, mats[level], grid.dt(level), config.sd_mode)
            err = np.abs(res.terminals - ref.terminals)
            flagged = res.overflowed | res.underflowed_to_zero | ~np.isfinite(res.terminals)
            out[(scheme, level)] = (err, flagged)
    return out


def _batch_stats(path_errors: np.ndarray, M: int, L: int, quantile: float):
    # errstate: surviving EM errors can sit near the overflow threshold, and
    # squaring them for the spread may saturate to inf (reported as-is)
    with np.errstate(over="ignore"):
        batch_means = np.empty(M)
        for j in range(M):
            seg = path_errors[j * L : (j + 1) * L]
            finite = np.isfinite(seg)
            batch_means[j] = np.mean(seg[finite]) if np.any(finite) else np.nan
        valid = batch_means[np.isfinite(batch_means)]
        if valid.size == M:
            grand = float(np.mean(batch_means))
            spread = float(np.sum((batch_means - grand) ** 2))
            half_width = quantile * math.sqrt(spread / (M * (M - 1)))
        elif valid.size >= 2:
            # flagged paths emptied whole batches; report over the surviving ones
            grand = float(np.mean(valid))
            m = valid.size
            half_width = quantile * math.sqrt(float(np.sum((valid - grand) ** 2)) / (m * (m - 1)))
        else:
            grand = float("nan")
            half_width = float("nan")
    return batch_means, grand, half_width


def run_endpoint_errors(config: ExperimentConfig, workers: int = 1) -> list[BatchErrorReport]:
    """Coupled strong-error estimates for every (scheme, level) of the config.

    Returns one report per pair, in config scheme order and ascending level.
    Paths whose candidate value overflowed/saturated are excluded from the
    means and counted in ``n_overflowed``; a non-finite *reference* path
    aborts the experiment instead.
    """
    if workers < 1:
        raise UsageError(f"workers must be >= 1, got {workers}")
    chunks = _chunk_ranges(config.n_paths)
    work = partial(_chunk_endpoint_errors, config)
    if workers == 1 or len(chunks) == 1:
        parts = [work(c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
            parts = list(pool.map(work, chunks))

    M, L = config.batches, config.paths_per_batch
    quantile = t_quantile(config.alpha, M, config.t_quantile_override)
    reports = []
    for scheme in config.schemes:
        for level in config.grid.levels:
            err = np.concatenate([p[(scheme, level)][0] for p in parts])
            flagged = np.concatenate([p[(scheme, level)][1] for p in parts])
            path_errors = np.where(flagged, np.nan, err)
            batch_means, grand, half_width = _batch_stats(path_errors, M, L, quantile)
            reports.append(
                BatchErrorReport(
                    scheme=scheme,
                    level_exponent=level,
                    dt=config.grid.dt(level),
                    batch_means=batch_means,
                    grand_mean=grand,
                    ci_half_width=half_width,
                    quantile_used=quantile,
                    n_overflowed=int(np.count_nonzero(flagged)),
                    path_errors=path_errors,
                )
            )
    return reports


def _resolve_census_grid(model: ModelSpec, level_exponent, dt, n_steps):
    if (level_exponent is None) == (dt is None):
        raise UsageError("provide exactly one of level_exponent or dt")
    if level_exponent is not None:
        if n_steps is not None:
            raise UsageError("n_steps applies only with an explicit dt")
        if not (0 <= level_exponent <= 30):
            raise UsageError(f"level_exponent out of range: {level_exponent}")
        return 2**level_exponent, model.T * 2.0 ** (-level_exponent)
    if not (dt > 0):
        raise UsageError(f"dt must be positive, got {dt}")
    if n_steps is None:
        n_steps = round(model.T / dt)
        if n_steps < 1 or abs(n_steps * dt - model.T) > 1e-6 * model.T:
            raise UsageError(
                f"dt={dt} does not divide the horizon T={model.T}; pass n_steps explicitly"
            )
    return int(n_steps), float(dt)


def negativity_census(
    scheme: SchemeKind,
    model: ModelSpec,
    n_paths: int,
    seed: int,
    level_exponent: int | None = None,
    dt: float | None = None,
    n_steps: int | None = None,
    sd_mode: str = "left_point",
    max_examples: int = 10,
) -> NegativityCensus:
    """Simulate independent paths and aggregate first-negative statistics.

    The grid is either dyadic (``level_exponent``) or explicit (``dt`` with
    optional ``n_steps``), since the canonical negativity experiments use
    dt = 1e-3. Negativity is measured from the simulated iterates for every
    scheme, including the positivity-preserving ones.
    """
    if n_paths < 1:
        raise UsageError(f"n_paths must be >= 1, got {n_paths}")
    steps, step_dt = _resolve_census_grid(model, level_exponent, dt, n_steps)
    histogram: Counter[int] = Counter()
    examples: list[float] = []
    n_negative = 0
    min_iterate = math.inf
    first_negative_path = None
    for start, stop in _chunk_ranges(n_paths):
        inc = np.stack(
            [gaussian_increments(seed, i, steps, step_dt) for i in range(start, stop)]
        )
        res = simulate_ensemble(scheme, model, inc, step_dt, sd_mode, track_negativity=True)
        neg = res.first_negative_step >= 0
        n_negative += int(np.count_nonzero(neg))
        if first_negative_path is None and np.any(neg):
            first_negative_path = start + int(np.argmax(neg))
        for s in res.first_negative_step[neg]:
            histogram[int(s)] += 1
        if len(examples) < max_examples:
            for v in res.first_negative_value[neg][: max_examples - len(examples)]:
                examples.append(float(v))
        finite_min = res.min_iterate[np.isfinite(res.min_iterate)]
        if finite_min.size:
            min_iterate = min(min_iterate, float(np.min(finite_min)))
    return NegativityCensus(
        scheme=SchemeKind(scheme),
        n_paths=n_paths,
        n_steps=steps,
        dt=step_dt,
        fraction_negative=n_negative / n_paths,
        step_histogram=dict(sorted(histogram.items())),
        example_first_values=tuple(examples),
        min_iterate=min_iterate,
        first_negative_path_index=first_negative_path,
    )
