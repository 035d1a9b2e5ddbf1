"""One-step update rules and path simulators.

Four steppers are provided:

- SD: freeze the coefficients at the current iterate so the within-step SDE
  is linear and exactly solvable; the update is an explicit exponential and
  the iterate stays strictly positive.
- TAMED: explicit Euler with the whole increment normalized by
  ``max(1, dt * |increment|)``, bounding each step by 1/dt.
- HMS: implicit Milstein for the constant-coefficient 3/2 family, solved in
  closed form via the positive root of the step quadratic.
- EM: plain Euler-Maruyama (diverges for these models; kept as the anchor of
  the negativity/explosion comparisons).

Every stepper has a single vectorized kernel shared by the scalar step
operations, the path simulator, and the Monte Carlo ensemble engine, so a
path simulated alone is bit-identical to the same path inside a batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import OverflowDiagnostic, UsageError
from .models import (
    PHI_ONE,
    Family,
    ModelSpec,
    _diffusion_formula,
    _drift_formula,
    check_phi_bound,
    inverse_transform,
    transform_example2,
)

# SD exponents are clamped here before exponentiation; beyond the clamp the
# step saturates and raises a flag instead of silently producing 0 or inf.
EXPONENT_CLAMP = 700.0

# Smallest positive subnormal: the floor that keeps SD iterates > 0 when the
# product y * exp(clamped exponent) underflows to zero.
_POSITIVE_FLOOR = float(np.nextafter(0.0, 1.0))

SD_MODES = ("left_point", "midpoint")


class SchemeKind(str, Enum):
    SD = "sd"
    TAMED = "tamed"
    HMS = "hms"
    EM = "em"


@dataclass(frozen=True)
class StepInput:
    t_n: float
    y_n: float
    dt: float
    dW: float

    def __post_init__(self):
        if not (self.dt > 0):
            raise UsageError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class PathResult:
    terminal: float
    first_negative_step: int | None
    first_negative_value: float | None
    overflowed: bool
    underflowed_to_zero: bool
    min_iterate: float


@dataclass(frozen=True)
class EnsembleResult:
    """Per-path terminals and diagnostics for a batch of simulated paths.

    ``first_negative_step`` is 1-based (step n produces iterate y_n) and -1
    for paths that never went negative; ``first_negative_value`` is NaN for
    those paths.
    """

    terminals: np.ndarray
    first_negative_step: np.ndarray
    first_negative_value: np.ndarray
    overflowed: np.ndarray
    underflowed_to_zero: np.ndarray
    min_iterate: np.ndarray


def _require_sd_mode(sd_mode: str) -> None:
    if sd_mode not in SD_MODES:
        raise UsageError(f"sd_mode must be one of {SD_MODES}, got {sd_mode!r}")


def _make_sd_step(model: ModelSpec, dt: float, sd_mode: str):
    _require_sd_mode(sd_mode)
    fam = model.family
    if fam is Family.EXAMPLE_II:
        raise UsageError(
            "SD steps example2 models through transform_example2; "
            "simulate_path/simulate_ensemble apply the transform automatically"
        )
    phi = model.phi
    plain_phi = phi is None or phi is PHI_ONE
    if fam is Family.EXAMPLE_III:
        qm1 = float(model.q - 1)
        rm1 = model.r - 1.0
    t_offset = 0.5 * dt if sd_mode == "midpoint" else 0.0

    def step(t, y, dW):
        tc = t + t_offset
        k1 = model.k1.at(tc)
        k2 = model.k2.at(tc)
        k3 = model.k3.at(tc)
        if fam is Family.EXAMPLE_III:
            sig = k3 * y**rm1
            ypow = y**qm1
        else:
            sig = k3 * np.sqrt(y)
            ypow = y
        if not plain_phi:
            pv = phi(y)
            check_phi_bound(phi, pv)
            sig = sig * pv
        expo = (k1 - k2 * ypow - 0.5 * (sig * sig)) * dt + sig * dW
        over = expo > EXPONENT_CLAMP
        under = expo < -EXPONENT_CLAMP
        y1 = y * np.exp(np.clip(expo, -EXPONENT_CLAMP, EXPONENT_CLAMP))
        over = over | np.isinf(y1)
        zero = y1 == 0.0
        if np.any(zero):
            y1 = np.where(zero, _POSITIVE_FLOOR, y1)
            under = under | zero
        return y1, over, under

    return step


def _make_euler_step(model: ModelSpec, dt: float, tamed: bool):
    def step(t, y, dW):
        a = _drift_formula(model, model.k1.at(t), model.k2.at(t), y)
        b = _diffusion_formula(model, model.k3.at(t), y)
        inc = a * dt + b * dW
        if tamed:
            inc = inc / np.maximum(1.0, dt * np.abs(inc))
        y1 = y + inc
        over = ~np.isfinite(y1)
        return y1, over, np.zeros_like(over)

    return step


def _hms_compatible(model: ModelSpec) -> bool:
    if model.family is Family.HESTON_32:
        return True
    return (
        model.family is Family.EXAMPLE_I
        and model.k1.is_constant
        and model.k2.is_constant
        and model.k3.is_constant
        and (model.phi is None or model.phi is PHI_ONE)
    )


def _make_hms_step(model: ModelSpec, dt: float):
    if not _hms_compatible(model):
        raise UsageError(
            "HMS is defined only for constant-coefficient 3/2 models "
            "(heston32, or example1 with constant k_i and phi == 1)"
        )
    k1 = model.k1.value
    k2 = model.k2.value
    k3 = model.k3.value
    if k1 > 0 and dt >= 1.0 / k1:
        raise UsageError(f"HMS needs dt < 1/k1 = {1.0 / k1:.6g}, got dt = {dt:.6g}")
    A = (k2 + 0.75 * k3 * k3) * dt
    B = 1.0 - k1 * dt
    if A <= 0:
        raise UsageError("HMS needs k2 + (3/4) k3^2 > 0")

    def step(t, y, dW):
        u = k3 * np.sqrt(y) * dW
        # bracket 1 + u + (3/4) u^2 >= 2/3, so S > 0 and the root is positive;
        # the conjugate form avoids cancellation when A*S is small
        S = y * (1.0 + u + 0.75 * (u * u))
        y1 = (2.0 * S) / (B + np.sqrt(B * B + 4.0 * A * S))
        over = ~np.isfinite(y1)
        return y1, over, np.zeros_like(over)

    return step


def _make_step(scheme: SchemeKind, model: ModelSpec, dt: float, sd_mode: str):
    if scheme is SchemeKind.SD:
        return _make_sd_step(model, dt, sd_mode)
    if scheme is SchemeKind.HMS:
        return _make_hms_step(model, dt)
    if scheme is SchemeKind.TAMED:
        return _make_euler_step(model, dt, tamed=True)
    if scheme is SchemeKind.EM:
        return _make_euler_step(model, dt, tamed=False)
    raise UsageError(f"unknown scheme {scheme!r}")


def simulate_ensemble(
    scheme: SchemeKind,
    model: ModelSpec,
    increments: np.ndarray,
    dt: float,
    sd_mode: str = "left_point",
    track_negativity: bool | None = None,
) -> EnsembleResult:
    """Simulate one path per row of ``increments`` (shape: paths x steps).

    Paths that produce a non-finite iterate are frozen at that value and
    flagged as overflowed. For SD on example2 models the simulation runs on
    the transformed model and terminals are mapped back; the per-path
    diagnostics then describe the transformed iterates.

    ``track_negativity`` defaults to tracking only for the schemes that can
    go negative (TAMED, EM); pass True to measure it for every scheme, as the
    negativity census does.
    """
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 2 or increments.shape[1] == 0:
        raise UsageError("increments must be a nonempty 2-D array (paths x steps)")
    if not (dt > 0):
        raise UsageError(f"dt must be positive, got {dt}")
    sim_model = model
    back_r = None
    if scheme is SchemeKind.SD and model.family is Family.EXAMPLE_II:
        sim_model = transform_example2(model)
        back_r = model.r
    stepper = _make_step(scheme, sim_model, dt, sd_mode)

    n_paths, n_steps = increments.shape
    y = np.full(n_paths, float(sim_model.x0))
    min_iterate = y.copy()
    first_neg_step = np.full(n_paths, -1, dtype=np.int64)
    first_neg_value = np.full(n_paths, np.nan)
    overflowed = np.zeros(n_paths, dtype=bool)
    underflowed = np.zeros(n_paths, dtype=bool)
    active = np.ones(n_paths, dtype=bool)
    if track_negativity is None:
        track_negativity = scheme in (SchemeKind.TAMED, SchemeKind.EM)

    with np.errstate(all="ignore"):
        for n in range(n_steps):
            y_new, over, under = stepper(n * dt, y, increments[:, n])
            y = np.where(active, y_new, y)
            overflowed |= active & over
            underflowed |= active & under
            if track_negativity:
                hit = active & (y < 0.0) & (first_neg_step < 0)
                if np.any(hit):
                    first_neg_step = np.where(hit, n + 1, first_neg_step)
                    first_neg_value = np.where(hit, y, first_neg_value)
            np.fmin(min_iterate, y, out=min_iterate)
            active &= np.isfinite(y)
            if not active.any():
                break

    terminals = y
    if back_r is not None:
        terminals = inverse_transform(terminals, back_r)
    return EnsembleResult(
        terminals=terminals,
        first_negative_step=first_neg_step,
        first_negative_value=first_neg_value,
        overflowed=overflowed,
        underflowed_to_zero=underflowed,
        min_iterate=min_iterate,
    )


def simulate_path(
    scheme: SchemeKind,
    model: ModelSpec,
    increments: np.ndarray,
    dt: float,
    sd_mode: str = "left_point",
) -> PathResult:
    """Iterate the stepper from x0 over the given increments."""
    arr = np.asarray(increments, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise UsageError("increments must be a nonempty 1-D array")
    res = simulate_ensemble(scheme, model, arr[None, :], dt, sd_mode)
    step_idx = int(res.first_negative_step[0])
    return PathResult(
        terminal=float(res.terminals[0]),
        first_negative_step=None if step_idx < 0 else step_idx,
        first_negative_value=None if step_idx < 0 else float(res.first_negative_value[0]),
        overflowed=bool(res.overflowed[0]),
        underflowed_to_zero=bool(res.underflowed_to_zero[0]),
        min_iterate=float(res.min_iterate[0]),
    )


def simulate_series(
    scheme: SchemeKind,
    model: ModelSpec,
    increments: np.ndarray,
    dt: float,
    sd_mode: str = "left_point",
) -> np.ndarray:
    """Full iterate series y_0 .. y_N along one path (length N + 1).

    After a non-finite iterate the remaining entries repeat it (the path is
    frozen, as in :func:`simulate_ensemble`). SD on example2 returns the
    series mapped back to the original coordinates.
    """
    arr = np.asarray(increments, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise UsageError("increments must be a nonempty 1-D array")
    sim_model = model
    back_r = None
    if scheme is SchemeKind.SD and model.family is Family.EXAMPLE_II:
        sim_model = transform_example2(model)
        back_r = model.r
    stepper = _make_step(scheme, sim_model, dt, sd_mode)
    out = np.empty(arr.size + 1)
    y = np.array([float(sim_model.x0)])
    out[0] = y[0]
    with np.errstate(all="ignore"):
        for n in range(arr.size):
            y, _, _ = stepper(n * dt, y, arr[n : n + 1])
            out[n + 1] = y[0]
            if not np.isfinite(y[0]):
                out[n + 1 :] = y[0]
                break
    if back_r is not None:
        out = inverse_transform(out, back_r)
    return out


def _scalar_step(scheme: SchemeKind, model: ModelSpec, s: StepInput, sd_mode: str):
    stepper = _make_step(scheme, model, s.dt, sd_mode)
    with np.errstate(all="ignore"):
        y1, over, under = stepper(s.t_n, np.array([float(s.y_n)]), np.array([float(s.dW)]))
    return float(y1[0]), bool(over[0]), bool(under[0])


def sd_step(model: ModelSpec, s: StepInput, sd_mode: str = "left_point") -> float:
    """One SD update; strictly positive for y_n > 0 (saturating at the clamp)."""
    if not (s.y_n > 0):
        raise UsageError(f"sd_step requires y_n > 0, got {s.y_n}")
    value, _, _ = _scalar_step(SchemeKind.SD, model, s, sd_mode)
    return value


def tamed_step(model: ModelSpec, s: StepInput) -> float:
    """One tamed-Euler update; the increment magnitude is bounded by 1/dt."""
    value, over, _ = _scalar_step(SchemeKind.TAMED, model, s, "left_point")
    if over:
        raise OverflowDiagnostic(
            f"tamed step is non-finite at t={s.t_n}, y={s.y_n}", t=s.t_n, x=s.y_n
        )
    return value


def em_step(model: ModelSpec, s: StepInput) -> float:
    """One Euler-Maruyama update."""
    value, over, _ = _scalar_step(SchemeKind.EM, model, s, "left_point")
    if over:
        raise OverflowDiagnostic(
            f"Euler step is non-finite at t={s.t_n}, y={s.y_n}", t=s.t_n, x=s.y_n
        )
    return value


def hms_step(model: ModelSpec, s: StepInput) -> float:
    """One implicit-Milstein update via the positive root of the step quadratic."""
    if not (s.y_n > 0):
        raise UsageError(f"hms_step requires y_n > 0, got {s.y_n}")
    value, _, _ = _scalar_step(SchemeKind.HMS, model, s, "left_point")
    return value
