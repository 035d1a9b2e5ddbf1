"""SDE model families: coefficient evaluation, validation, and the power transform.

All families describe scalar SDEs of the form

    dx = (k1(t) x - k2(t) x^p) dt + k3(t) x^s phi(x) dW

with family-specific exponents:

    example1 / heston32:  p = 2,      s = 3/2   (heston32 forces phi == 1)
    example2:             p = 2r - 1, s = r,    1 < r < 3/2, phi == 1
    example3:             p = q,      s = r,    3/2 < r < 2, q odd

Fractional powers of negative states (reachable only by the non-positivity-
preserving baseline schemes) are evaluated with the sign convention
``sign(x) * |x|^p``; ``x^(3/2)`` is computed as ``x * sqrt(|x|)``.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DomainError, OverflowDiagnostic, PhiBoundError, UsageError


class Family(str, Enum):
    EXAMPLE_I = "example1"
    EXAMPLE_II = "example2"
    EXAMPLE_III = "example3"
    HESTON_32 = "heston32"


@dataclass(frozen=True)
class Coefficient:
    """A scalar coefficient of time on [0, T].

    Three kinds are supported:

    - ``constant``: fixed value, exact bounds.
    - ``tabulated``: left-continuous step function over strictly increasing
      breakpoints (``times[0]`` anchors the first piece; the last value
      extends to T). Bounds are exact.
    - ``hook``: arbitrary callable; bounds must be supplied by the caller
      since no finite procedure can infer them.
    """

    kind: str
    value: float = 0.0
    times: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    hook: Callable[[float], float] | None = None
    minimum: float = 0.0
    maximum: float = 0.0

    @classmethod
    def constant(cls, value: float) -> "Coefficient":
        v = float(value)
        if not math.isfinite(v):
            raise DomainError(f"constant coefficient must be finite, got {value!r}")
        return cls(kind="constant", value=v, minimum=v, maximum=v)

    @classmethod
    def tabulated(cls, times, values) -> "Coefficient":
        ts = tuple(float(t) for t in times)
        vs = tuple(float(v) for v in values)
        if len(ts) != len(vs) or not ts:
            raise UsageError("tabulated coefficient needs equal-length nonempty times/values")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise UsageError("tabulated coefficient times must be strictly increasing")
        if not all(math.isfinite(v) for v in vs):
            raise DomainError("tabulated coefficient values must be finite")
        return cls(kind="tabulated", times=ts, values=vs, minimum=min(vs), maximum=max(vs))

    @classmethod
    def from_hook(cls, fn: Callable[[float], float], minimum: float, maximum: float) -> "Coefficient":
        if minimum > maximum:
            raise UsageError("hook coefficient bounds must satisfy minimum <= maximum")
        return cls(kind="hook", hook=fn, minimum=float(minimum), maximum=float(maximum))

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def at(self, t: float) -> float:
        """Evaluate at time t. Left-continuous for tabulated coefficients."""
        if self.kind == "constant":
            return self.value
        if self.kind == "tabulated":
            # value held on (times[i], times[i+1]]; t at or before the first
            # breakpoint takes the first value
            idx = bisect_left(self.times, t) - 1
            if idx < 0:
                idx = 0
            return self.values[idx]
        v = float(self.hook(t))
        if not math.isfinite(v):
            raise OverflowDiagnostic(f"coefficient hook returned non-finite value at t={t}", t=t)
        return v


@dataclass(frozen=True)
class PhiFn:
    """Bounded diffusion modifier phi with caller-declared global bound K_phi.

    ``|phi(x)| <= k_phi`` is spot-checked on states encountered during
    simulation; a violation raises :class:`PhiBoundError`. The bound is not
    inferred: callers own it.
    """

    fn: Callable
    k_phi: float
    lipschitz_hint: float | None = None
    name: str = "custom"

    def __call__(self, x):
        return self.fn(x)


def _phi_one(x):
    return np.ones_like(np.asarray(x, dtype=float))


PHI_ONE = PhiFn(fn=_phi_one, k_phi=1.0, name="one")
PHI_SIN = PhiFn(fn=np.sin, k_phi=1.0, lipschitz_hint=1.0, name="sin")

NAMED_PHIS = {"one": PHI_ONE, "sin": PHI_SIN}


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    k1: Coefficient
    k2: Coefficient
    k3: Coefficient
    x0: float
    T: float
    phi: PhiFn | None = None
    r: float | None = None
    q: int | None = None

    def __post_init__(self):
        if not (self.x0 > 0):
            raise UsageError(f"x0 must be positive, got {self.x0}")
        if not (self.T > 0):
            raise UsageError(f"T must be positive, got {self.T}")
        fam = self.family
        if fam in (Family.EXAMPLE_I, Family.HESTON_32):
            if self.phi is None:
                object.__setattr__(self, "phi", PHI_ONE)
            if fam is Family.HESTON_32:
                if self.phi is not PHI_ONE:
                    raise UsageError("heston32 has no phi modifier (use example1 for phi != 1)")
                if not (self.k1.is_constant and self.k2.is_constant and self.k3.is_constant):
                    raise UsageError("heston32 requires constant coefficients")
        elif fam is Family.EXAMPLE_II:
            if self.r is None or not (1.0 < self.r < 1.5):
                raise UsageError(f"example2 requires 1 < r < 3/2, got r={self.r}")
            if self.phi is not None and self.phi is not PHI_ONE:
                raise UsageError("example2 has no phi modifier")
            object.__setattr__(self, "phi", PHI_ONE)
        elif fam is Family.EXAMPLE_III:
            if self.r is None or not (1.5 < self.r < 2.0):
                raise UsageError(f"example3 requires 3/2 < r < 2, got r={self.r}")
            if self.q is None or self.q % 2 == 0:
                raise UsageError(f"example3 requires odd integer q, got q={self.q}")
            if self.phi is None:
                object.__setattr__(self, "phi", PHI_ONE)
        else:  # pragma: no cover - enum is closed
            raise UsageError(f"unknown family {fam!r}")


def _coef(value) -> Coefficient:
    return value if isinstance(value, Coefficient) else Coefficient.constant(value)


def heston32(k1, k2, k3, x0: float, T: float) -> ModelSpec:
    """Heston 3/2 model dx = (k1 x - k2 x^2) dt + k3 x^(3/2) dW, constants only."""
    return ModelSpec(Family.HESTON_32, _coef(k1), _coef(k2), _coef(k3), float(x0), float(T))


def example1(k1, k2, k3, x0: float, T: float, phi: PhiFn = PHI_ONE) -> ModelSpec:
    return ModelSpec(Family.EXAMPLE_I, _coef(k1), _coef(k2), _coef(k3), float(x0), float(T), phi=phi)


def example2(k1, k2, k3, r: float, x0: float, T: float) -> ModelSpec:
    return ModelSpec(Family.EXAMPLE_II, _coef(k1), _coef(k2), _coef(k3), float(x0), float(T), r=float(r))


def example3(k1, k2, k3, r: float, q: int, x0: float, T: float, phi: PhiFn = PHI_ONE) -> ModelSpec:
    return ModelSpec(
        Family.EXAMPLE_III, _coef(k1), _coef(k2), _coef(k3), float(x0), float(T), phi=phi, r=float(r), q=int(q)
    )


def signed_power(x, p: float):
    """sign(x) * |x|^p, the convention for fractional powers of negative states."""
    return np.sign(x) * np.abs(x) ** p


def signed_power_32(x):
    """x^(3/2) under the sign convention, computed as x * sqrt(|x|)."""
    return x * np.sqrt(np.abs(x))


def _drift_formula(model: ModelSpec, k1: float, k2: float, x):
    fam = model.family
    if fam in (Family.EXAMPLE_I, Family.HESTON_32):
        return k1 * x - k2 * (x * x)
    if fam is Family.EXAMPLE_II:
        return k1 * x - k2 * signed_power(x, 2.0 * model.r - 1.0)
    # example3: q odd, so the plain integer power already carries the sign
    return k1 * x - k2 * x ** model.q


def check_phi_bound(phi: PhiFn, values) -> None:
    """Spot-check |phi| <= K_phi on the sampled states (1 ulp-scale slack)."""
    worst = float(np.max(np.abs(values)))
    if worst > phi.k_phi * (1.0 + 1e-12):
        raise PhiBoundError(
            f"phi '{phi.name}' reached |phi|={worst:.6g}, exceeding its declared bound K_phi={phi.k_phi:.6g}"
        )


def _diffusion_formula(model: ModelSpec, k3: float, x):
    fam = model.family
    if fam in (Family.EXAMPLE_I, Family.HESTON_32):
        b = k3 * signed_power_32(x)
    else:
        b = k3 * signed_power(x, model.r)
    phi = model.phi
    if phi is not None and phi is not PHI_ONE:
        pv = phi(x)
        check_phi_bound(phi, pv)
        b = b * pv
    return b


def _check_scalar_finite(value, t, x, what: str):
    if np.ndim(value) == 0 and not np.isfinite(value):
        raise OverflowDiagnostic(f"{what} evaluation is non-finite at t={t}, x={x}", t=t, x=x)
    return value


def eval_drift(model: ModelSpec, t: float, x):
    """Drift a(t, x) of the family; accepts scalars or arrays in x.

    Scalar evaluations raise :class:`OverflowDiagnostic` when the result is
    non-finite; array evaluations leave non-finite entries to the caller.
    """
    a = _drift_formula(model, model.k1.at(t), model.k2.at(t), x)
    return _check_scalar_finite(a, t, x, "drift")


def eval_diffusion(model: ModelSpec, t: float, x):
    """Diffusion b(t, x) of the family; accepts scalars or arrays in x."""
    b = _diffusion_formula(model, model.k3.at(t), x)
    return _check_scalar_finite(b, t, x, "diffusion")


@dataclass(frozen=True)
class Finding:
    condition: str
    lhs: float
    rhs: float
    ok: bool
    near_boundary: bool
    message: str


@dataclass(frozen=True)
class ValidationReport:
    status: str  # "ok" | "warning" | "violation"
    findings: tuple[Finding, ...]


_NEAR_BOUNDARY_REL = 0.05


def _finding(condition: str, lhs: float, rhs: float, label: str) -> Finding:
    ok = lhs > rhs
    near = ok and (lhs - rhs) <= _NEAR_BOUNDARY_REL * abs(rhs)
    word = "holds" if ok else "FAILS"
    if near:
        word = "holds within 5% of the boundary"
    return Finding(condition, lhs, rhs, ok, near, f"{label}: {lhs:.6g} > {rhs:.6g} {word}")


def _abs_bound(c: Coefficient) -> float:
    return max(abs(c.minimum), abs(c.maximum))


def validate_parameters(model: ModelSpec) -> ValidationReport:
    """Check the convergence-guarantee conditions for the family.

    Advisory only: a violation means the convergence-rate guarantees are not
    in force, not that simulation is impossible; nothing here ever blocks a
    run.
    """
    findings: list[Finding] = []
    k2min = model.k2.minimum
    k3bound = _abs_bound(model.k3)
    fam = model.family
    if fam in (Family.EXAMPLE_I, Family.HESTON_32):
        kphi = model.phi.k_phi if model.phi is not None else 1.0
        findings.append(
            _finding("k2_min > 3.5*(K_phi*k3_max)^2", k2min, 3.5 * (kphi * k3bound) ** 2,
                     "mean-reversion strength vs diffusion bound")
        )
    elif fam is Family.EXAMPLE_II:
        r = model.r
        findings.append(
            _finding("2*k2_min > ((25-9r)/(r-1))*k3_max^2", 2.0 * k2min,
                     ((25.0 - 9.0 * r) / (r - 1.0)) * k3bound**2,
                     "mean-reversion strength vs diffusion bound")
        )
        findings.append(
            Finding("1 < r < 3/2", r, 0.0, True, False, f"exponent range: r={r} in (1, 3/2)")
        )
    else:
        r, q = model.r, model.q
        findings.append(
            Finding("q odd", float(q), 0.0, q % 2 == 1, False, f"q={q} is odd")
        )
        findings.append(
            _finding("q > 2r - 1", float(q), 2.0 * r - 1.0, "drift power dominates diffusion power")
        )
        findings.append(
            Finding("3/2 < r < 2", r, 0.0, 1.5 < r < 2.0, False, f"exponent range: r={r} in (3/2, 2)")
        )
    if any(not f.ok for f in findings):
        status = "violation"
    elif any(f.near_boundary for f in findings):
        status = "warning"
    else:
        status = "ok"
    return ValidationReport(status=status, findings=tuple(findings))


def _interval_square(lo: float, hi: float) -> tuple[float, float]:
    """Range of x^2 over [lo, hi]."""
    if lo <= 0.0 <= hi:
        return 0.0, max(lo * lo, hi * hi)
    return min(lo * lo, hi * hi), max(lo * lo, hi * hi)


def transform_example2(model: ModelSpec) -> ModelSpec:
    """Change of variables z = x^(2r-2) mapping example2 onto the 3/2 family.

    The transformed process satisfies dz = (K1 z - K2 z^2) dt + K3 z^(3/2) dW
    with K1 = (2r-2) k1, K2 = (2r-2) k2 - ((2r-2)(2r-3)/2) k3^2,
    K3 = (2r-2) k3 and z0 = x0^(2r-2). Constant coefficients transform to
    constants; time-varying ones become hooks with interval-arithmetic bounds.
    """
    if model.family is not Family.EXAMPLE_II:
        raise UsageError(f"transform_example2 applies to example2 models, got {model.family.value}")
    r = model.r
    p = 2.0 * r - 2.0
    c = p * (2.0 * r - 3.0) / 2.0  # negative for r < 3/2
    k1, k2, k3 = model.k1, model.k2, model.k3

    if k1.is_constant and k2.is_constant and k3.is_constant:
        K1 = Coefficient.constant(p * k1.value)
        K2 = Coefficient.constant(p * k2.value - c * k3.value**2)
        K3 = Coefficient.constant(p * k3.value)
    else:
        sq_lo, sq_hi = _interval_square(k3.minimum, k3.maximum)
        # -c >= 0, so the k3^2 term only shifts K2 upward
        K1 = Coefficient.from_hook(lambda t: p * k1.at(t), p * k1.minimum, p * k1.maximum)
        K2 = Coefficient.from_hook(
            lambda t: p * k2.at(t) - c * k3.at(t) ** 2,
            p * k2.minimum - c * sq_lo,
            p * k2.maximum - c * sq_hi,
        )
        K3 = Coefficient.from_hook(lambda t: p * k3.at(t), p * k3.minimum, p * k3.maximum)

    return ModelSpec(Family.EXAMPLE_I, K1, K2, K3, model.x0**p, model.T, phi=PHI_ONE)


def inverse_transform(z, r: float):
    """Map a transformed state back: z -> z^(1/(2r-2)). Requires z > 0."""
    if not (1.0 < r < 1.5):
        raise UsageError(f"inverse_transform requires 1 < r < 3/2, got r={r}")
    if np.ndim(z) == 0:
        if not (z > 0):
            raise DomainError(f"inverse_transform requires z > 0, got {z}")
    elif not np.all(np.asarray(z) > 0):
        raise DomainError("inverse_transform requires all entries > 0")
    return z ** (1.0 / (2.0 * r - 2.0))
