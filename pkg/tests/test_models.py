import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semidiscrete import (
    Coefficient,
    DomainError,
    Family,
    ModelSpec,
    NAMED_PHIS,
    PHI_ONE,
    PHI_SIN,
    PhiBoundError,
    PhiFn,
    UsageError,
    check_phi_bound,
    eval_diffusion,
    eval_drift,
    example1,
    example2,
    example3,
    heston32,
    inverse_transform,
    signed_power,
    transform_example2,
    validate_parameters,
)


# ---------------------------------------------------------------- coefficients


def test_constant_coefficient_bounds_are_exact():
    c = Coefficient.constant(70.0)
    assert c.at(0.0) == 70.0 == c.at(0.73)
    assert c.minimum == c.maximum == 70.0


def test_tabulated_coefficient_is_left_continuous():
    c = Coefficient.tabulated([0.0, 0.5], [7.0, 9.0])
    assert c.at(0.0) == 7.0
    assert c.at(0.5) == 7.0  # value held on (0, 0.5]
    assert c.at(np.nextafter(0.5, 1.0)) == 9.0
    assert c.at(1.0) == 9.0
    assert (c.minimum, c.maximum) == (7.0, 9.0)


def test_tabulated_coefficient_rejects_bad_grids():
    with pytest.raises(UsageError):
        Coefficient.tabulated([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(UsageError):
        Coefficient.tabulated([], [])
    with pytest.raises(DomainError):
        Coefficient.tabulated([0.0], [float("inf")])


def test_hook_coefficient_uses_caller_bounds():
    c = Coefficient.from_hook(lambda t: 7.0 + 2.0 * t, minimum=7.0, maximum=9.0)
    assert c.at(0.5) == 8.0
    assert (c.minimum, c.maximum) == (7.0, 9.0)
    with pytest.raises(UsageError):
        Coefficient.from_hook(lambda t: t, minimum=1.0, maximum=0.0)


# ---------------------------------------------------------------- constructors


def test_model_constructors_reject_bad_inputs():
    with pytest.raises(UsageError):
        heston32(1.0, 1.0, 1.0, x0=0.0, T=1.0)
    with pytest.raises(UsageError):
        heston32(1.0, 1.0, 1.0, x0=1.0, T=0.0)
    with pytest.raises(UsageError):
        heston32(Coefficient.tabulated([0.0], [1.0]), 1.0, 1.0, x0=1.0, T=1.0)
    with pytest.raises(UsageError):
        ModelSpec(Family.HESTON_32, Coefficient.constant(1.0), Coefficient.constant(1.0),
                  Coefficient.constant(1.0), 1.0, 1.0, phi=PHI_SIN)
    with pytest.raises(UsageError):
        example2(1.0, 1.0, 1.0, r=1.5, x0=1.0, T=1.0)
    with pytest.raises(UsageError):
        example2(1.0, 1.0, 1.0, r=0.9, x0=1.0, T=1.0)
    with pytest.raises(UsageError):
        example3(1.0, 1.0, 1.0, r=1.7, q=4, x0=1.0, T=1.0)
    with pytest.raises(UsageError):
        example3(1.0, 1.0, 1.0, r=1.4, q=3, x0=1.0, T=1.0)


def test_named_phis():
    assert NAMED_PHIS["one"] is PHI_ONE
    x = np.array([-2.0, 0.0, 3.0])
    np.testing.assert_array_equal(PHI_ONE(x), np.ones(3))
    np.testing.assert_array_equal(NAMED_PHIS["sin"](x), np.sin(x))


# ------------------------------------------------------------ drift/diffusion


def test_drift_values():
    m = heston32(1.0, 1000.0, 1.0, x0=1.0, T=1.0)
    assert eval_drift(m, 0.0, 1.0) == -999.0
    assert eval_drift(m, 0.0, 0.0) == 0.0

    m2 = example2(1.0, 1.0, 1.0, r=1.25, x0=1.0, T=1.0)
    assert eval_drift(m2, 0.0, 2.0) == pytest.approx(2.0 - 2.0**1.5, rel=1e-15)

    m3 = example3(2.0, 3.0, 1.0, r=1.75, q=3, x0=1.0, T=1.0)
    assert eval_drift(m3, 0.0, 2.0) == 2.0 * 2.0 - 3.0 * 8.0


def test_diffusion_values():
    m = heston32(1.0, 1.0, 1.0, x0=1.0, T=1.0)
    assert eval_diffusion(m, 0.0, 4.0) == 8.0
    assert eval_diffusion(m, 0.0, 0.0) == 0.0

    msin = example1(1.0, 4.0, 1.0, x0=1.0, T=1.0, phi=PHI_SIN)
    assert eval_diffusion(msin, 0.0, 1.0) == pytest.approx(math.sin(1.0), rel=1e-15)


def test_negative_states_use_sign_convention():
    m = heston32(1.0, 1.0, 1.0, x0=1.0, T=1.0)
    # x^(3/2) -> sign(x)|x|^(3/2): diffusion at -4 mirrors +4
    assert eval_diffusion(m, 0.0, -4.0) == -8.0
    m2 = example2(1.0, 1.0, 1.0, r=1.25, x0=1.0, T=1.0)
    assert eval_drift(m2, 0.0, -2.0) == pytest.approx(-2.0 + 2.0**1.5, rel=1e-15)
    assert signed_power(-8.0, 1.0 / 3.0) == pytest.approx(-2.0, rel=1e-15)


def test_time_varying_coefficients_evaluate_at_t():
    k2 = Coefficient.tabulated([0.0, 0.5], [1.0, 2.0])
    m = example1(1.0, k2, 1.0, x0=1.0, T=1.0)
    assert eval_drift(m, 0.25, 1.0) == 0.0
    assert eval_drift(m, 0.75, 1.0) == -1.0


def test_scalar_overflow_raises_diagnostic():
    from semidiscrete import OverflowDiagnostic

    m = heston32(1.0, 1e300, 1.0, x0=1.0, T=1.0)
    with np.errstate(over="ignore"):
        with pytest.raises(OverflowDiagnostic):
            eval_drift(m, 0.0, 1e200)
        arr = eval_drift(m, 0.0, np.array([1e200]))  # arrays left to the caller
    assert not np.isfinite(arr[0])


def test_phi_bound_spot_check():
    bad = PhiFn(fn=lambda x: 2.0 * np.ones_like(np.asarray(x, dtype=float)),
                k_phi=1.0, name="bad")
    with pytest.raises(PhiBoundError):
        check_phi_bound(bad, bad(np.array([1.0])))
    m = example1(1.0, 4.0, 1.0, x0=1.0, T=1.0, phi=bad)
    with pytest.raises(PhiBoundError):
        eval_diffusion(m, 0.0, 1.0)
    # sin stays within its declared bound
    check_phi_bound(PHI_SIN, PHI_SIN(np.linspace(-10, 10, 101)))


# ------------------------------------------------------------------ validation


def test_validation_heston32_ok_and_violation():
    ok = validate_parameters(heston32(0.1, 70.0, math.sqrt(0.2), 1.0, 1.0))
    assert ok.status == "ok"
    (f,) = ok.findings
    assert f.lhs == pytest.approx(70.0)
    assert f.rhs == pytest.approx(0.7)

    # boundary case: 0.7 > 0.7 is false, strict inequality required
    bad = validate_parameters(heston32(0.1, 0.7 * 0.9999999, math.sqrt(0.2), 1.0, 1.0))
    assert bad.status == "violation"


def test_validation_near_boundary_warns():
    rep = validate_parameters(heston32(0.1, 0.72, math.sqrt(0.2), 1.0, 1.0))
    assert rep.status == "warning"
    assert rep.findings[0].ok and rep.findings[0].near_boundary


def test_validation_phi_bound_scales_condition():
    # K_phi = 1 for sin; with k3 = 1 the bound is 3.5
    rep = validate_parameters(example1(1.0, 4.0, 1.0, 1.0, 1.0, phi=PHI_SIN))
    assert rep.status == "ok"
    assert rep.findings[0].rhs == pytest.approx(3.5)


def test_validation_example2():
    # 2*10 = 20 vs (25 - 11.25)/0.25 = 55: violated
    rep = validate_parameters(example2(1.0, 10.0, 1.0, r=1.25, x0=1.0, T=1.0))
    assert rep.status == "violation"
    assert rep.findings[0].lhs == pytest.approx(20.0)
    assert rep.findings[0].rhs == pytest.approx(55.0)

    rep2 = validate_parameters(example2(1.0, 30.0, 1.0, r=1.25, x0=1.0, T=1.0))
    assert rep2.status == "ok"


def test_validation_example3():
    rep = validate_parameters(example3(1.0, 1.0, 1.0, r=1.75, q=5, x0=1.0, T=1.0))
    assert rep.status == "ok"
    rep2 = validate_parameters(example3(1.0, 1.0, 1.0, r=1.9, q=279, x0=1.0, T=1.0))
    assert rep2.status == "ok"


def test_validation_uses_min_max_bounds_of_time_varying_coefficients():
    k2 = Coefficient.tabulated([0.0, 0.5], [70.0, 0.5])  # dips below 0.7
    rep = validate_parameters(example1(0.1, k2, math.sqrt(0.2), 1.0, 1.0))
    assert rep.status == "violation"


@given(
    k2a=st.floats(0.01, 1e3),
    bump=st.floats(0.0, 1e3),
    k3=st.floats(0.01, 10.0),
)
@settings(max_examples=100, deadline=None)
def test_validation_monotone_in_k2(k2a, bump, k3):
    """Increasing k2 never turns an ok report into a violation."""
    lo = validate_parameters(heston32(0.1, k2a, k3, 1.0, 1.0))
    hi = validate_parameters(heston32(0.1, k2a + bump, k3, 1.0, 1.0))
    if lo.status != "violation":
        assert hi.status != "violation"


# ------------------------------------------------------------------- transform


def test_transform_example2_constants():
    m = example2(1.0, 10.0, 1.0, r=1.25, x0=4.0, T=1.0)
    z = transform_example2(m)
    assert z.family is Family.EXAMPLE_I
    assert z.k1.value == pytest.approx(0.5, rel=1e-15)
    assert z.k2.value == pytest.approx(5.125, rel=1e-15)
    assert z.k3.value == pytest.approx(0.5, rel=1e-15)
    assert z.x0 == pytest.approx(2.0, rel=1e-15)
    assert z.T == m.T
    assert z.phi is PHI_ONE


def test_transform_k2_limit_as_r_to_three_halves():
    m = example2(1.0, 10.0, 3.0, r=1.5 - 1e-9, x0=1.0, T=1.0)
    z = transform_example2(m)
    # the Ito correction carries a (2r-3) factor that vanishes at r = 3/2
    assert z.k2.value == pytest.approx(10.0, rel=1e-6)


def test_transform_wrong_family_rejected():
    with pytest.raises(UsageError):
        transform_example2(heston32(1.0, 1.0, 1.0, 1.0, 1.0))


def test_transform_time_varying_coefficients_become_bounded_hooks():
    k2 = Coefficient.tabulated([0.0, 0.5], [10.0, 20.0])
    m = example2(1.0, k2, 1.0, r=1.25, x0=1.0, T=1.0)
    z = transform_example2(m)
    assert z.k2.at(0.25) == pytest.approx(0.5 * 10.0 + 0.125, rel=1e-15)
    assert z.k2.at(0.75) == pytest.approx(0.5 * 20.0 + 0.125, rel=1e-15)
    assert z.k2.minimum <= 5.125 and z.k2.maximum >= 10.125


def test_inverse_transform_values():
    assert inverse_transform(2.0, 1.25) == pytest.approx(4.0, rel=1e-15)
    assert inverse_transform(1.0, 1.2) == 1.0
    x = 3.7
    assert inverse_transform(x ** (2 * 1.2 - 2.0), 1.2) == pytest.approx(x, rel=1e-13)


def test_inverse_transform_domain():
    with pytest.raises(DomainError):
        inverse_transform(0.0, 1.25)
    with pytest.raises(DomainError):
        inverse_transform(-1.0, 1.25)
    with pytest.raises(UsageError):
        inverse_transform(1.0, 1.6)


@given(
    x=st.floats(1e-6, 1e6),
    r=st.floats(1.001, 1.4999),
)
@settings(max_examples=300, deadline=None)
def test_transform_round_trip(x, r):
    """x -> x^(2r-2) -> back, to 1e-12 relative.

    The exponent 1/(2r-2) blows up as r -> 1, amplifying the power
    function's ulp-level error by ~1/(2r-2); at r >= 1.001 the amplification
    is <= 500x machine epsilon, comfortably inside the bound.
    """
    z = x ** (2.0 * r - 2.0)
    assert inverse_transform(z, r) == pytest.approx(x, rel=1e-12)


@given(
    x=st.floats(1e-3, 1e3),
    t=st.floats(0.0, 1.0),
    k1=st.floats(0.1, 10.0),
    k2=st.floats(0.1, 10.0),
    k3=st.floats(0.1, 3.0),
    r=st.floats(1.05, 1.45),
)
@settings(max_examples=200, deadline=None)
def test_transform_consistency_ito_identity(x, t, k1, k2, k3, r):
    """Drift of the transformed model at z = x^(2r-2) equals the Ito image
    p x^(p-1) a(x) + (p(p-1)/2) x^(p-2) b(x)^2 of the original coefficients."""
    m = example2(k1, k2, k3, r=r, x0=1.0, T=1.0)
    z = transform_example2(m)
    p = 2.0 * r - 2.0
    zx = x**p
    lhs = eval_drift(z, t, zx)
    a = eval_drift(m, t, x)
    b = eval_diffusion(m, t, x)
    rhs = p * x ** (p - 1.0) * a + 0.5 * p * (p - 1.0) * x ** (p - 2.0) * b * b
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
