import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semidiscrete import (
    GridSpec,
    UsageError,
    coarsen,
    coarsen_increments,
    dump_lattice,
    gaussian_increments,
    generate_lattice,
    increment_matrix,
    load_lattice,
    pairwise_halve,
)


def grid(levels=(1, 3, 5), ref=10, T=1.0):
    return GridSpec(T=T, levels=tuple(levels), reference_exponent=ref)


# -------------------------------------------------------------------- GridSpec


def test_grid_dt():
    g = grid(ref=14)
    assert g.dt(14) == 2.0**-14
    assert g.dt(1) == 0.5
    assert grid(T=2.0).dt(1) == 1.0


def test_grid_rejects_bad_levels():
    with pytest.raises(UsageError):
        GridSpec(T=1.0, levels=(3, 1), reference_exponent=10)
    with pytest.raises(UsageError):
        GridSpec(T=1.0, levels=(1, 12), reference_exponent=10)
    with pytest.raises(UsageError):
        GridSpec(T=0.0, levels=(1,), reference_exponent=10)


# ----------------------------------------------------------------- determinism


def test_lattice_regeneration_is_bit_identical():
    g = grid()
    a = generate_lattice(7, 3, g)
    b = generate_lattice(7, 3, g)
    np.testing.assert_array_equal(a.fine_increments, b.fine_increments)
    assert a.fine_increments.shape == (2**10,)


def test_lattice_differs_across_paths_and_seeds():
    g = grid()
    a = generate_lattice(7, 0, g).fine_increments
    b = generate_lattice(7, 1, g).fine_increments
    c = generate_lattice(8, 0, g).fine_increments
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_streams_pass_independence_and_moment_checks():
    g = grid(ref=14)
    a = generate_lattice(63018, 0, g).fine_increments
    b = generate_lattice(63018, 1, g).fine_increments
    n = a.size
    sd = np.sqrt(2.0**-14)
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 4.0 / np.sqrt(n)
    # CLT bound at 4 sigma: mean of n draws of std sd
    assert abs(a.mean()) < 4.0 * sd / np.sqrt(n)


def test_increment_matrix_rows_match_individual_lattices():
    g = grid()
    mat = increment_matrix(11, 5, 4, g)
    assert mat.shape == (4, 2**10)
    for i in range(4):
        np.testing.assert_array_equal(mat[i], generate_lattice(11, 5 + i, g).fine_increments)


def test_gaussian_increments_scale_with_dt():
    # same stream as the lattice, scaled by sqrt(dt)
    a = gaussian_increments(3, 0, 1000, dt=1.0)
    b = gaussian_increments(3, 0, 1000, dt=0.25)
    np.testing.assert_allclose(b, a * 0.5, rtol=1e-15)


# ------------------------------------------------------------------ coarsening


def test_pairwise_halve_definition():
    np.testing.assert_array_equal(
        pairwise_halve(np.array([1.0, 2.0, 3.0, 4.0])), [3.0, 7.0]
    )
    with pytest.raises(UsageError):
        pairwise_halve(np.array([1.0, 2.0, 3.0]))


def test_coarsen_identity_at_reference_level():
    g = grid()
    lat = generate_lattice(1, 0, g)
    out = coarsen(lat, 10)
    np.testing.assert_array_equal(out, lat.fine_increments)


def _halve_to_scalar(arr):
    while arr.size > 1:
        arr = pairwise_halve(arr)
    return arr[0]


def test_coarsen_counts_and_telescoping():
    g = grid()
    lat = generate_lattice(1, 0, g)
    total = _halve_to_scalar(lat.fine_increments)
    for e in (1, 3, 5):
        inc = coarsen(lat, e)
        assert inc.shape == (2**e,)
        # telescoping under the fixed pairwise summation order
        assert _halve_to_scalar(inc) == total


def test_coarsen_range_checks():
    g = grid()
    lat = generate_lattice(1, 0, g)
    with pytest.raises(UsageError):
        coarsen(lat, 11)
    with pytest.raises(UsageError):
        coarsen(lat, -1)


def test_coupling_exactness_all_level_pairs():
    """coarsen(l1) equals pairwise-summed coarsen(l2) bit-exactly for l1 < l2."""
    g = GridSpec(T=1.0, levels=(0, 1, 2, 3, 4, 5, 6, 7, 8), reference_exponent=8)
    for seed in (1, 2):
        lat = generate_lattice(seed, 0, g)
        levels = list(g.levels)
        for i, l1 in enumerate(levels):
            for l2 in levels[i + 1:]:
                want = coarsen(lat, l2)
                for _ in range(l2 - l1):
                    want = pairwise_halve(want)
                np.testing.assert_array_equal(coarsen(lat, l1), want)


@given(halvings=st.integers(0, 6), seed=st.integers(0, 2**32))
@settings(max_examples=50, deadline=None)
def test_coarsen_increments_matches_repeated_halving(halvings, seed):
    rng = np.random.default_rng(seed)
    fine = rng.standard_normal(64)
    want = fine.copy()
    for _ in range(halvings):
        want = pairwise_halve(want)
    np.testing.assert_array_equal(coarsen_increments(fine, halvings), want)


# -------------------------------------------------------------- distributional


def test_terminal_distribution_sanity():
    """W_T over 10^4 paths: mean within 4*sqrt(T/n), variance within 20%."""
    g = GridSpec(T=1.0, levels=(1,), reference_exponent=6)
    n = 10_000
    mat = increment_matrix(2024, 0, n, g)
    w_T = mat.sum(axis=1)
    assert abs(w_T.mean()) < 4.0 * np.sqrt(1.0 / n)
    assert 0.8 < w_T.var(ddof=1) < 1.2


# ------------------------------------------------------------------- dump/load


def test_dump_load_round_trip(tmp_path):
    g = grid(ref=6)
    lat = generate_lattice(99, 12, g)
    path = tmp_path / "lat.bin"
    dump_lattice(lat, path)
    back = load_lattice(path)
    np.testing.assert_array_equal(back.fine_increments, lat.fine_increments)
    assert (back.seed, back.path_index) == (99, 12)
    assert back.T == lat.T
    assert back.reference_exponent == 6


def test_seed_validation():
    with pytest.raises(UsageError):
        generate_lattice(-1, 0, grid())
    with pytest.raises(UsageError):
        generate_lattice(2**64, 0, grid())
    with pytest.raises(UsageError):
        gaussian_increments(1, -3, 8, 0.5)
