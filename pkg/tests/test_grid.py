import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparsedom.grid import (
    GridFunction,
    GridSpec,
    band_limited_noise,
    band_project,
    bump,
    forward_transform,
    inverse_transform,
    littlewood_paley_family,
    sample,
    smoothstep,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(1, 100, 1.0)
    with pytest.raises(ValueError):
        GridSpec(1, 4, 1.0)
    with pytest.raises(ValueError):
        GridSpec(1, 64, 0.0)
    sp = GridSpec(2, 64, 4.0)
    assert sp.h == 0.125 and sp.shape == (64, 64) and sp.depth == 6


def test_values_are_read_only():
    f = GridFunction(GridSpec(1, 8, 1.0), np.arange(8.0))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        GridFunction(GridSpec(1, 8, 1.0), np.arange(7.0))


def test_delta_has_flat_spectrum():
    sp = GridSpec(1, 64, 2.0)
    v = np.zeros(64)
    v[32] = 1.0  # x = 0
    F = forward_transform(GridFunction(sp, v))
    assert np.allclose(np.abs(F.values), sp.h, rtol=0, atol=1e-15)


def test_gaussian_pair():
    sp = GridSpec(1, 512, 16.0)
    F = forward_transform(sample(sp, lambda x: np.exp(-x**2 / 2)))
    xi = sp.freq_axis()
    exact = np.sqrt(2 * np.pi) * np.exp(-xi**2 / 2)
    assert np.max(np.abs(F.values - exact)) <= 1e-8 * np.max(exact)


def test_plancherel_and_roundtrip(rng):
    for n, N in ((1, 256), (2, 32)):
        sp = GridSpec(n, N, 3.0)
        for _ in range(100):
            v = rng.standard_normal(sp.shape) + 1j * rng.standard_normal(sp.shape)
            f = GridFunction(sp, v)
            F = forward_transform(f)
            assert abs(f.norm(2) - F.norm(2)) <= 1e-10 * f.norm(2)
            back = inverse_transform(F).values
            assert np.max(np.abs(back - v)) <= 1e-12 * np.max(np.abs(v))


def test_smoothstep_endpoints_and_flatness():
    for k in range(1, 6):
        assert smoothstep(np.array([0.0]), k)[0] == 0.0
        assert smoothstep(np.array([1.0]), k)[0] == pytest.approx(1.0, abs=1e-14)
        t = np.linspace(0, 1, 2001)
        s = smoothstep(t, k)
        assert np.all(np.diff(s) >= -1e-12)
        # k vanishing derivatives at 0: S(t) = O(t^{k+1})
        e = 1e-3
        assert smoothstep(np.array([e]), k)[0] <= 10 * comb_bound(k) * e ** (k + 1)


def comb_bound(k):
    from math import comb

    return comb(2 * k + 1, k)


def test_bump_shape():
    r = np.linspace(0, 3, 3001)
    b = bump(r)
    assert np.all(b[r <= 1] == 1.0)
    assert np.all(b[r >= 2] == 0.0)
    assert np.all((b >= 0) & (b <= 1))


def test_lp_band_count():
    # [DERIVED] largest j with 2^{j+1} <= pi N / (2L)
    assert littlewood_paley_family(GridSpec(1, 4096, 64.0)).J == 5  # Nyquist 100.5
    assert littlewood_paley_family(GridSpec(2, 256, 16.0)).J == 3  # Nyquist 25.1
    assert littlewood_paley_family(GridSpec(1, 1024, 4.0)).J == 7  # Nyquist 402
    with pytest.raises(ValueError):
        littlewood_paley_family(GridSpec(1, 8, 4.0))  # Nyquist 3.14


@pytest.mark.parametrize("n,N,L", [(1, 1024, 8.0), (2, 128, 8.0)])
def test_partition_of_unity(n, N, L):
    sp = GridSpec(n, N, L)
    lp = littlewood_paley_family(sp)
    r = sp.freq_radius()
    total = sum(lp.phi)
    inside = r <= 2.0**lp.J
    assert np.max(np.abs(total[inside] - 1)) <= 1e-12
    zero = r == 0
    assert np.all(lp.phi[0][zero] == 1) and all(np.all(p[zero] == 0) for p in lp.phi[1:])
    for j in range(1, lp.J + 1):
        nz = lp.psi[j] != 0
        assert np.all(r[nz] >= 2.0 ** (j - 1)) and np.all(r[nz] <= 2.0 ** (j + 1))
        assert np.all(lp.psi[j] >= 0)


def _mode(j, a=0):
    # grid with pi/L = 2^-a so that |xi| = 2^j is a lattice frequency
    sp = GridSpec(1, 2048, np.pi * 2**a)
    k = int(round(2.0**j / sp.dxi))
    return sp, sample(sp, lambda x: np.exp(1j * k * sp.dxi * x))


def test_pure_mode_band_projection():
    sp, f = _mode(3, a=2)
    lp = littlewood_paley_family(sp)
    for j in range(lp.J + 1):
        out = band_project(f, lp, j).values
        if j == 3:
            assert np.max(np.abs(out - f.values)) <= 1e-12
        else:
            assert np.max(np.abs(out)) <= 1e-12


def test_band_project_errors_and_zero():
    sp = GridSpec(1, 256, 4.0)
    lp = littlewood_paley_family(sp)
    with pytest.raises(IndexError):
        band_project(GridFunction(sp, np.zeros(256)), lp, lp.J + 1)
    assert np.all(band_project(GridFunction(sp, np.zeros(256)), lp, 1).values == 0)


def test_reconstruction_of_band_limited(rng):
    sp = GridSpec(1, 1024, 8.0)
    lp = littlewood_paley_family(sp)
    f = band_limited_noise(sp, rng, 2.0**lp.J - 1, real=False)
    total = sum(band_project(f, lp, j).values for j in range(lp.J + 1))
    assert np.max(np.abs(total - f.values)) <= 1e-10 * np.max(np.abs(f.values))


@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 2**32 - 1))
def test_far_bands_are_orthogonal(j, k, seed):
    sp = GridSpec(1, 1024, 8.0)
    lp = littlewood_paley_family(sp)
    if abs(j - k) < 2:
        return
    f = GridFunction(sp, np.random.default_rng(seed).standard_normal(1024))
    out = band_project(band_project(f, lp, j), lp, k).values
    assert np.max(np.abs(out)) <= 1e-12


def test_noise_is_grid_independent():
    coarse = GridSpec(1, 256, 4.0)
    fine = coarse.refine()
    a = band_limited_noise(coarse, np.random.default_rng(5), 10.0)
    b = band_limited_noise(fine, np.random.default_rng(5), 10.0)
    assert np.max(np.abs(a.values - b.values[::2])) <= 1e-12
    with pytest.raises(ValueError):
        band_limited_noise(coarse, np.random.default_rng(0), 1000.0)
