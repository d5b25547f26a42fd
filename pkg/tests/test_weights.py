import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from sparsedom.dyadic import Box, lattices
from sparsedom.grid import GridFunction, GridSpec
from sparsedom.weights import (
    Weight,
    ainfty_characteristic,
    ap_characteristic,
    power_weight,
    rh_characteristic,
    rh_consequence,
    sharp_rh_exponent,
)


def _weight(sp, v):
    return Weight(GridFunction(sp, np.asarray(v, dtype=float)))


def _lattice_cubes(sp):
    for lat in lattices(sp):
        for k in range(sp.depth + 1):
            yield from lat.level(k)


def test_weight_validation():
    sp = GridSpec(1, 16, 1.0)
    with pytest.raises(ValueError):
        _weight(sp, np.zeros(16))
    with pytest.raises(ValueError):
        _weight(sp, np.full(16, np.inf))


@pytest.mark.parametrize("c", [1.0, 7.5])
def test_constant_weight(c):
    sp = GridSpec(2, 32, 1.0)
    w = _weight(sp, np.full(sp.shape, c))
    for q in (1.5, 2.0, 4.0):
        assert ap_characteristic(w, q) == pytest.approx(1.0, rel=1e-12)
        assert rh_characteristic(w, q) == pytest.approx(1.0, rel=1e-12)
    assert ainfty_characteristic(w) == pytest.approx(1.0, rel=1e-12)
    assert sharp_rh_exponent(w) == 64.0


def test_a2_power_weight_brute_force():
    sp = GridSpec(1, 256, 1.0)
    w = power_weight(sp, -0.5)
    a = w.array
    brute = max(Q.take(a).mean() * Q.take(1 / a).mean() for Q in _lattice_cubes(sp))
    got = ap_characteristic(w, 2.0)
    assert got == pytest.approx(brute, rel=1e-12)
    # all cell-aligned intervals (with wrap) dominate the lattice supremum
    ext = np.concatenate([a, a])
    cw, cs = np.concatenate([[0], np.cumsum(ext)]), np.concatenate([[0], np.cumsum(1 / ext)])
    every = 0.0
    for size in range(1, 257):
        s = np.arange(256)
        every = max(every, float(np.max((cw[s + size] - cw[s]) * (cs[s + size] - cs[s]))) / size**2)
    assert got <= every * (1 + 1e-12)
    assert every <= 4 * got


def test_duality_identity():
    sp = GridSpec(1, 256, 2.0)
    w = power_weight(sp, 0.4)
    for q in (1.5, 2.0, 3.0):
        qd = q / (q - 1)
        lhs = ap_characteristic(w.power(1 - qd), qd)
        assert lhs == pytest.approx(ap_characteristic(w, q) ** (1 / (q - 1)), rel=1e-9)


def test_rh_small_perturbation_is_second_order():
    sp = GridSpec(1, 256, np.pi)
    x = sp.axis()
    excess = []
    for eps in (0.1, 0.05, 0.025):
        w = _weight(sp, 1 + eps * np.cos(x))
        excess.append((rh_characteristic(w, 2.0) - 1) / eps**2)
    assert 0 < excess[0]
    assert excess[2] == pytest.approx(excess[1], rel=0.1)
    assert excess[1] == pytest.approx(excess[0], rel=0.1)


def test_rh_blows_up_near_integrability_limit():
    vals = [rh_characteristic(power_weight(GridSpec(1, N, 1.0), -0.49), 2.0) for N in (256, 1024, 4096)]
    assert vals[0] < vals[1] < vals[2]


def test_ainfty_brute_force():
    sp = GridSpec(1, 32, 1.0)
    rng = np.random.default_rng(3)
    a = np.exp(rng.standard_normal(32))
    w = _weight(sp, a)
    best = 1.0
    for lat in lattices(sp):
        cubes = [C for k in range(sp.depth + 1) for C in lat.level(k)]
        for Q in cubes:
            wq = np.where(Q.mask(), a, 0)
            M = np.zeros(32)
            for P in cubes:
                m = P.mask()
                M[m] = np.maximum(M[m], wq[m].mean())
            best = max(best, M[Q.mask()].sum() / wq.sum())
    assert ainfty_characteristic(w) == pytest.approx(best, rel=1e-12)


def test_ainfty_grows_with_heavy_cell():
    sp = GridSpec(1, 64, 1.0)
    vals = []
    for K in (1.0, 10.0, 100.0, 1000.0):
        v = np.ones(64)
        v[20] = K
        vals.append(ainfty_characteristic(_weight(sp, v)))
    assert vals[0] == pytest.approx(1.0) and all(a < b for a, b in zip(vals, vals[1:]))


def test_sharp_rh_heavy_cells_against_root_finder():
    sp = GridSpec(1, 64, 1.0)
    K = 100.0
    v = np.ones(64)
    v[:8] = K  # theta = 1/8 of the cube
    w = _weight(sp, v)
    Q = Box(sp, (0,), 64)

    def gap(d):
        return ((7 + K**d) / 8) ** (1 / d) - 2 * (7 + K) / 8

    oracle = brentq(gap, 1.0, 64.0, xtol=1e-12)
    got = sharp_rh_exponent(w, cubes=[Q], tol=1e-9)
    assert got <= oracle and got == pytest.approx(oracle, abs=1e-8)


def test_power_weight_sweep_is_monotone():
    sp = GridSpec(1, 1024, 1.0)
    ws = [power_weight(sp, s) for s in (-0.3, -0.5, -0.7)]
    ainf = [ainfty_characteristic(w) for w in ws]
    dstar = [sharp_rh_exponent(w, tol=1e-4) for w in ws]
    assert ainf[0] < ainf[1] < ainf[2]
    assert dstar[0] > dstar[1] > dstar[2] > 1


@given(st.integers(0, 2**32 - 1))
def test_rh_consequence(seed):
    rng = np.random.default_rng(seed)
    sp = GridSpec(1, 64, 1.0)
    w = _weight(sp, np.exp(rng.standard_normal(64)))
    delta = sharp_rh_exponent(w, tol=1e-6)
    cubes = list(_lattice_cubes(sp))
    for _ in range(25):
        Q = cubes[rng.integers(len(cubes))]
        E = Q.mask() & (rng.random(64) < rng.random())
        wE, bound = rh_consequence(w, Q, E, delta)
        assert wE <= bound * (1 + 1e-12)
    with pytest.raises(ValueError):
        rh_consequence(w, cubes[5], ~cubes[5].mask(), delta)
