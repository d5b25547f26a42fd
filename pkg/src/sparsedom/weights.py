"""Muckenhoupt, reverse Holder and A_infinity characteristics of grid weights."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .grid import GridFunction, GridSpec
from .operators import _collection


@dataclass(eq=False)
class Weight:
    """Strictly positive weight with memoised characteristics."""

    values: GridFunction
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values.values)
        if np.iscomplexobj(v):
            if np.any(v.imag != 0):
                raise ValueError("weight must be real")
            v = v.real
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("weight must be finite and strictly positive")
        self.values = GridFunction(self.values.spec, v)

    @property
    def spec(self) -> GridSpec:
        return self.values.spec

    @property
    def array(self) -> np.ndarray:
        return self.values.values

    def power(self, a: float) -> "Weight":
        return Weight(GridFunction(self.spec, self.array**a))

    def mass(self, mask: np.ndarray) -> float:
        return float(np.sum(self.array[mask]) * self.spec.cell_measure)

    def memo(self, key, compute):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        val = compute()
        with self._lock:
            self._cache.setdefault(key, val)
            return self._cache[key]


def power_weight(spec: GridSpec, s: float, center=None) -> Weight:
    """``(|x - center| + h)^s``."""
    c = np.zeros(spec.n) if center is None else np.asarray(center, dtype=float)
    r = np.sqrt(sum((m - ci) ** 2 for m, ci in zip(spec.mesh(), c))) * np.ones(spec.shape)
    return Weight(GridFunction(spec, (r + spec.h) ** s))


def _cube_stats(w: np.ndarray, spec: GridSpec, fn, which="all") -> float:
    best = -np.inf
    ax = tuple(range(-spec.n, 0))
    for lat in _collection(spec, which):
        for k in range(spec.depth + 1):
            best = max(best, float(np.max(fn(lat.blocks(w, k), ax))))
    return best


def ap_characteristic(w: Weight, q: float, which="all") -> float:
    """``sup_Q <w>_Q <w^{1-q'}>_Q^{q-1}``."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    qd = q / (q - 1)

    def compute():
        a = w.array
        sigma = a ** (1 - qd)
        stacked = np.stack([a, sigma])
        return _cube_stats(stacked, w.spec, lambda b, ax: b[0].mean(axis=ax) * b[1].mean(axis=ax) ** (q - 1), which)

    return w.memo(("A", q, which), compute)


def rh_characteristic(w: Weight, q: float, which="all") -> float:
    """``sup_Q <w>_{q,Q} / <w>_Q``."""
    if not q >= 1:
        raise ValueError("q must be at least 1")
    if q == 1:
        return 1.0

    def compute():
        def stat(b, ax):
            mx = b.max(axis=ax, keepdims=True)
            u = b / mx
            return np.mean(u**q, axis=ax) ** (1 / q) / np.mean(u, axis=ax)

        return _cube_stats(w.array, w.spec, stat, which)

    return w.memo(("RH", q, which), compute)


def ainfty_characteristic(w: Weight, which="all") -> float:
    """``sup_Q w(Q)^{-1} ∫_Q M(w 1_Q)``.

    The inner maximal function runs over the lattice of ``Q``: cubes of that
    lattice containing ``Q`` only see the average over ``Q``, so the inner sup
    reduces to subcubes of ``Q``, which a bottom-up sweep handles for every
    ``Q`` at once.
    """

    def compute():
        spec = w.spec
        a = w.array
        ax = tuple(range(-spec.n, 0))
        best = 1.0
        for lat in _collection(spec, which):
            local_max = a.copy()
            for k in range(spec.depth - 1, -1, -1):
                means = lat.block_mean(a, k)
                local_max = np.maximum(local_max, lat.spread(means, k))
                ratio = lat.blocks(local_max, k).mean(axis=ax) / means
                best = max(best, float(ratio.max()))
        return best

    return w.memo(("Ainf", which), compute)


def _rh_holds(w: np.ndarray, spec: GridSpec, delta: float, which, boxes) -> bool:
    if boxes is not None:
        for B in boxes:
            v = B.take(w)
            mx = v.max()
            if mx * np.mean((v / mx) ** delta) ** (1 / delta) > 2 * np.mean(v):
                return False
        return True
    ax = tuple(range(-spec.n, 0))
    for lat in _collection(spec, which):
        for k in range(spec.depth + 1):
            b = lat.blocks(w, k)
            mx = b.max(axis=ax, keepdims=True)
            lhs = mx[(...,) + (0,) * spec.n] * np.mean((b / mx) ** delta, axis=ax) ** (1 / delta)
            if np.any(lhs > 2 * b.mean(axis=ax)):
                return False
    return True


def sharp_rh_exponent(w: Weight, delta_max: float = 64.0, tol: float = 1e-6, which="all", cubes=None) -> float:
    """Largest ``delta`` (up to ``tol``) with ``<w>_{delta,Q} <= 2 <w>_Q`` for every cube.

    Bisection on a monotone property; the returned value is on the feasible
    side.  ``cubes`` restricts the supremum to the given boxes.
    """

    def compute():
        a = w.array
        boxes = None if cubes is None else [Q.box() for Q in cubes]
        if _rh_holds(a, w.spec, delta_max, which, boxes):
            return float(delta_max)
        lo, hi = 1.0, float(delta_max)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _rh_holds(a, w.spec, mid, which, boxes):
                lo = mid
            else:
                hi = mid
        return lo

    if cubes is not None:
        return compute()
    return w.memo(("delta*", delta_max, tol, which), compute)


def rh_consequence(w: Weight, Q, E: np.ndarray, delta: float) -> tuple[float, float]:
    """``(w(E), 2 (|E|/|Q|)^{1/delta'} w(Q))`` for a cell mask ``E`` inside ``Q``."""
    box = Q.box()
    qm = box.mask()
    E = np.asarray(E, dtype=bool)
    if np.any(E & ~qm):
        raise ValueError("E must lie inside Q")
    frac = E.sum() / box.ncells
    expo = 1 - 1 / delta
    return w.mass(E), 2 * frac**expo * w.mass(qm)
