"""Pseudodifferential operators, the dispersive propagator and maximal operators.

Suprema "over cubes" run over every cube of the ``3^n`` shifted dyadic
lattices, from the whole box down to single cells.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from math import comb
from typing import Callable

import numpy as np

from .dyadic import Box, DyadicLattice, dilate, lattices
from .grid import GridFunction, GridSpec, LPFamily, apply_multiplier, bump, fft, smoothstep


def _radius(xi) -> np.ndarray:
    return np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in xi))


@dataclass(frozen=True, eq=False)
class Symbol:
    """A symbol ``a(x, xi)`` with its declared Hormander parameters.

    Exactly one representation is used, in this order of preference:
    ``xi_part`` alone (Fourier multiplier), ``x_part * xi_part`` (product), or
    ``full(x, xi)``.  Callables receive tuples of broadcastable coordinate
    arrays.
    """

    m: float
    rho: float = 1.0
    delta: float = 0.0
    xi_part: Callable | None = None
    x_part: Callable | None = None
    full: Callable | None = None
    name: str = "symbol"

    @property
    def x_independent(self) -> bool:
        return self.full is None and self.x_part is None

    @property
    def separable(self) -> bool:
        return self.full is None

    def __call__(self, x, xi) -> np.ndarray:
        if self.full is not None:
            return self.full(x, xi)
        out = self.xi_part(xi)
        if self.x_part is not None:
            out = self.x_part(x) * out
        return out

    def multiplier(self, spec: GridSpec) -> np.ndarray:
        if not self.separable:
            raise ValueError("symbol is not separable in x and xi")
        return np.broadcast_to(self.xi_part(spec.freq_mesh()), spec.shape)

    def modulation(self, spec: GridSpec) -> np.ndarray | None:
        if self.x_part is None:
            return None
        return np.broadcast_to(self.x_part(spec.mesh()), spec.shape)

    def localized(self, factor: Callable, tag: str = "") -> "Symbol":
        """Multiply by an x-independent factor ``factor(xi)``."""
        if self.separable:
            base = self.xi_part
            return replace(self, xi_part=lambda xi: base(xi) * factor(xi), name=self.name + tag)
        full = self.full
        return replace(self, full=lambda x, xi: full(x, xi) * factor(xi), name=self.name + tag)


def bessel_symbol(m: float, rho: float = 1.0, delta: float = 0.0) -> Symbol:
    """``(1 + |xi|^2)^(m/2)``."""
    return Symbol(m, rho, delta, xi_part=lambda xi: (1.0 + _radius(xi) ** 2) ** (m / 2), name=f"bessel(m={m:g})")


def cutoff(r: np.ndarray, k: int = 4) -> np.ndarray:
    """Smooth high-pass: 0 for r <= 1/2, 1 for r >= 1."""
    return smoothstep(2.0 * np.asarray(r, dtype=float) - 1.0, k)


def oscillatory_symbol(m: float, rho: float) -> Symbol:
    """``exp(i |xi|^(1-rho)) chi(xi) |xi|^m`` with the high-pass ``chi`` above."""

    def a(xi):
        r = _radius(xi)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, np.exp(1j * safe ** (1 - rho)) * cutoff(r) * safe**m, 0.0)

    return Symbol(m, rho, 0.0, xi_part=a, name=f"oscillatory(m={m:g},rho={rho:g})")


def poisson_modulation(L: float, width: float = 0.5, depth: float = 0.5) -> Callable:
    """Smooth periodic bump ``1 + depth * prod_i P(x_i)`` with ``0 < P <= 1``.

    ``P`` is the periodised Poisson kernel, whose Fourier coefficients decay
    like ``exp(-width |xi|)``.
    """
    c = np.exp(-np.pi * width / L)

    def sigma(x):
        out = 1.0
        for xi_ in x:
            th = np.pi * np.asarray(xi_) / L
            out = out * (1 - c) ** 2 / (1 - 2 * c * np.cos(th) + c * c)
        return 1.0 + depth * out

    return sigma


def modulated_symbol(m: float, sigma: Callable, rho: float = 1.0, delta: float = 0.0) -> Symbol:
    """``sigma(x) (1 + |xi|^2)^(m/2)``."""
    b = bessel_symbol(m, rho, delta)
    return Symbol(m, rho, delta, xi_part=b.xi_part, x_part=sigma, name=f"modulated(m={m:g})")


def band_symbol(a: Symbol, lp: LPFamily, j: int) -> Symbol:
    """``a(x, xi) * phi_j(xi)``."""
    if not 0 <= j <= lp.J:
        raise IndexError(f"band {j} outside 0..{lp.J}")
    k = lp.k
    if j == 0:
        return a.localized(lambda xi: bump(_radius(xi), k), "[0]")
    return a.localized(lambda xi: bump(_radius(xi) / 2.0**j, k) - bump(_radius(xi) / 2.0 ** (j - 1), k), f"[{j}]")


# --- application -----------------------------------------------------------


def _quadrature(a: Symbol, values: np.ndarray, spec: GridSpec, chunk: int = 256) -> np.ndarray:
    F = fft(values, spec).reshape(-1)
    xi = tuple(np.broadcast_to(c, spec.shape).reshape(-1) for c in spec.freq_mesh())
    xs = tuple(np.broadcast_to(c, spec.shape).reshape(-1) for c in spec.mesh())
    w = (spec.dxi / (2 * np.pi)) ** spec.n
    out = np.empty(F.size, dtype=complex)
    for lo in range(0, F.size, chunk):
        sl = slice(lo, lo + chunk)
        xb = tuple(c[sl, None] for c in xs)
        phase = np.exp(1j * sum(c * q[None, :] for c, q in zip(xb, xi)))
        sym = np.broadcast_to(a(xb, tuple(q[None, :] for q in xi)), phase.shape)
        out[sl] = (phase * sym) @ F * w
    return out.reshape(spec.shape)


def apply_pdo(a: Symbol, f: GridFunction, quadrature: bool = False) -> GridFunction:
    """``a(x,D) f``; separable symbols take the FFT route unless ``quadrature``."""
    spec = f.spec
    if quadrature or not a.separable:
        return GridFunction(spec, _quadrature(a, f.values, spec))
    out = apply_multiplier(f.values, spec, a.multiplier(spec))
    sig = a.modulation(spec)
    return GridFunction(spec, out if sig is None else sig * out)


def dyadic_piece(a: Symbol, lp: LPFamily, j: int, f: GridFunction) -> GridFunction:
    return apply_pdo(band_symbol(a, lp, j), f)


def propagator_multiplier(spec: GridSpec, rho: float, t: float) -> np.ndarray:
    if not -1 <= rho < 1:
        raise ValueError("rho must lie in [-1, 1)")
    return np.exp(1j * t * spec.freq_radius() ** (1 - rho))


def propagator(rho: float, t: float, f: GridFunction) -> GridFunction:
    """``exp(i t |D|^(1-rho)) f``."""
    return GridFunction(f.spec, apply_multiplier(f.values, f.spec, propagator_multiplier(f.spec, rho, t)))


class Operator:
    """Linear map on grid arrays, optionally with a kernel description.

    ``kernel`` (if present) is the circular convolution kernel ``k`` so that
    ``T u = sigma * (k (*) u)`` where ``sigma`` is ``modulation`` or 1.
    ``apply`` acts on the trailing ``n`` axes.
    """

    def __init__(self, spec: GridSpec, apply: Callable, kernel=None, modulation=None):
        self.spec = spec
        self._apply = apply
        self.kernel = kernel
        self.modulation = modulation

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self._apply(values)

    def __call__(self, f: GridFunction) -> GridFunction:
        return GridFunction(self.spec, self.apply(f.values))


def as_operator(T, spec: GridSpec) -> Operator:
    """Wrap a :class:`Symbol`, an :class:`Operator` or a GridFunction callable."""
    if isinstance(T, Operator):
        return T
    if isinstance(T, Symbol):
        if T.separable:
            m = T.multiplier(spec)
            sig = T.modulation(spec)
            kernel = np.fft.ifftn(m)

            def app(v):
                out = apply_multiplier(v, spec, m)
                return out if sig is None else sig * out

            return Operator(spec, app, kernel, sig)

        def app_q(v):
            flat = v.reshape((-1,) + spec.shape)
            return np.stack([_quadrature(T, u, spec) for u in flat]).reshape(v.shape)

        return Operator(spec, app_q)
    if callable(T):

        def app_c(v):
            flat = v.reshape((-1,) + spec.shape)
            return np.stack([np.asarray(T(GridFunction(spec, u)).values) for u in flat]).reshape(v.shape)

        return Operator(spec, app_c)
    raise TypeError(f"cannot use {type(T).__name__} as an operator")


def identity_operator(spec: GridSpec) -> Operator:
    k = np.zeros(spec.shape)
    k[(0,) * spec.n] = 1.0
    return Operator(spec, lambda v: np.array(v, dtype=complex), k, None)


# --- suprema over the cube collection ---------------------------------------


def _collection(spec: GridSpec, which) -> tuple[DyadicLattice, ...]:
    if which == "all":
        return lattices(spec)
    if which == "standard":
        return lattices(spec)[:1]
    return tuple(which)


def sup_over_cubes(values: np.ndarray, spec: GridSpec, stat: Callable, which="all") -> np.ndarray:
    """``max_{Q containing x} stat(Q)`` where ``stat(blocks, level, lattice)`` returns per-cube values."""
    out = np.full(spec.shape, -np.inf)
    for lat in _collection(spec, which):
        for k in range(spec.depth + 1):
            per = stat(lat.blocks(values, k), k, lat)
            np.maximum(out, lat.spread(per, k), out=out)
    return out


def _cell_axes(n: int) -> tuple[int, ...]:
    return tuple(range(-n, 0))


def maximal(f: GridFunction, r: float = 1.0, which="all") -> GridFunction:
    """``M_r f(x) = sup_Q <f>_{r,Q}``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    spec = f.spec
    a = np.abs(f.values)
    if np.isinf(r):
        v = sup_over_cubes(a, spec, lambda b, k, lat: b.max(axis=_cell_axes(spec.n)), which)
        return GridFunction(spec, v)
    v = sup_over_cubes(a**r, spec, lambda b, k, lat: b.mean(axis=_cell_axes(spec.n)), which)
    return GridFunction(spec, v ** (1.0 / r))


def fractional_maximal(h: GridFunction, gamma: float, which="all") -> GridFunction:
    """``M^gamma h(x) = sup_Q |Q|^gamma <h>_Q`` (physical volume)."""
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    spec = h.spec
    a = np.real(h.values)
    if np.any(a < 0):
        raise ValueError("h must be nonnegative")

    def stat(b, k, lat):
        vol = (lat.side(k) * spec.h) ** spec.n
        return vol**gamma * b.mean(axis=_cell_axes(spec.n))

    return GridFunction(spec, sup_over_cubes(a, spec, stat, which))


def sharp_maximal(g: GridFunction, which="all") -> GridFunction:
    """Fefferman-Stein sharp function ``sup_Q <|g - <g>_Q|>_Q``."""
    spec = g.spec
    ax = _cell_axes(spec.n)

    def stat(b, k, lat):
        m = b.mean(axis=ax, keepdims=True)
        return np.abs(b - m).mean(axis=ax)

    return GridFunction(spec, sup_over_cubes(g.values, spec, stat, which))


def local_average(values: np.ndarray, box, s: float) -> float:
    """``<h>_{s,Q}`` with normalised measure."""
    a = np.abs(box.take(values))
    if np.isinf(s):
        return float(a.max())
    return float(np.mean(a**s) ** (1.0 / s))


def _stat_s(a: np.ndarray, s: float, axes) -> np.ndarray:
    if np.isinf(s):
        return a.max(axis=axes)
    return np.mean(a**s, axis=axes) ** (1.0 / s)


def _window_axes(spec: GridSpec, starts: np.ndarray, length: int, shift: int) -> list[np.ndarray]:
    """Per-axis index arrays ``(B, length)`` for windows starting at ``starts + shift``."""
    base = np.arange(length)
    return [(starts[:, d, None] + shift + base[None, :]) % spec.N for d in range(spec.n)]


def _gather(values: np.ndarray, axes: list[np.ndarray]) -> np.ndarray:
    n = len(axes)
    idx = []
    for d, a in enumerate(axes):
        shape = [a.shape[0]] + [1] * n
        shape[1 + d] = a.shape[1]
        idx.append(a.reshape(shape))
    return values[tuple(idx)]


def far_field(op: Operator, h: np.ndarray, Th: np.ndarray, starts: np.ndarray, size: int, s: float) -> np.ndarray:
    """``<T(h 1_{(3P)^c})>_{s,P}`` for the cubes ``P`` of side ``size`` at ``starts`` (shape ``(B, n)``).

    Uses ``T(h 1_{(3P)^c}) = T h - T(h 1_{3P})`` on ``P``; the near part is a
    short linear convolution when the operator has a kernel, otherwise a full
    application per cube.
    """
    spec = op.spec
    n = spec.n
    B = starts.shape[0]
    if B == 0:
        return np.zeros(0)
    if 3 * size >= spec.N:
        return np.zeros(B)
    ax = _cell_axes(n)
    out_axes = _window_axes(spec, starts, size, 0)
    far = _gather(Th, out_axes)
    if op.kernel is not None:
        win = _gather(h, _window_axes(spec, starts, 3 * size, -size))
        F = 1 << int(np.ceil(np.log2(7 * size)))
        offs = np.arange(-(2 * size - 1), 2 * size) % spec.N
        kseg = op.kernel[np.ix_(*([offs] * n))]
        Kf = np.fft.fftn(kseg, s=(F,) * n, axes=tuple(range(n)))
        conv = np.fft.ifftn(np.fft.fftn(win, s=(F,) * n, axes=ax) * Kf, axes=ax)
        sl = (slice(None),) + (slice(3 * size - 1, 4 * size - 1),) * n
        near = conv[sl]
        if op.modulation is not None:
            near = near * _gather(op.modulation, out_axes)
        far = far - near
    else:
        masks = np.zeros((B,) + spec.shape, dtype=bool)
        widx = _window_axes(spec, starts, 3 * size, -size)
        for b in range(B):
            masks[b][np.ix_(*[w[b] for w in widx])] = True
        Tfar = op.apply(np.where(masks, 0, h[None]))
        far = _gather_each(Tfar, out_axes)
    return _stat_s(np.abs(far), s, ax)


def _gather_each(stack: np.ndarray, axes: list[np.ndarray]) -> np.ndarray:
    B = stack.shape[0]
    return np.stack([stack[b][np.ix_(*[a[b] for a in axes])] for b in range(B)])


def _level_starts(lat: DyadicLattice, level: int) -> np.ndarray:
    n = lat.spec.n
    s = lat.side(level)
    grid = np.array(list(itertools.product(range(1 << level), repeat=n)), dtype=np.int64).reshape(-1, n)
    return (np.array(lat.offsets[level])[None, :] + grid * s) % lat.spec.N


def grand_maximal(T, f: GridFunction, s: float, stride: int = 1, which="all", batch: int = 4096) -> GridFunction:
    """``M_{T,s} f(x) = sup_{Q ∋ x} |Q|^{-1/s} ||T(f 1_{(3Q)^c})||_{L^s(Q)}``.

    With ``stride > 1`` only cubes containing a base point (every ``stride``-th
    cell per axis) are visited and other cells are returned as NaN.
    """
    spec = f.spec
    op = as_operator(T, spec)
    h = np.asarray(f.values, dtype=complex)
    Th = op.apply(h)
    base = np.zeros(spec.shape, dtype=bool)
    base[tuple(slice(None, None, stride) for _ in range(spec.n))] = True
    out = np.zeros(spec.shape)
    for lat in _collection(spec, which):
        for k in range(spec.depth + 1):
            size = lat.side(k)
            active = lat.blocks(base, k).any(axis=_cell_axes(spec.n)).reshape(-1)
            starts = _level_starts(lat, k)[active]
            vals = np.zeros(active.size)
            got = [far_field(op, h, Th, starts[i : i + batch], size, s) for i in range(0, len(starts), batch)]
            if got:
                vals[active] = np.concatenate(got)
            per = vals.reshape((1 << k,) * spec.n)
            np.maximum(out, lat.spread(per, k), out=out)
    return GridFunction(spec, np.where(base, out, np.nan))


# --- symbol diagnostics ------------------------------------------------------


def _fd_weights(order: int) -> list[tuple[float, float]]:
    """Centred difference of the given order: (offset in steps, weight)."""
    return [(order / 2.0 - i, (-1) ** i * comb(order, i)) for i in range(order + 1)]


def symbol_seminorm(
    a: Symbol,
    alpha: tuple[int, ...],
    beta: tuple[int, ...],
    xi_max: float = 256.0,
    x_samples: np.ndarray | None = None,
    rho: float | None = None,
    step: float = 1e-2,
    samples: int = 400,
) -> float:
    """Finite-difference estimate of ``sup (1+|xi|)^{-m+rho|alpha|-delta|beta|} |d_x^beta d_xi^alpha a|``.

    Frequencies are sampled on rays with log-spaced magnitudes up to
    ``xi_max``; ``rho`` overrides the symbol's declared value.
    """
    n = len(alpha)
    if len(beta) != n:
        raise ValueError("alpha and beta must have the same length")
    order = sum(alpha) + sum(beta)
    if order > 4:
        raise ValueError("finite-difference stencil limited to total order 4")
    rho = a.rho if rho is None else rho
    mags = np.concatenate([[0.0], np.geomspace(1e-2, xi_max, samples)])
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0, 2 * np.pi, 9)[:-1]
        dirs = np.stack([np.cos(ang), np.sin(ang)] + [np.zeros_like(ang)] * (n - 2), axis=1)
    pts = (mags[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    if x_samples is None:
        x_samples = np.linspace(-4.0, 4.0, 33)
    if a.x_independent:
        if sum(beta):
            return 0.0
        xpts = np.zeros((1, n))
    else:
        xpts = np.array(list(itertools.product(x_samples, repeat=n)))
    X = [xpts[:, None, d] for d in range(n)]
    XI = [pts[None, :, d] for d in range(n)]
    stencils = [_fd_weights(k) for k in list(beta) + list(alpha)]
    acc = 0.0
    for combo in itertools.product(*stencils):
        w = np.prod([c[1] for c in combo])
        xs = tuple(X[d] + combo[d][0] * step for d in range(n))
        xis = tuple(XI[d] + combo[n + d][0] * step for d in range(n))
        acc = acc + w * a(xs, xis)
    deriv = np.abs(acc) / step**order
    norm = (1.0 + np.linalg.norm(pts, axis=1)) ** (-a.m + rho * sum(alpha) - a.delta * sum(beta))
    return float(np.max(deriv * norm[None, :]))
