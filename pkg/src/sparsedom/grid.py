"""Periodic sampling grid, discrete Fourier pair and Littlewood-Paley bands.

The box ``[-L, L)^n`` is split into ``N`` cells per axis with spacing
``h = 2L/N``.  Samples sit at the left cell edges ``x_i = -L + i h``.  The
transform is normalised so that it approximates the continuous one,

    f_hat(xi) = h^n * sum_x f(x) exp(-i x.xi),

on the lattice ``xi in (pi/L) Z^n`` (FFT ordering).  With frequency measure
``(pi/L / 2pi)^n`` per sample, Plancherel holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on ``[-L, L)^n``."""

    n: int
    N: int
    L: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def depth(self) -> int:
        """Number of dyadic halvings from the box down to one cell."""
        return self.N.bit_length() - 1

    @property
    def cell_measure(self) -> float:
        return self.h**self.n

    @property
    def box_measure(self) -> float:
        return (2.0 * self.L) ** self.n

    @property
    def dxi(self) -> float:
        return np.pi / self.L

    @property
    def nyquist(self) -> float:
        return np.pi * self.N / (2.0 * self.L)

    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    def mesh(self) -> tuple[np.ndarray, ...]:
        ax = self.axis()
        return tuple(
            ax.reshape([-1 if d == k else 1 for d in range(self.n)]) for k in range(self.n)
        )

    def radius(self) -> np.ndarray:
        """|x| on the full grid."""
        return np.sqrt(sum(c**2 for c in self.mesh())) * np.ones(self.shape)

    def freq_axis(self) -> np.ndarray:
        return self.dxi * np.fft.fftfreq(self.N, d=1.0 / self.N)

    def freq_mesh(self) -> tuple[np.ndarray, ...]:
        ax = self.freq_axis()
        return tuple(
            ax.reshape([-1 if d == k else 1 for d in range(self.n)]) for k in range(self.n)
        )

    def freq_radius(self) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.freq_mesh())) * np.ones(self.shape)

    def refine(self) -> "GridSpec":
        """Same box, twice the cells per axis."""
        return GridSpec(self.n, 2 * self.N, self.L)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a complex function on a grid (or on its frequency lattice)."""

    spec: GridSpec
    values: np.ndarray
    frequency: bool = False

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.size != self.spec.N**self.spec.n:
            raise ValueError(f"expected {self.spec.N ** self.spec.n} samples, got {v.size}")
        v = np.array(v.reshape(self.spec.shape))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def measure(self) -> float:
        if self.frequency:
            return (self.spec.dxi / (2 * np.pi)) ** self.spec.n
        return self.spec.cell_measure

    def norm(self, p: float = 2.0, weight: np.ndarray | None = None) -> float:
        """Discrete (weighted) L^p norm; quasi-norm for p < 1."""
        a = np.abs(self.values)
        if np.isinf(p):
            return float(a.max())
        w = self.measure() if weight is None else self.measure() * np.asarray(weight)
        return float(np.sum(a**p * w) ** (1.0 / p))

    def real(self) -> "GridFunction":
        return GridFunction(self.spec, self.values.real, self.frequency)

    def __abs__(self) -> "GridFunction":
        return GridFunction(self.spec, np.abs(self.values), self.frequency)

    def _lift(self, other):
        return other.values if isinstance(other, GridFunction) else other

    def __add__(self, other):
        return GridFunction(self.spec, self.values + self._lift(other), self.frequency)

    def __sub__(self, other):
        return GridFunction(self.spec, self.values - self._lift(other), self.frequency)

    def __mul__(self, other):
        return GridFunction(self.spec, self.values * self._lift(other), self.frequency)

    __rmul__ = __mul__
    __radd__ = __add__


def sample(spec: GridSpec, fn) -> GridFunction:
    """Evaluate ``fn(*mesh)`` on the spatial grid."""
    return GridFunction(spec, np.broadcast_to(fn(*spec.mesh()), spec.shape))


def _phase(spec: GridSpec) -> np.ndarray:
    # exp(i L xi) for the left-edge origin; equals (-1)^k on each axis
    k = np.fft.fftfreq(spec.N, d=1.0 / spec.N).astype(int)
    s = np.where(k % 2 == 0, 1.0, -1.0)
    out = np.ones(spec.shape)
    for d in range(spec.n):
        out = out * s.reshape([-1 if e == d else 1 for e in range(spec.n)])
    return out


def fft(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Array-level forward transform (see module docstring)."""
    return spec.cell_measure * _phase(spec) * np.fft.fftn(values)


def ifft(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    return np.fft.ifftn(values * _phase(spec)) / spec.cell_measure


def apply_multiplier(values: np.ndarray, spec: GridSpec, m: np.ndarray) -> np.ndarray:
    """Fourier multiplier on raw arrays; phases cancel so no bookkeeping is needed."""
    return np.fft.ifftn(m * np.fft.fftn(values, axes=tuple(range(-spec.n, 0))), axes=tuple(range(-spec.n, 0)))


def forward_transform(f: GridFunction) -> GridFunction:
    if f.frequency:
        raise ValueError("already on the frequency lattice")
    return GridFunction(f.spec, fft(f.values, f.spec), frequency=True)


def inverse_transform(F: GridFunction) -> GridFunction:
    if not F.frequency:
        raise ValueError("expected a frequency-side function")
    return GridFunction(F.spec, ifft(F.values, F.spec))


def smoothstep(t: np.ndarray, k: int) -> np.ndarray:
    """Polynomial S with S(0)=0, S(1)=1 and k vanishing derivatives at both ends."""
    t = np.clip(t, 0.0, 1.0)
    acc = np.zeros_like(t)
    for i in range(k + 1):
        acc += comb(k + i, i) * comb(2 * k + 1, k - i) * (-t) ** i
    return t ** (k + 1) * acc


def bump(r: np.ndarray, k: int = 4) -> np.ndarray:
    """Radial plateau: 1 on r <= 1, 0 on r >= 2, C^k in between."""
    return 1.0 - smoothstep(np.asarray(r, dtype=float) - 1.0, k)


@dataclass(frozen=True, eq=False)
class LPFamily:
    """Littlewood-Paley multipliers sampled on the frequency lattice.

    ``phi[j]`` are the partition pieces (``phi[0]`` is the low-pass bump) and
    ``psi[j]`` the annular pieces, with ``psi[0]`` left as ``None``.
    """

    spec: GridSpec
    J: int
    k: int
    phi: list = field(repr=False)
    psi: list = field(repr=False)

    def profile(self, r: np.ndarray, j: int) -> np.ndarray:
        """Radial profile of psi_j at |xi| = r (any j >= 1, not only on the lattice)."""
        r = np.asarray(r, dtype=float)
        return bump(r / 2.0**j, self.k) - bump(r / 2.0 ** (j - 1), self.k)


def littlewood_paley_family(spec: GridSpec, k: int = 4) -> LPFamily:
    ny = spec.nyquist
    if ny < 4:
        raise ValueError(f"Nyquist radius {ny:.3g} < 4 leaves no room for a band")
    J = int(np.floor(np.log2(ny))) - 1
    while 2.0 ** (J + 1) > ny:
        J -= 1
    r = spec.freq_radius()
    phi = [bump(r, k)]
    psi = [None]
    for j in range(1, J + 1):
        p = bump(r / 2.0**j, k) - bump(r / 2.0 ** (j - 1), k)
        psi.append(p)
        phi.append(p)
    for a in phi:
        a.setflags(write=False)
    return LPFamily(spec, J, k, phi, psi)


def band_project(f: GridFunction, lp: LPFamily, j: int) -> GridFunction:
    """``phi_j * f``."""
    if not 0 <= j <= lp.J:
        raise IndexError(f"band {j} outside 0..{lp.J}")
    return GridFunction(f.spec, apply_multiplier(f.values, f.spec, lp.phi[j]))


def band_limited_noise(spec: GridSpec, rng: np.random.Generator, cutoff: float, real: bool = True) -> GridFunction:
    """Gaussian random field with spectrum supported in |xi| <= cutoff.

    Coefficients are drawn per integer mode index, so the same seed gives the
    same continuous function on any grid whose Nyquist radius exceeds the cutoff.
    """
    kmax = int(np.floor(cutoff / spec.dxi))
    if kmax >= spec.N // 2:
        raise ValueError("cutoff above Nyquist")
    m = 2 * kmax + 1
    coef = rng.standard_normal((m,) * spec.n) + 1j * rng.standard_normal((m,) * spec.n)
    idx = np.arange(-kmax, kmax + 1)
    grids = np.meshgrid(*([idx] * spec.n), indexing="ij")
    mask = np.sqrt(sum(g.astype(float) ** 2 for g in grids)) * spec.dxi <= cutoff
    spectrum = np.zeros(spec.shape, dtype=complex)
    spectrum[tuple(np.mod(g, spec.N) for g in grids)] = np.where(mask, coef, 0.0)
    vals = np.fft.ifftn(spectrum * _phase(spec)) * spec.N**spec.n
    if real:
        vals = vals.real
    vals = vals / np.sqrt(np.mean(np.abs(vals) ** 2))
    return GridFunction(spec, vals)
