"""Cell-aligned cubes and shifted dyadic lattices on the periodic box.

Everything is measured in whole cells.  A :class:`Box` is a cube given by its
first cell and its side (in cells); it may wrap around the torus.  A
:class:`Cube` is a member of a :class:`DyadicLattice` and carries its level and
index so that tree relations are cheap.

The shifted lattices follow the usual one-third construction: lattice ``t``
(``t`` in ``{0,1,2}^n``) places level-``k`` cubes at offset
``(-1)^k t s_k / 3`` where ``s_k`` is the side.  On the grid the level-0
offset is rounded once and the finer offsets are derived from it by the exact
integer recursion, which keeps the tree nested.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from math import ceil

import numpy as np

from .grid import GridSpec


@dataclass(frozen=True)
class Box:
    """Axis-parallel cube of ``size`` cells per side starting at cell ``start``."""

    spec: GridSpec
    start: tuple[int, ...]
    size: int

    def __post_init__(self):
        if not 1 <= self.size <= self.spec.N:
            raise ValueError(f"box side {self.size} outside 1..{self.spec.N}")
        object.__setattr__(self, "start", tuple(int(s) % self.spec.N for s in self.start))

    @classmethod
    def centered(cls, spec: GridSpec, center: tuple[int, ...], size: int) -> "Box":
        """Cube of ``size`` cells whose middle cell (left of middle if even) is ``center``."""
        return cls(spec, tuple(c - size // 2 for c in center), size)

    @property
    def full(self) -> bool:
        return self.size == self.spec.N

    @property
    def side(self) -> float:
        return self.size * self.spec.h

    @property
    def ncells(self) -> int:
        return self.size**self.spec.n

    @property
    def measure(self) -> float:
        return self.ncells * self.spec.cell_measure

    def axes(self) -> list[np.ndarray]:
        return [np.arange(s, s + self.size) % self.spec.N for s in self.start]

    def index(self):
        return np.ix_(*self.axes())

    def mask(self) -> np.ndarray:
        m = np.zeros(self.spec.shape, dtype=bool)
        m[self.index()] = True
        return m

    def take(self, values: np.ndarray) -> np.ndarray:
        return values[self.index()]

    def contains(self, other: "Box") -> bool:
        if self.full:
            return True
        if other.size > self.size:
            return False
        N = self.spec.N
        return all((o - s) % N + other.size <= self.size for s, o in zip(self.start, other.start))

    def contains_cell(self, cell: tuple[int, ...]) -> bool:
        return self.full or all((c - s) % self.spec.N < self.size for s, c in zip(self.start, cell))

    def center(self) -> np.ndarray:
        """Physical centre (taken in the unwrapped frame of the start cell)."""
        return -self.spec.L + self.spec.h * (np.array(self.start) + self.size / 2.0)

    def box(self) -> "Box":
        return self


@dataclass(frozen=True)
class DyadicLattice:
    spec: GridSpec
    shift: tuple[int, ...]

    def __post_init__(self):
        if len(self.shift) != self.spec.n or any(t not in (0, 1, 2) for t in self.shift):
            raise ValueError(f"shift must be in {{0,1,2}}^{self.spec.n}, got {self.shift}")

    @property
    def id(self) -> int:
        return sum(t * 3**i for i, t in enumerate(self.shift))

    @property
    def depth(self) -> int:
        return self.spec.depth

    def side(self, level: int) -> int:
        return self.spec.N >> level

    @cached_property
    def offsets(self) -> tuple[tuple[int, ...], ...]:
        N = self.spec.N
        o = [round(t * N / 3) for t in self.shift]
        out = [tuple(x % N for x in o)]
        for k in range(self.depth):
            s_next = N >> (k + 1)
            o = [x - (-1) ** k * t * s_next for x, t in zip(o, self.shift)]
            out.append(tuple(x % N for x in o))
        return tuple(out)

    def root(self) -> "Cube":
        return Cube(self, 0, (0,) * self.spec.n)

    def locate(self, cell: tuple[int, ...], level: int) -> "Cube":
        s = self.side(level)
        idx = tuple(((c - o) % self.spec.N) // s for c, o in zip(cell, self.offsets[level]))
        return Cube(self, level, idx)

    def level(self, level: int):
        """All cubes at a level, in index order."""
        for idx in itertools.product(range(1 << level), repeat=self.spec.n):
            yield Cube(self, level, idx)

    def blocks(self, values: np.ndarray, level: int) -> np.ndarray:
        """Reshape cell data so axes ``[:n]`` index cubes and ``[n:]`` cells inside them.

        Works on trailing ``n`` axes; leading axes are carried along.
        """
        n, s = self.spec.n, self.side(level)
        lead = values.ndim - n
        v = np.roll(values, tuple(-o for o in self.offsets[level]), axis=tuple(range(lead, lead + n)))
        v = v.reshape(values.shape[:lead] + sum(((1 << level, s) for _ in range(n)), ()))
        order = list(range(lead)) + [lead + 2 * i for i in range(n)] + [lead + 2 * i + 1 for i in range(n)]
        return v.transpose(order)

    def spread(self, per_cube: np.ndarray, level: int) -> np.ndarray:
        """Inverse of a block reduction: paint each cube's value over its cells."""
        n, s = self.spec.n, self.side(level)
        lead = per_cube.ndim - n
        v = per_cube
        for ax in range(lead, lead + n):
            v = np.repeat(v, s, axis=ax)
        return np.roll(v, self.offsets[level], axis=tuple(range(lead, lead + n)))

    def block_mean(self, values: np.ndarray, level: int) -> np.ndarray:
        n = self.spec.n
        return self.blocks(values, level).mean(axis=tuple(range(-n, 0)))


@lru_cache(maxsize=64)
def lattices(spec: GridSpec) -> tuple[DyadicLattice, ...]:
    """The 3^n shifted lattices, unshifted one first."""
    return tuple(DyadicLattice(spec, t[::-1]) for t in itertools.product((0, 1, 2), repeat=spec.n))


def standard_lattice(spec: GridSpec) -> DyadicLattice:
    return lattices(spec)[0]


@dataclass(frozen=True)
class Cube:
    lattice: DyadicLattice
    level: int
    index: tuple[int, ...]

    @property
    def spec(self) -> GridSpec:
        return self.lattice.spec

    @property
    def size(self) -> int:
        return self.lattice.side(self.level)

    @property
    def start(self) -> tuple[int, ...]:
        N = self.spec.N
        return tuple((o + i * self.size) % N for o, i in zip(self.lattice.offsets[self.level], self.index))

    def box(self) -> Box:
        return Box(self.spec, self.start, self.size)

    @property
    def side(self) -> float:
        return self.size * self.spec.h

    @property
    def ncells(self) -> int:
        return self.size**self.spec.n

    @property
    def measure(self) -> float:
        return self.ncells * self.spec.cell_measure

    def mask(self) -> np.ndarray:
        return self.box().mask()

    def take(self, values: np.ndarray) -> np.ndarray:
        return self.box().take(values)

    def center(self) -> np.ndarray:
        return self.box().center()

    def children(self) -> list["Cube"]:
        if self.level >= self.lattice.depth:
            raise ValueError("a single cell has no children")
        half = self.size // 2
        st = self.start
        return [
            self.lattice.locate(tuple(s + b * half for s, b in zip(st, bits)), self.level + 1)
            for bits in itertools.product((0, 1), repeat=self.spec.n)
        ]

    def parent(self) -> "Cube":
        if self.level == 0:
            raise ValueError("the root has no parent")
        return self.lattice.locate(self.start, self.level - 1)

    def ancestor(self, level: int) -> "Cube":
        if level > self.level:
            raise ValueError("ancestor level below the cube")
        return self.lattice.locate(self.start, level)

    def contains(self, other) -> bool:
        if isinstance(other, Cube) and other.lattice == self.lattice:
            return other.level >= self.level and other.ancestor(self.level) == self
        return self.box().contains(other.box())

    def descendants(self, level: int):
        """Cubes of ``level`` inside this one."""
        d = level - self.level
        if d < 0:
            raise ValueError("level above the cube")
        base = self.lattice.locate(self.start, level).index
        for off in itertools.product(range(1 << d), repeat=self.spec.n):
            yield Cube(self.lattice, level, tuple((b + o) % (1 << level) for b, o in zip(base, off)))

    def subtree(self):
        """This cube and all its descendants, coarse to fine."""
        for k in range(self.level, self.lattice.depth + 1):
            yield from self.descendants(k)


def dilate(Q, factor: float) -> Box:
    """Cube of at least ``factor`` times the side, around ``Q``, rounded out to cells.

    When the side difference is odd the extra cell goes to the right.  The
    result saturates at the whole box.
    """
    if factor < 1:
        raise ValueError("dilation factor must be >= 1")
    b = Q.box()
    size = ceil(factor * b.size - 1e-9)
    if size >= b.spec.N:
        return Box(b.spec, (0,) * b.spec.n, b.spec.N)
    margin = (size - b.size) // 2
    return Box(b.spec, tuple(s - margin for s in b.start), size)


def rho_cube(Q, rho: float) -> Box:
    """Cube of side ``side(Q)**rho`` (physical units) around ``Q``."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    b = Q.box()
    if rho < 1 and b.side >= 1:
        raise ValueError(f"side {b.side:.4g} >= 1: the rho-cube is not an enlargement")
    return dilate(b, b.side**rho / b.side)


def small_cube_threshold(n: int, rho: float) -> float:
    """Volume below which a cube counts as small for a (rho, rho) symbol."""
    return 3.0 ** (-2 * n / (1 - rho))


def three_lattice_cover(P) -> tuple[int, Cube]:
    """Smallest cube over the shifted lattices that contains ``P``."""
    b = P.box()
    spec = b.spec
    lats = lattices(spec)
    if 3 * b.size > spec.N:
        return 0, lats[0].root()
    best = None
    for lat in lats:
        for k in range(spec.depth, -1, -1):
            s = lat.side(k)
            if s < b.size:
                continue
            off = lat.offsets[k]
            if k == 0 or all((st - o) % spec.N % s + b.size <= s for st, o in zip(b.start, off)):
                if best is None or s < best[1].size:
                    best = (lat.id, lat.locate(b.start, k))
                break
    return best


def carleson_constant(family) -> Fraction:
    """``max_Q sum_{P in family, P <= Q} |P| / |Q|`` over ``Q`` in the family, exactly."""
    fam = set(family)
    if not fam:
        return Fraction(0)
    lats = {Q.lattice for Q in fam}
    if len(lats) > 1:
        raise ValueError("family mixes lattices")
    mass = {Q: 0 for Q in fam}
    for P in fam:
        for k in range(P.level, -1, -1):
            A = P.ancestor(k)
            if A in mass:
                mass[A] += P.ncells
    return max(Fraction(m, Q.ncells) for Q, m in mass.items())
