"""Test-function suites and random sparse families shared by the experiments."""

from __future__ import annotations

import numpy as np

from ..dyadic import Cube, DyadicLattice, standard_lattice
from ..grid import GridFunction, GridSpec, band_limited_noise, sample


def noise_suite(spec: GridSpec, seed: int, count: int, cutoff: float) -> list[GridFunction]:
    """Seeded band-limited fields; the same seed gives the same function on a refined grid."""
    return [band_limited_noise(spec, np.random.default_rng([seed, i]), cutoff) for i in range(count)]


def bump_suite(spec: GridSpec, bumps) -> list[GridFunction]:
    """Gaussian bumps ``exp(-|x - c|^2 / w^2)`` with ``c`` repeated on every axis."""
    out = []
    for c, w in bumps:
        out.append(sample(spec, lambda *x, c=c, w=w: np.exp(-sum((xi - c) ** 2 for xi in x) / w**2)))
    return out


def standard_suite(spec: GridSpec, seed: int, count: int, cutoff: float, bumps) -> list[GridFunction]:
    return noise_suite(spec, seed, count, cutoff) + bump_suite(spec, bumps)


def random_sparse_family(lattice: DyadicLattice, rng: np.random.Generator, max_level: int = 7, p: float = 0.6) -> list[Cube]:
    """Random tree family whose members cover strictly less than half of each parent.

    Each member picks one random depth (1 to 3 levels down) and keeps each
    descendant there with probability ``p`` while the budget lasts, so the
    family is 1/2-sparse by construction.
    """
    root = lattice.root()
    out = [root]
    stack = [root]
    while stack:
        Q = stack.pop()
        if Q.level >= max_level:
            continue
        d = int(rng.integers(1, 4))
        if Q.level + d > lattice.depth:
            continue
        budget = (Q.ncells - 1) // 2
        kids = list(Q.descendants(Q.level + d))
        for i in rng.permutation(len(kids)):
            D = kids[i]
            if rng.random() < p and D.ncells <= budget:
                budget -= D.ncells
                out.append(D)
                stack.append(D)
    return out


def transport(cubes, spec: GridSpec) -> list[Cube]:
    """Same physical cubes of the unshifted lattice on another grid of the same box."""
    lat = standard_lattice(spec)
    out = []
    for Q in cubes:
        if any(Q.lattice.shift):
            raise ValueError("only unshifted-lattice cubes can be transported")
        out.append(Cube(lat, Q.level, Q.index))
    return out
