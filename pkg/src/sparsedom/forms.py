"""Sparse operators and forms, weighted right-hand sides and Besov norms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import GridFunction, LPFamily, band_project
from .weights import Weight, ap_characteristic, rh_characteristic


def average(values: np.ndarray, Q, r: float) -> float:
    """``<f>_{r,Q} = (|Q|^{-1} ∫_Q |f|^r)^{1/r}``; ``r = inf`` gives the max."""
    a = np.abs(Q.box().take(values))
    if np.isinf(r):
        return float(a.max())
    return float(np.mean(a**r) ** (1.0 / r))


def _cubes(S):
    return list(S.cubes if hasattr(S, "cubes") else S)


def sparse_op(f: GridFunction, S, r: float) -> GridFunction:
    """``sum_{Q in S} <f>_{r,Q} 1_Q``."""
    return mapped_sparse_op(f, S, r, None)


def mapped_sparse_op(f: GridFunction, S, r: float, X: Callable | None) -> GridFunction:
    """``sum_{Q in S} <f>_{r,X(Q)} 1_Q`` with ``X(Q)`` containing ``Q``."""
    out = np.zeros(f.spec.shape)
    for Q in _cubes(S):
        R = Q if X is None else X(Q)
        if X is not None and not R.box().contains(Q.box()):
            raise ValueError(f"X(Q) does not contain {Q}")
        out[Q.box().index()] += average(f.values, R, r)
    return GridFunction(f.spec, out)


def _terms(f, g, S, r, s, X=None):
    cubes = _cubes(S)
    vol = np.array([Q.measure for Q in cubes])
    fa = np.array([average(f.values, Q if X is None else X(Q), r) for Q in cubes])
    ga = np.array([average(g.values, Q, s) for Q in cubes])
    return vol, fa, ga


def sparse_form(f: GridFunction, g: GridFunction, S, r: float, s: float) -> float:
    """``sum_Q |Q| <f>_{r,Q} <g>_{s,Q}``."""
    vol, fa, ga = _terms(f, g, S, r, s)
    return float(np.sum(vol * fa * ga))


def sparse_form_alpha(f: GridFunction, g: GridFunction, S, r: float, s: float, alpha: float, X: Callable | None = None) -> float:
    """``(sum_Q |Q| <f>_{r,X(Q)}^alpha <g>_{s,Q}^alpha)^{1/alpha}``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    vol, fa, ga = _terms(f, g, S, r, s, X)
    if alpha == 1:
        return float(np.sum(vol * fa * ga))
    return float(np.sum(vol * (fa * ga) ** alpha) ** (1 / alpha))


def nested_sparse_op(f: GridFunction, families, r: float = 2.0) -> GridFunction:
    """``sum_j sum_{Q in S_j} <f>_{r,Q} sum_{R in S_j, R ⊆ Q} 1_R``.

    Evaluated as ``sum_R A(R) 1_R`` with ``A(R)`` the sum of averages over the
    members of ``S_j`` containing ``R``.
    """
    out = np.zeros(f.spec.shape)
    for S in families:
        cubes = _cubes(S)
        members = set(cubes)
        avg = {Q: average(f.values, Q, r) for Q in cubes}
        for R in cubes:
            acc = avg[R]
            for k in range(R.level - 1, -1, -1):
                A = R.ancestor(k)
                if A in members:
                    acc += avg[A]
            out[R.box().index()] += acc
    return GridFunction(f.spec, out)


def weighted_norm(f: GridFunction, p: float, w: np.ndarray | None = None) -> float:
    """``(∫ |f|^p w)^{1/p}`` (quasi-norm for ``p < 1``)."""
    return f.norm(p, w)


@dataclass(frozen=True)
class FormParams:
    r: float
    q: float
    p: float
    s: float
    alpha: float | None = None

    def __post_init__(self):
        r, q, p, s = self.r, self.q, self.p, self.s
        if not (1 <= r < q <= p < s):
            raise ValueError(f"need 1 <= r < q <= p < s, got r={r}, q={q}, p={p}, s={s}")
        a = 1 / (1 - 1 / p + 1 / q)
        if self.alpha is None:
            object.__setattr__(self, "alpha", a)
        elif abs(self.alpha - a) > 1e-12:
            raise ValueError(f"alpha must satisfy 1/alpha = 1/p' + 1/q = {1 / a}")

    @property
    def delta(self) -> float:
        r, q, p, s = self.r, self.q, self.p, self.s
        second = p / q if np.isinf(s) else p * (s - 1) / (q * (s - p))
        return max(1 / (q - r), second)

    @property
    def rh_exponent(self) -> float:
        """``(p/q) (s/p)'``."""
        conj = 1.0 if np.isinf(self.s) else self.s / (self.s - self.p)
        return self.p / self.q * conj

    @property
    def p_dual(self) -> float:
        return self.p / (self.p - 1)


def weighted_rhs(f: GridFunction, g: GridFunction, w: Weight, params: FormParams) -> tuple[float, dict]:
    """``([w^q]_{A_{q/r}} [w^q]_{RH_t})^delta ||f||_{L^q(w^q)} ||g||_{L^{p'}(w^{-p'})}``."""
    q, p = params.q, params.p
    wq = w.power(q)
    A = ap_characteristic(wq, q / params.r)
    RH = rh_characteristic(wq, params.rh_exponent)
    fn = f.norm(q, wq.array)
    gn = g.norm(params.p_dual, w.array ** (-params.p_dual))
    value = (A * RH) ** params.delta * fn * gn
    report = {"A": A, "RH": RH, "delta": params.delta, "rh_exponent": params.rh_exponent, "f_norm": fn, "g_norm": gn}
    return float(value), report


def besov_norm(f: GridFunction, kappa: float, p: float, sigma: float, w: np.ndarray | Weight | None, lp: LPFamily) -> float:
    """``(sum_j 2^{j kappa sigma} ||phi_j * f||_{L^p(w)}^sigma)^{1/sigma}`` over the grid's bands."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    wa = w.array if isinstance(w, Weight) else w
    parts = np.array([2.0 ** (j * kappa) * band_project(f, lp, j).norm(p, wa) for j in range(lp.J + 1)])
    if np.isinf(sigma):
        return float(parts.max())
    return float(np.sum(parts**sigma) ** (1 / sigma))
