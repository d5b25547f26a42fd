"""Sparse families and the constructions that produce them.

Three engines live here: the local-oscillation decomposition (a real function
is dominated by a sparse sum of its local oscillations), stopping-time
augmentation, and the Calderon-Zygmund driven recursion that builds a sparse
form bounding ``<T f, g>``.  Each construction checks its own output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .dyadic import Cube, DyadicLattice, carleson_constant, dilate, standard_lattice
from .grid import GridFunction
from .operators import Operator, _gather, _level_starts, _stat_s, _window_axes, as_operator, far_field


class VerificationError(RuntimeError):
    """A construction produced output that fails its own certificate."""


class HypothesisError(ValueError):
    """Input violates the hypothesis a construction relies on."""

    def __init__(self, message: str, cube=None, witnesses=()):
        super().__init__(message)
        self.cube = cube
        self.witnesses = list(witnesses)


@dataclass
class SparsenessReport:
    ok: bool
    eta: Fraction
    masks: dict = field(default_factory=dict, repr=False)
    violator: Cube | None = None
    worst: Fraction = Fraction(1)

    def __bool__(self):
        return self.ok


@dataclass
class SparseFamily:
    """Finite family of cubes from one lattice, with optional coefficients.

    ``certificate`` maps each cube to a boolean array over the cube's own cells
    (``Q.take`` order) marking ``E_Q``.
    """

    cubes: tuple
    coefficients: dict | None = None
    eta: Fraction | None = None
    certificate: dict | None = field(default=None, repr=False)
    carleson: Fraction | None = None

    def __post_init__(self):
        self.cubes = tuple(dict.fromkeys(self.cubes))
        lats = {Q.lattice for Q in self.cubes}
        if len(lats) > 1:
            raise ValueError("family mixes lattices")

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def __contains__(self, Q):
        return Q in self._set

    @property
    def _set(self):
        s = self.__dict__.get("_cube_set")
        if s is None:
            s = set(self.cubes)
            self.__dict__["_cube_set"] = s
        return s

    @property
    def lattice(self) -> DyadicLattice | None:
        return self.cubes[0].lattice if self.cubes else None

    def depth(self) -> int:
        """Longest chain of nested members minus one."""
        return max((self.generation(Q) for Q in self.cubes), default=0)

    def generation(self, Q: Cube) -> int:
        g = 0
        for k in range(Q.level - 1, -1, -1):
            if Q.ancestor(k) in self._set:
                g += 1
        return g

    def parent_in_family(self, Q: Cube) -> Cube | None:
        for k in range(Q.level - 1, -1, -1):
            A = Q.ancestor(k)
            if A in self._set:
                return A
        return None

    def carleson_constant(self) -> Fraction:
        return carleson_constant(self.cubes)

    def dominating(self) -> np.ndarray:
        """``sum_Q c_Q 1_Q`` on the grid."""
        if not self.cubes:
            raise ValueError("empty family")
        spec = self.cubes[0].spec
        out = np.zeros(spec.shape)
        for Q in self.cubes:
            out[Q.box().index()] += self.coefficients[Q]
        return out


def verify_eta_sparse(family, eta) -> SparsenessReport:
    """Tree certificate: ``E_Q`` is ``Q`` minus its maximal proper subcubes in the family."""
    fam = family if isinstance(family, SparseFamily) else SparseFamily(tuple(family))
    eta = Fraction(eta)
    covered: dict = {Q: [] for Q in fam.cubes}
    for P in fam.cubes:
        A = fam.parent_in_family(P)
        if A is not None:
            covered[A].append(P)
    masks = {}
    worst = Fraction(1)
    violator = None
    for Q in fam.cubes:
        free = Q.ncells - sum(P.ncells for P in covered[Q])
        ratio = Fraction(free, Q.ncells)
        if ratio < worst:
            worst = ratio
        if not ratio > eta and violator is None:
            violator = Q
    if violator is None:
        for Q in fam.cubes:
            m = np.ones((Q.size,) * Q.spec.n, dtype=bool)
            N = Q.spec.N
            for P in covered[Q]:
                rel = tuple((p - q) % N for p, q in zip(P.start, Q.start))
                m[tuple(slice(r, r + P.size) for r in rel)] = False
            masks[Q] = m
    return SparsenessReport(violator is None, eta, masks, violator, worst)


# --- local oscillation --------------------------------------------------------


def _window_size(count: int, lam: float) -> int:
    """Fewest cells forming more than ``(1 - lam)`` of ``count`` cells."""
    return int(np.floor((1 - Fraction(lam)) * count)) + 1


def _optimal_window(values: np.ndarray, lam: float) -> tuple[float, np.ndarray]:
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    w = _window_size(v.size, lam)
    spans = v[w - 1 :] - v[: v.size - w + 1]
    i = int(np.argmin(spans))
    return float(spans[i]), v[i : i + w]


def local_oscillation(f: GridFunction, Q, lam: float) -> float:
    """``omega_lambda(f; Q)``: smallest range of ``f`` over more than ``(1-lam)|Q|`` of ``Q``."""
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    vals = Q.box().take(f.values)
    if vals.size == 0:
        raise ValueError("empty cube")
    if np.iscomplexobj(vals) and np.any(vals.imag != 0):
        raise ValueError("local oscillation needs a real function")
    return _optimal_window(np.real(vals), lam)[0]


def _select_maximal(counts: np.ndarray, n: int, select: Callable) -> list[tuple[int, tuple[int, ...]]]:
    """Maximal proper sub-blocks of a ``(s,)*n`` array of cell counts with ``select(count, cells)``.

    Returns ``(depth, block index)`` pairs relative to the array's own corner.
    """
    s = counts.shape[0]
    depth = s.bit_length() - 1
    out = []
    taken = np.zeros((1,) * n, dtype=bool)
    for d in range(1, depth + 1):
        b = s >> d
        shape = sum(((1 << d, b) for _ in range(n)), ())
        c = counts.reshape(shape).sum(axis=tuple(2 * i + 1 for i in range(n)))
        for ax in range(n):
            taken = np.repeat(taken, 2, axis=ax)
        hit = select(c, b**n) & ~taken
        if hit.any():
            for idx in zip(*np.nonzero(hit)):
                out.append((d, tuple(int(i) for i in idx)))
            taken = taken | hit
    return out


def _to_cube(Q: Cube, d: int, idx: tuple[int, ...]) -> Cube:
    size = Q.size >> d
    return Q.lattice.locate(tuple(s + i * size for s, i in zip(Q.start, idx)), Q.level + d)


def lerner_nazarov_decompose(f: GridFunction, lam: float | None = None, lattice: DyadicLattice | None = None, tol: float = 1e-9) -> SparseFamily:
    """Sparse domination of a real function by its local oscillations.

    Returns a family with coefficients ``c_Q = omega_lam(f;Q)`` (the root also
    carries ``|m_root|``) such that ``|f| <= sum c_Q 1_Q`` everywhere and the
    tree certificate holds at ``eta = 1/2``.

    At each cube ``Q`` a centre value ``m_Q`` is taken from the optimal window.
    Cells with ``|f - m_Q| > omega_Q`` are bad; the children are the maximal
    proper subcubes where bad cells have density above ``2^{-n-1}``.  A child
    ``P`` takes as its centre a value of its own optimal window that is within
    ``omega_Q`` of ``m_Q``; such a value exists because a child's parent is not
    selected, so at least half of ``P`` is good for ``Q``.  Centres therefore
    telescope with one oscillation per level.
    """
    spec = f.spec
    n = spec.n
    if lam is None:
        lam = 2.0 ** (-n - 2)
    if not 0 < lam <= 2.0 ** (-n - 2):
        raise ValueError(f"lambda must lie in (0, 2^-{n + 2}]")
    vals = np.asarray(f.values)
    if np.iscomplexobj(vals):
        if np.any(vals.imag != 0):
            raise ValueError("decomposition needs a real function")
        vals = vals.real
    vals = vals.astype(float)
    lattice = lattice or standard_lattice(spec)
    root = lattice.root()
    thr = 2 ** (n + 1)

    omega, win = _optimal_window(vals, lam)
    m_root = float(win[np.argmin(np.abs(win))])
    coeffs = {root: omega + abs(m_root)}
    stack = [(root, m_root, omega)]
    while stack:
        Q, mQ, wQ = stack.pop()
        if Q.size == 1:
            continue
        local = Q.take(vals)
        bad = (np.abs(local - mQ) > wQ).astype(np.int64)
        if not bad.any():
            continue
        for d, idx in _select_maximal(bad, n, lambda c, cells: thr * c > cells):
            P = _to_cube(Q, d, idx)
            wP, winP = _optimal_window(P.take(vals), lam)
            ok = np.abs(winP - mQ) <= wQ
            if not ok.any():
                raise VerificationError(f"no admissible centre value in {P}")
            cand = winP[ok]
            mP = float(cand[np.argmin(np.abs(cand - mQ))])
            coeffs[P] = wP
            stack.append((P, mP, wP))

    fam = SparseFamily(tuple(coeffs), coeffs)
    slack = fam.dominating() - np.abs(vals)
    if slack.min() < -tol * max(1.0, float(np.abs(vals).max())):
        raise VerificationError(f"pointwise domination fails by {-slack.min():.3e}")
    rep = verify_eta_sparse(fam, Fraction(1, 2))
    if not rep.ok:
        raise VerificationError(f"sparseness certificate fails at {rep.violator}")
    fam.eta = rep.eta
    fam.certificate = rep.masks
    return fam


# --- stopping families -----------------------------------------------------------


class StoppingPredicate:
    """``P(U, R)`` for ``R`` inside ``U``; must be true for ``R = U``."""

    def __call__(self, U: Cube, R: Cube) -> bool:
        raise NotImplementedError

    def level_values(self, U: Cube, d: int) -> np.ndarray | None:
        """Vectorised values on all depth-``d`` descendants of ``U`` (optional)."""
        return None


class FunctionPredicate(StoppingPredicate):
    def __init__(self, fn: Callable[[Cube, Cube], bool]):
        self.fn = fn

    def __call__(self, U, R):
        return bool(self.fn(U, R))


class AverageGrowth(StoppingPredicate):
    """``<f>_{r,R} <= factor * <f>_{r,U}``."""

    def __init__(self, f: GridFunction, factor: float = np.sqrt(2.0), r: float = 2.0):
        self.values = np.abs(np.asarray(f.values)) ** r
        self.factor = factor
        self.r = r
        self._cache: dict = {}

    def _means(self, lat: DyadicLattice, level: int) -> np.ndarray:
        key = (lat, level)
        if key not in self._cache:
            self._cache[key] = lat.block_mean(self.values, level)
        return self._cache[key]

    def average(self, Q: Cube) -> float:
        return float(self._means(Q.lattice, Q.level)[Q.index]) ** (1.0 / self.r)

    def __call__(self, U, R):
        return self.average(R) <= self.factor * self.average(U) * (1 + 1e-12)

    def level_values(self, U, d):
        level = U.level + d
        means = self._means(U.lattice, level)
        base = U.lattice.locate(U.start, level).index
        idx = np.ix_(*[(b + np.arange(1 << d)) % (1 << level) for b in base])
        return means[idx] ** (1.0 / self.r) <= self.factor * self.average(U) * (1 + 1e-12)


def _as_predicate(P) -> StoppingPredicate:
    return P if isinstance(P, StoppingPredicate) else FunctionPredicate(P)


def _first_generation(U: Cube, P: StoppingPredicate) -> list[Cube]:
    """Maximal proper subcubes ``R`` of ``U`` with ``P(U, R)`` false."""
    depth = U.lattice.depth - U.level
    if depth == 0:
        return []
    probe = P.level_values(U, 1)
    if probe is not None:
        n = U.spec.n
        out = []
        taken = np.zeros((1,) * n, dtype=bool)
        for d in range(1, depth + 1):
            for ax in range(n):
                taken = np.repeat(taken, 2, axis=ax)
            hit = ~P.level_values(U, d) & ~taken
            for idx in zip(*np.nonzero(hit)):
                out.append(_to_cube(U, d, tuple(int(i) for i in idx)))
            taken |= hit
            if taken.all():
                break
        return out
    out = []
    stack = U.children()
    while stack:
        R = stack.pop()
        if not P(U, R):
            out.append(R)
        elif R.level < R.lattice.depth:
            stack.extend(R.children())
    return out


def stopping_family(Q0: Cube, P) -> set:
    """All cubes reachable from ``Q0`` by chains of one-step pairs.

    ``(U, R)`` is one step when ``P(U, R)`` is false but ``P(U, R')`` is true
    for every cube strictly between ``R`` and ``U``.
    """
    P = _as_predicate(P)
    out: set = set()
    stack = [Q0]
    while stack:
        U = stack.pop()
        for R in _first_generation(U, P):
            if R not in out:
                out.add(R)
                stack.append(R)
    return out


def max_disjoint_false_mass(U: Cube, P) -> tuple[int, list[Cube]]:
    """Largest total cell count of disjoint proper subcubes ``R`` of ``U`` with ``P(U,R)`` false."""
    P = _as_predicate(P)
    depth = U.lattice.depth - U.level
    if depth == 0:
        return 0, []
    n = U.spec.n
    if P.level_values(U, 1) is not None:
        best = None
        choice = []
        for d in range(depth, 0, -1):
            cells = (U.size >> d) ** n
            own = np.where(~P.level_values(U, d), cells, 0)
            if best is None:
                sub = np.zeros_like(own)
            else:
                sub = best.reshape(sum(((1 << d, 2) for _ in range(n)), ())).sum(axis=tuple(2 * i + 1 for i in range(n)))
            take = own > sub
            choice.append((d, take))
            best = np.maximum(own, sub)
        total = int(best.sum())
        # walk down from the top to list a maximising collection
        witnesses = []
        blocked = np.zeros((1,) * n, dtype=bool)
        for d, take in reversed(choice):
            for ax in range(n):
                blocked = np.repeat(blocked, 2, axis=ax)
            hit = take & ~blocked
            for idx in zip(*np.nonzero(hit)):
                witnesses.append(_to_cube(U, d, tuple(int(i) for i in idx)))
            blocked |= hit
        return total, witnesses

    def solve(R):
        own = R.ncells if (R is not U and not P(U, R)) else 0
        if R.level == R.lattice.depth:
            return own, ([R] if own else [])
        sub_total, sub_w = 0, []
        for C in R.children():
            t, w = solve(C)
            sub_total += t
            sub_w += w
        if own > sub_total:
            return own, [R]
        return sub_total, sub_w

    return solve(U)


def check_augmentation_hypothesis(U: Cube, P) -> None:
    total, witnesses = max_disjoint_false_mass(U, P)
    if 2 * total >= U.ncells:
        raise HypothesisError(
            f"disjoint stopping cubes fill {total}/{U.ncells} cells of {U}", U, witnesses
        )


def augment(S, families, predicate=None) -> SparseFamily:
    """Augment ``S`` by per-cube families ``F(Q)`` (each containing ``Q``).

    ``families`` is a mapping or a callable ``Q -> iterable``; alternatively pass
    a stopping predicate as ``predicate`` and ``families=None`` to use
    ``F(Q) = {Q} + stop(Q, predicate)``.  A cube ``P`` of ``F(Q)`` is kept when
    it does not lie inside a smaller member of ``S``.  With a predicate the
    half-measure hypothesis is checked for every ``Q`` first.
    """
    S = S if isinstance(S, SparseFamily) else SparseFamily(tuple(S))
    if predicate is not None:
        predicate = _as_predicate(predicate)
        for Q in S:
            check_augmentation_hypothesis(Q, predicate)
    if families is None:
        if predicate is None:
            raise ValueError("need families or a predicate")
        get = lambda Q: {Q} | stopping_family(Q, predicate)  # noqa: E731
    elif callable(families):
        get = families
    else:
        get = lambda Q: families[Q]  # noqa: E731
    out = []
    for Q in S:
        FQ = set(get(Q))
        if Q not in FQ:
            raise HypothesisError(f"F(Q) must contain Q for {Q}", Q)
        for P in FQ:
            if not Q.contains(P):
                raise HypothesisError(f"{P} is not inside {Q}", Q, [P])
            owner = S.parent_in_family(P) if P not in S else P
            if owner == Q:
                out.append(P)
    fam = SparseFamily(tuple(out))
    rep = verify_eta_sparse(fam, Fraction(1, 2))
    if rep.ok:
        fam.eta, fam.certificate = rep.eta, rep.masks
    else:
        fam.carleson = fam.carleson_constant()
    return fam


# --- Calderon-Zygmund selection ---------------------------------------------------


def cz_decompose(E: np.ndarray, Q: Cube) -> list[Cube]:
    """Maximal dyadic subcubes of ``Q`` where ``E`` has density above ``2^{-n-1}``."""
    n = Q.spec.n
    thr = 2 ** (n + 1)
    local = Q.take(np.asarray(E, dtype=bool)).astype(np.int64)
    if thr * int(local.sum()) > Q.ncells:
        raise HypothesisError(f"density of E in {Q} exceeds 2^-{n + 1}", Q)
    picks = _select_maximal(local, n, lambda c, cells: thr * c > cells)
    out = [_to_cube(Q, d, idx) for d, idx in picks]
    # exact post-conditions
    covered = np.zeros_like(local, dtype=bool)
    for (d, idx), P in zip(picks, out):
        size = P.size
        sl = tuple(slice(i * size, (i + 1) * size) for i in idx)
        if covered[sl].any():
            raise VerificationError("selected cubes overlap")
        covered[sl] = True
        c = int(local[sl].sum())
        if not (thr * c > P.ncells and 2 * c <= P.ncells):
            raise VerificationError(f"density bounds fail on {P}")
    if (local.astype(bool) & ~covered).any():
        raise VerificationError("E not covered by the selected cubes")
    return out


# --- sparse form construction ---------------------------------------------------------


@dataclass
class FormCertificate:
    lhs: float
    rhs: float
    form: float
    C: float
    lam: float
    depth: int
    carleson: Fraction
    holds: bool
    restarts: int


def _avg(values: np.ndarray, box, r: float) -> float:
    a = np.abs(box.take(values))
    if np.isinf(r):
        return float(a.max())
    return float(np.mean(a**r) ** (1.0 / r))


def _dual(s: float) -> float:
    if s == 1:
        return np.inf
    if np.isinf(s):
        return 1.0
    return s / (s - 1)


def _local_grand(op: Operator, h: np.ndarray, Th: np.ndarray, Q: Cube, s: float) -> np.ndarray:
    """``max_{P ∋ x, P ⊆ Q dyadic} <T(h 1_{(3P)^c})>_{s,P}`` on the cells of ``Q``."""
    n = Q.spec.n
    out = np.zeros((Q.size,) * n)
    for d in range(1, Q.lattice.depth - Q.level + 1):
        size = Q.size >> d
        if 3 * size >= Q.spec.N:
            continue
        grid = np.array(np.meshgrid(*[np.arange(1 << d)] * n, indexing="ij")).reshape(n, -1).T
        starts = (np.array(Q.start)[None, :] + grid * size) % Q.spec.N
        vals = np.concatenate([far_field(op, h, Th, starts[i : i + 4096], size, s) for i in range(0, len(starts), 4096)])
        per = vals.reshape((1 << d,) * n)
        for ax in range(n):
            per = np.repeat(per, size, axis=ax)
        np.maximum(out, per, out=out)
    return out


def build_sparse_form_family(T, f: GridFunction, g: GridFunction, Q0: Cube, r: float, s: float, alpha: float = 1.0, max_restarts: int = 60):
    """Sparse family ``S`` with ``|∫_{Q0} T(f 1_{3Q0}) g| <= C * Lambda``.

    ``Lambda = (sum_{P in S} |P| <f>_{r,3P}^alpha <g>_{s',P}^alpha)^{1/alpha}``.
    At a cube ``Q`` the exceptional set is where ``|T(f 1_{3Q})|`` or the
    local far-field maximal function exceeds ``lam |Q|^{1/alpha-1} <f>_{r,3Q}``;
    its Calderon-Zygmund cubes are the children.  ``lam`` doubles (and the
    construction restarts) until every node keeps its children below half its
    measure.  The two pieces estimated at each node give ``C = 2 lam``.
    """
    if not (1 <= r <= s):
        raise ValueError("need 1 <= r <= s")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    spec = f.spec
    n = spec.n
    op = as_operator(T, spec)
    fv = np.asarray(f.values, dtype=complex)
    gv = np.asarray(g.values, dtype=complex)
    sd = _dual(s)
    lam = 1.0
    for restart in range(max_restarts):
        fam, failed = _grow(op, fv, Q0, r, s, alpha, lam)
        if not failed:
            break
        lam *= 2.0
    else:
        raise VerificationError(f"no admissible lambda after {max_restarts} doublings (deepest cube {failed})")

    h0 = np.where(dilate(Q0, 3).mask(), fv, 0)
    lhs = abs(np.sum(Q0.take(op.apply(h0) * gv)) * spec.cell_measure)
    vol = np.array([P.measure for P in fam])
    pair = np.array([_avg(fv, dilate(P, 3), r) * _avg(gv, P.box(), sd) for P in fam])
    rhs = 2 * lam * float(np.sum(vol ** (1 / alpha) * pair))
    form = float(np.sum(vol * pair**alpha) ** (1 / alpha))
    holds = lhs <= rhs * (1 + 1e-9) + 1e-300 and rhs <= 2 * lam * form * (1 + 1e-9) + 1e-300
    carl = fam.carleson_constant()
    depth = fam.depth()
    cert = FormCertificate(lhs, rhs, form, 2 * lam, lam, depth, carl, bool(holds), restart)
    if not holds:
        raise VerificationError(f"form bound fails: {lhs:.6g} > {rhs:.6g}")
    if carl > 2:
        raise VerificationError(f"Carleson constant {carl} exceeds 2")
    return fam, cert


def _grow(op: Operator, fv: np.ndarray, Q0: Cube, r, s, alpha, lam):
    n = Q0.spec.n
    thr = 2 ** (n + 1)
    cubes = []
    stack = [Q0]
    while stack:
        Q = stack.pop()
        cubes.append(Q)
        tri = dilate(Q, 3)
        h = np.where(tri.mask(), fv, 0)
        avg = _avg(fv, tri, r)
        tau = lam * Q.measure ** (1 / alpha - 1) * avg
        Th = op.apply(h)
        E = np.abs(Q.take(Th)) > tau
        if Q.size == 1:
            if E.any():
                return None, Q
            continue
        E |= _local_grand(op, h, Th, Q, s) > tau
        count = int(E.sum())
        if thr * count > Q.ncells:
            return None, Q
        if count == 0:
            continue
        picks = _select_maximal(E.astype(np.int64), n, lambda c, cells: thr * c > cells)
        kids = [_to_cube(Q, d, idx) for d, idx in picks]
        if 2 * sum(P.ncells for P in kids) >= Q.ncells:
            return None, Q
        stack.extend(kids)
    return SparseFamily(tuple(cubes)), None
