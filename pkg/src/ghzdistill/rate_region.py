"""Omniscience rate polytopes, their minimum total rate, and a brute-force check.

A region is a list of constraints ``sum_{i in L} R_i >= bound`` over
nonempty proper subsets ``L`` of the parties. ``minimize_sum`` solves the
LP with a small dense two-phase simplex (Bland's rule) and returns the
lexicographically smallest optimal vertex; ``oracle_minimize`` enumerates
vertices directly and is meant for cross-checking on m <= 5.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .measurement import CqState, cq_conditional_entropy
from .quantum_core import JointPmf, nonempty_subsets, shannon_entropy

FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-11


@dataclass(frozen=True)
class Constraint:
    subset: tuple[int, ...]
    bound: float
    decoder: object = "classical"

    def coeff(self, m: int) -> np.ndarray:
        a = np.zeros(m)
        a[list(self.subset)] = 1.0
        return a

    @property
    def label(self) -> tuple:
        return (self.decoder, self.subset)


@dataclass(frozen=True)
class RateRegion:
    m: int
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        for c in self.constraints:
            if c.bound < -FEAS_TOL:
                raise ValueError(f"negative bound {c.bound} for subset {c.subset}")

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.array([c.coeff(self.m) for c in self.constraints]).reshape(-1, self.m)
        b = np.array([c.bound for c in self.constraints])
        return a, b

    def bound_for(self, subset) -> float:
        subset = tuple(sorted(subset))
        return max(c.bound for c in self.constraints if c.subset == subset)

    def to_dict(self) -> list[dict]:
        return [
            {"subset": list(c.subset), "decoder": c.decoder, "bound": float(c.bound)}
            for c in self.constraints
        ]


@dataclass(frozen=True)
class LpSolution:
    rates: tuple[float, ...]
    objective: float
    tight: tuple[tuple, ...]

    def to_dict(self) -> dict:
        return {
            "rates": [float(r) for r in self.rates],
            "objective": float(self.objective),
            "tight": [[d, list(s)] for d, s in self.tight],
        }


def _proper_subsets(m: int) -> list[tuple[int, ...]]:
    return [s for s in nonempty_subsets(range(m)) if len(s) < m]


def build_region_classical(p: JointPmf) -> RateRegion:
    if p.m < 2:
        raise ValueError("need at least two parties")
    cons = []
    for L in _proper_subsets(p.m):
        rest = [i for i in range(p.m) if i not in L]
        cons.append(Constraint(L, max(shannon_entropy(p, L, rest), 0.0)))
    return RateRegion(p.m, tuple(cons))


def build_region_cq(omega: CqState) -> RateRegion:
    """One constraint per subset, keeping the largest bound over decoders j not in L."""
    m = omega.m
    cache: dict = {}
    best: dict = {}
    for j in range(m):
        others = [i for i in range(m) if i != j]
        for L in nonempty_subsets(others):
            bound = cq_conditional_entropy(omega, L, j, _cache=cache)
            if L not in best or bound > best[L].bound:
                best[L] = Constraint(L, bound, j)
    cons = tuple(best[L] for L in _proper_subsets(m) if L in best)
    return RateRegion(m, cons)


def contains(region: RateRegion, rates: Sequence[float], slack: float = 0.0) -> bool:
    a, b = region.matrix()
    r = np.asarray(rates, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("rates must be finite")
    return bool(np.all(a @ r - b >= slack))


# --- simplex -----------------------------------------------------------------

class _Unbounded(Exception):
    pass


def _pivot(t: np.ndarray, row: int, col: int) -> None:
    t[row] /= t[row, col]
    for r in range(t.shape[0]):
        if r != row and t[r, col] != 0.0:
            t[r] -= t[r, col] * t[row]


def _run(t: np.ndarray, basis: list[int], ncols: int) -> None:
    """Minimize the objective in the last row of tableau ``t`` (Bland's rule)."""
    nrows = t.shape[0] - 1
    while True:
        cost = t[-1, :ncols]
        entering = next((j for j in range(ncols) if cost[j] < -_PIVOT_TOL), None)
        if entering is None:
            return
        col = t[:nrows, entering]
        rhs = t[:nrows, -1]
        best_row, best_ratio = None, np.inf
        for r in range(nrows):
            if col[r] > _PIVOT_TOL:
                ratio = rhs[r] / col[r]
                if ratio < best_ratio - 1e-13 or (
                    abs(ratio - best_ratio) <= 1e-13 and basis[r] < basis[best_row]
                ):
                    best_row, best_ratio = r, ratio
        if best_row is None:
            raise _Unbounded()
        _pivot(t, best_row, entering)
        basis[best_row] = entering


def simplex(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None) -> np.ndarray:
    """Minimize ``c @ x`` subject to ``a_ub x <= b_ub``, ``a_eq x = b_eq``, ``x >= 0``.

    Dense two-phase tableau method with Bland's anti-cycling rule. Returns
    the optimal ``x``; raises ValueError if infeasible or unbounded.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    a_ub = np.zeros((0, n)) if a_ub is None else np.asarray(a_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    a_eq = np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    n_ub, n_eq = a_ub.shape[0], a_eq.shape[0]
    rows = n_ub + n_eq
    # columns: x (n) | slacks (n_ub) | artificials (rows) | rhs
    ncols = n + n_ub + rows
    t = np.zeros((rows + 1, ncols + 1))
    t[:n_ub, :n] = a_ub
    t[:n_ub, n : n + n_ub] = np.eye(n_ub)
    t[:n_ub, -1] = b_ub
    t[n_ub:rows, :n] = a_eq
    t[n_ub:rows, -1] = b_eq
    neg = t[:rows, -1] < 0
    t[:rows][neg] *= -1
    t[:rows, n + n_ub : ncols] = np.eye(rows)
    basis = list(range(n + n_ub, ncols))
    # phase 1: minimize the sum of artificials
    t[-1, :] = -t[:rows].sum(axis=0)
    t[-1, n + n_ub : ncols] = 0.0
    _run(t, basis, ncols)
    if t[-1, -1] < -1e-9:
        raise ValueError("LP infeasible")
    # drive artificials out of the basis where possible
    for r, var in enumerate(basis):
        if var >= n + n_ub:
            col = next((j for j in range(n + n_ub) if abs(t[r, j]) > 1e-9), None)
            if col is not None:
                _pivot(t, r, col)
                basis[r] = col
    # phase 2 on original columns only; artificial columns are frozen out
    t[:, n + n_ub : ncols] = 0.0
    for r, var in enumerate(basis):
        if var >= n + n_ub:
            t[r, var] = 1.0  # redundant row, artificial stays at zero
    t[-1, :] = 0.0
    t[-1, :n] = c
    for r, var in enumerate(basis):
        if t[-1, var] != 0.0:
            t[-1] -= t[-1, var] * t[r]
    try:
        _run(t, basis, n + n_ub)
    except _Unbounded:
        raise ValueError("LP unbounded") from None
    x = np.zeros(ncols)
    for r, var in enumerate(basis):
        x[var] = t[r, -1]
    return x[:n]


def _tight(region: RateRegion, rates: np.ndarray) -> tuple:
    a, b = region.matrix()
    slack = a @ rates - b
    return tuple(c.label for c, s in zip(region.constraints, slack) if abs(s) <= FEAS_TOL)


def _solution(region: RateRegion, rates) -> LpSolution:
    rates = np.where(np.abs(rates) < 1e-13, 0.0, rates)
    return LpSolution(tuple(float(r) for r in rates), float(np.sum(rates)), _tight(region, rates))


def min_total_rate(region: RateRegion) -> float:
    """Optimal value of sum(R) over the region (no vertex tie-breaking)."""
    a, b = region.matrix()
    x = simplex(np.ones(region.m), -a, -b)
    return float(np.sum(x))


def minimize_sum(region: RateRegion) -> LpSolution:
    """Minimum total rate; returns the lexicographically smallest optimal vertex."""
    m = region.m
    a, b = region.matrix()
    x = simplex(np.ones(m), -a, -b)
    fixed_rows = [np.ones(m)]
    fixed_vals = [float(np.sum(x))]
    for k in range(m):
        c = np.zeros(m)
        c[k] = 1.0
        x = simplex(c, np.vstack([-a] + fixed_rows), np.concatenate([-b, fixed_vals]))
        e = np.zeros(m)
        e[k] = 1.0
        fixed_rows.append(e)
        fixed_vals.append(float(x[k]))
    return _solution(region, x)


def oracle_minimize(region: RateRegion) -> LpSolution:
    """Vertex enumeration over constraint and coordinate hyperplanes (m <= 5)."""
    m = region.m
    if m > 5:
        raise ValueError(f"vertex enumeration limited to m <= 5, got {m}")
    a, b = region.matrix()
    planes = np.vstack([a, np.eye(m)])
    rhs = np.concatenate([b, np.zeros(m)])
    combos = np.array(list(itertools.combinations(range(len(planes)), m)))
    mats = planes[combos]
    vecs = rhs[combos]
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-9
    pts = np.linalg.solve(mats[ok], vecs[ok][..., None])[..., 0]
    feas = np.all(pts @ a.T - b >= -1e-9, axis=1) & np.all(pts >= -1e-9, axis=1)
    pts = pts[feas]
    if not len(pts):
        raise ValueError("no feasible vertex found")
    obj = pts.sum(axis=1)
    best = obj.min()
    cand = pts[obj <= best + 1e-9]
    order = np.lexsort(cand.T[::-1])
    return _solution(region, cand[order[0]])
