"""Achievable GHZ / common-randomness rates and the entropy upper bound for pure states."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measurement import (
    LocalInstrument,
    apply_instruments,
    measure_joint,
)
from .quantum_core import (
    PureState,
    entropy_of_probs,
    marginal_entropy,
    nonempty_subsets,
    reduce_vector,
    von_neumann_entropy,
)
from .rate_region import (
    LpSolution,
    build_region_classical,
    build_region_cq,
    min_total_rate,
    minimize_sum,
)

RESIDUAL_TAIL_TOL = 1e-6


# --- basis parameterization -------------------------------------------------

def n_basis_params(d: int) -> int:
    return d * d - 1


def basis_unitary(angles: Sequence[float], d: int) -> np.ndarray:
    """Local unitary from d(d-1)/2 Givens rotations (2 angles each) and d-1 phases.

    All-zero angles give the identity.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size != n_basis_params(d):
        raise ValueError(f"expected {n_basis_params(d)} angles for d={d}, got {angles.size}")
    u = np.eye(d, dtype=complex)
    k = 0
    for a in range(d):
        for b in range(a + 1, d):
            theta, phi = angles[k], angles[k + 1]
            k += 2
            g = np.eye(d, dtype=complex)
            c, s = np.cos(theta), np.sin(theta)
            g[a, a] = c
            g[b, b] = c
            g[a, b] = -np.exp(-1j * phi) * s
            g[b, a] = np.exp(1j * phi) * s
            u = g @ u
    phases = np.concatenate([[0.0], angles[k:]])
    return np.exp(1j * phases)[:, None] * u


@dataclass(frozen=True)
class BasisParams:
    """Per-party angle vectors; ``unitaries()`` gives the measurement bases U|x>."""

    angles: tuple
    dims: tuple

    @classmethod
    def computational(cls, dims) -> "BasisParams":
        return cls(tuple(tuple([0.0] * n_basis_params(d)) for d in dims), tuple(dims))

    def unitaries(self) -> list[np.ndarray]:
        return [basis_unitary(a, d) for a, d in zip(self.angles, self.dims)]

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "angles": [list(map(float, a)) for a in self.angles]}


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _is_rank1_projective(ins: LocalInstrument, tol: float = 1e-9) -> bool:
    for m in ins.povm():
        if abs(np.trace(m).real - 1.0) > tol or np.max(np.abs(m @ m - m)) > tol:
            return False
    return True


def basis_instruments(psi: PureState, bases=None) -> list[LocalInstrument]:
    """Rank-1 projective measurements from ``bases``.

    ``bases`` may be None/"computational", a BasisParams, or one entry per
    party that is a unitary matrix, ``"computational"``, or a
    LocalInstrument (checked to be a rank-1 projective measurement).
    """
    if bases is None or (isinstance(bases, str) and bases == "computational"):
        return [LocalInstrument.computational(i, d) for i, d in enumerate(psi.dims)]
    if isinstance(bases, BasisParams):
        bases = bases.unitaries()
    if len(bases) != psi.m:
        raise ValueError(f"{len(bases)} bases for {psi.m} parties")
    out = []
    for i, b in enumerate(bases):
        if isinstance(b, str) and b == "computational":
            out.append(LocalInstrument.computational(i, psi.dims[i]))
        elif isinstance(b, LocalInstrument):
            if not _is_rank1_projective(b):
                raise ValueError(f"party {i}: measurement is not a rank-1 projective basis")
            out.append(b)
        else:
            u = np.asarray(b, dtype=complex)
            if u.shape != (psi.dims[i], psi.dims[i]) or np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > 1e-9:
                raise ValueError(f"party {i}: basis matrix is not a {psi.dims[i]}x{psi.dims[i]} unitary")
            out.append(LocalInstrument.in_basis(i, u))
    return out


# --- report ------------------------------------------------------------------

@dataclass
class RateEntry:
    name: str
    value: float | None
    witness: object = None
    notes: str = ""


@dataclass
class RateReport:
    state_id: str
    entries: list = field(default_factory=list)

    def add(self, name, value, witness=None, notes=""):
        self.entries.append(RateEntry(name, None if value is None else float(value), witness, notes))

    def get(self, name) -> RateEntry:
        return next(e for e in self.entries if e.name == name)

    def check_ordering(self, tol: float = 1e-6) -> list[str]:
        """Names of achievable-rate entries that exceed the entropy upper bound."""
        try:
            ub = self.get("entropy_upper_bound").value
        except StopIteration:
            return []
        lower = {"combing", "vc", "cq_ghz", "chi", "svw_fused"}
        return [e.name for e in self.entries if e.name in lower and e.value is not None and e.value > ub + tol]

    def to_dict(self) -> dict:
        return {
            "state": self.state_id,
            "entries": [
                {"name": e.name, "value": e.value, "witness": _jsonable(e.witness), "notes": e.notes}
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        width = max([len(e.name) for e in self.entries] + [6])
        lines = [f"state: {self.state_id}", f"{'method':<{width}}  {'bits/copy':>10}  notes"]
        for e in self.entries:
            val = "n/a" if e.value is None else f"{e.value:.6f}"
            lines.append(f"{e.name:<{width}}  {val:>10}  {e.notes}".rstrip())
        return "\n".join(lines) + "\n"


def _jsonable(obj):
    if obj is None or isinstance(obj, (str, bool, int, float)):
        return obj
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return str(obj)


# --- common randomness rates -------------------------------------------------

def cr_rate_classical(state, povms=None, return_solution: bool = False):
    """H(X) minus the minimum total omniscience rate for local measurement outcomes."""
    p = measure_joint(state, povms)
    sol = minimize_sum(build_region_classical(p))
    value = p.entropy() - sol.objective
    return (value, sol) if return_solution else value


def cr_rate_cq(state, instruments, return_solution: bool = False):
    """H(X) minus the minimum total rate of the cq omniscience region."""
    omega = apply_instruments(state, instruments)
    sol = minimize_sum(build_region_cq(omega))
    value = omega.pmf.entropy() - sol.objective
    return (value, sol) if return_solution else value


def ghz_rate_vc(psi: PureState, bases=None, return_solution: bool = False):
    """GHZ lower bound from full local basis measurements plus omniscience."""
    value, sol = cr_rate_classical(psi, basis_instruments(psi, bases), return_solution=True)
    return (value, sol) if return_solution else value


def _vc_value_fast(psi: PureState, instruments) -> float:
    p = measure_joint(psi, instruments)
    return p.entropy() - min_total_rate(build_region_classical(p))


@dataclass
class CqGhzResult:
    value: float
    solution: LpSolution
    pmf_entropy: float
    residuals: dict  # outcome tuple -> PureState on the retained registers
    probabilities: dict

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "solution": self.solution.to_dict(),
            "residual_outcomes": [list(x) for x in sorted(self.residuals)],
        }


def ghz_rate_cq(psi: PureState, instruments) -> CqGhzResult:
    """GHZ lower bound from pure local instruments; residual states kept for recycling.

    Raises ValueError when a conditional state is mixed (tail weight above
    1e-6), which happens for instruments that are not pure CP maps.
    """
    omega = apply_instruments(psi, instruments)
    residuals = {}
    for x in omega.outcomes():
        rho = omega.conditionals[x]
        ev = np.linalg.eigvalsh(rho.matrix)
        tail = 1.0 - ev[-1]
        if tail > RESIDUAL_TAIL_TOL:
            raise ValueError(f"conditional state for outcome {x} is mixed (tail weight {tail:.3g})")
        if omega.vectors is not None:
            v = omega.vectors[x]
        else:
            v = np.linalg.eigh(rho.matrix)[1][:, -1]
        residuals[x] = v
    sol = minimize_sum(build_region_cq(omega))
    h = omega.pmf.entropy()
    res_states = {}
    dims = omega.retained_dims
    for x, v in residuals.items():
        res_states[x] = _residual_state(dims, v)
    probs = {x: float(omega.pmf.probs[x]) for x in omega.outcomes()}
    return CqGhzResult(h - sol.objective, sol, h, res_states, probs)


def _residual_state(dims, v):
    # PureState needs two parties; dimension-1 registers are kept so the layout stays m-partite
    if len(dims) >= 2:
        return PureState(tuple(dims), v)
    return PureState(tuple(dims) + (1,), v)


# --- entropic quantities -----------------------------------------------------

def combing_rate(psi: PureState, return_witness: bool = False):
    """max over distinguished party i of min over nonempty I not containing i of S(I)/|I|."""
    best, witness = -np.inf, None
    cache = {}
    for i in range(psi.m):
        others = [k for k in range(psi.m) if k != i]
        inner, arg = np.inf, None
        for sub in nonempty_subsets(others):
            if sub not in cache:
                cache[sub] = marginal_entropy(psi, sub)
            val = cache[sub] / len(sub)
            if val < inner - 1e-12:
                inner, arg = val, sub
        if inner > best + 1e-12:
            best, witness = inner, (i, arg)
    return (best, witness) if return_witness else best


def entropy_upper_bound(psi: PureState) -> tuple[float, tuple[int, ...]]:
    """min over nonempty proper subsets of S(A_I), with the first minimizing subset."""
    best, arg = np.inf, None
    for sub in nonempty_subsets(range(psi.m)):
        if len(sub) == psi.m:
            continue
        val = marginal_entropy(psi, sub)
        if val < best - 1e-12:
            best, arg = val, sub
    return best, arg


def epr_capacity(psi: PureState, i: int, j: int, return_witness: bool = False):
    """Pairwise EPR capacity: min of S(A_I) over cuts with i in I and j outside."""
    if i == j:
        raise ValueError("EPR capacity needs two distinct parties")
    rest = [k for k in range(psi.m) if k not in (i, j)]
    best, arg = np.inf, None
    for r in range(len(rest) + 1):
        for extra in itertools.combinations(rest, r):
            sub = tuple(sorted((i,) + extra))
            val = marginal_entropy(psi, sub)
            if val < best - 1e-12:
                best, arg = val, sub
    return (best, arg) if return_witness else best


@dataclass
class SvwResult:
    chi: float
    ebar: float
    measuring_party: int
    pairable: bool
    fused_total: float | None
    decomposition: list  # (probability, S of residual marginal)

    def to_dict(self) -> dict:
        return {
            "chi": self.chi,
            "ebar": self.ebar,
            "measuring_party": self.measuring_party,
            "pairable": self.pairable,
            "fused_total": self.fused_total,
        }


def _svw_core(psi: PureState, party: int, unitary) -> tuple[float, float, list]:
    others = [k for k in range(3) if k != party]
    ins = [LocalInstrument.trivial(k, d) for k, d in enumerate(psi.dims)]
    u = np.eye(psi.dims[party]) if unitary is None else unitary
    ins[party] = LocalInstrument.in_basis(party, u)
    omega = apply_instruments(psi, ins)
    decomposition = []
    ebar = 0.0
    for x in omega.outcomes():
        lam = float(omega.pmf.probs[x])
        e = von_neumann_entropy(reduce_vector(omega.retained_dims, omega.vectors[x], [others[0]]))
        decomposition.append((lam, e))
        ebar += lam * e
    s_min = min(marginal_entropy(psi, [others[0]]), marginal_entropy(psi, [others[1]]))
    return s_min - ebar, ebar, decomposition


def svw_rate(psi: PureState, party: int = 0, basis=None) -> SvwResult:
    """Tripartite GHZ rate from a rank-1 measurement on one party.

    ``chi = min(S(B), S(C)) - Ebar`` where Ebar is the average entanglement
    of the residual bipartite pure states. Residual EPR pairs can be fused
    into GHZ states at half their rate when they can be produced along a
    second pair of parties; this is detected by repeating the construction
    with another party of the same dimension measuring in the same basis and
    obtaining the same (chi, Ebar). The fused total is then chi + Ebar/2.
    """
    if psi.m != 3:
        raise ValueError(f"svw_rate needs a tripartite state, got {psi.m} parties")
    u = None
    if basis is not None and not (isinstance(basis, str) and basis == "computational"):
        u = np.asarray(basis, dtype=complex)
    chi, ebar, decomp = _svw_core(psi, party, u)
    pairable = False
    if ebar > 1e-12:
        for other in range(3):
            if other == party or psi.dims[other] != psi.dims[party]:
                continue
            chi2, ebar2, _ = _svw_core(psi, other, u)
            if abs(chi2 - chi) <= 1e-9 and abs(ebar2 - ebar) <= 1e-9:
                pairable = True
                break
    fused = chi + ebar / 2 if pairable else None
    return SvwResult(chi, ebar, party, pairable, fused, decomp)


@dataclass
class GhzTypeResult:
    is_ghz_type: bool
    rate: float | None
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {"is_ghz_type": self.is_ghz_type, "rate": self.rate, "diagnostic": self.diagnostic}


def ghz_type_rate(psi: PureState, bases=None, post_omniscience: bool = False, tol: float = 1e-12) -> GhzTypeResult:
    """Concentration yield H(p) of a GHZ-type state sum_x sqrt(p_x) e^{i theta_x} |x>...|x>.

    In the given local bases the support tuples must be distinguishable by
    every single party (each party's digit determines the whole tuple); the
    per-party relabeling onto a shared label set is then exact. With
    ``post_omniscience=True`` a state failing that test still reports H(p),
    which is the concentration yield of the aligned state obtained after
    every party learns the full outcome tuple, not a yield of ``psi``.
    """
    us = _basis_matrices(psi, bases)
    t = psi.tensor()
    for i, u in enumerate(us):
        t = np.moveaxis(np.tensordot(u.conj().T, t, axes=([1], [i])), 0, i)
    w = np.abs(t) ** 2
    support = np.argwhere(w > tol)
    p = w[tuple(support.T)]
    p = p / p.sum()
    rate = entropy_of_probs(p)
    for i in range(psi.m):
        if len(set(support[:, i].tolist())) != len(support):
            if post_omniscience:
                return GhzTypeResult(
                    False,
                    rate,
                    "post-omniscience yield: concentration rate of the aligned state, not of psi",
                )
            return GhzTypeResult(False, None, f"party {i} cannot resolve the support tuples: not GHZ-type")
    return GhzTypeResult(True, rate, "")


def _basis_matrices(psi: PureState, bases) -> list[np.ndarray]:
    if bases is None or (isinstance(bases, str) and bases == "computational"):
        return [np.eye(d) for d in psi.dims]
    if isinstance(bases, BasisParams):
        return bases.unitaries()
    out = []
    for d, b in zip(psi.dims, bases):
        out.append(np.eye(d) if (b is None or (isinstance(b, str) and b == "computational")) else np.asarray(b))
    return out


# --- basis search ------------------------------------------------------------

_GOLDEN = (np.sqrt(5) - 1) / 2


def _golden_section(f, lo, hi, iters):
    # maximize f on [lo, hi]
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def optimize_bases(
    psi: PureState,
    method: str = "ghz_rate_vc",
    restarts: int = 3,
    iterations: int = 3,
    seed: int = 0,
    party: int = 0,
    golden_steps: int = 12,
) -> tuple[BasisParams, float]:
    """Derivative-free local search over measurement bases.

    Each restart draws random angles (restart 0 starts from the computational
    basis) and sweeps the coordinates ``iterations`` times, refining each
    angle by golden-section search on a window around its current value.
    ``method`` is ``"ghz_rate_vc"`` (all parties' bases) or ``"svw_rate"``
    (basis of ``party`` only, objective chi). The result is never below the
    computational-basis value.
    """
    if restarts < 1 or iterations < 1:
        raise ValueError("restarts and iterations must be positive")
    dims = psi.dims
    if method == "ghz_rate_vc":
        active = list(range(psi.m))

        def objective(angles):
            ins = [LocalInstrument.in_basis(i, basis_unitary(angles[i], d)) for i, d in enumerate(dims)]
            return _vc_value_fast(psi, ins)

    elif method == "svw_rate":
        if psi.m != 3:
            raise ValueError("svw_rate optimization needs a tripartite state")
        active = [party]

        def objective(angles):
            return _svw_core(psi, party, basis_unitary(angles[party], dims[party]))[0]

    else:
        raise ValueError(f"unknown method {method!r}")

    base = [np.zeros(n_basis_params(d)) for d in dims]
    best_angles = [a.copy() for a in base]
    best_val = objective(base)
    rng = np.random.default_rng(seed)
    for r in range(restarts):
        angles = [a.copy() for a in base]
        if r > 0:
            for i in active:
                angles[i] = rng.uniform(0, 2 * np.pi, n_basis_params(dims[i]))
        val = objective(angles)
        width = np.pi / 2
        for _ in range(iterations):
            for i in active:
                for k in range(angles[i].size):
                    cur = angles[i][k]

                    def f(x, i=i, k=k):
                        angles[i][k] = x
                        return objective(angles)

                    x, fx = _golden_section(f, cur - width, cur + width, golden_steps)
                    if fx > val + 1e-12:
                        angles[i][k], val = x, fx
                    else:
                        angles[i][k] = cur
            width /= 2
        if val > best_val + 1e-12:
            best_val, best_angles = val, [a.copy() for a in angles]
    params = BasisParams(tuple(tuple(float(v) for v in a) for a in best_angles), tuple(dims))
    return params, float(best_val)
