"""Local instruments, joint outcome distributions and cq-states.

An instrument of party ``i`` is a list of Kraus operators ``E`` with outcome
labels. Operators sharing a label form one CP map; the retained register
has dimension equal to the number of rows of the operators. A POVM element
``M`` is turned into the Kraus operator ``sqrt(M)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .quantum_core import (
    DensityMatrix,
    JointPmf,
    PureState,
    _subset,
    entropy_of_probs,
    partial_trace,
    reduce_vector,
    von_neumann_entropy,
)

COMPLETENESS_TOL = 1e-8
PURE_CONDITIONAL_TOL = 1e-8


class InstrumentError(ValueError):
    """Completeness or dimension violation in a local instrument."""

    def __init__(self, message: str, party: int | None = None, deviation: float | None = None):
        super().__init__(message)
        self.party = party
        self.deviation = deviation


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix."""
    m = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


@dataclass(frozen=True, eq=False)
class LocalInstrument:
    party: int
    kraus: tuple
    labels: tuple = field(init=False)

    def __post_init__(self):
        ops = []
        for label, mat in self.kraus:
            mat = np.atleast_2d(np.asarray(mat, dtype=complex))
            ops.append((label, mat))
        if not ops:
            raise InstrumentError(f"party {self.party}: instrument has no operators", self.party)
        din = ops[0][1].shape[1]
        dout = ops[0][1].shape[0]
        for _, mat in ops:
            if mat.shape != (dout, din):
                raise InstrumentError(
                    f"party {self.party}: Kraus shapes differ ({mat.shape} vs {(dout, din)})", self.party
                )
        total = sum(mat.conj().T @ mat for _, mat in ops)
        dev = float(np.linalg.norm(total - np.eye(din), 2))
        if dev > COMPLETENESS_TOL:
            raise InstrumentError(
                f"party {self.party}: completeness violated, |sum E^dag E - I| = {dev:.6g}",
                self.party,
                dev,
            )
        labels = []
        for label, _ in ops:
            if label not in labels:
                labels.append(label)
        object.__setattr__(self, "kraus", tuple(ops))
        object.__setattr__(self, "labels", tuple(labels))

    @classmethod
    def trivial(cls, party: int, d: int) -> "LocalInstrument":
        return cls(party, (("id", np.eye(d)),))

    @classmethod
    def computational(cls, party: int, d: int) -> "LocalInstrument":
        """Full measurement in the computational basis; nothing is retained."""
        return cls(party, tuple((x, np.eye(d)[x : x + 1]) for x in range(d)))

    @classmethod
    def in_basis(cls, party: int, unitary: np.ndarray) -> "LocalInstrument":
        """Full rank-1 measurement in the basis ``U|x>`` (columns of ``unitary``)."""
        u = np.asarray(unitary, dtype=complex)
        return cls(party, tuple((x, u[:, x].conj()[None, :]) for x in range(u.shape[1])))

    @classmethod
    def from_povm(cls, party: int, elements: Sequence[np.ndarray]) -> "LocalInstrument":
        return cls(party, tuple((x, psd_sqrt(np.asarray(m, dtype=complex))) for x, m in enumerate(elements)))

    @property
    def din(self) -> int:
        return self.kraus[0][1].shape[1]

    @property
    def dout(self) -> int:
        return self.kraus[0][1].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.labels)

    @property
    def kind(self) -> str:
        if self.n_outcomes == 1:
            return "trivial"
        if self.dout == 1:
            return "full-measurement"
        return "partial"

    @property
    def is_pure(self) -> bool:
        """One Kraus operator per outcome."""
        return len(self.kraus) == self.n_outcomes

    def povm(self) -> list[np.ndarray]:
        out = [np.zeros((self.din, self.din), dtype=complex) for _ in self.labels]
        for label, mat in self.kraus:
            out[self.labels.index(label)] += mat.conj().T @ mat
        return out


def _as_instruments(dims, povms) -> list[LocalInstrument]:
    if povms is None or (isinstance(povms, str) and povms == "computational"):
        return [LocalInstrument.computational(i, d) for i, d in enumerate(dims)]
    out = []
    for i, item in enumerate(povms):
        if isinstance(item, LocalInstrument):
            out.append(item)
        elif isinstance(item, str) and item == "computational":
            out.append(LocalInstrument.computational(i, dims[i]))
        elif isinstance(item, str) and item == "trivial":
            out.append(LocalInstrument.trivial(i, dims[i]))
        else:
            out.append(LocalInstrument.from_povm(i, item))
    if len(out) != len(dims):
        raise InstrumentError(f"{len(out)} instruments for {len(dims)} parties")
    for i, ins in enumerate(out):
        if ins.din != dims[i]:
            raise InstrumentError(
                f"party {i}: instrument input dimension {ins.din} != local dimension {dims[i]}", i
            )
    return out


def _kraus_stack(ins: LocalInstrument) -> tuple[np.ndarray, np.ndarray]:
    ops = np.stack([mat for _, mat in ins.kraus])
    outcome = np.array([ins.labels.index(lab) for lab, _ in ins.kraus])
    return ops, outcome


def _apply_pure(psi: PureState, instruments) -> np.ndarray:
    """Tensor T[k_0, o_0, ..., k_{m-1}, o_{m-1}] = (E_{k_0} x ... ) psi."""
    t = psi.tensor()
    for i, ins in enumerate(instruments):
        ops, _ = _kraus_stack(ins)
        # contract axis 2*i (input of party i) with the Kraus input index
        axis = 2 * i
        t = np.tensordot(ops, t, axes=([2], [axis]))  # (k, o, ...rest)
        t = np.moveaxis(t, [0, 1], [axis, axis + 1])
    return t


def measure_joint(rho, povms=None) -> JointPmf:
    """Joint outcome distribution p(x) = Tr rho (M_x0 x ... x M_x{m-1}).

    ``povms`` is a list with one entry per party: a LocalInstrument, a list
    of POVM elements, or the strings ``"computational"``/``"trivial"``.
    ``None`` means computational measurements for everyone.
    """
    instruments = _as_instruments(rho.dims, povms)
    sizes = tuple(ins.n_outcomes for ins in instruments)
    m = len(instruments)
    if isinstance(rho, PureState):
        t = _apply_pure(rho, instruments)
        w = (np.abs(t) ** 2).sum(axis=tuple(2 * i + 1 for i in range(m)))
        # group Kraus indices into outcomes, one axis at a time
        for i, ins in enumerate(instruments):
            onehot = np.zeros((ins.n_outcomes, len(ins.kraus)))
            onehot[_kraus_stack(ins)[1], np.arange(len(ins.kraus))] = 1.0
            w = np.moveaxis(np.tensordot(onehot, w, axes=([1], [i])), 0, i)
        probs = w
    else:
        povm_lists = [ins.povm() for ins in instruments]
        probs = np.zeros(sizes)
        for x in np.ndindex(*sizes):
            op = povm_lists[0][x[0]]
            for i in range(1, m):
                op = np.kron(op, povm_lists[i][x[i]])
            probs[x] = np.real(np.trace(rho.matrix @ op))
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    return JointPmf(probs, labels=tuple(ins.labels for ins in instruments))


@dataclass(frozen=True, eq=False)
class CqState:
    """Outcome pmf with a normalized conditional state per nonzero outcome.

    ``conditionals`` maps outcome tuples (indices into each party's label
    list) to DensityMatrix objects on ``retained_dims``. When every
    conditional is pure, ``vectors`` holds the state vectors as well.
    """

    pmf: JointPmf
    conditionals: dict
    retained_dims: tuple
    vectors: dict | None = None

    @property
    def m(self) -> int:
        return self.pmf.m

    def outcomes(self) -> list[tuple[int, ...]]:
        return sorted(self.conditionals)

    def conditional_marginal(self, x, keep: Iterable[int]) -> DensityMatrix:
        keep = tuple(keep)
        if self.vectors is not None:
            return reduce_vector(self.retained_dims, self.vectors[x], keep)
        return partial_trace(self.conditionals[x], keep)

    def channel_output(self) -> DensityMatrix:
        """Trace over the classical registers: sum_x p(x) rho_x."""
        n = int(np.prod(self.retained_dims))
        acc = np.zeros((n, n), dtype=complex)
        for x in self.outcomes():
            acc += self.pmf.probs[x] * self.conditionals[x].matrix
        return DensityMatrix._trusted(self.retained_dims, acc)


def apply_instruments(state, instruments) -> CqState:
    """cq-state obtained by applying one local instrument per party."""
    instruments = _as_instruments(state.dims, instruments)
    m = len(instruments)
    sizes = tuple(ins.n_outcomes for ins in instruments)
    retained = tuple(ins.dout for ins in instruments)
    nret = int(np.prod(retained))
    unnorm: dict = {}
    pure_vecs: dict = {}
    label_maps = [_kraus_stack(ins)[1] for ins in instruments]
    if isinstance(state, PureState):
        t = _apply_pure(state, instruments)
        kshape = tuple(len(ins.kraus) for ins in instruments)
        t = t.transpose([2 * i for i in range(m)] + [2 * i + 1 for i in range(m)])
        t = t.reshape(kshape + (nret,))
        for kidx in np.ndindex(*kshape):
            v = t[kidx]
            x = tuple(int(label_maps[i][k]) for i, k in enumerate(kidx))
            if x in unnorm:
                unnorm[x] = unnorm[x] + np.outer(v, v.conj())
                pure_vecs[x] = None
            else:
                unnorm[x] = np.outer(v, v.conj())
                pure_vecs[x] = v
    else:
        ops_per_party = [_kraus_stack(ins)[0] for ins in instruments]
        for kidx in np.ndindex(*(len(ins.kraus) for ins in instruments)):
            op = ops_per_party[0][kidx[0]]
            for i in range(1, m):
                op = np.kron(op, ops_per_party[i][kidx[i]])
            x = tuple(int(label_maps[i][k]) for i, k in enumerate(kidx))
            out = op @ state.matrix @ op.conj().T
            unnorm[x] = unnorm.get(x, 0) + out
            pure_vecs[x] = None
    probs = np.zeros(sizes)
    conditionals = {}
    vectors = {}
    all_pure = True
    for x in sorted(unnorm):
        p = float(np.real(np.trace(unnorm[x])))
        if p <= 1e-14:
            continue
        probs[x] = p
        mat = unnorm[x] / p
        conditionals[x] = DensityMatrix._trusted(retained, 0.5 * (mat + mat.conj().T))
        v = pure_vecs.get(x)
        if v is None:
            all_pure = False
        else:
            vectors[x] = v / np.sqrt(p)
    total = probs.sum()
    probs /= total
    pmf = JointPmf(probs, labels=tuple(ins.labels for ins in instruments))
    return CqState(pmf, conditionals, retained, vectors if all_pure else None)


def conditional_is_pure(rho: DensityMatrix, tol: float = PURE_CONDITIONAL_TOL) -> bool:
    ev = np.linalg.eigvalsh(rho.matrix)
    return 1.0 - ev[-1] <= tol


def _cq_joint_entropy(omega: CqState, given: tuple[int, ...], j: int, cache: dict) -> float:
    """S(X_given A'_j) via the cq decomposition."""
    groups: dict = {}
    for x in omega.outcomes():
        key = tuple(x[i] for i in given)
        p = omega.pmf.probs[x]
        if j not in cache:
            cache[j] = {}
        if x not in cache[j]:
            cache[j][x] = omega.conditional_marginal(x, (j,)).matrix
        acc = groups.get(key)
        groups[key] = (p * cache[j][x]) if acc is None else acc + p * cache[j][x]
    weights = []
    s = 0.0
    for key in sorted(groups):
        mat = groups[key]
        pg = float(np.real(np.trace(mat)))
        weights.append(pg)
        if pg > 0:
            s += pg * von_neumann_entropy(DensityMatrix._trusted((mat.shape[0],), mat / pg))
    return entropy_of_probs(weights) + s


def cq_conditional_entropy(omega: CqState, L: Iterable[int], j: int, _cache: dict | None = None) -> float:
    """S(X_L | X_{[m]\\L} A'_j) for a decoder ``j`` that is not in ``L``."""
    m = omega.m
    L = _subset(L, m)
    if not 0 <= j < m:
        raise IndexError(f"decoder {j} out of range")
    if j in L:
        raise ValueError(f"decoder {j} lies in the subset {L}")
    if not L:
        return 0.0
    cache = {} if _cache is None else _cache
    rest = tuple(i for i in range(m) if i not in L)
    value = _cq_joint_entropy(omega, tuple(range(m)), j, cache) - _cq_joint_entropy(omega, rest, j, cache)
    return max(value, 0.0)
