"""Dense states, partial traces and entropies for small multipartite systems.

Conventions
-----------
Parties are indexed from 0. A joint basis index is mixed-radix with party 0
as the most significant digit, i.e. amplitudes are stored in C order of a
tensor whose axis ``i`` has length ``dims[i]``. File formats use the same
ordering. All entropies are in bits.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_ENTRIES = 2 ** 20
EIG_CLIP = 1e-12
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
NORM_TOL = 1e-9


class CapacityError(ValueError):
    """Raised when a layout would exceed the dense-storage cap."""


def _check_dims(dims: Sequence[int], min_parties: int = 1) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if len(dims) < min_parties:
        raise ValueError(f"need at least {min_parties} parties, got {len(dims)}")
    if any(d < 1 for d in dims):
        raise ValueError(f"local dimensions must be positive, got {dims}")
    total = int(np.prod(dims, dtype=np.int64)) if dims else 1
    if total > MAX_ENTRIES:
        raise CapacityError(f"total dimension {total} exceeds cap {MAX_ENTRIES}")
    return dims


def _subset(parties: Iterable[int], m: int) -> tuple[int, ...]:
    out = tuple(sorted(set(int(i) for i in parties)))
    for i in out:
        if not 0 <= i < m:
            raise IndexError(f"party index {i} out of range for {m} parties")
    return out


def nonempty_subsets(parties: Sequence[int]) -> list[tuple[int, ...]]:
    """All nonempty subsets of ``parties``, ordered by size then lexicographically."""
    parties = tuple(parties)
    return [c for r in range(1, len(parties) + 1) for c in itertools.combinations(parties, r)]


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector on ``dims`` (at least two parties)."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims, min_parties=2)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != int(np.prod(dims)):
            raise ValueError(f"expected {int(np.prod(dims))} amplitudes, got {amps.size}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized (norm {norm:.12g})")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, dims: Sequence[int], amplitudes) -> "PureState":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("zero vector cannot be normalized")
        return cls(tuple(dims), amps / norm)

    @property
    def m(self) -> int:
        return len(self.dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def density_matrix(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix._trusted(self.dims, np.outer(v, v.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator on ``dims``."""

    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        mat = np.asarray(self.matrix, dtype=complex)
        n = int(np.prod(dims))
        if mat.shape != (n, n):
            raise ValueError(f"matrix shape {mat.shape} does not match dims {dims}")
        dev = np.max(np.abs(mat - mat.conj().T)) if n else 0.0
        if dev > HERMITIAN_TOL:
            raise ValueError(f"matrix not Hermitian (max deviation {dev:.3g})")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr:.12g} differs from 1")
        low = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0]
        if low < -1e-9:
            raise ValueError(f"matrix has negative eigenvalue {low:.3g}")
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def _trusted(cls, dims, matrix) -> "DensityMatrix":
        # Internal constructor for matrices that are valid by construction.
        obj = object.__new__(cls)
        matrix = np.asarray(matrix, dtype=complex)
        matrix.flags.writeable = False
        object.__setattr__(obj, "dims", tuple(int(d) for d in dims))
        object.__setattr__(obj, "matrix", matrix)
        return obj

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityMatrix":
        dims = _check_dims(dims)
        n = int(np.prod(dims))
        return cls(dims, np.eye(n) / n)

    @property
    def m(self) -> int:
        return len(self.dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def tensor_product(a, b):
    """Kronecker product of two pure states or two density matrices."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        dims = _check_dims(a.dims + b.dims)
        return PureState(dims, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        dims = _check_dims(a.dims + b.dims)
        return DensityMatrix._trusted(dims, np.kron(a.matrix, b.matrix))
    raise TypeError("tensor_product needs two operands of the same kind")


def partial_trace(rho, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the parties in ``keep``.

    Accepts a DensityMatrix or a PureState; for pure input the reduced
    matrix is built from the amplitude tensor without forming the full
    projector.
    """
    keep = _subset(keep, len(rho.dims))
    if not keep:
        raise ValueError("keep set must be nonempty")
    dims = rho.dims
    m = len(dims)
    traced = [i for i in range(m) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    if isinstance(rho, PureState):
        return reduce_vector(dims, rho.amplitudes, keep)
    else:
        t = rho.matrix.reshape(dims + dims)
        perm = list(keep) + traced
        t = t.transpose(perm + [m + i for i in perm])
        ntr = int(np.prod([dims[i] for i in traced]))
        t = t.reshape(dk, ntr, dk, ntr)
        red = np.einsum("ajbj->ab", t)
    red = 0.5 * (red + red.conj().T)
    return DensityMatrix._trusted(tuple(dims[i] for i in keep), red)


def reduce_vector(dims: Sequence[int], vector: np.ndarray, keep: Sequence[int]) -> DensityMatrix:
    """Reduced density matrix of the (normalized) vector ``vector`` on ``keep``."""
    dims = tuple(dims)
    keep = list(keep)
    traced = [i for i in range(len(dims)) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    t = np.asarray(vector).reshape(dims).transpose(keep + traced).reshape(dk, -1)
    red = t @ t.conj().T
    return DensityMatrix._trusted(tuple(dims[i] for i in keep), 0.5 * (red + red.conj().T))


def spectrum(rho) -> np.ndarray:
    """Eigenvalues of a density matrix, nonincreasing, clipped at 1e-12.

    Raises ValueError if the input is non-Hermitian beyond tolerance.
    """
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    dev = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
    if dev > HERMITIAN_TOL:
        raise ValueError(f"matrix not Hermitian (max deviation {dev:.3g})")
    ev = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[::-1].copy()
    ev[ev < EIG_CLIP] = 0.0
    return ev


def entropy_of_probs(p) -> float:
    """Shannon entropy in bits of a vector of nonnegative weights, 0 log 0 = 0."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) if p.size else 0.0


def von_neumann_entropy(rho) -> float:
    ev = spectrum(rho)
    s = entropy_of_probs(ev)
    return float(min(max(s, 0.0), np.log2(len(ev)) if len(ev) else 0.0))


def marginal_entropy(psi, subset: Iterable[int]) -> float:
    """S(A_I) of a pure or mixed state; the empty subset has entropy 0."""
    subset = _subset(subset, len(psi.dims))
    if not subset:
        return 0.0
    if isinstance(psi, PureState) and len(subset) > len(psi.dims) / 2:
        # smaller reduced matrix on the complement, same spectrum
        comp = [i for i in range(psi.m) if i not in subset]
        if comp and np.prod([psi.dims[i] for i in comp]) < np.prod([psi.dims[i] for i in subset]):
            subset = tuple(comp)
    return von_neumann_entropy(partial_trace(psi, subset))


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint distribution of m discrete variables stored as a dense array.

    ``probs[x_0, ..., x_{m-1}]`` is the probability of the outcome tuple.
    Optional ``labels`` give, per party, the outcome label of each index.
    """

    probs: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim < 1:
            raise ValueError("pmf needs at least one axis")
        if np.any(p < -1e-12):
            raise ValueError("pmf has negative entries")
        total = p.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"pmf sums to {total:.12g}")
        p = np.clip(p, 0.0, None)
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)
        if self.labels is not None:
            labels = tuple(tuple(lab) for lab in self.labels)
            if [len(lab) for lab in labels] != list(p.shape):
                raise ValueError("labels do not match alphabet sizes")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_dict(cls, sizes: Sequence[int], entries: dict) -> "JointPmf":
        p = np.zeros(tuple(sizes))
        for idx, val in entries.items():
            p[tuple(idx)] += val
        return cls(p)

    @property
    def m(self) -> int:
        return self.probs.ndim

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.probs.shape

    def marginal(self, keep: Iterable[int]) -> np.ndarray:
        keep = _subset(keep, self.m)
        drop = tuple(i for i in range(self.m) if i not in keep)
        return self.probs.sum(axis=drop) if drop else self.probs

    def entropy(self, subset: Iterable[int] | None = None) -> float:
        subset = range(self.m) if subset is None else subset
        subset = _subset(subset, self.m)
        return entropy_of_probs(self.marginal(subset)) if subset else 0.0

    def support(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in idx) for idx in np.argwhere(self.probs > 0)]

    def permuted(self, order: Sequence[int]) -> "JointPmf":
        """Relabel parties: new party k is old party ``order[k]``."""
        return JointPmf(np.transpose(self.probs, tuple(order)))


def shannon_entropy(p: JointPmf, margin: Iterable[int], given: Iterable[int] = ()) -> float:
    """Conditional entropy H(X_margin | X_given) in bits."""
    margin = _subset(margin, p.m)
    given = _subset(given, p.m)
    if set(margin) & set(given):
        raise ValueError("margin and given subsets overlap")
    return p.entropy(margin + given) - p.entropy(given)
