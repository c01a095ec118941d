"""Named example states and the JSON formats for states, pmfs and instruments.

File formats (UTF-8 JSON):

``*.state.json``::

    {"dims": [2, 2], "normalize": false,
     "amplitudes": [{"index": [0, 0], "re": 0.7071, "im": 0.0}, ...]}

``*.pmf.json``::

    {"dims": [2, 2], "entries": [{"index": [0, 1], "probability": 0.5}, ...]}

``*.instr.json``::

    {"dims": [2, 2, 2],
     "parties": [
        {"type": "measure-computational"},
        {"type": "trivial"},
        {"type": "kraus", "operators": [
            {"outcome": "0", "re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]},
            ...]}]}

Kraus matrices have ``rows = out-dim`` and ``cols = in-dim``; ``im`` may be
omitted for real operators. ``dims`` is only needed when a party uses one of
the shorthand types and no dims are passed to :func:`load_instruments`.
"""

from __future__ import annotations

import itertools
import json
import re
from pathlib import Path

import numpy as np

from .quantum_core import JointPmf, PureState
from .measurement import InstrumentError, LocalInstrument


class SchemaError(ValueError):
    """Malformed state, pmf or instrument file."""


# --- named states -----------------------------------------------------------

def epr() -> PureState:
    return ghz(2)


def ghz(m: int = 3) -> PureState:
    if m < 2:
        raise ValueError("ghz needs m >= 2")
    amps = np.zeros(2 ** m, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return PureState((2,) * m, amps)


def w3() -> PureState:
    amps = np.zeros(8, dtype=complex)
    amps[[0b001, 0b010, 0b100]] = 1 / np.sqrt(3)
    return PureState((2, 2, 2), amps)


def antisym3() -> PureState:
    """Determinant state on three qutrits; labels 1,2,3 map to indices 0,1,2."""
    t = np.zeros((3, 3, 3), dtype=complex)
    for perm, sign in _permutations_with_sign(3):
        t[perm] = sign / np.sqrt(6)
    return PureState((3, 3, 3), t.ravel())


def _permutations_with_sign(k):
    for perm in itertools.permutations(range(k)):
        inversions = sum(perm[a] > perm[b] for a in range(k) for b in range(a + 1, k))
        yield perm, (-1) ** inversions


def fourier(d: int) -> np.ndarray:
    k = np.arange(d)
    return np.exp(2j * np.pi * np.outer(k, k) / d) / np.sqrt(d)


def flower(d: int = 4) -> PureState:
    """Flower state on layout [2d, 2d, d].

    A and B each hold the pair (i, j) as one register with index ``2*i + j``;
    C holds ``H^j |i>`` with H the d-dimensional Fourier matrix.
    """
    if d < 2:
        raise ValueError("flower needs d >= 2")
    f = fourier(d)
    t = np.zeros((2 * d, 2 * d, d), dtype=complex)
    for i in range(d):
        for j in range(2):
            c = np.eye(d)[:, i] if j == 0 else f[:, i]
            t[2 * i + j, 2 * i + j, :] = c / np.sqrt(2 * d)
    return PureState((2 * d, 2 * d, d), t.ravel())


def flower_instruments(d: int = 4) -> list[LocalInstrument]:
    """B measures the bit j of its (i, j) register and keeps i; A and C do nothing."""
    proj = [np.diag([1.0 if k % 2 == j else 0.0 for k in range(2 * d)]) for j in range(2)]
    return [
        LocalInstrument.trivial(0, 2 * d),
        LocalInstrument(1, tuple((str(j), proj[j]) for j in range(2))),
        LocalInstrument.trivial(2, d),
    ]


def flower_residual_bases(d: int, j: int) -> list[np.ndarray]:
    """Local bases in which the flower residual for outcome j has aligned supports."""
    c = np.eye(d) if j == 0 else fourier(d)
    return [np.eye(2 * d), np.eye(2 * d), c]


_NAME_RE = re.compile(r"^(w3|antisym3|epr|ghz|flower)(?:\(?(\d+)\)?)?$")


def build_named_state(name: str, param: int | None = None) -> PureState:
    """Build a state by name.

    Accepted names: ``w3``, ``antisym3``, ``epr``, ``ghz``/``ghz<m>``/``ghz(m)``
    (default m=3) and ``flower``/``flower<d>``/``flower(d)`` (default d=4).
    """
    match = _NAME_RE.match(name.strip().lower())
    if match is None:
        raise ValueError(f"unknown state name {name!r}")
    base, digits = match.groups()
    if digits:
        if base in ("w3", "antisym3", "epr"):
            raise ValueError(f"state {base!r} takes no parameter")
        param = int(digits)
    if base == "w3":
        return w3()
    if base == "antisym3":
        return antisym3()
    if base == "epr":
        return epr()
    if base == "ghz":
        return ghz(3 if param is None else param)
    return flower(4 if param is None else param)


# --- state files -------------------------------------------------------------

def _read_json(file) -> dict:
    if isinstance(file, dict):
        return file
    try:
        return json.loads(Path(file).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{file}: invalid JSON ({exc})") from exc


def _dims_field(doc: dict) -> tuple[int, ...]:
    dims = doc.get("dims")
    if not isinstance(dims, list) or not dims or not all(isinstance(d, int) and d >= 1 for d in dims):
        raise SchemaError("'dims' must be a nonempty list of positive integers")
    return tuple(dims)


def _index_field(rec: dict, dims) -> tuple[int, ...]:
    idx = rec.get("index")
    if not isinstance(idx, list) or len(idx) != len(dims):
        raise SchemaError(f"index {idx!r} does not match dims {list(dims)}")
    if not all(isinstance(v, int) and 0 <= v < d for v, d in zip(idx, dims)):
        raise SchemaError(f"index {idx!r} out of range for dims {list(dims)}")
    return tuple(idx)


def load_state(file) -> PureState:
    doc = _read_json(file)
    dims = _dims_field(doc)
    recs = doc.get("amplitudes")
    if not isinstance(recs, list):
        raise SchemaError("'amplitudes' must be a list")
    t = np.zeros(dims, dtype=complex)
    seen = set()
    for rec in recs:
        idx = _index_field(rec, dims)
        if idx in seen:
            raise SchemaError(f"duplicate index {list(idx)}")
        seen.add(idx)
        try:
            t[idx] = complex(float(rec.get("re", 0.0)), float(rec.get("im", 0.0)))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad amplitude at {list(idx)}") from exc
    norm = np.linalg.norm(t)
    if doc.get("normalize", False):
        if norm == 0:
            raise SchemaError("all amplitudes are zero")
        t = t / norm
    elif abs(norm - 1.0) > 1e-6:
        raise SchemaError(f"state norm {norm:.9g} differs from 1 (set normalize=true)")
    else:
        t = t / norm
    return PureState(dims, t.ravel())


def state_to_dict(psi: PureState, tol: float = 0.0) -> dict:
    amps = []
    for idx in np.ndindex(*psi.dims):
        a = psi.tensor()[idx]
        if abs(a) > tol:
            amps.append({"index": [int(v) for v in idx], "re": float(a.real), "im": float(a.imag)})
    return {"dims": list(psi.dims), "amplitudes": amps, "normalize": False}


def save_state(psi: PureState, path) -> None:
    Path(path).write_text(json.dumps(state_to_dict(psi), indent=1) + "\n", encoding="utf-8")


# --- pmf files ---------------------------------------------------------------

def load_pmf(file) -> JointPmf:
    doc = _read_json(file)
    dims = _dims_field(doc)
    recs = doc.get("entries")
    if not isinstance(recs, list):
        raise SchemaError("'entries' must be a list")
    p = np.zeros(dims)
    seen = set()
    for rec in recs:
        idx = _index_field(rec, dims)
        if idx in seen:
            raise SchemaError(f"duplicate index {list(idx)}")
        seen.add(idx)
        val = rec.get("probability")
        if not isinstance(val, (int, float)) or val < 0:
            raise SchemaError(f"bad probability at {list(idx)}")
        p[idx] = val
    try:
        return JointPmf(p)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def pmf_to_dict(p: JointPmf) -> dict:
    entries = [
        {"index": [int(v) for v in idx], "probability": float(p.probs[idx])}
        for idx in np.ndindex(*p.sizes)
        if p.probs[idx] > 0
    ]
    return {"dims": list(p.sizes), "entries": entries}


def save_pmf(p: JointPmf, path) -> None:
    Path(path).write_text(json.dumps(pmf_to_dict(p), indent=1) + "\n", encoding="utf-8")


# --- instrument files --------------------------------------------------------

def _matrix(rec: dict, key: str):
    rows = rec.get(key)
    if rows is None:
        return None
    try:
        mat = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"'{key}' is not a numeric matrix") from exc
    if mat.ndim != 2:
        raise SchemaError(f"'{key}' must be a 2-d matrix")
    return mat


def load_instruments(file, dims=None) -> list[LocalInstrument]:
    """Read one instrument per party; completeness is checked per party."""
    doc = _read_json(file)
    parties = doc.get("parties")
    if not isinstance(parties, list) or not parties:
        raise SchemaError("'parties' must be a nonempty list")
    if dims is None and "dims" in doc:
        dims = _dims_field(doc)
    if dims is not None and len(dims) != len(parties):
        raise SchemaError(f"{len(parties)} party entries for {len(dims)} parties")
    out = []
    for party, rec in enumerate(parties):
        kind = rec.get("type", "kraus")
        if kind in ("trivial", "measure-computational"):
            if dims is None:
                raise SchemaError(f"party {party}: '{kind}' needs 'dims'")
            make = LocalInstrument.trivial if kind == "trivial" else LocalInstrument.computational
            out.append(make(party, dims[party]))
            continue
        if kind != "kraus":
            raise SchemaError(f"party {party}: unknown type {kind!r}")
        ops = []
        for op in rec.get("operators") or []:
            re_part = _matrix(op, "re")
            if re_part is None:
                raise SchemaError(f"party {party}: operator without 're'")
            im_part = _matrix(op, "im")
            if im_part is not None and im_part.shape != re_part.shape:
                raise SchemaError(f"party {party}: 're' and 'im' shapes differ")
            mat = re_part + 1j * (im_part if im_part is not None else 0.0)
            ops.append((str(op.get("outcome", len(ops))), mat))
        if not ops:
            raise SchemaError(f"party {party}: no operators")
        if dims is not None and ops[0][1].shape[1] != dims[party]:
            raise SchemaError(f"party {party}: input dimension {ops[0][1].shape[1]} != {dims[party]}")
        try:
            out.append(LocalInstrument(party, tuple(ops)))
        except InstrumentError:
            raise
        except ValueError as exc:
            raise SchemaError(f"party {party}: {exc}") from exc
    return out


def instruments_to_dict(instruments) -> dict:
    parties = []
    for ins in instruments:
        parties.append({
            "type": "kraus",
            "operators": [
                {"outcome": str(lab), "re": mat.real.tolist(), "im": mat.imag.tolist()}
                for lab, mat in ins.kraus
            ],
        })
    return {"parties": parties}
