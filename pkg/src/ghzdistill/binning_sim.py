"""Monte Carlo check of classical omniscience by random binning.

Each party hashes its length-n sequence into 2^ceil(n R_i) bins with a keyed
64-bit mixing function (fresh keys per trial) and broadcasts the bin index.
Decoder j searches the jointly typical set for tuples that agree with its
own sequence and with every received bin index; it succeeds iff exactly one
such tuple exists and it is the true one. The keyed hash is a pseudorandom
stand-in for a 2-universal family, avoiding |X|^n lookup tables.

After omniscience, the recovered joint sequence is compressed to
floor(n (H(X) - 2 delta)) bits with a random binary Toeplitz matrix (a
2-universal family) and the uniformity of a short output prefix is
estimated over trials.
"""

from __future__ import annotations

import csv
import functools
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .quantum_core import JointPmf, nonempty_subsets

MAX_SEQUENCES = 2 ** 24
DEFAULT_DELTA = 0.2
ERROR_KINDS = ("atypical", "nocand", "ambig")

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def keyed_hash(codes, key: int, bits: int) -> np.ndarray:
    """Bin index in [0, 2^bits) of each integer code under a 128-bit key."""
    codes = np.asarray(codes, dtype=np.uint64)
    if bits <= 0:
        return np.zeros(codes.shape, dtype=np.uint64)
    k1 = np.uint64(key & 0xFFFFFFFFFFFFFFFF)
    k2 = np.uint64((key >> 64) & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        z = _mix((codes * _GOLD) ^ k1)
        z = _mix(z + k2)
    return z >> np.uint64(64 - bits)


@dataclass(frozen=True)
class SimConfig:
    pmf: JointPmf
    rates: tuple
    n: int
    trials: int
    delta: float = DEFAULT_DELTA
    seed: int = 0
    pmf_id: str = "pmf"
    prefix_bits: int = 8

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if self.n < 1 or self.trials < 1:
            raise ValueError("n and trials must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if len(self.rates) != self.pmf.m:
            raise ValueError(f"{len(self.rates)} rates for {self.pmf.m} parties")
        if any(r < 0 or not math.isfinite(r) for r in self.rates):
            raise ValueError("rates must be finite and nonnegative")
        if not 1 <= self.prefix_bits <= 10:
            raise ValueError("prefix_bits must be between 1 and 10")

    def bin_bits(self) -> list[int]:
        # round first so that e.g. 0.5 * 6 does not become 4 bits
        return [int(math.ceil(round(self.n * r, 9))) for r in self.rates]


@dataclass
class SimResult:
    pmf_id: str
    rates: tuple
    n: int
    trials: int
    seed: int
    delta: float
    error: float
    decoder_errors: list
    err_atypical: int
    err_nocand: int
    err_ambig: int
    typical_size: int
    extract_bits: int
    extract_samples: int
    tv_distance: float | None
    tv_raw: float | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rates"] = list(self.rates)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def csv_row(self) -> list:
        return [
            self.pmf_id,
            ",".join(f"{r:g}" for r in self.rates),
            self.n,
            self.trials,
            self.seed,
            f"{self.error:.6f}",
            self.err_atypical,
            self.err_nocand,
            self.err_ambig,
            "" if self.tv_distance is None else f"{self.tv_distance:.6f}",
        ]


CSV_HEADER = ["pmf", "rates", "n", "trials", "seed", "error", "err_atypical", "err_nocand", "err_ambig", "tv_distance"]


def results_to_csv(results: Sequence[SimResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow(r.csv_row())
    return buf.getvalue()


# --- typical set ---------------------------------------------------------------

@dataclass
class TypicalSet:
    """Jointly typical sequences, stored as indices into the support list."""

    support: np.ndarray  # (k, m) outcome tuples with p > 0
    probs: np.ndarray  # (k,)
    n: int
    delta: float
    sequences: np.ndarray  # (N, n) support indices
    codes: np.ndarray  # (N, m) per-party sequence codes
    _subset_logs: list = field(repr=False, default_factory=list)

    def __len__(self) -> int:
        return len(self.sequences)

    def contains(self, seq: np.ndarray) -> bool:
        return bool(_typical_mask(seq[None, :], self._subset_logs, self.n, self.delta)[0])

    def as_tuples(self) -> set:
        """Set of typical sequences as tuples of joint outcome tuples."""
        return {tuple(tuple(int(v) for v in self.support[s]) for s in row) for row in self.sequences}


def _subset_tables(pmf: JointPmf, support: np.ndarray):
    # per nonempty subset I: (log2 p_I of each support symbol, H(X_I))
    tables = []
    for sub in nonempty_subsets(range(pmf.m)):
        marg = pmf.marginal(sub)
        logs = np.log2(marg[tuple(support[:, list(sub)].T)])
        tables.append((logs, pmf.entropy(sub)))
    return tables


def _typical_mask(seqs: np.ndarray, tables, n: int, delta: float) -> np.ndarray:
    mask = np.ones(len(seqs), dtype=bool)
    for logs, h in tables:
        emp = -logs[seqs].sum(axis=1) / n
        mask &= np.abs(emp - h) <= delta + 1e-12
    return mask


def _party_codes(seqs: np.ndarray, support: np.ndarray, sizes) -> np.ndarray:
    n = seqs.shape[1]
    codes = np.zeros((len(seqs), support.shape[1]), dtype=np.int64)
    for i, a in enumerate(sizes):
        sym = support[:, i][seqs]
        weights = a ** np.arange(n - 1, -1, -1, dtype=np.int64)
        codes[:, i] = sym @ weights
    return codes


def typical_set(pmf: JointPmf, n: int, delta: float) -> TypicalSet:
    """All length-n sequences of joint outcomes that are entropy-typical for every subset.

    Results are cached per (pmf, n, delta); treat the returned arrays as read-only.
    """
    probs = np.ascontiguousarray(pmf.probs, dtype=float)
    return _typical_set_cached(probs.tobytes(), probs.shape, int(n), float(delta))


@functools.lru_cache(maxsize=8)
def _typical_set_cached(raw: bytes, shape: tuple, n: int, delta: float) -> TypicalSet:
    pmf = JointPmf(np.frombuffer(raw, dtype=float).reshape(shape))
    support = np.argwhere(pmf.probs > 0)
    if not len(support):
        raise ValueError("pmf has empty support")
    k = len(support)
    if k ** n > MAX_SEQUENCES:
        raise ValueError(f"{k}^{n} joint sequences exceed the enumeration cap {MAX_SEQUENCES}")
    for a in pmf.sizes:
        if a ** n >= 2 ** 62:
            raise ValueError("per-party sequence codes do not fit in 64 bits")
    probs = pmf.probs[tuple(support.T)]
    tables = _subset_tables(pmf, support)
    chunks = []
    # enumerate in blocks over the leading positions to bound memory
    lead = max(0, n - 12)
    tail = n - lead
    tail_seqs = np.array(list(itertools.product(range(k), repeat=tail)), dtype=np.int64).reshape(-1, tail)
    for head in itertools.product(range(k), repeat=lead):
        block = np.hstack([np.tile(np.array(head, dtype=np.int64), (len(tail_seqs), 1)), tail_seqs])
        chunks.append(block[_typical_mask(block, tables, n, delta)])
    seqs = np.vstack(chunks) if chunks else np.zeros((0, n), dtype=np.int64)
    codes = _party_codes(seqs, support, pmf.sizes)
    for arr in (support, probs, seqs, codes):
        arr.setflags(write=False)
    return TypicalSet(support, probs, n, delta, seqs, codes, tables)


def atypical_probability(pmf: JointPmf, n: int, delta: float) -> float:
    """Exact probability that an i.i.d. sequence is not jointly typical, summed over type classes."""
    support = np.argwhere(pmf.probs > 0)
    probs = pmf.probs[tuple(support.T)]
    k = len(support)
    hs = []
    for sub in nonempty_subsets(range(pmf.m)):
        marg = pmf.marginal(sub)
        hs.append((np.log2(marg[tuple(support[:, list(sub)].T)]), pmf.entropy(sub)))
    typical = 0.0
    for counts in _compositions(n, k):
        c = np.array(counts)
        if all(abs(-(c @ logs) / n - h) <= delta + 1e-12 for logs, h in hs):
            log_mult = math.lgamma(n + 1) - sum(math.lgamma(v + 1) for v in counts)
            typical += math.exp(log_mult + float(c @ np.log(probs)))
    return max(0.0, 1.0 - typical)


def _compositions(n: int, k: int):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


# --- simulation --------------------------------------------------------------------

def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, trial])


def run_omniscience(cfg: SimConfig, return_transcripts: bool = False):
    """Simulate ``cfg.trials`` rounds of binning + joint-typicality decoding."""
    ts = typical_set(cfg.pmf, cfg.n, cfg.delta)
    m = cfg.pmf.m
    bits = cfg.bin_bits()
    k = len(ts.support)
    sizes = cfg.pmf.sizes
    # per decoder: typical rows sorted by the decoder's own code
    order = [np.argsort(ts.codes[:, j], kind="stable") for j in range(m)]
    sorted_codes = [ts.codes[order[j], j] for j in range(m)]

    failures = 0
    decoder_fail = np.zeros(m, dtype=np.int64)
    counts = dict.fromkeys(ERROR_KINDS, 0)
    transcripts = []
    for t in range(cfg.trials):
        rng = _trial_rng(cfg.seed, t)
        seq = rng.choice(k, size=cfg.n, p=ts.probs)
        keys = [int(v) for v in rng.integers(0, 2 ** 63, size=2 * m, dtype=np.int64)]
        keys = [(keys[2 * i] << 64) | keys[2 * i + 1] for i in range(m)]
        truth = _party_codes(seq[None, :], ts.support, sizes)[0]
        truth_bins = [keyed_hash(truth[i], keys[i], bits[i]) for i in range(m)]
        typical = ts.contains(seq)
        kinds = []
        for j in range(m):
            lo, hi = np.searchsorted(sorted_codes[j], [truth[j], truth[j] + 1])
            rows = order[j][lo:hi]
            for i in range(m):
                if i == j or not len(rows):
                    continue
                rows = rows[keyed_hash(ts.codes[rows, i], keys[i], bits[i]) == truth_bins[i]]
            ok = len(rows) == 1 and np.array_equal(ts.codes[rows[0]], truth)
            if not ok:
                decoder_fail[j] += 1
                kinds.append("nocand" if len(rows) == 0 else "ambig")
        # an atypical truth is never in the candidate list, so kinds is nonempty then
        if kinds:
            failures += 1
            if not typical:
                counts["atypical"] += 1
            elif "ambig" in kinds:
                counts["ambig"] += 1
            else:
                counts["nocand"] += 1
        else:
            transcripts.append(seq)
    ext = extract_uniform(cfg, transcripts)
    result = SimResult(
        pmf_id=cfg.pmf_id,
        rates=cfg.rates,
        n=cfg.n,
        trials=cfg.trials,
        seed=cfg.seed,
        delta=cfg.delta,
        error=failures / cfg.trials,
        decoder_errors=[float(v) / cfg.trials for v in decoder_fail],
        err_atypical=counts["atypical"],
        err_nocand=counts["nocand"],
        err_ambig=counts["ambig"],
        typical_size=len(ts),
        extract_bits=ext.length,
        extract_samples=ext.samples,
        tv_distance=ext.tv_distance,
        tv_raw=ext.tv_raw,
    )
    return (result, transcripts) if return_transcripts else result


# --- extraction ----------------------------------------------------------------

@dataclass
class UniformityReport:
    length: int
    samples: int
    prefix_bits: int
    tv_raw: float | None
    tv_distance: float | None


def extraction_length(pmf: JointPmf, n: int, delta: float) -> int:
    return max(0, int(math.floor(n * (pmf.entropy() - 2 * delta) + 1e-9)))


def null_tv_mean(samples: int, cells: int) -> float:
    """Expected plug-in TV distance of ``samples`` exactly uniform draws over ``cells`` cells."""
    c = np.arange(samples + 1)
    pmf = binom.pmf(c, samples, 1.0 / cells)
    return float(0.5 * cells * np.sum(pmf * np.abs(c / samples - 1.0 / cells)))


def _toeplitz_bits(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    diag = rng.integers(0, 2, size=rows + cols - 1, dtype=np.uint8)
    i = np.arange(rows)[:, None]
    j = np.arange(cols)[None, :]
    return diag[i - j + cols - 1]


def extract_uniform(cfg: SimConfig, transcripts) -> UniformityReport:
    """Hash recovered sequences to floor(n(H - 2 delta)) bits and measure prefix uniformity.

    ``tv_raw`` is the plug-in total-variation distance between the empirical
    prefix distribution and uniform. It is biased upward by sampling noise,
    so ``tv_distance`` subtracts the exact expectation of the plug-in value
    under a perfectly uniform source (clipped at 0).
    """
    length = extraction_length(cfg.pmf, cfg.n, cfg.delta)
    samples = len(transcripts)
    if length <= 0 or samples == 0:
        return UniformityReport(length, samples, 0, None, None)
    support = np.argwhere(cfg.pmf.probs > 0)
    sym_bits = max(1, int(math.ceil(math.log2(len(support))))) if len(support) > 1 else 1
    seqs = np.asarray(transcripts, dtype=np.int64)
    in_bits = ((seqs[:, :, None] >> np.arange(sym_bits - 1, -1, -1)) & 1).reshape(samples, -1)
    rng = np.random.default_rng([int(cfg.seed) & 0xFFFFFFFFFFFFFFFF, 0xE7])
    matrix = _toeplitz_bits(rng, length, in_bits.shape[1])
    out = (in_bits @ matrix.T.astype(np.int64)) % 2
    prefix = min(cfg.prefix_bits, length)
    values = out[:, :prefix] @ (1 << np.arange(prefix - 1, -1, -1))
    cells = 2 ** prefix
    hist = np.bincount(values, minlength=cells) / samples
    raw = float(0.5 * np.abs(hist - 1.0 / cells).sum())
    corrected = max(0.0, raw - null_tv_mean(samples, cells))
    return UniformityReport(length, samples, prefix, raw, corrected)
