import numpy as np
import pytest

from ghzdistill.measurement import LocalInstrument
from ghzdistill.quantum_core import JointPmf, PureState


def random_pure(dims, rng) -> PureState:
    n = int(np.prod(dims))
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return PureState.from_unnormalized(tuple(dims), v)


def random_pmf(sizes, rng, zero_frac=0.3) -> JointPmf:
    w = rng.exponential(size=sizes)
    w[rng.random(size=sizes) < zero_frac] = 0.0
    if w.sum() == 0:
        w.flat[0] = 1.0
    return JointPmf(w / w.sum())


def random_isometry(rows, cols, rng) -> np.ndarray:
    a = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    q, _ = np.linalg.qr(a)
    return q[:, :cols]


def random_instrument(party, d, rng, kind=None) -> LocalInstrument:
    """Random pure instrument: outcomes k, retained dimension dout, from a random isometry."""
    kind = kind or rng.choice(["trivial", "full", "partial"])
    if kind == "trivial":
        return LocalInstrument.trivial(party, d)
    k = int(rng.integers(2, d + 2))
    dout = 1 if kind == "full" else int(rng.integers(1, d + 1))
    if k * dout < d:
        k = -(-d // dout)
    v = random_isometry(k * dout, d, rng)
    return LocalInstrument(party, tuple((str(x), v[x * dout:(x + 1) * dout]) for x in range(k)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
