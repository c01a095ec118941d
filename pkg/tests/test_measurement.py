import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instrument, random_pure
from ghzdistill.measurement import (
    InstrumentError,
    LocalInstrument,
    apply_instruments,
    cq_conditional_entropy,
    measure_joint,
)
from ghzdistill.quantum_core import DensityMatrix, nonempty_subsets, partial_trace, shannon_entropy
from ghzdistill.states_io import antisym3, flower, flower_instruments, fourier, ghz, w3


def test_w3_computational_pmf():
    p = measure_joint(w3())
    assert sorted(p.support()) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    assert np.allclose(p.probs[p.probs > 0], 1 / 3)


def test_antisym3_computational_pmf():
    p = measure_joint(antisym3())
    supp = p.support()
    assert len(supp) == 6 and all(sorted(x) == [0, 1, 2] for x in supp)
    assert np.allclose(p.probs[p.probs > 0], 1 / 6)


def test_trivial_povms_give_point_mass():
    p = measure_joint(w3(), ["trivial"] * 3)
    assert p.probs.shape == (1, 1, 1)
    assert p.probs[0, 0, 0] == pytest.approx(1.0)


def test_density_input_matches_pure():
    rng = np.random.default_rng(0)
    psi = random_pure((2, 3, 2), rng)
    ins = [random_instrument(i, d, rng, "full") for i, d in enumerate(psi.dims)]
    a = measure_joint(psi, ins).probs
    b = measure_joint(psi.density_matrix(), ins).probs
    assert np.allclose(a, b, atol=1e-12)


def test_povm_list_input():
    m0 = np.diag([1.0, 0.0])
    povm = [0.5 * m0, 0.5 * m0 + np.diag([0.0, 1.0])]
    p = measure_joint(ghz(2), [povm, "computational"])
    assert p.probs.shape == (2, 2)
    assert p.probs[0, 0] == pytest.approx(0.25)
    assert p.probs[1, 0] == pytest.approx(0.25)
    assert p.probs[1, 1] == pytest.approx(0.5)


def test_completeness_violation():
    with pytest.raises(InstrumentError) as info:
        LocalInstrument(2, (("a", np.sqrt(0.9) * np.eye(3)),))
    assert info.value.party == 2
    assert info.value.deviation == pytest.approx(0.1, abs=1e-12)


def test_dimension_mismatch():
    with pytest.raises(InstrumentError):
        measure_joint(w3(), [LocalInstrument.computational(0, 3), "computational", "computational"])


def test_full_measurement_cq_state():
    omega = apply_instruments(w3(), "computational")
    assert omega.retained_dims == (1, 1, 1)
    assert np.allclose(omega.pmf.probs, measure_joint(w3()).probs)


def test_w3_measure_a_conditionals():
    ins = [LocalInstrument.computational(0, 2), LocalInstrument.trivial(1, 2), LocalInstrument.trivial(2, 2)]
    omega = apply_instruments(w3(), ins)
    assert omega.pmf.probs[1, 0, 0] == pytest.approx(1 / 3)
    assert omega.pmf.probs[0, 0, 0] == pytest.approx(2 / 3)
    assert omega.retained_dims == (1, 2, 2)
    v1 = omega.vectors[(1, 0, 0)].reshape(2, 2)
    v0 = omega.vectors[(0, 0, 0)].reshape(2, 2)
    assert abs(abs(v1[0, 0]) - 1) < 1e-12
    assert np.allclose(np.abs(v0), [[0, 1 / math.sqrt(2)], [1 / math.sqrt(2), 0]])


def test_flower_measure_j():
    d = 4
    omega = apply_instruments(flower(d), flower_instruments(d))
    assert np.allclose(omega.pmf.probs.ravel(), [0.5, 0.5])
    f = fourier(d)
    for j in range(2):
        v = omega.vectors[(0, j, 0)].reshape(2 * d, 2 * d, d)
        expect = np.zeros_like(v)
        for i in range(d):
            expect[2 * i + j, 2 * i + j] = (np.eye(d)[:, i] if j == 0 else f[:, i]) / math.sqrt(d)
        overlap = abs(np.vdot(expect.ravel(), v.ravel()))
        assert overlap == pytest.approx(1.0, abs=1e-12)
    assert cq_conditional_entropy(omega, [1], 0) == pytest.approx(0.0, abs=1e-10)
    assert cq_conditional_entropy(omega, [1], 2) == pytest.approx(1.0, abs=1e-10)


def test_cq_entropy_classical_reduction():
    rng = np.random.default_rng(5)
    psi = random_pure((2, 3, 2), rng)
    omega = apply_instruments(psi, "computational")
    p = omega.pmf
    for j in range(3):
        for L in nonempty_subsets([i for i in range(3) if i != j]):
            rest = [i for i in range(3) if i not in L]
            assert cq_conditional_entropy(omega, L, j) == pytest.approx(shannon_entropy(p, L, rest), abs=1e-10)


def test_cq_entropy_rejects_decoder_in_subset():
    omega = apply_instruments(w3(), "computational")
    with pytest.raises(ValueError):
        cq_conditional_entropy(omega, [0, 1], 1)
    with pytest.raises(IndexError):
        cq_conditional_entropy(omega, [0], 5)


def test_mixed_state_input():
    rho = DensityMatrix.maximally_mixed((2, 2))
    omega = apply_instruments(rho, [LocalInstrument.computational(0, 2), LocalInstrument.trivial(1, 2)])
    assert omega.vectors is None
    assert np.allclose(omega.pmf.probs.ravel(), [0.5, 0.5])


def _random_setup(seed):
    rng = np.random.default_rng(seed)
    dims = tuple(int(v) for v in rng.integers(2, 4, size=3))
    psi = random_pure(dims, rng)
    ins = [random_instrument(i, d, rng) for i, d in enumerate(dims)]
    return psi, ins


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_channel_output_matches_unconditional(seed):
    psi, ins = _random_setup(seed)
    omega = apply_instruments(psi, ins)
    direct = np.zeros_like(omega.channel_output().matrix)
    for k_idx in np.ndindex(*(len(i.kraus) for i in ins)):
        op = np.ones((1, 1))
        for i, k in zip(ins, k_idx):
            op = np.kron(op, i.kraus[k][1])
        v = op @ psi.amplitudes
        direct += np.outer(v, v.conj())
    assert np.max(np.abs(direct - omega.channel_output().matrix)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_cq_entropy_bounds_and_data_processing(seed):
    psi, ins = _random_setup(seed)
    omega = apply_instruments(psi, ins)
    p = omega.pmf
    for j in range(3):
        for L in nonempty_subsets([i for i in range(3) if i != j]):
            rest = [i for i in range(3) if i not in L]
            s = cq_conditional_entropy(omega, L, j)
            assert s >= 0.0
            assert s <= p.entropy(L) + 1e-9
            assert s <= shannon_entropy(p, L, rest) + 1e-8


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_measure_joint_single_party_marginals(seed):
    rng = np.random.default_rng(seed)
    psi = random_pure((2, 3, 2), rng)
    ins = [random_instrument(i, d, rng, "full") for i, d in enumerate(psi.dims)]
    p = measure_joint(psi, ins)
    for i in range(3):
        red = partial_trace(psi, [i]).matrix
        local = [np.real(np.trace(e @ red)) for e in ins[i].povm()]
        assert np.allclose(p.marginal([i]), local, atol=1e-9)
