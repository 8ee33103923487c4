import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from openqsim.gates import (
    MS,
    AncillaReset,
    CollectiveRot,
    SingleZ,
    SymbolicAngle,
    SystemMix,
    apply_gate,
    equal_up_to_phase,
    inverse,
    partial_ms,
    unitary_of,
)
from openqsim.qcore import DensityMatrix, PAULI, basis_state, fully_mixed, partial_trace, superpose, tensor
from openqsim.sequences import Circuit, partial_ms_refocused

from conftest import random_density, seeds

ANGLES = [math.pi / 8, -math.pi / 8, math.pi / 4, -math.pi / 4, math.pi / 2, -math.pi / 2, math.pi]


def collective(p, n):
    return sum(reduce(np.kron, [PAULI[p] if q == k else PAULI["I"] for q in range(n)]) for k in range(n))


class TestUnitaries:
    def test_x_pi_flips(self):
        out = unitary_of(CollectiveRot("X", math.pi), 1) @ np.array([1, 0])
        assert np.allclose(out, [0, -1j])

    def test_ms_two_qubits(self):
        out = unitary_of(MS("X", math.pi / 2), 2) @ basis_state("00").amplitudes
        target = np.array([1, 0, 0, -1j]) / math.sqrt(2)
        assert equal_up_to_phase(out[:, None], target[:, None], atol=1e-12)

    def test_ms_five_qubits_ghz_class(self):
        # for an odd ion number the GHZ state appears after a collective pi/2 X turn
        ms = unitary_of(MS("X", math.pi / 2), 5) @ basis_state("11111").amplitudes
        out = unitary_of(CollectiveRot("X", math.pi / 2), 5) @ ms
        target = (basis_state("11111").amplitudes - 1j * basis_state("00000").amplitudes) / math.sqrt(2)
        assert abs(np.vdot(target, out)) ** 2 == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("theta", ANGLES)
    @pytest.mark.parametrize("axis", ["X", "Y"])
    def test_against_scipy_expm(self, axis, theta):
        n = 3
        s = collective(axis, n)
        assert np.allclose(unitary_of(CollectiveRot(axis, theta), n), expm(-0.5j * theta * s), atol=1e-12)
        assert np.allclose(unitary_of(MS(axis, theta), n), expm(-0.25j * theta * s @ s), atol=1e-12)
        z1 = np.kron(np.kron(PAULI["I"], PAULI["Z"]), PAULI["I"])
        assert np.allclose(unitary_of(SingleZ(1, theta), n), expm(-0.5j * theta * z1), atol=1e-12)

    @pytest.mark.parametrize("theta", ANGLES)
    @pytest.mark.parametrize(
        "make", [lambda t: CollectiveRot("Y", t), lambda t: MS("X", t), lambda t: SingleZ(2, t),
                 lambda t: MS("Y", t, participants=(0, 2))]
    )
    def test_unitarity(self, make, theta):
        u = unitary_of(make(theta), 4)
        assert np.abs(u.conj().T @ u - np.eye(16)).max() <= 1e-12

    def test_partial_participants_act_as_identity_elsewhere(self):
        u = unitary_of(CollectiveRot("X", 0.3, participants=(1,)), 2)
        assert np.allclose(u, np.kron(np.eye(2), expm(-0.15j * PAULI["X"])))

    @pytest.mark.parametrize("theta", ANGLES)
    def test_axis_rule(self, theta):
        # a pi/2 Z phase on every ion turns X rotations into Y rotations
        n = 3
        rz = reduce(np.kron, [expm(-0.25j * math.pi * PAULI["Z"])] * n)
        x = unitary_of(CollectiveRot("X", theta), n)
        y = unitary_of(CollectiveRot("Y", theta), n)
        assert equal_up_to_phase(y, rz @ x @ rz.conj().T, atol=1e-12)

    @given(st.floats(-4, 4), st.floats(-4, 4))
    def test_ms_additivity(self, a, b):
        lhs = unitary_of(MS("X", a), 3) @ unitary_of(MS("X", b), 3)
        assert np.allclose(lhs, unitary_of(MS("X", a + b), 3), atol=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            unitary_of(AncillaReset(), 2)
        with pytest.raises(ValueError):
            unitary_of(MS("X", 1.0, participants=(0, 5)), 3)
        with pytest.raises(ValueError):
            unitary_of(CollectiveRot("X", SymbolicAngle(1, times_p=True)), 2)
        with pytest.raises(ValueError):
            CollectiveRot("Z", 1.0)
        with pytest.raises(ValueError):
            SingleZ(0, float("nan"))


class TestPartialMS:
    def test_zero_angle_is_identity(self):
        assert np.allclose(partial_ms("X", 0.0, (0, 1), 3), np.eye(8))

    def test_pair_example(self):
        out = partial_ms("X", -math.pi / 2, (0, 1), 2) @ basis_state("00").amplitudes
        assert np.allclose(out, np.array([1, 0, 0, 1j]) / math.sqrt(2))

    def test_matches_quoted_exponential(self):
        alpha = 0.37
        x0x1 = np.kron(np.kron(PAULI["X"], PAULI["X"]), PAULI["I"])
        assert np.allclose(partial_ms("X", -alpha, (0, 1), 3), expm(0.5j * alpha * x0x1))

    def test_identical_indices(self):
        with pytest.raises(ValueError):
            partial_ms("X", 1.0, (1, 1), 3)

    @pytest.mark.parametrize("theta", [0.2, -0.9, math.pi / 2])
    def test_refocusing_identity(self, theta):
        refocused = Circuit(3, partial_ms_refocused(theta)).unitary()
        assert equal_up_to_phase(refocused, partial_ms("X", theta, (0, 1), 3), atol=1e-12)


class TestApplyGate:
    def test_reset_sends_ancilla_to_one(self):
        rho_s = random_density(2, np.random.default_rng(1))
        zero = DensityMatrix(np.diag([1, 0]))
        out = apply_gate(AncillaReset(), tensor(zero, rho_s))
        assert out.allclose(tensor(DensityMatrix(np.diag([0, 1])), rho_s), atol=1e-14)

    def test_reset_discards_correlations(self):
        out = apply_gate(AncillaReset(), superpose((1, "00"), (1, "11")).density())
        assert out.allclose(tensor(DensityMatrix(np.diag([0, 1])), fully_mixed(1)))

    def test_system_mix(self):
        rng = np.random.default_rng(2)
        anc = random_density(1, rng)
        out = apply_gate(SystemMix((1, 2)), tensor(anc, random_density(2, rng)))
        assert partial_trace(out, [1, 2]).allclose(fully_mixed(2))
        assert partial_trace(out, [0]).allclose(anc)

    @given(seeds, st.sampled_from(ANGLES))
    def test_inverse_undoes(self, seed, theta):
        rho = random_density(3, np.random.default_rng(seed))
        for g in (MS("Y", theta), CollectiveRot("X", theta), SingleZ(1, theta)):
            back = apply_gate(inverse(g), apply_gate(g, rho))
            assert np.abs(back.data - rho.data).max() <= 1e-12

    @given(seeds)
    def test_trace_and_hermiticity_preserved(self, seed):
        rho = random_density(3, np.random.default_rng(seed))
        for g in (MS("X", 0.7), AncillaReset(), SystemMix((2,)), SingleZ(0, 1.1)):
            out = apply_gate(g, rho).data
            assert np.trace(out) == pytest.approx(1, abs=1e-12)
            assert np.abs(out - out.conj().T).max() <= 1e-12

    def test_reset_is_not_invertible(self):
        with pytest.raises(ValueError):
            inverse(AncillaReset())
