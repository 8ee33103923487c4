import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from openqsim import experiments as ex
from openqsim.qcore import (
    BELL_STATES,
    DensityMatrix,
    InvariantViolation,
    PauliString,
    basis_state,
    expectation,
    fidelity,
    fully_mixed,
    superpose,
)
from openqsim.sequences import SequenceVariant

from conftest import random_density, random_pure, seeds

# p = 1/2, three cycles from the mixed state; exact rational from channel composition
BELL_HALF_THREE_CYCLES = 225 / 256

GHZ_LABELS = ("Z1Z2", "Z2Z3", "Z3Z4", "Z1Z4", "X1X2X3X4")
ANYON_TABLE = [
    (-1, 1, 1, -1, 0),
    (1, -1, 1, -1, 0),
    (1, 1, -1, -1, 0),
    (1, 1, 1, 1, 0),
    (1, 1, 1, 1, 1),
]


def table(rec, labels=GHZ_LABELS):
    return np.array([[s.expectations[k] for k in labels] for s in rec.steps])


def assert_paths_agree(a, b, atol=1e-9):
    assert [s.label for s in a.steps] == [s.label for s in b.steps]
    for x, y in zip(a.steps, b.steps):
        for k in x.expectations:
            assert x.expectations[k] == pytest.approx(y.expectations[k], abs=atol), (x.label, k)
        for k in x.populations:
            assert x.populations[k] == pytest.approx(y.populations[k], abs=atol), (x.label, k)


def brute_force_bell(p, cycles):
    """Independent oracle: explicit operation elements on 4x4 matrices."""
    i2 = np.eye(2)
    x, y = np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]])
    rho = np.eye(4) / 4
    for _ in range(cycles):
        for s, f in ((np.kron(x, x), np.kron(y, i2)), (np.kron(y, y), np.kron(x, i2))):
            up, down = (np.eye(4) + s) / 2, (np.eye(4) - s) / 2
            e1, e2 = math.sqrt(p) * f @ up, down + math.sqrt(1 - p) * up
            rho = e1 @ rho @ e1.conj().T + e2 @ rho @ e2.conj().T
    psi = BELL_STATES["Psi-"].amplitudes
    return float(np.vdot(psi, rho @ psi).real)


class TestBellCooling:
    def test_deterministic(self):
        rec = ex.run_bell_cooling(1.0, 3)
        for s in rec.steps[2:]:
            assert s.populations["Psi-"] == pytest.approx(1, abs=1e-9)

    def test_half_probability_three_cycles(self):
        value = ex.run_bell_cooling(0.5, 3).steps[-1].populations["Psi-"]
        assert round(value, 2) == 0.88
        assert value == pytest.approx(BELL_HALF_THREE_CYCLES, abs=1e-12)
        assert brute_force_bell(0.5, 3) == pytest.approx(BELL_HALF_THREE_CYCLES, abs=1e-12)

    def test_zero_probability(self):
        for s in ex.run_bell_cooling(0.0, 2).steps:
            assert list(s.populations.values()) == pytest.approx([0.25] * 4)

    def test_half_cycle_probes(self):
        with_half = ex.run_bell_cooling(0.5, 2)
        assert [s.label for s in with_half.steps] == ["mixed", "cycle 0.5", "cycle 1", "cycle 1.5", "cycle 2"]
        without = ex.run_bell_cooling(0.5, 2, probe_half_cycles=False)
        assert [s.label for s in without.steps] == ["mixed", "cycle 1", "cycle 2"]

    @pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
    def test_paths_agree(self, p):
        assert_paths_agree(ex.run_bell_cooling(p, 3), ex.run_bell_cooling(p, 3, path="analytic"))

    @given(st.floats(0, 1), st.integers(1, 4))
    @settings(max_examples=10)
    def test_matches_oracle(self, p, cycles):
        value = ex.run_bell_cooling(p, cycles, probe_half_cycles=False, path="analytic").steps[-1].fidelity
        assert value == pytest.approx(brute_force_bell(p, cycles), abs=1e-12)

    def test_metadata(self):
        meta = ex.run_bell_cooling(0.5, 1).metadata
        assert meta["model"] == "ideal" and meta["path"] == "sequence"
        assert meta["alpha"] == pytest.approx(math.pi / 4)

    @pytest.mark.parametrize("kwargs", [dict(p=1.2, cycles=1), dict(p=0.5, cycles=0), dict(p=0.5, cycles=1, path="x")])
    def test_errors(self, kwargs):
        with pytest.raises(ValueError):
            ex.run_bell_cooling(**kwargs)

    def test_master_equation_runner(self):
        rec = ex.run_bell_master_equation(0.01, 500)
        assert rec.metadata["trace_distance"] <= 1e-3
        assert rec.steps[-1].label == "cycle 500"


class TestGhzPumping:
    def test_initial_entry(self):
        first = ex.run_ghz_pumping().steps[0]
        assert all(v == pytest.approx(0, abs=1e-15) for v in first.expectations.values())
        assert first.fidelity == pytest.approx(1 / 16)

    def test_trajectory(self):
        rec = ex.run_ghz_pumping()
        t = table(rec)
        assert t[1, 0] == pytest.approx(1, abs=1e-9)
        assert t[3, 3] == pytest.approx(1, abs=1e-9)  # Z1Z4 follows from the three pumped pairs
        assert t[4] == pytest.approx(np.ones(5), abs=1e-9)
        assert rec.steps[-1].fidelity > 0.5
        assert rec.steps[-1].fidelity == pytest.approx(1, abs=1e-9)

    def test_without_optional_rotations(self):
        rec = ex.run_ghz_pumping(SequenceVariant(include_optional_blue=False))
        assert table(rec)[-1] == pytest.approx(np.ones(5), abs=1e-9)
        assert rec.metadata["include_optional_blue"] is False

    def test_paths_agree(self):
        assert_paths_agree(ex.run_ghz_pumping(), ex.run_ghz_pumping(path="analytic"))

    def test_anyon_pushing(self):
        rec = ex.run_anyon_pushing()
        assert table(rec) == pytest.approx(np.array(ANYON_TABLE, dtype=float), abs=1e-9)
        assert_paths_agree(rec, ex.run_anyon_pushing(path="analytic"))

    def test_excited_pumping(self):
        rec = ex.run_excited_pumping()
        assert table(rec)[0] == pytest.approx(np.zeros(5), abs=1e-12)
        assert table(rec)[-1] == pytest.approx([1, -1, -1, 1, -1], abs=1e-9)
        assert rec.steps[-1].fidelity == pytest.approx(1, abs=1e-9)
        assert_paths_agree(rec, ex.run_excited_pumping(path="analytic"))

    def test_sign_variant_equals_excited_protocol(self):
        a = ex.run_ghz_pumping(SequenceVariant(sign=-1))
        assert table(a) == pytest.approx(table(ex.run_excited_pumping()), abs=1e-12)


class TestRepeatedXPumping:
    def test_deterministic(self):
        t = table(ex.run_repeated_x_pumping(1.0, 5))
        assert t[1:, 4] == pytest.approx([-1] * 5, abs=1e-9)

    @pytest.mark.parametrize("path", ex.PATHS)
    def test_half_probability(self, path):
        rec = ex.run_repeated_x_pumping(0.5, 5, path=path)
        t = table(rec)
        assert t[1:, 4] == pytest.approx([-(1 - 0.5**k) for k in range(1, 6)], abs=1e-9)
        assert t[:, :4] == pytest.approx(np.ones((6, 4)), abs=1e-9)
        assert rec.metadata["schedule"] == [4, 3, 2, 1, 1]

    @pytest.mark.parametrize("p", [0.25, 0.7])
    def test_paths_agree_off_grid(self, p):
        a = ex.run_repeated_x_pumping(p, 3)
        assert_paths_agree(a, ex.run_repeated_x_pumping(p, 3, path="analytic"))
        assert a.metadata["effective_probability"] == pytest.approx(math.sin(p * math.pi / 2) ** 2)

    def test_schedule(self):
        assert ex.default_schedule(3) == (4, 3, 2)
        assert ex.default_schedule(7) == (4, 3, 2, 1, 1, 4, 3)
        with pytest.raises(ValueError):
            ex.run_repeated_x_pumping(0.5, 3, schedule=[4, 3])
        with pytest.raises(ValueError):
            ex.run_repeated_x_pumping(0.5, 0)


class TestFourBody:
    GRID = np.linspace(0, 2 * math.pi, 11)

    @pytest.mark.parametrize("path", ex.PATHS)
    def test_four_body_populations(self, path):
        rec = ex.run_four_body(self.GRID, path=path)
        for beta, s in zip(self.GRID, rec.steps):
            assert s.populations["0000"] == pytest.approx(math.sin(beta / 2) ** 2, abs=1e-9)
            assert s.populations["1111"] == pytest.approx(math.cos(beta / 2) ** 2, abs=1e-9)
            assert s.populations["1111_one_body"] == pytest.approx(math.cos(beta / 2) ** 8, abs=1e-9)
            assert s.populations["0000_one_body"] == pytest.approx(math.sin(beta / 2) ** 8, abs=1e-9)
            assert s.populations["ancilla_1"] == pytest.approx(1, abs=1e-9)

    def test_quarter_turn_comparison(self):
        s = ex.run_four_body([math.pi / 2]).steps[0]
        assert s.populations["1111_one_body"] == pytest.approx(1 / 16)

    def test_zero(self):
        s = ex.run_four_body([0.0]).steps[0]
        assert s.populations["1111"] == pytest.approx(1) and s.populations["1111_one_body"] == pytest.approx(1)

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            ex.run_four_body([])


GHZ_PLUS = superpose((1, "0000"), (1, "1111"))
GHZ_MINUS = superpose((1, "0000"), (-1, "1111"))


class TestQnd:
    @pytest.mark.parametrize("path", ex.PATHS)
    def test_product_input(self, path):
        r = ex.run_qnd(basis_state("1111"), path=path)
        assert (r.p_m[0], r.p_m[1]) == pytest.approx((0.5, 0.5), abs=1e-9)
        assert fidelity(r.post_states[0], GHZ_PLUS) == pytest.approx(1, abs=1e-9)
        assert fidelity(r.post_states[1], GHZ_MINUS) == pytest.approx(1, abs=1e-9)
        assert (r.F_M, r.F_QND, r.F_QSP) == pytest.approx((1, 1, 1), abs=1e-9)
        assert (r.normalizations["+"], r.normalizations["-"]) == pytest.approx((0.5, 0.5))

    def test_minus_eigenstate(self):
        r = ex.run_qnd(superpose((1, "0011"), (-1, "1100")))
        assert r.p_m[1] == pytest.approx(1, abs=1e-9)
        assert r.F_QND == pytest.approx(1, abs=1e-9)
        assert r.post_states[0] is None and r.p_out_conditional["0+"] == 0.0

    def test_plus_eigenstate_is_untouched(self):
        r = ex.run_qnd(GHZ_PLUS)
        assert r.p_m[0] == pytest.approx(1, abs=1e-9)
        assert r.post_states[0].allclose(GHZ_PLUS.density(), atol=1e-9)

    @given(seeds)
    @settings(max_examples=10)
    def test_ideal_fidelities_and_distributions(self, seed):
        rng = np.random.default_rng(seed)
        r = ex.run_qnd(random_density(4, rng))
        for dist in (r.p_m, r.p_in, r.p_out):
            assert sum(dist.values()) == pytest.approx(1, abs=1e-9)
        assert (r.F_M, r.F_QND, r.F_QSP) == pytest.approx((1, 1, 1), abs=1e-9)

    @given(seeds)
    @settings(max_examples=10)
    def test_repeatable(self, seed):
        psi = random_pure(4, np.random.default_rng(seed))
        first = ex.run_qnd(DensityMatrix(np.outer(psi, psi.conj())))
        for outcome, post in first.post_states.items():
            if post is None:
                continue
            again = ex.run_qnd(post)
            assert again.p_m[outcome] == pytest.approx(1, abs=1e-9)
            assert again.post_states[outcome].allclose(post, atol=1e-9)

    def test_record(self):
        rec = ex.run_qnd(basis_state("1111")).to_record()
        assert rec.protocol == "qnd"
        assert rec.metadata["F_QSP"] == pytest.approx(1)
        rec.validate()

    def test_rejects_wrong_size(self):
        with pytest.raises(ValueError):
            ex.run_qnd(fully_mixed(2))


class TestSampling:
    def test_singlet_outcomes(self):
        counts = ex.sample_shots(BELL_STATES["Psi-"].density(), "Z", 5250, seed=7)
        assert set(counts) <= {"01", "10"} and sum(counts.values()) == 5250

    @given(seeds)
    @settings(max_examples=15)
    def test_parity_estimate_within_five_sigma(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(2, rng)
        shots = 5250
        exact = expectation(rho, PauliString("ZZ"))
        est = ex.parity_from_counts(ex.sample_shots(rho, "Z", shots, seed), [0, 1])
        sigma = math.sqrt(max(1 - exact**2, 1e-12) / shots)
        assert abs(est - exact) <= 5 * sigma + 1e-12

    def test_x_basis(self):
        counts = ex.sample_shots(GHZ_PLUS.density(), "X", 1000, seed=1)
        assert ex.parity_from_counts(counts, [0, 1, 2, 3]) == 1

    def test_mixed_basis(self):
        plus_zero = DensityMatrix(np.kron(np.full((2, 2), 0.5), np.diag([1, 0])))
        assert ex.sample_shots(plus_zero, "XZ", 100, seed=0) == {"00": 100}

    def test_deterministic(self):
        rho = fully_mixed(3)
        assert ex.sample_shots(rho, "Z", 500, seed=3) == ex.sample_shots(rho, "Z", 500, seed=3)

    def test_errors(self):
        with pytest.raises(ValueError):
            ex.sample_shots(fully_mixed(2), "Z", 0)
        with pytest.raises(ValueError):
            ex.sample_shots(fully_mixed(2), "XYZ", 10)

    def test_runner_counts_are_seeded(self):
        a = ex.run_bell_cooling(0.5, 2, shots=200, seed=11)
        b = ex.run_bell_cooling(0.5, 2, shots=200, seed=11)
        assert [s.counts for s in a.steps] == [s.counts for s in b.steps]
        assert a.metadata["seed"] == 11
        assert sum(a.steps[0].counts["Z"].values()) == 200


class TestRecord:
    def test_round_trip(self):
        rec = ex.run_bell_cooling(0.5, 1, shots=10)
        assert ex.ExperimentRecord.from_dict(rec.to_dict()) == rec

    def test_series(self):
        rec = ex.run_repeated_x_pumping(1.0, 2)
        assert rec.series("X1X2X3X4") == pytest.approx([0, -1, -1])

    @pytest.mark.parametrize(
        "entry",
        [
            ex.StepEntry("x", {"Z1Z2": 1.5}),
            ex.StepEntry("x", {}, {"a": -0.2}),
            ex.StepEntry("x", {}, {}, 1.2),
        ],
    )
    def test_validate(self, entry):
        with pytest.raises(InvariantViolation):
            ex.ExperimentRecord("t", {}, [entry]).validate()
