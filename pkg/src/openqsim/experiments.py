"""End-to-end protocol runners producing plot-ready records.

Every runner can execute either the transcribed pulse sequences
(``path="sequence"``, ancilla + system register) or closed-form channels
acting on the system alone (``path="analytic"``). All results describe the
ideal, noise-free model.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import channels as ch
from .gates import CollectiveRot, apply_gate_array, expm_hermitian
from .qcore import (
    BELL_STATES,
    PAULI,
    DensityMatrix,
    InvariantViolation,
    PauliString,
    PureState,
    as_density,
    basis_state,
    expectation,
    fidelity,
    fully_mixed,
    partial_trace,
    superpose,
    tensor,
    trace_distance,
)
from .sequences import (
    Circuit,
    SequenceVariant,
    bell_cooling_circuit,
    effective_probability,
    four_body_evolution_circuit,
    ghz_pump_step,
    optimized_x_pump_circuit,
    qnd_mapping_circuit,
    run_circuit,
)

DEFAULT_SEED = 12345
PATHS = ("sequence", "analytic")

GHZ = superpose((1, "0000"), (1, "1111"))
EXCITED_GHZ = superpose((1, "0010"), (-1, "1101"))
GHZ_OBSERVABLES = ("Z1Z2", "Z2Z3", "Z3Z4", "Z1Z4", "X1X2X3X4")
BELL_OBSERVABLES = ("X1X2", "Y1Y2", "Z1Z2")
ANCILLA_ONE = DensityMatrix(np.diag([0, 1]))


@dataclass
class StepEntry:
    label: str
    expectations: dict[str, float] = field(default_factory=dict)
    populations: dict[str, float] = field(default_factory=dict)
    fidelity: float | None = None
    counts: dict[str, dict[str, int]] | None = None


@dataclass
class ExperimentRecord:
    protocol: str
    metadata: dict = field(default_factory=dict)
    steps: list[StepEntry] = field(default_factory=list)

    def validate(self, atol: float = 1e-9) -> None:
        for s in self.steps:
            for k, v in s.expectations.items():
                if not -1 - atol <= v <= 1 + atol:
                    raise InvariantViolation(f"{s.label}: expectation {k}={v} outside [-1, 1]")
            for k, v in s.populations.items():
                if not -atol <= v <= 1 + atol:
                    raise InvariantViolation(f"{s.label}: population {k}={v} outside [0, 1]")
            if s.fidelity is not None and not -atol <= s.fidelity <= 1 + atol:
                raise InvariantViolation(f"{s.label}: fidelity {s.fidelity} outside [0, 1]")

    def to_dict(self) -> dict:
        steps = []
        for s in self.steps:
            d = asdict(s)
            if d["counts"] is None:
                del d["counts"]
            steps.append(d)
        return {"protocol": self.protocol, "metadata": self.metadata, "steps": steps}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentRecord":
        steps = [
            StepEntry(
                label=s["label"],
                expectations=dict(s.get("expectations", {})),
                populations=dict(s.get("populations", {})),
                fidelity=s.get("fidelity"),
                counts=s.get("counts"),
            )
            for s in data.get("steps", [])
        ]
        return cls(data["protocol"], dict(data.get("metadata", {})), steps)

    def series(self, key: str) -> list[float]:
        """One expectation or population across all steps."""
        out = []
        for s in self.steps:
            out.append(s.expectations[key] if key in s.expectations else s.populations[key])
        return out


def _check_path(path: str) -> None:
    if path not in PATHS:
        raise ValueError(f"path must be one of {PATHS}, got {path!r}")


def _base_metadata(path: str, seed: int | None, shots: int, **extra) -> dict:
    meta = {"model": "ideal", "path": path, "shots": shots, "seed": seed}
    meta.update(extra)
    return meta


def run_system_step(circ: Circuit, rho: DensityMatrix) -> DensityMatrix:
    """Run an ancilla+system circuit with the ancilla starting in |1>."""
    joint = run_circuit(circ, tensor(ANCILLA_ONE, rho))
    return partial_trace(joint, range(1, circ.n_qubits))


def _expectations(rho: DensityMatrix, labels: Iterable[str]) -> dict[str, float]:
    return {lbl: expectation(rho, PauliString.parse(lbl, rho.n_qubits)) for lbl in labels}


# -- finite-shot sampling ---------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def measurement_probabilities(rho: DensityMatrix, basis: str) -> np.ndarray:
    """Outcome distribution for a product X/Z measurement (``"Z"``, ``"X"`` or e.g. ``"XZZX"``)."""
    n = rho.n_qubits
    if len(basis) == 1:
        basis = basis * n
    if len(basis) != n or set(basis) - {"X", "Z"}:
        raise ValueError(f"basis must be X/Z letters for {n} qubits, got {basis!r}")
    x = rho.data
    had = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    for q, b in enumerate(basis):
        if b == "X":
            left, right = 2**q, 2 ** (n - q - 1)
            u = np.kron(np.kron(np.eye(left), had), np.eye(right))
            x = u @ x @ u
    probs = np.clip(np.real(np.diag(x)), 0, None)
    return probs / probs.sum()


def sample_shots(rho: DensityMatrix, basis: str, shots: int, seed=DEFAULT_SEED) -> dict[str, int]:
    """Multinomial draw of ``shots`` outcomes; returns nonzero counts keyed by bit string."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = measurement_probabilities(rho, basis)
    counts = _rng(seed).multinomial(shots, probs)
    n = rho.n_qubits
    return {format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c}


def parity_from_counts(counts: dict[str, int], qubits: Sequence[int]) -> float:
    """Estimate of the product of +-1 outcomes on ``qubits`` (0-based positions)."""
    total = sum(counts.values())
    acc = sum(c * (-1) ** sum(int(bits[q]) for q in qubits) for bits, c in counts.items())
    return acc / total


def _shot_counts(rho: DensityMatrix, shots: int, rng) -> dict[str, dict[str, int]] | None:
    if not shots:
        return None
    return {b: sample_shots(rho, b, shots, rng) for b in ("Z", "X")}


# -- Bell-state cooling -----------------------------------------------------------


def run_bell_cooling(
    p: float,
    cycles: int,
    probe_half_cycles: bool = True,
    path: str = "sequence",
    refocused: bool = False,
    shots: int = 0,
    seed: int | None = DEFAULT_SEED,
) -> ExperimentRecord:
    """Two-qubit cooling toward |Psi->, starting fully mixed."""
    _check_path(path)
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if cycles < 1:
        raise ValueError("cycles must be at least 1")
    rng = _rng(seed)
    if path == "sequence":
        circuits = [bell_cooling_circuit(s, p, refocused) for s in ("XX", "YY")]
        maps = [lambda r, c=c: run_system_step(c, r) for c in circuits]
    else:
        maps = [lambda r, k=k: ch.apply_channel(k, r) for k in ch.bell_cooling_channels(p)]

    def entry(label, rho):
        pops = {name: fidelity(rho, s) for name, s in BELL_STATES.items()}
        return StepEntry(
            label,
            _expectations(rho, BELL_OBSERVABLES),
            pops,
            pops["Psi-"],
            _shot_counts(rho, shots, rng),
        )

    rho = fully_mixed(2)
    steps = [entry("mixed", rho)]
    for c in range(1, cycles + 1):
        rho = maps[0](rho)
        if probe_half_cycles:
            steps.append(entry(f"cycle {c - 0.5:g}", rho))
        rho = maps[1](rho)
        steps.append(entry(f"cycle {c}", rho))
    meta = _base_metadata(
        path, seed, shots, p=p, cycles=cycles, alpha=math.asin(math.sqrt(p)), target="Psi-"
    )
    return ExperimentRecord("bell-cooling", meta, steps)


def run_bell_master_equation(
    p: float = 0.01, cycles: int = 500, gamma: float = 1.0, dt: float | None = None, every: int = 50
) -> ExperimentRecord:
    """Repeated small-p cooling cycles next to the matched Lindblad evolution.

    Rate convention: one cycle at probability p equals evolution for
    ``p / gamma`` under unit-norm jump operators with rate ``gamma``.
    """
    dt = 1e-3 / gamma if dt is None else dt
    model = ch.bell_cooling_lindbladian(gamma)
    kx, ky = ch.bell_cooling_channels(p)
    cycle_time = p / gamma
    discrete = lindblad = fully_mixed(2)

    def entry(label, a, b):
        return StepEntry(
            label,
            {},
            {
                "Psi-": fidelity(a, BELL_STATES["Psi-"]),
                "Psi-_lindblad": fidelity(b, BELL_STATES["Psi-"]),
            },
            fidelity(a, BELL_STATES["Psi-"]),
        )

    steps = [entry("cycle 0", discrete, lindblad)]
    done = 0
    while done < cycles:
        chunk = min(every, cycles - done)
        for _ in range(chunk):
            discrete = ch.apply_channel(ky, ch.apply_channel(kx, discrete))
        lindblad = ch.integrate_master_equation(model, lindblad, chunk * cycle_time, dt)
        done += chunk
        steps.append(entry(f"cycle {done}", discrete, lindblad))
    meta = _base_metadata(
        "analytic",
        None,
        0,
        p=p,
        cycles=cycles,
        gamma=gamma,
        dt=dt,
        rate_convention="gamma * cycle_time = p, unit-norm jump operators",
        trace_distance=trace_distance(discrete.data, lindblad.data),
    )
    return ExperimentRecord("bell-master-equation", meta, steps)


# -- four-qubit stabilizer pumping ------------------------------------------------


def _ghz_entry(label, rho, target, shots, rng) -> StepEntry:
    return StepEntry(
        label,
        _expectations(rho, GHZ_OBSERVABLES),
        {},
        fidelity(rho, target),
        _shot_counts(rho, shots, rng),
    )


def _run_ghz_cycle(
    protocol: str,
    initial: DensityMatrix,
    signs: tuple[int, int, int, int],
    target: PureState,
    include_optional_blue: bool,
    path: str,
    shots: int,
    seed,
    initial_label: str,
) -> ExperimentRecord:
    _check_path(path)
    rng = _rng(seed)
    rho = initial
    steps = [_ghz_entry(initial_label, rho, target, shots, rng)]
    names = ("Z1Z2", "Z2Z3", "Z3Z4", "X1X2X3X4")
    for k, (name, s) in enumerate(zip(names, signs), start=1):
        if path == "sequence":
            variant = SequenceVariant(include_optional_blue, sign=s)
            rho = run_system_step(ghz_pump_step(k, variant), rho)
        else:
            rho = ch.apply_channel(ch.ghz_pump_channel(k, s), rho)
        steps.append(_ghz_entry(f"{name} -> {s:+d}", rho, target, shots, rng))
    meta = _base_metadata(
        path,
        seed,
        shots,
        signs=list(signs),
        include_optional_blue=include_optional_blue,
    )
    return ExperimentRecord(protocol, meta, steps)


def run_ghz_pumping(
    variant: SequenceVariant | None = None,
    path: str = "sequence",
    shots: int = 0,
    seed: int | None = DEFAULT_SEED,
) -> ExperimentRecord:
    """Pump Z1Z2, Z2Z3, Z3Z4, X1X2X3X4 in turn from the fully mixed state.

    ``variant.sign = -1`` flips steps 2-4 and targets (|0010> - |1101>)/sqrt2.
    Omitting the optional (blue) rotations only yields the target after the
    whole cycle; intermediate snapshots are then in rotated frames.
    """
    variant = variant or SequenceVariant()
    s = variant.sign
    target = GHZ if s == 1 else EXCITED_GHZ
    return _run_ghz_cycle(
        "ghz-pumping",
        fully_mixed(4),
        (1, s, s, s),
        target,
        variant.include_optional_blue,
        path,
        shots,
        seed,
        "mixed",
    )


def run_anyon_pushing(path: str = "sequence", shots: int = 0, seed: int | None = DEFAULT_SEED) -> ExperimentRecord:
    """The four GHZ pumping steps applied to |0111>."""
    return _run_ghz_cycle(
        "anyon-pushing",
        basis_state("0111").density(),
        (1, 1, 1, 1),
        GHZ,
        True,
        path,
        shots,
        seed,
        "initial |0111>",
    )


def run_excited_pumping(path: str = "sequence", shots: int = 0, seed: int | None = DEFAULT_SEED) -> ExperimentRecord:
    """Pump +1 of Z1Z2 then -1 of Z2Z3, Z3Z4 and X1X2X3X4."""
    return _run_ghz_cycle(
        "excited-pumping",
        fully_mixed(4),
        (1, -1, -1, -1),
        EXCITED_GHZ,
        True,
        path,
        shots,
        seed,
        "mixed",
    )


PUBLISHED_RED_SCHEDULE = (4, 3, 2, 1, 1)


def default_schedule(steps: int) -> tuple[int, ...]:
    """The published 4,3,2,1,1 rotation, continued cyclically as 4,3,2,1."""
    if steps <= len(PUBLISHED_RED_SCHEDULE):
        return PUBLISHED_RED_SCHEDULE[:steps]
    extra = [(4, 3, 2, 1)[i % 4] for i in range(steps - len(PUBLISHED_RED_SCHEDULE))]
    return PUBLISHED_RED_SCHEDULE + tuple(extra)


def run_repeated_x_pumping(
    p: float,
    steps: int,
    schedule: Sequence[int] | None = None,
    path: str = "sequence",
    shots: int = 0,
    seed: int | None = DEFAULT_SEED,
) -> ExperimentRecord:
    """Repeated pumping of |1111> into the -1 eigenspace of X1X2X3X4."""
    _check_path(path)
    if steps < 1:
        raise ValueError("steps must be at least 1")
    schedule = tuple(default_schedule(steps) if schedule is None else schedule)
    if len(schedule) != steps:
        raise ValueError(f"schedule has {len(schedule)} entries for {steps} steps")
    rng = _rng(seed)
    p_eff = effective_probability(p)
    # pumping toward -1 of X1X2X3X4 from |1111>; fidelity tracks (|0000> - |1111>)/sqrt2
    target = superpose((1, "0000"), (-1, "1111"))
    rho = basis_state("1111").density()
    entries = [_ghz_entry("initial |1111>", rho, target, shots, rng)]
    for k, red in enumerate(schedule, start=1):
        if path == "sequence":
            circ = optimized_x_pump_circuit(SequenceVariant(red_qubit=red, p=p))
            rho = run_system_step(circ, rho)
        else:
            flip = PauliString.on(4, {red - 1: "Z"})
            rho = ch.apply_channel(ch.stabilizer_pump(PauliString("XXXX"), -1, p_eff, flip), rho)
        entries.append(_ghz_entry(f"step {k} (red qubit {red})", rho, target, shots, rng))
    meta = _base_metadata(
        path, seed, shots, p=p, effective_probability=p_eff, steps=steps, schedule=list(schedule)
    )
    return ExperimentRecord("repeated-x-pumping", meta, entries)


# -- coherent four-body evolution -------------------------------------------------

XXXX = PauliString("XXXX").matrix()


def run_four_body(beta_grid: Sequence[float], path: str = "sequence") -> ExperimentRecord:
    """P(0000) and P(1111) after exp(-i beta/2 X1X2X3X4) on |1111>, plus the
    one-body comparison where each qubit is driven by exp(-i beta/2 X_i)."""
    _check_path(path)
    beta_grid = list(beta_grid)
    if not beta_grid:
        raise ValueError("beta grid must be nonempty")
    start = basis_state("1111")
    steps = []
    for beta in beta_grid:
        ideal = PureState(expm_hermitian(XXXX, beta / 2) @ start.amplitudes)
        if path == "sequence":
            joint = run_circuit(four_body_evolution_circuit(beta), tensor(ANCILLA_ONE, start.density()))
            rho = partial_trace(joint, range(1, 5))
            anc = partial_trace(joint, [0])
            ancilla_one = float(anc.data[1, 1].real)
        else:
            rho = ideal.density()
            ancilla_one = 1.0
        one_body = apply_gate_array(CollectiveRot("X", beta), start.density().data, 4)
        pops = {
            "0000": float(rho.data[0, 0].real),
            "1111": float(rho.data[15, 15].real),
            "0000_one_body": float(one_body[0, 0].real),
            "1111_one_body": float(one_body[15, 15].real),
            "ancilla_1": ancilla_one,
        }
        steps.append(StepEntry(f"beta={beta:.12g}", {}, pops, fidelity(rho, ideal)))
    meta = _base_metadata(path, None, 0, beta_grid=beta_grid, relation="beta = 2 g tau")
    return ExperimentRecord("four-body", meta, steps)


# -- QND measurement of X1X2X3X4 --------------------------------------------------


def qnd_mapping_unitary() -> np.ndarray:
    """Closed form -i/sqrt2 (X0+Y0) ⊗ P+ + 1/sqrt2 (1 - i Z0) ⊗ P-."""
    eye = np.eye(16)
    p_plus, p_minus = (eye + XXXX) / 2, (eye - XXXX) / 2
    x, y, z = PAULI["X"], PAULI["Y"], PAULI["Z"]
    return (-1j * np.kron(x + y, p_plus) + np.kron(np.eye(2) - 1j * z, p_minus)) / math.sqrt(2)


@dataclass
class QndReport:
    p_m: dict[int, float]
    p_in: dict[str, float]
    p_out: dict[str, float]
    p_out_conditional: dict[str, float]
    normalizations: dict[str, float]
    post_states: dict[int, DensityMatrix | None]
    F_M: float
    F_QND: float
    F_QSP: float
    path: str = "sequence"

    def to_record(self) -> ExperimentRecord:
        pops = {
            "p_m_0": self.p_m[0],
            "p_m_1": self.p_m[1],
            "p_in_+": self.p_in["+"],
            "p_in_-": self.p_in["-"],
            "p_out_+": self.p_out["+"],
            "p_out_-": self.p_out["-"],
            "p_out_0+": self.p_out_conditional["0+"],
            "p_out_1-": self.p_out_conditional["1-"],
        }
        exps = {
            "X1X2X3X4_in": self.p_in["+"] - self.p_in["-"],
            "X1X2X3X4_out": self.p_out["+"] - self.p_out["-"],
        }
        meta = _base_metadata(self.path, None, 0, F_M=self.F_M, F_QND=self.F_QND, F_QSP=self.F_QSP)
        return ExperimentRecord("qnd", meta, [StepEntry("measurement", exps, pops, self.F_QSP)])


def _bhattacharyya_sq(a: dict, b: dict, ka, kb) -> float:
    return (math.sqrt(a[ka[0]] * b[kb[0]]) + math.sqrt(a[ka[1]] * b[kb[1]])) ** 2


def run_qnd(state, path: str = "sequence") -> QndReport:
    """QND measurement of X1X2X3X4 through the ancilla (prepared in |1>)."""
    _check_path(path)
    rho = as_density(state)
    if rho.n_qubits != 4:
        raise ValueError("QND input must be a 4-qubit system state")
    joint = tensor(ANCILLA_ONE, rho)
    if path == "sequence":
        out = run_circuit(qnd_mapping_circuit(), joint).data
    else:
        u = qnd_mapping_unitary()
        out = u @ joint.data @ u.conj().T
    blocks = out.reshape(2, 16, 2, 16)
    eye = np.eye(16)
    proj = {"+": (eye + XXXX) / 2, "-": (eye - XXXX) / 2}

    def prob(m, r):
        return float(np.clip(np.real(np.trace(proj[m] @ r)), 0, 1))

    p_m, post = {}, {}
    for m in (0, 1):
        branch = blocks[m, :, m, :]
        p_m[m] = float(np.clip(np.real(np.trace(branch)), 0, 1))
        post[m] = DensityMatrix(branch / p_m[m]) if p_m[m] > 1e-12 else None
    out_sys = blocks[0, :, 0, :] + blocks[1, :, 1, :]
    p_in = {s: prob(s, rho.data) for s in "+-"}
    p_out = {s: prob(s, out_sys) for s in "+-"}
    cond = {
        "0+": prob("+", post[0].data) if post[0] is not None else 0.0,
        "1-": prob("-", post[1].data) if post[1] is not None else 0.0,
    }
    norms = {s: float(np.real(np.trace(proj[s] @ rho.data @ proj[s]))) for s in "+-"}
    f_m = _bhattacharyya_sq(p_in, p_m, "+-", (0, 1))
    f_qnd = _bhattacharyya_sq(p_in, p_out, "+-", "+-")
    f_qsp = p_m[0] * cond["0+"] + p_m[1] * cond["1-"]
    return QndReport(
        p_m=p_m,
        p_in=p_in,
        p_out=p_out,
        p_out_conditional=cond,
        normalizations=norms,
        post_states=post,
        F_M=min(f_m, 1.0),
        F_QND=min(f_qnd, 1.0),
        F_QSP=min(f_qsp, 1.0),
        path=path,
    )


# -- arbitrary sequences ----------------------------------------------------------


def run_custom(
    circ: Circuit,
    initial: DensityMatrix | None = None,
    observables: Sequence[str] = GHZ_OBSERVABLES,
    shots: int = 0,
    seed: int | None = DEFAULT_SEED,
    source: str | None = None,
) -> ExperimentRecord:
    """Run a user circuit (qubit 0 = ancilla in |1>) on a system state, default fully mixed."""
    n_sys = circ.n_qubits - 1
    rho0 = fully_mixed(n_sys) if initial is None else initial
    obs = [o for o in observables if PauliString.parse(o, 99).letters.rstrip("I").__len__() <= n_sys]
    rng = _rng(seed)
    rho = run_system_step(circ, rho0)
    steps = [
        StepEntry("initial", _expectations(rho0, obs), {}, None, _shot_counts(rho0, shots, rng)),
        StepEntry("final", _expectations(rho, obs), {}, None, _shot_counts(rho, shots, rng)),
    ]
    meta = _base_metadata("sequence", seed, shots, source=source, n_qubits=circ.n_qubits)
    return ExperimentRecord("custom", meta, steps)
