"""Kraus channels, stabilizer pumping, process matrices and the Lindblad limit."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qcore import (
    BELL_STATES,
    PAULI,
    TOL,
    DensityMatrix,
    InvariantViolation,
    PauliString,
    PureState,
    check_density,
    partial_trace_array,
)
from .sequences.circuit import Circuit, run_circuit_array

CHOI_CUTOFF = 1e-12


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map given by operation elements ``E_k`` with sum E_k^† E_k = 1."""

    ops: tuple[np.ndarray, ...]
    n_qubits: int = field(init=False)

    def __init__(self, ops: Sequence[np.ndarray], check: bool = True, atol: float | None = None):
        ops = tuple(_readonly(k) for k in ops)
        if not ops:
            raise ValueError("a channel needs at least one operation element")
        d = ops[0].shape[0]
        if any(k.shape != (d, d) for k in ops):
            raise ValueError("operation elements must be square and of equal size")
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "n_qubits", int(round(math.log2(d))))
        if check:
            err = self.completeness_error()
            if err > (TOL.invariant if atol is None else atol):
                raise InvariantViolation(f"completeness violated by {err:.3e}")

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    def completeness_error(self) -> float:
        total = sum(k.conj().T @ k for k in self.ops)
        return float(np.abs(total - np.eye(self.dim)).max())

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        return apply_channel(self, rho)

    def __len__(self) -> int:
        return len(self.ops)

    def __repr__(self) -> str:
        return f"KrausChannel(n_qubits={self.n_qubits}, rank={len(self.ops)})"


def identity_channel(n: int) -> KrausChannel:
    return KrausChannel([np.eye(2**n)])


def unitary_channel(u: np.ndarray) -> KrausChannel:
    return KrausChannel([u])


def replacement_channel(target: PureState) -> KrausChannel:
    """rho -> Tr(rho) |psi><psi|."""
    psi = target.amplitudes
    d = psi.size
    return KrausChannel([np.outer(psi, np.eye(d)[i]) for i in range(d)])


def apply_channel_array(ch: KrausChannel, x: np.ndarray) -> np.ndarray:
    return sum(k @ x @ k.conj().T for k in ch.ops)


def apply_channel(ch: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    if rho.dim != ch.dim:
        raise ValueError(f"channel dimension {ch.dim} does not match state {rho.dim}")
    out = apply_channel_array(ch, rho.data)
    check_density(out)
    return DensityMatrix(out, check=False)


def adjoint_action(ch: KrausChannel, obs: np.ndarray) -> np.ndarray:
    """Heisenberg picture: sum E_k^† O E_k."""
    return sum(k.conj().T @ obs @ k for k in ch.ops)


def _pauli_matrix(s: PauliString | np.ndarray) -> np.ndarray:
    return s.matrix() if isinstance(s, PauliString) else np.asarray(s, dtype=complex)


def stabilizer_pump(S: PauliString, target_sign: int, p: float, flip: PauliString) -> KrausChannel:
    """Pump into the ``target_sign`` eigenspace of ``S`` with probability ``p``.

    E1 = sqrt(p) flip (1 - s S)/2,  E2 = (1 + s S)/2 + sqrt(1-p) (1 - s S)/2
    with ``s = target_sign``; ``flip`` must anticommute with ``S``.
    """
    if target_sign not in (1, -1):
        raise ValueError("target_sign must be +1 or -1")
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if S.n_qubits != flip.n_qubits:
        raise ValueError("S and flip act on different numbers of qubits")
    if S.commutes_with(flip):
        raise ValueError(f"flip {flip.label} commutes with {S.label}; nothing to pump")
    s, f = S.matrix(), flip.matrix()
    eye = np.eye(s.shape[0])
    keep = (eye + target_sign * s) / 2
    away = (eye - target_sign * s) / 2
    return KrausChannel([math.sqrt(p) * f @ away, keep + math.sqrt(1 - p) * away])


def pump_lindblad_operator(S: PauliString, target_sign: int, flip: PauliString) -> np.ndarray:
    """Jump operator flip (1 - s S)/2, the small-p generator of :func:`stabilizer_pump`."""
    s = S.matrix()
    return flip.matrix() @ (np.eye(s.shape[0]) - target_sign * s) / 2


def choi_matrix(ch: KrausChannel) -> np.ndarray:
    """Unnormalized Choi matrix ``sum_ij E(|i><j|) ⊗ |i><j|`` (trace = d).

    Each Kraus operator contributes the projector onto its row-major
    flattening, which makes the Kraus recovery in :func:`kraus_from_choi`
    a plain reshape.
    """
    vecs = np.stack([k.reshape(-1) for k in ch.ops])
    return vecs.T @ vecs.conj()


def kraus_from_choi(choi: np.ndarray, cutoff: float = CHOI_CUTOFF) -> KrausChannel:
    d = int(round(math.isqrt(choi.shape[0])))
    w, v = np.linalg.eigh((choi + choi.conj().T) / 2)
    if w[0] < -TOL.invariant * d:
        raise InvariantViolation(f"map is not completely positive (eigenvalue {w[0]:.3e})")
    ops = [math.sqrt(lam) * v[:, i].reshape(d, d) for i, lam in enumerate(w) if lam > cutoff]
    return KrausChannel(ops[::-1])


def canonicalize(ch: KrausChannel) -> KrausChannel:
    """Minimal Kraus set from the Choi eigendecomposition."""
    return kraus_from_choi(choi_matrix(ch))


def compose(first: KrausChannel, then: KrausChannel, canonical: bool = True) -> KrausChannel:
    """``then ∘ first``: elements F_j E_k, optionally reduced to minimal rank."""
    if first.dim != then.dim:
        raise ValueError("cannot compose channels of different dimension")
    ops = [f @ e for f in then.ops for e in first.ops]
    ch = KrausChannel(ops)
    if canonical and len(ops) > first.dim**2:
        return canonicalize(ch)
    return ch


def compose_all(channels: Sequence[KrausChannel]) -> KrausChannel:
    out = channels[0]
    for ch in channels[1:]:
        out = compose(out, ch)
    return canonicalize(out) if len(out) > 1 else out


def channel_from_circuit(circ: Circuit, ancilla_prep: PureState | None = None) -> KrausChannel:
    """System channel induced by ``circ`` with the leading ancilla qubit(s) prepared
    in ``ancilla_prep`` (default |1>) and traced out at the end."""
    if circ.is_symbolic:
        raise ValueError("circuit has unbound symbolic angles")
    if ancilla_prep is None:
        ancilla_prep = PureState([0, 1])
    m = ancilla_prep.n_qubits
    n_sys = circ.n_qubits - m
    if n_sys < 1:
        raise ValueError("circuit has no system qubits beyond the ancilla")
    d = 2**n_sys
    anc = np.outer(ancilla_prep.amplitudes, ancilla_prep.amplitudes.conj())
    units = np.eye(d * d, dtype=complex).reshape(d * d, d, d)
    joint = np.einsum("ab,kij->kaibj", anc, units).reshape(d * d, 2**m * d, 2**m * d)
    out = run_circuit_array(circ, joint)
    sys_out = np.stack(
        [partial_trace_array(o, range(m, circ.n_qubits), circ.n_qubits) for o in out]
    )
    # units[k] = |i><j| with k = i*d + j; choi = sum E(|i><j|) ⊗ |i><j|
    choi = np.einsum("kab,kij->aibj", sys_out, units).reshape(d * d, d * d)
    return kraus_from_choi(choi)


def jamiolkowski_fidelity(a: KrausChannel, b: KrausChannel) -> float:
    """Uhlmann fidelity between the normalized Choi states of two channels."""
    if a.dim != b.dim:
        raise ValueError("channels act on different dimensions")
    ja = choi_matrix(a) / a.dim
    jb = choi_matrix(b) / b.dim
    # round-off eigenvalues would otherwise contribute sqrt(1e-17) each
    w, v = np.linalg.eigh(ja)
    w[w < CHOI_CUTOFF] = 0.0
    sqrt_a = (v * np.sqrt(w)) @ v.conj().T
    inner = np.linalg.eigvalsh(sqrt_a @ jb @ sqrt_a)
    inner[inner < CHOI_CUTOFF] = 0.0
    f = np.sqrt(inner).sum() ** 2
    return float(np.clip(f, 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class ProcessMatrix:
    """Trace-one chi with E(rho) = d * sum_mn chi_mn B_m rho B_n^† for an
    orthonormal operator basis B on a d-dimensional space."""

    basis: tuple[np.ndarray, ...]
    chi: np.ndarray
    labels: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return self.basis[0].shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return self.dim * sum(
            self.chi[m, n] * bm @ rho @ bn.conj().T
            for m, bm in enumerate(self.basis)
            for n, bn in enumerate(self.basis)
        )

    def trace_preservation_error(self) -> float:
        total = self.dim * sum(
            self.chi[m, n] * bn.conj().T @ bm
            for m, bm in enumerate(self.basis)
            for n, bn in enumerate(self.basis)
        )
        return float(np.abs(total - np.eye(self.dim)).max())

    def nonzero_count(self, threshold: float = 1e-9) -> int:
        return int((np.abs(self.chi) > threshold).sum())


def pauli_basis(n: int) -> tuple[tuple[np.ndarray, ...], tuple[str, ...]]:
    """Hilbert-Schmidt orthonormal Pauli basis P / sqrt(2**n), identity first."""
    import itertools

    labels = ["".join(t) for t in itertools.product("IXYZ", repeat=n)]
    mats = tuple(PauliString(lbl).matrix() / math.sqrt(2**n) for lbl in labels)
    return mats, tuple(labels)


def bell_operator_basis() -> tuple[tuple[np.ndarray, ...], tuple[str, ...]]:
    """The 16 operators |B_i><B_j| over (Phi+, Phi-, Psi+, Psi-)."""
    names = list(BELL_STATES)
    vecs = [s.amplitudes for s in BELL_STATES.values()]
    mats, labels = [], []
    for i, bi in enumerate(vecs):
        for j, bj in enumerate(vecs):
            mats.append(np.outer(bi, bj.conj()))
            labels.append(f"|{names[i]}><{names[j]}|")
    return tuple(mats), tuple(labels)


def chi_matrix(ch: KrausChannel, basis: Sequence[np.ndarray], labels: Sequence[str] = ()) -> ProcessMatrix:
    d = ch.dim
    basis = tuple(np.asarray(b, dtype=complex) for b in basis)
    if len(basis) != d * d:
        raise ValueError(f"basis has {len(basis)} elements, need {d * d}")
    flat = np.stack([b.reshape(-1) for b in basis])
    gram = flat.conj() @ flat.T
    if np.abs(gram - np.eye(d * d)).max() > 1e-9:
        raise ValueError("basis is not Hilbert-Schmidt orthonormal")
    # c[k, m] = Tr(B_m^† E_k)
    coeffs = np.stack([flat.conj() @ k.reshape(-1) for k in ch.ops])
    chi = coeffs.T @ coeffs.conj() / d
    return ProcessMatrix(basis, chi, tuple(labels))


@dataclass(frozen=True, eq=False)
class LindbladModel:
    hamiltonian: np.ndarray
    jump_ops: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        h = _readonly(self.hamiltonian)
        if np.abs(h - h.conj().T).max() > TOL.invariant:
            raise ValueError("Hamiltonian is not Hermitian")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jump_ops", tuple(_readonly(c) for c in self.jump_ops))

    @classmethod
    def dissipative(cls, jump_ops: Sequence[np.ndarray]) -> "LindbladModel":
        d = np.asarray(jump_ops[0]).shape[0]
        return cls(np.zeros((d, d)), tuple(jump_ops))


def lindblad_rhs(model: LindbladModel, rho) -> np.ndarray:
    """-i[H, rho] + sum_k (c rho c^† - {c^†c, rho}/2)."""
    r = np.asarray(rho, dtype=complex)
    h = model.hamiltonian
    if r.shape != h.shape:
        raise ValueError(f"state shape {r.shape} does not match model {h.shape}")
    out = -1j * (h @ r - r @ h)
    for c in model.jump_ops:
        cd = c.conj().T
        cdc = cd @ c
        out = out + c @ r @ cd - 0.5 * (cdc @ r + r @ cdc)
    return out


def integrate_master_equation(
    model: LindbladModel, rho0: DensityMatrix, total_time: float, dt: float, atol: float = 1e-6
) -> DensityMatrix:
    """Fixed-step RK4; the state is re-symmetrized after every step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if total_time < 0:
        raise ValueError("total_time must be non-negative")
    steps = int(round(total_time / dt))
    if abs(steps * dt - total_time) > 1e-12 * max(1.0, total_time):
        steps = math.ceil(total_time / dt)
    h = total_time / steps if steps else 0.0
    r = np.array(rho0.data, dtype=complex)
    for _ in range(steps):
        k1 = lindblad_rhs(model, r)
        k2 = lindblad_rhs(model, r + 0.5 * h * k1)
        k3 = lindblad_rhs(model, r + 0.5 * h * k2)
        k4 = lindblad_rhs(model, r + h * k3)
        r = r + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        r = (r + r.conj().T) / 2
    try:
        check_density(r, atol)
    except InvariantViolation as exc:
        raise InvariantViolation(f"integration left the state space ({exc}); reduce dt") from exc
    return DensityMatrix(r, check=False)


# Bell cooling toward |Psi->: pump -1 of X1X2 (flip Y1), then -1 of Y1Y2 (flip X1)
BELL_PUMPS = (
    (PauliString("XX"), PauliString("YI")),
    (PauliString("YY"), PauliString("XI")),
)


def bell_cooling_channels(p: float) -> tuple[KrausChannel, KrausChannel]:
    return tuple(stabilizer_pump(s, -1, p, f) for s, f in BELL_PUMPS)


def bell_cooling_lindbladian(gamma: float = 1.0) -> LindbladModel:
    """Rate ``gamma`` per pump with unit-norm jump operators.

    One cooling cycle at probability p corresponds to evolving for
    ``dt = p / gamma``.
    """
    return LindbladModel.dissipative(
        [math.sqrt(gamma) * pump_lindblad_operator(s, -1, f) for s, f in BELL_PUMPS]
    )


# GHZ pumping: Z-type stabilizers flipped on their second qubit, X1X2X3X4 by Z4
GHZ_PUMPS = (
    (PauliString("ZZII"), PauliString("IXII")),
    (PauliString("IZZI"), PauliString("IIXI")),
    (PauliString("IIZZ"), PauliString("IIIX")),
    (PauliString("XXXX"), PauliString("IIIZ")),
)


def ghz_pump_channel(step: int, target_sign: int = 1, p: float = 1.0) -> KrausChannel:
    s, f = GHZ_PUMPS[step - 1]
    return stabilizer_pump(s, target_sign, p, f)
