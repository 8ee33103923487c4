"""Dense state primitives: density matrices, pure states, Pauli strings.

Qubit 0 is the most significant tensor factor. In joint ancilla+system
registers qubit 0 is the ancilla and system qubits follow in order, so a
4-qubit system label ``"0111"`` reads as ``|q1 q2 q3 q4>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Iterable, Sequence

import numpy as np


class SimulationError(Exception):
    """Base class for simulator failures."""


class InvariantViolation(SimulationError):
    """A state or channel broke one of its defining invariants."""


@dataclass(frozen=True)
class Tolerances:
    invariant: float = 1e-9
    algebraic: float = 1e-12


TOL = Tolerances()


def configure_tolerances(invariant: float | None = None, algebraic: float | None = None) -> Tolerances:
    """Replace the module-wide default tolerances; returns the previous setting."""
    global TOL
    previous = TOL
    TOL = replace(
        TOL,
        invariant=TOL.invariant if invariant is None else invariant,
        algebraic=TOL.algebraic if algebraic is None else algebraic,
    )
    return previous


I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


def _n_from_dim(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    return n


def check_density(data: np.ndarray, atol: float | None = None) -> None:
    """Raise InvariantViolation unless ``data`` is a unit-trace Hermitian PSD matrix."""
    atol = TOL.invariant if atol is None else atol
    tr = np.trace(data)
    if abs(tr - 1) > atol:
        raise InvariantViolation(f"trace {tr:.3e} deviates from 1")
    herm = np.abs(data - data.conj().T).max()
    if herm > atol:
        raise InvariantViolation(f"non-Hermitian by {herm:.3e}")
    lowest = np.linalg.eigvalsh((data + data.conj().T) / 2)[0]
    if lowest < -atol:
        raise InvariantViolation(f"negative eigenvalue {lowest:.3e}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Immutable ``2**n x 2**n`` density matrix, validated on construction."""

    data: np.ndarray
    n_qubits: int = field(init=False)

    def __init__(self, data, check: bool = True, atol: float | None = None):
        data = _frozen(data)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {data.shape}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "n_qubits", _n_from_dim(data.shape[0]))
        if check:
            check_density(data, atol)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_pure(cls, state: "PureState | np.ndarray") -> "DensityMatrix":
        vec = state.amplitudes if isinstance(state, PureState) else np.asarray(state, dtype=complex)
        return cls(np.outer(vec, vec.conj()))

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def allclose(self, other: "DensityMatrix | np.ndarray", atol: float | None = None) -> bool:
        atol = TOL.invariant if atol is None else atol
        return bool(np.allclose(self.data, np.asarray(other), atol=atol, rtol=0))

    def __repr__(self) -> str:
        return f"DensityMatrix(n_qubits={self.n_qubits})"


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    n_qubits: int = field(init=False)

    def __init__(self, amplitudes, atol: float | None = None):
        amps = _frozen(np.ravel(amplitudes))
        atol = TOL.invariant if atol is None else atol
        norm = np.linalg.norm(amps)
        if abs(norm - 1) > atol:
            raise InvariantViolation(f"state norm {norm:.12g} is not 1")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "n_qubits", _n_from_dim(amps.size))

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self)

    def __repr__(self) -> str:
        return f"PureState(n_qubits={self.n_qubits})"


def basis_state(label: str) -> PureState:
    """Computational basis ket for a bit string such as ``"0111"``."""
    if not label or set(label) - {"0", "1"}:
        raise ValueError(f"invalid basis label {label!r}")
    vec = np.zeros(2 ** len(label), dtype=complex)
    vec[int(label, 2)] = 1
    return PureState(vec)


def superpose(*terms: tuple[complex, str]) -> PureState:
    """Normalized superposition of basis kets, e.g. ``superpose((1, "0000"), (1, "1111"))``."""
    vec = sum(c * basis_state(lbl).amplitudes for c, lbl in terms)
    return PureState(vec / np.linalg.norm(vec))


def fully_mixed(n: int) -> DensityMatrix:
    if n < 1:
        raise ValueError("fully_mixed needs at least one qubit")
    return DensityMatrix(np.eye(2**n) / 2**n)


def as_density(state) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, PureState):
        return state.density()
    raise TypeError(f"expected DensityMatrix or PureState, got {type(state).__name__}")


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """Kronecker product; ``a`` supplies the leading qubits."""
    return DensityMatrix(np.kron(a.data, b.data), check=False)


def partial_trace_array(data: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Partial trace of a raw (not necessarily physical) ``2**n`` operator."""
    keep = sorted(set(keep))
    drop = [q for q in range(n) if q not in keep]
    t = np.asarray(data).reshape([2] * (2 * n))
    # trace highest indices first so earlier axis numbers stay valid
    for count, q in enumerate(sorted(drop, reverse=True)):
        m = n - count
        t = np.trace(t, axis1=q, axis2=q + m)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on ``keep`` (kept in ascending order)."""
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= rho.n_qubits:
        raise ValueError(f"qubit indices {keep} out of range for {rho.n_qubits} qubits")
    return DensityMatrix(partial_trace_array(rho.data, keep, rho.n_qubits), check=False)


@dataclass(frozen=True)
class PauliString:
    """Signed tensor product of Pauli letters, e.g. ``PauliString("XXXX")``.

    ``letters[k]`` acts on qubit ``k`` of whatever register the string is
    applied to; use :meth:`on` to place factors on selected qubits.
    """

    letters: str
    sign: int = 1

    def __post_init__(self):
        if not self.letters or set(self.letters) - set("IXYZ"):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @classmethod
    def on(cls, n_qubits: int, factors: dict[int, str], sign: int = 1) -> "PauliString":
        letters = ["I"] * n_qubits
        for q, p in factors.items():
            letters[q] = p
        return cls("".join(letters), sign)

    @classmethod
    def parse(cls, text: str, n_qubits: int) -> "PauliString":
        """Parse ``"Z1Z2"``-style labels with 1-based system qubit numbers."""
        sign = 1
        if text[:1] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        factors = {}
        i = 0
        while i < len(text):
            letter = text[i]
            j = i + 1
            while j < len(text) and text[j].isdigit():
                j += 1
            if letter not in "XYZ" or j == i + 1:
                raise ValueError(f"cannot parse Pauli label {text!r}")
            q = int(text[i + 1 : j]) - 1
            if not 0 <= q < n_qubits:
                raise ValueError(f"qubit {q + 1} out of range in {text!r}")
            factors[q] = letter
            i = j
        return cls.on(n_qubits, factors, sign)

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def label(self) -> str:
        """1-based label such as ``Z1Z2`` (identity factors omitted)."""
        body = "".join(f"{p}{q + 1}" for q, p in enumerate(self.letters) if p != "I") or "I"
        return ("-" if self.sign < 0 else "") + body

    def matrix(self) -> np.ndarray:
        return self.sign * reduce(np.kron, [PAULI[p] for p in self.letters])

    def commutes_with(self, other: "PauliString") -> bool:
        clashes = sum(
            a != "I" and b != "I" and a != b for a, b in zip(self.letters, other.letters)
        )
        return clashes % 2 == 0

    def __neg__(self) -> "PauliString":
        return PauliString(self.letters, -self.sign)


@dataclass(frozen=True)
class Projector:
    """``(1 + eigen_sign * S) / 2`` onto an eigenspace of a Pauli string."""

    base: PauliString
    eigen_sign: int = 1

    def matrix(self) -> np.ndarray:
        d = 2**self.base.n_qubits
        return (np.eye(d) + self.eigen_sign * self.base.matrix()) / 2


def expectation(rho: DensityMatrix, obs: PauliString | np.ndarray, atol: float | None = None) -> float:
    """``Tr(rho S)``; raises if the imaginary residue exceeds tolerance."""
    atol = TOL.invariant if atol is None else atol
    mat = obs.matrix() if isinstance(obs, PauliString) else np.asarray(obs)
    if mat.shape != rho.data.shape:
        raise ValueError(f"observable shape {mat.shape} does not match state {rho.data.shape}")
    val = np.trace(rho.data @ mat)
    if abs(val.imag) > atol:
        raise InvariantViolation(f"expectation has imaginary part {val.imag:.3e}")
    if isinstance(obs, PauliString):
        if abs(val.real) > 1 + atol:
            raise InvariantViolation(f"Pauli expectation {val.real} outside [-1, 1]")
        return float(np.clip(val.real, -1.0, 1.0))
    return float(val.real)


def fidelity(rho: DensityMatrix, target: PureState) -> float:
    """Overlap ``<psi|rho|psi>`` with a pure target."""
    psi = target.amplitudes
    if psi.size != rho.dim:
        raise ValueError(f"target dimension {psi.size} does not match state {rho.dim}")
    val = np.vdot(psi, rho.data @ psi).real
    return float(np.clip(val, 0.0, 1.0))


def trace_distance(a, b) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return float(0.5 * np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


_R2 = 1 / np.sqrt(2)
BELL_STATES: dict[str, PureState] = {
    "Phi+": PureState([_R2, 0, 0, _R2]),
    "Phi-": PureState([_R2, 0, 0, -_R2]),
    "Psi+": PureState([0, _R2, _R2, 0]),
    "Psi-": PureState([0, _R2, -_R2, 0]),
}


def bell_populations(rho: DensityMatrix) -> tuple[float, float, float, float]:
    """Populations of (Phi+, Phi-, Psi+, Psi-) for a two-qubit state."""
    if rho.n_qubits != 2:
        raise ValueError(f"bell_populations needs 2 qubits, got {rho.n_qubits}")
    return tuple(fidelity(rho, s) for s in BELL_STATES.values())
