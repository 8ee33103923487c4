from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from ..gates import (
    BLUE,
    MS,
    RED,
    CollectiveRot,
    GateOp,
    SingleZ,
    SymbolicAngle,
    apply_gate_array,
    bind,
    unitary_of,
)
from ..qcore import DensityMatrix, InvariantViolation, check_density


@dataclass(frozen=True)
class SequenceVariant:
    """How to instantiate a tagged pulse listing.

    ``include_optional_blue`` keeps the omittable (blue) rotations, ``sign=-1``
    flips the phase of red light shifts, ``red_qubit`` retargets red light
    shifts and ``p`` binds ``× p`` angles.
    """

    include_optional_blue: bool = True
    red_qubit: int | None = None
    sign: int = 1
    p: float = 1.0

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.red_qubit is not None and self.red_qubit not in (1, 2, 3, 4):
            raise ValueError("red_qubit must be one of the system qubits 1..4")
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class Circuit:
    """Gate list in application order on ``n_qubits`` (qubit 0 = ancilla)."""

    n_qubits: int
    elements: tuple[GateOp, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        for g in self.elements:
            for q in _touched(g):
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"{g} touches qubit {q} outside 0..{self.n_qubits - 1}")

    def __len__(self) -> int:
        return len(self.elements)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot join circuits of different widths")
        return Circuit(self.n_qubits, self.elements + other.elements)

    def then(self, *gates: GateOp) -> "Circuit":
        return Circuit(self.n_qubits, self.elements + gates)

    @property
    def is_symbolic(self) -> bool:
        return any(isinstance(getattr(g, "theta", None), SymbolicAngle) for g in self.elements)

    def bind(self, p: float) -> "Circuit":
        return Circuit(self.n_qubits, tuple(bind(g, p) for g in self.elements))

    def with_variant(self, variant: SequenceVariant) -> "Circuit":
        out = []
        for g in self.elements:
            if g.has_tag(BLUE) and not variant.include_optional_blue:
                continue
            if g.has_tag(RED):
                if variant.sign == -1:
                    g = replace(g, theta=-g.theta)
                if variant.red_qubit is not None and isinstance(g, SingleZ):
                    g = replace(g, target=variant.red_qubit)
            out.append(bind(g, variant.p))
        return Circuit(self.n_qubits, tuple(out))

    def inverse(self) -> "Circuit":
        from ..gates import inverse

        return Circuit(self.n_qubits, tuple(inverse(g) for g in reversed(self.elements)))

    def unitary(self) -> np.ndarray:
        """Product of all gate unitaries; only for purely coherent circuits."""
        u = np.eye(2**self.n_qubits, dtype=complex)
        for g in self.elements:
            u = unitary_of(g, self.n_qubits) @ u
        return u

    def gate_counts(self) -> dict[str, int]:
        """Tally of entangling, collective and single-qubit operations."""
        c = Counter()
        for g in self.elements:
            if isinstance(g, MS):
                full = g.participants is None or len(set(g.participants)) == self.n_qubits
                c["entangling" if full else "partial_entangling"] += 1
            elif isinstance(g, CollectiveRot):
                c["collective"] += 1
            elif isinstance(g, SingleZ):
                c["single"] += 1
            else:
                c["dissipative"] += 1
        return dict(c)


def _touched(g: GateOp) -> tuple[int, ...]:
    if isinstance(g, SingleZ):
        return (g.target,)
    parts = getattr(g, "participants", None) or getattr(g, "qubits", None)
    return tuple(parts or ())


def run_circuit_array(circ: Circuit, x: np.ndarray) -> np.ndarray:
    for g in circ.elements:
        x = apply_gate_array(g, x, circ.n_qubits)
    return x


def run_circuit(circ: Circuit, rho0: DensityMatrix, atol: float | None = None) -> DensityMatrix:
    """Apply every element left to right and re-validate the result."""
    if rho0.n_qubits != circ.n_qubits:
        raise ValueError(f"circuit acts on {circ.n_qubits} qubits, state has {rho0.n_qubits}")
    if circ.is_symbolic:
        raise ValueError("circuit has unbound symbolic angles")
    out = run_circuit_array(circ, rho0.data)
    try:
        check_density(out, atol)
    except InvariantViolation as exc:
        raise InvariantViolation(f"run_circuit produced an invalid state: {exc}") from exc
    return DensityMatrix(out, check=False)
