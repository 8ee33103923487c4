"""Trapped-ion gate set: collective rotations, MS gates, light shifts, resets.

Conventions (all angles in radians):

* ``CollectiveRot(X, t)``  = exp(-i t/2 sum_i X_i)
* ``MS(X, t)``             = exp(-i t/4 (sum_i X_i)^2)
* ``SingleZ(k, t)``        = exp(-i t/2 Z_k)

Y variants replace X_i by Y_i. Collective operations act on every qubit of
the register unless a participant set is given.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Union

import numpy as np

from .qcore import PAULI, DensityMatrix, TOL

BLUE = "blue"
RED = "red"


@dataclass(frozen=True)
class SymbolicAngle:
    """Rational multiple of pi, optionally scaled by the pump parameter p."""

    pi_multiple: Fraction
    times_p: bool = False

    def value(self, p: float | None = None) -> float:
        if self.times_p:
            if p is None:
                raise ValueError("angle depends on p but no p was bound")
            return float(self.pi_multiple) * math.pi * p
        return float(self.pi_multiple) * math.pi

    def __neg__(self) -> "SymbolicAngle":
        return SymbolicAngle(-self.pi_multiple, self.times_p)

    def __str__(self) -> str:
        num, den = self.pi_multiple.numerator, self.pi_multiple.denominator
        text = {1: "π", -1: "-π", 0: "0"}.get(num, f"{num}π")
        if den != 1:
            text += f"/{den}"
        return text + (" × p" if self.times_p else "")


Angle = Union[float, SymbolicAngle]


def angle_value(theta: Angle, p: float | None = None) -> float:
    return theta.value(p) if isinstance(theta, SymbolicAngle) else float(theta)


@dataclass(frozen=True)
class GateOp:
    tags: frozenset = field(default=frozenset(), kw_only=True, compare=True)

    coherent = True

    def has_tag(self, tag: str) -> bool:
        return tag in self.tags


def _check_angle(theta: Angle) -> None:
    if not isinstance(theta, SymbolicAngle) and not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta}")


def _check_axis(axis: str) -> None:
    if axis not in ("X", "Y"):
        raise ValueError(f"axis must be 'X' or 'Y', got {axis!r}")


@dataclass(frozen=True)
class CollectiveRot(GateOp):
    axis: str
    theta: Angle
    participants: tuple[int, ...] | None = None

    def __post_init__(self):
        _check_axis(self.axis)
        _check_angle(self.theta)
        if self.participants is not None and not self.participants:
            raise ValueError("participant set must be nonempty")


@dataclass(frozen=True)
class MS(GateOp):
    axis: str
    theta: Angle
    participants: tuple[int, ...] | None = None

    def __post_init__(self):
        _check_axis(self.axis)
        _check_angle(self.theta)
        if self.participants is not None and not self.participants:
            raise ValueError("participant set must be nonempty")


@dataclass(frozen=True)
class SingleZ(GateOp):
    target: int
    theta: Angle

    def __post_init__(self):
        _check_angle(self.theta)
        if self.target < 0:
            raise ValueError("target must be a qubit index")


@dataclass(frozen=True)
class AncillaReset(GateOp):
    """Dissipative reinitialization of qubit 0 into |1>."""

    coherent = False


@dataclass(frozen=True)
class SystemMix(GateOp):
    """Ideal depolarization of the listed qubits to the maximally mixed state."""

    qubits: tuple[int, ...]
    coherent = False

    def __post_init__(self):
        if not self.qubits:
            raise ValueError("SystemMix needs at least one qubit")


def bind(gate: GateOp, p: float | None) -> GateOp:
    """Resolve symbolic angles against ``p``."""
    theta = getattr(gate, "theta", None)
    if isinstance(theta, SymbolicAngle):
        return replace(gate, theta=theta.value(p))
    return gate


def inverse(gate: GateOp) -> GateOp:
    if not gate.coherent:
        raise ValueError(f"{type(gate).__name__} is not invertible")
    return replace(gate, theta=-gate.theta)


def expm_hermitian(generator: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t H) for Hermitian H via its eigendecomposition."""
    w, v = np.linalg.eigh(generator)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def embed(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    return reduce(np.kron, [op if q == qubit else PAULI["I"] for q in range(n)])


def _participants(gate, n: int) -> tuple[int, ...]:
    parts = tuple(range(n)) if gate.participants is None else tuple(sorted(set(gate.participants)))
    if parts[0] < 0 or parts[-1] >= n:
        raise ValueError(f"participants {parts} out of range for {n} qubits")
    return parts


@lru_cache(maxsize=4096)
def _unitary_cached(gate: GateOp, n: int) -> np.ndarray:
    if isinstance(gate, SingleZ):
        if gate.target >= n:
            raise ValueError(f"target {gate.target} out of range for {n} qubits")
        u = expm_hermitian(embed(PAULI["Z"], gate.target, n), gate.theta / 2)
    else:
        parts = _participants(gate, n)
        total = sum(embed(PAULI[gate.axis], q, n) for q in parts)
        if isinstance(gate, CollectiveRot):
            u = expm_hermitian(total, gate.theta / 2)
        else:
            u = expm_hermitian(total @ total, gate.theta / 4)
    u.setflags(write=False)
    return u


def unitary_of(gate: GateOp, n: int) -> np.ndarray:
    """Unitary matrix of a coherent gate on an ``n``-qubit register."""
    if not gate.coherent:
        raise ValueError(f"{type(gate).__name__} has no unitary")
    theta = gate.theta
    if isinstance(theta, SymbolicAngle):
        raise ValueError("gate has an unbound symbolic angle; bind p first")
    # tags don't change the matrix; strip them so the cache is shared
    return _unitary_cached(replace(gate, tags=frozenset()), n)


def partial_ms(axis: str, theta: float, pair: tuple[int, int], n: int) -> np.ndarray:
    """exp(-i theta/2 P_a P_b) on a qubit pair, identity elsewhere."""
    _check_axis(axis)
    a, b = pair
    if a == b:
        raise ValueError("partial MS needs two distinct qubits")
    if not (0 <= a < n and 0 <= b < n):
        raise ValueError(f"pair {pair} out of range for {n} qubits")
    gen = embed(PAULI[axis], a, n) @ embed(PAULI[axis], b, n)
    return expm_hermitian(gen, theta / 2)


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, atol: float | None = None) -> bool:
    """True when ``u = e^{i phi} v`` for some phase."""
    atol = TOL.invariant if atol is None else atol
    w = v.conj().T @ u
    phase = np.trace(w) / w.shape[0]
    if abs(abs(phase) - 1) > atol:
        return False
    return bool(np.abs(w - phase * np.eye(w.shape[0])).max() <= atol)


def _reset_qubit0(x: np.ndarray, n: int) -> np.ndarray:
    d = 2 ** (n - 1)
    t = x.reshape(x.shape[:-2] + (2, d, 2, d))
    reduced = t[..., 0, :, 0, :] + t[..., 1, :, 1, :]
    out = np.zeros_like(t)
    out[..., 1, :, 1, :] = reduced
    return out.reshape(x.shape)


def _mix_qubit(x: np.ndarray, q: int, n: int) -> np.ndarray:
    left, right = 2**q, 2 ** (n - q - 1)
    t = x.reshape(x.shape[:-2] + (left, 2, right, left, 2, right))
    reduced = t[..., :, 0, :, :, 0, :] + t[..., :, 1, :, :, 1, :]
    out = np.einsum("...abcd,ef->...aebcfd", reduced, np.eye(2) / 2)
    return out.reshape(x.shape)


def apply_gate_array(gate: GateOp, x: np.ndarray, n: int) -> np.ndarray:
    """Apply a gate to a raw operator, or a stack of operators on the last two axes.

    The map is linear, so it is valid on non-physical inputs such as matrix
    units; this is what channel extraction relies on.
    """
    if isinstance(gate, AncillaReset):
        return _reset_qubit0(x, n)
    if isinstance(gate, SystemMix):
        for q in gate.qubits:
            if not 0 <= q < n:
                raise ValueError(f"qubit {q} out of range for {n} qubits")
            x = _mix_qubit(x, q, n)
        return x
    u = unitary_of(gate, n)
    return u @ x @ u.conj().T


def apply_gate(gate: GateOp, rho: DensityMatrix) -> DensityMatrix:
    out = apply_gate_array(gate, rho.data, rho.n_qubits)
    return DensityMatrix(out, check=False)
