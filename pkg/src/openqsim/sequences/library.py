"""Built-in circuits: Bell-state cooling, GHZ pumping steps, repeated
X1X2X3X4 pumping, QND mapping and four-body evolution.

Pulse listings are stored verbatim in ``data/*.seq`` and parsed on demand;
only the short Bell-cooling and four-body circuits are assembled in code.
"""
from __future__ import annotations

import math
from collections import Counter
from functools import lru_cache
from importlib import resources

from ..gates import MS, AncillaReset, CollectiveRot, SingleZ
from .circuit import Circuit, SequenceVariant
from .parser import parse_sequence

GHZ_STEP_TARGETS = {1: "Z1Z2", 2: "Z2Z3", 3: "Z3Z4", 4: "X1X2X3X4"}


@lru_cache(maxsize=None)
def sequence_text(name: str) -> str:
    return resources.files(__package__).joinpath("data", f"{name}.seq").read_text("utf-8")


@lru_cache(maxsize=None)
def _template(name: str) -> Circuit:
    return parse_sequence(sequence_text(name), n_qubits=5)


def ghz_pump_step(step: int, variant: SequenceVariant = SequenceVariant()) -> Circuit:
    """Step 1..4 of the GHZ cooling cycle, ending with an ancilla reset.

    With the default variant the step pumps into the +1 eigenspace of
    Z1Z2, Z2Z3, Z3Z4 or X1X2X3X4; ``sign=-1`` flips the red light shifts and
    with them the pumping direction (meaningful for steps 2-4).
    """
    if step not in GHZ_STEP_TARGETS:
        raise ValueError(f"GHZ pumping step must be 1..4, got {step}")
    return _template(f"ghz_step{step}").with_variant(variant).then(AncillaReset())


def ghz_cooling_cycle(
    include_optional_blue: bool = True, signs: tuple[int, int, int, int] = (1, 1, 1, 1)
) -> list[Circuit]:
    return [
        ghz_pump_step(k, SequenceVariant(include_optional_blue, sign=s))
        for k, s in zip(range(1, 5), signs)
    ]


def ghz_cycle_gate_counts(include_optional_blue: bool) -> dict[str, int]:
    total = Counter()
    for circ in ghz_cooling_cycle(include_optional_blue):
        total.update(circ.gate_counts())
    total.pop("dissipative", None)
    return dict(total)


def optimized_x_pump_circuit(variant: SequenceVariant = SequenceVariant(red_qubit=4)) -> Circuit:
    """One repetition of the optimized pump into -1 of X1X2X3X4.

    Angles marked ``× p`` give pump probability sin²(p π/2), which equals
    ``p`` only for p in {0, 1/2, 1}; see :func:`effective_probability`.
    """
    return _template("x_pump_repeated").with_variant(variant).then(AncillaReset())


def effective_probability(p: float) -> float:
    return math.sin(p * math.pi / 2) ** 2


def qnd_mapping_circuit() -> Circuit:
    """Coherent 5-qubit mapping of the X1X2X3X4 eigenvalue onto the ancilla."""
    return _template("qnd_mapping").bind(1.0)


def four_body_evolution_circuit(beta: float) -> Circuit:
    """Map with one 5-ion MS gate, rotate the ancilla, unmap.

    The system evolves by exp(-i beta/2 X1X2X3X4), i.e. ``beta = 2 g tau``
    for ``H = g X1X2X3X4``, and the ancilla returns to |1>. Conjugating an
    ancilla rotation ``U_Z0(phi)`` yields exp(+i phi/2 X1X2X3X4), hence the
    rotation angle is ``-beta``.
    """
    if not math.isfinite(beta):
        raise ValueError("beta must be finite")
    return Circuit(5, (MS("X", math.pi / 2), SingleZ(0, -beta), MS("X", -math.pi / 2)))


def pump_angle(p: float) -> float:
    """alpha with sin²(alpha) = p."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return math.asin(math.sqrt(p))


def partial_ms_refocused(theta: float) -> tuple:
    """exp(-i theta/2 X0X1) on three ions from two 3-ion MS gates.

    A pi light shift on qubit 2 between the MS gates cancels its couplings;
    the trailing -pi shift undoes the leftover Z2 rotation.
    """
    return (
        MS("X", theta / 2),
        SingleZ(2, math.pi),
        MS("X", theta / 2),
        SingleZ(2, -math.pi),
    )


def bell_cooling_circuit(stab: str, p: float, refocused: bool = False) -> Circuit:
    """Ancilla + 2 system qubits: pump into -1 of X1X2 (``"XX"``) or Y1Y2 (``"YY"``).

    Mapping by a collective MS gate about the stabilizer's axis, the
    controlled rotation exp(i alpha (1+Z0)/2 Z1) with sin²(alpha) = p,
    unmapping, then ancilla reset. Flip operators are Y1 and X1.
    """
    if stab not in ("XX", "YY"):
        raise ValueError(f"stab must be 'XX' or 'YY', got {stab!r}")
    alpha = pump_angle(p)
    mapping = MS(stab[0], math.pi / 2)
    if refocused:
        coupling = partial_ms_refocused(-alpha)
    else:
        coupling = (MS("X", -alpha, participants=(0, 1)),)
    controlled = (
        CollectiveRot("Y", -math.pi / 2),
        *coupling,
        CollectiveRot("Y", math.pi / 2),
        SingleZ(1, -alpha),
    )
    return Circuit(3, (mapping, *controlled, mapping, AncillaReset()))


def bell_cooling_cycle(p: float, refocused: bool = False) -> list[Circuit]:
    return [bell_cooling_circuit("XX", p, refocused), bell_cooling_circuit("YY", p, refocused)]
