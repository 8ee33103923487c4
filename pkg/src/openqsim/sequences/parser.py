"""Parser for published pulse-sequence notation.

Grammar (whitespace and line breaks separate tokens)::

    token      := annotation* "U_" generator "(" angle ")"
    annotation := "[blue]" | "[red]" | "[red:" digits "]"
    generator  := X | Y | X^2 | Y^2 | Z_k      (braces, ², ₖ subscripts accepted)
    angle      := ["-"] [int] "π" ["/" int] ["× p"]  |  "0"

``pi``/``\\pi`` may stand for π, ``*``/``x`` for ×, ASCII ``-`` for −.
Lines starting with ``#`` are comments. A ``[red:k]`` annotation records the
printed target of a red light shift and must agree with it.

Listings are operator products, so by default the rightmost token is applied
first (``order="product"``); ``order="listing"`` keeps textual order.
"""
from __future__ import annotations

import re
from fractions import Fraction

from ..gates import BLUE, MS, RED, CollectiveRot, GateOp, SingleZ, SymbolicAngle
from .circuit import Circuit

_SUBSCRIPTS = str.maketrans("₀₁₂₃₄₅₆₇₈₉", "0123456789")

_TOKEN = re.compile(
    r"(?P<annots>(?:\[[^\]]*\]\s*)*)"
    r"U_(?P<gen>\{[^}]*\}|[XY](?:\^2|²)?|Z_?[0-9₀-₉]+)"
    r"\s*\((?P<angle>[^)]*)\)"
)
_ANGLE = re.compile(
    r"^(?P<sign>[+-]?)\s*(?:(?P<num>\d+)\s*\*?\s*)?(?:pi|π)"
    r"(?:\s*/\s*(?P<den>\d+))?(?P<p>\s*\*\s*p)?$"
)


class SequenceParseError(ValueError):
    pass


def parse_angle(text: str) -> SymbolicAngle:
    s = text.replace("\\pi", "π").replace("−", "-").replace("×", "*").strip()
    s = re.sub(r"\s*\bx\s*p$", "*p", s)
    if re.fullmatch(r"[+-]?0", s):
        return SymbolicAngle(Fraction(0))
    m = _ANGLE.match(s)
    if not m:
        raise SequenceParseError(f"malformed angle {text!r}")
    value = Fraction(int(m["num"] or 1), int(m["den"] or 1))
    if m["sign"] == "-":
        value = -value
    return SymbolicAngle(value, times_p=bool(m["p"]))


def _parse_generator(text: str) -> tuple[str, int | None]:
    g = text.strip("{}").replace("²", "^2").translate(_SUBSCRIPTS).replace(" ", "")
    if g in ("X", "Y", "X^2", "Y^2"):
        return g, None
    m = re.fullmatch(r"Z_?(\d+)", g)
    if m:
        return "Z", int(m[1])
    raise SequenceParseError(f"unknown generator U_{text}")


def _parse_annotations(text: str) -> tuple[set[str], int | None]:
    tags, printed = set(), None
    for a in re.findall(r"\[([^\]]*)\]", text):
        a = a.strip()
        if a == BLUE:
            tags.add(BLUE)
        elif a == RED:
            tags.add(RED)
        elif re.fullmatch(r"red:\d+", a):
            tags.add(RED)
            printed = int(a.split(":")[1])
        else:
            raise SequenceParseError(f"unknown annotation [{a}]")
    return tags, printed


def _make_gate(gen: str, qubit: int | None, angle: SymbolicAngle, tags: frozenset) -> GateOp:
    if gen in ("X", "Y"):
        return CollectiveRot(gen, angle, tags=tags)
    if gen in ("X^2", "Y^2"):
        return MS(gen[0], angle, tags=tags)
    return SingleZ(qubit, angle, tags=tags)


def parse_tokens(text: str) -> list[GateOp]:
    """Gates in textual order, with symbolic angles."""
    lines = [ln for ln in text.splitlines() if not ln.lstrip().startswith("#")]
    body = "\n".join(lines).replace("\\,", " ").replace("\\\\", " ")
    gates, pos = [], 0
    while True:
        while pos < len(body) and body[pos].isspace():
            pos += 1
        if pos >= len(body):
            break
        m = _TOKEN.match(body, pos)
        if not m:
            snippet = body[pos : pos + 20].split("\n")[0]
            raise SequenceParseError(f"cannot parse sequence near {snippet!r}")
        gen, qubit = _parse_generator(m["gen"])
        tags, printed = _parse_annotations(m["annots"])
        if printed is not None and printed != qubit:
            raise SequenceParseError(f"[red:{printed}] does not match target of U_{m['gen']}")
        gates.append(_make_gate(gen, qubit, parse_angle(m["angle"]), frozenset(tags)))
        pos = m.end()
    return gates


def parse_sequence(text: str, n_qubits: int = 5, order: str = "product") -> Circuit:
    """Parse a listing into a (possibly symbolic) circuit on ``n_qubits``."""
    if order not in ("product", "listing"):
        raise ValueError("order must be 'product' or 'listing'")
    gates = parse_tokens(text)
    if order == "product":
        gates.reverse()
    return Circuit(n_qubits, tuple(gates))
