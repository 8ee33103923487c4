"""Circuit IR, pulse-sequence parser and the built-in sequence library."""
from .circuit import Circuit, SequenceVariant, run_circuit, run_circuit_array
from .library import (
    GHZ_STEP_TARGETS,
    bell_cooling_circuit,
    bell_cooling_cycle,
    effective_probability,
    four_body_evolution_circuit,
    ghz_cooling_cycle,
    ghz_cycle_gate_counts,
    ghz_pump_step,
    optimized_x_pump_circuit,
    partial_ms_refocused,
    pump_angle,
    qnd_mapping_circuit,
    sequence_text,
)
from .parser import SequenceParseError, parse_angle, parse_sequence, parse_tokens

__all__ = [
    "Circuit",
    "SequenceVariant",
    "SequenceParseError",
    "GHZ_STEP_TARGETS",
    "bell_cooling_circuit",
    "bell_cooling_cycle",
    "effective_probability",
    "four_body_evolution_circuit",
    "ghz_cooling_cycle",
    "ghz_cycle_gate_counts",
    "ghz_pump_step",
    "optimized_x_pump_circuit",
    "parse_angle",
    "parse_sequence",
    "parse_tokens",
    "partial_ms_refocused",
    "pump_angle",
    "qnd_mapping_circuit",
    "run_circuit",
    "run_circuit_array",
    "sequence_text",
]
