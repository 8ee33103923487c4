"""Dense density-matrix simulation of dissipative stabilizer pumping on a
small trapped-ion register (one ancilla plus up to four system qubits)."""
from .qcore import (
    BELL_STATES,
    DensityMatrix,
    InvariantViolation,
    PauliString,
    Projector,
    PureState,
    SimulationError,
    basis_state,
    expectation,
    fidelity,
    fully_mixed,
    partial_trace,
    superpose,
    tensor,
    trace_distance,
)

__version__ = "0.1.0"
