"""Lindblad spin dynamics as interconnected LTI systems, balanced
truncation with Hankel error bounds, and input-output quantum error
correction, all verifiable against a density-matrix oracle."""

from .pauli import (
    LindbladModel,
    PauliPolynomial,
    PauliString,
    ScaledPauli,
    adjoint_generator,
    commutator,
    identity_coefficient,
    multiply,
)
from .eom import (
    GeneratorMatrix,
    InterconnectedModel,
    ProductState,
    Subsystem,
    VariableSet,
    build_generator,
    closure,
    initial_expectations,
    partition_and_factor,
)
from .mor import (
    BalancedRealization,
    ReducedModel,
    StateSpaceModel,
    balance,
    error_system,
    hinf_norm,
    reduce_interconnected,
    transfer_eval,
    truncate,
)
from .sim import (
    DensityMatrix,
    Trajectory,
    density_from_amplitudes,
    density_from_bloch_product,
    expectations_from_state,
    integrate_linear,
    oracle_master_equation,
    simulate_interconnected,
)
from .qec import (
    DecodingFunctional,
    PERFECT_CHANNEL,
    RecoveryChannel,
    StabilizerCode,
    bitflip3,
    concatenate,
    decode_functional,
    encode_expectations,
    logical_dynamics,
    recovery_superoperator,
    run_cycles,
)

__version__ = "0.1.0"
