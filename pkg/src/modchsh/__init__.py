"""CHSH tests with bounded observables of arbitrary spectrum and modular variables."""

from .chsh import (
    BinaryPOVM,
    BipartiteState,
    DiscreteObservable,
    JointProbs,
    UnitaryOperator,
    chsh,
    correlation,
    joint_probs,
    observable_from_unitary,
    povm_from_observable,
    povm_from_unitary,
    rescale_to_unit_spectrum,
    sample_outcomes,
    two_level_observable,
)
from .modular import (
    BellBlock,
    ModularFrame,
    ModularPoint,
    ModularWavepacket,
    SweepResult,
    WrappedDensity,
    bell_block,
    bell_expectation,
    bell_expectation_bruteforce,
    correlation_from_joint_wrapped_density,
    delta_limit_bell,
    expectation_from_wrapped_density,
    position_phase_expectation,
    psi_amplitudes,
    sigma_blocks,
    sweep_ax,
    violation_threshold,
    wrap_position,
    wrapped_gaussian_density,
)
from .photonics import (
    CoincidenceTable,
    GratingSpec,
    MachZehnderOutcome,
    apply_slm_phase,
    coincidence_povm_probs,
    grating_to_modular,
    grating_wavefunction,
    mach_zehnder_probs,
    polarization_coeffs,
    sample_coincidences,
    transmission_coeffs,
)

__version__ = "0.1.0"
