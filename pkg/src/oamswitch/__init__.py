"""Rotation sensing with a polarization-controlled OAM switch.

The package simulates an optical round trip in which a q-plate splits a
photon into two circular-polarization arms carrying opposite orbital-angular-
momentum displacements, both arms traverse a folded Dove-prism rotation stack,
and recombination turns a physical rotation ``theta`` into the fringe
``P = (1 - cos(4*m*l*theta + phi0)) / 2``.  On top of the simulator sit
finite-difference generator checks, Fisher-information budgets, and Monte
Carlo estimation campaigns that test how closely the sampled precision tracks
``1 / (4*m*l*sqrt(nu))``.

Layers, lowest first: ``hilbert`` (states and ladder operators on a truncated
OAM window), ``optics`` (Jones matrices and element models), ``switch`` (the
pipeline and the equivalent control-conditioned operators), ``metrology``
(generators and bounds), ``montecarlo`` (sampling and estimation), ``config``
and ``cli`` (experiment files and the command-line surface).
"""

from .config import (
    Angle,
    DoveSpec,
    ExperimentConfig,
    NoiseSpec,
    OutputSpec,
    SweepSpec,
    config_hash,
    load_preset,
    preset_names,
)
from .errors import (
    ConfigError,
    DegenerateOperatingPoint,
    DegeneratePoint,
    DimensionMismatch,
    EmptyDistribution,
    GuardBandViolation,
    InsufficientPairs,
    InsufficientSpan,
    NonConvergence,
    NonNormalizable,
    NonPositiveInput,
    OutOfBranch,
    ShiftIntoGuardBand,
    StageMismatch,
    StepTooSmall,
    SupportInGuardBand,
    ToolkitError,
    UnnormalizedState,
)
from .hilbert import (
    CIRCULAR,
    LINEAR,
    JointState,
    LinearOp,
    OamWindow,
    apply,
    compose,
    default_window,
    fidelity,
    identity_op,
    lz_moments,
    make_state,
    oam_phase_op,
    op_matrix,
    overlap,
    rotation_op,
    shift_op,
    weyl_phase_check,
)
from .metrology import (
    FisherReport,
    GeneratorReport,
    HupReport,
    MultipassGeneratorReport,
    OperatorFamily,
    SwitchGeneratorReport,
    classical_fi,
    crb,
    fisher_report,
    generator_numeric,
    hup_check,
    multipass_family,
    multipass_generator_sd,
    qfi_from_sd,
    resource_count,
    switch_family,
    switch_generator_sd,
)
from .montecarlo import (
    Calibration,
    EstimationReport,
    FringeFit,
    NoiseModel,
    ScalingPoint,
    ScalingReport,
    TrialResult,
    estimate_theta_point,
    fit_fringe,
    noisy_probability,
    quadrature_phi0,
    run_campaign,
    sample_counts,
    scaling_study,
)
from .optics import (
    DovePrismModel,
    JonesMatrix,
    QPlateModel,
    control_phase_op,
    dove_jones,
    dove_pair_op,
    hrp_flip_op,
    jones_op,
    qplate_op,
    qwp_fr_suite_op,
)
from .switch import (
    STAGE_NAMES,
    EquivalenceReport,
    OpticsTrain,
    StateTrace,
    SwitchParams,
    analytic_reference_states,
    canonical_switch_op,
    control_purity,
    control_reduced,
    equivalence_check,
    fringe_probability,
    fringe_visibility,
    nested_switch_op,
    project_probability,
    readout_probability,
    run_roundtrip,
)

__version__ = "0.1.0"
