"""Simulator for entanglement breaking and restoration at a beam splitter.

One photon of a polarization singlet couples to an unpolarized
environment photon on a beam splitter of transmittivity T.  The package
evaluates the resulting two-qubit states stage by stage (coupling,
conditional environment measurement, local filtering), their
concurrence and success probabilities, and cross-checks every closed
form against a brute-force Fock-space oracle.  A simulated tomography
pipeline reconstructs the states from Poissonian coincidence counts.
"""

from .core import (
    DensityOperator,
    DiagnosticsReport,
    EbrsimError,
    ZeroTrace,
    apply_local,
    from_json,
    maximally_mixed,
    normalize,
    partial_trace,
    singlet_vector,
    tensor,
    to_json,
    validate,
)
from .fock import (
    FockState,
    ModeLabel,
    OracleCheckRecord,
    OracleCheckReport,
    ZeroProbability,
    conditional_state,
    evolve_bs,
    feed_forward_correction,
    hom_coincidence,
    oracle_check,
    oracle_protocol,
    postselect_one_per_arm,
    prepare_input,
)
from .metrics import (
    ConcurrenceResult,
    NoThreshold,
    NotTwoQubit,
    XStateParams,
    assemble,
    breaking_threshold,
    concurrence,
    concurrence_x,
    crossing_threshold,
    fidelity,
    normalized_state,
    werner_decompose,
)
from .protocol import (
    ChannelConfig,
    FilterPair,
    Scenario,
    SingularPrescription,
    StageOutput,
    apply_filters,
    distinguishable,
    indistinguishable,
    mix_partial,
    partial,
    resolve_filters,
    run_protocol,
    stage1,
    stage2,
    table_filters,
)
from .tomography import (
    CountRecord,
    RankDeficient,
    TomographyResult,
    TomographySetting,
    UncertaintyReport,
    counts_from_csv,
    counts_to_csv,
    error_bars,
    reconstruct,
    simulate_counts,
    standard_settings,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelConfig",
    "ConcurrenceResult",
    "CountRecord",
    "DensityOperator",
    "DiagnosticsReport",
    "EbrsimError",
    "FilterPair",
    "FockState",
    "ModeLabel",
    "NoThreshold",
    "NotTwoQubit",
    "OracleCheckRecord",
    "OracleCheckReport",
    "RankDeficient",
    "Scenario",
    "SingularPrescription",
    "StageOutput",
    "TomographyResult",
    "TomographySetting",
    "UncertaintyReport",
    "XStateParams",
    "ZeroProbability",
    "ZeroTrace",
    "apply_filters",
    "apply_local",
    "assemble",
    "breaking_threshold",
    "concurrence",
    "concurrence_x",
    "conditional_state",
    "counts_from_csv",
    "counts_to_csv",
    "crossing_threshold",
    "distinguishable",
    "error_bars",
    "evolve_bs",
    "feed_forward_correction",
    "fidelity",
    "from_json",
    "hom_coincidence",
    "indistinguishable",
    "maximally_mixed",
    "mix_partial",
    "normalize",
    "normalized_state",
    "oracle_check",
    "oracle_protocol",
    "partial",
    "partial_trace",
    "postselect_one_per_arm",
    "prepare_input",
    "reconstruct",
    "resolve_filters",
    "run_protocol",
    "simulate_counts",
    "singlet_vector",
    "stage1",
    "stage2",
    "standard_settings",
    "table_filters",
    "tensor",
    "to_json",
    "validate",
    "werner_decompose",
]
