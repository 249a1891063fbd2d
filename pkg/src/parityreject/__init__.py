"""Two-photon parity-check error rejection: simulator and experiment CLI."""

from .algebra import (
    DensityOperator,
    Ket,
    Operator,
    apply,
    basis_ket,
    embed,
    fidelity,
    haar_random_ket,
    partial_trace,
    permute_photons,
    phase_aligned,
    project,
    tensor,
)
from .bench import (
    PhotonicState,
    apply_jones,
    coincidence_postselect,
    jones_matrix,
    pbs,
    polarizer_project,
    waveplate_apply,
)
from .montecarlo import (
    N_SLOTS,
    SeedPolicy,
    TrialStats,
    convergence_check,
    run_trials,
    stream_label,
    wilson_interval,
)
from .noise import (
    BellDiagonalSource,
    CalibrationError,
    PauliChannel,
    WaveplateSandwich,
    bell_diagonal_rho,
    bell_ket,
    calibrate_from_visibilities,
    choi_matrix,
    degrade_parity_coherence,
    parity_branch_projectors,
    pauli_apply,
    sandwich_as_channel,
    trace_distance,
    visibility,
)
from .protocol import (
    BranchRecord,
    PipelineConfig,
    ProtocolOutcome,
    SixState,
    calibrate_parity_visibility,
    decode,
    decoded_qber_law,
    encode,
    ghz_decoded,
    ghz_intermediate,
    heralded_input,
    phase_error_wrap,
    run_analytic,
    run_direct_baseline,
    six_state_average,
    transmit,
)

__all__ = [
    "BellDiagonalSource",
    "BranchRecord",
    "CalibrationError",
    "DensityOperator",
    "Ket",
    "N_SLOTS",
    "Operator",
    "PauliChannel",
    "PhotonicState",
    "PipelineConfig",
    "ProtocolOutcome",
    "SeedPolicy",
    "SixState",
    "TrialStats",
    "WaveplateSandwich",
    "apply",
    "apply_jones",
    "basis_ket",
    "bell_diagonal_rho",
    "bell_ket",
    "calibrate_from_visibilities",
    "calibrate_parity_visibility",
    "choi_matrix",
    "coincidence_postselect",
    "convergence_check",
    "decode",
    "decoded_qber_law",
    "degrade_parity_coherence",
    "embed",
    "encode",
    "fidelity",
    "ghz_decoded",
    "ghz_intermediate",
    "haar_random_ket",
    "heralded_input",
    "jones_matrix",
    "parity_branch_projectors",
    "partial_trace",
    "pauli_apply",
    "pbs",
    "permute_photons",
    "phase_aligned",
    "phase_error_wrap",
    "polarizer_project",
    "project",
    "run_analytic",
    "run_direct_baseline",
    "run_trials",
    "sandwich_as_channel",
    "six_state_average",
    "stream_label",
    "tensor",
    "trace_distance",
    "transmit",
    "visibility",
    "waveplate_apply",
    "wilson_interval",
]
