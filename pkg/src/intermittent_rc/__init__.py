"""Repetitive control with intermittently sampled (timestamped) error measurements."""

from .design import (
    DesignOutcome,
    DesignSpec,
    design_intermittent,
    design_nominal,
    evaluate_design,
    notch_q,
)
from .errors import *  # noqa: F401,F403
from .lti import (
    FrfData,
    PoleSet,
    StreamingFilter,
    TransferFunction,
    feedback,
    freq_response,
    frequency_grid,
    is_internally_stable,
    poles,
    read_frf_csv,
    sensitivity,
    simulate,
    write_frf_csv,
    zero_phase_fir_lowpass,
    zeros,
    zpetc_inverse,
)
from .repetitive import (
    BasisRcConfig,
    RcConfig,
    RepetitiveController,
    basis_rc_transfer,
    controller_transfer,
    init_state,
    matched_basis_gains,
    rc_step,
    rc_transfer,
)
from .sim import (
    Disturbance,
    Harmonic,
    Scenario,
    SimResult,
    cumulative_amplitude_spectrum,
    interpolate_to_grid,
    reduction_metrics,
    rms_moving_window,
    run_closed_loop,
)
from .stability import (
    StabilityReport,
    build_T_R,
    classic_eq14,
    classic_small_gain_eq6,
    nyquist_check,
    passivity_check,
    s1_check,
    small_gain_check,
    winding_number,
)
from .timestamping import (
    SplitMix64,
    TimestampGenerator,
    TimestampSet,
    apply_T,
    apply_T_complement,
    generate,
    sector_check,
)

__version__ = "0.1.0"
