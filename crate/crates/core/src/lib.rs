//! Phasor-domain model and controller for a series-series wireless power
//! link whose secondary drifts off resonance. The primary side estimates
//! the secondary's natural frequency from its own input-impedance angle
//! at a handful of probe frequencies, then retunes a switch-controlled
//! capacitor to restore zero-phase (or a fixed soft-switching margin)
//! at the new operating frequency.
//!
//! Layering, bottom up:
//!
//! * [`tank`]: steady-state phasor solution of the coupled resonators;
//! * [`scc`]: the switch-controlled capacitor and its control angle;
//! * [`identify`]: the two-step resonance estimator;
//! * [`measure`]: the probe pipeline with its imperfection model;
//! * [`control`]: operating modes, the tuning loop, full sessions;
//! * [`scenario`], [`report`], [`sweep`]: named rigs, table output, and
//!   the canned studies.

pub mod control;
pub mod error;
pub mod identify;
pub mod measure;
pub mod report;
pub mod scc;
pub mod scenario;
pub mod sweep;
pub mod tank;

pub use control::{
    run_session, self_check, tune_to_target, CalibrationTable, ControllerConfig, Mode, PiState,
    Plant, SessionOutcome, SessionTrace, TraceRecord, TuneMode, TuneOutcome,
};
pub use error::{Error, Result};
pub use identify::{
    estimate_from_pair, ideal_tangent, select_probe_band, two_step_identify, BandSelect,
    IdentifyConfig, IdentificationResult, ProbePair,
};
pub use measure::{
    measured_phase, probe_impedance_angle, DisturbanceModel, REF_FREQ_HZ,
};
pub use report::{emit_report, Cell, ReportFormat, SweepReport};
pub use scc::{
    angle_for_capacitance, capacitance_range_check, effective_primary_capacitance,
    nominal_effective_capacitance, scc_equivalent_capacitance, RangeCheck, SccState, PHI_MAX,
    PHI_MIN,
};
pub use scenario::{dc_to_ac_load, dc_bus_to_fundamental_rms, Scenario, SweepDirective};
pub use sweep::{
    compare_methods, default_delta_grid, default_fs_grid, default_k_list,
    identification_error_sweep, run_case, secondary_resonance_hz, sweep_detuning, CaseReport,
    DisturbanceSelection,
};
pub use tank::{
    coupling_coefficient, detuned_secondary_capacitance, input_impedance, resonant_frequency,
    solve_tank, transfer_metrics, PhasorSolution, TankParams,
};
