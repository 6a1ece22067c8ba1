//! Closed-loop control: primary self-check calibration, phase tuning to
//! a ZPA or ZVS target, and the full session state machine
//! (SelfCheck -> Idle -> Identify -> Tune -> Run, any -> Fault).
//!
//! Time is simulated: every measurement consumes one settling window of
//! `settle_cycles` carrier cycles at the current frequency. Loop
//! measurements (self-check, tuning) are averaged over the window by
//! synchronous detection and therefore carry no ZCD timing bias; the
//! one-shot samples taken while probing do.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::identify::{two_step_identify, IdentificationResult, IdentifyConfig};
use crate::measure::{measured_phase, DisturbanceModel};
use crate::scc::{
    angle_for_capacitance, effective_capacitance_slope, nominal_effective_capacitance,
    scc_equivalent_capacitance, SccState, PHI_MAX, PHI_MIN,
};
use crate::scenario::Scenario;
use crate::tank::{input_impedance, solve_tank, PhasorSolution, TankParams};

/// Loop-iteration budget for one self-check grid frequency.
pub const SELF_CHECK_ITER_CAP: usize = 300;
/// Settling-window budget for one tuning run.
pub const TUNE_ITER_CAP: usize = 200;
/// Convergence window: |theta - target| below this counts as settled.
pub const ANGLE_TOL: f64 = 0.5 * PI / 180.0;
/// Consecutive settled windows required before declaring convergence.
pub const SETTLED_STREAK: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    SelfCheck,
    Idle,
    Identify,
    Tune,
    Run,
    Fault,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::SelfCheck => "self-check",
            Mode::Idle => "idle",
            Mode::Identify => "identify",
            Mode::Tune => "tune",
            Mode::Run => "run",
            Mode::Fault => "fault",
        };
        f.write_str(s)
    }
}

/// Legal state-machine moves, same-mode repeats included.
pub fn allowed_transition(from: Mode, to: Mode) -> bool {
    use Mode::*;
    if to == Fault {
        return true;
    }
    matches!(
        (from, to),
        (SelfCheck, SelfCheck)
            | (SelfCheck, Idle)
            | (Idle, Identify)
            | (Idle, Run)
            | (Identify, Identify)
            | (Identify, Tune)
            | (Tune, Tune)
            | (Tune, Run)
            | (Run, Run)
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Simulated time, s.
    pub t: f64,
    pub mode: Mode,
    pub f: f64,
    pub phi: f64,
    pub theta_meas: f64,
    pub note: String,
}

#[derive(Debug, Clone, Default)]
pub struct SessionTrace {
    pub records: Vec<TraceRecord>,
}

impl SessionTrace {
    pub fn push(&mut self, rec: TraceRecord) {
        if let Some(last) = self.records.last() {
            debug_assert!(rec.t >= last.t, "trace time went backwards");
            debug_assert!(
                allowed_transition(last.mode, rec.mode),
                "illegal transition {:?} -> {:?}",
                last.mode,
                rec.mode
            );
        }
        self.records.push(rec);
    }

    /// Structural audit used by tests: monotone time, legal transitions,
    /// self-check first, terminal mode last.
    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Domain("empty session trace".into()));
        }
        if self.records[0].mode != Mode::SelfCheck {
            return Err(Error::Domain("session must begin with self-check".into()));
        }
        for pair in self.records.windows(2) {
            if pair[1].t < pair[0].t {
                return Err(Error::Domain(format!(
                    "trace time went backwards at t = {}",
                    pair[1].t
                )));
            }
            if !allowed_transition(pair[0].mode, pair[1].mode) {
                return Err(Error::Domain(format!(
                    "illegal transition {} -> {}",
                    pair[0].mode, pair[1].mode
                )));
            }
        }
        match self.records.last().unwrap().mode {
            Mode::Run | Mode::Fault => Ok(()),
            m => Err(Error::Domain(format!("session ended in non-terminal mode {m}"))),
        }
    }

    /// Time of the first record in `mode`, if any.
    pub fn first_entry(&self, mode: Mode) -> Option<f64> {
        self.records.iter().find(|r| r.mode == mode).map(|r| r.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneMode {
    Zpa,
    Zvs,
}

/// Controller knobs. Angles in radians, frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Detune-check threshold at the carrier.
    pub theta_ref: f64,
    /// ZVS target angle (inductive, current lagging).
    pub zvs_margin: f64,
    pub kp: f64,
    pub ki: f64,
    /// Carrier cycles per settling window.
    pub settle_cycles: u32,
    /// Operating band, Hz; also the self-check calibration span.
    pub band: (f64, f64),
    /// Self-check grid spacing, Hz.
    pub grid_step: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            theta_ref: 5.0 * PI / 180.0,
            // Thin on purpose: keeps the post-tune power factor above
            // 0.999 while still leaving the bridge slightly inductive.
            zvs_margin: 2.0 * PI / 180.0,
            kp: 0.05,
            ki: 0.01,
            settle_cycles: 10,
            band: (79e3, 90e3),
            grid_step: 1e3,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kp < 0.0 || self.ki < 0.0 {
            return Err(Error::Domain("PI gains must be non-negative".into()));
        }
        if self.settle_cycles == 0 {
            return Err(Error::Domain("settle_cycles must be at least 1".into()));
        }
        if !(self.band.0 > 0.0) || self.band.1 < self.band.0 {
            return Err(Error::Domain(format!("bad band {:?}", self.band)));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::Domain("grid_step must be positive".into()));
        }
        if !(0.0..PI / 2.0).contains(&self.theta_ref) {
            return Err(Error::Domain("theta_ref must lie in [0, pi/2)".into()));
        }
        if !(0.0..PI / 2.0).contains(&self.zvs_margin) {
            return Err(Error::Domain("zvs_margin must lie in [0, pi/2)".into()));
        }
        Ok(())
    }

    /// Self-check grid across the band, inclusive of both edges when the
    /// step divides the span.
    pub fn grid(&self) -> Vec<f64> {
        let mut v = Vec::new();
        let mut f = self.band.0;
        // Tiny slack so 79..90 by 1000 lands exactly on 90.
        while f <= self.band.1 * (1.0 + 1e-12) {
            v.push(f.min(self.band.1));
            f += self.grid_step;
        }
        v
    }

    pub fn settle_window(&self, f: f64) -> f64 {
        self.settle_cycles as f64 / f
    }
}

/// PI controller state for the SCC control angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiState {
    pub phi: f64,
    pub integral: f64,
}

/// One PI step with clamping anti-windup: if the candidate angle leaves
/// the SCC domain, the angle saturates and the integrator keeps its old
/// value.
pub fn pi_update(state: PiState, error: f64, kp: f64, ki: f64) -> PiState {
    let candidate_i = state.integral + error;
    let candidate_phi = state.phi + kp * error + ki * candidate_i;
    if (PHI_MIN..=PHI_MAX).contains(&candidate_phi) {
        PiState { phi: candidate_phi, integral: candidate_i }
    } else {
        PiState {
            phi: candidate_phi.clamp(PHI_MIN, PHI_MAX),
            integral: state.integral,
        }
    }
}

/// The simulated hardware a session talks to. The SCC tolerance and the
/// disturbance model are part of the plant, not the controller; the
/// controller only ever sees angles.
pub struct Plant<'a> {
    pub tank: &'a TankParams,
    pub scc: &'a SccState,
    pub dist: &'a DisturbanceModel,
}

impl Plant<'_> {
    /// Effective primary capacitance actually realized at `phi`.
    pub fn cp_at(&self, phi: f64) -> Result<f64> {
        let csc = scc_equivalent_capacitance(self.scc.cp1, phi)? * (1.0 + self.scc.tolerance);
        crate::scc::effective_primary_capacitance(self.scc.cp0, csc)
    }

    fn theta_true(&self, f: f64, phi: f64, probing: bool) -> Result<f64> {
        let re = if probing {
            self.dist.probe_load(self.tank.re, f)
        } else {
            self.tank.re
        };
        if re <= 0.0 {
            return Err(Error::Domain(format!(
                "load drift drove Re non-positive at {f} Hz"
            )));
        }
        let p = TankParams { cp: self.cp_at(phi)?, re, ..*self.tank };
        Ok(input_impedance(&p, 2.0 * PI * f)?.arg())
    }

    /// One-shot sampled angle while probing: ZCD bias and load drift in.
    pub fn probe_angle(&self, f: f64, phi: f64) -> Result<f64> {
        let theta = measured_phase(self.theta_true(f, phi, true)?, f, self.dist);
        if theta.abs() >= PI / 2.0 {
            return Err(Error::Saturation { f_hz: f });
        }
        Ok(theta)
    }

    /// Angle seen by the tuning loop: averaged synchronous detection over
    /// the settling window, so the ZCD timing offset cancels.
    pub fn loop_angle(&self, f: f64, phi: f64) -> Result<f64> {
        self.theta_true(f, phi, false)
    }

    /// Steady state at the carrier with the realized capacitance.
    pub fn operating_point(&self, f: f64, phi: f64) -> Result<PhasorSolution> {
        let p = TankParams { cp: self.cp_at(phi)?, ..*self.tank };
        solve_tank(&p, 2.0 * PI * f)
    }
}

/// SCC control angle per grid frequency, from the self-check run.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    /// (frequency Hz, control angle rad), ascending in frequency.
    pub entries: Vec<(f64, f64)>,
}

impl CalibrationTable {
    /// Linear interpolation, clamped at the table edges.
    pub fn phi_at(&self, f: f64) -> f64 {
        let e = &self.entries;
        assert!(!e.is_empty(), "empty calibration table");
        if f <= e[0].0 {
            return e[0].1;
        }
        if f >= e[e.len() - 1].0 {
            return e[e.len() - 1].1;
        }
        let idx = e.partition_point(|&(fi, _)| fi <= f);
        let (f0, p0) = e[idx - 1];
        let (f1, p1) = e[idx];
        p0 + (p1 - p0) * (f - f0) / (f1 - f0)
    }

    /// Two-column text: `frequency_hz phi_rad`, one comment header line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# self-check calibration: frequency_hz phi_rad\n");
        for (f, phi) in &self.entries {
            s.push_str(&format!("{f} {phi}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64> {
                tok.ok_or_else(|| {
                    Error::Scenario(format!("calibration line {} too short", lineno + 1))
                })?
                .parse()
                .map_err(|e| Error::Scenario(format!("calibration line {}: {e}", lineno + 1)))
            };
            let f = parse(it.next())?;
            let phi = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::Scenario(format!(
                    "calibration line {} has extra fields",
                    lineno + 1
                )));
            }
            entries.push((f, phi));
        }
        if entries.is_empty() {
            return Err(Error::Scenario("calibration table has no entries".into()));
        }
        if !entries.windows(2).all(|w| w[1].0 > w[0].0) {
            return Err(Error::Scenario(
                "calibration frequencies must be strictly ascending".into(),
            ));
        }
        Ok(CalibrationTable { entries })
    }
}

/// Warm start for a target capacitance: the nominal inverse map, pushed
/// to the nearest boundary when the target is out of range.
fn warm_start_angle(target_cp: f64, scc: &SccState) -> f64 {
    match angle_for_capacitance(target_cp, scc) {
        Ok(phi) => phi,
        Err(_) => {
            let lo = nominal_effective_capacitance(scc, PHI_MIN).unwrap_or(target_cp);
            if target_cp < lo {
                PHI_MIN
            } else {
                PHI_MAX
            }
        }
    }
}

fn self_check_inner(
    lp: f64,
    rp: f64,
    scc: &SccState,
    config: &ControllerConfig,
    on_iteration: &mut dyn FnMut(f64, f64, f64),
) -> Result<CalibrationTable> {
    if !(lp > 0.0) {
        return Err(Error::Domain(format!("lp must be positive, got {lp}")));
    }
    if !(rp > 0.0) {
        // The angle estimator divides by Rp; a lossless primary never
        // shows a finite phase to lock onto.
        return Err(Error::Domain(
            "self-check requires a resistive primary (rp > 0)".into(),
        ));
    }
    let mut entries = Vec::new();
    let mut failing = Vec::new();

    for f in config.grid() {
        let w = 2.0 * PI * f;
        let target_cp = 1.0 / (w * w * lp);
        let mut state = PiState {
            phi: warm_start_angle(target_cp, scc),
            integral: 0.0,
        };
        let mut converged = false;

        for _ in 0..SELF_CHECK_ITER_CAP {
            // Real primary loop, tolerance included; M = 0 by construction
            // (the secondary is not energized during self-check).
            let csc = scc_equivalent_capacitance(scc.cp1, state.phi)? * (1.0 + scc.tolerance);
            let cp_real = crate::scc::effective_primary_capacitance(scc.cp0, csc)?;
            let xp = w * lp - 1.0 / (w * cp_real);
            let theta = xp.atan2(rp);
            on_iteration(f, state.phi, theta);
            if theta.abs() < ANGLE_TOL {
                entries.push((f, state.phi));
                converged = true;
                break;
            }
            // Newton step through the nominal actuator model, fed to the
            // PI stage as its error signal.
            let xp_est = rp * theta.tan();
            let dcp = effective_capacitance_slope(scc, state.phi)?;
            let cp_nom = nominal_effective_capacitance(scc, state.phi)?;
            let slope_xp = dcp / (w * cp_nom * cp_nom);
            state = pi_update(state, -xp_est / slope_xp, config.kp, config.ki);
        }
        if !converged {
            failing.push(f);
        }
    }

    if failing.is_empty() {
        Ok(CalibrationTable { entries })
    } else {
        Err(Error::SelfCheck(failing))
    }
}

/// Calibrate the SCC angle for zero primary reactance at every grid
/// frequency, with the secondary open (M = 0).
pub fn self_check(
    lp: f64,
    rp: f64,
    scc: &SccState,
    config: &ControllerConfig,
) -> Result<CalibrationTable> {
    self_check_inner(lp, rp, scc, config, &mut |_, _, _| {})
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub phi: f64,
    pub windows: usize,
    pub theta_final: f64,
}

fn tune_loop(
    plant: &Plant<'_>,
    f: f64,
    target: f64,
    phi0: f64,
    config: &ControllerConfig,
    on_window: &mut dyn FnMut(usize, f64, f64),
) -> Result<TuneOutcome> {
    let mut state = PiState { phi: phi0, integral: 0.0 };
    // Secant estimate of d(theta)/d(phi), normalizing the PI error so the
    // configured gains are dimensionless steps. Prior from the nominal
    // actuator slope at mid-band.
    let mut gain_est = 2.3;
    let mut prev: Option<(f64, f64)> = None;
    let mut streak = 0usize;

    for window in 1..=TUNE_ITER_CAP {
        let theta = plant.loop_angle(f, state.phi)?;
        on_window(window, state.phi, theta);
        if (theta - target).abs() < ANGLE_TOL {
            streak += 1;
            if streak >= SETTLED_STREAK {
                return Ok(TuneOutcome { phi: state.phi, windows: window, theta_final: theta });
            }
        } else {
            streak = 0;
        }
        if let Some((phi_prev, theta_prev)) = prev {
            let dphi = state.phi - phi_prev;
            if dphi.abs() > 1e-6 {
                gain_est = ((theta - theta_prev) / dphi).clamp(0.1, 100.0);
            }
        }
        prev = Some((state.phi, theta));
        state = pi_update(state, (target - theta) / gain_est, config.kp, config.ki);
    }
    Err(Error::NoConvergence { f_hz: f, iterations: TUNE_ITER_CAP })
}

/// Drive the measured input angle to the mode target at a fixed
/// frequency. Warm starts from the calibration table when given,
/// otherwise from the nominal inverse of the actuator map.
pub fn tune_to_target(
    tank: &TankParams,
    scc: &SccState,
    f: f64,
    mode: TuneMode,
    config: &ControllerConfig,
    calibration: Option<&CalibrationTable>,
) -> Result<TuneOutcome> {
    let dist = DisturbanceModel::none();
    let plant = Plant { tank, scc, dist: &dist };
    let target = match mode {
        TuneMode::Zpa => 0.0,
        TuneMode::Zvs => config.zvs_margin,
    };
    let w = 2.0 * PI * f;
    let phi0 = match calibration {
        Some(table) => table.phi_at(f),
        None => warm_start_angle(1.0 / (w * w * tank.lp), scc),
    };
    tune_loop(&plant, f, target, phi0, config, &mut |_, _, _| {})
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub trace: SessionTrace,
    pub identification: Option<IdentificationResult>,
    /// Steady state at the final operating point (Run only).
    pub solution: Option<PhasorSolution>,
    pub final_mode: Mode,
    pub f_run: Option<f64>,
    pub phi_final: Option<f64>,
    /// Simulated seconds from Identify entry to Run entry.
    pub identify_to_run_s: Option<f64>,
    pub note: Option<String>,
}

/// Execute one full controller session against the scenario's plant.
pub fn run_session(scenario: &Scenario) -> Result<SessionOutcome> {
    scenario.validate()?;
    let tank = scenario.resolved_tank();
    let plant = Plant {
        tank: &tank,
        scc: &scenario.scc,
        dist: &scenario.disturbances,
    };
    let config = &scenario.controller;
    let mut trace = SessionTrace::default();
    let mut t = 0.0_f64;

    let fault = |mut trace: SessionTrace,
                 t: f64,
                 f: f64,
                 phi: f64,
                 identification: Option<IdentificationResult>,
                 note: String| {
        trace.push(TraceRecord {
            t,
            mode: Mode::Fault,
            f,
            phi,
            theta_meas: 0.0,
            note: note.clone(),
        });
        Ok(SessionOutcome {
            trace,
            identification,
            solution: None,
            final_mode: Mode::Fault,
            f_run: None,
            phi_final: None,
            identify_to_run_s: None,
            note: Some(note),
        })
    };

    // Self-check calibration sweep, secondary open.
    let table = {
        let mut hook_t = t;
        let result = self_check_inner(tank.lp, tank.rp, &scenario.scc, config, &mut |f, phi, theta| {
            hook_t += config.settle_window(f);
            trace.push(TraceRecord {
                t: hook_t,
                mode: Mode::SelfCheck,
                f,
                phi,
                theta_meas: theta,
                note: String::new(),
            });
        });
        t = hook_t;
        match result {
            Ok(table) => table,
            Err(e) => {
                if trace.records.is_empty() {
                    // Domain error before any iteration ran; synthesize an
                    // anchor record so the trace stays well formed.
                    trace.push(TraceRecord {
                        t,
                        mode: Mode::SelfCheck,
                        f: config.band.0,
                        phi: PHI_MIN,
                        theta_meas: 0.0,
                        note: String::new(),
                    });
                }
                return fault(trace, t, config.band.0, PHI_MIN, None, e.to_string());
            }
        }
    };

    // Detune check at the carrier.
    let carrier = crate::measure::REF_FREQ_HZ;
    let phi_carrier = table.phi_at(carrier);
    t += config.settle_window(carrier);
    let theta_carrier = match plant.probe_angle(carrier, phi_carrier) {
        Ok(v) => v,
        Err(e) => return fault(trace, t, carrier, phi_carrier, None, e.to_string()),
    };
    trace.push(TraceRecord {
        t,
        mode: Mode::Idle,
        f: carrier,
        phi: phi_carrier,
        theta_meas: theta_carrier,
        note: String::new(),
    });

    if theta_carrier.abs() <= config.theta_ref {
        // Already tuned; straight to Run at the carrier.
        let solution = plant.operating_point(carrier, phi_carrier)?;
        trace.push(TraceRecord {
            t,
            mode: Mode::Run,
            f: carrier,
            phi: phi_carrier,
            theta_meas: theta_carrier,
            note: String::new(),
        });
        return Ok(SessionOutcome {
            trace,
            identification: None,
            solution: Some(solution),
            final_mode: Mode::Run,
            f_run: Some(carrier),
            phi_final: Some(phi_carrier),
            identify_to_run_s: None,
            note: None,
        });
    }

    // Identify: probe dwells advance time; each probe retunes the SCC to
    // the calibrated angle for its frequency.
    let t_identify = t;
    let identify_cfg = IdentifyConfig {
        first_pair: (84e3, 86e3),
        band: config.band,
    };
    let result = {
        let trace = &mut trace;
        let t = &mut t;
        two_step_identify(
            |f| {
                let phi = table.phi_at(f);
                *t += config.settle_window(f);
                let tan = plant.probe_tangent(f, phi)?;
                trace.push(TraceRecord {
                    t: *t,
                    mode: Mode::Identify,
                    f,
                    phi,
                    theta_meas: tan.atan(),
                    note: String::new(),
                });
                Ok(tan)
            },
            &identify_cfg,
        )
    };

    if result.fault {
        let note = result
            .note
            .clone()
            .unwrap_or_else(|| "identification fault".into());
        let f_last = result.pairs_used.last().map_or(84e3, |p| p.f_n);
        return fault(trace, t, f_last, table.phi_at(f_last), Some(result), note);
    }
    // Band edges accept with a little representation slack, so pin the
    // operating frequency onto the band proper.
    let f_run = result
        .f_s_est
        .expect("non-fault identification carries an estimate")
        .clamp(config.band.0, config.band.1);

    // Tune at the identified frequency.
    let phi0 = table.phi_at(f_run);
    let mut tune_err = None;
    let outcome = {
        let trace = &mut trace;
        let t = &mut t;
        match tune_loop(&plant, f_run, match scenario.mode {
            TuneMode::Zpa => 0.0,
            TuneMode::Zvs => config.zvs_margin,
        }, phi0, config, &mut |_, phi, theta| {
            *t += config.settle_window(f_run);
            trace.push(TraceRecord {
                t: *t,
                mode: Mode::Tune,
                f: f_run,
                phi,
                theta_meas: theta,
                note: String::new(),
            });
        }) {
            Ok(o) => Some(o),
            Err(e) => {
                tune_err = Some(e);
                None
            }
        }
    };
    let outcome = match outcome {
        Some(o) => o,
        None => {
            let e = tune_err.unwrap();
            return fault(trace, t, f_run, phi0, Some(result), e.to_string());
        }
    };

    let t_run = t;
    trace.push(TraceRecord {
        t: t_run,
        mode: Mode::Run,
        f: f_run,
        phi: outcome.phi,
        theta_meas: outcome.theta_final,
        note: String::new(),
    });
    let solution = plant.operating_point(f_run, outcome.phi)?;

    Ok(SessionOutcome {
        trace,
        identification: Some(result),
        solution: Some(solution),
        final_mode: Mode::Run,
        f_run: Some(f_run),
        phi_final: Some(outcome.phi),
        identify_to_run_s: Some(t_run - t_identify),
        note: None,
    })
}

impl Plant<'_> {
    /// Measured tangent of a one-shot probe at `f` with the SCC at `phi`.
    pub fn probe_tangent(&self, f: f64, phi: f64) -> Result<f64> {
        Ok(self.probe_angle(f, phi)?.tan())
    }
}
