//! Experiment harness: the detuning study, the three-strategy tuning
//! comparison, the identification-error sweep, and the end-to-end case
//! studies. Every function returns a deterministic report.

use std::f64::consts::PI;

use crate::control::{run_session, Mode, SessionOutcome};
use crate::error::{Error, Result};
use crate::identify::{estimate_from_pair, two_step_identify, IdentifyConfig};
use crate::measure::{probe_impedance_angle, DisturbanceModel, REF_FREQ_HZ};
use crate::report::{Cell, SweepReport};
use crate::scenario::Scenario;
use crate::tank::{input_impedance, resonant_frequency, solve_tank, TankParams};

/// Carrier-frequency grids used when a scenario carries no sweep
/// directive.
pub fn default_delta_grid() -> Vec<f64> {
    (-20..=20).map(|i| i as f64 * 0.01).collect()
}

pub fn default_k_list() -> Vec<f64> {
    vec![0.1, 0.2]
}

pub fn default_fs_grid() -> Vec<f64> {
    (0..=44).map(|i| 79e3 + 250.0 * i as f64).collect()
}

fn model_note(report: &mut SweepReport, scenario: &Scenario) {
    report.meta("scenario", &scenario.name);
    report.meta("scenario_hash", scenario.hash_hex());
    if let Some(rl) = scenario.dc_load_ohm {
        report.meta("dc_load_ohm", rl);
        report.meta("ac_equivalent_re_ohm", scenario.resolved_tank().re);
    }
    report.meta(
        "disturbance_note",
        "load-drift gain is a fitted reconstruction (fractional Re change per kHz off-carrier)",
    );
}

/// Secondary natural frequency of the scenario plant, Hz.
pub fn secondary_resonance_hz(tank: &TankParams) -> Result<f64> {
    let cs = crate::tank::detuned_secondary_capacitance(tank.cs0, tank.delta)?;
    Ok(resonant_frequency(tank.ls, cs)? / (2.0 * PI))
}

/// Efficiency and power factor at the carrier as the secondary drifts,
/// for each coupling in `k_list`. The primary stays at its nominal
/// compensation; nobody retunes anything here.
pub fn sweep_detuning(
    scenario: &Scenario,
    k_list: &[f64],
    delta_grid: &[f64],
) -> Result<SweepReport> {
    scenario.validate()?;
    let base = scenario.resolved_tank();
    let mut report = SweepReport::new(
        "carrier-frequency response to secondary detuning",
        &["k", "delta", "eta", "pf", "xs_ohm"],
    );
    model_note(&mut report, scenario);
    report.meta("carrier_hz", REF_FREQ_HZ);

    let w = 2.0 * PI * REF_FREQ_HZ;
    for &k in k_list {
        if !(0.0 < k && k <= 1.0) {
            return Err(Error::Domain(format!("coupling k must lie in (0, 1], got {k}")));
        }
        let m = k * (base.lp * base.ls).sqrt();
        for &delta in delta_grid {
            let p = TankParams { m, delta, ..base };
            p.validate()?;
            let sol = solve_tank(&p, w)?;
            report.push_row(vec![
                Cell::Num(k),
                Cell::Num(delta),
                Cell::Num(sol.eta),
                Cell::Num(sol.pf),
                Cell::Num(sol.xs),
            ]);
        }
    }
    Ok(report)
}

/// Result of hunting for the zero-phase frequency of the full input
/// impedance with a fixed primary compensation.
struct ZpaScan {
    f_hz: f64,
    root_found: bool,
}

/// Scan [70, 100] kHz in 50 Hz steps for Im(Zin) sign changes or exact
/// zeros, refine by bisection, and keep the root nearest the carrier.
/// With no root anywhere, substitute the grid frequency of minimum
/// |Im(Zin)| so the strategy still reports an operating point.
fn zpa_frequency(params: &TankParams) -> Result<ZpaScan> {
    let im_at = |f: f64| -> Result<f64> { Ok(input_impedance(params, 2.0 * PI * f)?.im) };
    let (lo, step, n) = (70e3, 50.0, 600usize);
    let mut roots: Vec<f64> = Vec::new();
    let mut best_flat = (f64::INFINITY, lo);
    let mut prev: Option<(f64, f64)> = None;

    for i in 0..=n {
        let f = lo + step * i as f64;
        let v = im_at(f)?;
        if v.abs() < best_flat.0 {
            best_flat = (v.abs(), f);
        }
        if v == 0.0 {
            // Exact zero on the grid is a root; a sign test would miss it.
            roots.push(f);
            prev = Some((f, v));
            continue;
        }
        if let Some((fp, vp)) = prev {
            if vp != 0.0 && vp * v < 0.0 {
                let (mut a, mut b) = (fp, f);
                let mut va = vp;
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    let vm = im_at(mid)?;
                    if vm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if va * vm < 0.0 {
                        b = mid;
                    } else {
                        a = mid;
                        va = vm;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        prev = Some((f, v));
    }

    match roots
        .into_iter()
        .min_by(|a, b| {
            let da = (a - REF_FREQ_HZ).abs();
            let db = (b - REF_FREQ_HZ).abs();
            da.partial_cmp(&db).unwrap()
        }) {
        Some(f) => Ok(ZpaScan { f_hz: f, root_found: true }),
        None => Ok(ZpaScan { f_hz: best_flat.1, root_found: false }),
    }
}

/// Compare three tuning strategies across secondary drift:
///
/// * primary-only: track the zero-phase frequency of the whole link,
///   compensation fixed;
/// * secondary-only: operate at the secondary's natural frequency,
///   compensation fixed;
/// * double-side: operate at the secondary's natural frequency and
///   retune the primary to zero reactance there.
pub fn compare_methods(scenario: &Scenario, delta_grid: &[f64]) -> Result<SweepReport> {
    scenario.validate()?;
    let base = scenario.resolved_tank();
    let mut report = SweepReport::new(
        "tuning-strategy comparison under secondary drift",
        &[
            "delta",
            "f_po_hz",
            "eta_po",
            "pf_po",
            "f_so_hz",
            "eta_so",
            "pf_so",
            "f_ds_hz",
            "eta_ds",
            "pf_ds",
            "status",
        ],
    );
    model_note(&mut report, scenario);

    for &delta in delta_grid {
        let p = TankParams { delta, ..base };
        p.validate()?;

        let scan = zpa_frequency(&p)?;
        let po = solve_tank(&p, 2.0 * PI * scan.f_hz)?;

        let fs = secondary_resonance_hz(&p)?;
        let so = solve_tank(&p, 2.0 * PI * fs)?;

        let w = 2.0 * PI * fs;
        let retuned = TankParams { cp: 1.0 / (w * w * p.lp), ..p };
        let ds = solve_tank(&retuned, w)?;

        report.push_row(vec![
            Cell::Num(delta),
            Cell::Num(scan.f_hz),
            Cell::Num(po.eta),
            Cell::Num(po.pf),
            Cell::Num(fs),
            Cell::Num(so.eta),
            Cell::Num(so.pf),
            Cell::Num(fs),
            Cell::Num(ds.eta),
            Cell::Num(ds.pf),
            if scan.root_found {
                "ok".into()
            } else {
                "no-zpa-root:min-im-substituted".into()
            },
        ]);
    }
    Ok(report)
}

/// Which imperfections a sweep column enables; magnitudes come from the
/// scenario's disturbance model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceSelection {
    None,
    Load,
    Scc,
    Zcd,
    All,
}

impl DisturbanceSelection {
    pub fn tag(&self) -> &'static str {
        match self {
            DisturbanceSelection::None => "none",
            DisturbanceSelection::Load => "load",
            DisturbanceSelection::Scc => "scc",
            DisturbanceSelection::Zcd => "zcd",
            DisturbanceSelection::All => "all",
        }
    }

    pub fn apply(&self, base: &DisturbanceModel) -> DisturbanceModel {
        match self {
            DisturbanceSelection::None => DisturbanceModel::none(),
            DisturbanceSelection::Load => DisturbanceModel {
                zcd_enabled: false,
                scc_enabled: false,
                load_enabled: true,
                ..*base
            },
            DisturbanceSelection::Scc => DisturbanceModel {
                zcd_enabled: false,
                scc_enabled: true,
                load_enabled: false,
                ..*base
            },
            DisturbanceSelection::Zcd => DisturbanceModel {
                zcd_enabled: true,
                scc_enabled: false,
                load_enabled: false,
                ..*base
            },
            DisturbanceSelection::All => *base,
        }
    }

    pub fn all_columns() -> &'static [DisturbanceSelection] {
        &[
            DisturbanceSelection::None,
            DisturbanceSelection::Load,
            DisturbanceSelection::Scc,
            DisturbanceSelection::Zcd,
            DisturbanceSelection::All,
        ]
    }
}

impl std::str::FromStr for DisturbanceSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DisturbanceSelection::None),
            "load" => Ok(DisturbanceSelection::Load),
            "scc" => Ok(DisturbanceSelection::Scc),
            "zcd" => Ok(DisturbanceSelection::Zcd),
            "all" => Ok(DisturbanceSelection::All),
            _ => Err(Error::Scenario(format!(
                "unknown disturbance selection {s:?} (expected none, load, scc, zcd, or all)"
            ))),
        }
    }
}

/// Identification error versus true secondary resonance, one column
/// group per disturbance selection. Probes run on a loss-free tangent
/// model (the assumption the estimator is built on); the controller
/// path in `run_session` keeps full ESRs.
pub fn identification_error_sweep(
    scenario: &Scenario,
    fs_grid: &[f64],
    first_pair: (f64, f64),
    selections: &[DisturbanceSelection],
) -> Result<SweepReport> {
    scenario.validate()?;
    if selections.is_empty() {
        return Err(Error::Scenario("no disturbance selections given".into()));
    }
    for &fs in fs_grid {
        if !(78e3..=92e3).contains(&fs) {
            return Err(Error::Domain(format!(
                "swept resonance {fs} Hz outside the modeled 78-92 kHz span"
            )));
        }
    }
    if !(first_pair.0 > 0.0) || !(first_pair.1 > 0.0) || first_pair.0 == first_pair.1 {
        return Err(Error::Domain(format!("bad first probe pair {first_pair:?}")));
    }

    let base = scenario.resolved_tank();
    let mut columns: Vec<String> = vec!["fs_hz".into()];
    for sel in selections {
        let tag = sel.tag();
        for c in ["single_hz", "two_step_hz", "theta_m_rad", "theta_n_rad", "status"] {
            columns.push(format!("{c}_{tag}"));
        }
    }
    let col_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut report = SweepReport::new("identification error across secondary resonance", &col_refs);
    model_note(&mut report, scenario);
    report.meta("first_pair_hz", format!("{},{}", first_pair.0, first_pair.1));
    report.meta("probe_model", "loss-free secondary tangent (estimator assumption)");

    let identify_cfg = IdentifyConfig {
        first_pair,
        band: scenario.controller.band,
    };

    for &fs in fs_grid {
        let w = 2.0 * PI * fs;
        let probe_params = TankParams {
            rp: 0.0,
            rs: 0.0,
            cs0: 1.0 / (w * w * base.ls),
            delta: 0.0,
            ..base
        };
        let mut row = vec![Cell::Num(fs)];
        for sel in selections {
            let dist = sel.apply(&scenario.disturbances);
            let probe = |f: f64| probe_impedance_angle(&probe_params, &scenario.scc, f, &dist);

            let t_m = probe(first_pair.0);
            let t_n = probe(first_pair.1);
            let (theta_m, theta_n) = match (&t_m, &t_n) {
                (Ok(a), Ok(b)) => (Cell::Num(a.atan()), Cell::Num(b.atan())),
                _ => (Cell::Empty, Cell::Empty),
            };

            let single = match (&t_m, &t_n) {
                (Ok(a), Ok(b)) => estimate_from_pair(first_pair.0, first_pair.1, *a, *b).ok(),
                _ => None,
            };
            let two = two_step_identify(probe, &identify_cfg);

            let status = if t_m.is_err() || t_n.is_err() {
                "probe-error".to_string()
            } else if two.fault && two.f_s_est.is_none() {
                "estimation-failure".to_string()
            } else if two.fault {
                "out-of-band".to_string()
            } else {
                "ok".to_string()
            };

            row.push(single.map_or(Cell::Empty, Cell::Num));
            row.push(two.f_s_est.map_or(Cell::Empty, Cell::Num));
            row.push(theta_m);
            row.push(theta_n);
            row.push(Cell::Text(status));
        }
        report.push_row(row);
    }
    Ok(report)
}

/// Everything the end-to-end case study produces: the session outcome
/// plus before/after steady-state metrics at the carrier.
#[derive(Debug, Clone)]
pub struct CaseReport {
    pub scenario_name: String,
    pub f_s_true_hz: f64,
    pub f_s_est_hz: Option<f64>,
    pub err_hz: Option<f64>,
    pub eta_before: f64,
    pub pf_before: f64,
    pub theta_before_rad: f64,
    pub eta_after: Option<f64>,
    pub pf_after: Option<f64>,
    pub theta_after_rad: Option<f64>,
    pub pout_after_w: Option<f64>,
    pub f_run_hz: Option<f64>,
    pub identify_to_run_s: Option<f64>,
    pub final_mode: Mode,
    pub note: Option<String>,
    pub outcome: SessionOutcome,
}

/// Run the full identification-and-retune session and compare the
/// operating point against staying at the carrier with the nominal
/// compensation.
pub fn run_case(scenario: &Scenario) -> Result<CaseReport> {
    scenario.validate()?;
    let tank = scenario.resolved_tank();
    let f_s_true = secondary_resonance_hz(&tank)?;

    // Untuned baseline: carrier frequency, nominal fixed compensation.
    let before = solve_tank(&tank, 2.0 * PI * REF_FREQ_HZ)?;

    let outcome = run_session(scenario)?;
    let (eta_after, pf_after, theta_after, pout_after) = match &outcome.solution {
        Some(sol) => (Some(sol.eta), Some(sol.pf), Some(sol.theta), Some(sol.pout)),
        None => (None, None, None, None),
    };
    let f_s_est = outcome.identification.as_ref().and_then(|id| id.f_s_est);

    Ok(CaseReport {
        scenario_name: scenario.name.clone(),
        f_s_true_hz: f_s_true,
        f_s_est_hz: f_s_est,
        err_hz: f_s_est.map(|est| est - f_s_true),
        eta_before: before.eta,
        pf_before: before.pf,
        theta_before_rad: before.theta,
        eta_after,
        pf_after,
        theta_after_rad: theta_after,
        pout_after_w: pout_after,
        f_run_hz: outcome.f_run,
        identify_to_run_s: outcome.identify_to_run_s,
        final_mode: outcome.final_mode,
        note: outcome.note.clone(),
        outcome,
    })
}

impl CaseReport {
    pub fn to_report(&self, scenario: &Scenario) -> SweepReport {
        let mut report = SweepReport::new(
            "identification-and-retune case study",
            &[
                "case",
                "f_s_true_hz",
                "f_s_est_hz",
                "err_hz",
                "f_run_hz",
                "eta_before",
                "eta_after",
                "delta_eta",
                "pf_before",
                "pf_after",
                "theta_after_deg",
                "identify_to_run_us",
                "final_mode",
                "status",
            ],
        );
        model_note(&mut report, scenario);
        report.meta(
            "timing_note",
            format!(
                "simulated time; assumes the tank settles within {} carrier cycles per actuation",
                scenario.controller.settle_cycles
            ),
        );
        let opt = |v: Option<f64>| v.map_or(Cell::Empty, Cell::Num);
        report.push_row(vec![
            Cell::Text(self.scenario_name.clone()),
            Cell::Num(self.f_s_true_hz),
            opt(self.f_s_est_hz),
            opt(self.err_hz),
            opt(self.f_run_hz),
            Cell::Num(self.eta_before),
            opt(self.eta_after),
            opt(self.eta_after.map(|e| e - self.eta_before)),
            Cell::Num(self.pf_before),
            opt(self.pf_after),
            opt(self.theta_after_rad.map(|t| t.to_degrees())),
            opt(self.identify_to_run_s.map(|t| t * 1e6)),
            Cell::Text(self.final_mode.to_string()),
            Cell::Text(self.note.clone().unwrap_or_else(|| "ok".into())),
        ]);
        report
    }
}
