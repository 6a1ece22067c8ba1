//! Primary-side phase measurement as the controller actually sees it:
//! zero-crossing detection with a fixed timing offset, an SCC that does
//! not realize the commanded capacitance exactly, and a rectified load
//! whose equivalent resistance drifts with operating frequency during
//! probing.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scc::{effective_primary_capacitance, SccState};
use crate::tank::{input_impedance, TankParams};

/// Carrier reference for the load-drift model, Hz.
pub const REF_FREQ_HZ: f64 = 85e3;

/// Measurement and actuation imperfections. Magnitudes live alongside
/// enable flags so sweeps can toggle one effect at a time without
/// losing the configured sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceModel {
    /// Zero-crossing detector timing offset, seconds. Constant within a
    /// session; shows up as a phase offset 2*pi*f*dt.
    pub zcd_dt: f64,
    /// Fractional error of the commanded effective capacitance.
    pub scc_tol: f64,
    /// Fractional equivalent-load change per kHz away from 85 kHz while
    /// probing off-carrier.
    pub load_dist: f64,
    pub zcd_enabled: bool,
    pub scc_enabled: bool,
    pub load_enabled: bool,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        DisturbanceModel {
            zcd_dt: 200e-9,
            scc_tol: 0.02,
            load_dist: 0.0,
            zcd_enabled: true,
            scc_enabled: true,
            load_enabled: true,
        }
    }
}

impl DisturbanceModel {
    pub fn none() -> Self {
        DisturbanceModel {
            zcd_dt: 0.0,
            scc_tol: 0.0,
            load_dist: 0.0,
            zcd_enabled: false,
            scc_enabled: false,
            load_enabled: false,
        }
    }

    /// Defaults plus the load-drift gain fitted so that reconstructed
    /// identification-error curves match the reference magnitudes.
    pub fn calibrated() -> Self {
        DisturbanceModel {
            load_dist: 0.07,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.zcd_dt.abs() > 2e-6 {
            return Err(Error::Domain(format!(
                "zcd_dt {} outside +-2 us",
                self.zcd_dt
            )));
        }
        if self.scc_tol.abs() > 0.1 {
            return Err(Error::Domain(format!(
                "scc_tol {} outside +-0.1",
                self.scc_tol
            )));
        }
        if self.load_dist.abs() > 0.5 {
            return Err(Error::Domain(format!(
                "load_dist {} outside +-0.5",
                self.load_dist
            )));
        }
        Ok(())
    }

    /// Equivalent load seen while probing at `f`.
    pub fn probe_load(&self, re: f64, f: f64) -> f64 {
        if self.load_enabled {
            re * (1.0 + self.load_dist * (f - REF_FREQ_HZ) / 1e3)
        } else {
            re
        }
    }

    /// Realized effective capacitance for a commanded one.
    pub fn realized_capacitance(&self, commanded: f64) -> f64 {
        if self.scc_enabled {
            commanded * (1.0 + self.scc_tol)
        } else {
            commanded
        }
    }
}

/// True impedance angle as reported by the zero-crossing detector.
pub fn measured_phase(theta_true: f64, f: f64, dist: &DisturbanceModel) -> f64 {
    if dist.zcd_enabled {
        theta_true + 2.0 * PI * f * dist.zcd_dt
    } else {
        theta_true
    }
}

/// One probe of the full disturbed pipeline, returning the measured
/// tangent of the input impedance angle at `f`:
///
/// 1. command the capacitance that would null the primary reactance,
/// 2. the SCC realizes it with a fractional error,
/// 3. the equivalent load drifts with the probe frequency,
/// 4. the ZCD reports the resulting angle with its timing offset.
pub fn probe_impedance_angle(
    params: &TankParams,
    scc: &SccState,
    f: f64,
    dist: &DisturbanceModel,
) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::Domain(format!("probe frequency must be positive, got {f}")));
    }
    let w = 2.0 * PI * f;
    let commanded = 1.0 / (w * w * params.lp);
    let c_min = effective_primary_capacitance(scc.cp0, scc.cp1)?;
    if commanded < c_min * (1.0 - 1e-12) || commanded >= scc.cp0 {
        return Err(Error::SccRange {
            target_f: commanded,
            lo: c_min,
            hi: scc.cp0,
        });
    }
    let cp_real = dist.realized_capacitance(commanded);
    let re_probe = dist.probe_load(params.re, f);
    if re_probe <= 0.0 {
        return Err(Error::Domain(format!(
            "load drift drove Re non-positive at {f} Hz"
        )));
    }
    let probed = TankParams {
        cp: cp_real,
        re: re_probe,
        ..*params
    };
    let theta_true = input_impedance(&probed, w)?.arg();
    let theta_meas = measured_phase(theta_true, f, dist);
    if theta_meas.abs() >= PI / 2.0 {
        return Err(Error::Saturation { f_hz: f });
    }
    Ok(theta_meas.tan())
}
