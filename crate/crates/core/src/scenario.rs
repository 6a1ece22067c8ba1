//! Scenario bundles: one plant description plus controller and
//! disturbance settings, loadable from JSON or picked from a set of
//! built-in parameter sets.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::control::{ControllerConfig, TuneMode};
use crate::error::{Error, Result};
use crate::measure::DisturbanceModel;
use crate::scc::{SccState, PHI_MIN};
use crate::tank::TankParams;

/// FHA equivalent ac resistance of a rectified dc load.
pub fn dc_to_ac_load(r_l_dc: f64) -> f64 {
    8.0 * r_l_dc / (PI * PI)
}

/// RMS fundamental of a full-bridge square wave from a dc bus.
pub fn dc_bus_to_fundamental_rms(u_dc: f64) -> f64 {
    2.0 * SQRT_2 * u_dc / PI
}

/// Optional sweep override carried inside a scenario file. `variable`
/// is one of "k", "delta", "fs".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDirective {
    pub variable: String,
    pub range: (f64, f64),
    pub step: f64,
}

impl SweepDirective {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.variable.as_str(), "k" | "delta" | "fs") {
            return Err(Error::Scenario(format!(
                "unknown sweep variable {:?} (expected k, delta, or fs)",
                self.variable
            )));
        }
        if !(self.step > 0.0) || !self.range.0.is_finite() || self.range.1 < self.range.0 {
            return Err(Error::Scenario(format!(
                "bad sweep range {:?} step {}",
                self.range, self.step
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.range.1 - self.range.0) / self.step).round() as usize;
        (0..=n)
            .map(|i| self.range.0 + self.step * i as f64)
            .filter(|v| *v <= self.range.1 * (1.0 + 1e-12) + self.step * 1e-9)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub tank: TankParams,
    pub scc: SccState,
    #[serde(default)]
    pub disturbances: DisturbanceModel,
    #[serde(default)]
    pub controller: ControllerConfig,
    /// When set, the dc load is mapped to `tank.re` via 8/pi^2 and wins
    /// over the stored `re`.
    #[serde(default)]
    pub dc_load_ohm: Option<f64>,
    #[serde(default = "default_mode")]
    pub mode: TuneMode,
    #[serde(default)]
    pub sweep: Option<SweepDirective>,
}

fn default_mode() -> TuneMode {
    TuneMode::Zpa
}

impl Scenario {
    /// Tank parameters with the dc load mapping applied.
    pub fn resolved_tank(&self) -> TankParams {
        match self.dc_load_ohm {
            Some(rl) => TankParams { re: dc_to_ac_load(rl), ..self.tank },
            None => self.tank,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Scenario("scenario name must not be empty".into()));
        }
        if let Some(rl) = self.dc_load_ohm {
            if !(rl > 0.0) {
                return Err(Error::Scenario(format!("dc load must be positive, got {rl}")));
            }
        }
        self.resolved_tank().validate()?;
        self.scc.validate()?;
        self.disturbances.validate()?;
        self.controller.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        Ok(())
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let s: Scenario =
            serde_json::from_str(json).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Built-in parameter sets. `table1` is the theoretical-calculation
    /// set (both resonators tuned near 85 kHz, direct ac load); the
    /// `table2-*` sets describe the experimental rig with its SCC, dc
    /// load and measurement imperfections; `case1`..`case4` are the four
    /// standard identification-and-retune sessions on that rig.
    pub fn builtin(name: &str) -> Option<Scenario> {
        let experimental = |aligned: bool| -> (TankParams, SccState) {
            let (lp, ls, m) = if aligned {
                (118.27e-6, 91.95e-6, 19.45e-6)
            } else {
                (118.30e-6, 91.58e-6, 11.78e-6)
            };
            let tank = TankParams {
                lp,
                rp: 0.3,
                ls,
                rs: 0.3,
                m,
                cs0: 40.79e-9,
                delta: 0.0,
                cp: 29.645e-9,
                re: dc_to_ac_load(8.0),
                up: dc_bus_to_fundamental_rms(40.0),
            };
            let scc = SccState {
                cp0: 35.21e-9,
                cp1: 98.56e-9,
                phi: PHI_MIN,
                tolerance: 0.02,
            };
            (tank, scc)
        };
        // Sessions on the experimental rig use a plain proportional step
        // through the secant-normalized loop; the slow textbook defaults
        // would spend tens of settling windows per retune.
        let session_controller = ControllerConfig {
            kp: 1.0,
            ki: 0.0,
            ..Default::default()
        };

        let scenario = match name {
            "table1" => {
                let (lp, ls) = (119e-6, 92.23e-6);
                Scenario {
                    name: "table1".into(),
                    tank: TankParams {
                        lp,
                        rp: 0.3,
                        ls,
                        rs: 0.3,
                        m: 0.15 * (lp * ls).sqrt(),
                        cs0: 38.01e-9,
                        delta: 0.0,
                        cp: 29.46e-9,
                        re: 10.0,
                        up: 40.0,
                    },
                    scc: SccState {
                        cp0: 35e-9,
                        cp1: 100e-9,
                        phi: PHI_MIN,
                        tolerance: 0.0,
                    },
                    disturbances: DisturbanceModel::default(),
                    controller: ControllerConfig::default(),
                    dc_load_ohm: None,
                    mode: TuneMode::Zpa,
                    sweep: None,
                }
            }
            "table2-aligned" | "table2-misaligned" => {
                let aligned = name == "table2-aligned";
                let (tank, scc) = experimental(aligned);
                Scenario {
                    name: name.into(),
                    tank,
                    scc,
                    disturbances: DisturbanceModel::calibrated(),
                    controller: session_controller,
                    dc_load_ohm: Some(8.0),
                    mode: TuneMode::Zpa,
                    sweep: None,
                }
            }
            "case1" | "case2" | "case3" | "case4" => {
                let aligned = matches!(name, "case1" | "case2");
                let (mut tank, scc) = experimental(aligned);
                tank.cs0 = if name == "case1" { 40.79e-9 } else { 34.97e-9 };
                let dc = if name == "case4" { 4.0 } else { 8.0 };
                tank.re = dc_to_ac_load(dc);
                let mode = match name {
                    "case2" | "case3" => TuneMode::Zvs,
                    _ => TuneMode::Zpa,
                };
                Scenario {
                    name: name.into(),
                    tank,
                    scc,
                    disturbances: DisturbanceModel::calibrated(),
                    controller: session_controller,
                    dc_load_ohm: Some(dc),
                    mode,
                    sweep: None,
                }
            }
            _ => return None,
        };
        Some(scenario)
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &[
            "table1",
            "table2-aligned",
            "table2-misaligned",
            "case1",
            "case2",
            "case3",
            "case4",
        ]
    }

    /// Apply one `key=value` override with dotted field paths.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        fn num(value: &str) -> Result<f64> {
            value
                .parse()
                .map_err(|_| Error::Scenario(format!("expected a number, got {value:?}")))
        }
        fn flag(value: &str) -> Result<bool> {
            match value {
                "true" | "1" | "on" => Ok(true),
                "false" | "0" | "off" => Ok(false),
                _ => Err(Error::Scenario(format!("expected a boolean, got {value:?}"))),
            }
        }
        match key {
            "name" => self.name = value.to_string(),
            "tank.lp" => self.tank.lp = num(value)?,
            "tank.rp" => self.tank.rp = num(value)?,
            "tank.ls" => self.tank.ls = num(value)?,
            "tank.rs" => self.tank.rs = num(value)?,
            "tank.m" => self.tank.m = num(value)?,
            "tank.cs0" => self.tank.cs0 = num(value)?,
            "tank.delta" => self.tank.delta = num(value)?,
            "tank.cp" => self.tank.cp = num(value)?,
            "tank.re" => self.tank.re = num(value)?,
            "tank.up" => self.tank.up = num(value)?,
            "scc.cp0" => self.scc.cp0 = num(value)?,
            "scc.cp1" => self.scc.cp1 = num(value)?,
            "scc.phi" => self.scc.phi = num(value)?,
            "scc.tolerance" => self.scc.tolerance = num(value)?,
            "disturbances.zcd_dt" => self.disturbances.zcd_dt = num(value)?,
            "disturbances.scc_tol" => self.disturbances.scc_tol = num(value)?,
            "disturbances.load_dist" => self.disturbances.load_dist = num(value)?,
            "disturbances.zcd_enabled" => self.disturbances.zcd_enabled = flag(value)?,
            "disturbances.scc_enabled" => self.disturbances.scc_enabled = flag(value)?,
            "disturbances.load_enabled" => self.disturbances.load_enabled = flag(value)?,
            "controller.theta_ref" => self.controller.theta_ref = num(value)?,
            "controller.zvs_margin" => self.controller.zvs_margin = num(value)?,
            "controller.kp" => self.controller.kp = num(value)?,
            "controller.ki" => self.controller.ki = num(value)?,
            "controller.settle_cycles" => {
                self.controller.settle_cycles = value.parse().map_err(|_| {
                    Error::Scenario(format!("expected an integer, got {value:?}"))
                })?
            }
            "controller.band_lo" => self.controller.band.0 = num(value)?,
            "controller.band_hi" => self.controller.band.1 = num(value)?,
            "controller.grid_step" => self.controller.grid_step = num(value)?,
            "dc_load_ohm" => {
                self.dc_load_ohm = if value == "none" { None } else { Some(num(value)?) }
            }
            "mode" => {
                self.mode = match value {
                    "zpa" => TuneMode::Zpa,
                    "zvs" => TuneMode::Zvs,
                    _ => {
                        return Err(Error::Scenario(format!(
                            "mode must be zpa or zvs, got {value:?}"
                        )))
                    }
                }
            }
            _ => return Err(Error::Scenario(format!("unknown override key {key:?}"))),
        }
        Ok(())
    }

    /// FNV-1a over the canonical JSON form; stable across runs and
    /// platforms for identical content.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("scenario serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.hash())
    }
}
