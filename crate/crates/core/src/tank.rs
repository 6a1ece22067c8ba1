//! Fundamental-harmonic steady state of the series-series tank.
//!
//! Two coupled meshes, RMS phasors, e^{+j omega t} convention:
//!
//! ```text
//!   Up = (Rp + jXp) Ip + j omega M Is
//!    0 = j omega M Ip + (Rs + Re + jXs) Is
//! ```
//!
//! Everything here is closed form; no iteration, no state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full electrical description of one operating point of the link.
///
/// `cp` is the effective primary compensation capacitance actually in
/// circuit (a fixed part or the SCC-derived value); `cs0`/`delta`
/// describe the secondary capacitor as built and its drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankParams {
    pub lp: f64,
    pub rp: f64,
    pub ls: f64,
    pub rs: f64,
    pub m: f64,
    pub cs0: f64,
    pub delta: f64,
    pub cp: f64,
    pub re: f64,
    pub up: f64,
}

impl TankParams {
    /// Secondary capacitance with drift applied.
    pub fn cs(&self) -> f64 {
        // validate() already bounds delta; recheck is cheap and keeps
        // direct struct construction safe.
        self.cs0 * (1.0 + self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.lp, "lp"),
            (self.ls, "ls"),
            (self.cp, "cp"),
            (self.cs0, "cs0"),
            (self.re, "re"),
        ];
        for (v, name) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rp < 0.0 || self.rs < 0.0 {
            return Err(Error::Domain("negative winding resistance".into()));
        }
        if self.up < 0.0 || !self.up.is_finite() {
            return Err(Error::Domain(format!("up must be >= 0, got {}", self.up)));
        }
        if !(0.0..=1.0).contains(&coupling_coefficient(self.m, self.lp, self.ls)?) {
            return Err(Error::Domain("mutual inductance exceeds sqrt(Lp*Ls)".into()));
        }
        if !(-0.5..=0.5).contains(&self.delta) {
            return Err(Error::Domain(format!(
                "delta must lie in [-0.5, 0.5], got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Solved steady state at one frequency.
#[derive(Debug, Clone, Copy)]
pub struct PhasorSolution {
    pub omega: f64,
    pub i_p: Complex64,
    pub i_s: Complex64,
    pub zin: Complex64,
    /// Input impedance angle, rad. Positive = inductive (current lags).
    pub theta: f64,
    pub eta: f64,
    pub pf: f64,
    pub pout: f64,
    pub xp: f64,
    pub xs: f64,
}

/// 1/sqrt(LC) in rad/s.
pub fn resonant_frequency(l: f64, c: f64) -> Result<f64> {
    if !(l > 0.0) || !(c > 0.0) {
        return Err(Error::Domain(format!(
            "resonant_frequency needs L > 0 and C > 0, got ({l}, {c})"
        )));
    }
    Ok(1.0 / (l * c).sqrt())
}

/// Secondary capacitance under a fractional drift: Cs0 * (1 + delta).
pub fn detuned_secondary_capacitance(cs0: f64, delta: f64) -> Result<f64> {
    if !(cs0 > 0.0) {
        return Err(Error::Domain(format!("cs0 must be positive, got {cs0}")));
    }
    if 1.0 + delta <= 0.0 {
        return Err(Error::Domain(format!(
            "detuning fraction {delta} would make Cs non-positive"
        )));
    }
    Ok(cs0 * (1.0 + delta))
}

/// Series reactances (Xp, Xs) of both resonators at `omega`.
pub fn reactances(params: &TankParams, omega: f64) -> Result<(f64, f64)> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    let cs = detuned_secondary_capacitance(params.cs0, params.delta)?;
    let xp = omega * params.lp - 1.0 / (omega * params.cp);
    let xs = omega * params.ls - 1.0 / (omega * cs);
    Ok((xp, xs))
}

/// M / sqrt(Lp Ls).
pub fn coupling_coefficient(m: f64, lp: f64, ls: f64) -> Result<f64> {
    if !(lp > 0.0) || !(ls > 0.0) {
        return Err(Error::Domain("coupling needs positive inductances".into()));
    }
    if m < 0.0 {
        return Err(Error::Domain(format!("mutual inductance must be >= 0, got {m}")));
    }
    let k = m / (lp * ls).sqrt();
    if k > 1.0 {
        return Err(Error::Domain(format!("coupling coefficient {k} exceeds 1")));
    }
    Ok(k)
}

/// Input impedance seen by the inverter: the primary branch plus the
/// reflected secondary, Rp + jXp + (omega M)^2 / (Rs + Re + jXs).
pub fn input_impedance(params: &TankParams, omega: f64) -> Result<Complex64> {
    let (xp, xs) = reactances(params, omega)?;
    let zp = Complex64::new(params.rp, xp);
    let zs = Complex64::new(params.rs + params.re, xs);
    let wm = omega * params.m;
    Ok(zp + wm * wm / zs)
}

/// ac-ac efficiency. Depends on (omega, M, Re, Rp, Rs, Xs) only; the
/// primary reactance moves phase, not loss split.
fn efficiency(params: &TankParams, omega: f64, xs: f64) -> f64 {
    let wm2 = (omega * params.m) * (omega * params.m);
    let rse = params.rs + params.re;
    let d = rse * rse + xs * xs;
    let denom = d * params.rp + wm2 * rse;
    if denom == 0.0 {
        return 0.0; // lossless limit: no dissipation anywhere
    }
    wm2 * params.re / denom
}

/// Solve both mesh currents and derive every steady-state figure of merit.
pub fn solve_tank(params: &TankParams, omega: f64) -> Result<PhasorSolution> {
    let (xp, xs) = reactances(params, omega)?;
    let zp = Complex64::new(params.rp, xp);
    let zs = Complex64::new(params.rs + params.re, xs);
    let zm = Complex64::new(0.0, omega * params.m);

    // det = zp*zs - zm^2 = zp*zs + (omega M)^2
    let det = zp * zs - zm * zm;
    let scale = zp.norm() * zs.norm() + zm.norm_sqr();
    if det.norm() <= 1e-15 * scale {
        return Err(Error::Singular { omega });
    }

    let up = Complex64::new(params.up, 0.0);
    let i_p = up * zs / det;
    let i_s = -up * zm / det;

    // Zin from the closed form, not Up/Ip, so it exists for Up = 0 too.
    let wm = omega * params.m;
    let zin = zp + wm * wm / zs;
    let theta = zin.arg();
    let pf = zin.re / zin.norm();
    let pout = i_s.norm_sqr() * params.re;

    Ok(PhasorSolution {
        omega,
        i_p,
        i_s,
        zin,
        theta,
        eta: efficiency(params, omega, xs),
        pf,
        pout,
        xp,
        xs,
    })
}

/// (eta, pf, Pout) at one frequency.
pub fn transfer_metrics(params: &TankParams, omega: f64) -> Result<(f64, f64, f64)> {
    let sol = solve_tank(params, omega)?;
    Ok((sol.eta, sol.pf, sol.pout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Theoretical-calculation parameter set used throughout: both sides
    // tuned near 85 kHz, ESRs 0.3 ohm.
    fn base_params() -> TankParams {
        TankParams {
            lp: 119e-6,
            rp: 0.3,
            ls: 92.23e-6,
            rs: 0.3,
            m: 15.71451e-6, // k = 0.15
            cs0: 38.01e-9,
            delta: 0.0,
            cp: 29.46e-9,
            re: 10.0,
            up: 40.0,
        }
    }

    #[test]
    fn resonant_frequency_identity() {
        assert_eq!(resonant_frequency(1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn resonant_frequency_design_points() {
        let f = resonant_frequency(119e-6, 29.46e-9).unwrap() / (2.0 * PI);
        assert!((f - 85_000.0).abs() < 100.0, "primary design point, got {f}");
        let f = resonant_frequency(91.95e-6, 40.79e-9).unwrap() / (2.0 * PI);
        assert!((f - 82_180.0).abs() < 10.0, "case I secondary, got {f}");
    }

    #[test]
    fn resonant_frequency_rejects_nonpositive() {
        assert!(resonant_frequency(0.0, 1e-9).is_err());
        assert!(resonant_frequency(1e-6, -1e-9).is_err());
    }

    #[test]
    fn detuning_is_multiplicative() {
        assert_eq!(detuned_secondary_capacitance(38.01e-9, 0.0).unwrap(), 38.01e-9);
        let hi = detuned_secondary_capacitance(38.01e-9, 0.2).unwrap();
        assert!((hi - 45.612e-9).abs() < 1e-20);
        let lo = detuned_secondary_capacitance(38.01e-9, -0.2).unwrap();
        assert!((lo - 30.408e-9).abs() < 1e-20);
        assert!(detuned_secondary_capacitance(38.01e-9, -1.0).is_err());
    }

    #[test]
    fn reactances_vanish_at_design_frequency() {
        let p = base_params();
        let w = 2.0 * PI * 85e3;
        let (xp, xs) = reactances(&p, w).unwrap();
        assert!(xp.abs() < 0.1, "Xp = {xp}");
        assert!(xs.abs() < 0.1, "Xs = {xs}");
    }

    #[test]
    fn secondary_reactance_below_resonance() {
        let p = TankParams {
            ls: 91.95e-6,
            cs0: 40.79e-9,
            ..base_params()
        };
        let (_, xs) = reactances(&p, 2.0 * PI * 84e3).unwrap();
        assert!((xs - 2.080).abs() < 0.005, "Xs = {xs}");
    }

    #[test]
    fn primary_reactance_zero_when_cp_matches() {
        let w = 2.0 * PI * 85e3;
        let p = TankParams {
            cp: 1.0 / (w * w * 119e-6),
            ..base_params()
        };
        let (xp, _) = reactances(&p, w).unwrap();
        assert!(xp.abs() < 1e-9, "Xp = {xp}");
    }

    #[test]
    fn solve_matches_independent_oracle() {
        let p = base_params();
        let sol = solve_tank(&p, 2.0 * PI * 85e3).unwrap();
        assert!((sol.zin.re - 7.138).abs() < 0.01, "Re Zin = {}", sol.zin.re);
        assert!(sol.zin.im.abs() < 0.01, "Im Zin = {}", sol.zin.im);
        assert!((sol.i_p.norm() - 5.60).abs() < 0.01, "|Ip| = {}", sol.i_p.norm());
        assert!((sol.i_s.norm() - 4.57).abs() < 0.01, "|Is| = {}", sol.i_s.norm());
        let lag = (sol.i_s / sol.i_p).arg().to_degrees();
        assert!((lag + 90.0).abs() < 0.1, "Is lags Ip by {lag} deg");
    }

    #[test]
    fn solve_residual_is_tiny() {
        let p = base_params();
        let w = 2.0 * PI * 83.7e3;
        let sol = solve_tank(&p, w).unwrap();
        let zp = Complex64::new(p.rp, sol.xp);
        let zs = Complex64::new(p.rs + p.re, sol.xs);
        let zm = Complex64::new(0.0, w * p.m);
        let r1 = (Complex64::new(p.up, 0.0) - (zp * sol.i_p + zm * sol.i_s)).norm();
        let r2 = (zm * sol.i_p + zs * sol.i_s).norm();
        assert!(r1 <= 1e-9 * p.up, "mesh 1 residual {r1}");
        assert!(r2 <= 1e-9 * p.up, "mesh 2 residual {r2}");
    }

    #[test]
    fn uncoupled_secondary_carries_no_current() {
        let p = TankParams { m: 0.0, ..base_params() };
        let w = 2.0 * PI * 85e3;
        let sol = solve_tank(&p, w).unwrap();
        assert_eq!(sol.i_s, Complex64::new(0.0, 0.0));
        let expect = Complex64::new(p.up, 0.0) / Complex64::new(p.rp, sol.xp);
        assert!((sol.i_p - expect).norm() <= 1e-12 * expect.norm());
        // Closed-form input impedance collapses to the bare primary branch.
        let zin = input_impedance(&p, w).unwrap();
        assert_eq!(zin, Complex64::new(p.rp, sol.xp));
    }

    #[test]
    fn dead_source_gives_zero_currents() {
        let p = TankParams { up: 0.0, ..base_params() };
        let sol = solve_tank(&p, 2.0 * PI * 85e3).unwrap();
        assert_eq!(sol.i_p, Complex64::new(0.0, 0.0));
        assert_eq!(sol.i_s, Complex64::new(0.0, 0.0));
        assert_eq!(sol.pout, 0.0);
    }

    #[test]
    fn resonant_secondary_makes_input_reactance_equal_xp() {
        // Xs = 0: the reflected impedance is purely real, so Im(Zin) == Xp
        // bit for bit. Power-of-two values make the cancellation exact.
        let w = 131072.0; // 2^17
        let p0 = TankParams {
            lp: 1e-4,
            rp: 0.3,
            ls: 6.103515625e-5, // 2^-14, so w*Ls = 8 exactly
            rs: 0.3,
            m: 5e-5,
            cs0: 9.5367431640625e-7, // 2^-20, so 1/(w*Cs) = 8 exactly
            delta: 0.0,
            cp: 1e-6,
            re: 10.0,
            up: 40.0,
        };
        let (xp0, xs0) = reactances(&p0, w).unwrap();
        assert_eq!(xs0, 0.0);
        let zin = input_impedance(&p0, w).unwrap();
        assert_eq!(zin.im, xp0);
    }

    #[test]
    fn metrics_at_resonance() {
        let p = base_params();
        let (eta, pf, _) = transfer_metrics(&p, 2.0 * PI * 85e3).unwrap();
        assert!((eta - 0.930).abs() < 0.002, "eta = {eta}");
        assert!((pf - 1.000).abs() < 0.001, "pf = {pf}");
    }

    #[test]
    fn efficiency_cross_checks_against_power_ratio() {
        let p = base_params();
        for f in [80e3, 83.5e3, 85e3, 87e3, 90e3] {
            let w = 2.0 * PI * f;
            let sol = solve_tank(&p, w).unwrap();
            let pin = (Complex64::new(p.up, 0.0) * sol.i_p.conj()).re;
            let ratio = sol.i_s.norm_sqr() * p.re / pin;
            assert!(
                (sol.eta - ratio).abs() <= 1e-9 * ratio,
                "f = {f}: closed form {} vs power ratio {ratio}",
                sol.eta
            );
        }
    }

    #[test]
    fn efficiency_ignores_primary_compensation_bitwise() {
        let w = 2.0 * PI * 85e3;
        let p = base_params();
        let eta0 = solve_tank(&p, w).unwrap().eta;
        for scale in [0.5, 0.8, 1.3, 2.0] {
            let q = TankParams { cp: p.cp * scale, ..p };
            let eta = solve_tank(&q, w).unwrap().eta;
            assert_eq!(eta.to_bits(), eta0.to_bits(), "cp scale {scale}");
        }
    }

    #[test]
    fn efficiency_peaks_where_secondary_reactance_vanishes() {
        let p = base_params();
        let w = 2.0 * PI * 85e3;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in -40..=40 {
            let delta = i as f64 * 0.005;
            let q = TankParams { delta, ..p };
            let sol = solve_tank(&q, w).unwrap();
            if sol.eta > best.0 {
                best = (sol.eta, sol.xs.abs());
            }
        }
        // The winning grid point is the one with the smallest |Xs|.
        let min_abs_xs = (-40..=40)
            .map(|i| {
                let q = TankParams { delta: i as f64 * 0.005, ..p };
                solve_tank(&q, w).unwrap().xs.abs()
            })
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best.1, min_abs_xs);
    }

    #[test]
    fn vanishing_load_kills_efficiency() {
        let p = TankParams { re: 1e-9, ..base_params() };
        let (eta, _, _) = transfer_metrics(&p, 2.0 * PI * 85e3).unwrap();
        assert!(eta < 1e-6, "eta = {eta}");
    }

    #[test]
    fn coupling_examples() {
        assert_eq!(coupling_coefficient(0.0, 1e-6, 1e-6).unwrap(), 0.0);
        let k = coupling_coefficient(19.45e-6, 118.27e-6, 91.95e-6).unwrap();
        assert!((k - 0.1865).abs() < 0.0005, "aligned k = {k}");
        let k = coupling_coefficient(11.78e-6, 118.30e-6, 91.58e-6).unwrap();
        assert!((k - 0.1132).abs() < 0.0005, "misaligned k = {k}");
        assert!(coupling_coefficient(2e-6, 1e-6, 1e-6).is_err());
    }

    #[test]
    fn validate_rejects_bad_params() {
        let good = base_params();
        assert!(good.validate().is_ok());
        assert!(TankParams { lp: 0.0, ..good }.validate().is_err());
        assert!(TankParams { rp: -0.1, ..good }.validate().is_err());
        assert!(TankParams { delta: 0.7, ..good }.validate().is_err());
        assert!(TankParams { m: 200e-6, ..good }.validate().is_err());
    }

    #[test]
    fn singular_only_at_lossless_antiresonance() {
        // All resistances zero and Xp*Xs = (omega M)^2: determinant vanishes.
        let w = 2.0 * PI * 85e3;
        let p = base_params();
        let wm2 = (w * p.m) * (w * p.m);
        // Pick Cs for some Xs > 0, then solve Cp for the matching Xp.
        let q0 = TankParams { rp: 0.0, rs: 0.0, re: 1e-300, delta: -0.1, ..p };
        let (_, xs) = reactances(&q0, w).unwrap();
        let xp_needed = wm2 / xs;
        let cp = 1.0 / (w * (w * p.lp - xp_needed));
        let q = TankParams { cp, ..q0 };
        assert!(matches!(solve_tank(&q, w), Err(Error::Singular { .. })));
    }
}
