//! Switch-controlled capacitor: a fixed part Cp0 in series with a
//! switch-modulated part Cp1 whose apparent value grows with the
//! control angle phi.
//!
//! phi lives in [pi/2, PHI_MAX]. At pi/2 the switches never conduct and
//! the modulated branch is just Cp1; approaching pi the branch looks
//! like an ever larger capacitor, so the series combination climbs
//! toward Cp0 without reaching it.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const PHI_MIN: f64 = PI / 2.0;
/// Stop just short of pi: the apparent capacitance diverges there and
/// the switch dead time makes the last millirad unusable anyway.
pub const PHI_MAX: f64 = PI - 1e-3;

/// SCC hardware description plus its present control angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SccState {
    pub cp0: f64,
    pub cp1: f64,
    /// Control angle, rad.
    pub phi: f64,
    /// Fractional error between commanded and realized modulated
    /// capacitance (component tolerance plus drive delay).
    pub tolerance: f64,
}

impl SccState {
    pub fn validate(&self) -> Result<()> {
        if !(self.cp0 > 0.0) || !(self.cp1 > 0.0) {
            return Err(Error::Domain("SCC capacitances must be positive".into()));
        }
        if !(PHI_MIN..=PHI_MAX).contains(&self.phi) {
            return Err(Error::Domain(format!(
                "control angle {} outside [pi/2, pi - 1e-3]",
                self.phi
            )));
        }
        if self.tolerance.abs() > 0.1 {
            return Err(Error::Domain(format!(
                "SCC tolerance {} outside +-0.1",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Apparent capacitance of the switch-modulated branch at angle `phi`:
/// pi*Cp1 / (2pi - 2phi + sin 2phi). Strictly increasing on the domain.
pub fn scc_equivalent_capacitance(cp1: f64, phi: f64) -> Result<f64> {
    if !(cp1 > 0.0) {
        return Err(Error::Domain(format!("cp1 must be positive, got {cp1}")));
    }
    if !(PHI_MIN..=PHI_MAX).contains(&phi) {
        return Err(Error::Domain(format!(
            "control angle {phi} outside [pi/2, pi - 1e-3]"
        )));
    }
    // Grouped as 2(pi - phi) + sin 2phi so that phi = pi/2 yields the
    // denominator pi exactly and Csc == Cp1 bit for bit.
    let denom = 2.0 * (PI - phi) + (2.0 * phi).sin();
    Ok(cp1 * (PI / denom))
}

/// Series combination of the fixed and modulated parts.
pub fn effective_primary_capacitance(cp0: f64, csc: f64) -> Result<f64> {
    if !(cp0 > 0.0) || !(csc > 0.0) {
        return Err(Error::Domain("capacitances must be positive".into()));
    }
    Ok(cp0 * csc / (cp0 + csc))
}

/// Effective capacitance at `phi` ignoring tolerance.
pub fn nominal_effective_capacitance(scc: &SccState, phi: f64) -> Result<f64> {
    effective_primary_capacitance(scc.cp0, scc_equivalent_capacitance(scc.cp1, phi)?)
}

/// d(effective capacitance)/d(phi), for Newton-style loop gains.
pub fn effective_capacitance_slope(scc: &SccState, phi: f64) -> Result<f64> {
    let csc = scc_equivalent_capacitance(scc.cp1, phi)?;
    let denom = 2.0 * (PI - phi) + (2.0 * phi).sin();
    // dCsc/dphi = pi*Cp1*(2 - 2cos 2phi)/denom^2
    let dcsc = PI * scc.cp1 * (2.0 - 2.0 * (2.0 * phi).cos()) / (denom * denom);
    let t = scc.cp0 / (scc.cp0 + csc);
    Ok(t * t * dcsc)
}

/// Capacitance interval reachable by the SCC and the interval a band of
/// operating frequencies demands of the primary compensation.
#[derive(Debug, Clone, Copy)]
pub struct RangeCheck {
    /// [low, high], F: capacitances needed to resonate Lp across the band.
    pub required: (f64, f64),
    /// [inclusive low, exclusive high), F.
    pub attainable: (f64, f64),
    pub pass: bool,
}

/// Can the SCC tune Lp to zero primary reactance everywhere in `band`?
pub fn capacitance_range_check(lp: f64, scc: &SccState, band: (f64, f64)) -> Result<RangeCheck> {
    if !(lp > 0.0) {
        return Err(Error::Domain(format!("lp must be positive, got {lp}")));
    }
    let (f_lo, f_hi) = band;
    if !(f_lo > 0.0) || f_hi < f_lo {
        return Err(Error::Domain(format!("bad frequency band ({f_lo}, {f_hi})")));
    }
    let cap_at = |f: f64| {
        let w = 2.0 * PI * f;
        1.0 / (w * w * lp)
    };
    // Capacitance needed falls with frequency.
    let required = (cap_at(f_hi), cap_at(f_lo));
    let c_min = effective_primary_capacitance(scc.cp0, scc.cp1)?;
    let attainable = (c_min, scc.cp0);
    // Lower edge is attained at phi = pi/2; allow round-trip noise there.
    // Upper edge is a supremum and stays strict.
    let pass = required.0 >= attainable.0 * (1.0 - 1e-12) && required.1 < attainable.1;
    Ok(RangeCheck { required, attainable, pass })
}

/// Invert the angle-to-capacitance map by bisection. Errors when the
/// target is outside [Cmin, Cp0-epsilon].
pub fn angle_for_capacitance(target: f64, scc: &SccState) -> Result<f64> {
    let lo_cap = nominal_effective_capacitance(scc, PHI_MIN)?;
    let hi_cap = nominal_effective_capacitance(scc, PHI_MAX)?;
    if target < lo_cap || target > hi_cap {
        return Err(Error::SccRange {
            target_f: target,
            lo: lo_cap,
            hi: scc.cp0,
        });
    }
    let (mut a, mut b) = (PHI_MIN, PHI_MAX);
    // Monotone map: plain bisection to ~1e-13 rad is plenty.
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if nominal_effective_capacitance(scc, mid)? < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hw() -> SccState {
        SccState {
            cp0: 35.21e-9,
            cp1: 98.56e-9,
            phi: PHI_MIN,
            tolerance: 0.0,
        }
    }

    #[test]
    fn half_pi_passes_cp1_through() {
        let c = scc_equivalent_capacitance(98.56e-9, PHI_MIN).unwrap();
        assert_eq!(c, 98.56e-9);
    }

    #[test]
    fn three_quarter_pi_value() {
        let c = scc_equivalent_capacitance(98.56e-9, 3.0 * PI / 4.0).unwrap();
        assert!((c - 542.5e-9).abs() < 1e-9, "Csc = {c}");
    }

    #[test]
    fn near_pi_blows_up() {
        let c = scc_equivalent_capacitance(98.56e-9, PHI_MAX).unwrap();
        assert!(c > 100.0 * 98.56e-9);
    }

    #[test]
    fn domain_is_enforced() {
        assert!(scc_equivalent_capacitance(98.56e-9, 1.5).is_err());
        assert!(scc_equivalent_capacitance(98.56e-9, PI).is_err());
        assert!(scc_equivalent_capacitance(-1e-9, 2.0).is_err());
    }

    #[test]
    fn strictly_increasing_over_domain() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let phi = PHI_MIN + (PHI_MAX - PHI_MIN) * i as f64 / 1000.0;
            let c = scc_equivalent_capacitance(98.56e-9, phi).unwrap();
            assert!(c > prev, "not increasing at phi = {phi}");
            prev = c;
        }
    }

    #[test]
    fn series_combination() {
        let c = effective_primary_capacitance(35.21e-9, 98.56e-9).unwrap();
        assert!((c - 25.94e-9).abs() < 0.02e-9, "Cmin = {c}");
        // Equal parts halve.
        let c = effective_primary_capacitance(2e-9, 2e-9).unwrap();
        assert!((c - 1e-9).abs() < 1e-24);
        // Huge modulated branch: approaches Cp0 from below.
        let c = effective_primary_capacitance(35.21e-9, 1e3).unwrap();
        assert!(c < 35.21e-9 && c > 35.21e-9 * (1.0 - 1e-9));
    }

    #[test]
    fn effective_capacitance_bounds() {
        let s = hw();
        let c_min = effective_primary_capacitance(s.cp0, s.cp1).unwrap();
        for i in 0..=500 {
            let phi = PHI_MIN + (PHI_MAX - PHI_MIN) * i as f64 / 500.0;
            let c = nominal_effective_capacitance(&s, phi).unwrap();
            assert!(c >= c_min && c < s.cp0, "c = {c} at phi = {phi}");
        }
    }

    #[test]
    fn range_check_experimental_values() {
        let rc = capacitance_range_check(118.27e-6, &hw(), (79e3, 90e3)).unwrap();
        assert!(rc.pass);
        assert!((rc.required.0 - 26.44e-9).abs() < 0.01e-9, "req lo {}", rc.required.0);
        assert!((rc.required.1 - 34.32e-9).abs() < 0.01e-9, "req hi {}", rc.required.1);
        assert!((rc.attainable.0 - 25.94e-9).abs() < 0.01e-9);
        assert_eq!(rc.attainable.1, 35.21e-9);
    }

    #[test]
    fn range_check_small_fixed_cap_fails() {
        let s = SccState { cp0: 30e-9, ..hw() };
        let rc = capacitance_range_check(118.27e-6, &s, (79e3, 90e3)).unwrap();
        assert!(!rc.pass);
        assert!(rc.required.1 > rc.attainable.1);
    }

    #[test]
    fn range_check_zero_width_band_at_boundary() {
        let s = hw();
        let c_min = effective_primary_capacitance(s.cp0, s.cp1).unwrap();
        let f_star = 1.0 / (2.0 * PI * (118.27e-6 * c_min).sqrt());
        let rc = capacitance_range_check(118.27e-6, &s, (f_star, f_star)).unwrap();
        assert!(rc.pass, "required {:?} vs attainable {:?}", rc.required, rc.attainable);
    }

    #[test]
    fn inverse_map_examples() {
        let s = hw();
        let c_min = effective_primary_capacitance(s.cp0, s.cp1).unwrap();
        let phi = angle_for_capacitance(c_min, &s).unwrap();
        assert!((phi - PHI_MIN).abs() < 1e-6);
        let phi = angle_for_capacitance(29.645e-9, &s).unwrap();
        assert!((phi - 1.963).abs() < 0.002, "phi = {phi}");
        assert!(angle_for_capacitance(40e-9, &s).is_err());
        assert!(angle_for_capacitance(20e-9, &s).is_err());
    }

    #[test]
    fn inverse_map_round_trips() {
        let s = hw();
        let c_min = effective_primary_capacitance(s.cp0, s.cp1).unwrap();
        // Deterministic pseudo-random targets spanning most of the range.
        let mut x = 0.37_f64;
        for _ in 0..100 {
            x = (x * 9301.0 + 0.49297).fract();
            let target = c_min + (0.999 * s.cp0 - c_min) * x;
            let phi = angle_for_capacitance(target, &s).unwrap();
            let back = nominal_effective_capacitance(&s, phi).unwrap();
            assert!(
                ((back - target) / target).abs() < 1e-8,
                "target {target} -> phi {phi} -> {back}"
            );
        }
    }

    #[test]
    fn slope_matches_finite_difference() {
        let s = hw();
        for phi in [1.6, 1.9, 2.4, 2.9] {
            let h = 1e-7;
            let up = nominal_effective_capacitance(&s, phi + h).unwrap();
            let dn = nominal_effective_capacitance(&s, phi - h).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let an = effective_capacitance_slope(&s, phi).unwrap();
            assert!(
                ((an - fd) / fd).abs() < 1e-5,
                "phi {phi}: analytic {an} vs fd {fd}"
            );
        }
    }
}
