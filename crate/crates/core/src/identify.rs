//! Secondary resonance identification from primary-side phase probes.
//!
//! One probe pair (f_m, f_n) plus the ratio of measured impedance-angle
//! tangents pins down the secondary's natural frequency in closed form,
//! assuming the primary is compensated (Xp ~ 0) and the ESRs are small
//! against the reflected load. A second probe pair near the first
//! estimate shrinks the extrapolation error.

use crate::error::{Error, Result};
use crate::tank::detuned_secondary_capacitance;

/// One probe pair and the tangents measured there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePair {
    pub f_m: f64,
    pub f_n: f64,
    pub tan_m: f64,
    pub tan_n: f64,
}

#[derive(Debug, Clone)]
pub struct IdentificationResult {
    /// None when the procedure faulted before producing a usable estimate.
    pub f_s_est: Option<f64>,
    pub pairs_used: Vec<ProbePair>,
    /// 1 when the first estimate was accepted, 2 after a refinement probe.
    pub steps: u8,
    /// Whether the final estimate lies inside the allowed operating band.
    pub in_band: bool,
    pub fault: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct IdentifyConfig {
    /// First probe pair, Hz.
    pub first_pair: (f64, f64),
    /// Estimates outside this band are faults, Hz.
    pub band: (f64, f64),
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            first_pair: (84e3, 86e3),
            band: (79e3, 90e3),
        }
    }
}

/// tan(theta) of an ideal probe: compensated primary, zero ESRs. The
/// sign is positive below the secondary resonance (capacitive reflected
/// reactance flips the input angle inductive) and negative above.
pub fn ideal_tangent(f: f64, ls: f64, cs0: f64, delta: f64, re: f64) -> Result<f64> {
    if !(f > 0.0) || !(ls > 0.0) || !(re > 0.0) {
        return Err(Error::Domain(format!(
            "ideal_tangent needs positive f, ls, re, got ({f}, {ls}, {re})"
        )));
    }
    let cs = detuned_secondary_capacitance(cs0, delta)?;
    let w = 2.0 * std::f64::consts::PI * f;
    Ok((1.0 / (w * cs) - w * ls) / re)
}

/// Closed-form secondary resonance from two probes:
///
/// ```text
///   k = tan_m / tan_n
///   f_s^2 = f_m f_n (f_m - k f_n) / (f_n - k f_m)
/// ```
///
/// Degenerate tangents mean a probe landed on the resonance itself and
/// that probe frequency is returned directly.
pub fn estimate_from_pair(f_m: f64, f_n: f64, tan_m: f64, tan_n: f64) -> Result<f64> {
    if !(f_m > 0.0) || !(f_n > 0.0) {
        return Err(Error::Domain(format!(
            "probe frequencies must be positive, got ({f_m}, {f_n})"
        )));
    }
    if tan_m == 0.0 {
        return Ok(f_m);
    }
    if tan_n == 0.0 {
        return Ok(f_n);
    }
    let k = tan_m / tan_n;
    if (k - 1.0).abs() < 1e-6 {
        return Err(Error::Estimation(format!(
            "tangent ratio {k} too close to 1 at probes ({f_m}, {f_n}) Hz"
        )));
    }
    let den = f_n - k * f_m;
    if den == 0.0 {
        return Err(Error::Estimation(format!(
            "degenerate probe geometry at ({f_m}, {f_n}) Hz"
        )));
    }
    let radicand = f_m * f_n * (f_m - k * f_n) / den;
    if radicand <= 0.0 {
        return Err(Error::Estimation(format!(
            "no real resonance for probes ({f_m}, {f_n}) Hz, ratio {k}"
        )));
    }
    Ok(radicand.sqrt())
}

/// Where to probe after the first estimate: inside the first pair means
/// accept, otherwise move the pair toward the estimate. The shared
/// frequency of the new pair is deliberately one already probed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandSelect {
    Accept,
    Second(f64, f64),
}

pub fn select_probe_band(first_estimate: f64, first_pair: (f64, f64)) -> BandSelect {
    let (f_m, f_n) = first_pair;
    let width = f_n - f_m;
    if first_estimate > f_n {
        BandSelect::Second(f_n, f_n + width)
    } else if first_estimate < f_m {
        BandSelect::Second(f_m, f_m - width)
    } else {
        BandSelect::Accept
    }
}

/// Run the full two-step procedure against a probe callback that
/// returns the measured tangent at a frequency. The callback is the
/// only window onto the plant; secondary parameters never enter here.
pub fn two_step_identify<P>(mut probe: P, config: &IdentifyConfig) -> IdentificationResult
where
    P: FnMut(f64) -> Result<f64>,
{
    let (f_m, f_n) = config.first_pair;
    let fault = |pairs: Vec<ProbePair>, steps: u8, note: String| IdentificationResult {
        f_s_est: None,
        pairs_used: pairs,
        steps,
        in_band: false,
        fault: true,
        note: Some(note),
    };

    let tan_m = match probe(f_m) {
        Ok(t) => t,
        Err(e) => return fault(vec![], 1, e.to_string()),
    };
    let tan_n = match probe(f_n) {
        Ok(t) => t,
        Err(e) => return fault(vec![], 1, e.to_string()),
    };
    let pair1 = ProbePair { f_m, f_n, tan_m, tan_n };

    let est1 = match estimate_from_pair(f_m, f_n, tan_m, tan_n) {
        Ok(v) => v,
        Err(e) => return fault(vec![pair1], 1, e.to_string()),
    };

    let (est, pairs, steps) = match select_probe_band(est1, config.first_pair) {
        BandSelect::Accept => (est1, vec![pair1], 1),
        BandSelect::Second(g_m, g_n) => {
            // One of the two frequencies was already probed; reuse it.
            let lookup = |f: f64| {
                if f == f_m {
                    Some(tan_m)
                } else if f == f_n {
                    Some(tan_n)
                } else {
                    None
                }
            };
            let tan_gm = match lookup(g_m) {
                Some(t) => t,
                None => match probe(g_m) {
                    Ok(t) => t,
                    Err(e) => return fault(vec![pair1], 2, e.to_string()),
                },
            };
            let tan_gn = match lookup(g_n) {
                Some(t) => t,
                None => match probe(g_n) {
                    Ok(t) => t,
                    Err(e) => return fault(vec![pair1], 2, e.to_string()),
                },
            };
            let pair2 = ProbePair { f_m: g_m, f_n: g_n, tan_m: tan_gm, tan_n: tan_gn };
            let est2 = match estimate_from_pair(g_m, g_n, tan_gm, tan_gn) {
                Ok(v) => v,
                Err(e) => return fault(vec![pair1, pair2], 2, e.to_string()),
            };
            (est2, vec![pair1, pair2], 2)
        }
    };

    // Edges are part of the band; the relative slack keeps an estimate
    // landing exactly on one from being rejected over representation
    // noise in the closed form.
    let in_band = est >= config.band.0 * (1.0 - 1e-9) && est <= config.band.1 * (1.0 + 1e-9);
    IdentificationResult {
        f_s_est: Some(est),
        pairs_used: pairs,
        steps,
        in_band,
        fault: !in_band,
        note: if in_band {
            None
        } else {
            Some(format!(
                "estimate {est} Hz outside operating band [{}, {}] Hz",
                config.band.0, config.band.1
            ))
        },
    }
}
