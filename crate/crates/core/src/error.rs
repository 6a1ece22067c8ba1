use thiserror::Error;

/// Everything that can go wrong below the CLI layer.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical parameter is outside its valid domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A commanded capacitance cannot be realized by the SCC network.
    #[error("SCC range error: target {target_f:e} F outside attainable [{lo:e}, {hi:e}) F")]
    SccRange { target_f: f64, lo: f64, hi: f64 },

    /// The probe-pair frequency estimate has no real solution.
    #[error("estimation failure: {0}")]
    Estimation(String),

    /// Measured impedance angle reached +-pi/2; the zero-crossing
    /// comparator output is no longer meaningful.
    #[error("measurement saturation: |theta| >= pi/2 at {f_hz} Hz")]
    Saturation { f_hz: f64 },

    /// The mesh system is singular (all resistances zero at exact
    /// anti-resonance); no steady state exists.
    #[error("singular tank system at omega = {omega} rad/s")]
    Singular { omega: f64 },

    /// Primary-side self-check could not calibrate every grid frequency.
    #[error("self-check fault: no convergence at {0:?} Hz")]
    SelfCheck(Vec<f64>),

    /// A closed loop ran out of its iteration budget.
    #[error("control loop did not converge at {f_hz} Hz after {iterations} iterations")]
    NoConvergence { f_hz: f64, iterations: usize },

    /// Scenario content is invalid (bad JSON, unknown key, bad value).
    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
