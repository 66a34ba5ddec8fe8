use thiserror::Error;

#[derive(Debug, Error)]
pub enum CarveError {
    #[error("ensemble must contain at least one qubit")]
    NoQubits,

    #[error("Dicke level {m} out of range 0..={n_qubits}")]
    LevelOutOfRange { m: usize, n_qubits: usize },

    #[error("basis mismatch: expected {expected} qubits, got {got}")]
    BasisMismatch { expected: usize, got: usize },

    #[error("invalid physical parameter {name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },

    #[error("dispersive approximation invalid: g/Delta = {ratio:.3} exceeds {threshold}")]
    NotDispersive { ratio: f64, threshold: f64 },

    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),

    #[error("time step {dt} exceeds the stability bound {max} set by the fastest scale")]
    StepTooLarge { dt: f64, max: f64 },

    #[error("trace drifted by {drift:e} at t = {time} us (limit {limit:e})")]
    TraceDrift { drift: f64, time: f64, limit: f64 },

    #[error("post-selected block carries zero weight; the carve annihilated everything")]
    CarveAnnihilated,

    #[error("survival never crossed {threshold:.4} before t = {t_max} us")]
    NoCrossing { threshold: f64, t_max: f64 },

    #[error("state is not a valid {kind}: {reason}")]
    InvalidState { kind: &'static str, reason: String },

    #[error("carve cannot reach suppression {target:e} within {max_duration} us; needs {required} us")]
    UnreachableSuppression { target: f64, required: f64, max_duration: f64 },

    #[error("phase {0} rad exceeds |phi| <= pi")]
    PhaseOutOfRange(f64),

    #[error("amplitude reduction must be non-negative, got {0}")]
    NegativeAmplitude(f64),

    #[error("detuning in linewidths must satisfy b >= 1, got {0}")]
    BadLinewidthDetuning(f64),

    #[error("a pulse cannot disturb its own level {0}")]
    SelfDisturbance(usize),

    #[error("correction iteration diverges: 2x = {two_x:.4} >= 1; needs C/N >= {required_c_over_n:.1}")]
    NonConvergent { two_x: f64, required_c_over_n: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CarveError>;
