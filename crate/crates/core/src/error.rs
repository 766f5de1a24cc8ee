use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("no consistent joint weight vector: worst residual {residual:.3e} in {equation}")]
    InconsistentWeights { equation: String, residual: f64 },
    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("graph mismatch: {0}")]
    GraphMismatch(String),
    #[error("weight mismatch on shared layers: max difference {0:.3e}")]
    MuMismatch(f64),
    #[error("gauge blocks not unitary within tolerance: defect {0:.3e}")]
    NonUnitaryGauge(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("assembled linear system too large: {size} unknowns (cap {cap})")]
    SystemTooLarge { size: usize, cap: usize },
    #[error("open word: the last letter's right vertical graph must equal the first letter's left vertical graph")]
    OpenWord,
    #[error("level {level} exceeds the open-string level cap {cap}")]
    LevelCap { level: usize, cap: usize },
    #[error("unknown example id: {0:?}")]
    UnknownExample(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
