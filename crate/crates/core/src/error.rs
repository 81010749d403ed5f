use thiserror::Error;

pub type Result<T> = std::result::Result<T, AuditError>;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("row {row} (line {line}): column `{column}`: {message}")]
    InvalidValue {
        row: u64,
        line: u64,
        column: String,
        message: String,
    },

    #[error("row {row} (line {line}): column `{column}`: score out of range [0, 1]: {value}")]
    ScoreOutOfRange {
        row: u64,
        line: u64,
        column: String,
        value: f64,
    },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("record {0}: tau_hat is required for a threshold policy")]
    MissingTau(String),

    #[error("record {0}: nuisance scores (mu0_hat, mu1_hat, tau_hat) are required")]
    MissingScores(String),

    #[error("explicit policy has {got} assignments, dataset has {expected} records")]
    PolicyLength { expected: usize, got: usize },

    #[error("group `{0}` not found")]
    GroupNotFound(String),

    #[error("group `{group}` is degenerate: {reason}")]
    DegenerateGroup { group: String, reason: String },

    #[error("unit {index}: eta = {eta} outside [0, {cap}]")]
    EtaOutOfRange { index: usize, eta: f64, cap: f64 },

    #[error("budget B = {0} outside [0, 1]")]
    BudgetOutOfRange(f64),

    #[error("group `{0}`: inner budget infeasible at every grid point")]
    InfeasibleBudget(String),

    #[error("group `{0}`: every grid point lies on the t = 1 singularity")]
    SingularT(String),

    #[error("empty training cell: {0}")]
    EmptyTrainingCell(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("support of size {size} exceeds the enumeration limit of {limit}")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("bands cannot be combined: {0}")]
    MismatchedBands(String),

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl AuditError {
    pub(crate) fn degenerate(group: &str, reason: impl Into<String>) -> Self {
        AuditError::DegenerateGroup {
            group: group.to_string(),
            reason: reason.into(),
        }
    }

    /// Errors caused by the caller's input rather than by the data or the math.
    pub fn is_usage_error(&self) -> bool {
        matches!(
            self,
            AuditError::GroupNotFound(_)
                | AuditError::Config(_)
                | AuditError::MissingColumn(_)
                | AuditError::BudgetOutOfRange(_)
        )
    }
}
