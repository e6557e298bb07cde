use thiserror::Error;

/// Failures raised by the numeric and geometric routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("precision exhausted in {context}: increase precision")]
    PrecisionExhausted { context: String },

    #[error("value 2^{exponent} exceeds the exponent range of a {precision}-bit session")]
    ExponentOverflow { exponent: i64, precision: u32 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("limit did not stabilise after {iterations} refinements (last gap {last_gap:e})")]
    NonConvergence { iterations: usize, last_gap: f64 },

    #[error("word budget exceeded: {requested} words requested, budget {budget}")]
    BudgetExceeded { requested: u128, budget: u64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(
        "point is not decidable with J_max = {j_max}: circles beyond the truncation may contain it"
    )]
    Indeterminate { j_max: i32 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
