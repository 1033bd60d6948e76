use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("degenerate stratum: category {category} of axis {axis} has zero mass")]
    DegenerateStratum { axis: usize, category: usize },

    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("inconsistent margins: {0}")]
    InconsistentMargins(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The feasible region of a linear system with nonnegativity is empty.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The table demanded by a null hypothesis has a nonpositive cell.
    #[error("infeasible null hypothesis: {0}")]
    InfeasibleNull(String),

    /// Sequential construction found no table at the given elimination stage.
    #[error("no table satisfies the targets (stage {stage}, cell {cell}): {detail}")]
    NoTable {
        stage: usize,
        cell: usize,
        detail: String,
    },

    #[error("target unreachable for pair ({i}, {j}): target {target} exceeds attainable {attainable}")]
    TargetUnreachable {
        i: usize,
        j: usize,
        target: f64,
        attainable: f64,
    },

    #[error("no convergence: {0}")]
    NoConvergence(String),
}

impl Error {
    /// True for findings about the data (no admissible table exists), as
    /// opposed to malformed input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::Infeasible(_) | Error::InfeasibleNull(_) | Error::NoTable { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
