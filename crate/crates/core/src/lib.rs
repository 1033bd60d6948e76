//! Contingency-table analysis and simulation.
//!
//! Tables are dense arrays stored in canonical flat order (last axis
//! fastest). The modules cover pairwise association measures, the exact
//! decomposition behind Simpson's paradox, homogeneity tests for partial
//! correlations, three-way interaction measures for 2x2x2 tables, the
//! polytope of tables sharing given marginals, maximum-entropy fits, and
//! simulation of tables with prescribed pairwise associations.
//!
//! All axis and category indices in this crate are zero-based.

pub mod datasets;
pub mod error;
pub mod homogeneity;
pub mod maxent;
pub mod measures;
pub mod polytope;
pub mod simpson;
pub mod simulate;
pub mod stats;
pub mod table;
pub mod threeway;

pub use error::{Error, Result};
pub use table::{
    ContingencyTable, MarginalSet, PairMargin, ProbabilityTable, TableDocument, TableKind,
    TableShape,
};

#[cfg(test)]
pub(crate) mod testutil;
