//! Construction and sampling of tables with prescribed one-way margins and
//! pairwise associations.
//!
//! Axis pairs and cells are 0-based throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{self, ConstraintSystem};
use crate::table::{MarginalSet, TableShape, PROB_TOL};

mod bridge;
mod lee;
mod pearson;
mod sample;
mod search;

pub use bridge::{rho_bridge_for_d, BridgeResult};
pub use lee::{gamma_construct, lambda_for_pair, lee_construct, somers_construct, LeeConstruction, PairLambda};
pub use pearson::{
    pearson_bounds, pearson_construct, rho_constraint, AssociationBounds, PearsonConstruction, Stage, StageCase,
};
pub use sample::{inversion_sample, inversion_sample_with};
pub use search::{nonlinear_assoc_bounds, witness_search, NonlinearBounds, SearchOptions, Witness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationMeasure {
    Pearson,
    Gamma,
    #[serde(alias = "somers")]
    SomersD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationTarget {
    pub pair: (usize, usize),
    pub measure: AssociationMeasure,
    pub value: f64,
}

impl AssociationTarget {
    pub fn new(i: usize, j: usize, measure: AssociationMeasure, value: f64) -> Result<Self> {
        let t = Self {
            pair: (i, j),
            measure,
            value,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let (i, j) = self.pair;
        if i >= j {
            return Err(Error::Argument(format!("target pair ({i}, {j}) must have i < j")));
        }
        if !self.value.is_finite() || self.value.abs() > 1.0 {
            return Err(Error::Argument(format!(
                "target for pair ({i}, {j}) is {}, outside [-1, 1]",
                self.value
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellPolicy {
    #[default]
    Mean,
    Ind,
    Min,
    Max,
}

/// A function of the pairwise associations to bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "terms", rename_all = "snake_case")]
pub enum Objective {
    /// `sum_k sign_k * m(pair_k)`.
    Sum(Vec<((usize, usize), f64)>),
    /// The common value of `sign_k * m(pair_k)`, all terms held equal.
    Common(Vec<((usize, usize), f64)>),
}

impl Objective {
    pub fn terms(&self) -> &[((usize, usize), f64)] {
        match self {
            Objective::Sum(t) | Objective::Common(t) => t,
        }
    }

    /// Sum of all pairs with weight one.
    pub fn all_pairs(n_axes: usize) -> Self {
        Objective::Sum(pairs(n_axes).into_iter().map(|p| (p, 1.0)).collect())
    }

    fn validate(&self, n_axes: usize) -> Result<()> {
        if self.terms().is_empty() {
            return Err(Error::Argument("objective has no terms".into()));
        }
        for &((i, j), _) in self.terms() {
            if i >= j || j >= n_axes {
                return Err(Error::Argument(format!(
                    "objective pair ({i}, {j}) is not an ordered pair of {n_axes} axes"
                )));
            }
        }
        Ok(())
    }
}

/// All pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn pairs(n_axes: usize) -> Vec<(usize, usize)> {
    (0..n_axes).flat_map(|i| (i + 1..n_axes).map(move |j| (i, j))).collect()
}

pub(crate) fn validate_one_way(one_way: &[Vec<f64>]) -> Result<TableShape> {
    for (axis, p) in one_way.iter().enumerate() {
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Argument(format!("margin of axis {axis} has a negative or non-finite entry")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > PROB_TOL {
            return Err(Error::Argument(format!("margin of axis {axis} sums to {s}, expected 1")));
        }
    }
    TableShape::new(one_way.iter().map(Vec::len).collect())
}

pub(crate) fn one_way_margins(one_way: &[Vec<f64>]) -> MarginalSet {
    MarginalSet {
        grand_total: 1.0,
        one_way: one_way.to_vec(),
        two_way: Vec::new(),
    }
}

pub(crate) fn one_way_system(shape: &TableShape, one_way: &[Vec<f64>]) -> Result<ConstraintSystem> {
    polytope::build_constraints(shape, &one_way_margins(one_way))
}

pub(crate) fn independence_cells(shape: &TableShape, one_way: &[Vec<f64>]) -> Vec<f64> {
    shape
        .indices()
        .map(|ix| ix.iter().enumerate().map(|(a, &k)| one_way[a][k]).product())
        .collect()
}

/// Two-way marginal of flat cells without building a table.
pub(crate) fn pair_matrix(shape: &TableShape, cells: &[f64], i: usize, j: usize) -> Vec<Vec<f64>> {
    let dims = shape.dims();
    let mut m = vec![vec![0.0; dims[j]]; dims[i]];
    for (ix, p) in shape.indices().zip(cells) {
        m[ix[i]][ix[j]] += p;
    }
    m
}

/// For every cell, its row and column category on the pair `(i, j)`.
pub(crate) fn pair_index(shape: &TableShape, i: usize, j: usize) -> Vec<(usize, usize)> {
    shape.indices().map(|ix| (ix[i], ix[j])).collect()
}

/// Snaps tiny negative round-off to zero.
pub(crate) fn clean_cells(cells: &mut [f64]) {
    for v in cells.iter_mut() {
        if *v < 0.0 && *v > -1e-9 {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_validation() {
        assert!(AssociationTarget::new(0, 1, AssociationMeasure::Gamma, 0.5).is_ok());
        assert!(AssociationTarget::new(1, 0, AssociationMeasure::Gamma, 0.5).is_err());
        assert!(AssociationTarget::new(0, 1, AssociationMeasure::Gamma, 1.5).is_err());
    }

    #[test]
    fn objective_json() {
        let o: Objective = serde_json::from_str(r#"{"kind":"common","terms":[[[0,1],-1.0],[[0,2],1.0]]}"#).unwrap();
        assert_eq!(o, Objective::Common(vec![((0, 1), -1.0), ((0, 2), 1.0)]));
        assert!(Objective::Sum(vec![((1, 1), 1.0)]).validate(3).is_err());
    }

    #[test]
    fn pair_listing() {
        assert_eq!(pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(pairs(1).is_empty());
    }

    #[test]
    fn one_way_checks() {
        assert!(validate_one_way(&[vec![0.5, 0.5], vec![0.2, 0.7]]).is_err());
        assert!(validate_one_way(&[vec![0.5, 0.5], vec![-0.2, 1.2]]).is_err());
        let shape = validate_one_way(&[vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        let ind = independence_cells(&shape, &[vec![0.5, 0.5], vec![0.2, 0.8]]);
        assert_eq!(ind, vec![0.1, 0.4, 0.1, 0.4]);
        assert_eq!(pair_matrix(&shape, &ind, 0, 1), vec![vec![0.1, 0.4], vec![0.1, 0.4]]);
    }
}
