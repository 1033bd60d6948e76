//! Exact decomposition of a two-way LD into its stratum-weighted partial LDs
//! plus a sum of per-stratum products.
//!
//! For categories `i`, `j` of axes X and Y and a stratifying axis Z,
//!
//! ```text
//! D(X_i, Y_j) - sum_k p_k D(X_i, Y_j | Z_k) = sum_k D(X_i, Z_k) D(Y_j, Z_k) / p_k
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{ld_conditional, ld_pair, pearson_phi};
use crate::table::{ContingencyTable, ProbabilityTable};

const VANISHING_LD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub two_way_ld: f64,
    pub weighted_partial_ld: f64,
    pub partial_lds: Vec<f64>,
    pub stratum_weights: Vec<f64>,
    pub per_stratum_summands: Vec<f64>,
    pub difference: f64,
    /// `D(X_i, Z_1) D(Y_j, Z_1) / (p_1 p_2)` when Z has two categories.
    pub single_summand: Option<f64>,
    pub relative_ratio: Option<f64>,
}

impl DecompositionReport {
    /// `difference - sum(per_stratum_summands)`; zero up to rounding.
    pub fn identity_residual(&self) -> f64 {
        self.difference - self.per_stratum_summands.iter().sum::<f64>()
    }
}

fn check_axes(t: &ProbabilityTable, axis_a: usize, axis_b: usize, strat_axis: usize) -> Result<()> {
    for a in [axis_a, axis_b, strat_axis] {
        if a >= t.shape().n_axes() {
            return Err(Error::Index(format!("axis {a} (table has {} axes)", t.shape().n_axes())));
        }
    }
    if axis_a == axis_b || axis_a == strat_axis || axis_b == strat_axis {
        return Err(Error::Argument("the two measured axes and the stratifying axis must be distinct".into()));
    }
    Ok(())
}

pub fn decompose(
    t: &ProbabilityTable,
    axis_a: usize,
    cat_a: usize,
    axis_b: usize,
    cat_b: usize,
    strat_axis: usize,
) -> Result<DecompositionReport> {
    check_axes(t, axis_a, axis_b, strat_axis)?;
    let weights = t.one_way(strat_axis)?;
    if let Some(k) = weights.iter().position(|&w| w <= 0.0) {
        return Err(Error::DegenerateStratum { axis: strat_axis, category: k });
    }
    let two_way_ld = ld_pair(t, axis_a, cat_a, axis_b, cat_b)?;
    let mut partial_lds = Vec::with_capacity(weights.len());
    let mut summands = Vec::with_capacity(weights.len());
    for (k, &pk) in weights.iter().enumerate() {
        partial_lds.push(ld_conditional(t, axis_a, cat_a, axis_b, cat_b, strat_axis, k)?);
        let dxz = ld_pair(t, axis_a, cat_a, strat_axis, k)?;
        let dyz = ld_pair(t, axis_b, cat_b, strat_axis, k)?;
        summands.push(dxz * dyz / pk);
    }
    let weighted: f64 = partial_lds.iter().zip(&weights).map(|(d, w)| d * w).sum();
    let single_summand = if weights.len() == 2 {
        let dxz = ld_pair(t, axis_a, cat_a, strat_axis, 0)?;
        let dyz = ld_pair(t, axis_b, cat_b, strat_axis, 0)?;
        Some(dxz * dyz / (weights[0] * weights[1]))
    } else {
        None
    };
    let difference = two_way_ld - weighted;
    let relative_ratio = (two_way_ld.abs() > VANISHING_LD).then(|| difference / two_way_ld);
    Ok(DecompositionReport {
        two_way_ld,
        weighted_partial_ld: weighted,
        partial_lds,
        stratum_weights: weights,
        per_stratum_summands: summands,
        difference,
        single_summand,
        relative_ratio,
    })
}

/// `(D - Dbar) / D` evaluated through correlations:
/// `sum_k (1 - p_k) rho(X_i, Z_k) rho(Y_j, Z_k) / rho(X_i, Y_j)`.
pub fn relative_difference(
    t: &ProbabilityTable,
    axis_a: usize,
    cat_a: usize,
    axis_b: usize,
    cat_b: usize,
    strat_axis: usize,
) -> Result<f64> {
    check_axes(t, axis_a, axis_b, strat_axis)?;
    let d = ld_pair(t, axis_a, cat_a, axis_b, cat_b)?;
    if d.abs() <= VANISHING_LD {
        return Err(Error::UndefinedRatio(format!("two-way LD {d:e} vanishes")));
    }
    let rho_ab = pearson_phi(t, axis_a, cat_a, axis_b, cat_b)?;
    let weights = t.one_way(strat_axis)?;
    let mut total = 0.0;
    for (k, &pk) in weights.iter().enumerate() {
        if pk <= 0.0 || pk >= 1.0 {
            continue;
        }
        let rx = pearson_phi(t, axis_a, cat_a, strat_axis, k)?;
        let ry = pearson_phi(t, axis_b, cat_b, strat_axis, k)?;
        total += (1.0 - pk) * rx * ry;
    }
    Ok(total / rho_ab)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    pub stratum: usize,
    pub d13: f64,
    pub d23: f64,
    pub p3: f64,
    pub d12_given: f64,
    pub rho12_given: f64,
}

/// Per-stratum LD summary of a 2x2xK table: LD of each of the first two
/// variables with stratum `k` versus the rest, the stratum weight, and the
/// conditional LD and correlation within the stratum. All LDs use the first
/// category of axes 0 and 1.
pub fn berkeley_report(table: &ContingencyTable) -> Result<Vec<StratumRow>> {
    let dims = table.dims();
    if dims.len() != 3 || dims[0] != 2 || dims[1] != 2 {
        return Err(Error::Argument(format!("expected a 2x2xK table, got {dims:?}")));
    }
    let p = table.to_probabilities()?;
    let weights = p.one_way(2)?;
    (0..dims[2])
        .map(|k| {
            let cond = p.condition(2, k)?;
            Ok(StratumRow {
                stratum: k,
                d13: ld_pair(&p, 0, 0, 2, k)?,
                d23: ld_pair(&p, 1, 0, 2, k)?,
                p3: weights[k],
                d12_given: ld_pair(&cond, 0, 0, 1, 0)?,
                rho12_given: pearson_phi(&cond, 0, 0, 1, 0)?,
            })
        })
        .collect()
}
