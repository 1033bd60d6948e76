//! The mixture method for gamma and Somers' d targets.
//!
//! Each pair gets the two-way table `(1 - lambda) p0 + lambda p_opt`, where
//! `p0` is independence and `p_opt` the extremal table with the sign of the
//! target; `lambda` is found by bisection. The pair tables then become
//! two-way margin restraints and an LP decides whether a full table exists.

use serde::Serialize;

use super::{validate_one_way, AssociationMeasure, AssociationTarget};
use crate::error::{Error, Result};
use crate::maxent;
use crate::measures::{gamma_matrix, max_association_table, somers_matrix};
use crate::polytope::{self, Region};
use crate::table::{MarginalSet, PairMargin, ProbabilityTable};

const MEASURE_TOL: f64 = 1e-10;
const MAX_BISECT: usize = 200;

fn evaluate(measure: AssociationMeasure, m: &[Vec<f64>]) -> Result<f64> {
    match measure {
        AssociationMeasure::Gamma => gamma_matrix(m),
        AssociationMeasure::SomersD => somers_matrix(m),
        AssociationMeasure::Pearson => Err(Error::Argument("the mixture method takes gamma or Somers' d targets".into())),
    }
}

fn mix(p0: &[Vec<f64>], popt: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
    p0.iter()
        .zip(popt)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - lambda) * x + lambda * y).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairLambda {
    pub pair: (usize, usize),
    pub lambda: f64,
    /// Measure value of the extremal table.
    pub attainable: f64,
    pub achieved: f64,
    pub two_way: Vec<Vec<f64>>,
}

/// Solves `m[(1 - lambda) p0 + lambda p_opt] = target` for one pair.
pub fn lambda_for_pair(p: &[f64], q: &[f64], measure: AssociationMeasure, target: f64, pair: (usize, usize)) -> Result<PairLambda> {
    let p0: Vec<Vec<f64>> = p.iter().map(|a| q.iter().map(|b| a * b).collect()).collect();
    let sign = if target < 0.0 { -1 } else { 1 };
    let popt = max_association_table(p, q, sign)?.to_matrix()?;
    let attainable = evaluate(measure, &popt)?;
    let base = evaluate(measure, &p0)?;
    let f = |lambda: f64| -> Result<f64> { Ok(evaluate(measure, &mix(&p0, &popt, lambda))? - target) };
    let done = |lambda: f64, achieved: f64| PairLambda {
        pair,
        lambda,
        attainable,
        achieved,
        two_way: mix(&p0, &popt, lambda),
    };
    if (base - target).abs() < MEASURE_TOL {
        return Ok(done(0.0, base));
    }
    if (attainable - target).abs() < MEASURE_TOL {
        return Ok(done(1.0, attainable));
    }
    if target.abs() > attainable.abs() || (attainable - target).signum() == (base - target).signum() {
        return Err(Error::TargetUnreachable {
            i: pair.0,
            j: pair.1,
            target,
            attainable,
        });
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let lo_sign = (base - target).signum();
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v.abs() < MEASURE_TOL {
            return Ok(done(mid, v + target));
        }
        if v.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let v = f(mid)?;
    if v.abs() < MEASURE_TOL {
        Ok(done(mid, v + target))
    } else {
        Err(Error::NoConvergence(format!("lambda bisection for pair {pair:?} ended at residual {v:e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeeConstruction {
    pub pairs: Vec<PairLambda>,
    /// The maximum-entropy table among all tables with these two-way
    /// margins.
    pub table: ProbabilityTable,
}

/// Builds the pair tables and, if they fit together, a full table.
/// Infeasible combinations give `Error::Infeasible`.
pub fn lee_construct(one_way: &[Vec<f64>], measure: AssociationMeasure, targets: &[AssociationTarget]) -> Result<LeeConstruction> {
    let shape = validate_one_way(one_way)?;
    let mut solved = Vec::with_capacity(targets.len());
    for t in targets {
        t.validate()?;
        if t.measure != measure {
            return Err(Error::Argument(format!("target for pair {:?} has a different measure", t.pair)));
        }
        let (i, j) = t.pair;
        if j >= shape.n_axes() {
            return Err(Error::Index(format!("pair ({i}, {j}) on a {}-way table", shape.n_axes())));
        }
        if solved.iter().any(|s: &PairLambda| s.pair == t.pair) {
            return Err(Error::Argument(format!("pair ({i}, {j}) has more than one target")));
        }
        solved.push(lambda_for_pair(&one_way[i], &one_way[j], measure, t.value, t.pair)?);
    }
    let margins = MarginalSet {
        grand_total: 1.0,
        one_way: one_way.to_vec(),
        two_way: solved
            .iter()
            .map(|s| PairMargin {
                row_axis: s.pair.0,
                col_axis: s.pair.1,
                totals: s.two_way.clone(),
            })
            .collect(),
    };
    let system = polytope::build_constraints(&shape, &margins)?;
    Region::new(&system).map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible("no table has these pairwise tables as its two-way margins".into()),
        other => other,
    })?;
    let fit = maxent::max_entropy(&polytope::solve_affine(&shape, &system)?, &[])?;
    Ok(LeeConstruction {
        pairs: solved,
        table: fit.fitted,
    })
}

pub fn gamma_construct(one_way: &[Vec<f64>], targets: &[AssociationTarget]) -> Result<LeeConstruction> {
    lee_construct(one_way, AssociationMeasure::Gamma, targets)
}

pub fn somers_construct(one_way: &[Vec<f64>], targets: &[AssociationTarget]) -> Result<LeeConstruction> {
    lee_construct(one_way, AssociationMeasure::SomersD, targets)
}
