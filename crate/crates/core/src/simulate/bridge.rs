//! Somers' d targets met through correlation targets.
//!
//! The correlations fed to the Pearson construction are tuned until the
//! constructed table has the wanted d values. The search is a pattern
//! search (coordinate moves with shrinking steps plus pattern moves) on the
//! squared residual; correlations without a table score a flat penalty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{pairs, pearson_construct, validate_one_way, AssociationMeasure, AssociationTarget, CellPolicy};
use crate::error::{Error, Result};
use crate::measures::{somers_matrix, ScoreVectors};
use crate::table::ProbabilityTable;

const PENALTY: f64 = 100.0;
const EXACT: f64 = 1e-6;
const STARTS: usize = 5;
const JITTER: f64 = 0.1;
const MIN_STEP: f64 = 1e-8;
const MAX_EVALS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeResult {
    /// Correlation per pair, pairs in lexicographic order.
    pub rho: Vec<f64>,
    pub table: ProbabilityTable,
    pub achieved: Vec<f64>,
    /// Euclidean distance between the targets and the achieved d values.
    pub residual: f64,
    /// The residual is below `1e-6`.
    pub exact: bool,
}

struct Bridge<'a> {
    one_way: &'a [Vec<f64>],
    scores: &'a ScoreVectors,
    policy: CellPolicy,
    pairs: Vec<(usize, usize)>,
    d_targets: &'a [f64],
    evals: usize,
}

impl Bridge<'_> {
    fn build(&self, rho: &[f64]) -> Result<Option<(ProbabilityTable, Vec<f64>)>> {
        if rho.iter().any(|r| r.abs() > 1.0) {
            return Ok(None);
        }
        let targets: Vec<AssociationTarget> = self
            .pairs
            .iter()
            .zip(rho)
            .map(|(&(i, j), &r)| AssociationTarget::new(i, j, AssociationMeasure::Pearson, r))
            .collect::<Result<_>>()?;
        let table = match pearson_construct(self.one_way, self.scores, &targets, self.policy) {
            Ok(c) => c.table,
            Err(e) if e.is_infeasibility() => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut d = Vec::with_capacity(self.pairs.len());
        for &(i, j) in &self.pairs {
            match somers_matrix(&table.pair_marginal(i, j)?) {
                Ok(v) => d.push(v),
                Err(_) => return Ok(None),
            }
        }
        Ok(Some((table, d)))
    }

    fn loss(&mut self, rho: &[f64]) -> Result<f64> {
        self.evals += 1;
        Ok(match self.build(rho)? {
            Some((_, d)) => d.iter().zip(self.d_targets).map(|(a, b)| (a - b) * (a - b)).sum(),
            None => PENALTY,
        })
    }

    fn explore(&mut self, mut x: Vec<f64>, mut fx: f64, step: f64) -> Result<(Vec<f64>, f64)> {
        for k in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] += dir * step;
                let fy = self.loss(&y)?;
                if fy < fx {
                    x = y;
                    fx = fy;
                    break;
                }
            }
        }
        Ok((x, fx))
    }

    fn search(&mut self, start: Vec<f64>) -> Result<(Vec<f64>, f64)> {
        let mut base = start;
        let mut fb = self.loss(&base)?;
        let mut step = 0.05;
        while step > MIN_STEP && fb > 0.0 && self.evals < MAX_EVALS {
            let (mut x, mut fx) = self.explore(base.clone(), fb, step)?;
            if fx < fb {
                loop {
                    let pattern: Vec<f64> = x.iter().zip(&base).map(|(a, b)| 2.0 * a - b).collect();
                    base = x.clone();
                    fb = fx;
                    let fp = self.loss(&pattern)?;
                    let (y, fy) = self.explore(pattern, fp, step)?;
                    if fy < fb && self.evals < MAX_EVALS {
                        x = y;
                        fx = fy;
                    } else {
                        break;
                    }
                }
            } else {
                step *= 0.5;
            }
        }
        Ok((base, fb))
    }
}

/// Finds correlations whose Pearson construction (under `policy`) has the
/// Somers' d values `d_targets`, given per pair in lexicographic order. The
/// first start is `rho = d`; later starts jitter it. Without an exact hit the
/// nearest table found is returned.
pub fn rho_bridge_for_d(
    d_targets: &[f64],
    policy: CellPolicy,
    one_way: &[Vec<f64>],
    scores: &ScoreVectors,
    seed: u64,
) -> Result<BridgeResult> {
    let shape = validate_one_way(one_way)?;
    let pairs = pairs(shape.n_axes());
    if d_targets.len() != pairs.len() {
        return Err(Error::Argument(format!(
            "{} d targets for {} axis pairs",
            d_targets.len(),
            pairs.len()
        )));
    }
    if d_targets.iter().any(|d| !d.is_finite() || d.abs() > 1.0) {
        return Err(Error::Argument("d targets must lie in [-1, 1]".into()));
    }
    let mut bridge = Bridge {
        one_way,
        scores,
        policy,
        pairs,
        d_targets,
        evals: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in 0..STARTS {
        let start: Vec<f64> = if s == 0 {
            d_targets.to_vec()
        } else {
            d_targets
                .iter()
                .map(|d| (d + rng.random_range(-JITTER..JITTER)).clamp(-1.0, 1.0))
                .collect()
        };
        bridge.evals = 0;
        let (x, fx) = bridge.search(start)?;
        if best.as_ref().is_none_or(|b| fx < b.1) {
            best = Some((x, fx));
        }
        if fx.sqrt() < EXACT {
            break;
        }
    }
    let (rho, _) = best.expect("at least one start");
    let Some((table, achieved)) = bridge.build(&rho)? else {
        return Err(Error::NoTable {
            stage: 0,
            cell: 0,
            detail: "no correlation vector tried gave a table".into(),
        });
    };
    let residual = achieved
        .iter()
        .zip(d_targets)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(BridgeResult {
        rho,
        table,
        achieved,
        residual,
        exact: residual < EXACT,
    })
}
