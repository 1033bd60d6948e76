//! Maximum-entropy tables under linear restraints.
//!
//! The fit runs Newton ascent on the free cells of an affine
//! parametrization. Cells the constraints force to zero are detected by
//! linear programming and removed before the ascent starts; the start point
//! is the average of the LP vertices maximizing each cell, which is feasible
//! and strictly positive on every remaining cell.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polytope::{self, AffineParametrization, Region, Sense};
use crate::stats::{chi2_sf, pearson_chi2};
use crate::table::{ContingencyTable, MarginalSet, ProbabilityTable, TableShape};

pub use crate::polytope::LinearConstraint;

const ZERO_CELL: f64 = 1e-9;
const MIN_CELL: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-10;
/// Largest gradient norm accepted when no step along the Newton direction
/// changes the entropy any more.
const STALL_TOL: f64 = 1e-8;
const ENTROPY_FLOOR: f64 = 1e-8;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxEntResult {
    pub fitted: ProbabilityTable,
    pub entropy: f64,
    pub iterations: usize,
    pub max_constraint_residual: f64,
    pub gradient_norm: f64,
    /// Free cells of the input parametrization minus extra constraints.
    pub df: usize,
    /// Cells the restraints force to zero.
    pub zero_cells: Vec<usize>,
}

/// Entropy as a function of the free cells of a parametrization; cells in
/// `skip` are identically zero and left out.
#[derive(Debug, Clone)]
pub struct EntropyObjective {
    constant: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
    active: Vec<usize>,
}

impl EntropyObjective {
    pub fn new(par: &AffineParametrization<f64>, skip: &[usize]) -> Self {
        let active = (0..par.constant.len()).filter(|c| !skip.contains(c)).collect();
        Self {
            constant: par.constant.clone(),
            coeffs: par.coeffs.clone(),
            active,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    pub fn cells(&self, y: &[f64]) -> Vec<f64> {
        self.constant
            .iter()
            .zip(&self.coeffs)
            .map(|(c0, row)| c0 + row.iter().zip(y).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }

    /// `-sum p ln p` over the active cells; `None` if one is not positive.
    pub fn value(&self, y: &[f64]) -> Option<f64> {
        let p = self.cells(y);
        let mut h = 0.0;
        for &c in &self.active {
            if p[c] <= 0.0 {
                return None;
            }
            h -= p[c] * p[c].ln();
        }
        Some(h)
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let p = self.cells(y);
        let mut g = vec![0.0; self.n_vars()];
        for &c in &self.active {
            let w = -(p[c].ln() + 1.0);
            for (gk, a) in g.iter_mut().zip(&self.coeffs[c]) {
                *gk += a * w;
            }
        }
        g
    }

    /// Negated Hessian, `sum_c a_c a_c' / p_c`.
    fn curvature(&self, p: &[f64]) -> DMatrix<f64> {
        let f = self.n_vars();
        let mut m = DMatrix::zeros(f, f);
        for &c in &self.active {
            let a = &self.coeffs[c];
            let w = 1.0 / p[c];
            for k in 0..f {
                if a[k] == 0.0 {
                    continue;
                }
                for l in 0..f {
                    m[(k, l)] += a[k] * a[l] * w;
                }
            }
        }
        m
    }
}

fn system_residual(par: &AffineParametrization<f64>, cells: &[f64]) -> f64 {
    par.system
        .matrix
        .iter()
        .zip(&par.system.rhs)
        .map(|(row, b)| (row.iter().zip(cells).map(|(a, x)| a * x).sum::<f64>() - b).abs())
        .fold(0.0, f64::max)
}

/// Entropy maximizer over the tables described by `par` (which must
/// describe probabilities) and the extra equality constraints.
pub fn max_entropy(par: &AffineParametrization<f64>, extra: &[LinearConstraint]) -> Result<MaxEntResult> {
    let d = par.shape.n_cells();
    let system = par.system.with_constraints(extra)?;
    let mut region = Region::new(&system)?;
    let total: f64 = region.point().iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "maximum entropy needs a probability region; feasible tables sum to {total}"
        )));
    }
    let mut start = vec![0.0; d];
    let mut zero_cells = Vec::new();
    for c in 0..d {
        let mut w = vec![0.0; d];
        w[c] = 1.0;
        let best = region.optimize(&w, Sense::Maximize)?;
        if best.value <= ZERO_CELL {
            zero_cells.push(c);
        }
        for (s, x) in start.iter_mut().zip(&best.x) {
            *s += x.max(0.0) / d as f64;
        }
    }
    let mut pinned = system.clone();
    for &c in &zero_cells {
        let mut row = vec![0.0; d];
        row[c] = 1.0;
        pinned.matrix.push(row);
        pinned.rhs.push(0.0);
        pinned.rows.push(polytope::RowKind::Extra { index: extra.len() + c });
    }
    let reduced = polytope::solve_affine(&par.shape, &pinned)?;
    let objective = EntropyObjective::new(&reduced, &zero_cells);
    let mut y = reduced.free_values_of(&start);
    let mut iterations = 0;
    let mut gnorm = 0.0;
    if objective.n_vars() > 0 {
        let mut h = objective
            .value(&y)
            .ok_or_else(|| Error::Degenerate("start point is not strictly positive".into()))?;
        loop {
            let g = objective.gradient(&y);
            gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < GRAD_TOL || iterations >= MAX_ITER {
                break;
            }
            iterations += 1;
            let p = objective.cells(&y);
            let curv = objective.curvature(&p);
            let gv = DVector::from_column_slice(&g);
            let step = match curv.clone().cholesky() {
                Some(ch) => ch.solve(&gv),
                None => curv.lu().solve(&gv).unwrap_or_else(|| gv.clone()),
            };
            let decrement = gv.dot(&step);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
                let cells = objective.cells(&trial);
                let positive = objective.active.iter().all(|&c| cells[c] >= MIN_CELL);
                if positive {
                    if let Some(h_new) = objective.value(&trial) {
                        if h_new >= h + 1e-4 * alpha * decrement || decrement < 1e-12 {
                            y = trial;
                            h = h_new;
                            accepted = true;
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                let g = objective.gradient(&y);
                gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                break;
            }
        }
        if gnorm > STALL_TOL {
            return Err(Error::NoConvergence(format!(
                "entropy ascent stopped with gradient norm {gnorm:e}"
            )));
        }
    }
    let mut cells = objective.cells(&y);
    for &c in &zero_cells {
        cells[c] = 0.0;
    }
    for v in cells.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let residual = system_residual(&reduced, &cells);
    let entropy = entropy_of(&cells);
    let fitted = ProbabilityTable::from_dims(par.shape.dims(), cells)?;
    Ok(MaxEntResult {
        fitted,
        entropy,
        iterations,
        max_constraint_residual: residual,
        gradient_norm: gnorm,
        df: par.n_free().saturating_sub(extra.len()),
        zero_cells,
    })
}

/// `-sum p ln p` over cells of at least `1e-8`.
pub fn entropy_of(cells: &[f64]) -> f64 {
    cells
        .iter()
        .filter(|&&p| p >= ENTROPY_FLOOR)
        .map(|p| -p * p.ln())
        .sum()
}

/// Maximum-entropy fit to the given margins (counts or probabilities).
pub fn fit_margins(shape: &TableShape, margins: &MarginalSet, extra: &[LinearConstraint]) -> Result<MaxEntResult> {
    let n = margins.grand_total;
    if n <= 0.0 {
        return Err(Error::InconsistentMargins("grand total must be positive".into()));
    }
    let scaled = MarginalSet {
        grand_total: 1.0,
        one_way: margins.one_way.iter().map(|v| v.iter().map(|x| x / n).collect()).collect(),
        two_way: margins
            .two_way
            .iter()
            .map(|pm| crate::table::PairMargin {
                row_axis: pm.row_axis,
                col_axis: pm.col_axis,
                totals: pm.totals.iter().map(|r| r.iter().map(|x| x / n).collect()).collect(),
            })
            .collect(),
    };
    let par = polytope::parametrize(shape, &scaled)?;
    max_entropy(&par, extra)
}

/// The fit without three-way interaction: all zero-, one- and two-way
/// margins of the observed table.
pub fn fit_no_threeway(observed: &ContingencyTable) -> Result<MaxEntResult> {
    fit_margins(observed.shape(), &MarginalSet::from_table(observed)?, &[])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofResult {
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    /// Some observed count sits on a fitted zero cell.
    pub infinite: bool,
}

/// Pearson chi-square of observed counts against `n * fitted`, over cells
/// with expectation at least `1e-8 n`.
pub fn chi_square_gof(observed: &ContingencyTable, fitted: &ProbabilityTable, df: usize) -> Result<GofResult> {
    if observed.dims() != fitted.dims() {
        return Err(Error::Argument(format!(
            "observed shape {:?} differs from fitted shape {:?}",
            observed.dims(),
            fitted.dims()
        )));
    }
    let n = observed.total();
    let expected: Vec<f64> = fitted.cells().iter().map(|p| p * n).collect();
    match pearson_chi2(observed.cells(), &expected, 1e-8 * n)? {
        Some(chi_square) => Ok(GofResult {
            chi_square,
            df,
            p_value: chi2_sf(chi_square, df)?,
            infinite: false,
        }),
        None => Ok(GofResult {
            chi_square: f64::INFINITY,
            df,
            p_value: 0.0,
            infinite: true,
        }),
    }
}

/// `n_11k / n - p_11k` per stratum of a 2x2xK table.
pub fn threeway_interaction_params(observed: &ContingencyTable, fitted: &ProbabilityTable) -> Result<Vec<f64>> {
    let dims = observed.dims();
    if dims.len() != 3 || dims[0] != 2 || dims[1] != 2 || fitted.dims() != dims {
        return Err(Error::Argument(format!("expected matching 2x2xK tables, got {dims:?}")));
    }
    let n = observed.total();
    let k = dims[2];
    Ok((0..k).map(|s| observed.cells()[s] / n - fitted.cells()[s]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::testutil::positive_table;
    use crate::threeway::bartlett_d;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_margins_give_uniform_table() {
        let t = ContingencyTable::from_dims(&[2, 2, 2], vec![1.0; 8]).unwrap();
        let r = fit_no_threeway(&t).unwrap();
        for p in r.fitted.cells() {
            assert_abs_diff_eq!(*p, 0.125, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(r.entropy, 8f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn berkeley_no_threeway() {
        let b = datasets::berkeley();
        let r = fit_no_threeway(&b).unwrap();
        assert_eq!(r.df, 5);
        assert_abs_diff_eq!(r.entropy, 2.888, epsilon = 5e-4);
        for (k, e) in [0.0653, 0.0456, 0.0477, 0.0618, 0.0321].iter().enumerate() {
            assert_abs_diff_eq!(r.fitted.cells()[k], *e, epsilon = 5e-5);
        }
        assert!(r.gradient_norm < GRAD_TOL);
        assert!(r.max_constraint_residual < 1e-9);
        let gof = chi_square_gof(&b, &r.fitted, r.df).unwrap();
        assert_abs_diff_eq!(gof.chi_square, 18.8, epsilon = 0.05);
        assert_abs_diff_eq!(gof.p_value, 0.002, epsilon = 5e-4);
        let dk = threeway_interaction_params(&b, &r.fitted).unwrap();
        assert_abs_diff_eq!(dk[0], 0.0038, epsilon = 5e-5);
        assert_abs_diff_eq!(dk[5], 0.00021, epsilon = 5e-6);
        assert!(dk.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn berkeley_with_pinned_first_cell() {
        let b = datasets::berkeley();
        let margins = MarginalSet::from_table(&b).unwrap();
        let extra = [LinearConstraint::cell(0, 313.0 / 4526.0, 24)];
        let r = fit_margins(b.shape(), &margins, &extra).unwrap();
        assert_eq!(r.df, 4);
        assert_abs_diff_eq!(r.entropy, 2.886, epsilon = 5e-4);
        assert_abs_diff_eq!(r.fitted.cells()[1], 0.0454, epsilon = 5e-5);
    }

    #[test]
    fn mood_fits() {
        let mood = datasets::mood();
        let all = [(0, 1), (0, 2), (1, 2)];
        let mutual = MarginalSet::with_independent_pairs(&mood, &all).unwrap();
        let c_ind = MarginalSet::with_independent_pairs(&mood, &[(0, 2), (1, 2)]).unwrap();
        let full = MarginalSet::from_table(&mood).unwrap();
        let chi = |m: &MarginalSet, df| {
            let r = fit_margins(mood.shape(), m, &[]).unwrap();
            chi_square_gof(&mood, &r.fitted, df).unwrap().chi_square
        };
        assert_abs_diff_eq!(chi(&mutual, 4), 131.994, epsilon = 1e-3);
        assert_abs_diff_eq!(chi(&c_ind, 3), 93.732, epsilon = 1e-3);
        assert_abs_diff_eq!(chi(&full, 1), 6.804, epsilon = 1e-3);
    }

    #[test]
    fn fitted_zero_cells_are_removed() {
        // one-way margin zero on a category: that slice stays zero
        let cells = vec![3.0, 1.0, 0.0, 0.0, 2.0, 5.0, 0.0, 0.0];
        let t = ContingencyTable::from_dims(&[2, 2, 2], cells).unwrap();
        let r = fit_no_threeway(&t).unwrap();
        assert_eq!(r.zero_cells, vec![2, 3, 6, 7]);
        let gof = chi_square_gof(&t, &r.fitted, r.df).unwrap();
        assert!(!gof.infinite);
    }

    #[test]
    fn infinite_discrepancy_flagged() {
        let obs = ContingencyTable::from_dims(&[2, 2], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let fit = ProbabilityTable::from_dims(&[2, 2], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(chi_square_gof(&obs, &fit, 1).unwrap().infinite);
        let same = obs.to_probabilities().unwrap();
        assert_eq!(chi_square_gof(&obs, &same, 1).unwrap().chi_square, 0.0);
    }

    #[test]
    fn rejects_count_scale_region() {
        let t = datasets::mood();
        let par = polytope::parametrize(t.shape(), &MarginalSet::from_table(&t).unwrap()).unwrap();
        assert!(matches!(max_entropy(&par, &[]), Err(Error::Argument(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn fit_has_no_bartlett_interaction(t in positive_table(vec![2, 2, 2])) {
            let r = fit_no_threeway(&t).unwrap();
            prop_assert!(bartlett_d(&r.fitted).unwrap().abs() < 1e-8);
            prop_assert!(r.max_constraint_residual < 1e-9);
        }

        #[test]
        fn fit_beats_random_feasible_tables(t in positive_table(vec![2, 3, 3]), w in prop::collection::vec(-1.0f64..1.0, 18), s in 0.0f64..1.0) {
            let m = MarginalSet::from_table(&t).unwrap();
            let r = fit_margins(t.shape(), &m, &[]).unwrap();
            let par = polytope::parametrize(t.shape(), &m).unwrap();
            // a feasible table on the segment from the observed table to an LP vertex
            let fb = polytope::linear_functional_bounds(&par, &w).unwrap();
            let other: Vec<f64> = t.cells().iter().zip(&fb.argmax).map(|(a, b)| (1.0 - s) * a + s * b).collect();
            prop_assert!(r.entropy >= entropy_of(&other) - 1e-12);
        }

        #[test]
        fn gradient_matches_finite_differences(t in positive_table(vec![2, 2, 3]), u in prop::collection::vec(-0.5f64..0.5, 2)) {
            let par = polytope::parametrize(t.shape(), &MarginalSet::from_table(&t).unwrap()).unwrap();
            let obj = EntropyObjective::new(&par, &[]);
            let y0 = par.free_values_of(t.cells());
            // move part of the way toward the boundary, staying interior
            let y: Vec<f64> = y0.iter().zip(&u).map(|(a, b)| a * (1.0 + 0.2 * b)).collect();
            prop_assume!(obj.value(&y).is_some());
            prop_assume!(obj.cells(&y).iter().all(|p| *p > 1e-3));
            let g = obj.gradient(&y);
            let h = 1e-6;
            for k in 0..y.len() {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[k] += h;
                ym[k] -= h;
                let fd = (obj.value(&yp).unwrap() - obj.value(&ym).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[k]).abs() <= 1e-6 + 1e-5 * g[k].abs(), "fd {} vs {}", fd, g[k]);
            }
        }
    }
}
