//! Tables with prescribed score correlations.
//!
//! A correlation is linear in the cells once the one-way margins are fixed:
//! `rho sigma_i sigma_j + mu_i mu_j = sum v_i v_j p`. Construction adds these
//! rows to the one-way system and pins the free cells one at a time.

use serde::Serialize;

use super::{clean_cells, independence_cells, one_way_system, validate_one_way, AssociationMeasure, AssociationTarget, CellPolicy, Objective};
use crate::error::{Error, Result};
use crate::measures::{moments, ScoreVectors};
use crate::polytope::{self, LinearConstraint, Region, Sense};
use crate::table::{ProbabilityTable, TableShape};

const PIN_TOL: f64 = 1e-12;

/// Correlation of pair `(i, j)` as `weights . cells + offset`.
fn rho_linear(shape: &TableShape, one_way: &[Vec<f64>], scores: &ScoreVectors, i: usize, j: usize) -> Result<(Vec<f64>, f64)> {
    let (vi, vj) = (scores.axis(i)?, scores.axis(j)?);
    if vi.len() != one_way[i].len() || vj.len() != one_way[j].len() {
        return Err(Error::Argument(format!("score vectors do not match the margins of pair ({i}, {j})")));
    }
    let (mi, vari) = moments(&one_way[i], vi);
    let (mj, varj) = moments(&one_way[j], vj);
    let sd = (vari * varj).sqrt();
    if vari <= 1e-15 || varj <= 1e-15 {
        return Err(Error::UndefinedMeasure(format!(
            "correlation of pair ({i}, {j}) is undefined: a margin puts all mass on one category"
        )));
    }
    let weights = shape.indices().map(|ix| vi[ix[i]] * vj[ix[j]] / sd).collect();
    Ok((weights, -mi * mj / sd))
}

/// The linear row fixing the correlation of pair `(i, j)` at `rho`.
pub fn rho_constraint(one_way: &[Vec<f64>], scores: &ScoreVectors, i: usize, j: usize, rho: f64) -> Result<LinearConstraint> {
    let shape = validate_one_way(one_way)?;
    let (weights, offset) = rho_linear(&shape, one_way, scores, i, j)?;
    Ok(LinearConstraint { weights, rhs: rho - offset })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageCase {
    /// The bounds coincided.
    Forced,
    /// Chosen inside the bounds by the policy.
    Chosen,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub cell: usize,
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    pub case: StageCase,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PearsonConstruction {
    pub table: ProbabilityTable,
    pub stages: Vec<Stage>,
}

/// Sequential construction: every free cell of the system (margins plus
/// correlation rows), in canonical order, is pinned inside its current LP
/// bounds according to `policy`.
pub fn pearson_construct(
    one_way: &[Vec<f64>],
    scores: &ScoreVectors,
    targets: &[AssociationTarget],
    policy: CellPolicy,
) -> Result<PearsonConstruction> {
    let shape = validate_one_way(one_way)?;
    let n = shape.n_cells();
    let mut rows = Vec::with_capacity(targets.len());
    for t in targets {
        t.validate()?;
        if t.measure != AssociationMeasure::Pearson {
            return Err(Error::Argument("pearson construction takes correlation targets only".into()));
        }
        let (i, j) = t.pair;
        if j >= shape.n_axes() {
            return Err(Error::Index(format!("pair ({i}, {j}) on a {}-way table", shape.n_axes())));
        }
        if targets.iter().filter(|o| o.pair == t.pair).count() > 1 {
            return Err(Error::Argument(format!("pair ({i}, {j}) has more than one target")));
        }
        let (w, offset) = rho_linear(&shape, one_way, scores, i, j)?;
        rows.push(LinearConstraint { weights: w, rhs: t.value - offset });
    }
    let system = one_way_system(&shape, one_way)?.with_constraints(&rows)?;
    let order = polytope::solve_affine(&shape, &system)?.free_vars;
    let independence = independence_cells(&shape, one_way);
    let mut pins: Vec<LinearConstraint> = Vec::with_capacity(order.len());
    let mut stages = Vec::with_capacity(order.len());
    for (stage, &cell) in order.iter().enumerate() {
        let mut region = Region::new(&system.with_constraints(&pins)?).map_err(|e| no_table(e, stage, cell))?;
        let mut w = vec![0.0; n];
        w[cell] = 1.0;
        let b = region.range(&w)?;
        let (lower, upper) = (b.lo, b.hi.max(b.lo));
        let (value, case) = if upper - lower <= PIN_TOL {
            (lower, StageCase::Forced)
        } else {
            let v = match policy {
                CellPolicy::Mean => 0.5 * (lower + upper),
                CellPolicy::Ind => independence[cell].clamp(lower, upper),
                CellPolicy::Min => lower,
                CellPolicy::Max => upper,
            };
            (v, StageCase::Chosen)
        };
        pins.push(LinearConstraint::cell(cell, value, n));
        stages.push(Stage {
            cell,
            lower,
            upper,
            value,
            case,
        });
    }
    let last = order.len();
    let full = system.with_constraints(&pins)?;
    let point = polytope::solve_affine(&shape, &full)?;
    if point.n_free() != 0 {
        return Err(Error::Degenerate("pinning every free cell left a free cell".into()));
    }
    let mut cells = point.constant.clone();
    clean_cells(&mut cells);
    let residual = full
        .matrix
        .iter()
        .zip(&full.rhs)
        .map(|(r, b)| (r.iter().zip(&cells).map(|(a, x)| a * x).sum::<f64>() - b).abs())
        .fold(0.0, f64::max);
    if let Some(c) = cells.iter().position(|v| *v < 0.0) {
        return Err(Error::NoTable {
            stage: last,
            cell: c,
            detail: format!("cell {c} is negative ({})", cells[c]),
        });
    }
    if residual > 1e-9 {
        return Err(Error::NoTable {
            stage: last,
            cell: order.last().copied().unwrap_or(0),
            detail: format!("pinned system is inconsistent (residual {residual:e})"),
        });
    }
    Ok(PearsonConstruction {
        table: ProbabilityTable::new(shape, cells)?,
        stages,
    })
}

fn no_table(e: Error, stage: usize, cell: usize) -> Error {
    match e {
        Error::Infeasible(detail) => Error::NoTable { stage, cell, detail },
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationBounds {
    pub lo: f64,
    pub hi: f64,
    pub argmin: ProbabilityTable,
    pub argmax: ProbabilityTable,
}

/// Exact LP bounds on a linear objective in the pairwise correlations,
/// over all tables with the given one-way margins.
pub fn pearson_bounds(one_way: &[Vec<f64>], scores: &ScoreVectors, objective: &Objective) -> Result<AssociationBounds> {
    let shape = validate_one_way(one_way)?;
    objective.validate(shape.n_axes())?;
    let n = shape.n_cells();
    let mut system = one_way_system(&shape, one_way)?;
    let terms = objective.terms();
    let lin: Vec<(Vec<f64>, f64)> = terms
        .iter()
        .map(|&((i, j), s)| {
            let (w, c) = rho_linear(&shape, one_way, scores, i, j)?;
            Ok((w.iter().map(|x| x * s).collect(), c * s))
        })
        .collect::<Result<_>>()?;
    let (weights, offset) = match objective {
        Objective::Sum(_) => {
            let mut w = vec![0.0; n];
            let mut c = 0.0;
            for (wk, ck) in &lin {
                for (a, b) in w.iter_mut().zip(wk) {
                    *a += b;
                }
                c += ck;
            }
            (w, c)
        }
        Objective::Common(_) => {
            let (w0, c0) = &lin[0];
            let rows: Vec<LinearConstraint> = lin[1..]
                .iter()
                .map(|(wk, ck)| LinearConstraint {
                    weights: wk.iter().zip(w0).map(|(a, b)| a - b).collect(),
                    rhs: c0 - ck,
                })
                .collect();
            system = system.with_constraints(&rows)?;
            (w0.clone(), *c0)
        }
    };
    let mut region = Region::new(&system)?;
    let lo = region.optimize(&weights, Sense::Minimize)?;
    let hi = region.optimize(&weights, Sense::Maximize)?;
    let table = |mut x: Vec<f64>| {
        clean_cells(&mut x);
        ProbabilityTable::new(shape.clone(), x)
    };
    Ok(AssociationBounds {
        lo: lo.value + offset,
        hi: hi.value + offset,
        argmin: table(lo.x)?,
        argmax: table(hi.x)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::measures::pearson_rho_scored;
    use crate::simulate::pairs;
    use approx::assert_abs_diff_eq;

    fn rho_targets(values: &[f64]) -> Vec<AssociationTarget> {
        pairs(3)
            .into_iter()
            .zip(values)
            .map(|((i, j), v)| AssociationTarget::new(i, j, AssociationMeasure::Pearson, *v).unwrap())
            .collect()
    }

    fn scores() -> ScoreVectors {
        ScoreVectors::default_for(&[3, 3, 3])
    }

    #[test]
    fn zero_targets_with_ind_give_independence() {
        let m = datasets::simulation_margins();
        let r = pearson_construct(&m, &scores(), &rho_targets(&[0.0; 3]), CellPolicy::Ind).unwrap();
        let shape = TableShape::new(vec![3, 3, 3]).unwrap();
        for (a, b) in r.table.cells().iter().zip(independence_cells(&shape, &m)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn constructed_tables_meet_targets() {
        let m = datasets::simulation_margins();
        for policy in [CellPolicy::Mean, CellPolicy::Ind, CellPolicy::Min, CellPolicy::Max] {
            for target in [0.5, 0.2, -0.3] {
                let r = pearson_construct(&m, &scores(), &rho_targets(&[target; 3]), policy).unwrap();
                for (i, j) in pairs(3) {
                    let rho = pearson_rho_scored(&r.table, i, j, &scores()).unwrap();
                    assert_abs_diff_eq!(rho, target, epsilon = 1e-9);
                }
                for (axis, want) in m.iter().enumerate() {
                    for (a, b) in r.table.one_way(axis).unwrap().iter().zip(want) {
                        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn beyond_the_pair_bound_has_no_table() {
        let m = datasets::simulation_margins();
        let t = [AssociationTarget::new(0, 1, AssociationMeasure::Pearson, 0.8).unwrap()];
        let e = pearson_construct(&m, &scores(), &t, CellPolicy::Mean).unwrap_err();
        assert!(matches!(e, Error::NoTable { stage: 0, .. }), "{e:?}");
        assert!(e.is_infeasibility());
        let ok = [AssociationTarget::new(0, 1, AssociationMeasure::Pearson, 0.79).unwrap()];
        assert!(pearson_construct(&m, &scores(), &ok, CellPolicy::Mean).is_ok());
    }

    #[test]
    fn stage_log_covers_every_free_cell() {
        let m = datasets::simulation_margins();
        let r = pearson_construct(&m, &scores(), &rho_targets(&[0.3; 3]), CellPolicy::Mean).unwrap();
        let cells: Vec<usize> = r.stages.iter().map(|s| s.cell).collect();
        assert_eq!(cells, vec![0, 1, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 15, 18, 19, 21]);
        for s in &r.stages {
            assert!(s.lower <= s.value && s.value <= s.upper);
        }
    }

    #[test]
    fn pair_bounds() {
        let m = datasets::simulation_margins();
        let expect = [((0, 1), -0.797, 0.797), ((0, 2), -0.808, 0.808), ((1, 2), -0.837, 0.933)];
        for ((i, j), lo, hi) in expect {
            let b = pearson_bounds(&m, &scores(), &Objective::Sum(vec![((i, j), 1.0)])).unwrap();
            assert_abs_diff_eq!(b.lo, lo, epsilon = 1e-3);
            assert_abs_diff_eq!(b.hi, hi, epsilon = 1e-3);
            let at = pearson_rho_scored(&b.argmax, i, j, &scores()).unwrap();
            assert_abs_diff_eq!(at, b.hi, epsilon = 1e-9);
        }
    }

    #[test]
    fn sum_and_common_bounds() {
        let m = datasets::simulation_margins();
        let s = pearson_bounds(&m, &scores(), &Objective::all_pairs(3)).unwrap();
        assert_abs_diff_eq!(s.lo, -1.40019, epsilon = 1e-4);
        assert_abs_diff_eq!(s.hi, 2.53745, epsilon = 1e-4);
        let terms = pairs(3).into_iter().map(|p| (p, 1.0)).collect();
        let c = pearson_bounds(&m, &scores(), &Objective::Common(terms)).unwrap();
        assert_abs_diff_eq!(c.hi, 0.79682, epsilon = 1e-4);
        assert_abs_diff_eq!(c.lo, -0.45811, epsilon = 1e-4);
        for (i, j) in pairs(3) {
            let r = pearson_rho_scored(&c.argmin, i, j, &scores()).unwrap();
            assert_abs_diff_eq!(r, c.lo, epsilon = 1e-9);
        }
    }

    #[test]
    fn degenerate_margin_is_undefined() {
        let m = vec![vec![1.0, 0.0], vec![0.5, 0.5]];
        let e = pearson_bounds(&m, &ScoreVectors::default_for(&[2, 2]), &Objective::all_pairs(2)).unwrap_err();
        assert!(matches!(e, Error::UndefinedMeasure(_)));
    }
}
