//! Nonlinear association bounds and witness tables.
//!
//! Gamma and Somers' d are rational in the cells, so their extremes over the
//! one-way polytope are found by sequential linear programming: each step
//! maximizes the linearized objective minus an l1 penalty on linearized
//! equality restraints inside a box trust region, and is accepted on the
//! exact merit. Several seeded starts are tried; the result is a feasible
//! table, optimality is best effort.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{clean_cells, independence_cells, one_way_system, pair_index, pair_matrix, validate_one_way};
use super::{AssociationMeasure, AssociationTarget, Objective};
use crate::error::{Error, Result};
use crate::measures::neighbourhoods;
use crate::polytope::{FeasibleTableau, LinearProgram, Region, Sense};
use crate::table::{ProbabilityTable, TableShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            starts: 20,
            seed: 0,
            max_iter: 1000,
        }
    }
}

/// Weighted sum of pair measures, `sum w_k m(pair_k) - offset`.
#[derive(Debug, Clone)]
struct Combination {
    terms: Vec<((usize, usize), f64)>,
    offset: f64,
}

struct Problem {
    shape: TableShape,
    measure: AssociationMeasure,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    one_way: Vec<Vec<f64>>,
    index: Vec<Vec<(usize, usize)>>,
    pairs: Vec<(usize, usize)>,
    objective: Combination,
    equalities: Vec<Combination>,
}

struct Eval {
    f: f64,
    df: Vec<f64>,
    g: Vec<f64>,
    dg: Vec<Vec<f64>>,
}

/// Value and gradient (over the two-way cells) of one measure.
fn measure_grad(measure: AssociationMeasure, m: &[Vec<f64>]) -> Option<(f64, Vec<Vec<f64>>)> {
    let (conc, disc) = neighbourhoods(m);
    let mut s = 0.0;
    let mut d = 0.0;
    let mut sq = 0.0;
    for (i, row) in m.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            s += p * conc[i][j];
            d += p * disc[i][j];
            sq += p * p;
        }
    }
    let grad = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..m.len()).map(|i| (0..m[i].len()).map(|j| f(i, j)).collect()).collect()
    };
    match measure {
        AssociationMeasure::Gamma => {
            let t = s + d;
            if t <= 1e-14 {
                return None;
            }
            let g = grad(&|i, j| 4.0 * (d * conc[i][j] - s * disc[i][j]) / (t * t));
            Some(((s - d) / t, g))
        }
        AssociationMeasure::SomersD => {
            let q = 1.0 - sq;
            if q <= 1e-14 {
                return None;
            }
            let g = grad(&|i, j| (2.0 * (conc[i][j] - disc[i][j]) * q + 2.0 * (s - d) * m[i][j]) / (q * q));
            Some(((s - d) / q, g))
        }
        AssociationMeasure::Pearson => None,
    }
}

impl Problem {
    fn new(one_way: &[Vec<f64>], measure: AssociationMeasure, objective: Combination, equalities: Vec<Combination>) -> Result<Self> {
        if measure == AssociationMeasure::Pearson {
            return Err(Error::Argument("correlation bounds are linear; use the LP bounds".into()));
        }
        let shape = validate_one_way(one_way)?;
        let system = one_way_system(&shape, one_way)?;
        let mut pairs: Vec<(usize, usize)> = objective
            .terms
            .iter()
            .chain(equalities.iter().flat_map(|c| c.terms.iter()))
            .map(|t| t.0)
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        for &(i, j) in &pairs {
            if i >= j || j >= shape.n_axes() {
                return Err(Error::Argument(format!("pair ({i}, {j}) is not an ordered pair of axes")));
            }
        }
        let index = pairs.iter().map(|&(i, j)| pair_index(&shape, i, j)).collect();
        Ok(Self {
            shape,
            measure,
            a: system.matrix,
            b: system.rhs,
            one_way: one_way.to_vec(),
            index,
            pairs,
            objective,
            equalities,
        })
    }

    fn n(&self) -> usize {
        self.shape.n_cells()
    }

    fn eval(&self, x: &[f64]) -> Option<Eval> {
        let n = self.n();
        let mut values = Vec::with_capacity(self.pairs.len());
        let mut grads = Vec::with_capacity(self.pairs.len());
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let m = pair_matrix(&self.shape, x, i, j);
            let (v, g) = measure_grad(self.measure, &m)?;
            values.push(v);
            grads.push(self.index[k].iter().map(|&(a, b)| g[a][b]).collect::<Vec<f64>>());
        }
        let combine = |c: &Combination| {
            let mut val = -c.offset;
            let mut grad = vec![0.0; n];
            for &(pair, w) in &c.terms {
                let k = self.pairs.binary_search(&pair).expect("pair was collected");
                val += w * values[k];
                for (gc, v) in grad.iter_mut().zip(&grads[k]) {
                    *gc += w * v;
                }
            }
            (val, grad)
        };
        let (f, df) = combine(&self.objective);
        let (g, dg) = self.equalities.iter().map(combine).unzip();
        Some(Eval { f, df, g, dg })
    }

    /// Rescales slices so round-off in the LP steps does not accumulate in
    /// the one-way margins.
    fn restore(&self, x: &mut [f64]) {
        for v in x.iter_mut() {
            *v = v.max(0.0);
        }
        for _ in 0..3 {
            for (axis, p) in self.one_way.iter().enumerate() {
                let mut got = vec![0.0; p.len()];
                for (ix, v) in self.shape.indices().zip(x.iter()) {
                    got[ix[axis]] += v;
                }
                for (ix, v) in self.shape.indices().zip(x.iter_mut()) {
                    let k = ix[axis];
                    if got[k] > 0.0 {
                        *v *= p[k] / got[k];
                    }
                }
            }
        }
    }

    fn merit(e: &Eval, mu: f64) -> f64 {
        e.f - mu * e.g.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Best point of the linearized merit inside the box of radius `delta`.
    fn step(&self, x: &[f64], e: &Eval, mu: f64, delta: f64) -> Result<(Vec<f64>, f64)> {
        let l = e.g.len();
        let lo: Vec<f64> = x.iter().map(|v| (v - delta).max(0.0)).collect();
        let mut a = Vec::with_capacity(self.a.len() + l);
        let mut b = Vec::with_capacity(self.a.len() + l);
        for (row, bi) in self.a.iter().zip(&self.b) {
            let mut r = row.clone();
            r.extend(std::iter::repeat_n(0.0, 2 * l));
            b.push(bi - row.iter().zip(&lo).map(|(p, q)| p * q).sum::<f64>());
            a.push(r);
        }
        for k in 0..l {
            let mut r = e.dg[k].clone();
            r.extend((0..2 * l).map(|c| match c {
                c if c == k => 1.0,
                c if c == l + k => -1.0,
                _ => 0.0,
            }));
            let shift: f64 = e.dg[k].iter().zip(lo.iter().zip(x)).map(|(g, (p, q))| g * (p - q)).sum();
            b.push(-e.g[k] - shift);
            a.push(r);
        }
        let mut upper: Vec<Option<f64>> = x.iter().zip(&lo).map(|(v, p)| Some(v + delta - p)).collect();
        upper.extend(std::iter::repeat_n(None, 2 * l));
        let mut c = e.df.clone();
        c.extend(std::iter::repeat_n(-mu, 2 * l));
        let mut tableau = FeasibleTableau::new(&LinearProgram { a, b, upper })?;
        let sol = tableau.optimize(&c, Sense::Maximize)?;
        let z: Vec<f64> = lo.iter().zip(&sol.x).map(|(p, s)| p + s).collect();
        let d: Vec<f64> = z.iter().zip(x).map(|(p, q)| p - q).collect();
        let model_f: f64 = e.df.iter().zip(&d).map(|(g, s)| g * s).sum();
        let model_g: f64 = (0..l)
            .map(|k| (e.g[k] + e.dg[k].iter().zip(&d).map(|(g, s)| g * s).sum::<f64>()).abs())
            .sum();
        let now_g: f64 = e.g.iter().map(|v| v.abs()).sum();
        Ok((z, model_f - mu * model_g + mu * now_g))
    }

    /// Local ascent from `x0`; returns the final point and its evaluation.
    fn ascend(&self, x0: Vec<f64>, max_iter: usize) -> Result<Option<(Vec<f64>, Eval)>> {
        let mut x = x0;
        let Some(mut e) = self.eval(&x) else { return Ok(None) };
        let mut mu = 10.0;
        let mut delta = 0.1;
        let mut iter = 0;
        loop {
            while iter < max_iter && delta > 1e-11 {
                iter += 1;
                let (mut z, pred) = self.step(&x, &e, mu, delta)?;
                self.restore(&mut z);
                if pred <= 1e-14 {
                    break;
                }
                let ez = self.eval(&z);
                let actual = ez.as_ref().map(|ez| Self::merit(ez, mu) - Self::merit(&e, mu));
                match (ez, actual) {
                    (Some(ez), Some(actual)) if actual > 0.1 * pred => {
                        let radius = z.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                        x = z;
                        e = ez;
                        if actual > 0.75 * pred && radius > 0.9 * delta {
                            delta = (2.0 * delta).min(0.5);
                        }
                    }
                    _ => delta *= 0.25,
                }
            }
            let infeas = e.g.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if infeas < 1e-10 || mu >= 1e6 || iter >= max_iter {
                return Ok(Some((x, e)));
            }
            mu *= 10.0;
            delta = delta.max(1e-3);
        }
    }

    fn starts(&self, one_way: &[Vec<f64>], opts: &SearchOptions) -> Result<Vec<Vec<f64>>> {
        let n = self.n();
        let ind = independence_cells(&self.shape, one_way);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let system = one_way_system(&self.shape, one_way)?;
        let mut region = Region::new(&system)?;
        let mut out = Vec::with_capacity(opts.starts);
        for _ in 0..opts.starts {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = region.optimize(&w, Sense::Maximize)?.x;
            let lam: f64 = rng.random_range(0.1..0.9);
            out.push(v.iter().zip(&ind).map(|(a, b)| lam * a + (1.0 - lam) * b).collect());
        }
        Ok(out)
    }

    /// Best feasible local optimum over the starts.
    fn solve(&self, one_way: &[Vec<f64>], opts: &SearchOptions, feas_tol: f64) -> Result<Option<(Vec<f64>, f64, f64)>> {
        let mut best: Option<(Vec<f64>, f64, f64)> = None;
        for x0 in self.starts(one_way, opts)? {
            let Some((x, e)) = self.ascend(x0, opts.max_iter)? else { continue };
            let infeas = e.g.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let better = match &best {
                None => true,
                Some((_, f, g)) => {
                    let ok = infeas <= feas_tol;
                    let best_ok = *g <= feas_tol;
                    (ok && !best_ok) || (ok == best_ok && if ok { e.f > *f } else { infeas < *g })
                }
            };
            if better {
                best = Some((x, e.f, infeas));
            }
        }
        Ok(best)
    }

    fn pair_values(&self, x: &[f64]) -> Vec<((usize, usize), f64)> {
        self.pairs
            .iter()
            .map(|&(i, j)| {
                let m = pair_matrix(&self.shape, x, i, j);
                ((i, j), measure_grad(self.measure, &m).map_or(f64::NAN, |v| v.0))
            })
            .collect()
    }

    fn table(&self, mut x: Vec<f64>) -> Result<ProbabilityTable> {
        clean_cells(&mut x);
        ProbabilityTable::new(self.shape.clone(), x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub value: f64,
    pub table: ProbabilityTable,
    /// Measure of every pair in the objective, at the witness table.
    pub pair_values: Vec<((usize, usize), f64)>,
    /// Largest violation of the equal-value restraints.
    pub infeasibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearBounds {
    pub lo: Extremum,
    pub hi: Extremum,
}

fn combinations(objective: &Objective, sign: f64) -> (Combination, Vec<Combination>) {
    match objective {
        Objective::Sum(t) => (
            Combination {
                terms: t.iter().map(|&(p, w)| (p, sign * w)).collect(),
                offset: 0.0,
            },
            Vec::new(),
        ),
        Objective::Common(t) => {
            let (p0, w0) = t[0];
            let eqs = t[1..]
                .iter()
                .map(|&(p, w)| Combination {
                    terms: vec![(p, w), (p0, -w0)],
                    offset: 0.0,
                })
                .collect();
            (
                Combination {
                    terms: vec![(p0, sign * w0)],
                    offset: 0.0,
                },
                eqs,
            )
        }
    }
}

/// Numerical minimum and maximum of a gamma or Somers' d objective over all
/// tables with the given one-way margins.
pub fn nonlinear_assoc_bounds(
    one_way: &[Vec<f64>],
    measure: AssociationMeasure,
    objective: &Objective,
    opts: &SearchOptions,
) -> Result<NonlinearBounds> {
    let shape = validate_one_way(one_way)?;
    objective.validate(shape.n_axes())?;
    let run = |sign: f64| -> Result<Extremum> {
        let (obj, eqs) = combinations(objective, sign);
        let problem = Problem::new(one_way, measure, obj, eqs)?;
        let (x, f, infeas) = problem
            .solve(one_way, opts, 1e-8)?
            .ok_or_else(|| Error::NoConvergence("no start gave a defined objective".into()))?;
        Ok(Extremum {
            value: sign * f,
            pair_values: problem.pair_values(&x),
            infeasibility: infeas,
            table: problem.table(x)?,
        })
    };
    Ok(NonlinearBounds {
        lo: run(-1.0)?,
        hi: run(1.0)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub table: ProbabilityTable,
    pub achieved: Vec<((usize, usize), f64)>,
    /// Largest absolute deviation from a target.
    pub residual: f64,
}

/// Searches for a table with the given one-way margins whose pairwise
/// measures equal the targets; returns the closest table found.
pub fn witness_search(one_way: &[Vec<f64>], targets: &[AssociationTarget], opts: &SearchOptions) -> Result<Witness> {
    let Some(first) = targets.first() else {
        return Err(Error::Argument("no targets".into()));
    };
    for t in targets {
        t.validate()?;
        if t.measure != first.measure {
            return Err(Error::Argument("all targets must use one measure".into()));
        }
    }
    let eqs = targets
        .iter()
        .map(|t| Combination {
            terms: vec![(t.pair, 1.0)],
            offset: t.value,
        })
        .collect();
    let zero = Combination {
        terms: vec![(first.pair, 0.0)],
        offset: 0.0,
    };
    let problem = Problem::new(one_way, first.measure, zero, eqs)?;
    let (x, _, residual) = problem
        .solve(one_way, opts, 1e-10)?
        .ok_or_else(|| Error::NoConvergence("no start gave defined measures".into()))?;
    Ok(Witness {
        achieved: problem.pair_values(&x),
        residual,
        table: problem.table(x)?,
    })
}
