//! Pairwise association measures.
//!
//! The concordance quantities follow the symmetric convention: `S` and `D`
//! count ordered pairs of independent observations, so `S + D + T` equals
//! `1 - sum p^2` and Somers' d is `(S - D) / (1 - sum p^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{ProbabilityTable, PROB_TOL};

const VAR_TOL: f64 = 1e-15;

/// Numeric category scores per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVectors(Vec<Vec<f64>>);

impl ScoreVectors {
    pub fn new(scores: Vec<Vec<f64>>) -> Result<Self> {
        for (axis, v) in scores.iter().enumerate() {
            if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Argument(format!(
                    "scores of axis {axis} must be finite and strictly increasing"
                )));
            }
        }
        Ok(Self(scores))
    }

    /// Scores `1, 2, ..., I` on every axis.
    pub fn default_for(dims: &[usize]) -> Self {
        Self(dims.iter().map(|&n| (1..=n).map(|k| k as f64).collect()).collect())
    }

    pub fn axis(&self, axis: usize) -> Result<&[f64]> {
        self.0
            .get(axis)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Index(format!("no scores for axis {axis}")))
    }

    pub fn as_slice(&self) -> &[Vec<f64>] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Ld,
    Phi,
    Pearson,
    Gamma,
    SomersD,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeasureResult {
    pub value: f64,
    pub kind: MeasureKind,
    pub axes: (usize, usize),
    pub categories: Option<(usize, usize)>,
}

/// `p_ij - p_i. p_.j` on the `(axis_a, axis_b)` marginal.
pub fn ld_pair(t: &ProbabilityTable, axis_a: usize, cat_a: usize, axis_b: usize, cat_b: usize) -> Result<f64> {
    let c = t.collapse_pair(axis_a, cat_a, axis_b, cat_b)?;
    let p = c.cells();
    let (pij, pi, pj) = (p[0], p[0] + p[1], p[0] + p[2]);
    Ok(pij - pi * pj)
}

/// LD of the table conditioned on category `strat_cat` of `strat_axis`.
pub fn ld_conditional(
    t: &ProbabilityTable,
    axis_a: usize,
    cat_a: usize,
    axis_b: usize,
    cat_b: usize,
    strat_axis: usize,
    strat_cat: usize,
) -> Result<f64> {
    if strat_axis == axis_a || strat_axis == axis_b {
        return Err(Error::Argument(format!(
            "stratifying axis {strat_axis} must differ from the measured axes"
        )));
    }
    let cond = t.condition(strat_axis, strat_cat)?;
    let shift = |a: usize| if a > strat_axis { a - 1 } else { a };
    ld_pair(&cond, shift(axis_a), cat_a, shift(axis_b), cat_b)
}

/// Pearson's phi of category `cat_a` against `cat_b` (LD over the
/// geometric mean of the four marginal factors).
pub fn pearson_phi(t: &ProbabilityTable, axis_a: usize, cat_a: usize, axis_b: usize, cat_b: usize) -> Result<f64> {
    let c = t.collapse_pair(axis_a, cat_a, axis_b, cat_b)?;
    phi_2x2(c.cells())
}

pub(crate) fn phi_2x2(p: &[f64]) -> Result<f64> {
    let (pij, pi, pj) = (p[0], p[0] + p[1], p[0] + p[2]);
    let denom = pi * (1.0 - pi) * pj * (1.0 - pj);
    if denom <= VAR_TOL {
        return Err(Error::UndefinedMeasure(format!(
            "phi needs nondegenerate margins, got {pi} and {pj}"
        )));
    }
    Ok((pij - pi * pj) / denom.sqrt())
}

/// Correlation of the category scores over the `(axis_a, axis_b)` marginal.
pub fn pearson_rho_scored(t: &ProbabilityTable, axis_a: usize, axis_b: usize, scores: &ScoreVectors) -> Result<f64> {
    let m = t.pair_marginal(axis_a, axis_b)?;
    let (va, vb) = (scores.axis(axis_a)?, scores.axis(axis_b)?);
    if va.len() != m.len() || vb.len() != m[0].len() {
        return Err(Error::Argument("score vector length does not match the table".into()));
    }
    rho_matrix(&m, va, vb)
}

pub(crate) fn rho_matrix(m: &[Vec<f64>], va: &[f64], vb: &[f64]) -> Result<f64> {
    let pa: Vec<f64> = m.iter().map(|r| r.iter().sum()).collect();
    let pb: Vec<f64> = (0..vb.len()).map(|j| m.iter().map(|r| r[j]).sum()).collect();
    let (mua, vara) = moments(&pa, va);
    let (mub, varb) = moments(&pb, vb);
    if vara <= VAR_TOL || varb <= VAR_TOL {
        return Err(Error::UndefinedMeasure("a score variance is zero".into()));
    }
    let mut exy = 0.0;
    for (i, row) in m.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            exy += va[i] * vb[j] * p;
        }
    }
    Ok((exy - mua * mub) / (vara * varb).sqrt())
}

/// Mean and variance of scores under a probability vector.
pub(crate) fn moments(p: &[f64], v: &[f64]) -> (f64, f64) {
    let mu: f64 = p.iter().zip(v).map(|(p, v)| p * v).sum();
    let ex2: f64 = p.iter().zip(v).map(|(p, v)| p * v * v).sum();
    (mu, (ex2 - mu * mu).max(0.0))
}

fn two_way(t: &ProbabilityTable) -> Result<Vec<Vec<f64>>> {
    t.to_matrix()
}

/// Goodman and Kruskal's gamma of a 2-way table.
pub fn gamma(t: &ProbabilityTable) -> Result<f64> {
    gamma_matrix(&two_way(t)?)
}

/// Somers' d (symmetric) of a 2-way table.
pub fn somers_d(t: &ProbabilityTable) -> Result<f64> {
    somers_matrix(&two_way(t)?)
}

pub(crate) fn gamma_matrix(m: &[Vec<f64>]) -> Result<f64> {
    let (s, d) = concordance(m);
    if s + d <= 0.0 {
        return Err(Error::UndefinedMeasure("gamma: no concordant or discordant pairs".into()));
    }
    Ok((s - d) / (s + d))
}

pub(crate) fn somers_matrix(m: &[Vec<f64>]) -> Result<f64> {
    let (s, d) = concordance(m);
    let total: f64 = m.iter().flatten().sum();
    let denom = total * total - m.iter().flatten().map(|p| p * p).sum::<f64>();
    if denom <= VAR_TOL {
        return Err(Error::UndefinedMeasure("Somers' d: all mass in one cell".into()));
    }
    Ok((s - d) / denom)
}

/// Probabilities `(S, D)` of concordant and discordant ordered pairs.
pub(crate) fn concordance(m: &[Vec<f64>]) -> (f64, f64) {
    let (cs, ds) = neighbourhoods(m);
    let mut s = 0.0;
    let mut d = 0.0;
    for (i, row) in m.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            s += p * cs[i][j];
            d += p * ds[i][j];
        }
    }
    (s, d)
}

/// Per cell, the mass strictly concordant and strictly discordant with it.
/// These are also the partial derivatives of `S / 2` and `D / 2`.
pub(crate) fn neighbourhoods(m: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let ni = m.len();
    let nj = m.first().map_or(0, Vec::len);
    // ne[i][j] = sum over k >= i, l >= j; computed with padded cumulative sums
    let mut ne = vec![vec![0.0; nj + 1]; ni + 1];
    let mut nw = vec![vec![0.0; nj + 1]; ni + 1];
    for i in (0..ni).rev() {
        for j in (0..nj).rev() {
            ne[i][j] = m[i][j] + ne[i + 1][j] + ne[i][j + 1] - ne[i + 1][j + 1];
        }
        for j in 0..nj {
            // nw[i][j+1] = sum over k >= i, l <= j
            nw[i][j + 1] = m[i][j] + nw[i + 1][j + 1] + nw[i][j] - nw[i + 1][j];
        }
    }
    let mut sw = vec![vec![0.0; nj + 1]; ni + 1];
    let mut se = vec![vec![0.0; nj + 1]; ni + 1];
    for i in 0..ni {
        for j in 0..nj {
            // sw[i+1][j+1] = sum over k <= i, l <= j
            sw[i + 1][j + 1] = m[i][j] + sw[i][j + 1] + sw[i + 1][j] - sw[i][j];
        }
        for j in (0..nj).rev() {
            // se[i+1][j] = sum over k <= i, l >= j
            se[i + 1][j] = m[i][j] + se[i][j] + se[i + 1][j + 1] - se[i][j + 1];
        }
    }
    let mut conc = vec![vec![0.0; nj]; ni];
    let mut disc = vec![vec![0.0; nj]; ni];
    for i in 0..ni {
        for j in 0..nj {
            conc[i][j] = ne[i + 1][j + 1] + sw[i][j];
            disc[i][j] = nw[i + 1][j] + se[i][j + 1];
        }
    }
    (conc, disc)
}

/// Two-way table with the given margins and extremal association:
/// `sign > 0` fills the northwest corner greedily (gamma 1), `sign < 0`
/// does the same on reversed rows and reverses back (gamma -1).
pub fn max_association_table(p: &[f64], q: &[f64], sign: i32) -> Result<ProbabilityTable> {
    for (name, v) in [("row", p), ("column", q)] {
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Argument(format!("{name} margins must be nonnegative")));
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > PROB_TOL {
            return Err(Error::Argument(format!("{name} margins sum to {s}, expected 1")));
        }
    }
    if sign == 0 {
        return Err(Error::Argument("sign must be +1 or -1".into()));
    }
    let rows: Vec<f64> = if sign > 0 { p.to_vec() } else { p.iter().rev().copied().collect() };
    let mut m = northwest_corner(&rows, q);
    if sign < 0 {
        m.reverse();
    }
    ProbabilityTable::from_matrix(&m)
}

fn northwest_corner(p: &[f64], q: &[f64]) -> Vec<Vec<f64>> {
    let mut p = p.to_vec();
    let mut q = q.to_vec();
    let mut t = vec![vec![0.0; q.len()]; p.len()];
    for i in 0..p.len() {
        for j in 0..q.len() {
            let m = p[i].min(q[j]);
            t[i][j] = m;
            p[i] -= m;
            q[j] -= m;
        }
    }
    t
}

/// Evaluates one measure on a pair of axes. `categories` selects the
/// category pair for `Ld` and `Phi`; scores default to `1..=I`.
pub fn measure_pair(
    t: &ProbabilityTable,
    kind: MeasureKind,
    axes: (usize, usize),
    categories: Option<(usize, usize)>,
    scores: Option<&ScoreVectors>,
) -> Result<PairMeasureResult> {
    let (a, b) = axes;
    if a == b {
        return Err(Error::Argument(format!("axes must differ, got {a} twice")));
    }
    let cats = || categories.ok_or_else(|| Error::Argument("this measure needs a category pair".into()));
    let value = match kind {
        MeasureKind::Ld => {
            let (ca, cb) = cats()?;
            ld_pair(t, a, ca, b, cb)?
        }
        MeasureKind::Phi => {
            let (ca, cb) = cats()?;
            pearson_phi(t, a, ca, b, cb)?
        }
        MeasureKind::Pearson => {
            let default;
            let s = match scores {
                Some(s) => s,
                None => {
                    default = ScoreVectors::default_for(t.dims());
                    &default
                }
            };
            pearson_rho_scored(t, a, b, s)?
        }
        MeasureKind::Gamma => gamma_matrix(&t.pair_marginal(a, b)?)?,
        MeasureKind::SomersD => somers_matrix(&t.pair_marginal(a, b)?)?,
    };
    Ok(PairMeasureResult {
        value,
        kind,
        axes,
        categories: match kind {
            MeasureKind::Ld | MeasureKind::Phi => categories,
            _ => None,
        },
    })
}
