//! Do the partial correlations of the first two variables agree across the
//! strata of the third?
//!
//! All functions take the stratifying variable as axis 2 of a 2x2xK table.
//! Once the zero-, one- and two-way margins are fixed, a 2x2xK table has
//! K - 1 free cells and each stratum correlation is affine in the stratum's
//! first cell, so the equal-correlation null has a closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::maxent::{self, LinearConstraint};
use crate::measures::phi_2x2;
use crate::polytope;
use crate::stats::{chi2_sf, pearson_chi2};
use crate::table::{ContingencyTable, MarginalSet, ProbabilityTable};

/// First-category margins of a 2x2x2 probability table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margins2x2x2 {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p12: f64,
    pub p13: f64,
    pub p23: f64,
}

impl Margins2x2x2 {
    pub fn from_marginals(m: &MarginalSet) -> Result<Self> {
        if m.dims() != [2, 2, 2] {
            return Err(Error::Argument(format!("expected 2x2x2 margins, got {:?}", m.dims())));
        }
        m.validate(1e-10)?;
        let n = m.grand_total;
        if n <= 0.0 {
            return Err(Error::InconsistentMargins("grand total must be positive".into()));
        }
        let pair = |a, b| {
            m.pair(a, b)
                .map(|pm| pm.totals[0][0] / n)
                .ok_or_else(|| Error::InconsistentMargins(format!("missing two-way margin ({a}, {b})")))
        };
        Ok(Self {
            p1: m.one_way[0][0] / n,
            p2: m.one_way[1][0] / n,
            p3: m.one_way[2][0] / n,
            p12: pair(0, 1)?,
            p13: pair(0, 2)?,
            p23: pair(1, 2)?,
        })
    }

    /// `sqrt(p_1.1 p_2.1 p_.11 p_.21)` up to the stratum mass: the
    /// denominator of the stratum-1 correlation.
    fn a(&self) -> f64 {
        (self.p13 * (self.p3 - self.p13) * self.p23 * (self.p3 - self.p23)).max(0.0).sqrt()
    }

    fn b(&self) -> f64 {
        let q3 = 1.0 - self.p3;
        let (r1, r2) = (self.p1 - self.p13, self.p2 - self.p23);
        (r1 * (q3 - r1) * r2 * (q3 - r2)).max(0.0).sqrt()
    }
}

/// The cells of every 2x2x2 table with given margins, as `base + t * direction`
/// with `t = p_111`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineLine2x2x2 {
    pub base: [f64; 8],
    pub direction: [f64; 8],
    pub margins: Margins2x2x2,
}

const DIRECTION: [f64; 8] = [1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0];

impl AffineLine2x2x2 {
    pub fn at(&self, t: f64) -> [f64; 8] {
        std::array::from_fn(|i| self.base[i] + t * self.direction[i])
    }

    pub fn table(&self, t: f64) -> Result<ProbabilityTable> {
        let cells = self.at(t);
        if let Some(v) = cells.iter().find(|v| **v < 0.0) {
            return Err(Error::Infeasible(format!("t = {t} gives a negative cell {v}")));
        }
        ProbabilityTable::from_dims(&[2, 2, 2], cells.to_vec())
    }

    /// Range of `t` keeping every cell nonnegative.
    pub fn admissible_interval(&self) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (b, d) in self.base.iter().zip(&self.direction) {
            if *d > 0.0 {
                lo = lo.max(-b / d);
            } else {
                hi = hi.min(b / -d);
            }
        }
        (lo, hi)
    }
}

pub fn parametrize_2x2x2(margins: &MarginalSet) -> Result<AffineLine2x2x2> {
    let m = Margins2x2x2::from_marginals(margins)?;
    let base = [
        0.0,
        m.p12,
        m.p13,
        m.p1 - m.p12 - m.p13,
        m.p23,
        m.p2 - m.p12 - m.p23,
        m.p3 - m.p13 - m.p23,
        1.0 - m.p1 - m.p2 - m.p3 + m.p12 + m.p13 + m.p23,
    ];
    Ok(AffineLine2x2x2 {
        base,
        direction: DIRECTION,
        margins: m,
    })
}

/// Correlation of the first two variables within `stratum` (0 or 1) of the
/// table at `t`.
pub fn partial_rho(line: &AffineLine2x2x2, t: f64, stratum: usize) -> Result<f64> {
    let m = &line.margins;
    match stratum {
        0 => {
            let a = m.a();
            if a <= 0.0 {
                return Err(Error::DegenerateStratum { axis: 2, category: 0 });
            }
            Ok((t * m.p3 - m.p13 * m.p23) / a)
        }
        1 => {
            let b = m.b();
            if b <= 0.0 {
                return Err(Error::DegenerateStratum { axis: 2, category: 1 });
            }
            let q3 = 1.0 - m.p3;
            Ok(((m.p12 - t) * q3 - (m.p1 - m.p13) * (m.p2 - m.p23)) / b)
        }
        _ => Err(Error::Index(format!("stratum {stratum} of a 2x2x2 table"))),
    }
}

/// The value of `p_111` at which both stratum correlations agree.
pub fn homogeneous_point(margins: &MarginalSet) -> Result<f64> {
    let m = Margins2x2x2::from_marginals(margins)?;
    let (a, b) = (m.a(), m.b());
    if a <= 0.0 {
        return Err(Error::DegenerateStratum { axis: 2, category: 0 });
    }
    if b <= 0.0 {
        return Err(Error::DegenerateStratum { axis: 2, category: 1 });
    }
    let q3 = 1.0 - m.p3;
    let denom = b * m.p3 + a * q3;
    if denom <= 0.0 {
        return Err(Error::DegenerateStratum { axis: 2, category: 0 });
    }
    Ok((b * m.p13 * m.p23 + a * (q3 * m.p12 - (m.p1 - m.p13) * (m.p2 - m.p23))) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityResult {
    pub hypothetical: ProbabilityTable,
    /// Fitted `p_111`.
    pub p_tilde_111: f64,
    /// Fitted minus observed `p_111`.
    pub interaction: f64,
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    pub stratum_rhos: Vec<f64>,
    pub common_rho: Option<f64>,
    /// The likelihood maximum sits on the edge of the admissible interval.
    pub boundary: bool,
}

/// A 2x2xK table reduced to the quantities that fix its margins.
struct Strata {
    observed: ContingencyTable,
    n: f64,
    k: usize,
    /// `p_1.k`
    m1: Vec<f64>,
    /// `p_.1k`
    m2: Vec<f64>,
    /// `p_..k`
    pk: Vec<f64>,
    /// `p_11.`
    p12: f64,
    /// `p_11k`
    x_obs: Vec<f64>,
}

impl Strata {
    fn new(table: &ContingencyTable) -> Result<Self> {
        let dims = table.dims();
        if dims.len() != 3 || dims[0] != 2 || dims[1] != 2 {
            return Err(Error::Argument(format!("expected a 2x2xK table, got {dims:?}")));
        }
        let n = table.total();
        if n <= 0.0 {
            return Err(Error::InvalidTable("table has zero total".into()));
        }
        let p = table.to_probabilities()?;
        let k = dims[2];
        let pk = p.one_way(2)?;
        if let Some(c) = pk.iter().position(|&v| v <= 0.0) {
            return Err(Error::DegenerateStratum { axis: 2, category: c });
        }
        let m1 = p.pair_marginal(0, 2)?.swap_remove(0);
        let m2 = p.pair_marginal(1, 2)?.swap_remove(0);
        let x_obs = p.cells()[..k].to_vec();
        let p12 = x_obs.iter().sum();
        Ok(Self { observed: table.clone(), n, k, m1, m2, pk, p12, x_obs })
    }

    /// Stratum correlation denominator scaled by the stratum mass squared.
    fn s(&self, k: usize) -> f64 {
        let (m1, m2, p) = (self.m1[k], self.m2[k], self.pk[k]);
        (m1 * (p - m1) * m2 * (p - m2)).max(0.0).sqrt()
    }

    fn cells(&self, x: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut c = vec![0.0; 4 * k];
        for s in 0..k {
            c[s] = x[s];
            c[k + s] = self.m1[s] - x[s];
            c[2 * k + s] = self.m2[s] - x[s];
            c[3 * k + s] = self.pk[s] - self.m1[s] - self.m2[s] + x[s];
        }
        c
    }

    fn rho(&self, cells: &[f64], s: usize) -> Result<f64> {
        let k = self.k;
        let quad = [cells[s], cells[k + s], cells[2 * k + s], cells[3 * k + s]];
        let mass: f64 = quad.iter().sum();
        phi_2x2(&quad.map(|v| v / mass))
    }

    /// Builds the result for a null table; `strict` rejects zero cells too.
    fn finish(&self, cells: Vec<f64>, df: usize, common_rho: Option<f64>, strict: bool, boundary: bool) -> Result<HomogeneityResult> {
        for (i, &v) in cells.iter().enumerate() {
            if v < -1e-14 || (strict && v <= 0.0) {
                return Err(Error::InfeasibleNull(format!("cell {i} of the null table is {v}")));
            }
        }
        let cells: Vec<f64> = cells.into_iter().map(|v| v.max(0.0)).collect();
        let expected: Vec<f64> = cells.iter().map(|p| p * self.n).collect();
        let chi_square = pearson_chi2(self.observed.cells(), &expected, 0.0)?.ok_or_else(|| {
            Error::InfeasibleNull("the null table is zero where counts were observed".into())
        })?;
        let stratum_rhos = (0..self.k).map(|s| self.rho(&cells, s)).collect::<Result<Vec<_>>>()?;
        let p_tilde_111 = cells[0];
        let hypothetical = ProbabilityTable::from_dims(self.observed.dims(), cells)?;
        Ok(HomogeneityResult {
            hypothetical,
            p_tilde_111,
            interaction: p_tilde_111 - self.x_obs[0],
            chi_square,
            df,
            p_value: chi2_sf(chi_square, df)?,
            stratum_rhos,
            common_rho,
            boundary,
        })
    }

    fn check_strata(&self, strata: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.k];
        for &s in strata {
            if s >= self.k {
                return Err(Error::Index(format!("stratum {s} (table has {} strata)", self.k)));
            }
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::Argument(format!("stratum {s} listed twice")));
            }
        }
        Ok(())
    }
}

/// Chi-square test of equal stratum correlations in a 2x2x2 count table.
pub fn test_third_variable(table: &ContingencyTable) -> Result<HomogeneityResult> {
    if table.dims() != [2, 2, 2] {
        return Err(Error::Argument(format!("expected a 2x2x2 table, got {:?}", table.dims())));
    }
    let margins = MarginalSet::from_table(table.to_probabilities()?.as_table())?;
    let line = parametrize_2x2x2(&margins)?;
    let t = homogeneous_point(&margins)?;
    let strata = Strata::new(table)?;
    let rho = partial_rho(&line, t, 0)?;
    strata.finish(line.at(t).to_vec(), 1, Some(rho), true, false)
}

/// Fits the 2x2xK table with the observed margins whose K stratum
/// correlations all agree.
pub fn equal_rho_2x2xk(table: &ContingencyTable) -> Result<HomogeneityResult> {
    let st = Strata::new(table)?;
    if st.k < 2 {
        return Err(Error::Argument("need at least two strata".into()));
    }
    let all: Vec<usize> = (0..st.k).collect();
    let (r, x) = common_rho_solution(&st, &all, st.p12)?;
    st.finish(st.cells(&x), st.k - 1, Some(r), true, false)
}

/// Solves `rho_k = r` for every `k` in `subset` with `sum_subset x_k = total`.
fn common_rho_solution(st: &Strata, subset: &[usize], total: f64) -> Result<(f64, Vec<f64>)> {
    let mut num = total;
    let mut den = 0.0;
    for &k in subset {
        let s = st.s(k);
        if s <= 0.0 {
            return Err(Error::DegenerateStratum { axis: 2, category: k });
        }
        num -= st.m1[k] * st.m2[k] / st.pk[k];
        den += s / st.pk[k];
    }
    let r = num / den;
    let mut x = st.x_obs.clone();
    for &k in subset {
        x[k] = (r * st.s(k) + st.m1[k] * st.m2[k]) / st.pk[k];
    }
    Ok((r, x))
}

/// Fits the table whose conditional LD vanishes in every listed stratum.
/// Freedom left over (fewer than K - 1 strata) is resolved by maximum
/// entropy.
pub fn zero_partial_fit(table: &ContingencyTable, zero_strata: &[usize]) -> Result<HomogeneityResult> {
    let st = Strata::new(table)?;
    st.check_strata(zero_strata)?;
    let mut x = st.x_obs.clone();
    for &k in zero_strata {
        x[k] = st.m1[k] * st.m2[k] / st.pk[k];
    }
    let rest: Vec<usize> = (0..st.k).filter(|k| !zero_strata.contains(k)).collect();
    let df = zero_strata.len().min(st.k - 1);
    match rest.len() {
        0 => {
            let sum: f64 = x.iter().sum();
            if (sum - st.p12).abs() > 1e-12 {
                return Err(Error::Infeasible(format!(
                    "zero LD in every stratum needs p_11. = {sum}, observed {}",
                    st.p12
                )));
            }
            st.finish(st.cells(&x), df, None, false, false)
        }
        1 => {
            let fixed: f64 = zero_strata.iter().map(|&k| x[k]).sum();
            x[rest[0]] = st.p12 - fixed;
            st.finish(st.cells(&x), df, None, false, false)
        }
        _ => {
            let p = table.to_probabilities()?;
            let margins = MarginalSet::from_table(&p)?;
            let par = polytope::parametrize(p.shape(), &margins)?;
            let extra: Vec<LinearConstraint> = zero_strata
                .iter()
                .map(|&k| LinearConstraint::cell(k, x[k], p.cells().len()))
                .collect();
            let fit = maxent::max_entropy(&par, &extra)?;
            st.finish(fit.fitted.cells().to_vec(), df, None, false, false)
        }
    }
}

/// The strata in `equal_strata` (all but one) share a correlation; the
/// remaining free cell, `p_11` of the excluded stratum, maximizes the
/// multinomial log-likelihood.
pub fn equal_rho_subset_ml(table: &ContingencyTable, equal_strata: &[usize]) -> Result<HomogeneityResult> {
    let st = Strata::new(table)?;
    st.check_strata(equal_strata)?;
    if equal_strata.len() + 1 != st.k {
        return Err(Error::Argument(format!(
            "{} equal strata leave {} free cells; exactly one is required",
            equal_strata.len(),
            st.k - equal_strata.len()
        )));
    }
    let lone = (0..st.k).find(|k| !equal_strata.contains(k)).expect("one stratum left");
    let at = |x0: f64| -> Result<Vec<f64>> {
        let (_, mut x) = common_rho_solution(&st, equal_strata, st.p12 - x0)?;
        x[lone] = x0;
        Ok(st.cells(&x))
    };
    // every cell is affine in x0: c(x0) = a + b x0
    let a = at(0.0)?;
    let b: Vec<f64> = at(1.0)?.iter().zip(&a).map(|(c1, c0)| c1 - c0).collect();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (&ai, &bi) in a.iter().zip(&b) {
        if bi > 1e-15 {
            lo = lo.max(-ai / bi);
        } else if bi < -1e-15 {
            hi = hi.min(ai / -bi);
        } else if ai < 0.0 {
            return Err(Error::InfeasibleNull("a null cell is negative for every free value".into()));
        }
    }
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::InfeasibleNull("no admissible value of the free cell".into()));
    }
    let counts = st.observed.cells();
    let slope = |x: f64| -> f64 {
        counts
            .iter()
            .zip(a.iter().zip(&b))
            .filter(|(n, _)| **n > 0.0)
            .map(|(n, (ai, bi))| n * bi / (ai + bi * x))
            .sum()
    };
    // the log-likelihood is concave: bisect on the sign of its slope
    let (mut l, mut h) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (l + h);
        if slope(mid) > 0.0 {
            l = mid;
        } else {
            h = mid;
        }
        if h - l <= 1e-16 {
            break;
        }
    }
    let x0 = 0.5 * (l + h);
    let width = (hi - lo).max(f64::MIN_POSITIVE);
    let boundary = (x0 - lo) / width < 1e-9 || (hi - x0) / width < 1e-9;
    let (r, _) = common_rho_solution(&st, equal_strata, st.p12 - x0)?;
    let cells = at(x0)?;
    let df = st.k.saturating_sub(2);
    st.finish(cells, df, Some(r), false, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::testutil::positive_table;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn uniform_margins() -> MarginalSet {
        let t = ContingencyTable::from_dims(&[2, 2, 2], vec![0.125; 8]).unwrap();
        MarginalSet::from_table(&t).unwrap()
    }

    #[test]
    fn independence_line() {
        let line = parametrize_2x2x2(&uniform_margins()).unwrap();
        assert_eq!(line.base, [0.0, 0.25, 0.25, 0.0, 0.25, 0.0, 0.0, 0.25]);
        assert_eq!(line.direction, DIRECTION);
        assert_abs_diff_eq!(partial_rho(&line, 0.125, 0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(partial_rho(&line, 0.125, 1).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(homogeneous_point(&uniform_margins()).unwrap(), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn mood_table_lies_on_line() {
        let mood = datasets::mood();
        let p = mood.to_probabilities().unwrap();
        let line = parametrize_2x2x2(&MarginalSet::from_table(&mood).unwrap()).unwrap();
        let cells = line.at(79.0 / 836.0);
        for (a, b) in cells.iter().zip(p.cells()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
        let (lo, hi) = line.admissible_interval();
        assert!(lo <= 79.0 / 836.0 && 79.0 / 836.0 <= hi);
    }

    #[test]
    fn independent_margins_give_product() {
        let (p1, p2, p3) = (0.3, 0.6, 0.45);
        let mut cells = Vec::new();
        for a in [p1, 1.0 - p1] {
            for b in [p2, 1.0 - p2] {
                for c in [p3, 1.0 - p3] {
                    cells.push(a * b * c);
                }
            }
        }
        let t = ContingencyTable::from_dims(&[2, 2, 2], cells).unwrap();
        let pt = homogeneous_point(&MarginalSet::from_table(&t).unwrap()).unwrap();
        assert_abs_diff_eq!(pt, p1 * p2 * p3, epsilon = 1e-15);
    }

    #[test]
    fn homogeneous_table_has_zero_chi_square() {
        let mood = datasets::mood();
        let first = test_third_variable(&mood).unwrap();
        let rebuilt = first.hypothetical.scaled(836.0).unwrap();
        let again = test_third_variable(&rebuilt).unwrap();
        assert!(again.chi_square < 1e-20);
        assert!(again.interaction.abs() < 1e-15);
        assert_eq!(first.df, 1);
        // hand-rolled oracle
        let obs = mood.cells();
        let oracle: f64 = obs
            .iter()
            .zip(first.hypothetical.cells())
            .map(|(o, p)| (o - 836.0 * p).powi(2) / (836.0 * p))
            .sum();
        assert_abs_diff_eq!(first.chi_square, oracle, epsilon = 1e-10);
    }

    #[test]
    fn berkeley_equal_rho() {
        let r = equal_rho_2x2xk(&datasets::berkeley()).unwrap();
        assert_abs_diff_eq!(r.common_rho.unwrap(), 0.019, epsilon = 5e-4);
        assert_abs_diff_eq!(r.chi_square, 17.4, epsilon = 0.05);
        assert_eq!(r.df, 5);
        for rho in &r.stratum_rhos {
            assert_abs_diff_eq!(*rho, r.common_rho.unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_strata_agree_with_closed_form() {
        let mood = datasets::mood();
        let a = test_third_variable(&mood).unwrap();
        let b = equal_rho_2x2xk(&mood).unwrap();
        assert_abs_diff_eq!(a.p_tilde_111, b.p_tilde_111, epsilon = 1e-14);
        assert_abs_diff_eq!(a.chi_square, b.chi_square, epsilon = 1e-9);
    }

    #[test]
    fn berkeley_method_b() {
        let r = zero_partial_fit(&datasets::berkeley(), &[1, 2, 3, 4, 5]).unwrap();
        assert_abs_diff_eq!(r.chi_square, 3.69, epsilon = 0.01);
        assert_abs_diff_eq!(r.p_tilde_111, 0.0683, epsilon = 5e-5);
        for k in 1..6 {
            assert!(r.stratum_rhos[k].abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_on_independence_table() {
        let mut cells = Vec::new();
        let (pa, pb) = ([0.3, 0.7], [0.55, 0.45]);
        let pk = [0.2, 0.5, 0.3];
        for a in pa {
            for b in pb {
                for k in pk {
                    cells.push(1000.0 * a * b * k);
                }
            }
        }
        let t = ContingencyTable::from_dims(&[2, 2, 3], cells).unwrap();
        let r = zero_partial_fit(&t, &[0, 1, 2]).unwrap();
        assert!(r.chi_square < 1e-20);
        for (a, b) in r.hypothetical.cells().iter().zip(t.to_probabilities().unwrap().cells()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_partial_with_maxent_remainder() {
        let b = datasets::berkeley();
        let r = zero_partial_fit(&b, &[2, 3, 4, 5]).unwrap();
        assert_eq!(r.df, 4);
        for k in 2..6 {
            assert!(r.stratum_rhos[k].abs() < 1e-9);
        }
        let m = MarginalSet::from_table(&r.hypothetical).unwrap();
        let m0 = MarginalSet::from_table(&b.to_probabilities().unwrap()).unwrap();
        for (x, y) in m.two_way.iter().zip(&m0.two_way) {
            for (rx, ry) in x.totals.iter().zip(&y.totals) {
                for (u, v) in rx.iter().zip(ry) {
                    assert_abs_diff_eq!(*u, *v, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn berkeley_method_c() {
        let r = equal_rho_subset_ml(&datasets::berkeley(), &[1, 2, 3, 4, 5]).unwrap();
        assert_abs_diff_eq!(r.chi_square, 2.73, epsilon = 0.01);
        assert_abs_diff_eq!(r.stratum_rhos[0], 0.134, epsilon = 5e-4);
        assert_eq!(r.df, 4);
        assert!(!r.boundary);
        for k in 2..6 {
            assert_abs_diff_eq!(r.stratum_rhos[k], r.stratum_rhos[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn single_subset_stratum_recovers_observed() {
        let mood = datasets::mood();
        let r = equal_rho_subset_ml(&mood, &[1]).unwrap();
        assert_abs_diff_eq!(r.p_tilde_111, 79.0 / 836.0, epsilon = 1e-12);
        assert!(r.chi_square < 1e-18);
    }

    #[test]
    fn argument_errors() {
        let b = datasets::berkeley();
        assert!(matches!(equal_rho_subset_ml(&b, &[1, 2]), Err(Error::Argument(_))));
        assert!(matches!(zero_partial_fit(&b, &[6]), Err(Error::Index(_))));
        assert!(matches!(zero_partial_fit(&b, &[1, 1]), Err(Error::Argument(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn equal_partial_rho_at_homogeneous_point(t in positive_table(vec![2, 2, 2])) {
            let m = MarginalSet::from_table(&t).unwrap();
            let line = parametrize_2x2x2(&m).unwrap();
            let pt = homogeneous_point(&m).unwrap();
            let r0 = partial_rho(&line, pt, 0).unwrap();
            let r1 = partial_rho(&line, pt, 1).unwrap();
            prop_assert!((r0 - r1).abs() < 1e-10);
            // the line reproduces the observed table at its own p_111
            for (a, b) in line.at(t.cells()[0]).iter().zip(t.cells()) {
                prop_assert!((a - b).abs() < 1e-14);
            }
            // partial correlations equal phi of the conditioned table
            let x = t.cells()[0];
            let phi0 = crate::measures::pearson_phi(&t.condition(2, 0).unwrap(), 0, 0, 1, 0).unwrap();
            let phi1 = crate::measures::pearson_phi(&t.condition(2, 1).unwrap(), 0, 0, 1, 0).unwrap();
            prop_assert!((partial_rho(&line, x, 0).unwrap() - phi0).abs() < 1e-10);
            prop_assert!((partial_rho(&line, x, 1).unwrap() - phi1).abs() < 1e-10);
        }

        #[test]
        fn hypothetical_table_keeps_margins(t in positive_table(vec![2, 2, 4])) {
            let counts = t.scaled(500.0).unwrap();
            if let Ok(r) = equal_rho_2x2xk(&counts) {
                let m = MarginalSet::from_table(&r.hypothetical).unwrap();
                let m0 = MarginalSet::from_table(&t).unwrap();
                for (x, y) in m.two_way.iter().zip(&m0.two_way) {
                    for (rx, ry) in x.totals.iter().zip(&y.totals) {
                        for (u, v) in rx.iter().zip(ry) {
                            prop_assert!((u - v).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }
}
