//! Dense bounded-variable primal simplex with Bland's rule.
//!
//! Problems have the form `A x = b`, `0 <= x_j <= u_j` (`u_j` optional).
//! Phase one drives artificial variables to zero and drops redundant rows;
//! the resulting feasible tableau can then be optimized for any number of
//! objectives, each solve starting from the previous optimal basis.

use crate::error::{Error, Result};

use super::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub a: Vec<Vec<T>>,
    pub b: Vec<T>,
    /// Upper bound per variable; every lower bound is zero.
    pub upper: Vec<Option<T>>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(a: Vec<Vec<T>>, b: Vec<T>) -> Self {
        let n = a.first().map_or(0, Vec::len);
        Self { a, b, upper: vec![None; n] }
    }

    pub fn n_vars(&self) -> usize {
        self.upper.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub value: T,
    pub x: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
}

/// A basic feasible solution of an equality-form program.
#[derive(Debug, Clone)]
pub struct FeasibleTableau<T> {
    n: usize,
    rows: Vec<Vec<T>>,
    beta: Vec<T>,
    basis: Vec<usize>,
    state: Vec<State>,
    upper: Vec<Option<T>>,
    max_pivots: usize,
}

impl<T: Scalar> FeasibleTableau<T> {
    /// Phase one. Fails with `Error::Infeasible` when the region is empty.
    pub fn new(lp: &LinearProgram<T>) -> Result<Self> {
        let m = lp.a.len();
        let n = lp.n_vars();
        if lp.b.len() != m || lp.a.iter().any(|r| r.len() != n) {
            return Err(Error::Argument("linear program dimensions disagree".into()));
        }
        let mut rows = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m);
        for (i, (row, bi)) in lp.a.iter().zip(&lp.b).enumerate() {
            let flip = bi.is_neg();
            let mut r: Vec<T> = row.iter().map(|v| if flip { -v.clone() } else { v.clone() }).collect();
            r.extend((0..m).map(|k| if k == i { T::one() } else { T::zero() }));
            rows.push(r);
            beta.push(if flip { -bi.clone() } else { bi.clone() });
        }
        let mut upper = lp.upper.clone();
        upper.extend(std::iter::repeat_n(None, m));
        let mut state = vec![State::Lower; n];
        state.extend(std::iter::repeat_n(State::Basic, m));
        let mut t = Self {
            n,
            rows,
            beta,
            basis: (n..n + m).collect(),
            state,
            upper,
            max_pivots: 50 * (n + m + 10) * (m + 10),
        };
        for (j, u) in lp.upper.iter().enumerate() {
            if let Some(u) = u {
                if u.is_neg() {
                    return Err(Error::Infeasible(format!("variable {j} has a negative upper bound")));
                }
            }
        }
        let mut cost = vec![T::zero(); n];
        cost.extend(std::iter::repeat_n(T::one(), m));
        t.run(&cost)?;
        let infeas = t.beta.iter().zip(&t.basis).filter(|(_, &j)| j >= n).fold(T::zero(), |acc, (v, _)| acc + v.clone());
        if infeas.is_pos() {
            return Err(Error::Infeasible(format!(
                "no nonnegative solution (phase-one residual {:e})",
                infeas.to_f64()
            )));
        }
        t.drive_out_artificials();
        Ok(t)
    }

    fn drive_out_artificials(&mut self) {
        let n = self.n;
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] < n {
                i += 1;
                continue;
            }
            let entering = (0..n).find(|&j| self.state[j] != State::Basic && !self.rows[i][j].is_zero_tol());
            match entering {
                Some(j) => {
                    let value = self.nonbasic_value(j);
                    let leaving = self.basis[i];
                    self.pivot(i, j);
                    self.state[leaving] = State::Lower;
                    self.state[j] = State::Basic;
                    self.basis[i] = j;
                    self.beta[i] = value;
                    i += 1;
                }
                None => {
                    let leaving = self.basis[i];
                    self.state[leaving] = State::Lower;
                    self.rows.remove(i);
                    self.beta.remove(i);
                    self.basis.remove(i);
                }
            }
        }
        for r in &mut self.rows {
            r.truncate(n);
        }
        self.state.truncate(n);
        self.upper.truncate(n);
    }

    /// Number of independent equality rows kept after phase one.
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    fn nonbasic_value(&self, j: usize) -> T {
        match self.state[j] {
            State::Upper => self.upper[j].clone().expect("upper state has a bound"),
            _ => T::zero(),
        }
    }

    /// Current basic feasible point.
    pub fn point(&self) -> Vec<T> {
        let mut x: Vec<T> = (0..self.n).map(|j| self.nonbasic_value(j)).collect();
        for (i, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                x[j] = self.beta[i].clone();
            }
        }
        x
    }

    pub fn optimize(&mut self, c: &[T], sense: Sense) -> Result<LpSolution<T>> {
        if c.len() != self.n {
            return Err(Error::Argument(format!("objective has {} weights for {} variables", c.len(), self.n)));
        }
        let cost: Vec<T> = match sense {
            Sense::Minimize => c.to_vec(),
            Sense::Maximize => c.iter().map(|v| -v.clone()).collect(),
        };
        self.run(&cost)?;
        let x = self.point();
        let value = c.iter().zip(&x).fold(T::zero(), |acc, (ci, xi)| acc + ci.clone() * xi.clone());
        Ok(LpSolution { value, x })
    }

    /// Minimum and maximum of `c . x`.
    pub fn range(&mut self, c: &[T]) -> Result<(LpSolution<T>, LpSolution<T>)> {
        let lo = self.optimize(c, Sense::Minimize)?;
        let hi = self.optimize(c, Sense::Maximize)?;
        Ok((lo, hi))
    }

    fn pivot(&mut self, i: usize, j: usize) {
        let p = self.rows[i][j].clone();
        for v in self.rows[i].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[i].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == i {
                continue;
            }
            let f = row[j].clone();
            if f == T::zero() {
                continue;
            }
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
        }
    }

    /// Minimizes `cost . x` from the current basis.
    fn run(&mut self, cost: &[T]) -> Result<()> {
        let ncols = cost.len();
        for _ in 0..self.max_pivots {
            let entering = (0..ncols).find(|&j| match self.state[j] {
                State::Basic => false,
                State::Lower => self.reduced_cost(cost, j).is_neg(),
                State::Upper => self.reduced_cost(cost, j).is_pos(),
            });
            let Some(j) = entering else {
                return Ok(());
            };
            let increasing = self.state[j] == State::Lower;
            let mut theta: Option<T> = self.upper[j].clone();
            let mut leave: Option<(usize, bool)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = if increasing { row[j].clone() } else { -row[j].clone() };
                let (limit, to_lower) = if a.is_pos() {
                    (self.beta[i].clone() / a.clone(), true)
                } else if a.is_neg() {
                    match &self.upper[self.basis[i]] {
                        Some(u) => ((u.clone() - self.beta[i].clone()) / -a.clone(), false),
                        None => continue,
                    }
                } else {
                    continue;
                };
                let limit = if limit.is_neg() || limit.is_zero_tol() && !T::is_exact() {
                    T::zero()
                } else {
                    limit
                };
                let better = match (&theta, leave) {
                    (None, _) => true,
                    (Some(t), None) => limit < *t,
                    (Some(t), Some((li, _))) => limit < *t || (limit == *t && self.basis[i] < self.basis[li]),
                };
                if better {
                    theta = Some(limit);
                    leave = Some((i, to_lower));
                }
            }
            let Some(theta) = theta else {
                return Err(Error::Argument("linear program is unbounded".into()));
            };
            let step = if increasing { theta.clone() } else { -theta.clone() };
            let entering_value = self.nonbasic_value(j) + step.clone();
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[j].clone();
                if a != T::zero() {
                    self.beta[i] = self.beta[i].clone() - step.clone() * a;
                }
            }
            match leave {
                None => {
                    self.state[j] = if increasing { State::Upper } else { State::Lower };
                }
                Some((i, to_lower)) => {
                    let leaving = self.basis[i];
                    self.pivot(i, j);
                    self.state[leaving] = if to_lower { State::Lower } else { State::Upper };
                    self.state[j] = State::Basic;
                    self.basis[i] = j;
                    self.beta[i] = entering_value;
                }
            }
        }
        Err(Error::NoConvergence("simplex pivot limit reached".into()))
    }

    fn reduced_cost(&self, cost: &[T], j: usize) -> T {
        let mut d = cost[j].clone();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost.get(b).cloned().unwrap_or_else(T::zero);
            if cb != T::zero() && row[j] != T::zero() {
                d = d - cb * row[j].clone();
            }
        }
        d
    }
}

/// One-shot solve.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>, c: &[T], sense: Sense) -> Result<LpSolution<T>> {
    FeasibleTableau::new(lp)?.optimize(c, sense)
}
