//! The polytope of nonnegative tables sharing given marginal totals.
//!
//! The constraint rows are the grand total, the one-way totals of every
//! category but the last on each axis, and the two-way totals of every
//! category pair below the last on each listed axis pair. Dropping the last
//! categories removes the redundant rows, so the matrix has full row rank.
//!
//! Everything is generic over [`Scalar`]: `BigRational` decides fixed cells
//! exactly, `f64` runs with an absolute tolerance of `1e-9`.

pub mod scalar;
pub mod simplex;

use num_rational::BigRational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::table::{MarginalSet, TableShape};

pub use scalar::Scalar;
pub use simplex::{FeasibleTableau, LinearProgram, LpSolution, Sense};

/// A linear equality `weights . cells = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub weights: Vec<f64>,
    pub rhs: f64,
}

impl LinearConstraint {
    /// `cell[index] = value`.
    pub fn cell(index: usize, value: f64, n_cells: usize) -> Self {
        let mut weights = vec![0.0; n_cells];
        weights[index] = 1.0;
        Self { weights, rhs: value }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowKind {
    Total,
    OneWay { axis: usize, category: usize },
    TwoWay { axes: (usize, usize), categories: (usize, usize) },
    Extra { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem<T = f64> {
    pub matrix: Vec<Vec<T>>,
    pub rhs: Vec<T>,
    pub rows: Vec<RowKind>,
    pub n_cells: usize,
}

impl<T: Scalar> ConstraintSystem<T> {
    pub fn rank(&self) -> usize {
        let aug = augmented(&self.matrix, &self.rhs);
        rref_right_to_left(aug, self.n_cells).1.len()
    }

    /// Appends extra equality rows.
    pub fn with_constraints(&self, extra: &[LinearConstraint]) -> Result<Self> {
        let mut out = self.clone();
        for (k, c) in extra.iter().enumerate() {
            if c.weights.len() != self.n_cells {
                return Err(Error::Argument(format!(
                    "constraint {k} has {} weights for {} cells",
                    c.weights.len(),
                    self.n_cells
                )));
            }
            out.matrix.push(convert_vec(&c.weights)?);
            out.rhs.push(convert(c.rhs)?);
            out.rows.push(RowKind::Extra { index: k });
        }
        Ok(out)
    }

    pub fn linear_program(&self) -> LinearProgram<T> {
        LinearProgram::new(self.matrix.clone(), self.rhs.clone())
    }
}

impl ConstraintSystem<f64> {
    /// The same system over exact rationals. Every finite double converts
    /// exactly, so integer input stays integral.
    pub fn to_exact(&self) -> Result<ConstraintSystem<BigRational>> {
        Ok(ConstraintSystem {
            matrix: self.matrix.iter().map(|r| convert_vec(r)).collect::<Result<_>>()?,
            rhs: convert_vec(&self.rhs)?,
            rows: self.rows.clone(),
            n_cells: self.n_cells,
        })
    }
}

fn convert<T: Scalar>(v: f64) -> Result<T> {
    T::from_f64(v).ok_or_else(|| Error::Argument(format!("non-finite value {v}")))
}

fn convert_vec<T: Scalar>(v: &[f64]) -> Result<Vec<T>> {
    v.iter().map(|x| convert(*x)).collect()
}

/// Rank predicted for the full zero-, one- and two-way system:
/// `1 + sum (I_i - 1) + sum_{i<j} (I_i - 1)(I_j - 1)`.
pub fn expected_rank(dims: &[usize]) -> usize {
    let r: Vec<usize> = dims.iter().map(|&n| n - 1).collect();
    let mut total = 1 + r.iter().sum::<usize>();
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            total += r[i] * r[j];
        }
    }
    total
}

pub fn build_constraints(shape: &TableShape, margins: &MarginalSet) -> Result<ConstraintSystem<f64>> {
    if margins.dims() != shape.dims() {
        return Err(Error::InconsistentMargins(format!(
            "margins describe {:?}, table shape is {:?}",
            margins.dims(),
            shape.dims()
        )));
    }
    margins.validate(1e-9)?;
    let d = shape.n_cells();
    let indices: Vec<Vec<usize>> = shape.indices().collect();
    let mut matrix = vec![vec![1.0; d]];
    let mut rhs = vec![margins.grand_total];
    let mut rows = vec![RowKind::Total];
    for (axis, totals) in margins.one_way.iter().enumerate() {
        for (category, &v) in totals.iter().enumerate().take(totals.len() - 1) {
            matrix.push(indices.iter().map(|ix| f64::from(u8::from(ix[axis] == category))).collect());
            rhs.push(v);
            rows.push(RowKind::OneWay { axis, category });
        }
    }
    let mut pairs: Vec<_> = margins.two_way.iter().collect();
    pairs.sort_by_key(|pm| (pm.row_axis, pm.col_axis));
    for pm in pairs {
        let (a, b) = (pm.row_axis, pm.col_axis);
        for i in 0..shape.dims()[a] - 1 {
            for j in 0..shape.dims()[b] - 1 {
                matrix.push(indices.iter().map(|ix| f64::from(u8::from(ix[a] == i && ix[b] == j))).collect());
                rhs.push(pm.totals[i][j]);
                rows.push(RowKind::TwoWay { axes: (a, b), categories: (i, j) });
            }
        }
    }
    Ok(ConstraintSystem { matrix, rhs, rows, n_cells: d })
}

fn augmented<T: Scalar>(matrix: &[Vec<T>], rhs: &[T]) -> Vec<Vec<T>> {
    matrix
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut row = r.clone();
            row.push(b.clone());
            row
        })
        .collect()
}

/// Gauss-Jordan elimination choosing pivot columns from the right, so the
/// free columns are the earliest cells. Returns the reduced rows and the
/// pivot column of each leading row.
fn rref_right_to_left<T: Scalar>(mut aug: Vec<Vec<T>>, ncols: usize) -> (Vec<Vec<T>>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut r = 0;
    for j in (0..ncols).rev() {
        if r == aug.len() {
            break;
        }
        let candidate = if T::is_exact() {
            (r..aug.len()).find(|&i| !aug[i][j].is_zero_tol())
        } else {
            (r..aug.len())
                .filter(|&i| !aug[i][j].is_zero_tol())
                .max_by(|&x, &y| aug[x][j].to_f64().abs().total_cmp(&aug[y][j].to_f64().abs()))
        };
        let Some(p) = candidate else { continue };
        aug.swap(r, p);
        let pv = aug[r][j].clone();
        for v in aug[r].iter_mut() {
            *v = v.clone() / pv.clone();
        }
        let pivot_row = aug[r].clone();
        for (i, row) in aug.iter_mut().enumerate() {
            if i == r || row[j] == T::zero() {
                continue;
            }
            let f = row[j].clone();
            for (v, pvv) in row.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pvv.clone();
            }
            row[j] = T::zero();
        }
        pivots.push(j);
        r += 1;
    }
    (aug, pivots)
}

/// Cells as affine functions of the free cells:
/// `cell[c] = constant[c] + sum_f coeffs[c][f] * cell[free_vars[f]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineParametrization<T = f64> {
    pub shape: TableShape,
    pub system: ConstraintSystem<T>,
    pub free_vars: Vec<usize>,
    pub constant: Vec<T>,
    pub coeffs: Vec<Vec<T>>,
}

impl<T: Scalar> AffineParametrization<T> {
    pub fn n_free(&self) -> usize {
        self.free_vars.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.n_cells() - self.free_vars.len()
    }

    /// Cells determined by the free ones.
    pub fn pinned(&self) -> Vec<usize> {
        (0..self.shape.n_cells()).filter(|c| !self.free_vars.contains(c)).collect()
    }

    /// Special solution: the table with every free cell zero.
    pub fn special_solution(&self) -> &[T] {
        &self.constant
    }

    /// Basis of the null space of the constraint matrix, one vector per
    /// free cell.
    pub fn homogeneous_basis(&self) -> Vec<Vec<T>> {
        (0..self.n_free())
            .map(|f| self.coeffs.iter().map(|row| row[f].clone()).collect())
            .collect()
    }

    pub fn evaluate(&self, free_values: &[T]) -> Result<Vec<T>> {
        if free_values.len() != self.n_free() {
            return Err(Error::Argument(format!(
                "{} free values for {} free cells",
                free_values.len(),
                self.n_free()
            )));
        }
        Ok(self
            .constant
            .iter()
            .zip(&self.coeffs)
            .map(|(c0, row)| {
                row.iter()
                    .zip(free_values)
                    .fold(c0.clone(), |acc, (a, x)| if *a == T::zero() { acc } else { acc + a.clone() * x.clone() })
            })
            .collect())
    }

    /// Free-cell values of a full table (read off directly).
    pub fn free_values_of(&self, cells: &[T]) -> Vec<T> {
        self.free_vars.iter().map(|&c| cells[c].clone()).collect()
    }

    /// `(constant, [(free cell, coefficient)])` for one cell, zero
    /// coefficients omitted.
    pub fn expression(&self, cell: usize) -> (T, Vec<(usize, T)>) {
        let terms = self.coeffs[cell]
            .iter()
            .zip(&self.free_vars)
            .filter(|(a, _)| !a.is_zero_tol())
            .map(|(a, &f)| (f, a.clone()))
            .collect();
        (self.constant[cell].clone(), terms)
    }
}

pub fn solve_affine<T: Scalar>(shape: &TableShape, cs: &ConstraintSystem<T>) -> Result<AffineParametrization<T>> {
    let d = cs.n_cells;
    if d != shape.n_cells() {
        return Err(Error::Argument("constraint system and shape disagree".into()));
    }
    let (reduced, pivots) = rref_right_to_left(augmented(&cs.matrix, &cs.rhs), d);
    for row in &reduced[pivots.len()..] {
        if !row[d].is_zero_tol() {
            return Err(Error::InconsistentMargins(format!(
                "the constraint rows are contradictory (residual {:e})",
                row[d].to_f64()
            )));
        }
    }
    let mut is_pivot = vec![false; d];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let free_vars: Vec<usize> = (0..d).filter(|&c| !is_pivot[c]).collect();
    let f = free_vars.len();
    let mut constant = vec![T::zero(); d];
    let mut coeffs = vec![vec![T::zero(); f]; d];
    for (k, &c) in free_vars.iter().enumerate() {
        coeffs[c][k] = T::one();
    }
    for (r, &p) in pivots.iter().enumerate() {
        constant[p] = reduced[r][d].clone();
        for (k, &c) in free_vars.iter().enumerate() {
            if reduced[r][c] != T::zero() {
                coeffs[p][k] = -reduced[r][c].clone();
            }
        }
    }
    Ok(AffineParametrization {
        shape: shape.clone(),
        system: cs.clone(),
        free_vars,
        constant,
        coeffs,
    })
}

/// Floating-point parametrization of the tables with the given margins.
pub fn parametrize(shape: &TableShape, margins: &MarginalSet) -> Result<AffineParametrization<f64>> {
    solve_affine(shape, &build_constraints(shape, margins)?)
}

/// Exact parametrization.
pub fn parametrize_exact(shape: &TableShape, margins: &MarginalSet) -> Result<AffineParametrization<BigRational>> {
    solve_affine(shape, &build_constraints(shape, margins)?.to_exact()?)
}

/// The feasible region of a constraint system, ready for repeated LP
/// solves.
#[derive(Debug, Clone)]
pub struct Region<T> {
    tableau: FeasibleTableau<T>,
}

impl<T: Scalar> Region<T> {
    pub fn new(cs: &ConstraintSystem<T>) -> Result<Self> {
        Ok(Self {
            tableau: FeasibleTableau::new(&cs.linear_program())?,
        })
    }

    pub fn range(&mut self, weights: &[T]) -> Result<FunctionalBounds<T>> {
        let (lo, hi) = self.tableau.range(weights)?;
        Ok(FunctionalBounds {
            lo: lo.value,
            hi: hi.value,
            argmin: lo.x,
            argmax: hi.x,
        })
    }

    pub fn optimize(&mut self, weights: &[T], sense: Sense) -> Result<LpSolution<T>> {
        self.tableau.optimize(weights, sense)
    }

    pub fn point(&self) -> Vec<T> {
        self.tableau.point()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellBounds<T = f64> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    /// Cells whose lower and upper bounds coincide.
    pub fixed: Vec<usize>,
}

impl<T: Scalar> CellBounds<T> {
    pub fn is_fixed(&self, cell: usize) -> bool {
        self.fixed.contains(&cell)
    }
}

/// Per-cell LP bounds over the region. The region is solved in its
/// equality form (cells as variables), which has the same optima as the
/// reduced form over the free cells.
pub fn cell_bounds<T: Scalar>(par: &AffineParametrization<T>) -> Result<CellBounds<T>> {
    let mut region = Region::new(&par.system)?;
    let d = par.shape.n_cells();
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    let mut fixed = Vec::new();
    for c in 0..d {
        let mut w = vec![T::zero(); d];
        w[c] = T::one();
        let b = region.range(&w)?;
        if (b.hi.clone() - b.lo.clone()).is_zero_tol() {
            fixed.push(c);
        }
        lower.push(b.lo);
        upper.push(b.hi);
    }
    Ok(CellBounds { lower, upper, fixed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement<T = f64> {
    pub parametrization: AffineParametrization<T>,
    pub bounds: CellBounds<T>,
    pub iterations: usize,
}

/// Pins every fixed cell, re-solves and recomputes bounds until the fixed
/// set stops changing.
pub fn refine<T: Scalar>(par: &AffineParametrization<T>, bounds: &CellBounds<T>) -> Result<Refinement<T>> {
    let mut current = par.clone();
    let mut current_bounds = bounds.clone();
    let mut iterations = 0;
    let d = par.shape.n_cells();
    loop {
        let pinned_now: Vec<usize> = current_bounds
            .fixed
            .iter()
            .copied()
            .filter(|&c| !current.pinned_by_row(c))
            .collect();
        if pinned_now.is_empty() {
            return Ok(Refinement {
                parametrization: current,
                bounds: current_bounds,
                iterations,
            });
        }
        let mut system = current.system.clone();
        for &c in &pinned_now {
            let mut row = vec![T::zero(); d];
            row[c] = T::one();
            system.matrix.push(row);
            system.rhs.push(current_bounds.lower[c].clone());
            system.rows.push(RowKind::Extra { index: c });
        }
        let next = solve_affine(&par.shape, &system)?;
        if next.n_free() > current.n_free() {
            return Err(Error::Degenerate("refinement increased the free-cell count".into()));
        }
        current_bounds = cell_bounds(&next)?;
        current = next;
        iterations += 1;
    }
}

impl<T: Scalar> AffineParametrization<T> {
    fn pinned_by_row(&self, cell: usize) -> bool {
        self.system.rows.iter().zip(&self.system.matrix).any(|(kind, row)| {
            matches!(kind, RowKind::Extra { .. })
                && row[cell] == T::one()
                && row.iter().enumerate().all(|(k, v)| k == cell || *v == T::zero())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalBounds<T = f64> {
    pub lo: T,
    pub hi: T,
    pub argmin: Vec<T>,
    pub argmax: Vec<T>,
}

/// Minimum and maximum of `weights . cells` over the region.
pub fn linear_functional_bounds<T: Scalar>(par: &AffineParametrization<T>, weights: &[T]) -> Result<FunctionalBounds<T>> {
    if weights.len() != par.shape.n_cells() {
        return Err(Error::Argument(format!(
            "{} weights for {} cells",
            weights.len(),
            par.shape.n_cells()
        )));
    }
    Region::new(&par.system)?.range(weights)
}
