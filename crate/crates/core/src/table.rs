//! Dense multi-way tables in canonical flat order.
//!
//! Cells are stored with the last axis varying fastest, so the cell with
//! zero-based multi-index `(i_1, ..., i_c)` lives at
//! `sum_m i_m * prod_{k > m} I_k`. Every module exchanges tables in this
//! order. Axes and categories are zero-based throughout the library; the
//! command-line front end translates from one-based user input.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const PROB_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TableShape {
    dims: Vec<usize>,
}

impl TableShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidTable("a table needs at least one axis".into()));
        }
        if let Some((axis, &n)) = dims.iter().enumerate().find(|(_, &n)| n < 2) {
            return Err(Error::InvalidTable(format!(
                "axis {axis} has {n} categories; at least 2 are required"
            )));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_axes(&self) -> usize {
        self.dims.len()
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for m in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[m] = strides[m + 1] * self.dims[m + 1];
        }
        strides
    }

    pub fn flatten_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.dims.len() {
            return Err(Error::Index(format!(
                "multi-index has {} components, table has {} axes",
                index.len(),
                self.dims.len()
            )));
        }
        let mut flat = 0;
        for (axis, (&i, &n)) in index.iter().zip(&self.dims).enumerate() {
            if i >= n {
                return Err(Error::Index(format!(
                    "category {i} on axis {axis} (axis has {n} categories)"
                )));
            }
            flat = flat * n + i;
        }
        Ok(flat)
    }

    pub fn unflatten_index(&self, flat: usize) -> Result<Vec<usize>> {
        if flat >= self.n_cells() {
            return Err(Error::Index(format!(
                "flat index {flat} (table has {} cells)",
                self.n_cells()
            )));
        }
        let mut rest = flat;
        let mut index = vec![0; self.dims.len()];
        for m in (0..self.dims.len()).rev() {
            index[m] = rest % self.dims[m];
            rest /= self.dims[m];
        }
        Ok(index)
    }

    /// All multi-indices in canonical order.
    pub fn indices(&self) -> MultiIndexIter<'_> {
        MultiIndexIter {
            dims: &self.dims,
            next: Some(vec![0; self.dims.len()]),
        }
    }

    pub(crate) fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dims.len() {
            return Err(Error::Index(format!(
                "axis {axis} (table has {} axes)",
                self.dims.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_category(&self, axis: usize, category: usize) -> Result<()> {
        self.check_axis(axis)?;
        if category >= self.dims[axis] {
            return Err(Error::Index(format!(
                "category {category} on axis {axis} (axis has {} categories)",
                self.dims[axis]
            )));
        }
        Ok(())
    }
}

/// Odometer over multi-indices, last axis fastest.
pub struct MultiIndexIter<'a> {
    dims: &'a [usize],
    next: Option<Vec<usize>>,
}

impl Iterator for MultiIndexIter<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut m = self.dims.len();
        loop {
            if m == 0 {
                break;
            }
            m -= 1;
            succ[m] += 1;
            if succ[m] < self.dims[m] {
                self.next = Some(succ);
                break;
            }
            succ[m] = 0;
        }
        Some(current)
    }
}

/// A table of nonnegative cell values (counts or probabilities).
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    shape: TableShape,
    cells: Vec<f64>,
}

impl ContingencyTable {
    pub fn new(shape: TableShape, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != shape.n_cells() {
            return Err(Error::InvalidTable(format!(
                "shape {:?} needs {} cells, got {}",
                shape.dims(),
                shape.n_cells(),
                cells.len()
            )));
        }
        if let Some((i, v)) = cells.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidTable(format!(
                "cell {i} is {v}; cells must be finite and nonnegative"
            )));
        }
        Ok(Self { shape, cells })
    }

    pub fn from_dims(dims: &[usize], cells: Vec<f64>) -> Result<Self> {
        Self::new(TableShape::new(dims.to_vec())?, cells)
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<f64> {
        self.cells
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.cells[self.shape.flatten_index(index)?])
    }

    /// True when every cell is a whole number.
    pub fn is_integral(&self) -> bool {
        self.cells.iter().all(|v| v.fract() == 0.0 && *v < 2f64.powi(53))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.shape.clone(), self.cells.iter().map(|v| v * factor).collect())
    }

    pub fn to_probabilities(&self) -> Result<ProbabilityTable> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::InvalidTable("table has zero total".into()));
        }
        let cells = self.cells.iter().map(|v| v / total).collect();
        ProbabilityTable::new(self.shape.clone(), cells)
    }

    /// Sums over every axis not in `kept_axes`. Output axes keep their
    /// relative order.
    pub fn marginal(&self, kept_axes: &[usize]) -> Result<ContingencyTable> {
        if kept_axes.is_empty() {
            return Err(Error::Argument("marginal needs at least one kept axis".into()));
        }
        let mut kept = kept_axes.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if kept.len() != kept_axes.len() {
            return Err(Error::Argument(format!("duplicate axes in {kept_axes:?}")));
        }
        for &a in &kept {
            self.shape.check_axis(a)?;
        }
        let out_shape = TableShape::new(kept.iter().map(|&a| self.dims()[a]).collect())?;
        let mut out = vec![0.0; out_shape.n_cells()];
        for (index, &v) in self.shape.indices().zip(&self.cells) {
            let flat = kept
                .iter()
                .fold(0, |acc, &a| acc * self.dims()[a] + index[a]);
            out[flat] += v;
        }
        ContingencyTable::new(out_shape, out)
    }

    /// One-way marginal totals of `axis`.
    pub fn one_way(&self, axis: usize) -> Result<Vec<f64>> {
        Ok(self.marginal(&[axis])?.cells)
    }

    /// Two-way marginal totals as a matrix with rows indexed by `row_axis`.
    pub fn pair_marginal(&self, row_axis: usize, col_axis: usize) -> Result<Vec<Vec<f64>>> {
        if row_axis == col_axis {
            return Err(Error::Argument(format!("pair needs two distinct axes, got {row_axis} twice")));
        }
        let m = self.marginal(&[row_axis, col_axis])?;
        let (lo, hi) = (row_axis.min(col_axis), row_axis.max(col_axis));
        let (ni, nj) = (self.dims()[lo], self.dims()[hi]);
        let grid: Vec<Vec<f64>> = (0..ni).map(|i| m.cells[i * nj..(i + 1) * nj].to_vec()).collect();
        Ok(if row_axis < col_axis { grid } else { transpose(&grid) })
    }

    /// Reverses the category order of one axis.
    pub fn reverse_axis(&self, axis: usize) -> Result<Self> {
        self.shape.check_axis(axis)?;
        let n = self.dims()[axis];
        let mut cells = vec![0.0; self.cells.len()];
        for (flat, mut index) in self.shape.indices().enumerate() {
            index[axis] = n - 1 - index[axis];
            cells[self.shape.flatten_index(&index)?] = self.cells[flat];
        }
        Self::new(self.shape.clone(), cells)
    }

    /// Moves axis `perm[k]` of `self` to position `k` of the result.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        let c = self.shape.n_axes();
        let mut seen = vec![false; c];
        if perm.len() != c || perm.iter().any(|&a| a >= c || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::Argument(format!("{perm:?} is not a permutation of {c} axes")));
        }
        let shape = TableShape::new(perm.iter().map(|&a| self.dims()[a]).collect())?;
        let mut cells = vec![0.0; self.cells.len()];
        for (flat, index) in shape.indices().enumerate() {
            let mut source = vec![0; c];
            for (k, &a) in perm.iter().enumerate() {
                source[a] = index[k];
            }
            cells[flat] = self.cells[self.shape.flatten_index(&source)?];
        }
        Self::new(shape, cells)
    }
}

impl Serialize for ContingencyTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TableDocument::from_table(self, TableKind::Counts).serialize(serializer)
    }
}

impl Serialize for ProbabilityTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TableDocument::from_table(&self.0, TableKind::Probabilities).serialize(serializer)
    }
}

pub(crate) fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j]).collect()).collect()
}

/// A contingency table whose cells sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable(ContingencyTable);

impl Deref for ProbabilityTable {
    type Target = ContingencyTable;

    fn deref(&self) -> &ContingencyTable {
        &self.0
    }
}

impl ProbabilityTable {
    pub fn new(shape: TableShape, cells: Vec<f64>) -> Result<Self> {
        let table = ContingencyTable::new(shape, cells)?;
        let total = table.total();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidTable(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        if let Some(v) = table.cells.iter().find(|v| **v > 1.0 + PROB_TOL) {
            return Err(Error::InvalidTable(format!("probability {v} exceeds 1")));
        }
        Ok(Self(table))
    }

    pub fn from_dims(dims: &[usize], cells: Vec<f64>) -> Result<Self> {
        Self::new(TableShape::new(dims.to_vec())?, cells)
    }

    /// 2-way table from a row-major matrix.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let ni = rows.len();
        let nj = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nj) {
            return Err(Error::InvalidTable("ragged matrix".into()));
        }
        Self::from_dims(&[ni, nj], rows.concat())
    }

    pub fn as_table(&self) -> &ContingencyTable {
        &self.0
    }

    pub fn into_table(self) -> ContingencyTable {
        self.0
    }

    /// Row-major matrix view of a 2-way table.
    pub fn to_matrix(&self) -> Result<Vec<Vec<f64>>> {
        if self.shape().n_axes() != 2 {
            return Err(Error::Argument(format!(
                "expected a 2-way table, got {} axes",
                self.shape().n_axes()
            )));
        }
        let nj = self.dims()[1];
        Ok(self.cells().chunks(nj).map(<[f64]>::to_vec).collect())
    }

    pub fn marginal(&self, kept_axes: &[usize]) -> Result<ProbabilityTable> {
        Ok(ProbabilityTable(self.0.marginal(kept_axes)?))
    }

    pub fn reverse_axis(&self, axis: usize) -> Result<Self> {
        Ok(Self(self.0.reverse_axis(axis)?))
    }

    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        Ok(Self(self.0.permute_axes(perm)?))
    }

    /// The conditional table given `category` of `axis`, over the
    /// remaining axes.
    pub fn condition(&self, axis: usize, category: usize) -> Result<ProbabilityTable> {
        self.shape().check_category(axis, category)?;
        if self.shape().n_axes() < 2 {
            return Err(Error::Argument("conditioning a 1-way table leaves no axes".into()));
        }
        let rest: Vec<usize> = (0..self.shape().n_axes()).filter(|&a| a != axis).collect();
        let shape = TableShape::new(rest.iter().map(|&a| self.dims()[a]).collect())?;
        let slice: Vec<f64> = self
            .shape()
            .indices()
            .zip(self.cells())
            .filter(|(index, _)| index[axis] == category)
            .map(|(_, &v)| v)
            .collect();
        let mass: f64 = slice.iter().sum();
        if mass <= 0.0 {
            return Err(Error::DegenerateStratum { axis, category });
        }
        ProbabilityTable::new(shape, slice.into_iter().map(|v| v / mass).collect())
    }

    /// Collapses the `(axis_a, axis_b)` marginal to the 2x2 table of
    /// category `cat_a` versus the rest and `cat_b` versus the rest.
    pub fn collapse_pair(
        &self,
        axis_a: usize,
        cat_a: usize,
        axis_b: usize,
        cat_b: usize,
    ) -> Result<ProbabilityTable> {
        self.shape().check_category(axis_a, cat_a)?;
        self.shape().check_category(axis_b, cat_b)?;
        let m = self.pair_marginal(axis_a, axis_b)?;
        let pij = m[cat_a][cat_b];
        let pi: f64 = m[cat_a].iter().sum();
        let pj: f64 = m.iter().map(|row| row[cat_b]).sum();
        let cells = [pij, pi - pij, pj - pij, 1.0 - pi - pj + pij]
            .iter()
            .map(|v| v.max(0.0))
            .collect();
        ProbabilityTable::from_dims(&[2, 2], cells)
    }
}

/// Zero-, one- and two-way marginal totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSet {
    pub grand_total: f64,
    pub one_way: Vec<Vec<f64>>,
    pub two_way: Vec<PairMargin>,
}

/// Two-way totals of axes `(row_axis, col_axis)`, `row_axis < col_axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMargin {
    pub row_axis: usize,
    pub col_axis: usize,
    pub totals: Vec<Vec<f64>>,
}

impl MarginalSet {
    /// All zero-, one- and two-way totals of `table`.
    pub fn from_table(table: &ContingencyTable) -> Result<Self> {
        let mut set = Self::one_way_from_table(table)?;
        let c = table.shape().n_axes();
        for i in 0..c {
            for j in i + 1..c {
                set.two_way.push(PairMargin {
                    row_axis: i,
                    col_axis: j,
                    totals: table.pair_marginal(i, j)?,
                });
            }
        }
        Ok(set)
    }

    /// Zero- and one-way totals only.
    pub fn one_way_from_table(table: &ContingencyTable) -> Result<Self> {
        let one_way = (0..table.shape().n_axes())
            .map(|a| table.one_way(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grand_total: table.total(),
            one_way,
            two_way: Vec::new(),
        })
    }

    /// Margins of the table in which every listed pair is independent:
    /// each two-way total is `n_i n_j / n`. Other pairs keep the totals of
    /// `table`.
    pub fn with_independent_pairs(
        table: &ContingencyTable,
        independent: &[(usize, usize)],
    ) -> Result<Self> {
        let mut set = Self::from_table(table)?;
        let n = set.grand_total;
        for pm in &mut set.two_way {
            let listed = independent
                .iter()
                .any(|&(a, b)| (a.min(b), a.max(b)) == (pm.row_axis, pm.col_axis));
            if listed {
                let (ri, ci) = (&set.one_way[pm.row_axis], &set.one_way[pm.col_axis]);
                pm.totals = ri.iter().map(|&x| ci.iter().map(|&y| x * y / n).collect()).collect();
            }
        }
        Ok(set)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.one_way.iter().map(Vec::len).collect()
    }

    pub fn pair(&self, row_axis: usize, col_axis: usize) -> Option<&PairMargin> {
        self.two_way
            .iter()
            .find(|pm| pm.row_axis == row_axis && pm.col_axis == col_axis)
    }

    /// Checks the redundancy identities: one-way vectors sum to the grand
    /// total and two-way matrices sum to the one-way vectors.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let scale = self.grand_total.abs().max(1.0);
        let close = |a: f64, b: f64| (a - b).abs() <= tol * scale;
        for (axis, v) in self.one_way.iter().enumerate() {
            if v.len() < 2 {
                return Err(Error::InconsistentMargins(format!("axis {axis} has fewer than 2 categories")));
            }
            if v.iter().any(|x| *x < -tol * scale) {
                return Err(Error::InconsistentMargins(format!("axis {axis} has a negative total")));
            }
            let s: f64 = v.iter().sum();
            if !close(s, self.grand_total) {
                return Err(Error::InconsistentMargins(format!(
                    "one-way totals of axis {axis} sum to {s}, grand total is {}",
                    self.grand_total
                )));
            }
        }
        for pm in &self.two_way {
            let (a, b) = (pm.row_axis, pm.col_axis);
            if a >= b || b >= self.one_way.len() {
                return Err(Error::InconsistentMargins(format!("bad axis pair ({a}, {b})")));
            }
            let (ra, cb) = (&self.one_way[a], &self.one_way[b]);
            if pm.totals.len() != ra.len() || pm.totals.iter().any(|r| r.len() != cb.len()) {
                return Err(Error::InconsistentMargins(format!("pair ({a}, {b}) has the wrong shape")));
            }
            for (k, row) in pm.totals.iter().enumerate() {
                let s: f64 = row.iter().sum();
                if !close(s, ra[k]) {
                    return Err(Error::InconsistentMargins(format!(
                        "pair ({a}, {b}) row {k} sums to {s}, one-way total is {}",
                        ra[k]
                    )));
                }
            }
            for (l, &target) in cb.iter().enumerate() {
                let s: f64 = pm.totals.iter().map(|r| r[l]).sum();
                if !close(s, target) {
                    return Err(Error::InconsistentMargins(format!(
                        "pair ({a}, {b}) column {l} sums to {s}, one-way total is {target}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    #[default]
    Counts,
    Probabilities,
}

/// JSON form of a table: `{"dims": [...], "cells": [...], "kind": "counts"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDocument {
    pub dims: Vec<usize>,
    pub cells: Vec<f64>,
    #[serde(default)]
    pub kind: TableKind,
}

impl TableDocument {
    pub fn from_table(table: &ContingencyTable, kind: TableKind) -> Self {
        Self {
            dims: table.dims().to_vec(),
            cells: table.cells().to_vec(),
            kind,
        }
    }

    pub fn into_table(self) -> Result<ContingencyTable> {
        let table = ContingencyTable::from_dims(&self.dims, self.cells)?;
        if self.kind == TableKind::Probabilities {
            let total = table.total();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidTable(format!(
                    "kind is \"probabilities\" but cells sum to {total}"
                )));
            }
        }
        Ok(table)
    }

    pub fn parse(text: &str) -> Result<ContingencyTable> {
        let doc: TableDocument = serde_json::from_str(text)
            .map_err(|e| Error::InvalidTable(format!("table JSON: {e}")))?;
        doc.into_table()
    }
}
