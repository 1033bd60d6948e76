//! Python bindings. Indices are zero-based, as in the Rust crate. Tables go
//! in as `Table` objects; results come back as plain dicts and lists, with
//! tables inside them as `{"dims", "cells", "kind"}` dicts.

use ctab_core::homogeneity;
use ctab_core::maxent::{self, LinearConstraint};
use ctab_core::measures::{measure_pair, MeasureKind, ScoreVectors};
use ctab_core::polytope::{cell_bounds, parametrize, parametrize_exact, refine, AffineParametrization, Scalar};
use ctab_core::simpson;
use ctab_core::simulate::{
    self, AssociationMeasure, AssociationTarget, CellPolicy, Objective, SearchOptions,
};
use ctab_core::threeway;
use ctab_core::{ContingencyTable, MarginalSet, ProbabilityTable, TableDocument};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use pythonize::pythonize;
use serde::Serialize;

create_exception!(ctab, CtabError, PyValueError, "Invalid input or undefined result.");
create_exception!(ctab, InfeasibleError, CtabError, "No table satisfies the requested conditions.");

fn err(e: ctab_core::Error) -> PyErr {
    if e.is_infeasibility() {
        InfeasibleError::new_err(e.to_string())
    } else {
        CtabError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for ctab_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn to_py<'py, T: Serialize + ?Sized>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    pythonize(py, v).map_err(|e| CtabError::new_err(e.to_string()))
}

/// A dense table of counts or probabilities, last axis fastest.
#[pyclass(module = "ctab", frozen, skip_from_py_object)]
struct Table {
    inner: ContingencyTable,
}

#[pymethods]
impl Table {
    #[new]
    fn new(dims: Vec<usize>, cells: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: ContingencyTable::from_dims(&dims, cells).py_err()?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: TableDocument::parse(text).py_err()?,
        })
    }

    /// Accepts the table dicts found in results.
    #[staticmethod]
    fn from_dict(d: &Bound<'_, PyDict>) -> PyResult<Self> {
        let dims: Vec<usize> = d
            .get_item("dims")?
            .ok_or_else(|| CtabError::new_err("missing key 'dims'"))?
            .extract()?;
        let cells: Vec<f64> = d
            .get_item("cells")?
            .ok_or_else(|| CtabError::new_err("missing key 'cells'"))?
            .extract()?;
        Self::new(dims, cells)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| CtabError::new_err(e.to_string()))
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    #[getter]
    fn cells(&self) -> Vec<f64> {
        self.inner.cells().to_vec()
    }

    fn total(&self) -> f64 {
        self.inner.total()
    }

    fn get(&self, index: Vec<usize>) -> PyResult<f64> {
        self.inner.get(&index).py_err()
    }

    fn marginal(&self, axes: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.marginal(&axes).py_err()?,
        })
    }

    fn one_way(&self, axis: usize) -> PyResult<Vec<f64>> {
        self.inner.one_way(axis).py_err()
    }

    fn pair_marginal(&self, row_axis: usize, col_axis: usize) -> PyResult<Vec<Vec<f64>>> {
        self.inner.pair_marginal(row_axis, col_axis).py_err()
    }

    fn to_probabilities(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.to_probabilities().py_err()?.into_table(),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.cells().len()
    }

    fn __repr__(&self) -> String {
        format!("Table(dims={:?}, total={})", self.inner.dims(), self.inner.total())
    }
}

impl Table {
    fn probabilities(&self) -> PyResult<ProbabilityTable> {
        self.inner.to_probabilities().py_err()
    }
}

fn measure_kind(name: &str) -> PyResult<MeasureKind> {
    Ok(match name {
        "ld" => MeasureKind::Ld,
        "phi" => MeasureKind::Phi,
        "pearson" => MeasureKind::Pearson,
        "gamma" => MeasureKind::Gamma,
        "somers_d" | "somers" => MeasureKind::SomersD,
        other => return Err(CtabError::new_err(format!("unknown measure '{other}'"))),
    })
}

fn assoc(name: &str) -> PyResult<AssociationMeasure> {
    Ok(match name {
        "pearson" => AssociationMeasure::Pearson,
        "gamma" => AssociationMeasure::Gamma,
        "somers_d" | "somers" => AssociationMeasure::SomersD,
        other => return Err(CtabError::new_err(format!("unknown measure '{other}'"))),
    })
}

fn policy(name: &str) -> PyResult<CellPolicy> {
    Ok(match name {
        "mean" => CellPolicy::Mean,
        "ind" => CellPolicy::Ind,
        "min" => CellPolicy::Min,
        "max" => CellPolicy::Max,
        other => return Err(CtabError::new_err(format!("unknown policy '{other}'"))),
    })
}

fn targets(measure: AssociationMeasure, items: Vec<((usize, usize), f64)>) -> PyResult<Vec<AssociationTarget>> {
    items
        .into_iter()
        .map(|((i, j), v)| AssociationTarget::new(i, j, measure, v).py_err())
        .collect()
}

fn scores_for(one_way: &[Vec<f64>], scores: Option<Vec<Vec<f64>>>) -> PyResult<ScoreVectors> {
    match scores {
        Some(s) => ScoreVectors::new(s).py_err(),
        None => Ok(ScoreVectors::default_for(&one_way.iter().map(Vec::len).collect::<Vec<_>>())),
    }
}

/// One association measure of the pair of axes `axes`.
#[pyfunction]
#[pyo3(signature = (table, measure, axes, categories=None, scores=None))]
fn measure(
    table: &Table,
    measure: &str,
    axes: (usize, usize),
    categories: Option<(usize, usize)>,
    scores: Option<Vec<Vec<f64>>>,
) -> PyResult<f64> {
    let p = table.probabilities()?;
    let scores = scores.map(ScoreVectors::new).transpose().py_err()?;
    Ok(measure_pair(&p, measure_kind(measure)?, axes, categories, scores.as_ref())
        .py_err()?
        .value)
}

#[pyfunction]
fn simpson_decompose<'py>(
    py: Python<'py>,
    table: &Table,
    a: (usize, usize),
    b: (usize, usize),
    strata: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let r = simpson::decompose(&table.probabilities()?, a.0, a.1, b.0, b.1, strata).py_err()?;
    to_py(py, &r)
}

/// Homogeneity of stratum correlations in a 2x2xK count table.
/// `method` is `"equal_rho"`, `"zero_partial"` or `"equal_rho_ml"`.
#[pyfunction]
#[pyo3(signature = (table, method="equal_rho", strata=None))]
fn homogeneity_test<'py>(
    py: Python<'py>,
    table: &Table,
    method: &str,
    strata: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyAny>> {
    let needs = || strata.clone().ok_or_else(|| CtabError::new_err("this method needs strata"));
    let r = match method {
        "equal_rho" => homogeneity::equal_rho_2x2xk(&table.inner),
        "zero_partial" => homogeneity::zero_partial_fit(&table.inner, &needs()?),
        "equal_rho_ml" => homogeneity::equal_rho_subset_ml(&table.inner, &needs()?),
        other => return Err(CtabError::new_err(format!("unknown method '{other}'"))),
    }
    .py_err()?;
    to_py(py, &r)
}

#[pyfunction]
fn threeway_measures<'py>(py: Python<'py>, table: &Table) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &threeway::measure_all(&table.probabilities()?).py_err()?)
}

fn fixed_report<'py, T: Scalar>(py: Python<'py>, par: &AffineParametrization<T>) -> PyResult<Bound<'py, PyDict>> {
    let bounds = cell_bounds(par).py_err()?;
    let refined = refine(par, &bounds).py_err()?;
    let d = PyDict::new(py);
    let f64s = |v: &[T]| v.iter().map(Scalar::to_f64).collect::<Vec<_>>();
    d.set_item("free_cells", par.free_vars.clone())?;
    d.set_item("lower", f64s(&bounds.lower))?;
    d.set_item("upper", f64s(&bounds.upper))?;
    d.set_item("fixed", bounds.fixed.clone())?;
    d.set_item("refined_free_cells", refined.parametrization.free_vars.clone())?;
    d.set_item("iterations", refined.iterations)?;
    Ok(d)
}

/// Cell bounds and fixed cells over all tables with the two-way margins of
/// `table`. Exact arithmetic by default for integer tables.
#[pyfunction]
#[pyo3(signature = (table, exact=None))]
fn fixed_cells<'py>(py: Python<'py>, table: &Table, exact: Option<bool>) -> PyResult<Bound<'py, PyDict>> {
    let t = &table.inner;
    let exact = exact.unwrap_or_else(|| t.is_integral());
    let m = MarginalSet::from_table(t).py_err()?;
    let d = if exact {
        fixed_report(py, &parametrize_exact(t.shape(), &m).py_err()?)?
    } else {
        fixed_report(py, &parametrize(t.shape(), &m).py_err()?)?
    };
    d.set_item("exact", exact)?;
    Ok(d)
}

/// Maximum-entropy table with the one- and two-way margins of `table`.
/// Pairs in `independent` get the product of their one-way margins;
/// `constraints` maps flat cells to fixed probabilities.
#[pyfunction]
#[pyo3(signature = (table, independent=vec![], constraints=vec![]))]
fn maxent_fit<'py>(
    py: Python<'py>,
    table: &Table,
    independent: Vec<(usize, usize)>,
    constraints: Vec<(usize, f64)>,
) -> PyResult<Bound<'py, PyAny>> {
    let t = &table.inner;
    let m = MarginalSet::with_independent_pairs(t, &independent).py_err()?;
    let n = t.shape().n_cells();
    let extra: Vec<LinearConstraint> = constraints.iter().map(|&(c, v)| LinearConstraint::cell(c, v, n)).collect();
    to_py(py, &maxent::fit_margins(t.shape(), &m, &extra).py_err()?)
}

/// Pearson chi-square of observed counts against fitted probabilities.
#[pyfunction]
fn chi_square_gof<'py>(py: Python<'py>, observed: &Table, fitted: &Table, df: usize) -> PyResult<Bound<'py, PyAny>> {
    let g = maxent::chi_square_gof(&observed.inner, &fitted.probabilities()?, df).py_err()?;
    to_py(py, &g)
}

/// Sequential construction of a table with given one-way margins and
/// correlations. `targets` is a list of `((i, j), rho)`.
#[pyfunction]
#[pyo3(signature = (one_way, targets, policy="mean", scores=None))]
fn pearson_construct<'py>(
    py: Python<'py>,
    one_way: Vec<Vec<f64>>,
    targets: Vec<((usize, usize), f64)>,
    policy: &str,
    scores: Option<Vec<Vec<f64>>>,
) -> PyResult<Bound<'py, PyAny>> {
    let s = scores_for(&one_way, scores)?;
    let t = self::targets(AssociationMeasure::Pearson, targets)?;
    let c = simulate::pearson_construct(&one_way, &s, &t, self::policy(policy)?).py_err()?;
    to_py(py, &c)
}

/// Mixture construction for `"gamma"` or `"somers_d"` targets.
#[pyfunction]
fn mixture_construct<'py>(
    py: Python<'py>,
    one_way: Vec<Vec<f64>>,
    measure: &str,
    targets: Vec<((usize, usize), f64)>,
) -> PyResult<Bound<'py, PyAny>> {
    let m = assoc(measure)?;
    let c = simulate::lee_construct(&one_way, m, &self::targets(m, targets)?).py_err()?;
    to_py(py, &c)
}

/// Numerical search for a table meeting gamma or Somers' d targets.
#[pyfunction]
#[pyo3(signature = (one_way, measure, targets, seed=0, starts=20))]
fn witness_search<'py>(
    py: Python<'py>,
    one_way: Vec<Vec<f64>>,
    measure: &str,
    targets: Vec<((usize, usize), f64)>,
    seed: u64,
    starts: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let m = assoc(measure)?;
    let opts = SearchOptions {
        seed,
        starts,
        ..SearchOptions::default()
    };
    let w = simulate::witness_search(&one_way, &self::targets(m, targets)?, &opts).py_err()?;
    to_py(py, &w)
}

/// Correlations whose sequential construction meets the Somers' d targets,
/// one per axis pair in lexicographic order.
#[pyfunction]
#[pyo3(signature = (one_way, d_targets, policy="mean", seed=0))]
fn rho_bridge<'py>(
    py: Python<'py>,
    one_way: Vec<Vec<f64>>,
    d_targets: Vec<f64>,
    policy: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let s = scores_for(&one_way, None)?;
    let b = simulate::rho_bridge_for_d(&d_targets, self::policy(policy)?, &one_way, &s, seed).py_err()?;
    to_py(py, &b)
}

/// Range of an association objective over all tables with the one-way
/// margins. `objective` is `"sum"` or `"common"`; `terms` lists
/// `((i, j), weight)` and defaults to every pair with weight one.
#[pyfunction]
#[pyo3(signature = (one_way, measure, objective="sum", terms=None, seed=0, starts=20))]
fn association_bounds<'py>(
    py: Python<'py>,
    one_way: Vec<Vec<f64>>,
    measure: &str,
    objective: &str,
    terms: Option<Vec<((usize, usize), f64)>>,
    seed: u64,
    starts: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let terms = terms.unwrap_or_else(|| simulate::pairs(one_way.len()).into_iter().map(|p| (p, 1.0)).collect());
    let obj = match objective {
        "sum" => Objective::Sum(terms),
        "common" => Objective::Common(terms),
        other => return Err(CtabError::new_err(format!("unknown objective '{other}'"))),
    };
    match assoc(measure)? {
        AssociationMeasure::Pearson => {
            let s = scores_for(&one_way, None)?;
            to_py(py, &simulate::pearson_bounds(&one_way, &s, &obj).py_err()?)
        }
        m => {
            let opts = SearchOptions {
                seed,
                starts,
                ..SearchOptions::default()
            };
            to_py(py, &simulate::nonlinear_assoc_bounds(&one_way, m, &obj, &opts).py_err()?)
        }
    }
}

/// `n` multinomial draws from the cell probabilities of `table`.
#[pyfunction]
fn sample(table: &Table, n: u64, seed: u64) -> PyResult<Table> {
    Ok(Table {
        inner: simulate::inversion_sample(&table.probabilities()?, n, seed).py_err()?,
    })
}

#[pymodule]
fn ctab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Table>()?;
    m.add("CtabError", m.py().get_type::<CtabError>())?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(simpson_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(homogeneity_test, m)?)?;
    m.add_function(wrap_pyfunction!(threeway_measures, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_cells, m)?)?;
    m.add_function(wrap_pyfunction!(maxent_fit, m)?)?;
    m.add_function(wrap_pyfunction!(chi_square_gof, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_construct, m)?)?;
    m.add_function(wrap_pyfunction!(mixture_construct, m)?)?;
    m.add_function(wrap_pyfunction!(witness_search, m)?)?;
    m.add_function(wrap_pyfunction!(rho_bridge, m)?)?;
    m.add_function(wrap_pyfunction!(association_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    Ok(())
}
