use std::fs;

use anyhow::{anyhow, bail, Context, Result};
use ctab_core::homogeneity::{equal_rho_2x2xk, equal_rho_subset_ml, zero_partial_fit};
use ctab_core::maxent::{chi_square_gof, fit_margins, LinearConstraint};
use ctab_core::measures::{measure_pair, MeasureKind, ScoreVectors};
use ctab_core::polytope::{cell_bounds, parametrize, parametrize_exact, refine, AffineParametrization, Scalar};
use ctab_core::simpson::decompose;
use ctab_core::simulate::{
    inversion_sample, lee_construct, nonlinear_assoc_bounds, pairs, pearson_bounds, pearson_construct,
    rho_bridge_for_d, witness_search, AssociationMeasure, AssociationTarget, CellPolicy, Objective,
    SearchOptions,
};
use ctab_core::threeway::{measure_all, no_threeway_table};
use ctab_core::{Error, MarginalSet, ProbabilityTable, TableDocument, TableShape};
use serde_json::{json, Value};

use crate::input::{self, cell_label};
use crate::report::Session;
use crate::*;

const EXACT_HIT: f64 = 1e-6;

pub fn run(command: &Command, s: &mut Session) -> Result<Value> {
    match command {
        Command::Measure(a) => measure(a, s),
        Command::Simpson(a) => simpson(a, s),
        Command::Homogeneity(a) => homogeneity(a, s),
        Command::Threeway(a) => threeway(a, s),
        Command::FixedCells(a) => fixed_cells(a, s),
        Command::Maxent(a) => maxent(a, s),
        Command::Simulate(a) => simulate(a, s),
        Command::Bounds(a) => bounds(a, s),
    }
}

/// Structured description of a finding that no admissible table exists.
pub fn infeasibility_json(e: &Error) -> Value {
    match e {
        Error::NoTable { stage, cell, detail } => json!({
            "kind": "no_table",
            "stage": stage + 1,
            "cell": cell + 1,
            "detail": detail,
        }),
        Error::InfeasibleNull(d) => json!({ "kind": "infeasible_null", "detail": d }),
        other => json!({ "kind": "infeasible", "detail": other.to_string() }),
    }
}

pub fn infeasibility_message(e: &Error) -> String {
    match e {
        Error::NoTable { stage, cell, detail } => {
            format!("no table satisfies the targets (stage {}, cell {}): {detail}", stage + 1, cell + 1)
        }
        other => other.to_string(),
    }
}

fn pair_json((i, j): (usize, usize)) -> Value {
    json!([i + 1, j + 1])
}

fn measure(a: &MeasureArgs, s: &mut Session) -> Result<Value> {
    let t = input::read_table(s, &a.table)?;
    let p = t.to_probabilities()?;
    let axes = input::index_list("--axes", &a.axes)?;
    let [x, y] = axes[..] else {
        bail!("--axes: expected two axes, got {}", axes.len());
    };
    let categories = match &a.categories {
        Some(text) => {
            let c = input::index_list("--categories", text)?;
            let [ca, cb] = c[..] else {
                bail!("--categories: expected two categories, got {}", c.len());
            };
            Some((ca, cb))
        }
        None => None,
    };
    let kind = match a.measure {
        MeasureName::Ld => MeasureKind::Ld,
        MeasureName::Phi => MeasureKind::Phi,
        MeasureName::Pearson => MeasureKind::Pearson,
        MeasureName::Gamma => MeasureKind::Gamma,
        MeasureName::SomersD => MeasureKind::SomersD,
    };
    let scores = input::read_scores(s, a.scores.as_deref(), p.dims())?;
    let r = measure_pair(&p, kind, (x, y), categories, Some(&scores))?;
    Ok(json!({
        "measure": kind,
        "axes": pair_json(r.axes),
        "categories": r.categories.map(pair_json),
        "value": r.value,
    }))
}

fn simpson(a: &SimpsonArgs, s: &mut Session) -> Result<Value> {
    let t = input::read_table(s, &a.table)?;
    let p = t.to_probabilities()?;
    let pair = input::pair_list("--pair", &a.pair)?;
    let [(x, cx), (y, cy)] = pair[..] else {
        bail!("--pair: expected 'axis:category,axis:category'");
    };
    if a.strata == 0 {
        bail!("--strata: indices start at 1");
    }
    let r = decompose(&p, x, cx, y, cy, a.strata - 1)?;
    let mut v = serde_json::to_value(&r)?;
    v["identity_residual"] = json!(r.identity_residual());
    Ok(v)
}

fn homogeneity(a: &HomogeneityArgs, s: &mut Session) -> Result<Value> {
    let t = input::read_table(s, &a.table)?;
    let strata = || -> Result<Vec<usize>> {
        let text = a.strata.as_deref().ok_or_else(|| anyhow!("--strata: required by this method"))?;
        input::index_list("--strata", text)
    };
    let r = match a.method {
        HomogeneityMethod::EqualRho => equal_rho_2x2xk(&t)?,
        HomogeneityMethod::ZeroPartial => zero_partial_fit(&t, &strata()?)?,
        HomogeneityMethod::EqualRhoMl => equal_rho_subset_ml(&t, &strata()?)?,
    };
    if r.boundary {
        s.warn("likelihood maximum on the edge of the admissible interval");
    }
    Ok(serde_json::to_value(&r)?)
}

fn threeway(a: &TableArg, s: &mut Session) -> Result<Value> {
    let t = input::read_table(s, &a.table)?;
    let p = t.to_probabilities()?;
    let m = measure_all(&p)?;
    let mut v = serde_json::to_value(m)?;
    v["no_threeway_table"] = serde_json::to_value(no_threeway_table(&p)?)?;
    Ok(v)
}

fn fixed_cells(a: &FixedCellsArgs, s: &mut Session) -> Result<Value> {
    let t = input::read_table(s, &a.table)?;
    let exact = if a.exact || a.no_exact { a.exact } else { t.is_integral() };
    let margins = MarginalSet::from_table(&t)?;
    let mut v = if exact {
        polytope_report(&parametrize_exact(t.shape(), &margins)?)?
    } else {
        polytope_report(&parametrize(t.shape(), &margins)?)?
    };
    v["exact"] = json!(exact);
    Ok(v)
}

fn polytope_report<T: Scalar>(par: &AffineParametrization<T>) -> Result<Value> {
    let shape = &par.shape;
    let label = |c: usize| cell_label(shape, c);
    let bounds = cell_bounds(par)?;
    let fixed: Vec<Value> = bounds
        .fixed
        .iter()
        .map(|&c| json!({ "cell": label(c), "value": bounds.lower[c].to_f64() }))
        .collect();
    let n_zero = bounds.fixed.iter().filter(|&&c| bounds.lower[c].is_zero_tol()).count();
    let all_bounds: Vec<Value> = (0..shape.n_cells())
        .map(|c| json!({ "cell": label(c), "lower": bounds.lower[c].to_f64(), "upper": bounds.upper[c].to_f64() }))
        .collect();
    let refined = refine(par, &bounds)?;
    let rp = &refined.parametrization;
    let expressions: Vec<Value> = rp
        .pinned()
        .into_iter()
        .filter(|c| !refined.bounds.is_fixed(*c))
        .map(|c| {
            let (c0, terms) = rp.expression(c);
            let terms: Vec<Value> = terms
                .iter()
                .map(|(f, k)| json!({ "cell": label(*f), "coefficient": k.to_f64() }))
                .collect();
            json!({ "cell": label(c), "constant": c0.to_f64(), "terms": terms })
        })
        .collect();
    Ok(json!({
        "dims": shape.dims(),
        "n_free": par.n_free(),
        "free_cells": par.free_vars.iter().map(|&c| label(c)).collect::<Vec<_>>(),
        "n_fixed": bounds.fixed.len(),
        "n_fixed_zero": n_zero,
        "fixed": fixed,
        "bounds": all_bounds,
        "refined": {
            "iterations": refined.iterations,
            "n_free": rp.n_free(),
            "free_cells": rp.free_vars.iter().map(|&c| label(c)).collect::<Vec<_>>(),
            "expressions": expressions,
        },
    }))
}

/// Residual degrees of freedom of a margin model: cells minus one, minus
/// main effects, minus the two-way interactions kept, minus extra
/// constraints.
fn model_df(dims: &[usize], pairs: &[(usize, usize)], extra: usize) -> usize {
    let cells: usize = dims.iter().product();
    let main: usize = dims.iter().map(|d| d - 1).sum();
    let inter: usize = pairs.iter().map(|&(i, j)| (dims[i] - 1) * (dims[j] - 1)).sum();
    (cells - 1).saturating_sub(main + inter + extra)
}

fn maxent(a: &MaxentArgs, s: &mut Session) -> Result<Value> {
    let t = input::read_table(s, &a.table)?;
    let shape = t.shape().clone();
    let independent = match &a.independent {
        Some(text) => input::pair_list("--independent", text)?,
        None => Vec::new(),
    };
    for &(i, j) in &independent {
        if i == j || i.max(j) >= shape.n_axes() {
            bail!("--independent: ({}, {}) is not a pair of distinct axes of the table", i + 1, j + 1);
        }
    }
    let (margins, kept) = match a.margins {
        MarginLevel::OneWay => {
            if !independent.is_empty() {
                bail!("--independent: needs two-way margins");
            }
            (MarginalSet::one_way_from_table(&t)?, Vec::new())
        }
        MarginLevel::TwoWay => {
            let kept: Vec<(usize, usize)> = pairs(shape.n_axes())
                .into_iter()
                .filter(|&(i, j)| !independent.iter().any(|&(a, b)| (a.min(b), a.max(b)) == (i, j)))
                .collect();
            (MarginalSet::with_independent_pairs(&t, &independent)?, kept)
        }
    };
    let mut extra = Vec::new();
    for text in &a.constrain {
        let (c, v) = text
            .split_once('=')
            .ok_or_else(|| anyhow!("--constrain: expected 'cell=value', got '{text}'"))?;
        let cell = input::cell("--constrain", c, &shape)?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| anyhow!("--constrain: '{v}' is not a number"))?;
        extra.push(LinearConstraint::cell(cell, value, shape.n_cells()));
    }
    let r = fit_margins(&shape, &margins, &extra)?;
    let df = model_df(shape.dims(), &kept, extra.len());
    let gof = match &a.gof {
        Some(path) => {
            let text = s.read("gof", path)?;
            let obs = TableDocument::parse(&text).with_context(|| format!("--gof {}", path.display()))?;
            if obs.shape() != &shape {
                bail!("--gof: dims {:?} differ from the table dims {:?}", obs.dims(), shape.dims());
            }
            let g = chi_square_gof(&obs, &r.fitted, df)?;
            if g.infinite {
                s.warn("observed counts on cells the fit forces to zero; chi-square is infinite");
            }
            Some(g)
        }
        None => None,
    };
    Ok(json!({
        "fitted": r.fitted,
        "entropy": r.entropy,
        "iterations": r.iterations,
        "max_constraint_residual": r.max_constraint_residual,
        "gradient_norm": r.gradient_norm,
        "df": df,
        "zero_cells": r.zero_cells.iter().map(|&c| cell_label(&shape, c)).collect::<Vec<_>>(),
        "gof": gof,
    }))
}

fn assoc(name: AssocName) -> AssociationMeasure {
    match name {
        AssocName::Pearson => AssociationMeasure::Pearson,
        AssocName::Gamma => AssociationMeasure::Gamma,
        AssocName::Somers => AssociationMeasure::SomersD,
    }
}

fn policy(p: Policy) -> CellPolicy {
    match p {
        Policy::Mean => CellPolicy::Mean,
        Policy::Ind => CellPolicy::Ind,
        Policy::Min => CellPolicy::Min,
        Policy::Max => CellPolicy::Max,
    }
}

fn shape_of(one_way: &[Vec<f64>]) -> Result<TableShape> {
    Ok(TableShape::new(one_way.iter().map(Vec::len).collect())?)
}

/// Every pairwise measure of `table`; undefined values are null.
fn achieved(table: &ProbabilityTable, scores: &ScoreVectors) -> Vec<Value> {
    let value = |kind, pair| measure_pair(table, kind, pair, None, Some(scores)).ok().map(|r| r.value);
    pairs(table.shape().n_axes())
        .into_iter()
        .map(|pair| {
            json!({
                "pair": pair_json(pair),
                "pearson": value(MeasureKind::Pearson, pair),
                "gamma": value(MeasureKind::Gamma, pair),
                "somers_d": value(MeasureKind::SomersD, pair),
            })
        })
        .collect()
}

fn pair_values(values: &[((usize, usize), f64)]) -> Vec<Value> {
    values
        .iter()
        .map(|&(p, v)| json!({ "pair": pair_json(p), "value": v }))
        .collect()
}

fn simulate(a: &SimulateArgs, s: &mut Session) -> Result<Value> {
    let m = input::read_marginals(s, &a.marginals, a.targets.as_deref())?;
    let measure = assoc(a.measure);
    for (k, t) in m.targets.iter().enumerate() {
        if t.measure != measure {
            bail!("targets[{k}].measure: {:?} does not match --measure", t.measure);
        }
    }
    let shape = shape_of(&m.one_way)?;
    let scores = input::read_scores(s, a.scores.as_deref(), shape.dims())?;
    let (table, details) = match (a.measure, a.method) {
        (AssocName::Pearson, SimMethod::Default) => {
            let c = pearson_construct(&m.one_way, &scores, &m.targets, policy(a.policy))?;
            let stages: Vec<Value> = c
                .stages
                .iter()
                .map(|st| {
                    json!({
                        "cell": cell_label(&shape, st.cell),
                        "lower": st.lower,
                        "upper": st.upper,
                        "value": st.value,
                        "case": st.case,
                    })
                })
                .collect();
            (c.table, json!({ "stages": stages }))
        }
        (AssocName::Pearson, _) => bail!("--method: pearson targets use the default method"),
        (_, SimMethod::Default) => {
            let c = lee_construct(&m.one_way, measure, &m.targets)?;
            let lambdas: Vec<Value> = c
                .pairs
                .iter()
                .map(|p| json!({ "pair": pair_json(p.pair), "lambda": p.lambda, "achieved": p.achieved, "two_way": p.two_way }))
                .collect();
            (c.table, json!({ "pairs": lambdas }))
        }
        (_, SimMethod::Search) => {
            let opts = SearchOptions {
                seed: a.seed,
                ..SearchOptions::default()
            };
            let w = witness_search(&m.one_way, &m.targets, &opts)?;
            if w.residual > EXACT_HIT {
                s.warn(format!("targets met only to within {:e}", w.residual));
            }
            (w.table, json!({ "residual": w.residual }))
        }
        (AssocName::Gamma, SimMethod::Bridge) => bail!("--method: bridge applies to somers targets"),
        (AssocName::Somers, SimMethod::Bridge) => {
            let all = pairs(shape.n_axes());
            let mut d = Vec::with_capacity(all.len());
            for pair in &all {
                let t = m
                    .targets
                    .iter()
                    .find(|t| t.pair == *pair)
                    .ok_or_else(|| anyhow!("targets: bridge needs a target for pair ({}, {})", pair.0 + 1, pair.1 + 1))?;
                d.push(t.value);
            }
            let b = rho_bridge_for_d(&d, policy(a.policy), &m.one_way, &scores, a.seed)?;
            if !b.exact {
                s.warn(format!("nearest table found; d residual {:e}", b.residual));
            }
            let rho: Vec<Value> = all.iter().zip(&b.rho).map(|(&p, r)| json!({ "pair": pair_json(p), "rho": r })).collect();
            (b.table, json!({ "rho": rho, "residual": b.residual, "exact": b.exact }))
        }
    };
    let sample = if a.n > 0 { Some(inversion_sample(&table, a.n, a.seed)?) } else { None };
    if let Some(path) = &a.out {
        let doc = match &sample {
            Some(c) => serde_json::to_string_pretty(c)?,
            None => serde_json::to_string_pretty(&table)?,
        };
        fs::write(path, doc + "\n").with_context(|| format!("--out: cannot write {}", path.display()))?;
    }
    Ok(json!({
        "measure": measure,
        "targets": m.targets.iter().map(|t: &AssociationTarget| json!({ "pair": pair_json(t.pair), "value": t.value })).collect::<Vec<_>>(),
        "table": table,
        "achieved": achieved(&table, &scores),
        "construction": details,
        "sample": sample,
        "seed": a.seed,
    }))
}

fn bounds(a: &BoundsArgs, s: &mut Session) -> Result<Value> {
    let m = input::read_marginals(s, &a.marginals, None)?;
    if !m.targets.is_empty() {
        s.warn("targets in --marginals are ignored by bounds");
    }
    let shape = shape_of(&m.one_way)?;
    let chosen = match &a.pairs {
        Some(text) => input::pair_list("--pairs", text)?,
        None => pairs(shape.n_axes()),
    };
    let weights = match &a.weights {
        Some(text) => input::number_list("--weights", text)?,
        None => vec![1.0; chosen.len()],
    };
    if weights.len() != chosen.len() {
        bail!("--weights: {} weights for {} pairs", weights.len(), chosen.len());
    }
    let terms: Vec<((usize, usize), f64)> = chosen.into_iter().zip(weights).collect();
    let objective = match a.objective {
        ObjectiveKind::Sum => Objective::Sum(terms),
        ObjectiveKind::Common => Objective::Common(terms),
    };
    let scores = input::read_scores(s, a.scores.as_deref(), shape.dims())?;
    match assoc(a.measure) {
        AssociationMeasure::Pearson => {
            let b = pearson_bounds(&m.one_way, &scores, &objective)?;
            Ok(json!({
                "lo": { "value": b.lo, "table": b.argmin },
                "hi": { "value": b.hi, "table": b.argmax },
            }))
        }
        measure => {
            let opts = SearchOptions {
                starts: a.starts,
                seed: a.seed,
                ..SearchOptions::default()
            };
            let b = nonlinear_assoc_bounds(&m.one_way, measure, &objective, &opts)?;
            let mut ends = Vec::new();
            for (name, e) in [("lo", &b.lo), ("hi", &b.hi)] {
                if e.infeasibility > EXACT_HIT {
                    s.warn(format!("{name}: equal-value restraints violated by {:e}", e.infeasibility));
                }
                ends.push(json!({
                    "value": e.value,
                    "table": e.table,
                    "pair_values": pair_values(&e.pair_values),
                    "infeasibility": e.infeasibility,
                }));
            }
            Ok(json!({ "lo": ends[0], "hi": ends[1] }))
        }
    }
}
