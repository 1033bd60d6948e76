//! Parsing of command-line values and input documents. Everything a user
//! types is one-based; the returned values are zero-based.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ctab_core::measures::ScoreVectors;
use ctab_core::simulate::{AssociationMeasure, AssociationTarget};
use ctab_core::{ContingencyTable, TableDocument, TableShape};
use serde::Deserialize;

use crate::report::Session;

pub fn read_table(session: &mut Session, path: &Path) -> Result<ContingencyTable> {
    let text = session.read("table", path)?;
    TableDocument::parse(&text).with_context(|| format!("--table {}", path.display()))
}

fn one_based(field: &str, token: &str) -> Result<usize> {
    let v: usize = token
        .trim()
        .parse()
        .map_err(|_| anyhow!("{field}: '{token}' is not a positive integer"))?;
    if v == 0 {
        bail!("{field}: indices start at 1");
    }
    Ok(v - 1)
}

/// `"1,2,3"` to zero-based indices.
pub fn index_list(field: &str, text: &str) -> Result<Vec<usize>> {
    text.split(',').map(|t| one_based(field, t)).collect()
}

/// `"a:b"` to a zero-based pair.
pub fn colon_pair(field: &str, text: &str) -> Result<(usize, usize)> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("{field}: expected 'a:b', got '{text}'"))?;
    Ok((one_based(field, a)?, one_based(field, b)?))
}

/// `"1:2,1:3"` to zero-based pairs.
pub fn pair_list(field: &str, text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(',').map(|t| colon_pair(field, t)).collect()
}

pub fn number_list(field: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| anyhow!("{field}: '{t}' is not a number")))
        .collect()
}

/// A cell given as a one-based multi-index `"i,j,k"` or a one-based flat
/// position `"n"`.
pub fn cell(field: &str, text: &str, shape: &TableShape) -> Result<usize> {
    let idx = index_list(field, text)?;
    if idx.len() == 1 && shape.n_axes() > 1 {
        if idx[0] >= shape.n_cells() {
            bail!("{field}: cell {} outside a table of {} cells", idx[0] + 1, shape.n_cells());
        }
        return Ok(idx[0]);
    }
    shape.flatten_index(&idx).map_err(|e| anyhow!("{field}: {e}"))
}

/// One-based multi-index of a flat cell.
pub fn cell_label(shape: &TableShape, flat: usize) -> Vec<usize> {
    shape
        .unflatten_index(flat)
        .map(|v| v.into_iter().map(|i| i + 1).collect())
        .unwrap_or_default()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetDoc {
    pair: [usize; 2],
    measure: AssociationMeasure,
    value: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarginalsDoc {
    #[serde(default)]
    one_way: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    targets: Option<Vec<TargetDoc>>,
}

pub struct Marginals {
    pub one_way: Vec<Vec<f64>>,
    pub targets: Vec<AssociationTarget>,
}

fn parse_marginals(tag: &str, path: &Path, text: &str) -> Result<MarginalsDoc> {
    serde_json::from_str(text).with_context(|| format!("--{tag} {}", path.display()))
}

/// Reads the one-way margins from `marginals` and the targets from
/// `targets` when given, otherwise from `marginals`.
pub fn read_marginals(session: &mut Session, marginals: &Path, targets: Option<&Path>) -> Result<Marginals> {
    let text = session.read("marginals", marginals)?;
    let doc = parse_marginals("marginals", marginals, &text)?;
    let one_way = doc
        .one_way
        .ok_or_else(|| anyhow!("--marginals {}: missing field `one_way`", marginals.display()))?;
    let mut target_docs = doc.targets;
    if let Some(path) = targets {
        let text = session.read("targets", path)?;
        let tdoc = parse_marginals("targets", path, &text)?;
        target_docs = Some(
            tdoc.targets
                .ok_or_else(|| anyhow!("--targets {}: missing field `targets`", path.display()))?,
        );
    }
    let mut out = Vec::new();
    for (k, t) in target_docs.unwrap_or_default().into_iter().enumerate() {
        let field = format!("targets[{k}].pair");
        if t.pair.contains(&0) {
            bail!("{field}: indices start at 1");
        }
        let (i, j) = (t.pair[0] - 1, t.pair[1] - 1);
        if j >= one_way.len() {
            bail!("{field}: axis {} but the margins have {} axes", j + 1, one_way.len());
        }
        let target = AssociationTarget::new(i, j, t.measure, t.value).with_context(|| format!("targets[{k}]"))?;
        out.push(target);
    }
    Ok(Marginals { one_way, targets: out })
}

pub fn read_scores(session: &mut Session, path: Option<&Path>, dims: &[usize]) -> Result<ScoreVectors> {
    let Some(path) = path else {
        return Ok(ScoreVectors::default_for(dims));
    };
    let text = session.read("scores", path)?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text).with_context(|| format!("--scores {}", path.display()))?;
    if rows.iter().map(Vec::len).ne(dims.iter().copied()) {
        bail!("--scores {}: score vector lengths do not match the axes {dims:?}", path.display());
    }
    Ok(ScoreVectors::new(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_are_shifted_to_zero_based() {
        assert_eq!(index_list("f", "1, 3,2").unwrap(), vec![0, 2, 1]);
        assert_eq!(pair_list("f", "1:2,2:3").unwrap(), vec![(0, 1), (1, 2)]);
        assert!(index_list("f", "0").unwrap_err().to_string().contains("start at 1"));
        assert!(colon_pair("f", "12").is_err());
        assert_eq!(number_list("f", "1,-0.5").unwrap(), vec![1.0, -0.5]);
    }

    #[test]
    fn cells_by_index_or_position() {
        let s = TableShape::new(vec![2, 3, 4]).unwrap();
        assert_eq!(cell("c", "1,1,1", &s).unwrap(), 0);
        assert_eq!(cell("c", "2,3,4", &s).unwrap(), 23);
        assert_eq!(cell("c", "24", &s).unwrap(), 23);
        assert!(cell("c", "25", &s).is_err());
        assert!(cell("c", "1,4,1", &s).is_err());
        assert_eq!(cell_label(&s, 23), vec![2, 3, 4]);
    }
}
