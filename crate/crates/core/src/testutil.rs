use proptest::prelude::*;

use crate::table::ProbabilityTable;

/// Strictly positive probability table of the given shape.
pub fn positive_table(dims: Vec<usize>) -> impl Strategy<Value = ProbabilityTable> {
    let n: usize = dims.iter().product();
    prop::collection::vec(0.01f64..1.0, n).prop_map(move |raw| normalized(&dims, raw))
}

/// Probability table that may contain zero cells.
pub fn sparse_table(dims: Vec<usize>) -> impl Strategy<Value = ProbabilityTable> {
    let n: usize = dims.iter().product();
    prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.01f64..1.0], n)
        .prop_filter("nonzero total", |v| v.iter().sum::<f64>() > 0.0)
        .prop_map(move |raw| normalized(&dims, raw))
}

pub fn shape(max_axes: usize, max_cats: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2..=max_cats, 1..=max_axes)
}

pub fn normalized(dims: &[usize], raw: Vec<f64>) -> ProbabilityTable {
    let s: f64 = raw.iter().sum();
    ProbabilityTable::from_dims(dims, raw.into_iter().map(|v| v / s).collect()).unwrap()
}

/// Random probability vector with all entries at least `floor`.
pub fn simplex(k: usize, floor: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_map(move |raw| {
        let s: f64 = raw.iter().sum::<f64>() + 1e-9;
        let free = 1.0 - floor * k as f64;
        raw.iter().map(|v| floor + free * (v + 1e-9 / k as f64) / s).collect()
    })
}
