//! Multinomial sampling by inversion of the cumulative cell distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::table::{ContingencyTable, ProbabilityTable};

/// `n` draws from `p` with a generator seeded by `seed`.
pub fn inversion_sample(p: &ProbabilityTable, n: u64, seed: u64) -> Result<ContingencyTable> {
    inversion_sample_with(p, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn inversion_sample_with<R: Rng + ?Sized>(p: &ProbabilityTable, n: u64, rng: &mut R) -> Result<ContingencyTable> {
    let cells = p.cells();
    let mut cumulative = Vec::with_capacity(cells.len());
    let mut acc = 0.0;
    for v in cells {
        acc += v;
        cumulative.push(acc);
    }
    // draws landing past the rounded total go to the last cell with mass
    let last = cells.iter().rposition(|v| *v > 0.0).unwrap_or(0);
    let mut counts = vec![0.0; cells.len()];
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let k = cumulative.partition_point(|c| *c <= u).min(last);
        counts[k] += 1.0;
    }
    ContingencyTable::new(p.shape().clone(), counts)
}
