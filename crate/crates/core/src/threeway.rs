//! Three-way interaction in 2x2x2 tables.
//!
//! Cells are indexed `p_ijk` with zero-based flat position `4i + 2j + k`.
//! Bartlett's `D` is the shift along the margin-preserving direction
//! `(+,-,-,+,-,+,+,-)` that equalizes the two stratum odds ratios; Bennett's
//! `L` is its additive counterpart built from one-way margins and pairwise
//! LDs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::table::ProbabilityTable;

const SIGNS: [f64; 8] = [1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0];
const BISECTION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreewayMeasures {
    pub bartlett_d: f64,
    pub bennett_l: f64,
    pub taylor_d: f64,
    pub admissible_interval: (f64, f64),
}

fn cells(t: &ProbabilityTable) -> Result<[f64; 8]> {
    if t.dims() != [2, 2, 2] {
        return Err(Error::Argument(format!("expected a 2x2x2 table, got {:?}", t.dims())));
    }
    let mut c = [0.0; 8];
    c.copy_from_slice(t.cells());
    Ok(c)
}

fn g(p: &[f64; 8], d: f64) -> f64 {
    (p[0] - d) * (p[3] - d) * (p[5] - d) * (p[6] - d) - (p[1] + d) * (p[2] + d) * (p[4] + d) * (p[7] + d)
}

/// Range of `D` keeping every adjusted cell `p - D * sign` nonnegative.
pub fn admissible_interval(t: &ProbabilityTable) -> Result<(f64, f64)> {
    let p = cells(t)?;
    let lo = -[p[1], p[2], p[4], p[7]].into_iter().fold(f64::INFINITY, f64::min);
    let hi = [p[0], p[3], p[5], p[6]].into_iter().fold(f64::INFINITY, f64::min);
    Ok((lo, hi))
}

/// Bartlett's `D`: the root of
/// `(p111-D)(p122-D)(p212-D)(p221-D) = (p112+D)(p121+D)(p211+D)(p222+D)`
/// inside the admissible interval, found by bisection.
pub fn bartlett_d(t: &ProbabilityTable) -> Result<f64> {
    let p = cells(t)?;
    let (mut lo, mut hi) = admissible_interval(t)?;
    if lo >= hi {
        return Err(Error::Degenerate(
            "admissible interval for D is a single point (zero cells in both sign classes)".into(),
        ));
    }
    // g(lo) >= 0 >= g(hi) and g is strictly decreasing in between
    for _ in 0..200 {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(&p, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The table with the same two-way margins and no three-way interaction.
pub fn no_threeway_table(t: &ProbabilityTable) -> Result<ProbabilityTable> {
    let p = cells(t)?;
    let d = bartlett_d(t)?;
    let adjusted = p.iter().zip(SIGNS).map(|(v, s)| (v - d * s).max(0.0)).collect();
    ProbabilityTable::from_dims(&[2, 2, 2], adjusted)
}

/// First-category margins and pairwise LDs:
/// `(p1, p2, p3, D12, D13, D23)`.
fn margins(p: &[f64; 8]) -> (f64, f64, f64, f64, f64, f64) {
    let p1 = p[0] + p[1] + p[2] + p[3];
    let p2 = p[0] + p[1] + p[4] + p[5];
    let p3 = p[0] + p[2] + p[4] + p[6];
    let p12 = p[0] + p[1];
    let p13 = p[0] + p[2];
    let p23 = p[0] + p[4];
    (p1, p2, p3, p12 - p1 * p2, p13 - p1 * p3, p23 - p2 * p3)
}

/// Bennett's additive measure
/// `L = p111 - (p1 p2 p3 + p1 D23 + p2 D13 + p3 D12)`.
pub fn bennett_l(t: &ProbabilityTable) -> Result<f64> {
    let p = cells(t)?;
    let (p1, p2, p3, d12, d13, d23) = margins(&p);
    Ok(p[0] - (p1 * p2 * p3 + p1 * d23 + p2 * d13 + p3 * d12))
}

/// `p111` predicted by the first-order expansion of the no-interaction
/// cell around zero LDs.
pub fn taylor_p111(t: &ProbabilityTable) -> Result<f64> {
    let p = cells(t)?;
    let (p1, p2, p3, d12, d13, d23) = margins(&p);
    let (q1, q2, q3) = (1.0 - 2.0 * p1, 1.0 - 2.0 * p2, 1.0 - 2.0 * p3);
    Ok(64.0 * q1 * q2 * q3 * d12 * d13 * d23
        + 4.0 * q1 * d12 * d13
        + 4.0 * q2 * d12 * d23
        + 4.0 * q3 * d13 * d23
        + p3 * d12
        + p2 * d13
        + p1 * d23
        + p1 * p2 * p3)
}

pub fn taylor_d(t: &ProbabilityTable) -> Result<f64> {
    Ok(t.cells()[0] - taylor_p111(t)?)
}

pub fn measure_all(t: &ProbabilityTable) -> Result<ThreewayMeasures> {
    Ok(ThreewayMeasures {
        bartlett_d: bartlett_d(t)?,
        bennett_l: bennett_l(t)?,
        taylor_d: taylor_d(t)?,
        admissible_interval: admissible_interval(t)?,
    })
}
