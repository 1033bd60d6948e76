//! Pearson chi-square statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Upper tail probability of the chi-square distribution.
pub fn chi2_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Ok(if x > 0.0 { 0.0 } else { 1.0 });
    }
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::Argument(format!("chi-square: {e}")))?;
    Ok(dist.sf(x.max(0.0)))
}

/// `sum (o - e)^2 / e` over cells with positive expectation. Returns
/// `Ok(None)` when an observed positive count has zero expectation.
pub fn pearson_chi2(observed: &[f64], expected: &[f64], floor: f64) -> Result<Option<f64>> {
    if observed.len() != expected.len() {
        return Err(Error::Argument(format!(
            "observed has {} cells, expected has {}",
            observed.len(),
            expected.len()
        )));
    }
    let mut chi2 = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e >= floor && e > 0.0 {
            chi2 += (o - e) * (o - e) / e;
        } else if o > 0.0 {
            return Ok(None);
        }
    }
    Ok(Some(chi2))
}
