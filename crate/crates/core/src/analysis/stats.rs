use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Sample Pearson correlation. Errors on fewer than two points or zero
/// variance on either side rather than returning a number.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::DegenerateInput(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(AnalysisError::DegenerateInput(format!("{n} points")));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 || !(sxx.is_finite() && syy.is_finite()) {
        return Err(AnalysisError::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One correlation with its sample accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub measure: String,
    pub against: String,
    /// `None` when not computable.
    pub r: Option<f64>,
    pub n: usize,
    pub dropped: usize,
}

/// Pearson over the positions where both sides are present.
pub fn pearson_pairwise(
    measure: &str,
    against: &str,
    x: &[Option<f64>],
    y: &[Option<f64>],
) -> Correlation {
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip();
    Correlation {
        measure: measure.to_string(),
        against: against.to_string(),
        r: pearson(&xs, &ys).ok(),
        n: xs.len(),
        dropped: x.len().max(y.len()) - xs.len(),
    }
}

/// Zero-base threshold for [`percent_change`].
pub const EPSILON: f64 = 1e-12;

/// `100·(deformed − original)/original`, or `None` when the original is
/// within [`EPSILON`] of zero.
pub fn percent_change(original: f64, deformed: f64) -> Option<f64> {
    (original.abs() >= EPSILON).then(|| 100.0 * (deformed - original) / original)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}
