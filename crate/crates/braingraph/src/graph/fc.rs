//! Functional connectivity: Pearson correlation between ROI timecourses.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Pairwise Pearson correlations of the columns of a [T x N] matrix.
/// Pairs involving a constant ROI are 0; the diagonal is exactly 1;
/// all entries clamped to [-1, 1]; output exactly symmetric.
pub fn pearson_fc(timecourses: &Tensor) -> Result<Tensor> {
    if timecourses.rank() != 2 {
        return Err(Error::Dimension("pearson_fc expects [T, N]".into()));
    }
    let (t, n) = (timecourses.rows(), timecourses.cols());
    if t < 2 {
        return Err(Error::Contract(format!("need at least 2 timepoints, got {t}")));
    }
    let x = timecourses.values();
    let mut means = vec![0.0; n];
    for row in 0..t {
        for j in 0..n {
            means[j] += x[row * n + j];
        }
    }
    for m in &mut means {
        *m /= t as f64;
    }
    let mut norms = vec![0.0; n];
    for row in 0..t {
        for j in 0..n {
            let d = x[row * n + j] - means[j];
            norms[j] += d * d;
        }
    }
    let constant: Vec<bool> = norms.iter().map(|&v| v.sqrt() < 1e-12).collect();

    let mut fc = Tensor::zeros(&[n, n]);
    for i in 0..n {
        fc.set2(i, i, 1.0);
        for j in i + 1..n {
            let r = if constant[i] || constant[j] {
                0.0
            } else {
                let mut dot = 0.0;
                for row in 0..t {
                    dot += (x[row * n + i] - means[i]) * (x[row * n + j] - means[j]);
                }
                (dot / (norms[i].sqrt() * norms[j].sqrt())).clamp(-1.0, 1.0)
            };
            fc.set2(i, j, r);
            fc.set2(j, i, r);
        }
    }
    Ok(fc)
}
