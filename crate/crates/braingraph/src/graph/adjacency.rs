//! Proportional thresholding and symmetric adjacency normalization.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// N x N edge weights, tagged with whether self-loop normalization has
/// been applied.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub values: Tensor,
    pub normalized: bool,
}

impl Adjacency {
    pub fn raw(values: Tensor) -> Result<Self> {
        check_square(&values)?;
        Ok(Adjacency { values, normalized: false })
    }

    pub fn dim(&self) -> usize {
        self.values.rows()
    }
}

fn check_square(t: &Tensor) -> Result<()> {
    if t.rank() != 2 || t.rows() != t.cols() {
        return Err(Error::Dimension(format!("adjacency must be square, got {:?}", t.shape())));
    }
    Ok(())
}

/// How pairs are ranked when thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBy {
    /// Keep the most positive correlations (default).
    SignedValue,
    /// Keep the largest |value| regardless of sign.
    Magnitude,
}

/// Keeps the top ceil(keep_fraction * P) of the P = N(N-1)/2 node pairs
/// of a symmetric matrix, ranked descending by the upper-triangle entry
/// (ties broken by (i, j) lexicographic order). Retained negative
/// weights are clamped to 0 so that degree normalization stays real.
pub fn proportional_threshold(matrix: &Tensor, keep_fraction: f64) -> Result<Adjacency> {
    proportional_threshold_by(matrix, keep_fraction, RankBy::SignedValue)
}

pub fn proportional_threshold_by(
    matrix: &Tensor,
    keep_fraction: f64,
    rank: RankBy,
) -> Result<Adjacency> {
    check_square(matrix)?;
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Config(format!("keep_fraction {keep_fraction} outside (0, 1]")));
    }
    let n = matrix.rows();
    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j, matrix.at2(i, j)));
        }
    }
    let score = |v: f64| match rank {
        RankBy::SignedValue => v,
        RankBy::Magnitude => v.abs(),
    };
    // descending by score, lexicographic (i, j) on ties — sort keys are
    // total because all inputs are finite
    pairs.sort_by(|a, b| {
        score(b.2)
            .partial_cmp(&score(a.2))
            .unwrap()
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let keep = ((pairs.len() as f64 * keep_fraction).ceil() as usize).min(pairs.len());
    let mut out = Tensor::zeros(&[n, n]);
    for &(i, j, v) in pairs.iter().take(keep) {
        let w = v.max(0.0);
        out.set2(i, j, w);
        out.set2(j, i, w);
    }
    Adjacency::raw(out)
}

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
pub fn normalize_adjacency(raw: &Adjacency) -> Result<Adjacency> {
    if raw.values.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Contract("normalization requires non-negative weights".into()));
    }
    let n = raw.dim();
    let mut hat = raw.values.clone();
    for i in 0..n {
        hat.set2(i, i, hat.at2(i, i) + 1.0);
    }
    let inv_sqrt_deg: Vec<f64> =
        (0..n).map(|i| (0..n).map(|j| hat.at2(i, j)).sum::<f64>().sqrt().recip()).collect();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            out.set2(i, j, inv_sqrt_deg[i] * hat.at2(i, j) * inv_sqrt_deg[j]);
        }
    }
    Ok(Adjacency { values: out, normalized: true })
}
