//! Subjects, datasets, splits, and the synthetic generator.

pub mod io;
pub mod split;
pub mod synthetic;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// One participant: id, binary label, acquisition-site tag, and a
/// [T timepoints x N rois] matrix of z-scored timecourses.
#[derive(Debug, Clone)]
pub struct Subject {
    pub id: String,
    pub label: u8,
    pub site: String,
    pub timecourses: Tensor,
}

impl Subject {
    pub fn timepoints(&self) -> usize {
        self.timecourses.shape()[0]
    }

    pub fn num_rois(&self) -> usize {
        self.timecourses.shape()[1]
    }
}

/// Ordered collection of subjects with a uniform ROI count.
#[derive(Debug, Clone)]
pub struct TimeSeriesDataset {
    subjects: Vec<Subject>,
    num_rois: usize,
    pub source: String,
    pub generation_seed: Option<u64>,
}

impl TimeSeriesDataset {
    pub fn new(subjects: Vec<Subject>, source: &str, generation_seed: Option<u64>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::Data("dataset has no subjects".into()));
        }
        let num_rois = subjects[0].num_rois();
        let mut seen = std::collections::BTreeSet::new();
        let (mut zeros, mut ones) = (false, false);
        for s in &subjects {
            if s.timecourses.rank() != 2 {
                return Err(Error::Schema(format!("subject {}: timecourses must be rank-2", s.id)));
            }
            if s.num_rois() != num_rois {
                return Err(Error::Schema(format!(
                    "subject {} has {} ROIs, expected {num_rois}",
                    s.id,
                    s.num_rois()
                )));
            }
            if s.timepoints() < 2 || s.num_rois() < 2 {
                return Err(Error::Data(format!(
                    "subject {}: need T >= 2 and N >= 2, got {}x{}",
                    s.id,
                    s.timepoints(),
                    s.num_rois()
                )));
            }
            if !s.timecourses.all_finite() {
                return Err(Error::Data(format!("subject {}: non-finite timecourse", s.id)));
            }
            match s.label {
                0 => zeros = true,
                1 => ones = true,
                other => {
                    return Err(Error::Schema(format!("subject {}: label {other} not in {{0,1}}", s.id)))
                }
            }
            if !seen.insert(s.id.clone()) {
                return Err(Error::Schema(format!("duplicate subject id {}", s.id)));
            }
        }
        if !(zeros && ones) {
            return Err(Error::Data("dataset must contain both labels".into()));
        }
        Ok(TimeSeriesDataset { subjects, num_rois, source: source.to_string(), generation_seed })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn num_rois(&self) -> usize {
        self.num_rois
    }

    pub fn labels(&self) -> Vec<u8> {
        self.subjects.iter().map(|s| s.label).collect()
    }

    /// Dataset restricted to `indices`, preserving their order.
    pub fn select(&self, indices: &[usize]) -> Result<TimeSeriesDataset> {
        let subjects: Vec<Subject> = indices.iter().map(|&i| self.subjects[i].clone()).collect();
        TimeSeriesDataset::new(subjects, &self.source, self.generation_seed)
    }

    /// SHA-256 over ids, labels, sites, shapes, and raw sample bytes;
    /// stable fingerprint for run metadata.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.subjects {
            h.update(s.id.as_bytes());
            h.update([s.label]);
            h.update(s.site.as_bytes());
            h.update((s.timepoints() as u64).to_le_bytes());
            h.update((s.num_rois() as u64).to_le_bytes());
            for v in s.timecourses.values() {
                h.update(v.to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Center each column; scale non-constant columns to unit variance.
/// Constant columns end up exactly zero.
pub fn zscore_columns(t: &Tensor) -> Result<Tensor> {
    if t.rank() != 2 {
        return Err(Error::Dimension("zscore_columns expects rank-2".into()));
    }
    let (rows, cols) = (t.rows(), t.cols());
    let mut data = t.values().to_vec();
    for j in 0..cols {
        let mean: f64 = (0..rows).map(|i| data[i * cols + j]).sum::<f64>() / rows as f64;
        let var: f64 =
            (0..rows).map(|i| (data[i * cols + j] - mean).powi(2)).sum::<f64>() / rows as f64;
        let std = var.sqrt();
        if std < 1e-12 {
            for i in 0..rows {
                data[i * cols + j] = 0.0;
            }
        } else {
            for i in 0..rows {
                data[i * cols + j] = (data[i * cols + j] - mean) / std;
            }
        }
    }
    Tensor::new(vec![rows, cols], data)
}
