//! Synthetic labeled time series from a stable VAR(1) process with a
//! planted coupling graph, for experiments where ground truth is known.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::datasets::io::{format_float, write_dataset, write_matrix_csv};
use crate::datasets::{zscore_columns, Subject, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::numerics::{Stream, Tensor};

const TARGET_SPECTRAL_RADIUS: f64 = 0.9;
const BURN_IN: usize = 100;
const PLANTED_PAIR_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy)]
pub struct SyntheticParams {
    pub num_subjects: usize,
    pub num_rois: usize,
    pub timepoints: usize,
    pub effect: f64,
    pub noise_std: f64,
    pub density: f64,
    pub seed: u64,
}

/// A generated dataset together with the class coupling matrices the
/// series were driven by.
pub struct SyntheticDataset {
    pub dataset: TimeSeriesDataset,
    /// Raw (unscaled) coupling matrices per class.
    pub groundtruth: [Tensor; 2],
    pub params: SyntheticParams,
}

/// Draws one base coupling graph, plants extra class-1 coupling on a
/// fixed random subset of node pairs, and simulates one stable VAR(1)
/// series per subject:
///   x_{t+1} = M_c x_t + eps_t,  M_c = 0.9 * A_c / spectral_radius(A_c)
/// Labels alternate 0,1,0,1,... so classes stay balanced.
pub fn generate_synthetic(params: SyntheticParams) -> Result<SyntheticDataset> {
    let SyntheticParams { num_subjects, num_rois: n, timepoints: t, effect, noise_std, density, seed } =
        params;
    if n < 4 {
        return Err(Error::Config(format!("need at least 4 ROIs, got {n}")));
    }
    if t < 50 {
        return Err(Error::Config(format!("need at least 50 timepoints, got {t}")));
    }
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::Config(format!("density {density} outside (0,1)")));
    }
    if num_subjects < 2 {
        return Err(Error::Config("need at least 2 subjects".into()));
    }
    if effect < 0.0 || noise_std <= 0.0 {
        return Err(Error::Config("effect must be >= 0 and noise_std > 0".into()));
    }

    let master = Stream::new(seed);
    let a0 = base_coupling(n, density, &mut master.derive("base_coupling"));
    let delta = planted_pairs(n, &mut master.derive("planted_pairs"));
    let mut a1 = a0.clone();
    let scale = coupling_scale(n);
    for (v, d) in a1.values_mut().iter_mut().zip(delta.values()) {
        *v += effect * scale * d;
    }
    let transitions = [stabilize(&a0)?, stabilize(&a1)?];

    let noise = rand_distr::Normal::new(0.0, noise_std)
        .map_err(|e| Error::Config(format!("noise_std: {e}")))?;
    let mut subjects = Vec::with_capacity(num_subjects);
    for s in 0..num_subjects {
        let label = (s % 2) as u8;
        let mut stream = master.derive_indexed("subject", s as u64);
        let m = &transitions[label as usize];
        let mut x: Vec<f64> = (0..n).map(|_| stream.sample(noise)).collect();
        let mut next = vec![0.0; n];
        let mut recorded = vec![0.0; t * n];
        for step in 0..BURN_IN + t {
            for i in 0..n {
                let mut acc = stream.sample(noise);
                for j in 0..n {
                    acc += m.at2(i, j) * x[j];
                }
                next[i] = acc;
            }
            std::mem::swap(&mut x, &mut next);
            if step >= BURN_IN {
                recorded[(step - BURN_IN) * n..(step - BURN_IN + 1) * n].copy_from_slice(&x);
            }
        }
        let raw = Tensor::new(vec![t, n], recorded)?;
        subjects.push(Subject {
            id: format!("syn{s:05}"),
            label,
            site: "synthetic".to_string(),
            timecourses: zscore_columns(&raw)?,
        });
    }
    let dataset = TimeSeriesDataset::new(subjects, "synthetic", Some(seed))?;
    Ok(SyntheticDataset { dataset, groundtruth: [a0, a1], params })
}

/// Weight scale shared by the base couplings and the planted ones.
fn coupling_scale(n: usize) -> f64 {
    0.5 / (n as f64).sqrt()
}

/// Symmetric coupling with `density` fraction of off-diagonal pairs
/// nonzero, weights ~ normal(0, 0.5/sqrt(N)).
fn base_coupling(n: usize, density: f64, stream: &mut Stream) -> Tensor {
    let pairs = all_pairs(n);
    let take = ((pairs.len() as f64 * density).ceil() as usize).clamp(1, pairs.len());
    let mut order = pairs;
    order.shuffle(stream);
    let weight = rand_distr::Normal::new(0.0, coupling_scale(n)).expect("positive std");
    let mut a = Tensor::zeros(&[n, n]);
    for &(i, j) in order.iter().take(take) {
        let w = stream.sample(weight);
        a.set2(i, j, w);
        a.set2(j, i, w);
    }
    a
}

/// Unit couplings on a fixed random 10% of pairs.
fn planted_pairs(n: usize, stream: &mut Stream) -> Tensor {
    let pairs = all_pairs(n);
    let take = ((pairs.len() as f64 * PLANTED_PAIR_FRACTION).ceil() as usize).clamp(1, pairs.len());
    let mut order = pairs;
    order.shuffle(stream);
    let mut d = Tensor::zeros(&[n, n]);
    for &(i, j) in order.iter().take(take) {
        d.set2(i, j, 1.0);
        d.set2(j, i, 1.0);
    }
    d
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Rescales a coupling matrix to spectral radius 0.9.
fn stabilize(a: &Tensor) -> Result<Tensor> {
    let rho = a.spectral_radius(200);
    if rho < 1e-9 {
        return Err(Error::Config("coupling matrix has (near-)zero spectral radius".into()));
    }
    Ok(a.scaled(TARGET_SPECTRAL_RADIUS / rho))
}

/// Writes manifest + per-subject series + ground-truth adjacencies +
/// generation parameters into `dir`. Returns the manifest path.
pub fn write_synthetic(dir: &Path, synth: &SyntheticDataset) -> Result<PathBuf> {
    let manifest = write_dataset(dir, &synth.dataset)?;
    for (c, gt) in synth.groundtruth.iter().enumerate() {
        write_matrix_csv(&dir.join(format!("groundtruth_adjacency_class{c}.csv")), gt)?;
    }
    let mut w = csv::Writer::from_path(dir.join("meta.csv"))?;
    w.write_record(["key", "value"])?;
    let p = &synth.params;
    for (k, v) in [
        ("num_subjects", p.num_subjects.to_string()),
        ("num_rois", p.num_rois.to_string()),
        ("timepoints", p.timepoints.to_string()),
        ("effect", format_float(p.effect)),
        ("noise_std", format_float(p.noise_std)),
        ("density", format_float(p.density)),
        ("seed", p.seed.to_string()),
    ] {
        w.write_record([k, &v])?;
    }
    w.flush()?;
    Ok(manifest)
}
