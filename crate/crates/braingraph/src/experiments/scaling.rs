//! Sample-efficiency curves: one fixed test set, nested training
//! subsets of growing size, every family trained and scored per size.

use crate::datasets::split::{stratified_train_val, subsample_train};
use crate::error::{Error, Result};
use crate::experiments::cv::confusion_on;
use crate::experiments::inputs::{Candidate, InputFactory};
use crate::experiments::metrics::compute_metrics;
use crate::experiments::train::fit_candidate;
use crate::models::Family;
use crate::numerics::Stream;

#[derive(Debug, Clone)]
pub struct ScalePoint {
    pub size: usize,
    pub bal_acc: f64,
    pub sens: f64,
    pub spec: f64,
    pub best_epoch: usize,
    /// Content hash of the test subjects this point was scored on.
    pub test_hash: String,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub family: Family,
    pub chosen: String,
    pub points: Vec<ScalePoint>,
    pub seed: u64,
}

impl ScalingReport {
    pub fn accuracy_at(&self, size: usize) -> Option<f64> {
        self.points.iter().find(|p| p.size == size && p.aborted.is_none()).map(|p| p.bal_acc)
    }
}

/// For each (family, candidate): train on every nested subset with an
/// inner 85/15 split and score on the fixed test set. Candidates are
/// fixed up front; no selection happens inside the study.
pub fn scaling_study(
    factory: &InputFactory,
    candidates: &[(Family, Candidate)],
    sizes: &[usize],
    test_size: usize,
    seed: u64,
) -> Result<Vec<ScalingReport>> {
    for (family, c) in candidates {
        if *family != c.spec.family {
            return Err(Error::Contract(format!(
                "candidate family {} listed under {}",
                c.spec.family.as_str(),
                family.as_str()
            )));
        }
        c.validate()?;
    }
    let dataset = factory.dataset();
    let plan = subsample_train(dataset, sizes, test_size, seed)?;
    let labels = dataset.labels();
    let master = Stream::new(seed);

    let mut reports = Vec::with_capacity(candidates.len());
    for (family, candidate) in candidates {
        let prepared = factory.prepare(candidate)?;
        let mut points = Vec::with_capacity(plan.subsets.len());
        for (size, subset) in &plan.subsets {
            let stream = master.derive(family.as_str()).derive_indexed("size", *size as u64);
            let mut inner = stream.derive("inner_split");
            let (train, val) = stratified_train_val(subset, &labels, &mut inner)?;
            let test_hash = dataset.select(&plan.test)?.content_hash();
            let point = fit_candidate(candidate, &prepared, &labels, &train, &val, &stream)
                .and_then(|fit| {
                    let (tp, fp, tn, fn_) = confusion_on(&fit.predictor, &prepared, &labels, &plan.test)?;
                    let (bal_acc, sens, spec) = compute_metrics(tp, fp, tn, fn_)?;
                    Ok(ScalePoint {
                        size: *size,
                        bal_acc,
                        sens,
                        spec,
                        best_epoch: fit.best_epoch,
                        test_hash: test_hash.clone(),
                        aborted: None,
                    })
                });
            match point {
                Ok(p) => points.push(p),
                Err(Error::Training(msg)) | Err(Error::Config(msg)) => points.push(ScalePoint {
                    size: *size,
                    bal_acc: f64::NAN,
                    sens: f64::NAN,
                    spec: f64::NAN,
                    best_epoch: 0,
                    test_hash,
                    aborted: Some(msg),
                }),
                Err(e) => return Err(e),
            }
        }
        reports.push(ScalingReport {
            family: *family,
            chosen: candidate.describe(),
            points,
            seed,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{Subject, TimeSeriesDataset};
    use crate::numerics::Tensor;
    use rand::Rng;

    fn toy_dataset(subjects: usize, n: usize, t: usize, seed: u64) -> TimeSeriesDataset {
        let mut stream = Stream::new(seed);
        let subs: Vec<Subject> = (0..subjects)
            .map(|i| {
                let label = (i % 2) as u8;
                let mut data = vec![0.0; t * n];
                for row in 0..t {
                    let driver = stream.random_range(-1.0..1.0);
                    for col in 0..n {
                        let noise = stream.random_range(-1.0..1.0);
                        data[row * n + col] = if label == 1 && col < n / 2 {
                            driver + 0.5 * noise
                        } else {
                            noise
                        };
                    }
                }
                Subject {
                    id: format!("s{i:03}"),
                    label,
                    site: "synth".to_string(),
                    timecourses: Tensor::new(vec![t, n], data).unwrap(),
                }
            })
            .collect();
        TimeSeriesDataset::new(subs, "toy", Some(seed)).unwrap()
    }

    #[test]
    fn single_size_single_point_per_family() {
        let ds = toy_dataset(30, 6, 60, 31);
        let factory = InputFactory::new(&ds).unwrap();
        let mut mlp = Candidate::new(Family::Mlp);
        mlp.spec.hidden_dim = 4;
        mlp.lr = 1e-2;
        let mut svm = Candidate::new(Family::SvmRbf);
        svm.spec.svm_gamma = 0.1;
        let reports = scaling_study(
            &factory,
            &[(Family::Mlp, mlp), (Family::SvmRbf, svm)],
            &[20],
            8,
            5,
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.points.len(), 1);
            assert_eq!(r.points[0].size, 20);
            assert!(r.points[0].aborted.is_none());
        }
    }

    #[test]
    fn test_set_hash_identical_across_sizes() {
        let ds = toy_dataset(40, 6, 60, 32);
        let factory = InputFactory::new(&ds).unwrap();
        let mut mlp = Candidate::new(Family::Mlp);
        mlp.spec.hidden_dim = 4;
        mlp.lr = 1e-2;
        let reports =
            scaling_study(&factory, &[(Family::Mlp, mlp)], &[16, 24, 30], 10, 6).unwrap();
        let hashes: Vec<&str> =
            reports[0].points.iter().map(|p| p.test_hash.as_str()).collect();
        assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn mismatched_family_listing_rejected() {
        let ds = toy_dataset(20, 6, 60, 33);
        let factory = InputFactory::new(&ds).unwrap();
        let mlp = Candidate::new(Family::Mlp);
        let err = scaling_study(&factory, &[(Family::Gcn, mlp)], &[10], 6, 1);
        assert!(matches!(err, Err(Error::Contract(_))));
    }
}
