//! Sensitivity of the GCN to the sparsification threshold, with and
//! without diffusion smoothing of the edges.

use crate::error::{Error, Result};
use crate::experiments::cv::cross_validate;
use crate::experiments::inputs::{Candidate, InputFactory};
use crate::graph::DiffusionConfig;
use crate::models::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepArms {
    Both,
    NoneOnly,
    HeatOnly,
}

impl SweepArms {
    pub fn parse(s: &str) -> Result<SweepArms> {
        Ok(match s {
            "both" => SweepArms::Both,
            "none" => SweepArms::NoneOnly,
            "heat" => SweepArms::HeatOnly,
            other => return Err(Error::Config(format!("unknown diffusion arm {other:?}"))),
        })
    }

    fn arms(&self) -> Vec<(&'static str, DiffusionConfig)> {
        let none = ("none", DiffusionConfig::none());
        let heat = ("heat", DiffusionConfig::heat_default());
        match self {
            SweepArms::Both => vec![none, heat],
            SweepArms::NoneOnly => vec![none],
            SweepArms::HeatOnly => vec![heat],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub keep_fraction: f64,
    pub arm: &'static str,
    pub mean_bal_acc: f64,
    pub std_bal_acc: f64,
    pub aborted_folds: usize,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepCell>,
    pub seed: u64,
}

impl SweepTable {
    pub fn arm_means(&self, arm: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.arm == arm)
            .map(|r| (r.keep_fraction, r.mean_bal_acc))
            .collect()
    }
}

/// Cross-validates the frozen GCN candidate at every keep fraction,
/// once per diffusion arm, same seed everywhere. Only the threshold and
/// the diffusion vary.
pub fn threshold_sweep(
    factory: &InputFactory,
    base: &Candidate,
    fractions: &[f64],
    arms: SweepArms,
    k: usize,
    seed: u64,
) -> Result<SweepTable> {
    if base.spec.family != Family::Gcn {
        return Err(Error::Contract(format!(
            "threshold sweep is defined for gcn, got {}",
            base.spec.family.as_str()
        )));
    }
    if fractions.is_empty() {
        return Err(Error::Config("no keep fractions given".into()));
    }
    let mut rows = Vec::new();
    for &fraction in fractions {
        for (arm, diffusion) in arms.arms() {
            let mut candidate = base.clone();
            candidate.keep_fraction = fraction;
            candidate.diffusion = diffusion;
            let report = cross_validate(
                factory,
                &candidate,
                k,
                seed,
                &format!("sweep_{arm}_keep{fraction}"),
            )?;
            let bal = report
                .summary
                .iter()
                .find(|s| s.metric == "bal_acc")
                .ok_or_else(|| Error::Contract("missing bal_acc summary".into()))?;
            rows.push(SweepCell {
                keep_fraction: fraction,
                arm,
                mean_bal_acc: bal.mean,
                std_bal_acc: bal.std,
                aborted_folds: report.folds.iter().filter(|f| f.aborted.is_some()).count(),
            });
        }
    }
    Ok(SweepTable { rows, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{Subject, TimeSeriesDataset};
    use crate::numerics::{Stream, Tensor};
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

    fn small_gcn() -> Candidate {
        let mut c = Candidate::new(Family::Gcn);
        c.spec.hidden_dim = 4;
        c.lr = 1e-2;
        c
    }

    #[test]
    fn one_fraction_both_arms_two_rows() {
        let ds = toy_dataset(20, 6, 60, 41);
        let factory = InputFactory::new(&ds).unwrap();
        let table =
            threshold_sweep(&factory, &small_gcn(), &[0.5], SweepArms::Both, 5, 3).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].arm, "none");
        assert_eq!(table.rows[1].arm, "heat");
        assert!(table.rows.iter().all(|r| r.keep_fraction == 0.5));
    }

    #[test]
    fn none_arm_equals_plain_cross_validation() {
        let ds = toy_dataset(20, 6, 60, 42);
        let factory = InputFactory::new(&ds).unwrap();
        let base = small_gcn();
        let table =
            threshold_sweep(&factory, &base, &[0.4], SweepArms::NoneOnly, 5, 7).unwrap();
        let mut direct = base.clone();
        direct.keep_fraction = 0.4;
        direct.diffusion = DiffusionConfig::none();
        let report = cross_validate(&factory, &direct, 5, 7, "direct").unwrap();
        let bal = report.summary.iter().find(|s| s.metric == "bal_acc").unwrap();
        assert_eq!(table.rows[0].mean_bal_acc, bal.mean);
        assert_eq!(table.rows[0].std_bal_acc, bal.std);
    }

    #[test]
    fn non_gcn_family_rejected() {
        let ds = toy_dataset(12, 6, 60, 43);
        let factory = InputFactory::new(&ds).unwrap();
        let mlp = Candidate::new(Family::Mlp);
        let err = threshold_sweep(&factory, &mlp, &[0.5], SweepArms::Both, 5, 1);
        assert!(matches!(err, Err(Error::Contract(_))));
    }
}
