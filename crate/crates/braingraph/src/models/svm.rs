//! Soft-margin RBF-kernel SVM trained by sequential minimal
//! optimization. Fully deterministic: the first multiplier is scanned in
//! index order, the second maximizes |E_i - E_j| with lowest-index
//! tie-breaking.

use crate::error::{Error, Result};
use crate::models::Prediction;
use crate::numerics::Tensor;

const STEP_EPS: f64 = 1e-7;
const BOUND_EPS: f64 = 1e-12;
const VIOLATION_TOL: f64 = 1e-4;
const MAX_SWEEPS: usize = 2000;

#[derive(Debug, Clone)]
pub struct SvmModel {
    train_x: Tensor,
    /// Labels remapped to -1/+1.
    labels: Vec<f64>,
    alphas: Vec<f64>,
    bias: f64,
    c: f64,
    gamma: f64,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * sq).exp()
}

fn kernel_matrix(x: &Tensor, gamma: f64) -> Vec<f64> {
    let (m, p) = (x.rows(), x.cols());
    let v = x.values();
    let mut k = vec![0.0; m * m];
    for i in 0..m {
        k[i * m + i] = 1.0;
        for j in i + 1..m {
            let kij = rbf(&v[i * p..(i + 1) * p], &v[j * p..(j + 1) * p], gamma);
            k[i * m + j] = kij;
            k[j * m + i] = kij;
        }
    }
    k
}

pub fn svm_rbf_train(features: &Tensor, labels: &[u8], c: f64, gamma: f64) -> Result<SvmModel> {
    if features.rank() != 2 {
        return Err(Error::Dimension(format!("expected [M x P] features, got {:?}", features.shape())));
    }
    let m = features.rows();
    if m != labels.len() {
        return Err(Error::Dimension(format!("{m} rows vs {} labels", labels.len())));
    }
    if m < 2 {
        return Err(Error::Config("need at least two training points".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Config("labels must be 0 or 1".into()));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::Config("both classes must be present".into()));
    }
    if c <= 0.0 || gamma <= 0.0 {
        return Err(Error::Config("C and gamma must be positive".into()));
    }

    let y: Vec<f64> = labels.iter().map(|&l| if l == 0 { -1.0 } else { 1.0 }).collect();
    let k = kernel_matrix(features, gamma);
    let mut alpha = vec![0.0; m];
    let mut b = 0.0;

    for _sweep in 0..MAX_SWEEPS {
        // fresh error vector each sweep kills incremental-update drift
        let mut err: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| alpha[j] * y[j] * k[j * m + i]).sum::<f64>() + b - y[i])
            .collect();
        let mut changed = 0usize;
        for i in 0..m {
            let r = err[i] * y[i];
            let violates = (r < -VIOLATION_TOL && alpha[i] < c - BOUND_EPS)
                || (r > VIOLATION_TOL && alpha[i] > BOUND_EPS);
            if !violates {
                continue;
            }
            let mut j_best = usize::MAX;
            let mut gap_best = -1.0;
            for j in 0..m {
                if j == i {
                    continue;
                }
                let gap = (err[i] - err[j]).abs();
                if gap > gap_best {
                    gap_best = gap;
                    j_best = j;
                }
            }
            let j = j_best;
            let (ai_old, aj_old) = (alpha[i], alpha[j]);
            let (lo, hi) = if y[i] != y[j] {
                ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
            } else {
                ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
            };
            if hi - lo < BOUND_EPS {
                continue;
            }
            let eta = 2.0 * k[i * m + j] - k[i * m + i] - k[j * m + j];
            if eta >= 0.0 {
                continue;
            }
            let mut aj = aj_old - y[j] * (err[i] - err[j]) / eta;
            aj = aj.clamp(lo, hi);
            if (aj - aj_old).abs() < STEP_EPS {
                continue;
            }
            let ai = ai_old + y[i] * y[j] * (aj_old - aj);
            let di = y[i] * (ai - ai_old);
            let dj = y[j] * (aj - aj_old);
            let b1 = b - err[i] - di * k[i * m + i] - dj * k[i * m + j];
            let b2 = b - err[j] - di * k[i * m + j] - dj * k[j * m + j];
            let b_new = if ai > BOUND_EPS && ai < c - BOUND_EPS {
                b1
            } else if aj > BOUND_EPS && aj < c - BOUND_EPS {
                b2
            } else {
                0.5 * (b1 + b2)
            };
            let db = b_new - b;
            for t in 0..m {
                err[t] += di * k[i * m + t] + dj * k[j * m + t] + db;
            }
            alpha[i] = ai;
            alpha[j] = aj;
            b = b_new;
            changed += 1;
        }
        if changed == 0 {
            break;
        }
    }

    Ok(SvmModel { train_x: features.clone(), labels: y, alphas: alpha, bias: b, c, gamma })
}

impl SvmModel {
    pub fn margin(&self, x: &Tensor) -> Result<f64> {
        let p = self.train_x.cols();
        if x.numel() != p {
            return Err(Error::Dimension(format!("input length {} != {p}", x.numel())));
        }
        let v = self.train_x.values();
        let mut acc = self.bias;
        for i in 0..self.train_x.rows() {
            if self.alphas[i] > 0.0 {
                acc += self.alphas[i] * self.labels[i] * rbf(&v[i * p..(i + 1) * p], x.values(), self.gamma);
            }
        }
        Ok(acc)
    }

    /// Hard label from the margin sign; probability is a logistic link on
    /// the margin, for reporting only.
    pub fn predict(&self, x: &Tensor) -> Result<Prediction> {
        Ok(Prediction::from_logit(self.margin(x)?))
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Largest violation over all first-order optimality conditions:
    /// complementary slackness per point plus the dual equality
    /// sum(alpha_i y_i) = 0.
    pub fn kkt_max_violation(&self) -> f64 {
        let m = self.train_x.rows();
        let p = self.train_x.cols();
        let v = self.train_x.values();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let row = Tensor::new(vec![p], v[i * p..(i + 1) * p].to_vec()).unwrap();
            let yf = self.labels[i] * self.margin(&row).unwrap();
            let violation = if self.alphas[i] <= BOUND_EPS {
                (1.0 - yf).max(0.0)
            } else if self.alphas[i] >= self.c - BOUND_EPS {
                (yf - 1.0).max(0.0)
            } else {
                (yf - 1.0).abs()
            };
            worst = worst.max(violation);
        }
        let balance: f64 = self
            .alphas
            .iter()
            .zip(&self.labels)
            .map(|(a, y)| a * y)
            .sum();
        worst.max(balance.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_pair_classified_correctly() {
        let x = Tensor::new(vec![2, 1], vec![0.0, 2.0]).unwrap();
        let model = svm_rbf_train(&x, &[0, 1], 100.0, 1.0).unwrap();
        let p0 = model.predict(&Tensor::new(vec![1], vec![0.0]).unwrap()).unwrap();
        let p1 = model.predict(&Tensor::new(vec![1], vec![2.0]).unwrap()).unwrap();
        assert_eq!((p0.label, p1.label), (0, 1));
    }

    #[test]
    fn dual_feasibility() {
        // two noisy blobs
        use crate::numerics::Stream;
        use rand::Rng;
        let mut s = Stream::new(5);
        let m = 30;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..m {
            let center = if i % 2 == 0 { -1.0 } else { 1.0 };
            rows.push(center + s.random_range(-0.8..0.8));
            rows.push(center + s.random_range(-0.8..0.8));
            labels.push((i % 2) as u8);
        }
        let x = Tensor::new(vec![m, 2], rows).unwrap();
        let c = 2.5;
        let model = svm_rbf_train(&x, &labels, c, 0.5).unwrap();
        for &a in model.alphas() {
            assert!((-1e-12..=c + 1e-12).contains(&a), "alpha {a} outside [0, C]");
        }
        let balance: f64 = model
            .alphas()
            .iter()
            .zip(&model.labels)
            .map(|(a, y)| a * y)
            .sum();
        assert!(balance.abs() < 1e-6, "sum alpha_i y_i = {balance}");
    }

    #[test]
    fn xor_pattern_separated_with_kkt_certificate() {
        let x = Tensor::new(vec![4, 2], vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let labels = [0u8, 0, 1, 1];
        let model = svm_rbf_train(&x, &labels, 10.0, 1.0).unwrap();
        for (i, &want) in labels.iter().enumerate() {
            let row = Tensor::new(vec![2], x.values()[i * 2..(i + 1) * 2].to_vec()).unwrap();
            assert_eq!(model.predict(&row).unwrap().label, want, "point {i}");
        }
        let kkt = model.kkt_max_violation();
        assert!(kkt < 1e-3, "kkt violation {kkt}");
    }

    #[test]
    fn single_class_rejected() {
        let x = Tensor::new(vec![2, 1], vec![0.0, 1.0]).unwrap();
        assert!(matches!(svm_rbf_train(&x, &[1, 1], 1.0, 1.0).unwrap_err(), Error::Config(_)));
    }

    #[test]
    fn deterministic_training() {
        let x = Tensor::new(vec![4, 2], vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let labels = [0u8, 0, 1, 1];
        let a = svm_rbf_train(&x, &labels, 10.0, 1.0).unwrap();
        let b = svm_rbf_train(&x, &labels, 10.0, 1.0).unwrap();
        assert_eq!(a.alphas(), b.alphas());
        assert_eq!(a.bias, b.bias);
    }
}
