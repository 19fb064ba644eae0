//! Graph diffusion: replace the adjacency with a truncated weighted sum
//! of transition-matrix powers to smooth noisy edges.

use crate::error::{Error, Result};
use crate::graph::adjacency::{normalize_adjacency, proportional_threshold, Adjacency};
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// theta_k = e^{-t} t^k / k!
    Heat { t: f64 },
    /// theta_k = alpha (1-alpha)^k; alpha = 1 degenerates to S = I.
    Ppr { alpha: f64 },
    /// No diffusion: the symmetric-normalized adjacency itself.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    /// D^{-1/2} (A+I) D^{-1/2}
    Sym,
    /// (A+I) D^{-1}
    Rw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionConfig {
    pub scheme: Scheme,
    pub transition: Transition,
    pub order: usize,
    pub post_sparsify_keep: Option<f64>,
}

impl DiffusionConfig {
    pub fn none() -> Self {
        DiffusionConfig { scheme: Scheme::None, transition: Transition::Sym, order: 1, post_sparsify_keep: None }
    }

    /// The default diffusion arm: heat kernel t=1, symmetric transition,
    /// truncation order 2.
    pub fn heat_default() -> Self {
        DiffusionConfig {
            scheme: Scheme::Heat { t: 1.0 },
            transition: Transition::Sym,
            order: 2,
            post_sparsify_keep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.scheme {
            Scheme::Heat { t } => {
                if t <= 0.0 {
                    return Err(Error::Config(format!("heat time {t} must be positive")));
                }
            }
            Scheme::Ppr { alpha } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::Config(format!("ppr alpha {alpha} outside (0, 1]")));
                }
            }
            Scheme::None => {}
        }
        if self.order < 1 {
            return Err(Error::Config("diffusion order must be >= 1".into()));
        }
        if let Some(f) = self.post_sparsify_keep {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("post_sparsify_keep {f} outside (0, 1]")));
            }
        }
        Ok(())
    }

    fn coefficient(&self, k: usize) -> f64 {
        match self.scheme {
            Scheme::Heat { t } => {
                let mut log_term = -t + (k as f64) * t.ln();
                for i in 2..=k {
                    log_term -= (i as f64).ln();
                }
                log_term.exp()
            }
            Scheme::Ppr { alpha } => alpha * (1.0 - alpha).powi(k as i32),
            Scheme::None => unreachable!("none scheme short-circuits"),
        }
    }
}

/// S = sum_{k=0..K} theta_k T^k, optionally re-sparsified and
/// re-symmetrized. The `none` scheme returns the plain symmetric
/// normalization untouched.
pub fn gdc_transform(raw: &Adjacency, cfg: &DiffusionConfig) -> Result<Adjacency> {
    cfg.validate()?;
    if cfg.scheme == Scheme::None {
        return normalize_adjacency(raw);
    }
    if raw.values.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Contract("diffusion requires non-negative weights".into()));
    }
    let n = raw.dim();
    let transition = match cfg.transition {
        Transition::Sym => normalize_adjacency(raw)?.values,
        Transition::Rw => {
            let mut hat = raw.values.clone();
            for i in 0..n {
                hat.set2(i, i, hat.at2(i, i) + 1.0);
            }
            let inv_deg: Vec<f64> =
                (0..n).map(|j| (0..n).map(|i| hat.at2(i, j)).sum::<f64>().recip()).collect();
            let mut t = Tensor::zeros(&[n, n]);
            for i in 0..n {
                for j in 0..n {
                    t.set2(i, j, hat.at2(i, j) * inv_deg[j]);
                }
            }
            t
        }
    };

    let mut s = Tensor::identity(n).scaled(cfg.coefficient(0));
    let mut power = Tensor::identity(n);
    for k in 1..=cfg.order {
        power = power.matmul(&transition)?;
        let theta = cfg.coefficient(k);
        for (sv, pv) in s.values_mut().iter_mut().zip(power.values()) {
            *sv += theta * pv;
        }
    }

    let values = match cfg.post_sparsify_keep {
        None => s,
        Some(f) => {
            let kept = proportional_threshold(&s, f)?.values;
            let mut sym = Tensor::zeros(&[n, n]);
            for i in 0..n {
                for j in 0..n {
                    sym.set2(i, j, 0.5 * (kept.at2(i, j) + kept.at2(j, i)));
                }
            }
            sym
        }
    };
    Ok(Adjacency { values, normalized: true })
}
