//! Adam with decoupled weight decay, plus parameter initialization.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::rng::Stream;
use crate::numerics::tensor::Tensor;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First/second moment estimates per parameter name.
pub struct Optimizer {
    lr: f64,
    weight_decay: f64,
    step: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Optimizer {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Optimizer { lr, weight_decay, step: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    /// One update over every (name, parameter, gradient) triple.
    /// Weight decay is applied directly to the parameter (decoupled
    /// from the moment estimates).
    pub fn step(&mut self, params: &mut BTreeMap<String, Tensor>, grads: &BTreeMap<String, Tensor>) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        for (name, p) in params.iter_mut() {
            let g = match grads.get(name) {
                Some(g) => g,
                None => continue,
            };
            if g.shape() != p.shape() {
                return Err(Error::Dimension(format!(
                    "gradient shape {:?} vs parameter {:?} for {name}",
                    g.shape(),
                    p.shape()
                )));
            }
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; p.numel()]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; p.numel()]);
            let decay = self.lr * self.weight_decay;
            for ((pv, gv), (mv, vv)) in
                p.values_mut().iter_mut().zip(g.values()).zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mv = BETA1 * *mv + (1.0 - BETA1) * gv;
                *vv = BETA2 * *vv + (1.0 - BETA2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= self.lr * m_hat / (v_hat.sqrt() + EPS) + decay * *pv;
                if !pv.is_finite() {
                    return Err(Error::Training(format!("non-finite parameter {name} after update")));
                }
            }
        }
        Ok(())
    }
}

/// How a parameter tensor is filled at model construction.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
    GlorotUniform { fan_in: usize, fan_out: usize },
    Zeros,
    Normal { std: f64 },
}

pub fn init_tensor(shape: &[usize], init: Init, stream: &mut Stream) -> Tensor {
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = match init {
        Init::GlorotUniform { fan_in, fan_out } => {
            let b = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..numel).map(|_| stream.random_range(-b..b)).collect()
        }
        Init::Zeros => vec![0.0; numel],
        Init::Normal { std } => {
            let dist = rand_distr::Normal::new(0.0, std).expect("valid std");
            (0..numel).map(|_| stream.sample(dist)).collect()
        }
    };
    Tensor::new(shape.to_vec(), data).expect("shape/data agree by construction")
}
