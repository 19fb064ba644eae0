//! Central-difference gradient checking.
//!
//! The numeric side re-runs the full forward pass per perturbed element,
//! so it shares no code with the backward pass it is checking.

use std::collections::BTreeMap;

use crate::numerics::tensor::Tensor;

/// d loss / d params by central differences: (f(p+h) - f(p-h)) / 2h,
/// element by element. `f` must be a pure function of the parameter map.
pub fn numeric_gradients<F>(
    params: &BTreeMap<String, Tensor>,
    h: f64,
    mut f: F,
) -> BTreeMap<String, Tensor>
where
    F: FnMut(&BTreeMap<String, Tensor>) -> f64,
{
    let mut out = BTreeMap::new();
    for name in params.keys() {
        let shape = params[name].shape().to_vec();
        let numel = params[name].numel();
        let mut grad = vec![0.0; numel];
        for i in 0..numel {
            let mut plus = params.clone();
            plus.get_mut(name).unwrap().values_mut()[i] += h;
            let mut minus = params.clone();
            minus.get_mut(name).unwrap().values_mut()[i] -= h;
            grad[i] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        out.insert(name.clone(), Tensor::new(shape, grad).expect("shape preserved"));
    }
    out
}

/// max over all elements of |a - b| / max(|a|, |b|, 1e-6).
pub fn max_relative_error(
    analytic: &BTreeMap<String, Tensor>,
    numeric: &BTreeMap<String, Tensor>,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (name, a) in analytic {
        let n = numeric.get(name).unwrap_or_else(|| panic!("missing numeric gradient for {name}"));
        for (&av, &nv) in a.values().iter().zip(n.values()) {
            let denom = av.abs().max(nv.abs()).max(1e-6);
            worst = worst.max((av - nv).abs() / denom);
        }
    }
    worst
}
