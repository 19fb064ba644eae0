//! Structure-agnostic baselines: an MLP on flattened connectivity and a
//! two-layer temporal CNN on raw timecourses. Both end in the shared
//! linear head.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::models::readout::linear_head;
use crate::models::{ForwardCtx, InputDims, ModelSpec};
use crate::numerics::{init_tensor, Init, Stream, Tape, Tensor, ValueId};

/// Strictly-lower-triangular entries of a symmetric matrix, row-major:
/// (1,0), (2,0), (2,1), ... Length N(N-1)/2.
pub fn lower_triangle_vector(fc: &Tensor) -> Result<Tensor> {
    if fc.rank() != 2 || fc.rows() != fc.cols() {
        return Err(Error::Dimension(format!("expected square matrix, got {:?}", fc.shape())));
    }
    let n = fc.rows();
    let mut v = Vec::with_capacity(n * (n - 1) / 2);
    for i in 1..n {
        for j in 0..i {
            v.push(fc.at2(i, j));
        }
    }
    Tensor::new(vec![n * (n - 1) / 2], v)
}

pub fn init_mlp(spec: &ModelSpec, dims: &InputDims, stream: &mut Stream) -> BTreeMap<String, Tensor> {
    let d = spec.hidden_dim;
    let mut params = BTreeMap::new();
    let mut fan_in = dims.features;
    for l in 0..spec.mlp_layers {
        params.insert(
            format!("fc{l}_w"),
            init_tensor(&[fan_in, d], Init::GlorotUniform { fan_in, fan_out: d }, stream),
        );
        params.insert(format!("fc{l}_b"), Tensor::zeros(&[d]));
        fan_in = d;
    }
    params.insert(
        "head_w".to_string(),
        init_tensor(&[d], Init::GlorotUniform { fan_in: d, fan_out: 1 }, stream),
    );
    params.insert("head_b".to_string(), Tensor::zeros(&[1]));
    params
}

pub(crate) fn mlp_forward(
    tape: &mut Tape,
    ctx: &ForwardCtx,
    vector: &Tensor,
    stream: &mut Stream,
) -> Result<ValueId> {
    let expected = tape.value(ctx.param("fc0_w")?).rows();
    if vector.numel() != expected {
        return Err(Error::Contract(format!(
            "input length {} != expected {expected}",
            vector.numel()
        )));
    }
    let row = Tensor::new(vec![1, vector.numel()], vector.values().to_vec())?;
    let mut h = tape.constant(row)?;
    for l in 0..ctx.spec.mlp_layers {
        let w = ctx.param(&format!("fc{l}_w"))?;
        let b = ctx.param(&format!("fc{l}_b"))?;
        let lin = tape.matmul(h, w)?;
        let lin = tape.add_row_bias(lin, b)?;
        h = tape.relu(lin)?;
        h = ctx.maybe_dropout(tape, h, stream)?;
    }
    let flat = tape.sum(h, Some(0))?;
    linear_head(tape, ctx, flat)
}

pub fn init_cnn1d(spec: &ModelSpec, dims: &InputDims, stream: &mut Stream) -> BTreeMap<String, Tensor> {
    let d = spec.hidden_dim;
    let k = spec.temporal_kernel;
    let mut params = BTreeMap::new();
    let mut c_in = dims.nodes;
    for l in 0..2 {
        params.insert(
            format!("conv{l}_k"),
            init_tensor(&[d, c_in, k], Init::GlorotUniform { fan_in: c_in * k, fan_out: d * k }, stream),
        );
        params.insert(format!("conv{l}_b"), Tensor::zeros(&[d]));
        c_in = d;
    }
    params.insert(
        "head_w".to_string(),
        init_tensor(&[d], Init::GlorotUniform { fan_in: d, fan_out: 1 }, stream),
    );
    params.insert("head_b".to_string(), Tensor::zeros(&[1]));
    params
}

/// Two valid (unpadded) strided convolutions over time with ReLU, global
/// average pool over the surviving timepoints, then the head.
pub(crate) fn cnn1d_forward(
    tape: &mut Tape,
    ctx: &ForwardCtx,
    timecourses: &Tensor,
    stream: &mut Stream,
) -> Result<ValueId> {
    let k = ctx.spec.temporal_kernel;
    let s = ctx.spec.cnn_stride;
    let t = timecourses.cols();
    let receptive = (s + 1) * (k - 1) + 1;
    if t < receptive {
        return Err(Error::Config(format!(
            "timecourse length {t} shorter than receptive field {receptive}"
        )));
    }
    let mut h = tape.constant(timecourses.clone())?;
    for l in 0..2 {
        let kern = ctx.param(&format!("conv{l}_k"))?;
        let bias = ctx.param(&format!("conv{l}_b"))?;
        let conv = tape.conv1d(h, kern, Some(bias), s, 1, 0)?;
        h = tape.relu(conv)?;
        h = ctx.maybe_dropout(tape, h, stream)?;
    }
    let pooled = tape.mean(h, Some(1))?;
    linear_head(tape, ctx, pooled)
}
