//! Static-graph architectures: GCN, GAT, GIN.
//!
//! All three stack two graph layers, pool with a permutation-invariant
//! readout, and classify with the shared linear head. The adjacency is
//! the precomputed (normalized) matrix carried by the graph.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::BrainGraph;
use crate::models::readout::{linear_head, readout};
use crate::models::{ForwardCtx, InputDims, ModelSpec};
use crate::numerics::{init_tensor, Init, Stream, Tape, Tensor, ValueId};

pub const GRAPH_LAYERS: usize = 2;

fn glorot(shape: [usize; 2], stream: &mut Stream) -> Tensor {
    init_tensor(&[shape[0], shape[1]], Init::GlorotUniform { fan_in: shape[0], fan_out: shape[1] }, stream)
}

fn head_params(
    params: &mut BTreeMap<String, Tensor>,
    pooled_dim: usize,
    stream: &mut Stream,
) {
    params.insert(
        "head_w".to_string(),
        init_tensor(&[pooled_dim], Init::GlorotUniform { fan_in: pooled_dim, fan_out: 1 }, stream),
    );
    params.insert("head_b".to_string(), Tensor::zeros(&[1]));
}

fn graph_adjacency(graph: &BrainGraph) -> Result<&Tensor> {
    graph
        .adjacency
        .as_ref()
        .map(|a| &a.values)
        .ok_or_else(|| Error::Contract("graph carries no adjacency".into()))
}

// ---------------------------------------------------------------- GCN

pub fn init_gcn(spec: &ModelSpec, dims: &InputDims, stream: &mut Stream) -> BTreeMap<String, Tensor> {
    let d = spec.hidden_dim;
    let mut params = BTreeMap::new();
    let mut fan_in = dims.features;
    for l in 0..GRAPH_LAYERS {
        params.insert(format!("l{l}_w"), glorot([fan_in, d], stream));
        params.insert(format!("l{l}_u"), glorot([d, d], stream));
        params.insert(format!("l{l}_ub"), Tensor::zeros(&[d]));
        fan_in = d;
    }
    head_params(&mut params, spec.readout.output_dim(d), stream);
    params
}

/// Two propagation steps H <- phi(ReLU(S H W)), phi a single linear
/// layer with ReLU, then readout and head.
pub(crate) fn gcn_forward(
    tape: &mut Tape,
    ctx: &ForwardCtx,
    graph: &BrainGraph,
    stream: &mut Stream,
) -> Result<ValueId> {
    let s = tape.constant(graph_adjacency(graph)?.clone())?;
    let mut h = tape.constant(graph.features.clone())?;
    for l in 0..GRAPH_LAYERS {
        let w = ctx.param(&format!("l{l}_w"))?;
        let hw = tape.matmul(h, w)?;
        let mixed = tape.matmul(s, hw)?;
        let act = tape.relu(mixed)?;
        let u = ctx.param(&format!("l{l}_u"))?;
        let ub = ctx.param(&format!("l{l}_ub"))?;
        let ff = tape.matmul(act, u)?;
        let ff = tape.add_row_bias(ff, ub)?;
        h = tape.relu(ff)?;
        h = ctx.maybe_dropout(tape, h, stream)?;
    }
    let pooled = readout(tape, h, ctx.spec.readout)?;
    linear_head(tape, ctx, pooled)
}

// ---------------------------------------------------------------- GAT

pub fn init_gat(spec: &ModelSpec, dims: &InputDims, stream: &mut Stream) -> BTreeMap<String, Tensor> {
    let d = spec.hidden_dim;
    let mut params = BTreeMap::new();
    let mut fan_in = dims.features;
    for l in 0..GRAPH_LAYERS {
        for m in 0..spec.heads {
            params.insert(format!("l{l}_h{m}_w"), glorot([fan_in, d], stream));
            params.insert(format!("l{l}_h{m}_u"), glorot([d, 1], stream));
            params.insert(format!("l{l}_h{m}_v"), glorot([d, 1], stream));
        }
        fan_in = d;
    }
    head_params(&mut params, spec.readout.output_dim(d), stream);
    params
}

/// Attention over each node's neighborhood (nonzero adjacency entries,
/// which include self-loops after normalization). Head outputs are
/// averaged. Scores: LeakyReLU_0.2(u.z_i + v.z_j) softmaxed per row.
pub(crate) fn gat_forward(
    tape: &mut Tape,
    ctx: &ForwardCtx,
    graph: &BrainGraph,
    stream: &mut Stream,
) -> Result<ValueId> {
    let adj = graph_adjacency(graph)?;
    let mask: Vec<bool> = adj.values().iter().map(|&v| v != 0.0).collect();

    let mut h = tape.constant(graph.features.clone())?;
    for l in 0..GRAPH_LAYERS {
        let mut head_outputs = Vec::with_capacity(ctx.spec.heads);
        for m in 0..ctx.spec.heads {
            let w = ctx.param(&format!("l{l}_h{m}_w"))?;
            let u = ctx.param(&format!("l{l}_h{m}_u"))?;
            let v = ctx.param(&format!("l{l}_h{m}_v"))?;
            let z = tape.matmul(h, w)?;
            let zu = tape.matmul(z, u)?;
            let zv = tape.matmul(z, v)?;
            let scores = tape.outer_sum(zu, zv)?;
            let scores = tape.leaky_relu(scores, 0.2)?;
            let attn = tape.row_softmax(scores, Some(&mask))?;
            head_outputs.push(tape.matmul(attn, z)?);
        }
        let mut acc = head_outputs[0];
        for &other in &head_outputs[1..] {
            acc = tape.add(acc, other)?;
        }
        let averaged = tape.scale(acc, 1.0 / ctx.spec.heads as f64)?;
        h = tape.relu(averaged)?;
        h = ctx.maybe_dropout(tape, h, stream)?;
    }
    let pooled = readout(tape, h, ctx.spec.readout)?;
    linear_head(tape, ctx, pooled)
}

// ---------------------------------------------------------------- GIN

pub fn init_gin(spec: &ModelSpec, dims: &InputDims, stream: &mut Stream) -> BTreeMap<String, Tensor> {
    let d = spec.hidden_dim;
    let mut params = BTreeMap::new();
    let mut fan_in = dims.features;
    for l in 0..GRAPH_LAYERS {
        params.insert(format!("l{l}_eps"), Tensor::zeros(&[1]));
        params.insert(format!("l{l}_w1"), glorot([fan_in, d], stream));
        params.insert(format!("l{l}_b1"), Tensor::zeros(&[d]));
        params.insert(format!("l{l}_w2"), glorot([d, d], stream));
        params.insert(format!("l{l}_b2"), Tensor::zeros(&[d]));
        fan_in = d;
    }
    head_params(&mut params, spec.readout.output_dim(d), stream);
    params
}

/// H <- MLP((1 + eps) H + A_offdiag H), with a two-layer ReLU MLP and a
/// learnable eps per layer (init 0). Neighbor aggregation is the
/// weighted sum over the zero-diagonal adjacency.
pub(crate) fn gin_forward(
    tape: &mut Tape,
    ctx: &ForwardCtx,
    graph: &BrainGraph,
    stream: &mut Stream,
) -> Result<ValueId> {
    let adj = graph_adjacency(graph)?;
    let n = graph.num_nodes();
    let mut offdiag = adj.clone();
    for i in 0..n {
        offdiag.set2(i, i, 0.0);
    }
    let a = tape.constant(offdiag)?;
    let one = tape.constant(Tensor::scalar(1.0))?;

    let mut h = tape.constant(graph.features.clone())?;
    for l in 0..GRAPH_LAYERS {
        let eps = ctx.param(&format!("l{l}_eps"))?;
        let one_plus_eps = tape.add(eps, one)?;
        let self_term = tape.mul(h, one_plus_eps)?;
        let neighbor_sum = tape.matmul(a, h)?;
        let agg = tape.add(self_term, neighbor_sum)?;

        let w1 = ctx.param(&format!("l{l}_w1"))?;
        let b1 = ctx.param(&format!("l{l}_b1"))?;
        let w2 = ctx.param(&format!("l{l}_w2"))?;
        let b2 = ctx.param(&format!("l{l}_b2"))?;
        let hidden = tape.matmul(agg, w1)?;
        let hidden = tape.add_row_bias(hidden, b1)?;
        let hidden = tape.relu(hidden)?;
        let out = tape.matmul(hidden, w2)?;
        h = tape.add_row_bias(out, b2)?;
        h = ctx.maybe_dropout(tape, h, stream)?;
    }
    let pooled = readout(tape, h, ctx.spec.readout)?;
    linear_head(tape, ctx, pooled)
}
