//! Spatio-temporal architectures: ST-GCN and its adaptive-adjacency
//! variant. Node state is kept as [N x C*T] with channel-major rows so
//! the spatial step is a single matmul and the channel transform a
//! kernel-1 batched convolution.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::BrainGraph;
use crate::models::readout::{linear_head, readout};
use crate::models::{ForwardCtx, InputDims, ModelSpec, RowNormalizer};
use crate::numerics::{init_tensor, Init, Stream, Tape, Tensor, ValueId};

pub const EMBED_INIT_STD: f64 = 0.1;

fn conv_kernel(c_out: usize, c_in: usize, k: usize, stream: &mut Stream) -> Tensor {
    init_tensor(
        &[c_out, c_in, k],
        Init::GlorotUniform { fan_in: c_in * k, fan_out: c_out * k },
        stream,
    )
}

pub fn init_stgcn(
    spec: &ModelSpec,
    dims: &InputDims,
    stream: &mut Stream,
    adaptive: bool,
) -> BTreeMap<String, Tensor> {
    let d = spec.hidden_dim;
    let k = spec.temporal_kernel;
    let mut params = BTreeMap::new();
    if adaptive {
        params.insert(
            "embed".to_string(),
            init_tensor(&[dims.nodes, spec.embedding_dim], Init::Normal { std: EMBED_INIT_STD }, stream),
        );
    }
    let mut c_in = 1;
    for b in 0..spec.blocks {
        params.insert(format!("blk{b}_wa"), conv_kernel(d, c_in, k, stream));
        params.insert(format!("blk{b}_ba"), Tensor::zeros(&[d]));
        params.insert(format!("blk{b}_wb"), conv_kernel(d, c_in, k, stream));
        params.insert(format!("blk{b}_bb"), Tensor::zeros(&[d]));
        params.insert(format!("blk{b}_ws"), conv_kernel(d, d, 1, stream));
        params.insert(format!("blk{b}_bs"), Tensor::zeros(&[d]));
        c_in = d;
    }
    let pooled = spec.readout.output_dim(d);
    params.insert(
        "head_w".to_string(),
        init_tensor(&[pooled], Init::GlorotUniform { fan_in: pooled, fan_out: 1 }, stream),
    );
    params.insert("head_b".to_string(), Tensor::zeros(&[1]));
    params
}

/// Stacks `blocks` of (gated temporal conv, spatial mix by `s`, shared
/// channel transform with ReLU), then averages over time, leaving one
/// d_h-vector per node. Same padding preserves T through every block.
fn st_blocks(
    tape: &mut Tape,
    ctx: &ForwardCtx,
    features: &Tensor,
    s: ValueId,
    stream: &mut Stream,
) -> Result<ValueId> {
    let d = ctx.spec.hidden_dim;
    let k = ctx.spec.temporal_kernel;
    let t = features.cols();
    let receptive = ctx.spec.blocks * (k - 1) + 1;
    if t < receptive {
        return Err(Error::Config(format!(
            "timecourse length {t} shorter than receptive field {receptive}"
        )));
    }
    let pad = (k - 1) / 2;
    let mut h = tape.constant(features.clone())?;
    let mut c_in = 1;
    for b in 0..ctx.spec.blocks {
        let wa = ctx.param(&format!("blk{b}_wa"))?;
        let ba = ctx.param(&format!("blk{b}_ba"))?;
        let wb = ctx.param(&format!("blk{b}_wb"))?;
        let bb = ctx.param(&format!("blk{b}_bb"))?;
        let ca = tape.conv1d_batch(h, c_in, wa, Some(ba), 1, 1, pad)?;
        let ta = tape.tanh(ca)?;
        let cb = tape.conv1d_batch(h, c_in, wb, Some(bb), 1, 1, pad)?;
        let sb = tape.sigmoid(cb)?;
        let gated = tape.mul(ta, sb)?;

        let mixed = tape.matmul(s, gated)?;
        let ws = ctx.param(&format!("blk{b}_ws"))?;
        let bs = ctx.param(&format!("blk{b}_bs"))?;
        let transformed = tape.conv1d_batch(mixed, d, ws, Some(bs), 1, 1, 0)?;
        h = tape.relu(transformed)?;
        h = ctx.maybe_dropout(tape, h, stream)?;
        c_in = d;
    }
    tape.block_time_mean(h, d)
}

pub(crate) fn stgcn_forward(
    tape: &mut Tape,
    ctx: &ForwardCtx,
    graph: &BrainGraph,
    stream: &mut Stream,
) -> Result<ValueId> {
    let adj = graph
        .adjacency
        .as_ref()
        .ok_or_else(|| Error::Contract("stgcn needs a precomputed adjacency".into()))?;
    let s = tape.constant(adj.values.clone())?;
    let per_node = st_blocks(tape, ctx, &graph.features, s, stream)?;
    let pooled = readout(tape, per_node, ctx.spec.readout)?;
    linear_head(tape, ctx, pooled)
}

/// Adjacency learned in-model: I + normalize(ReLU(E Et)) row-wise, with
/// softmax or sparsemax as the normalizer. E trains with everything else.
pub(crate) fn astgcn_forward(
    tape: &mut Tape,
    ctx: &ForwardCtx,
    graph: &BrainGraph,
    stream: &mut Stream,
) -> Result<ValueId> {
    let n = graph.num_nodes();
    let e = ctx.param("embed")?;
    if tape.value(e).rows() != n {
        return Err(Error::Dimension(format!(
            "embedding rows {} != graph nodes {n}",
            tape.value(e).rows()
        )));
    }
    let et = tape.transpose(e)?;
    let sim = tape.matmul(e, et)?;
    let sim = tape.relu(sim)?;
    let p = match ctx.spec.row_normalizer {
        RowNormalizer::Softmax => tape.row_softmax(sim, None)?,
        RowNormalizer::Sparsemax => tape.row_sparsemax(sim)?,
    };
    let eye = tape.constant(Tensor::identity(n))?;
    let a_hat = tape.add(p, eye)?;
    let per_node = st_blocks(tape, ctx, &graph.features, a_hat, stream)?;
    let pooled = readout(tape, per_node, ctx.spec.readout)?;
    linear_head(tape, ctx, pooled)
}
