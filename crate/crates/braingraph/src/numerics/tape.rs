//! Reverse-mode differentiation over a dynamic operation tape.
//!
//! A forward pass records every primitive into a [`Tape`]; walking the
//! records backwards accumulates gradients of a scalar loss with respect
//! to every leaf marked as a parameter. One tape serves one forward/
//! backward pass and is then dropped.
//!
//! Every operation validates shapes up front and scans its output for
//! non-finite values, so a diverging run fails loudly instead of
//! poisoning downstream statistics.

use crate::error::{Error, Result};
use crate::numerics::rng::Stream;
use crate::numerics::tensor::Tensor;
use rand::Rng;

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(usize);

#[derive(Debug, Clone, Copy)]
pub struct ConvMeta {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
    pub t_in: usize,
    pub t_out: usize,
}

impl ConvMeta {
    fn build(
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        dilation: usize,
        padding: usize,
        t_in: usize,
    ) -> Result<Self> {
        if stride == 0 || dilation == 0 || k == 0 {
            return Err(Error::Dimension("conv1d stride/dilation/kernel must be positive".into()));
        }
        let span = dilation * (k - 1) + 1;
        let padded = t_in + 2 * padding;
        if span > padded {
            return Err(Error::Dimension(format!(
                "conv1d kernel span {span} exceeds padded input length {padded}"
            )));
        }
        let t_out = (padded - span) / stride + 1;
        Ok(ConvMeta { c_in, c_out, k, stride, dilation, padding, t_in, t_out })
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul { a: usize, b: usize },
    Transpose { x: usize },
    Add { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { x: usize, factor: f64 },
    AddRowBias { x: usize, bias: usize },
    Relu { x: usize },
    LeakyRelu { x: usize, slope: f64 },
    Tanh { x: usize },
    Sigmoid { x: usize },
    Sum { x: usize, axis: Option<usize> },
    Mean { x: usize, axis: Option<usize> },
    Max { x: usize, argmax: Vec<usize> },
    Concat { a: usize, b: usize },
    Conv { x: usize, kernels: usize, bias: Option<usize>, meta: ConvMeta, items: usize },
    BlockTimeMean { x: usize, channels: usize, steps: usize },
    RowSoftmax { x: usize, mask: Option<Vec<bool>> },
    RowSparsemax { x: usize, support: Vec<bool> },
    OuterSum { u: usize, v: usize },
    Dropout { x: usize, mask: Vec<f64> },
    BceWithLogits { logits: usize, targets: Vec<f64> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Matmul { .. } => "matmul",
            Op::Transpose { .. } => "transpose",
            Op::Add { .. } => "add",
            Op::Mul { .. } => "mul",
            Op::Scale { .. } => "scale",
            Op::AddRowBias { .. } => "add_row_bias",
            Op::Relu { .. } => "relu",
            Op::LeakyRelu { .. } => "leaky_relu",
            Op::Tanh { .. } => "tanh",
            Op::Sigmoid { .. } => "sigmoid",
            Op::Sum { .. } => "sum",
            Op::Mean { .. } => "mean",
            Op::Max { .. } => "max",
            Op::Concat { .. } => "concat",
            Op::Conv { .. } => "conv1d",
            Op::BlockTimeMean { .. } => "block_time_mean",
            Op::RowSoftmax { .. } => "row_softmax",
            Op::RowSparsemax { .. } => "row_sparsemax",
            Op::OuterSum { .. } => "outer_sum",
            Op::Dropout { .. } => "dropout",
            Op::BceWithLogits { .. } => "bce_with_logits",
        }
    }
}

struct Node {
    tensor: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients of one backward pass, indexed by tape value id.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ValueId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Gradient of a parameter, zero-filled if the parameter never
    /// influenced the loss.
    pub fn of(&self, id: ValueId, shape: &[usize]) -> Tensor {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(shape),
        }
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    fn push(&mut self, tensor: Tensor, op: Op, needs_grad: bool) -> Result<ValueId> {
        if !tensor.all_finite() {
            return Err(Error::Training(format!("non-finite output of {}", op.name())));
        }
        self.nodes.push(Node { tensor, op, needs_grad });
        Ok(ValueId(self.nodes.len() - 1))
    }

    fn needs(&self, id: ValueId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Non-trainable input (data, adjacency, constants).
    pub fn constant(&mut self, tensor: Tensor) -> Result<ValueId> {
        self.push(tensor, Op::Leaf, false)
    }

    /// Trainable leaf; gradients are produced for these.
    pub fn param(&mut self, tensor: Tensor) -> Result<ValueId> {
        self.push(tensor, Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let out = self.value(a).matmul(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::Matmul { a: a.0, b: b.0 }, needs)
    }

    pub fn transpose(&mut self, x: ValueId) -> Result<ValueId> {
        if self.value(x).rank() != 2 {
            return Err(Error::Dimension("transpose expects rank-2".into()));
        }
        let out = self.value(x).transposed();
        let needs = self.needs(x);
        self.push(out, Op::Transpose { x: x.0 }, needs)
    }

    fn elementwise_pair(&self, a: ValueId, b: ValueId, op: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa == sb || self.value(a).is_scalar() || self.value(b).is_scalar() {
            Ok(())
        } else {
            Err(Error::Dimension(format!("{op} shapes {sa:?} vs {sb:?} (equal or scalar only)")))
        }
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        self.elementwise_pair(a, b, "add")?;
        let (ta, tb) = (self.value(a), self.value(b));
        let out = if ta.shape() == tb.shape() {
            ta.zip_map(tb, |x, y| x + y)?
        } else if tb.is_scalar() {
            let s = tb.item();
            ta.map(|x| x + s)
        } else {
            let s = ta.item();
            tb.map(|x| x + s)
        };
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::Add { a: a.0, b: b.0 }, needs)
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        self.elementwise_pair(a, b, "mul")?;
        let (ta, tb) = (self.value(a), self.value(b));
        let out = if ta.shape() == tb.shape() {
            ta.zip_map(tb, |x, y| x * y)?
        } else if tb.is_scalar() {
            let s = tb.item();
            ta.map(|x| x * s)
        } else {
            let s = ta.item();
            tb.map(|x| x * s)
        };
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::Mul { a: a.0, b: b.0 }, needs)
    }

    pub fn scale(&mut self, x: ValueId, factor: f64) -> Result<ValueId> {
        let out = self.value(x).scaled(factor);
        let needs = self.needs(x);
        self.push(out, Op::Scale { x: x.0, factor }, needs)
    }

    /// Adds `bias` (length n) to every row of `x` (m x n).
    pub fn add_row_bias(&mut self, x: ValueId, bias: ValueId) -> Result<ValueId> {
        let tx = self.value(x);
        let tb = self.value(bias);
        if tx.rank() != 2 || tb.rank() != 1 || tx.cols() != tb.numel() {
            return Err(Error::Dimension(format!(
                "add_row_bias shapes {:?} vs {:?}",
                tx.shape(),
                tb.shape()
            )));
        }
        let (m, n) = (tx.rows(), tx.cols());
        let mut data = tx.values().to_vec();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] += tb.values()[j];
            }
        }
        let out = Tensor::new(vec![m, n], data)?;
        let needs = self.needs(x) || self.needs(bias);
        self.push(out, Op::AddRowBias { x: x.0, bias: bias.0 }, needs)
    }

    pub fn relu(&mut self, x: ValueId) -> Result<ValueId> {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        let needs = self.needs(x);
        self.push(out, Op::Relu { x: x.0 }, needs)
    }

    pub fn leaky_relu(&mut self, x: ValueId, slope: f64) -> Result<ValueId> {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        let needs = self.needs(x);
        self.push(out, Op::LeakyRelu { x: x.0, slope }, needs)
    }

    pub fn tanh(&mut self, x: ValueId) -> Result<ValueId> {
        let out = self.value(x).map(f64::tanh);
        let needs = self.needs(x);
        self.push(out, Op::Tanh { x: x.0 }, needs)
    }

    pub fn sigmoid(&mut self, x: ValueId) -> Result<ValueId> {
        let out = self.value(x).map(sigmoid);
        let needs = self.needs(x);
        self.push(out, Op::Sigmoid { x: x.0 }, needs)
    }

    fn reduce_check(&self, x: ValueId, axis: Option<usize>) -> Result<()> {
        if let Some(ax) = axis {
            let rank = self.value(x).rank();
            if ax >= rank {
                return Err(Error::Dimension(format!("axis {ax} out of range for rank {rank}")));
            }
            if rank > 2 {
                return Err(Error::Dimension("axis reduction supports rank <= 2".into()));
            }
        }
        Ok(())
    }

    pub fn sum(&mut self, x: ValueId, axis: Option<usize>) -> Result<ValueId> {
        self.reduce_check(x, axis)?;
        let out = reduce_forward(self.value(x), axis, Reduction::Sum).0;
        let needs = self.needs(x);
        self.push(out, Op::Sum { x: x.0, axis }, needs)
    }

    pub fn mean(&mut self, x: ValueId, axis: Option<usize>) -> Result<ValueId> {
        self.reduce_check(x, axis)?;
        let out = reduce_forward(self.value(x), axis, Reduction::Mean).0;
        let needs = self.needs(x);
        self.push(out, Op::Mean { x: x.0, axis }, needs)
    }

    pub fn max(&mut self, x: ValueId, axis: Option<usize>) -> Result<ValueId> {
        self.reduce_check(x, axis)?;
        let (out, argmax) = reduce_forward(self.value(x), axis, Reduction::Max);
        let needs = self.needs(x);
        self.push(out, Op::Max { x: x.0, argmax }, needs)
    }

    /// Concatenation of two rank-1 tensors.
    pub fn concat(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 1 || tb.rank() != 1 {
            return Err(Error::Dimension("concat expects rank-1 tensors".into()));
        }
        let mut data = ta.values().to_vec();
        data.extend_from_slice(tb.values());
        let out = Tensor::new(vec![data.len()], data)?;
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::Concat { a: a.0, b: b.0 }, needs)
    }

    /// 1-D cross-correlation of a single multi-channel signal.
    ///
    /// `x`: [c_in, t], `kernels`: [c_out, c_in, k], optional `bias`: [c_out].
    pub fn conv1d(
        &mut self,
        x: ValueId,
        kernels: ValueId,
        bias: Option<ValueId>,
        stride: usize,
        dilation: usize,
        padding: usize,
    ) -> Result<ValueId> {
        let tx = self.value(x);
        if tx.rank() != 2 {
            return Err(Error::Dimension("conv1d input must be [c_in, t]".into()));
        }
        let (c_in, t_in) = (tx.shape()[0], tx.shape()[1]);
        self.conv_common(x, 1, c_in, t_in, kernels, bias, stride, dilation, padding, false)
    }

    /// Same convolution applied independently to each row block of `x`.
    ///
    /// `x`: [items, c_in * t] where each row is a [c_in, t] block in
    /// row-major order; kernels and bias are shared across items.
    pub fn conv1d_batch(
        &mut self,
        x: ValueId,
        c_in: usize,
        kernels: ValueId,
        bias: Option<ValueId>,
        stride: usize,
        dilation: usize,
        padding: usize,
    ) -> Result<ValueId> {
        let tx = self.value(x);
        if tx.rank() != 2 {
            return Err(Error::Dimension("conv1d_batch input must be [items, c_in*t]".into()));
        }
        let items = tx.shape()[0];
        if tx.shape()[1] % c_in != 0 {
            return Err(Error::Dimension(format!(
                "conv1d_batch row length {} not divisible by c_in {c_in}",
                tx.shape()[1]
            )));
        }
        let t_in = tx.shape()[1] / c_in;
        self.conv_common(x, items, c_in, t_in, kernels, bias, stride, dilation, padding, true)
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_common(
        &mut self,
        x: ValueId,
        items: usize,
        c_in: usize,
        t_in: usize,
        kernels: ValueId,
        bias: Option<ValueId>,
        stride: usize,
        dilation: usize,
        padding: usize,
        batched: bool,
    ) -> Result<ValueId> {
        let tk = self.value(kernels);
        if tk.rank() != 3 || tk.shape()[1] != c_in {
            return Err(Error::Dimension(format!(
                "conv1d kernels must be [c_out, {c_in}, k], got {:?}",
                tk.shape()
            )));
        }
        let (c_out, k) = (tk.shape()[0], tk.shape()[2]);
        if let Some(b) = bias {
            let tb = self.value(b);
            if tb.rank() != 1 || tb.numel() != c_out {
                return Err(Error::Dimension(format!(
                    "conv1d bias must be [{c_out}], got {:?}",
                    tb.shape()
                )));
            }
        }
        let meta = ConvMeta::build(c_in, c_out, k, stride, dilation, padding, t_in)?;
        let xv = self.value(x).values();
        let kv = self.value(kernels).values();
        let bv = bias.map(|b| self.value(b).values().to_vec());
        let mut out = vec![0.0; items * c_out * meta.t_out];
        for item in 0..items {
            conv_forward_item(
                &xv[item * c_in * t_in..(item + 1) * c_in * t_in],
                kv,
                bv.as_deref(),
                &meta,
                &mut out[item * c_out * meta.t_out..(item + 1) * c_out * meta.t_out],
            );
        }
        let shape = if batched {
            vec![items, c_out * meta.t_out]
        } else {
            vec![c_out, meta.t_out]
        };
        let needs = self.needs(x)
            || self.needs(kernels)
            || bias.map(|b| self.needs(b)).unwrap_or(false);
        self.push(
            Tensor::new(shape, out)?,
            Op::Conv { x: x.0, kernels: kernels.0, bias: bias.map(|b| b.0), meta, items },
            needs,
        )
    }

    /// Per-row-block temporal mean: [items, channels*steps] -> [items, channels].
    pub fn block_time_mean(&mut self, x: ValueId, channels: usize) -> Result<ValueId> {
        let tx = self.value(x);
        if tx.rank() != 2 || tx.cols() % channels != 0 {
            return Err(Error::Dimension(format!(
                "block_time_mean: cols {} not divisible by channels {channels}",
                tx.cols()
            )));
        }
        let steps = tx.cols() / channels;
        let items = tx.rows();
        let mut out = vec![0.0; items * channels];
        for i in 0..items {
            for c in 0..channels {
                let base = i * channels * steps + c * steps;
                let s: f64 = tx.values()[base..base + steps].iter().sum();
                out[i * channels + c] = s / steps as f64;
            }
        }
        let needs = self.needs(x);
        self.push(
            Tensor::new(vec![items, channels], out)?,
            Op::BlockTimeMean { x: x.0, channels, steps },
            needs,
        )
    }

    /// Row-wise softmax, optionally restricted to a boolean mask.
    /// Masked-out entries are exactly zero in the output.
    pub fn row_softmax(&mut self, x: ValueId, mask: Option<&[bool]>) -> Result<ValueId> {
        let tx = self.value(x);
        if tx.rank() != 2 {
            return Err(Error::Dimension("row_softmax expects rank-2".into()));
        }
        let (r, c) = (tx.rows(), tx.cols());
        if let Some(m) = mask {
            if m.len() != r * c {
                return Err(Error::Dimension("row_softmax mask length mismatch".into()));
            }
        }
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &tx.values()[i * c..(i + 1) * c];
            let sel = |j: usize| mask.map_or(true, |m| m[i * c + j]);
            let mut mx = f64::NEG_INFINITY;
            for j in 0..c {
                if sel(j) && row[j] > mx {
                    mx = row[j];
                }
            }
            if mx == f64::NEG_INFINITY {
                return Err(Error::Contract(format!("row_softmax: row {i} fully masked")));
            }
            let mut denom = 0.0;
            for j in 0..c {
                if sel(j) {
                    let e = (row[j] - mx).exp();
                    out[i * c + j] = e;
                    denom += e;
                }
            }
            for j in 0..c {
                out[i * c + j] /= denom;
            }
        }
        let needs = self.needs(x);
        self.push(
            Tensor::new(vec![r, c], out)?,
            Op::RowSoftmax { x: x.0, mask: mask.map(<[bool]>::to_vec) },
            needs,
        )
    }

    /// Row-wise Euclidean projection onto the probability simplex.
    pub fn row_sparsemax(&mut self, x: ValueId) -> Result<ValueId> {
        let tx = self.value(x);
        if tx.rank() != 2 {
            return Err(Error::Dimension("row_sparsemax expects rank-2".into()));
        }
        let (r, c) = (tx.rows(), tx.cols());
        let mut out = vec![0.0; r * c];
        let mut support = vec![false; r * c];
        for i in 0..r {
            let row = &tx.values()[i * c..(i + 1) * c];
            let proj = sparsemax_row(row);
            for j in 0..c {
                out[i * c + j] = proj[j];
                support[i * c + j] = proj[j] > 0.0;
            }
        }
        let needs = self.needs(x);
        self.push(
            Tensor::new(vec![r, c], out)?,
            Op::RowSparsemax { x: x.0, support },
            needs,
        )
    }

    /// out[i, j] = u[i] + v[j] for column vectors u: [n, 1], v: [m, 1].
    pub fn outer_sum(&mut self, u: ValueId, v: ValueId) -> Result<ValueId> {
        let (tu, tv) = (self.value(u), self.value(v));
        if tu.rank() != 2 || tu.cols() != 1 || tv.rank() != 2 || tv.cols() != 1 {
            return Err(Error::Dimension("outer_sum expects column vectors".into()));
        }
        let (n, m) = (tu.rows(), tv.rows());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[i * m + j] = tu.values()[i] + tv.values()[j];
            }
        }
        let needs = self.needs(u) || self.needs(v);
        self.push(Tensor::new(vec![n, m], out)?, Op::OuterSum { u: u.0, v: v.0 }, needs)
    }

    /// Inverted dropout: kept entries scaled by 1/(1-rate).
    pub fn dropout(&mut self, x: ValueId, rate: f64, stream: &mut Stream) -> Result<ValueId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let tx = self.value(x);
        let mask: Vec<f64> = (0..tx.numel())
            .map(|_| if stream.random_range(0.0..1.0) < rate { 0.0 } else { keep })
            .collect();
        let data: Vec<f64> = tx.values().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let out = Tensor::new(tx.shape().to_vec(), data)?;
        let needs = self.needs(x);
        self.push(out, Op::Dropout { x: x.0, mask }, needs)
    }

    /// Mean binary cross-entropy over logits, computed in the stable form
    /// max(z, 0) - t*z + ln(1 + exp(-|z|)).
    pub fn bce_with_logits(&mut self, logits: ValueId, targets: &[f64]) -> Result<ValueId> {
        let tl = self.value(logits);
        if tl.numel() != targets.len() {
            return Err(Error::Dimension(format!(
                "bce targets len {} vs logits {}",
                targets.len(),
                tl.numel()
            )));
        }
        if targets.iter().any(|t| *t != 0.0 && *t != 1.0) {
            return Err(Error::Contract("bce targets must be 0 or 1".into()));
        }
        let n = targets.len() as f64;
        let loss = tl
            .values()
            .iter()
            .zip(targets)
            .map(|(&z, &t)| z.max(0.0) - t * z + (-z.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        let needs = self.needs(logits);
        self.push(
            Tensor::scalar(loss),
            Op::BceWithLogits { logits: logits.0, targets: targets.to_vec() },
            needs,
        )
    }

    /// Gradients of a scalar loss with respect to every grad-marked leaf.
    pub fn backward(&self, loss: ValueId) -> Result<Gradients> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        for (idx, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.all_finite() {
                    return Err(Error::Training(format!(
                        "non-finite gradient at {}",
                        self.nodes[idx].op.name()
                    )));
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let out = &self.nodes[idx].tensor;
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (ta, tb) = (&self.nodes[*a].tensor, &self.nodes[*b].tensor);
                if self.nodes[*a].needs_grad {
                    let da = g.matmul(&tb.transposed())?;
                    add_into(grads, *a, ta.shape(), &da);
                }
                if self.nodes[*b].needs_grad {
                    let db = ta.transposed().matmul(g)?;
                    add_into(grads, *b, tb.shape(), &db);
                }
            }
            Op::Transpose { x } => {
                if self.nodes[*x].needs_grad {
                    let dx = g.transposed();
                    add_into(grads, *x, self.nodes[*x].tensor.shape(), &dx);
                }
            }
            Op::Add { a, b } => {
                for &(src, other) in &[(*a, *b), (*b, *a)] {
                    if !self.nodes[src].needs_grad {
                        continue;
                    }
                    let ts = &self.nodes[src].tensor;
                    if ts.shape() == out.shape() {
                        add_into(grads, src, ts.shape(), g);
                    } else {
                        // src is the scalar side
                        debug_assert!(ts.is_scalar());
                        debug_assert_eq!(self.nodes[other].tensor.shape(), out.shape());
                        let total: f64 = g.values().iter().sum();
                        add_into(grads, src, ts.shape(), &Tensor::scalar(total));
                    }
                }
            }
            Op::Mul { a, b } => {
                for &(src, other) in &[(*a, *b), (*b, *a)] {
                    if !self.nodes[src].needs_grad {
                        continue;
                    }
                    let ts = &self.nodes[src].tensor;
                    let to = &self.nodes[other].tensor;
                    if ts.shape() == out.shape() && to.shape() == out.shape() {
                        let d = g.zip_map(to, |gv, ov| gv * ov)?;
                        add_into(grads, src, ts.shape(), &d);
                    } else if ts.is_scalar() {
                        let total: f64 = g.values().iter().zip(to.values()).map(|(x, y)| x * y).sum();
                        add_into(grads, src, ts.shape(), &Tensor::scalar(total));
                    } else {
                        // other is the scalar side
                        let s = to.item();
                        let d = g.scaled(s);
                        add_into(grads, src, ts.shape(), &d);
                    }
                }
            }
            Op::Scale { x, factor } => {
                if self.nodes[*x].needs_grad {
                    let d = g.scaled(*factor);
                    add_into(grads, *x, self.nodes[*x].tensor.shape(), &d);
                }
            }
            Op::AddRowBias { x, bias } => {
                if self.nodes[*x].needs_grad {
                    add_into(grads, *x, self.nodes[*x].tensor.shape(), g);
                }
                if self.nodes[*bias].needs_grad {
                    let (m, n) = (out.rows(), out.cols());
                    let mut d = vec![0.0; n];
                    for i in 0..m {
                        for j in 0..n {
                            d[j] += g.values()[i * n + j];
                        }
                    }
                    add_into(grads, *bias, &[n], &Tensor::new(vec![n], d)?);
                }
            }
            Op::Relu { x } => {
                if self.nodes[*x].needs_grad {
                    let tx = &self.nodes[*x].tensor;
                    let d = g.zip_map(tx, |gv, xv| if xv > 0.0 { gv } else { 0.0 })?;
                    add_into(grads, *x, tx.shape(), &d);
                }
            }
            Op::LeakyRelu { x, slope } => {
                if self.nodes[*x].needs_grad {
                    let tx = &self.nodes[*x].tensor;
                    let s = *slope;
                    let d = g.zip_map(tx, |gv, xv| if xv > 0.0 { gv } else { s * gv })?;
                    add_into(grads, *x, tx.shape(), &d);
                }
            }
            Op::Tanh { x } => {
                if self.nodes[*x].needs_grad {
                    let d = g.zip_map(out, |gv, y| gv * (1.0 - y * y))?;
                    add_into(grads, *x, self.nodes[*x].tensor.shape(), &d);
                }
            }
            Op::Sigmoid { x } => {
                if self.nodes[*x].needs_grad {
                    let d = g.zip_map(out, |gv, y| gv * y * (1.0 - y))?;
                    add_into(grads, *x, self.nodes[*x].tensor.shape(), &d);
                }
            }
            Op::Sum { x, axis } | Op::Mean { x, axis } => {
                if self.nodes[*x].needs_grad {
                    let tx = &self.nodes[*x].tensor;
                    let is_mean = matches!(self.nodes[idx].op, Op::Mean { .. });
                    let d = reduce_backward_linear(tx.shape(), *axis, g, is_mean)?;
                    add_into(grads, *x, tx.shape(), &d);
                }
            }
            Op::Max { x, argmax, .. } => {
                if self.nodes[*x].needs_grad {
                    let tx = &self.nodes[*x].tensor;
                    let mut d = Tensor::zeros(tx.shape());
                    for (out_idx, &src_idx) in argmax.iter().enumerate() {
                        d.values_mut()[src_idx] += g.values()[out_idx];
                    }
                    add_into(grads, *x, tx.shape(), &d);
                }
            }
            Op::Concat { a, b } => {
                let la = self.nodes[*a].tensor.numel();
                if self.nodes[*a].needs_grad {
                    let d = Tensor::new(vec![la], g.values()[..la].to_vec())?;
                    add_into(grads, *a, &[la], &d);
                }
                if self.nodes[*b].needs_grad {
                    let lb = self.nodes[*b].tensor.numel();
                    let d = Tensor::new(vec![lb], g.values()[la..].to_vec())?;
                    add_into(grads, *b, &[lb], &d);
                }
            }
            Op::Conv { x, kernels, bias, meta, items } => {
                self.conv_backward(*x, *kernels, *bias, meta, *items, g, grads)?;
            }
            Op::BlockTimeMean { x, channels, steps } => {
                if self.nodes[*x].needs_grad {
                    let tx = &self.nodes[*x].tensor;
                    let items = tx.rows();
                    let mut d = vec![0.0; tx.numel()];
                    let inv = 1.0 / *steps as f64;
                    for i in 0..items {
                        for c in 0..*channels {
                            let gv = g.values()[i * channels + c] * inv;
                            let base = i * channels * steps + c * steps;
                            for t in 0..*steps {
                                d[base + t] += gv;
                            }
                        }
                    }
                    add_into(grads, *x, tx.shape(), &Tensor::new(tx.shape().to_vec(), d)?);
                }
            }
            Op::RowSoftmax { x, mask } => {
                if self.nodes[*x].needs_grad {
                    let (r, c) = (out.rows(), out.cols());
                    let mut d = vec![0.0; r * c];
                    for i in 0..r {
                        let p = &out.values()[i * c..(i + 1) * c];
                        let gr = &g.values()[i * c..(i + 1) * c];
                        let sel = |j: usize| mask.as_ref().map_or(true, |m| m[i * c + j]);
                        let dot: f64 =
                            (0..c).filter(|&j| sel(j)).map(|j| p[j] * gr[j]).sum();
                        for j in 0..c {
                            if sel(j) {
                                d[i * c + j] = p[j] * (gr[j] - dot);
                            }
                        }
                    }
                    let tx = &self.nodes[*x].tensor;
                    add_into(grads, *x, tx.shape(), &Tensor::new(tx.shape().to_vec(), d)?);
                }
            }
            Op::RowSparsemax { x, support } => {
                if self.nodes[*x].needs_grad {
                    let (r, c) = (out.rows(), out.cols());
                    let mut d = vec![0.0; r * c];
                    for i in 0..r {
                        let gr = &g.values()[i * c..(i + 1) * c];
                        let sup = &support[i * c..(i + 1) * c];
                        let count = sup.iter().filter(|&&s| s).count();
                        if count == 0 {
                            continue;
                        }
                        let mean: f64 = (0..c).filter(|&j| sup[j]).map(|j| gr[j]).sum::<f64>()
                            / count as f64;
                        for j in 0..c {
                            if sup[j] {
                                d[i * c + j] = gr[j] - mean;
                            }
                        }
                    }
                    let tx = &self.nodes[*x].tensor;
                    add_into(grads, *x, tx.shape(), &Tensor::new(tx.shape().to_vec(), d)?);
                }
            }
            Op::OuterSum { u, v } => {
                let (n, m) = (out.rows(), out.cols());
                if self.nodes[*u].needs_grad {
                    let mut d = vec![0.0; n];
                    for i in 0..n {
                        d[i] = g.values()[i * m..(i + 1) * m].iter().sum();
                    }
                    add_into(grads, *u, &[n, 1], &Tensor::new(vec![n, 1], d)?);
                }
                if self.nodes[*v].needs_grad {
                    let mut d = vec![0.0; m];
                    for j in 0..m {
                        d[j] = (0..n).map(|i| g.values()[i * m + j]).sum();
                    }
                    add_into(grads, *v, &[m, 1], &Tensor::new(vec![m, 1], d)?);
                }
            }
            Op::Dropout { x, mask } => {
                if self.nodes[*x].needs_grad {
                    let tx = &self.nodes[*x].tensor;
                    let data: Vec<f64> =
                        g.values().iter().zip(mask).map(|(&gv, &m)| gv * m).collect();
                    add_into(grads, *x, tx.shape(), &Tensor::new(tx.shape().to_vec(), data)?);
                }
            }
            Op::BceWithLogits { logits, targets } => {
                if self.nodes[*logits].needs_grad {
                    let tl = &self.nodes[*logits].tensor;
                    let n = targets.len() as f64;
                    let gv = g.item();
                    let data: Vec<f64> = tl
                        .values()
                        .iter()
                        .zip(targets)
                        .map(|(&z, &t)| gv * (sigmoid(z) - t) / n)
                        .collect();
                    add_into(grads, *logits, tl.shape(), &Tensor::new(tl.shape().to_vec(), data)?);
                }
            }
        }
        Ok(())
    }

    fn conv_backward(
        &self,
        x: usize,
        kernels: usize,
        bias: Option<usize>,
        meta: &ConvMeta,
        items: usize,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<()> {
        let tx = &self.nodes[x].tensor;
        let tk = &self.nodes[kernels].tensor;
        let xv = tx.values();
        let kv = tk.values();
        let gv = g.values();
        let item_in = meta.c_in * meta.t_in;
        let item_out = meta.c_out * meta.t_out;

        let want_x = self.nodes[x].needs_grad;
        let want_k = self.nodes[kernels].needs_grad;
        let want_b = bias.map(|b| self.nodes[b].needs_grad).unwrap_or(false);

        let mut dx = if want_x { vec![0.0; tx.numel()] } else { Vec::new() };
        let mut dk = if want_k { vec![0.0; tk.numel()] } else { Vec::new() };
        let mut db = if want_b { vec![0.0; meta.c_out] } else { Vec::new() };

        for item in 0..items {
            let xo = item * item_in;
            let go = item * item_out;
            for co in 0..meta.c_out {
                for tp in 0..meta.t_out {
                    let gval = gv[go + co * meta.t_out + tp];
                    if gval == 0.0 {
                        continue;
                    }
                    if want_b {
                        db[co] += gval;
                    }
                    for ci in 0..meta.c_in {
                        for u in 0..meta.k {
                            let t = (tp * meta.stride + u * meta.dilation) as isize
                                - meta.padding as isize;
                            if t < 0 || t as usize >= meta.t_in {
                                continue;
                            }
                            let t = t as usize;
                            let kidx = (co * meta.c_in + ci) * meta.k + u;
                            if want_x {
                                dx[xo + ci * meta.t_in + t] += gval * kv[kidx];
                            }
                            if want_k {
                                dk[kidx] += gval * xv[xo + ci * meta.t_in + t];
                            }
                        }
                    }
                }
            }
        }
        if want_x {
            add_into(grads, x, tx.shape(), &Tensor::new(tx.shape().to_vec(), dx)?);
        }
        if want_k {
            add_into(grads, kernels, tk.shape(), &Tensor::new(tk.shape().to_vec(), dk)?);
        }
        if want_b {
            let b = bias.unwrap();
            add_into(grads, b, &[meta.c_out], &Tensor::new(vec![meta.c_out], db)?);
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn add_into(grads: &mut [Option<Tensor>], idx: usize, shape: &[usize], delta: &Tensor) {
    match &mut grads[idx] {
        Some(acc) => {
            for (a, d) in acc.values_mut().iter_mut().zip(delta.values()) {
                *a += d;
            }
        }
        None => {
            debug_assert_eq!(shape, delta.shape());
            grads[idx] = Some(delta.clone());
        }
    }
}

enum Reduction {
    Sum,
    Mean,
    Max,
}

/// Forward pass of reductions; returns (output, argmax indices for max).
fn reduce_forward(x: &Tensor, axis: Option<usize>, red: Reduction) -> (Tensor, Vec<usize>) {
    match axis {
        None => {
            let vals = x.values();
            match red {
                Reduction::Sum => (Tensor::scalar(vals.iter().sum()), Vec::new()),
                Reduction::Mean => {
                    (Tensor::scalar(vals.iter().sum::<f64>() / vals.len() as f64), Vec::new())
                }
                Reduction::Max => {
                    let mut best = 0;
                    for (i, &v) in vals.iter().enumerate() {
                        if v > vals[best] {
                            best = i;
                        }
                    }
                    (Tensor::scalar(vals[best]), vec![best])
                }
            }
        }
        Some(ax) => {
            if x.rank() == 1 {
                // axis 0 over rank 1 is the full reduction
                return reduce_forward(x, None, red);
            }
            let (r, c) = (x.rows(), x.cols());
            let out_len = if ax == 0 { c } else { r };
            let mut out = vec![0.0; out_len];
            let mut arg = vec![0usize; out_len];
            match red {
                Reduction::Sum | Reduction::Mean => {
                    for i in 0..r {
                        for j in 0..c {
                            let o = if ax == 0 { j } else { i };
                            out[o] += x.values()[i * c + j];
                        }
                    }
                    if matches!(red, Reduction::Mean) {
                        let denom = if ax == 0 { r } else { c } as f64;
                        for v in &mut out {
                            *v /= denom;
                        }
                    }
                    (Tensor::new(vec![out_len], out).unwrap(), Vec::new())
                }
                Reduction::Max => {
                    let mut init = vec![false; out_len];
                    for i in 0..r {
                        for j in 0..c {
                            let o = if ax == 0 { j } else { i };
                            let v = x.values()[i * c + j];
                            if !init[o] || v > out[o] {
                                out[o] = v;
                                arg[o] = i * c + j;
                                init[o] = true;
                            }
                        }
                    }
                    (Tensor::new(vec![out_len], out).unwrap(), arg)
                }
            }
        }
    }
}

/// Shared backward for sum/mean (gradient broadcast, optionally scaled).
fn reduce_backward_linear(
    in_shape: &[usize],
    axis: Option<usize>,
    g: &Tensor,
    is_mean: bool,
) -> Result<Tensor> {
    let numel: usize = in_shape.iter().product();
    let mut d = vec![0.0; numel];
    match axis {
        None => {
            let scale = if is_mean { 1.0 / numel as f64 } else { 1.0 };
            let gv = g.item() * scale;
            for v in &mut d {
                *v = gv;
            }
        }
        Some(ax) => {
            if in_shape.len() == 1 {
                return reduce_backward_linear(in_shape, None, g, is_mean);
            }
            let (r, c) = (in_shape[0], in_shape[1]);
            let denom = if ax == 0 { r } else { c } as f64;
            let scale = if is_mean { 1.0 / denom } else { 1.0 };
            for i in 0..r {
                for j in 0..c {
                    let o = if ax == 0 { j } else { i };
                    d[i * c + j] = g.values()[o] * scale;
                }
            }
        }
    }
    Tensor::new(in_shape.to_vec(), d)
}

fn conv_forward_item(x: &[f64], k: &[f64], bias: Option<&[f64]>, meta: &ConvMeta, out: &mut [f64]) {
    for co in 0..meta.c_out {
        for tp in 0..meta.t_out {
            let mut acc = bias.map_or(0.0, |b| b[co]);
            for ci in 0..meta.c_in {
                for u in 0..meta.k {
                    let t = (tp * meta.stride + u * meta.dilation) as isize - meta.padding as isize;
                    if t < 0 || t as usize >= meta.t_in {
                        continue;
                    }
                    acc += x[ci * meta.t_in + t as usize] * k[(co * meta.c_in + ci) * meta.k + u];
                }
            }
            out[co * meta.t_out + tp] = acc;
        }
    }
}

/// Euclidean projection of one row onto the probability simplex
/// (sort-based algorithm). Supports exact zeros.
pub fn sparsemax_row(z: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = z.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut k = 0;
    let mut cumsum_k = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumsum += v;
        if 1.0 + (i as f64 + 1.0) * v > cumsum {
            k = i + 1;
            cumsum_k = cumsum;
        }
    }
    debug_assert!(k >= 1);
    let tau = (cumsum_k - 1.0) / k as f64;
    z.iter().map(|&v| (v - tau).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1(v: &[f64]) -> Tensor {
        Tensor::new(vec![v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn relu_and_gates() {
        let mut tape = Tape::new();
        let x = tape.constant(t1(&[-1.0, 0.0, 2.0])).unwrap();
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y).values(), &[0.0, 0.0, 2.0]);

        let z = tape.constant(Tensor::scalar(0.0)).unwrap();
        let s = tape.sigmoid(z).unwrap();
        assert_eq!(tape.value(s).item(), 0.5);

        let w = tape.constant(Tensor::scalar(-2.0)).unwrap();
        let l = tape.leaky_relu(w, 0.2).unwrap();
        assert!((tape.value(l).item() + 0.4).abs() < 1e-15);
    }

    #[test]
    fn reductions_match_hand_values() {
        let mut tape = Tape::new();
        let m = tape
            .constant(Tensor::new(vec![2, 2], vec![1.0, 3.0, 5.0, 7.0]).unwrap())
            .unwrap();
        let mu = tape.mean(m, Some(0)).unwrap();
        assert_eq!(tape.value(mu).values(), &[3.0, 5.0]);

        let v = tape.constant(t1(&[1.0, 2.0, 3.0])).unwrap();
        let s = tape.sum(v, None).unwrap();
        assert_eq!(tape.value(s).item(), 6.0);

        assert!(tape.mean(m, Some(2)).is_err());
    }

    #[test]
    fn max_gradient_routes_to_first_maximum() {
        let mut tape = Tape::new();
        let x = tape.param(t1(&[1.0, 5.0, 2.0])).unwrap();
        let m = tape.max(x, None).unwrap();
        let g = tape.backward(m).unwrap();
        assert_eq!(g.get(x).unwrap().values(), &[0.0, 1.0, 0.0]);

        // tie: gradient goes to the first maximal element
        let mut tape = Tape::new();
        let x = tape.param(t1(&[5.0, 5.0, 1.0])).unwrap();
        let m = tape.max(x, None).unwrap();
        let g = tape.backward(m).unwrap();
        assert_eq!(g.get(x).unwrap().values(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let s = tape.sum(w, None).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap().values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_linear_map() {
        // loss = sum(W x): grad(W) = column-broadcast of x^T
        let mut tape = Tape::new();
        let w = tape.param(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let x = tape.constant(Tensor::new(vec![2, 1], vec![5.0, 7.0]).unwrap()).unwrap();
        let y = tape.matmul(w, x).unwrap();
        let s = tape.sum(y, None).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap().values(), &[5.0, 7.0, 5.0, 7.0]);
    }

    #[test]
    fn untouched_parameter_gets_zero_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::new(vec![2, 2], vec![1.0; 4]).unwrap()).unwrap();
        let unused = tape.param(Tensor::new(vec![3], vec![1.0; 3]).unwrap()).unwrap();
        let s = tape.sum(w, None).unwrap();
        let g = tape.backward(s).unwrap();
        assert!(g.get(unused).is_none());
        assert_eq!(g.of(unused, &[3]).values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let w = tape.param(t1(&[1.0, 2.0])).unwrap();
        assert!(matches!(tape.backward(w), Err(Error::Contract(_))));
    }

    #[test]
    fn conv_sliding_sum() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let k = tape.constant(Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]).unwrap()).unwrap();
        let y = tape.conv1d(x, k, None, 1, 1, 0).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 3]);
        assert_eq!(tape.value(y).values(), &[3.0, 5.0, 7.0]);
    }

    #[test]
    fn conv_identity_kernel() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, 5], vec![1.0, -2.0, 3.0, 0.5, 9.0]).unwrap()).unwrap();
        let k = tape.constant(Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap()).unwrap();
        let y = tape.conv1d(x, k, None, 1, 1, 0).unwrap();
        assert_eq!(tape.value(y).values(), tape.value(x).values());
    }

    #[test]
    fn conv_kernel_longer_than_padded_input_fails() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap()).unwrap();
        let k = tape.constant(Tensor::new(vec![1, 1, 5], vec![1.0; 5]).unwrap()).unwrap();
        assert!(matches!(tape.conv1d(x, k, None, 1, 1, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn batch_conv_matches_single() {
        let mut tape = Tape::new();
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = vec![-1.0, 0.5, 2.0, 0.0, 1.0, -2.0];
        let mut joined = a.clone();
        joined.extend_from_slice(&b);
        let xs = tape.constant(Tensor::new(vec![2, 6], joined).unwrap()).unwrap();
        let k = tape
            .constant(Tensor::new(vec![2, 2, 2], vec![0.3, -0.1, 0.7, 0.2, 1.0, 0.0, -0.5, 0.25]).unwrap())
            .unwrap();
        let bias = tape.constant(t1(&[0.1, -0.2])).unwrap();
        let batched = tape.conv1d_batch(xs, 2, k, Some(bias), 1, 1, 1).unwrap();

        for (i, raw) in [a, b].iter().enumerate() {
            let x = tape.constant(Tensor::new(vec![2, 3], raw.clone()).unwrap()).unwrap();
            let single = tape.conv1d(x, k, Some(bias), 1, 1, 1).unwrap();
            let cols = tape.value(batched).cols();
            let row = &tape.value(batched).values()[i * cols..(i + 1) * cols];
            assert_eq!(row, tape.value(single).values());
        }
    }

    #[test]
    fn sparsemax_examples() {
        assert_eq!(sparsemax_row(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(sparsemax_row(&[2.0, 0.0]), vec![1.0, 0.0]);
        let thirds = sparsemax_row(&[1.0, 1.0, 1.0]);
        for v in thirds {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_under_mask() {
        let mut tape = Tape::new();
        let x = tape
            .constant(Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.0, 1.0]).unwrap())
            .unwrap();
        let mask = vec![true, false, true, true, true, true];
        let y = tape.row_softmax(x, Some(&mask)).unwrap();
        let v = tape.value(y).values();
        assert_eq!(v[1], 0.0);
        assert!((v[0] + v[2] - 1.0).abs() < 1e-12);
        assert!((v[3] + v[4] + v[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_forward_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(1e308)).unwrap();
        let y = tape.mul(x, x);
        assert!(matches!(y, Err(Error::Training(_))));
    }

    #[test]
    fn forward_replay_is_bit_identical() {
        let run = || {
            let mut tape = Tape::new();
            let x = tape
                .constant(Tensor::new(vec![2, 2], vec![0.3, -1.2, 0.77, 2.5]).unwrap())
                .unwrap();
            let w = tape
                .constant(Tensor::new(vec![2, 2], vec![1.5, 0.25, -0.75, 0.1]).unwrap())
                .unwrap();
            let h = tape.matmul(x, w).unwrap();
            let a = tape.tanh(h).unwrap();
            let s = tape.sum(a, None).unwrap();
            tape.value(s).item()
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}
