//! Model zoo: graph networks (GCN, GAT, GIN), spatio-temporal graph
//! networks (ST-GCN, AST-GCN), and structure-agnostic baselines (MLP,
//! 1D CNN, SVM-RBF). All gradient-trained families share one tape,
//! one classification head shape, and one parameter-naming scheme.

pub mod baselines;
pub mod checkpoint;
pub mod graph_nets;
pub mod readout;
pub mod svm;
pub mod temporal;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{BrainGraph, GraphKind};
use crate::numerics::{Stream, Tape, Tensor, ValueId};

pub use svm::{svm_rbf_train, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    Gcn,
    Gat,
    Gin,
    Stgcn,
    Astgcn,
    Mlp,
    Cnn1d,
    SvmRbf,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Gcn => "gcn",
            Family::Gat => "gat",
            Family::Gin => "gin",
            Family::Stgcn => "stgcn",
            Family::Astgcn => "astgcn",
            Family::Mlp => "mlp",
            Family::Cnn1d => "cnn1d",
            Family::SvmRbf => "svm_rbf",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        Ok(match s {
            "gcn" => Family::Gcn,
            "gat" => Family::Gat,
            "gin" => Family::Gin,
            "stgcn" => Family::Stgcn,
            "astgcn" => Family::Astgcn,
            "mlp" => Family::Mlp,
            "cnn1d" => Family::Cnn1d,
            "svm_rbf" => Family::SvmRbf,
            other => return Err(Error::Config(format!("unknown family {other:?}"))),
        })
    }

    /// Families whose forward pass consumes a graph.
    pub fn is_graph(&self) -> bool {
        matches!(self, Family::Gcn | Family::Gat | Family::Gin | Family::Stgcn | Family::Astgcn)
    }

    /// Families trained by gradient descent (everything but the SVM).
    pub fn is_gradient_trained(&self) -> bool {
        *self != Family::SvmRbf
    }

    pub fn all() -> [Family; 8] {
        [
            Family::Gcn,
            Family::Gat,
            Family::Gin,
            Family::Stgcn,
            Family::Astgcn,
            Family::Mlp,
            Family::Cnn1d,
            Family::SvmRbf,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Readout {
    Mean,
    MeanCatMax,
    Sum,
}

impl Readout {
    pub fn as_str(&self) -> &'static str {
        match self {
            Readout::Mean => "mean",
            Readout::MeanCatMax => "mean_cat_max",
            Readout::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Result<Readout> {
        Ok(match s {
            "mean" => Readout::Mean,
            "mean_cat_max" => Readout::MeanCatMax,
            "sum" => Readout::Sum,
            other => return Err(Error::Config(format!("unknown readout {other:?}"))),
        })
    }

    /// Length of the pooled vector for hidden width `d`.
    pub fn output_dim(&self, d: usize) -> usize {
        match self {
            Readout::MeanCatMax => 2 * d,
            _ => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowNormalizer {
    Softmax,
    Sparsemax,
}

impl RowNormalizer {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowNormalizer::Softmax => "softmax",
            RowNormalizer::Sparsemax => "sparsemax",
        }
    }

    pub fn parse(s: &str) -> Result<RowNormalizer> {
        Ok(match s {
            "softmax" => RowNormalizer::Softmax,
            "sparsemax" => RowNormalizer::Sparsemax,
            other => return Err(Error::Config(format!("unknown row normalizer {other:?}"))),
        })
    }
}

/// Declarative architecture description. Fields irrelevant to a family
/// keep their defaults and are ignored by it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub hidden_dim: usize,
    pub readout: Readout,
    pub dropout: f64,
    /// GAT attention heads.
    pub heads: usize,
    /// ST-GCN / AST-GCN block count.
    pub blocks: usize,
    /// Temporal kernel size (ST-GCN, AST-GCN, CNN); must be odd.
    pub temporal_kernel: usize,
    /// AST-GCN embedding dimension d_e.
    pub embedding_dim: usize,
    pub row_normalizer: RowNormalizer,
    /// MLP hidden-layer count (each of width hidden_dim).
    pub mlp_layers: usize,
    /// CNN temporal stride.
    pub cnn_stride: usize,
    pub svm_c: f64,
    pub svm_gamma: f64,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        ModelSpec {
            family,
            hidden_dim: 32,
            readout: Readout::Mean,
            dropout: 0.0,
            heads: 1,
            blocks: 1,
            temporal_kernel: 3,
            embedding_dim: 8,
            row_normalizer: RowNormalizer::Softmax,
            mlp_layers: 1,
            cnn_stride: 2,
            svm_c: 1.0,
            svm_gamma: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        match self.family {
            Family::Gat => {
                if self.heads == 0 {
                    return Err(Error::Config("need at least one attention head".into()));
                }
            }
            Family::Stgcn | Family::Astgcn => {
                if self.blocks == 0 {
                    return Err(Error::Config("need at least one block".into()));
                }
                if self.temporal_kernel % 2 == 0 || self.temporal_kernel == 0 {
                    return Err(Error::Config("temporal kernel must be odd".into()));
                }
                if self.family == Family::Astgcn && self.embedding_dim == 0 {
                    return Err(Error::Config("embedding_dim must be positive".into()));
                }
            }
            Family::Cnn1d => {
                if self.temporal_kernel == 0 || self.cnn_stride == 0 {
                    return Err(Error::Config("cnn kernel and stride must be positive".into()));
                }
            }
            Family::Mlp => {
                if self.mlp_layers == 0 {
                    return Err(Error::Config("mlp needs at least one hidden layer".into()));
                }
            }
            Family::SvmRbf => {
                if self.svm_c <= 0.0 || self.svm_gamma <= 0.0 {
                    return Err(Error::Config("svm C and gamma must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Compact `key=value` rendering of the family-relevant fields,
    /// used in report CSVs.
    pub fn describe(&self) -> String {
        let mut kv: Vec<String> = vec![format!("family={}", self.family.as_str())];
        match self.family {
            Family::Gcn | Family::Gin => {
                kv.push(format!("d_h={}", self.hidden_dim));
                kv.push(format!("readout={}", self.readout.as_str()));
                kv.push(format!("dropout={}", self.dropout));
            }
            Family::Gat => {
                kv.push(format!("d_h={}", self.hidden_dim));
                kv.push(format!("heads={}", self.heads));
                kv.push(format!("readout={}", self.readout.as_str()));
                kv.push(format!("dropout={}", self.dropout));
            }
            Family::Stgcn => {
                kv.push(format!("d_h={}", self.hidden_dim));
                kv.push(format!("blocks={}", self.blocks));
                kv.push(format!("kernel={}", self.temporal_kernel));
                kv.push(format!("readout={}", self.readout.as_str()));
                kv.push(format!("dropout={}", self.dropout));
            }
            Family::Astgcn => {
                kv.push(format!("d_h={}", self.hidden_dim));
                kv.push(format!("blocks={}", self.blocks));
                kv.push(format!("kernel={}", self.temporal_kernel));
                kv.push(format!("d_e={}", self.embedding_dim));
                kv.push(format!("normalizer={}", self.row_normalizer.as_str()));
                kv.push(format!("readout={}", self.readout.as_str()));
                kv.push(format!("dropout={}", self.dropout));
            }
            Family::Mlp => {
                kv.push(format!("d_h={}", self.hidden_dim));
                kv.push(format!("layers={}", self.mlp_layers));
                kv.push(format!("dropout={}", self.dropout));
            }
            Family::Cnn1d => {
                kv.push(format!("d_h={}", self.hidden_dim));
                kv.push(format!("kernel={}", self.temporal_kernel));
                kv.push(format!("stride={}", self.cnn_stride));
                kv.push(format!("dropout={}", self.dropout));
            }
            Family::SvmRbf => {
                kv.push(format!("C={}", self.svm_c));
                kv.push(format!("gamma={}", self.svm_gamma));
            }
        }
        kv.join(";")
    }
}

/// Input dimensions a model is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputDims {
    /// Node count (graph models), channel count (CNN); 0 for MLP.
    pub nodes: usize,
    /// Per-node feature length (static: N, dynamic: T), input vector
    /// length (MLP), or timepoints (CNN).
    pub features: usize,
}

/// One subject's model input.
pub enum ModelInput<'a> {
    Graph(&'a BrainGraph),
    /// Flattened strictly-lower-triangular FC, length N(N-1)/2.
    Vector(&'a Tensor),
    /// [N channels x T timepoints].
    Timecourses(&'a Tensor),
}

impl ModelInput<'_> {
    pub fn label(&self) -> Option<u8> {
        match self {
            ModelInput::Graph(g) => Some(g.label),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Prediction {
    pub logit: f64,
    pub probability: f64,
    pub label: u8,
}

impl Prediction {
    pub fn from_logit(logit: f64) -> Prediction {
        let probability = 1.0 / (1.0 + (-logit).exp());
        Prediction { logit, probability, label: u8::from(probability > 0.5) }
    }
}

/// A gradient-trained model: spec plus named parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: BTreeMap<String, Tensor>,
}

impl Model {
    /// Fresh parameters for `spec` on inputs of shape `dims`,
    /// deterministic in the stream.
    pub fn init(spec: &ModelSpec, dims: &InputDims, stream: &mut Stream) -> Result<Model> {
        spec.validate()?;
        let params = match spec.family {
            Family::Gcn => graph_nets::init_gcn(spec, dims, stream),
            Family::Gat => graph_nets::init_gat(spec, dims, stream),
            Family::Gin => graph_nets::init_gin(spec, dims, stream),
            Family::Stgcn => temporal::init_stgcn(spec, dims, stream, false),
            Family::Astgcn => temporal::init_stgcn(spec, dims, stream, true),
            Family::Mlp => baselines::init_mlp(spec, dims, stream),
            Family::Cnn1d => baselines::init_cnn1d(spec, dims, stream),
            Family::SvmRbf => {
                return Err(Error::Contract("svm_rbf is not gradient-trained; use svm_rbf_train".into()))
            }
        };
        Ok(Model { spec: spec.clone(), params })
    }

    /// Records the forward pass on `tape`, returning the logit node and
    /// the tape ids of every parameter (for gradient lookup). Dropout is
    /// active only when `train` is set.
    pub fn forward(
        &self,
        tape: &mut Tape,
        input: &ModelInput,
        train: bool,
        stream: &mut Stream,
    ) -> Result<(ValueId, BTreeMap<String, ValueId>)> {
        let mut ids = BTreeMap::new();
        for (name, tensor) in &self.params {
            ids.insert(name.clone(), tape.param(tensor.clone())?);
        }
        let ctx = ForwardCtx { spec: &self.spec, ids: &ids, train, dropout: self.spec.dropout };
        let logit = match self.spec.family {
            Family::Gcn => graph_nets::gcn_forward(tape, &ctx, expect_graph(input, GraphKind::Static)?, stream)?,
            Family::Gat => graph_nets::gat_forward(tape, &ctx, expect_graph(input, GraphKind::Static)?, stream)?,
            Family::Gin => graph_nets::gin_forward(tape, &ctx, expect_graph(input, GraphKind::Static)?, stream)?,
            Family::Stgcn => {
                temporal::stgcn_forward(tape, &ctx, expect_graph(input, GraphKind::Dynamic)?, stream)?
            }
            Family::Astgcn => temporal::astgcn_forward(
                tape,
                &ctx,
                expect_graph(input, GraphKind::DynamicAdaptive)?,
                stream,
            )?,
            Family::Mlp => match input {
                ModelInput::Vector(v) => baselines::mlp_forward(tape, &ctx, v, stream)?,
                _ => return Err(Error::Contract("mlp expects a vector input".into())),
            },
            Family::Cnn1d => match input {
                ModelInput::Timecourses(t) => baselines::cnn1d_forward(tape, &ctx, t, stream)?,
                _ => return Err(Error::Contract("cnn1d expects timecourses input".into())),
            },
            Family::SvmRbf => return Err(Error::Contract("svm_rbf has no tape forward".into())),
        };
        Ok((logit, ids))
    }

    /// Inference: logit -> probability -> hard label.
    pub fn predict(&self, input: &ModelInput) -> Result<Prediction> {
        let mut tape = Tape::new();
        let mut unused = Stream::new(0);
        let (logit, _) = self.forward(&mut tape, input, false, &mut unused)?;
        let t = tape.value(logit);
        if t.numel() != 1 {
            return Err(Error::Contract(format!("logit must be scalar, got {:?}", t.shape())));
        }
        Ok(Prediction::from_logit(t.values()[0]))
    }

    /// Loss of one labeled input without dropout; the finite-difference
    /// oracle re-evaluates this under perturbed parameters.
    pub fn loss_on(&self, input: &ModelInput, target: f64) -> Result<f64> {
        let mut tape = Tape::new();
        let mut unused = Stream::new(0);
        let (logit, _) = self.forward(&mut tape, input, false, &mut unused)?;
        let loss = tape.bce_with_logits(logit, &[target])?;
        Ok(tape.value(loss).item())
    }
}

fn expect_graph<'a>(input: &'a ModelInput, kind: GraphKind) -> Result<&'a BrainGraph> {
    match input {
        ModelInput::Graph(g) if g.kind == kind => Ok(g),
        ModelInput::Graph(g) => Err(Error::Contract(format!(
            "expected {kind:?} graph, got {:?}",
            g.kind
        ))),
        _ => Err(Error::Contract("expected a graph input".into())),
    }
}

/// Shared references every family forward needs.
pub(crate) struct ForwardCtx<'a> {
    pub spec: &'a ModelSpec,
    pub ids: &'a BTreeMap<String, ValueId>,
    pub train: bool,
    pub dropout: f64,
}

impl ForwardCtx<'_> {
    pub fn param(&self, name: &str) -> Result<ValueId> {
        self.ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::Contract(format!("missing parameter {name}")))
    }

    /// Dropout when training, identity otherwise.
    pub fn maybe_dropout(
        &self,
        tape: &mut Tape,
        x: ValueId,
        stream: &mut Stream,
    ) -> Result<ValueId> {
        if self.train && self.dropout > 0.0 {
            tape.dropout(x, self.dropout, stream)
        } else {
            Ok(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Adjacency};
    use crate::numerics::gradcheck::{max_relative_error, numeric_gradients};
    use rand::Rng;

    fn random_symmetric(n: usize, stream: &mut Stream) -> Tensor {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in i + 1..n {
                let v = stream.random_range(-1.0..1.0);
                t.set2(i, j, v);
                t.set2(j, i, v);
            }
        }
        t
    }

    fn random_matrix(r: usize, c: usize, stream: &mut Stream) -> Tensor {
        Tensor::new(vec![r, c], (0..r * c).map(|_| stream.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn normalized_random_adjacency(n: usize, stream: &mut Stream) -> Adjacency {
        let mut raw = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in i + 1..n {
                if stream.random_range(0.0..1.0) < 0.6 {
                    let v = stream.random_range(0.1..1.0);
                    raw.set2(i, j, v);
                    raw.set2(j, i, v);
                }
            }
        }
        normalize_adjacency(&Adjacency::raw(raw).unwrap()).unwrap()
    }

    fn check_family_gradients(spec: &ModelSpec, target: f64, seed: u64) -> f64 {
        let n = 6;
        let t = 20;
        let mut stream = Stream::new(seed);
        let dims = match spec.family {
            Family::Gcn | Family::Gat | Family::Gin => InputDims { nodes: n, features: n },
            Family::Stgcn | Family::Astgcn => InputDims { nodes: n, features: t },
            Family::Mlp => InputDims { nodes: 0, features: n * (n - 1) / 2 },
            Family::Cnn1d => InputDims { nodes: n, features: t },
            Family::SvmRbf => unreachable!(),
        };
        let adjacency = normalized_random_adjacency(n, &mut stream);
        let static_features = random_symmetric(n, &mut stream);
        let time_features = random_matrix(n, t, &mut stream);
        let vector = Tensor::new(
            vec![n * (n - 1) / 2],
            (0..n * (n - 1) / 2).map(|_| stream.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let graph = BrainGraph {
            adjacency: match spec.family {
                Family::Astgcn => None,
                _ => Some(adjacency),
            },
            features: if spec.family.is_graph() && spec.family != Family::Stgcn && spec.family != Family::Astgcn {
                static_features
            } else {
                time_features.clone()
            },
            label: 1,
            kind: match spec.family {
                Family::Stgcn => GraphKind::Dynamic,
                Family::Astgcn => GraphKind::DynamicAdaptive,
                _ => GraphKind::Static,
            },
        };
        let input = match spec.family {
            Family::Mlp => ModelInput::Vector(&vector),
            Family::Cnn1d => ModelInput::Timecourses(&time_features),
            _ => ModelInput::Graph(&graph),
        };

        let model = Model::init(spec, &dims, &mut Stream::new(seed + 1)).unwrap();
        let mut tape = Tape::new();
        let (logit, ids) = model.forward(&mut tape, &input, false, &mut Stream::new(0)).unwrap();
        let loss = tape.bce_with_logits(logit, &[target]).unwrap();
        let grads = tape.backward(loss).unwrap();
        let analytic: BTreeMap<String, Tensor> = ids
            .iter()
            .map(|(name, &id)| (name.clone(), grads.of(id, model.params[name].shape())))
            .collect();
        let numeric = numeric_gradients(&model.params, 1e-5, |p| {
            Model { spec: spec.clone(), params: p.clone() }.loss_on(&input, target).unwrap()
        });
        max_relative_error(&analytic, &numeric)
    }

    #[test]
    fn gradients_match_finite_differences_for_every_family() {
        let mut specs = Vec::new();
        let mut gcn = ModelSpec::new(Family::Gcn);
        gcn.hidden_dim = 4;
        specs.push((gcn, 1.0, 100));
        let mut gat = ModelSpec::new(Family::Gat);
        gat.hidden_dim = 4;
        gat.heads = 2;
        specs.push((gat, 0.0, 101));
        let mut gin = ModelSpec::new(Family::Gin);
        gin.hidden_dim = 4;
        specs.push((gin, 1.0, 102));
        let mut stgcn = ModelSpec::new(Family::Stgcn);
        stgcn.hidden_dim = 3;
        stgcn.blocks = 2;
        specs.push((stgcn, 0.0, 103));
        let mut astgcn = ModelSpec::new(Family::Astgcn);
        astgcn.hidden_dim = 3;
        astgcn.embedding_dim = 3;
        specs.push((astgcn, 1.0, 104));
        let mut mlp = ModelSpec::new(Family::Mlp);
        mlp.hidden_dim = 4;
        mlp.mlp_layers = 2;
        specs.push((mlp, 0.0, 105));
        let mut cnn = ModelSpec::new(Family::Cnn1d);
        cnn.hidden_dim = 4;
        specs.push((cnn, 1.0, 106));

        for (spec, target, seed) in specs {
            let err = check_family_gradients(&spec, target, seed);
            assert!(err < 1e-4, "{}: rel-err {err:.3e}", spec.family.as_str());
        }
    }

    #[test]
    fn gradients_cover_max_readout_and_sparsemax() {
        let mut gcn = ModelSpec::new(Family::Gcn);
        gcn.hidden_dim = 4;
        gcn.readout = Readout::MeanCatMax;
        let err = check_family_gradients(&gcn, 1.0, 200);
        assert!(err < 1e-4, "mean_cat_max rel-err {err:.3e}");

        let mut ast = ModelSpec::new(Family::Astgcn);
        ast.hidden_dim = 3;
        ast.embedding_dim = 3;
        ast.row_normalizer = RowNormalizer::Sparsemax;
        let err = check_family_gradients(&ast, 0.0, 201);
        assert!(err < 1e-4, "sparsemax rel-err {err:.3e}");
    }

    #[test]
    fn spec_validation_catches_bad_fields() {
        let mut s = ModelSpec::new(Family::Gat);
        s.heads = 0;
        assert!(s.validate().is_err());
        let mut s = ModelSpec::new(Family::Stgcn);
        s.temporal_kernel = 4;
        assert!(s.validate().is_err());
        let mut s = ModelSpec::new(Family::Gcn);
        s.dropout = 1.0;
        assert!(s.validate().is_err());
        assert!(ModelSpec::new(Family::Astgcn).validate().is_ok());
    }

    #[test]
    fn prediction_from_logit() {
        let p = Prediction::from_logit(0.0);
        assert_eq!(p.probability, 0.5);
        assert_eq!(p.label, 0);
        let p = Prediction::from_logit(3.0);
        assert!(p.probability > 0.95 && p.label == 1);
        assert!(p.probability < 1.0);
    }

    #[test]
    fn describe_lists_family_fields() {
        let s = ModelSpec::new(Family::Gat);
        let d = s.describe();
        assert!(d.contains("family=gat") && d.contains("heads=1"));
        assert!(!d.contains("C="));
    }
}
