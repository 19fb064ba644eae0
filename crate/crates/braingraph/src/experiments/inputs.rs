//! One place that decides what each model family sees: connectivity is
//! estimated once per subject and reused across every candidate that
//! only changes thresholding or diffusion.

use crate::datasets::io::format_float;
use crate::datasets::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::graph::{
    build_dynamic_graph_from_fc, build_static_graph_from_fc, pearson_fc, BrainGraph,
    DiffusionConfig, DynamicEdges, Scheme, Transition,
};
use crate::models::baselines::lower_triangle_vector;
use crate::models::{Family, InputDims, Model, ModelInput, ModelSpec, Prediction, SvmModel};
use crate::numerics::Tensor;
use crate::parallel::par_map;

/// A full training configuration: architecture plus everything the
/// optimizer and the graph construction need.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub spec: ModelSpec,
    pub lr: f64,
    pub weight_decay: f64,
    pub keep_fraction: f64,
    pub diffusion: DiffusionConfig,
}

impl Candidate {
    pub fn new(family: Family) -> Candidate {
        Candidate {
            spec: ModelSpec::new(family),
            lr: 1e-3,
            weight_decay: 0.0,
            keep_fraction: 0.5,
            diffusion: DiffusionConfig::none(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.diffusion.validate()?;
        if self.spec.family.is_gradient_trained() && !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight decay must be >= 0".into()));
        }
        if self.uses_threshold() && !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::Config(format!("keep_fraction {} outside (0, 1]", self.keep_fraction)));
        }
        Ok(())
    }

    /// Families whose edges come from thresholded connectivity.
    pub fn uses_threshold(&self) -> bool {
        matches!(self.spec.family, Family::Gcn | Family::Gat | Family::Gin | Family::Stgcn)
    }

    /// Compact comma-free rendering for report CSV cells.
    pub fn describe(&self) -> String {
        let mut s = self.spec.describe();
        if self.spec.family.is_gradient_trained() {
            s.push_str(&format!(";lr={};wd={}", format_float(self.lr), format_float(self.weight_decay)));
        }
        if self.uses_threshold() {
            s.push_str(&format!(";keep={};diff={}", format_float(self.keep_fraction), diffusion_tag(&self.diffusion)));
        }
        s
    }

    /// Cache key for prepared inputs: candidates that build identical
    /// graphs share one entry.
    pub(crate) fn input_key(&self) -> String {
        match self.spec.family {
            Family::Gcn | Family::Gat | Family::Gin => format!(
                "static;keep={};diff={}",
                format_float(self.keep_fraction),
                diffusion_tag(&self.diffusion)
            ),
            Family::Stgcn => format!(
                "dynamic;keep={};diff={}",
                format_float(self.keep_fraction),
                diffusion_tag(&self.diffusion)
            ),
            Family::Astgcn => "adaptive".to_string(),
            Family::Mlp | Family::SvmRbf => "vector".to_string(),
            Family::Cnn1d => "timecourses".to_string(),
        }
    }
}

fn diffusion_tag(d: &DiffusionConfig) -> String {
    let mut tag = match d.scheme {
        Scheme::None => return "none".to_string(),
        Scheme::Heat { t } => format!("heat(t={}", format_float(t)),
        Scheme::Ppr { alpha } => format!("ppr(a={}", format_float(alpha)),
    };
    tag.push_str(match d.transition {
        Transition::Sym => "|sym",
        Transition::Rw => "|rw",
    });
    tag.push_str(&format!("|K={}", d.order));
    if let Some(f) = d.post_sparsify_keep {
        tag.push_str(&format!("|keep={}", format_float(f)));
    }
    tag.push(')');
    tag
}

/// One subject's model-ready input, owned.
#[derive(Debug, Clone)]
pub enum Prepared {
    Graph(BrainGraph),
    Vector(Tensor),
    Timecourses(Tensor),
}

impl Prepared {
    pub fn as_input(&self) -> ModelInput<'_> {
        match self {
            Prepared::Graph(g) => ModelInput::Graph(g),
            Prepared::Vector(v) => ModelInput::Vector(v),
            Prepared::Timecourses(t) => ModelInput::Timecourses(t),
        }
    }
}

/// Per-subject connectivity estimated once; every candidate's inputs
/// are derived from this cache.
pub struct InputFactory<'a> {
    dataset: &'a TimeSeriesDataset,
    fc: Vec<Tensor>,
}

impl<'a> InputFactory<'a> {
    pub fn new(dataset: &'a TimeSeriesDataset) -> Result<InputFactory<'a>> {
        let fc = collect(par_map(dataset.subjects(), |s| pearson_fc(&s.timecourses)))?;
        Ok(InputFactory { dataset, fc })
    }

    pub fn dataset(&self) -> &TimeSeriesDataset {
        self.dataset
    }

    pub fn connectivity(&self, subject: usize) -> &Tensor {
        &self.fc[subject]
    }

    /// Shape that `Model::init` needs for this family on this dataset.
    pub fn input_dims(&self, family: Family) -> InputDims {
        let n = self.dataset.num_rois();
        let t = self.dataset.subjects().first().map_or(0, |s| s.timepoints());
        match family {
            Family::Gcn | Family::Gat | Family::Gin => InputDims { nodes: n, features: n },
            Family::Stgcn | Family::Astgcn => InputDims { nodes: n, features: t },
            Family::Mlp | Family::SvmRbf => InputDims { nodes: 0, features: n * (n - 1) / 2 },
            Family::Cnn1d => InputDims { nodes: n, features: t },
        }
    }

    /// Model-ready inputs for every subject, in dataset order.
    pub fn prepare(&self, candidate: &Candidate) -> Result<Vec<Prepared>> {
        candidate.validate()?;
        let keep = candidate.keep_fraction;
        let diff = &candidate.diffusion;
        let subjects = self.dataset.subjects();
        let indexed: Vec<usize> = (0..subjects.len()).collect();
        let items = match candidate.spec.family {
            Family::Gcn | Family::Gat | Family::Gin => par_map(&indexed, |&i| {
                build_static_graph_from_fc(&self.fc[i], subjects[i].label, keep, diff)
                    .map(Prepared::Graph)
            }),
            Family::Stgcn => par_map(&indexed, |&i| {
                build_dynamic_graph_from_fc(
                    &subjects[i],
                    Some(&self.fc[i]),
                    DynamicEdges::Thresholded { keep_fraction: keep },
                    diff,
                )
                .map(Prepared::Graph)
            }),
            Family::Astgcn => par_map(&indexed, |&i| {
                build_dynamic_graph_from_fc(&subjects[i], None, DynamicEdges::Adaptive, diff)
                    .map(Prepared::Graph)
            }),
            Family::Mlp | Family::SvmRbf => {
                par_map(&indexed, |&i| lower_triangle_vector(&self.fc[i]).map(Prepared::Vector))
            }
            Family::Cnn1d => par_map(&indexed, |&i| {
                Ok(Prepared::Timecourses(subjects[i].timecourses.transposed()))
            }),
        };
        collect(items)
    }
}

fn collect<T>(items: Vec<Result<T>>) -> Result<Vec<T>> {
    items.into_iter().collect()
}

/// A fitted model of either kind, evaluated uniformly.
pub enum Predictor {
    Gradient(Model),
    Svm(SvmModel),
}

impl Predictor {
    pub fn predict(&self, input: &Prepared) -> Result<Prediction> {
        match self {
            Predictor::Gradient(m) => m.predict(&input.as_input()),
            Predictor::Svm(s) => match input {
                Prepared::Vector(v) => s.predict(v),
                _ => Err(Error::Contract("svm expects vector inputs".into())),
            },
        }
    }
}
