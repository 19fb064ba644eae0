//! Assembling model-ready graphs from subjects.

use std::path::Path;

use crate::datasets::io::write_matrix_csv;
use crate::datasets::Subject;
use crate::error::{Error, Result};
use crate::graph::adjacency::{proportional_threshold, Adjacency};
use crate::graph::diffusion::{gdc_transform, DiffusionConfig};
use crate::graph::fc::pearson_fc;
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    /// FC-row node features, precomputed adjacency.
    Static,
    /// Timecourse node features, precomputed adjacency.
    Dynamic,
    /// Timecourse node features; adjacency learned in-model.
    DynamicAdaptive,
}

/// A node-attributed graph for one subject.
#[derive(Debug, Clone)]
pub struct BrainGraph {
    pub adjacency: Option<Adjacency>,
    /// [N x F]; static graphs: F = N (FC rows, zero diagonal);
    /// dynamic graphs: F = T (timecourses).
    pub features: Tensor,
    pub label: u8,
    pub kind: GraphKind,
}

impl BrainGraph {
    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

/// Thresholds + diffuses a precomputed FC matrix into model-ready edges.
pub fn adjacency_from_fc(
    fc: &Tensor,
    keep_fraction: f64,
    diffusion: &DiffusionConfig,
) -> Result<Adjacency> {
    gdc_transform(&proportional_threshold(fc, keep_fraction)?, diffusion)
}

fn zero_diagonal(fc: &Tensor) -> Tensor {
    let n = fc.rows();
    let mut features = fc.clone();
    for i in 0..n {
        features.set2(i, i, 0.0);
    }
    features
}

/// Static graph from a precomputed FC matrix: features are the full
/// (unthresholded) FC rows with a zeroed diagonal; edges come from
/// thresholding + diffusion.
pub fn build_static_graph_from_fc(
    fc: &Tensor,
    label: u8,
    keep_fraction: f64,
    diffusion: &DiffusionConfig,
) -> Result<BrainGraph> {
    let adjacency = adjacency_from_fc(fc, keep_fraction, diffusion)?;
    Ok(BrainGraph {
        adjacency: Some(adjacency),
        features: zero_diagonal(fc),
        label,
        kind: GraphKind::Static,
    })
}

/// Static graph built directly from a subject's timecourses.
pub fn build_static_graph(
    subject: &Subject,
    keep_fraction: f64,
    diffusion: &DiffusionConfig,
) -> Result<BrainGraph> {
    let fc = pearson_fc(&subject.timecourses)?;
    build_static_graph_from_fc(&fc, subject.label, keep_fraction, diffusion)
}

/// Edge source for dynamic graphs.
#[derive(Debug, Clone, Copy)]
pub enum DynamicEdges {
    /// Thresholded FC, as in the static path.
    Thresholded { keep_fraction: f64 },
    /// No precomputed adjacency; the model learns one.
    Adaptive,
}

/// Dynamic graph: features are the [N x T] transposed timecourses.
/// Thresholded edges reuse `fc` when supplied, else estimate it here.
pub fn build_dynamic_graph_from_fc(
    subject: &Subject,
    fc: Option<&Tensor>,
    edges: DynamicEdges,
    diffusion: &DiffusionConfig,
) -> Result<BrainGraph> {
    let features = subject.timecourses.transposed();
    match edges {
        DynamicEdges::Thresholded { keep_fraction } => {
            let adjacency = match fc {
                Some(fc) => adjacency_from_fc(fc, keep_fraction, diffusion)?,
                None => adjacency_from_fc(&pearson_fc(&subject.timecourses)?, keep_fraction, diffusion)?,
            };
            Ok(BrainGraph {
                adjacency: Some(adjacency),
                features,
                label: subject.label,
                kind: GraphKind::Dynamic,
            })
        }
        DynamicEdges::Adaptive => Ok(BrainGraph {
            adjacency: None,
            features,
            label: subject.label,
            kind: GraphKind::DynamicAdaptive,
        }),
    }
}

pub fn build_dynamic_graph(
    subject: &Subject,
    edges: DynamicEdges,
    diffusion: &DiffusionConfig,
) -> Result<BrainGraph> {
    build_dynamic_graph_from_fc(subject, None, edges, diffusion)
}

/// Static graph whose adjacency is supplied directly (already
/// normalized) instead of being estimated from the timecourses;
/// features stay the subject's FC rows.
pub fn build_static_graph_with_adjacency(
    subject: &Subject,
    adjacency: Adjacency,
) -> Result<BrainGraph> {
    if !adjacency.normalized {
        return Err(Error::Contract("expected a normalized adjacency".into()));
    }
    let fc = pearson_fc(&subject.timecourses)?;
    if adjacency.dim() != fc.rows() {
        return Err(Error::Dimension(format!(
            "adjacency dim {} vs {} ROIs",
            adjacency.dim(),
            fc.rows()
        )));
    }
    Ok(BrainGraph {
        adjacency: Some(adjacency),
        features: zero_diagonal(&fc),
        label: subject.label,
        kind: GraphKind::Static,
    })
}

/// Dumps `graph_<id>.csv` (adjacency, when present) and
/// `features_<id>.csv` into `dir`.
pub fn dump_graph(dir: &Path, subject_id: &str, graph: &BrainGraph) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if let Some(adj) = &graph.adjacency {
        write_matrix_csv(&dir.join(format!("graph_{subject_id}.csv")), &adj.values)?;
    }
    write_matrix_csv(&dir.join(format!("features_{subject_id}.csv")), &graph.features)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Stream;
    use rand::Rng;

    fn subject(t: usize, n: usize, seed: u64) -> Subject {
        let mut s = Stream::new(seed);
        let data: Vec<f64> = (0..t * n).map(|_| s.random_range(-1.0..1.0)).collect();
        Subject {
            id: "s".to_string(),
            label: 0,
            site: "x".to_string(),
            timecourses: Tensor::new(vec![t, n], data).unwrap(),
        }
    }

    #[test]
    fn static_graph_shapes() {
        let s = subject(30, 3, 1);
        let g = build_static_graph(&s, 0.5, &DiffusionConfig::none()).unwrap();
        assert_eq!(g.features.shape(), &[3, 3]);
        assert_eq!(g.adjacency.as_ref().unwrap().values.shape(), &[3, 3]);
        for i in 0..3 {
            assert_eq!(g.features.at2(i, i), 0.0);
        }
        assert_eq!(g.kind, GraphKind::Static);
    }

    #[test]
    fn identical_subjects_identical_graphs() {
        let s = subject(25, 4, 2);
        let a = build_static_graph(&s, 0.5, &DiffusionConfig::heat_default()).unwrap();
        let b = build_static_graph(&s, 0.5, &DiffusionConfig::heat_default()).unwrap();
        assert_eq!(a.features.values(), b.features.values());
        assert_eq!(
            a.adjacency.as_ref().unwrap().values.values(),
            b.adjacency.as_ref().unwrap().values.values()
        );
    }

    #[test]
    fn smaller_keep_fraction_fewer_edges() {
        // a shared driver makes all pairwise correlations positive, so
        // no retained edge is lost to negative-weight clamping
        let mut stream = Stream::new(3);
        let (t, n) = (40, 8);
        let mut data = vec![0.0; t * n];
        for row in 0..t {
            let common = stream.random_range(-1.0..1.0);
            for col in 0..n {
                data[row * n + col] = common + 0.3 * stream.random_range(-1.0..1.0);
            }
        }
        let tc = Tensor::new(vec![t, n], data).unwrap();
        let fc = pearson_fc(&tc).unwrap();
        let count = |f: f64| {
            proportional_threshold(&fc, f)
                .unwrap()
                .values
                .values()
                .iter()
                .filter(|&&v| v != 0.0)
                .count()
        };
        assert!(count(0.5) < count(0.95));
    }

    #[test]
    fn dynamic_graph_variants() {
        let s = subject(60, 5, 4);
        let st = build_dynamic_graph(
            &s,
            DynamicEdges::Thresholded { keep_fraction: 0.4 },
            &DiffusionConfig::none(),
        )
        .unwrap();
        assert_eq!(st.features.shape(), &[5, 60]);
        assert_eq!(st.kind, GraphKind::Dynamic);
        assert!(st.adjacency.is_some());

        let ad = build_dynamic_graph(&s, DynamicEdges::Adaptive, &DiffusionConfig::none()).unwrap();
        assert_eq!(ad.kind, GraphKind::DynamicAdaptive);
        assert!(ad.adjacency.is_none());

        // static and dynamic builders share the thresholding path
        let stat = build_static_graph(&s, 0.4, &DiffusionConfig::none()).unwrap();
        assert_eq!(
            stat.adjacency.as_ref().unwrap().values.values(),
            st.adjacency.as_ref().unwrap().values.values()
        );
    }

    #[test]
    fn precomputed_fc_path_matches_direct_build() {
        let s = subject(30, 4, 7);
        let fc = pearson_fc(&s.timecourses).unwrap();
        let direct = build_static_graph(&s, 0.5, &DiffusionConfig::heat_default()).unwrap();
        let cached = build_static_graph_from_fc(&fc, s.label, 0.5, &DiffusionConfig::heat_default()).unwrap();
        assert_eq!(direct.features.values(), cached.features.values());
        assert_eq!(
            direct.adjacency.as_ref().unwrap().values.values(),
            cached.adjacency.as_ref().unwrap().values.values()
        );

        let dyn_direct = build_dynamic_graph(
            &s,
            DynamicEdges::Thresholded { keep_fraction: 0.5 },
            &DiffusionConfig::none(),
        )
        .unwrap();
        let dyn_cached = build_dynamic_graph_from_fc(
            &s,
            Some(&fc),
            DynamicEdges::Thresholded { keep_fraction: 0.5 },
            &DiffusionConfig::none(),
        )
        .unwrap();
        assert_eq!(
            dyn_direct.adjacency.as_ref().unwrap().values.values(),
            dyn_cached.adjacency.as_ref().unwrap().values.values()
        );
    }

    #[test]
    fn dump_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = subject(20, 3, 5);
        let g = build_static_graph(&s, 0.5, &DiffusionConfig::none()).unwrap();
        dump_graph(dir.path(), "abc", &g).unwrap();
        assert!(dir.path().join("graph_abc.csv").exists());
        assert!(dir.path().join("features_abc.csv").exists());
    }
}
