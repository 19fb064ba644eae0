//! From timecourses to model-ready graphs: Pearson connectivity,
//! proportional thresholding, diffusion, normalization, assembly.

pub mod adjacency;
pub mod build;
pub mod diffusion;
pub mod fc;
pub mod oracle;

pub use adjacency::{normalize_adjacency, proportional_threshold, Adjacency, RankBy};
pub use build::{
    adjacency_from_fc, build_dynamic_graph, build_dynamic_graph_from_fc, build_static_graph,
    build_static_graph_from_fc, build_static_graph_with_adjacency, dump_graph, BrainGraph,
    DynamicEdges, GraphKind,
};
pub use diffusion::{gdc_transform, DiffusionConfig, Scheme, Transition};
pub use fc::pearson_fc;
pub use oracle::{degree_matched_rewire, oracle_and_rewired, support_adjacency};
