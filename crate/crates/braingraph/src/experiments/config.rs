//! Experiment config files: TOML with flat sections. Example:
//!
//! ```toml
//! [dataset]
//! path = "data/synth/manifest.csv"
//!
//! [experiment]
//! name = "cv_gcn"          # optional; defaults to the family name
//! family = "gcn"
//! folds = 5                # optional; default 5
//! reuse_holdout_in_cv = false  # optional; default false
//!
//! [seeds]
//! master = 7
//!
//! [output]
//! dir = "out"              # optional; --out / BRAINGRAPH_OUT otherwise
//!
//! [grid]                   # optional; each key overrides one axis
//! lr = [0.01, 0.001]
//! hidden_dim = [32]
//! readout = ["mean"]
//! keep_fraction = [0.5]
//! dropout = [0.0]
//! weight_decay = [0.0]
//! heads = [1]
//! blocks = [1]
//! embedding_dim = [8]
//! normalizer = ["softmax"]
//! svm_c = [1.0]
//! svm_gamma = [0.01]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::hypergrid::HyperGrid;
use crate::models::{Family, Readout, RowNormalizer};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: RawDataset,
    experiment: RawExperiment,
    seeds: Option<RawSeeds>,
    output: Option<RawOutput>,
    grid: Option<RawGrid>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    path: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: Option<String>,
    family: String,
    folds: Option<usize>,
    reuse_holdout_in_cv: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeeds {
    master: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lr: Option<Vec<f64>>,
    hidden_dim: Option<Vec<usize>>,
    readout: Option<Vec<String>>,
    keep_fraction: Option<Vec<f64>>,
    dropout: Option<Vec<f64>>,
    weight_decay: Option<Vec<f64>>,
    heads: Option<Vec<usize>>,
    blocks: Option<Vec<usize>>,
    embedding_dim: Option<Vec<usize>>,
    normalizer: Option<Vec<String>>,
    svm_c: Option<Vec<f64>>,
    svm_gamma: Option<Vec<f64>>,
}

/// A parsed and validated experiment description.
#[derive(Debug)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub name: String,
    pub family: Family,
    pub folds: usize,
    pub reuse_holdout_in_cv: bool,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    grid: RawGrid,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let raw: RawConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))?;
        let family = Family::parse(&raw.experiment.family)?;
        let folds = raw.experiment.folds.unwrap_or(5);
        if folds < 2 {
            return Err(Error::Config(format!("folds {folds} must be >= 2")));
        }
        Ok(ExperimentConfig {
            dataset: PathBuf::from(raw.dataset.path),
            name: raw.experiment.name.unwrap_or_else(|| family.as_str().to_string()),
            family,
            folds,
            reuse_holdout_in_cv: raw.experiment.reuse_holdout_in_cv.unwrap_or(false),
            seed: raw.seeds.and_then(|s| s.master).unwrap_or(7),
            out_dir: raw.output.and_then(|o| o.dir).map(PathBuf::from),
            grid: raw.grid.unwrap_or_default(),
        })
    }

    /// Default grid with this config's overrides applied; `input_dim`
    /// feeds the 1/P gamma entry when svm_gamma is not overridden.
    pub fn grid(&self, input_dim: usize) -> Result<HyperGrid> {
        let mut grid = HyperGrid::default_grid(input_dim);
        let g = &self.grid;
        if let Some(v) = &g.lr {
            grid.lr = v.clone();
        }
        if let Some(v) = &g.hidden_dim {
            grid.hidden_dim = v.clone();
        }
        if let Some(v) = &g.readout {
            grid.readout = v.iter().map(|s| Readout::parse(s)).collect::<Result<_>>()?;
        }
        if let Some(v) = &g.keep_fraction {
            grid.keep_fraction = v.clone();
        }
        if let Some(v) = &g.dropout {
            grid.dropout = v.clone();
        }
        if let Some(v) = &g.weight_decay {
            grid.weight_decay = v.clone();
        }
        if let Some(v) = &g.heads {
            grid.heads = v.clone();
        }
        if let Some(v) = &g.blocks {
            grid.blocks = v.clone();
        }
        if let Some(v) = &g.embedding_dim {
            grid.embedding_dim = v.clone();
        }
        if let Some(v) = &g.normalizer {
            grid.normalizer = v.iter().map(|s| RowNormalizer::parse(s)).collect::<Result<_>>()?;
        }
        if let Some(v) = &g.svm_c {
            grid.svm_c = v.clone();
        }
        if let Some(v) = &g.svm_gamma {
            grid.svm_gamma = v.clone();
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let (_dir, path) = write_config(
            "[dataset]\npath = \"d/manifest.csv\"\n\n[experiment]\nfamily = \"gcn\"\n",
        );
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.family, Family::Gcn);
        assert_eq!(cfg.name, "gcn");
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.seed, 7);
        assert!(!cfg.reuse_holdout_in_cv);
        assert!(cfg.out_dir.is_none());
        let grid = cfg.grid(100).unwrap();
        assert_eq!(grid, HyperGrid::default_grid(100));
    }

    #[test]
    fn overrides_replace_single_axes() {
        let (_dir, path) = write_config(
            "[dataset]\npath = \"d\"\n\n[experiment]\nfamily = \"gat\"\nname = \"a\"\nfolds = 3\n\n[seeds]\nmaster = 99\n\n[output]\ndir = \"out\"\n\n[grid]\nlr = [0.5]\nreadout = [\"sum\", \"mean\"]\nnormalizer = [\"sparsemax\"]\n",
        );
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.folds, 3);
        assert_eq!(cfg.out_dir.as_deref(), Some(Path::new("out")));
        let grid = cfg.grid(10).unwrap();
        assert_eq!(grid.lr, [0.5]);
        assert_eq!(grid.readout, [Readout::Sum, Readout::Mean]);
        assert_eq!(grid.normalizer, [RowNormalizer::Sparsemax]);
        // untouched axes keep defaults
        assert_eq!(grid.hidden_dim, [32, 64, 128]);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let (_dir, path) = write_config(
            "[dataset]\npath = \"d\"\n\n[experiment]\nfamily = \"gcn\"\nbogus = 1\n",
        );
        assert!(matches!(ExperimentConfig::load(&path), Err(Error::Config(_))));

        let (_dir, path) = write_config(
            "[dataset]\npath = \"d\"\n\n[experiment]\nfamily = \"resnet\"\n",
        );
        assert!(matches!(ExperimentConfig::load(&path), Err(Error::Config(_))));

        let (_dir, path) = write_config(
            "[dataset]\npath = \"d\"\n\n[experiment]\nfamily = \"gcn\"\n\n[grid]\nreadout = [\"q\"]\n",
        );
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert!(cfg.grid(10).is_err());
    }

    #[test]
    fn missing_file_is_a_config_error() {
        assert!(matches!(
            ExperimentConfig::load(Path::new("/nonexistent/exp.cfg")),
            Err(Error::Config(_))
        ));
    }
}
