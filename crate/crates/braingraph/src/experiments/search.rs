//! Exhaustive model selection on a held-out validation split.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::experiments::hypergrid::HyperGrid;
use crate::experiments::inputs::{Candidate, InputFactory, Prepared};
use crate::experiments::train::fit_candidate;
use crate::models::Family;
use crate::numerics::Stream;

/// One evaluated grid combination. Aborted points keep their reason and
/// rank behind every completed point.
pub struct GridPoint {
    pub index: usize,
    pub candidate: Candidate,
    pub val_loss: f64,
    pub best_epoch: usize,
    pub aborted: Option<String>,
}

pub struct SearchOutcome {
    pub best_index: usize,
    pub points: Vec<GridPoint>,
}

impl SearchOutcome {
    pub fn best(&self) -> &GridPoint {
        &self.points[self.best_index]
    }
}

/// Trains every combination of `grid` for `family` on `train`, scores
/// each on `val`, and keeps the lowest validation loss at its best
/// epoch. Ties keep the first-enumerated combination. Runs that die
/// with a training or configuration error are recorded as aborted;
/// if every run aborts the search itself fails.
pub fn grid_search(
    factory: &InputFactory,
    family: Family,
    grid: &HyperGrid,
    train: &[usize],
    val: &[usize],
    seed: u64,
) -> Result<SearchOutcome> {
    let candidates = grid.candidates(family)?;
    if candidates.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let labels = factory.dataset().labels();
    let master = Stream::new(seed);

    let mut prepared_cache: BTreeMap<String, Arc<Vec<Prepared>>> = BTreeMap::new();
    let mut points = Vec::with_capacity(candidates.len());
    for (index, candidate) in candidates.into_iter().enumerate() {
        let key = candidate.input_key();
        let prepared = match prepared_cache.get(&key) {
            Some(p) => Arc::clone(p),
            None => {
                let p = Arc::new(factory.prepare(&candidate)?);
                prepared_cache.insert(key, Arc::clone(&p));
                p
            }
        };
        let stream = master.derive_indexed("grid", index as u64);
        match fit_candidate(&candidate, &prepared, &labels, train, val, &stream) {
            Ok(fit) => points.push(GridPoint {
                index,
                candidate,
                val_loss: fit.val_loss,
                best_epoch: fit.best_epoch,
                aborted: None,
            }),
            Err(Error::Training(msg)) | Err(Error::Config(msg)) => points.push(GridPoint {
                index,
                candidate,
                val_loss: f64::INFINITY,
                best_epoch: 0,
                aborted: Some(msg),
            }),
            Err(e) => return Err(e),
        }
    }

    let mut best_index = None;
    let mut best_loss = f64::INFINITY;
    for p in &points {
        if p.aborted.is_none() && p.val_loss < best_loss {
            best_loss = p.val_loss;
            best_index = Some(p.index);
        }
    }
    match best_index {
        Some(best_index) => Ok(SearchOutcome { best_index, points }),
        None => Err(Error::Search(format!("all {} grid points aborted", points.len()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{Subject, TimeSeriesDataset};
    use crate::models::Readout;
    use crate::models::RowNormalizer;
    use crate::numerics::{Stream as Rng, Tensor};
    use rand::Rng as _;

    /// Class 1 subjects carry a strong common driver on the first half
    /// of the nodes; class 0 is independent noise.
    fn toy_dataset(subjects: usize, n: usize, t: usize, seed: u64) -> TimeSeriesDataset {
        let mut stream = Rng::new(seed);
        let subs: Vec<Subject> = (0..subjects)
            .map(|i| {
                let label = (i % 2) as u8;
                let mut data = vec![0.0; t * n];
                for row in 0..t {
                    let driver = stream.random_range(-1.0..1.0);
                    for col in 0..n {
                        let noise = stream.random_range(-1.0..1.0);
                        data[row * n + col] = if label == 1 && col < n / 2 {
                            driver + 0.3 * noise
                        } else {
                            noise
                        };
                    }
                }
                Subject {
                    id: format!("s{i:03}"),
                    label,
                    site: "synth".to_string(),
                    timecourses: Tensor::new(vec![t, n], data).unwrap(),
                }
            })
            .collect();
        TimeSeriesDataset::new(subs, "toy", Some(seed)).unwrap()
    }

    fn small_grid(lr: Vec<f64>) -> HyperGrid {
        HyperGrid {
            lr,
            hidden_dim: vec![4],
            readout: vec![Readout::Mean],
            keep_fraction: vec![0.5],
            dropout: vec![0.0],
            weight_decay: vec![0.0],
            heads: vec![1],
            blocks: vec![1],
            embedding_dim: vec![4],
            normalizer: vec![RowNormalizer::Softmax],
            svm_c: vec![1.0],
            svm_gamma: vec![0.1],
        }
    }

    #[test]
    fn single_point_grid_returns_it() {
        let ds = toy_dataset(12, 6, 60, 1);
        let factory = InputFactory::new(&ds).unwrap();
        let train: Vec<usize> = (0..8).collect();
        let val: Vec<usize> = (8..12).collect();
        let out =
            grid_search(&factory, Family::Mlp, &small_grid(vec![1e-2]), &train, &val, 7).unwrap();
        assert_eq!(out.points.len(), 1);
        assert_eq!(out.best_index, 0);
        assert_eq!(out.best().candidate.lr, 1e-2);
    }

    #[test]
    fn divergent_rate_never_selected() {
        let ds = toy_dataset(12, 6, 60, 2);
        let factory = InputFactory::new(&ds).unwrap();
        let train: Vec<usize> = (0..8).collect();
        let val: Vec<usize> = (8..12).collect();
        // the overflowing rate is enumerated first; it must abort and
        // rank behind the completed run
        let out =
            grid_search(&factory, Family::Mlp, &small_grid(vec![1e300, 1e-2]), &train, &val, 7)
                .unwrap();
        assert_eq!(out.points.len(), 2);
        assert!(out.points[0].aborted.is_some(), "saturating rate should abort");
        assert_eq!(out.points[0].val_loss, f64::INFINITY);
        assert_eq!(out.best().candidate.lr, 1e-2);
        assert!(out.best().aborted.is_none());
    }

    #[test]
    fn same_seed_same_selection() {
        let ds = toy_dataset(12, 6, 60, 3);
        let factory = InputFactory::new(&ds).unwrap();
        let train: Vec<usize> = (0..8).collect();
        let val: Vec<usize> = (8..12).collect();
        let grid = small_grid(vec![1e-2, 1e-3]);
        let a = grid_search(&factory, Family::Gcn, &grid, &train, &val, 11).unwrap();
        let b = grid_search(&factory, Family::Gcn, &grid, &train, &val, 11).unwrap();
        assert_eq!(a.best_index, b.best_index);
        let la: Vec<f64> = a.points.iter().map(|p| p.val_loss).collect();
        let lb: Vec<f64> = b.points.iter().map(|p| p.val_loss).collect();
        assert_eq!(la, lb);
    }

    #[test]
    fn all_aborted_is_a_search_error() {
        let ds = toy_dataset(12, 6, 60, 4);
        let factory = InputFactory::new(&ds).unwrap();
        let train: Vec<usize> = (0..8).collect();
        let val: Vec<usize> = (8..12).collect();
        let err =
            grid_search(&factory, Family::Mlp, &small_grid(vec![1e300, 1e305]), &train, &val, 7);
        assert!(matches!(err, Err(Error::Search(_))));
    }
}
