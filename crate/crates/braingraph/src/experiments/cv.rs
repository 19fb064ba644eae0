//! Outer k-fold evaluation with inner train/val splits, and the full
//! protocol: model selection on a held-out slice first, then
//! cross-validation on the untouched pool, with an index-set audit.

use std::collections::BTreeSet;

use crate::datasets::split::{stratified_kfold, stratified_train_val};
use crate::datasets::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::experiments::hypergrid::HyperGrid;
use crate::experiments::inputs::{Candidate, InputFactory, Predictor, Prepared};
use crate::experiments::metrics::{compute_metrics, mean_std};
use crate::experiments::search::{grid_search, SearchOutcome};
use crate::experiments::train::fit_candidate;
use crate::models::Family;
use crate::numerics::Stream;
use crate::parallel::par_map;

/// One outer fold's confusion table and metrics. An aborted fold keeps
/// its reason and contributes nothing to the aggregates.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub bal_acc: f64,
    pub sens: f64,
    pub spec: f64,
    pub chosen: String,
    pub best_epoch: usize,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub experiment: String,
    pub family: Family,
    pub folds: Vec<FoldResult>,
    pub summary: Vec<MetricSummary>,
    pub seed: u64,
    pub dataset_hash: String,
    pub chosen: String,
}

impl ExperimentReport {
    /// Mean/std recomputed from the completed folds; must equal the
    /// stored summary.
    pub fn recompute_summary(&self) -> Vec<MetricSummary> {
        let ok: Vec<&FoldResult> = self.folds.iter().filter(|f| f.aborted.is_none()).collect();
        let series = [
            ("bal_acc", ok.iter().map(|f| f.bal_acc).collect::<Vec<_>>()),
            ("sens", ok.iter().map(|f| f.sens).collect::<Vec<_>>()),
            ("spec", ok.iter().map(|f| f.spec).collect::<Vec<_>>()),
        ];
        series
            .into_iter()
            .map(|(metric, xs)| {
                let (mean, std) = mean_std(&xs);
                MetricSummary { metric: metric.to_string(), mean, std }
            })
            .collect()
    }

    pub fn mean_of(&self, metric: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.metric == metric).map(|s| s.mean)
    }
}

/// Predicts `subset` and counts the confusion table (label 1 positive).
pub(crate) fn confusion_on(
    predictor: &Predictor,
    inputs: &[Prepared],
    labels: &[u8],
    subset: &[usize],
) -> Result<(usize, usize, usize, usize)> {
    let preds = par_map(subset, |&i| predictor.predict(&inputs[i]));
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (pred, &i) in preds.into_iter().zip(subset) {
        match (pred?.label, labels[i]) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            (0, 1) => fn_ += 1,
            (p, y) => return Err(Error::Contract(format!("non-binary labels {p}/{y}"))),
        }
    }
    Ok((tp, fp, tn, fn_))
}

fn summarize(folds: &[FoldResult]) -> Result<Vec<MetricSummary>> {
    let ok: Vec<&FoldResult> = folds.iter().filter(|f| f.aborted.is_none()).collect();
    if ok.is_empty() {
        return Err(Error::Training(format!("all {} folds aborted", folds.len())));
    }
    let series = [
        ("bal_acc", ok.iter().map(|f| f.bal_acc).collect::<Vec<_>>()),
        ("sens", ok.iter().map(|f| f.sens).collect::<Vec<_>>()),
        ("spec", ok.iter().map(|f| f.spec).collect::<Vec<_>>()),
    ];
    Ok(series
        .into_iter()
        .map(|(metric, xs)| {
            let (mean, std) = mean_std(&xs);
            MetricSummary { metric: metric.to_string(), mean, std }
        })
        .collect())
}

/// Stratified k-fold evaluation of one fixed candidate: each fold
/// trains from scratch on its inner 85/15 split and is scored once on
/// its untouched test fold. Hyperparameters are not re-selected here.
pub fn cross_validate(
    factory: &InputFactory,
    candidate: &Candidate,
    k: usize,
    seed: u64,
    experiment: &str,
) -> Result<ExperimentReport> {
    candidate.validate()?;
    let dataset = factory.dataset();
    let plan = stratified_kfold(dataset, k, seed)?;
    let prepared = factory.prepare(candidate)?;
    let labels = dataset.labels();
    let chosen = candidate.describe();
    let master = Stream::new(seed);

    let mut folds = Vec::with_capacity(k);
    for (fi, fold) in plan.folds.iter().enumerate() {
        let stream = master.derive_indexed("fold", fi as u64);
        let result = fit_candidate(candidate, &prepared, &labels, &fold.train, &fold.val, &stream)
            .and_then(|fit| {
                let (tp, fp, tn, fn_) = confusion_on(&fit.predictor, &prepared, &labels, &fold.test)?;
                let (bal_acc, sens, spec) = compute_metrics(tp, fp, tn, fn_)?;
                Ok(FoldResult {
                    fold: fi,
                    tp,
                    fp,
                    tn,
                    fn_,
                    bal_acc,
                    sens,
                    spec,
                    chosen: chosen.clone(),
                    best_epoch: fit.best_epoch,
                    aborted: None,
                })
            });
        match result {
            Ok(f) => folds.push(f),
            Err(Error::Training(msg)) | Err(Error::Config(msg)) => folds.push(FoldResult {
                fold: fi,
                tp: 0,
                fp: 0,
                tn: 0,
                fn_: 0,
                bal_acc: f64::NAN,
                sens: f64::NAN,
                spec: f64::NAN,
                chosen: chosen.clone(),
                best_epoch: 0,
                aborted: Some(msg),
            }),
            Err(e) => return Err(e),
        }
    }

    let summary = summarize(&folds)?;
    Ok(ExperimentReport {
        experiment: experiment.to_string(),
        family: candidate.spec.family,
        folds,
        summary,
        seed,
        dataset_hash: dataset.content_hash(),
        chosen,
    })
}

/// Index sets actually used by a selection-plus-evaluation run, in
/// original dataset coordinates, for the zero-tolerance audit.
#[derive(Debug, Clone)]
pub struct ProtocolAudit {
    pub dataset_len: usize,
    /// Grid-search training indices (inside the held-out slice).
    pub search_train: Vec<usize>,
    /// Grid-search validation indices (inside the held-out slice).
    pub search_val: Vec<usize>,
    /// The cross-validation pool the folds partition.
    pub pool: Vec<usize>,
    /// Per outer fold: (train, val, test).
    pub folds: Vec<(Vec<usize>, Vec<usize>, Vec<usize>)>,
    pub holdout_reused: bool,
}

impl ProtocolAudit {
    /// Exact set assertions: the held-out slice and the pool partition
    /// the dataset; folds partition the pool; no outer test index ever
    /// appears in any training or validation set, grid search included.
    pub fn verify(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Contract(format!("protocol audit: {msg}")));
        let as_set = |v: &[usize]| v.iter().copied().collect::<BTreeSet<usize>>();

        for (name, v) in [
            ("search_train", &self.search_train),
            ("search_val", &self.search_val),
            ("pool", &self.pool),
        ] {
            if as_set(v).len() != v.len() {
                return fail(format!("{name} has duplicate indices"));
            }
            if v.iter().any(|&i| i >= self.dataset_len) {
                return fail(format!("{name} has out-of-range indices"));
            }
        }

        let search_train = as_set(&self.search_train);
        let search_val = as_set(&self.search_val);
        if !search_train.is_disjoint(&search_val) {
            return fail("grid-search train and val overlap".into());
        }
        let holdout: BTreeSet<usize> = search_train.union(&search_val).copied().collect();
        let pool = as_set(&self.pool);
        if !self.holdout_reused {
            if !holdout.is_disjoint(&pool) {
                return fail("held-out selection slice leaks into the CV pool".into());
            }
            if holdout.len() + pool.len() != self.dataset_len {
                return fail(format!(
                    "holdout {} + pool {} != dataset {}",
                    holdout.len(),
                    pool.len(),
                    self.dataset_len
                ));
            }
        }

        let mut all_tests: BTreeSet<usize> = BTreeSet::new();
        for (fi, (train, val, test)) in self.folds.iter().enumerate() {
            let (tr, va, te) = (as_set(train), as_set(val), as_set(test));
            if tr.len() != train.len() || va.len() != val.len() || te.len() != test.len() {
                return fail(format!("fold {fi} has duplicate indices"));
            }
            if !tr.is_disjoint(&va) || !tr.is_disjoint(&te) || !va.is_disjoint(&te) {
                return fail(format!("fold {fi} train/val/test overlap"));
            }
            let mut union: BTreeSet<usize> = tr.union(&va).copied().collect();
            union.extend(te.iter().copied());
            if union != pool {
                return fail(format!("fold {fi} does not cover exactly the CV pool"));
            }
            // the core guarantee: this fold's test indices appear in no
            // selection or training set anywhere in the protocol
            if !te.is_disjoint(&search_train) || !te.is_disjoint(&search_val) {
                return fail(format!("fold {fi} test indices were used by grid search"));
            }
            if te.intersection(&all_tests).next().is_some() {
                return fail(format!("fold {fi} test indices repeat an earlier fold"));
            }
            all_tests.extend(te.iter().copied());
        }
        if all_tests != pool {
            return fail("outer test folds do not partition the CV pool".into());
        }
        Ok(())
    }
}

pub struct StudyOutcome {
    pub search: SearchOutcome,
    pub report: ExperimentReport,
    pub audit: ProtocolAudit,
}

/// The full protocol: remove a stratified 15% slice, run the grid
/// search entirely inside it (85/15 internally), then cross-validate
/// the winning candidate on the remaining pool. The audit carries every
/// index set in original coordinates and is verified before returning.
/// `reuse_holdout_in_cv` returns the slice to the pool for the final
/// CV, which trades protocol strictness for data.
pub fn search_then_cv(
    dataset: &TimeSeriesDataset,
    family: Family,
    grid: &HyperGrid,
    k: usize,
    seed: u64,
    reuse_holdout_in_cv: bool,
    experiment: &str,
) -> Result<StudyOutcome> {
    let labels = dataset.labels();
    let all: Vec<usize> = (0..dataset.len()).collect();
    let mut holdout_stream = Stream::new(seed).derive("holdout");
    let (pool, holdout) = stratified_train_val(&all, &labels, &mut holdout_stream)?;
    let mut search_stream = Stream::new(seed).derive("search_split");
    let (search_train, search_val) = stratified_train_val(&holdout, &labels, &mut search_stream)?;

    let factory = InputFactory::new(dataset)?;
    let search = grid_search(&factory, family, grid, &search_train, &search_val, seed)?;
    let best = search.best().candidate.clone();

    let cv_pool: Vec<usize> = if reuse_holdout_in_cv {
        let mut p = pool.clone();
        p.extend_from_slice(&holdout);
        p.sort_unstable();
        p
    } else {
        pool
    };
    let sub = dataset.select(&cv_pool)?;
    let sub_factory = InputFactory::new(&sub)?;
    let report = cross_validate(&sub_factory, &best, k, seed, experiment)?;

    let plan = stratified_kfold(&sub, k, seed)?;
    let to_original = |v: &[usize]| v.iter().map(|&i| cv_pool[i]).collect::<Vec<usize>>();
    let audit = ProtocolAudit {
        dataset_len: dataset.len(),
        search_train,
        search_val,
        pool: cv_pool.clone(),
        folds: plan
            .folds
            .iter()
            .map(|f| (to_original(&f.train), to_original(&f.val), to_original(&f.test)))
            .collect(),
        holdout_reused: reuse_holdout_in_cv,
    };
    audit.verify()?;
    Ok(StudyOutcome { search, report, audit })
}
