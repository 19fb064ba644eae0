//! Stratified splitting: outer K folds with inner train/validation
//! splits, and nested training subsets for the scaling study.

use rand::seq::SliceRandom;

use crate::datasets::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::numerics::Stream;

pub const INNER_VAL_FRACTION: f64 = 0.15;

/// One outer fold: disjoint test / train / val index sets.
#[derive(Debug, Clone)]
pub struct Fold {
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    /// Checks the partition/disjointness contract; used by the
    /// protocol audit as well as tests.
    pub fn verify(&self, dataset_len: usize) -> Result<()> {
        let mut seen_test = vec![false; dataset_len];
        for (fi, fold) in self.folds.iter().enumerate() {
            let mut in_test = vec![false; dataset_len];
            for &i in &fold.test {
                if seen_test[i] {
                    return Err(Error::Contract(format!("index {i} in two test folds")));
                }
                seen_test[i] = true;
                in_test[i] = true;
            }
            let mut in_train_val = vec![false; dataset_len];
            for &i in fold.train.iter().chain(&fold.val) {
                if in_test[i] {
                    return Err(Error::Contract(format!(
                        "fold {fi}: index {i} is both test and train/val"
                    )));
                }
                if in_train_val[i] {
                    return Err(Error::Contract(format!(
                        "fold {fi}: index {i} in both train and val"
                    )));
                }
                in_train_val[i] = true;
            }
            if fold.test.len() + fold.train.len() + fold.val.len() != dataset_len {
                return Err(Error::Contract(format!("fold {fi}: sets do not cover dataset")));
            }
        }
        if seen_test.iter().any(|&s| !s) {
            return Err(Error::Contract("test folds do not cover dataset".into()));
        }
        Ok(())
    }
}

fn indices_by_class(labels: &[u8]) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    by_class
}

/// Stratified K-fold with a stratified 85/15 train/validation split of
/// each fold's non-test portion. Deterministic in (dataset order, seed).
pub fn stratified_kfold(dataset: &TimeSeriesDataset, k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k = {k}, need at least 2 folds")));
    }
    let labels = dataset.labels();
    let mut by_class = indices_by_class(&labels);
    for (c, idx) in by_class.iter().enumerate() {
        if idx.len() < k {
            return Err(Error::Config(format!(
                "class {c} has {} subjects, fewer than k = {k}",
                idx.len()
            )));
        }
    }
    let master = Stream::new(seed);
    for (c, idx) in by_class.iter_mut().enumerate() {
        let mut s = master.derive_indexed("kfold_shuffle", c as u64);
        idx.shuffle(&mut s);
    }

    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    for idx in &by_class {
        for (pos, &i) in idx.iter().enumerate() {
            tests[pos % k].push(i);
        }
    }

    let mut folds = Vec::with_capacity(k);
    for (fi, test) in tests.iter().enumerate() {
        let in_test: std::collections::BTreeSet<usize> = test.iter().copied().collect();
        let rest: Vec<usize> = (0..dataset.len()).filter(|i| !in_test.contains(i)).collect();
        let mut inner_stream = master.derive_indexed("inner_split", fi as u64);
        let (train, val) = stratified_train_val(&rest, &labels, &mut inner_stream)?;
        folds.push(Fold { test: test.clone(), train, val });
    }
    let plan = SplitPlan { folds };
    plan.verify(dataset.len())?;
    Ok(plan)
}

/// Splits `indices` into stratified (train, val) with the 85/15 ratio.
/// Each class keeps at least one subject on both sides.
pub fn stratified_train_val(
    indices: &[usize],
    labels: &[u8],
    stream: &mut Stream,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut by_class = [Vec::new(), Vec::new()];
    for &i in indices {
        by_class[labels[i] as usize].push(i);
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (c, idx) in by_class.iter_mut().enumerate() {
        if idx.len() < 2 {
            return Err(Error::Config(format!(
                "class {c} has {} subjects, cannot split train/val",
                idx.len()
            )));
        }
        idx.shuffle(stream);
        let take = ((idx.len() as f64 * INNER_VAL_FRACTION).round() as usize)
            .clamp(1, idx.len() - 1);
        val.extend_from_slice(&idx[..take]);
        train.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Fixed stratified test set plus nested stratified training subsets
/// (each smaller subset is a prefix of every larger one).
#[derive(Debug, Clone)]
pub struct SubsamplePlan {
    pub test: Vec<usize>,
    /// (requested size, training indices), in the given size order.
    pub subsets: Vec<(usize, Vec<usize>)>,
}

pub fn subsample_train(
    dataset: &TimeSeriesDataset,
    sizes: &[usize],
    test_size: usize,
    seed: u64,
) -> Result<SubsamplePlan> {
    if sizes.is_empty() {
        return Err(Error::Config("no subset sizes given".into()));
    }
    let max_size = *sizes.iter().max().unwrap();
    if max_size + test_size > dataset.len() {
        return Err(Error::Config(format!(
            "largest subset {max_size} + test {test_size} exceeds dataset size {}",
            dataset.len()
        )));
    }
    if sizes.iter().any(|&s| s < 4) || test_size < 2 {
        return Err(Error::Config("subsets need >= 4 subjects and test >= 2".into()));
    }
    let labels = dataset.labels();
    let mut by_class = indices_by_class(&labels);
    let n = dataset.len();
    let master = Stream::new(seed);
    for (c, idx) in by_class.iter_mut().enumerate() {
        let mut s = master.derive_indexed("subsample_shuffle", c as u64);
        idx.shuffle(&mut s);
    }

    // proportional test allocation, remainder to the larger class
    let n0 = by_class[0].len();
    let mut test_c0 = ((test_size as f64 * n0 as f64 / n as f64).round() as usize)
        .clamp(1, test_size - 1);
    if test_c0 > n0 {
        test_c0 = n0;
    }
    let test_c = [test_c0, test_size - test_c0];
    let mut test = Vec::with_capacity(test_size);
    for (idx, &t) in by_class.iter().zip(&test_c) {
        if t > idx.len() {
            return Err(Error::Config("test allocation exceeds class size".into()));
        }
        test.extend_from_slice(&idx[..t]);
    }
    test.sort_unstable();

    // remaining pool, interleaved so that every prefix stays stratified
    let pools: Vec<&[usize]> = by_class
        .iter()
        .zip(&test_c)
        .map(|(idx, &t)| &idx[t..])
        .collect();
    let order = proportional_merge(&pools);

    let subsets = sizes
        .iter()
        .map(|&s| (s, {
            let mut prefix = order[..s].to_vec();
            prefix.sort_unstable();
            prefix
        }))
        .collect();
    Ok(SubsamplePlan { test, subsets })
}

/// Merges per-class index lists into one order whose every prefix
/// matches the global class proportions as closely as possible
/// (largest-remainder scheduling; ties favor class 0).
fn proportional_merge(pools: &[&[usize]]) -> Vec<usize> {
    let total: usize = pools.iter().map(|p| p.len()).sum();
    let mut taken = vec![0usize; pools.len()];
    let mut credit = vec![0.0f64; pools.len()];
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        for (c, pool) in pools.iter().enumerate() {
            if taken[c] < pool.len() {
                credit[c] += pool.len() as f64 / total as f64;
            }
        }
        let pick = (0..pools.len())
            .filter(|&c| taken[c] < pools[c].len())
            .max_by(|&a, &b| credit[a].partial_cmp(&credit[b]).unwrap())
            .expect("non-empty remainder");
        out.push(pools[pick][taken[pick]]);
        taken[pick] += 1;
        credit[pick] -= 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::Subject;
    use crate::numerics::Tensor;

    fn toy_dataset(n0: usize, n1: usize) -> TimeSeriesDataset {
        let mut subjects = Vec::new();
        for i in 0..n0 + n1 {
            let label = u8::from(i >= n0);
            subjects.push(Subject {
                id: format!("s{i}"),
                label,
                site: "x".to_string(),
                timecourses: Tensor::new(
                    vec![4, 2],
                    vec![i as f64, 1.0, 2.0, 3.0 + i as f64, 4.0, 5.0, 6.0, 7.0],
                )
                .unwrap(),
            });
        }
        TimeSeriesDataset::new(subjects, "toy", None).unwrap()
    }

    fn class_counts(indices: &[usize], labels: &[u8]) -> (usize, usize) {
        let ones = indices.iter().filter(|&&i| labels[i] == 1).count();
        (indices.len() - ones, ones)
    }

    #[test]
    fn balanced_hundred_gives_ten_ten_folds() {
        let ds = toy_dataset(50, 50);
        let plan = stratified_kfold(&ds, 5, 3).unwrap();
        let labels = ds.labels();
        for fold in &plan.folds {
            assert_eq!(class_counts(&fold.test, &labels), (10, 10));
        }
    }

    #[test]
    fn uneven_ninety_seven_stays_within_one() {
        let ds = toy_dataset(49, 48);
        let plan = stratified_kfold(&ds, 5, 11).unwrap();
        let labels = ds.labels();
        for fold in &plan.folds {
            let (c0, c1) = class_counts(&fold.test, &labels);
            assert!((c0 as f64 - 9.8).abs() < 1.0, "class0 count {c0}");
            assert!((c1 as f64 - 9.6).abs() < 1.0, "class1 count {c1}");
        }
        plan.verify(ds.len()).unwrap();
    }

    #[test]
    fn same_seed_same_plan() {
        let ds = toy_dataset(20, 20);
        let a = stratified_kfold(&ds, 4, 9).unwrap();
        let b = stratified_kfold(&ds, 4, 9).unwrap();
        for (fa, fb) in a.folds.iter().zip(&b.folds) {
            assert_eq!(fa.test, fb.test);
            assert_eq!(fa.train, fb.train);
            assert_eq!(fa.val, fb.val);
        }
        let c = stratified_kfold(&ds, 4, 10).unwrap();
        assert!(a.folds.iter().zip(&c.folds).any(|(fa, fc)| fa.test != fc.test));
    }

    #[test]
    fn class_smaller_than_k_rejected() {
        let ds = toy_dataset(3, 20);
        assert!(matches!(stratified_kfold(&ds, 5, 0), Err(Error::Config(_))));
    }

    #[test]
    fn inner_split_is_roughly_85_15() {
        let ds = toy_dataset(50, 50);
        let plan = stratified_kfold(&ds, 5, 3).unwrap();
        for fold in &plan.folds {
            let total = fold.train.len() + fold.val.len();
            assert_eq!(total, 80);
            assert_eq!(fold.val.len(), 12); // 15% of 40 per class = 6 each
        }
    }

    #[test]
    fn subsets_nest_and_avoid_test() {
        let ds = toy_dataset(150, 150);
        let plan = subsample_train(&ds, &[100, 200], 50, 7).unwrap();
        assert_eq!(plan.test.len(), 50);
        let small: std::collections::BTreeSet<_> = plan.subsets[0].1.iter().collect();
        let large: std::collections::BTreeSet<_> = plan.subsets[1].1.iter().collect();
        assert!(small.is_subset(&large));
        let test: std::collections::BTreeSet<_> = plan.test.iter().collect();
        assert!(small.is_disjoint(&test));
        assert!(large.is_disjoint(&test));
        // balanced data: every subset stays balanced
        let labels = ds.labels();
        let (c0, c1) = class_counts(&plan.subsets[0].1, &labels);
        assert_eq!((c0, c1), (50, 50));
    }

    #[test]
    fn subsample_budget_enforced() {
        let ds = toy_dataset(30, 30);
        assert!(matches!(
            subsample_train(&ds, &[50], 20, 0),
            Err(Error::Config(_))
        ));
    }
}
