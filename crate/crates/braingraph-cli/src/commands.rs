//! Verb handlers. Each one validates its flags before touching the
//! filesystem, creates the output directory (recorded in `out_slot` so
//! a later failure can drop the `.failed` marker there), writes
//! `run_meta.csv` once its inputs are resolved, then emits artifacts.

use std::path::{Path, PathBuf};

use braingraph::datasets::io::{format_float, load_dataset};
use braingraph::datasets::io::write_matrix_csv;
use braingraph::datasets::split::stratified_train_val;
use braingraph::datasets::synthetic::{generate_synthetic, write_synthetic, SyntheticParams};
use braingraph::datasets::TimeSeriesDataset;
use braingraph::experiments::report::{
    read_folds_csv, summarize_fold_rows, write_folds_csv, write_scaling_csv, write_summary_csv,
    write_sweep_csv, SUMMARY_HEADER,
};
use braingraph::experiments::{
    fit_candidate, grid_search, scaling_study, search_then_cv, threshold_sweep, Candidate,
    ExperimentConfig, InputFactory, Predictor, SearchOutcome, SweepArms,
};
use braingraph::graph::{build_static_graph_from_fc, dump_graph, DiffusionConfig, Scheme};
use braingraph::models::checkpoint::save_model;
use braingraph::models::Family;
use braingraph::numerics::Stream;
use braingraph::plot::{emit_plot, Series};
use braingraph::{Error, Result};
use sha2::{Digest, Sha256};

use crate::{FcArgs, Global, ReportArgs, ScaleArgs, SweepArgs, SynthArgs};

const SEARCH_HEADER: [&str; 7] =
    ["index", "family", "hparams", "val_loss", "best_epoch", "selected", "aborted"];

pub fn synth(global: &Global, args: &SynthArgs, out_slot: &mut Option<PathBuf>) -> Result<()> {
    let out = resolve_out(global, None)?;
    let seed = global.seed.unwrap_or(7);
    prepare_out(&out, out_slot)?;

    let params = SyntheticParams {
        num_subjects: args.subjects,
        num_rois: args.rois,
        timepoints: args.timepoints,
        effect: args.effect,
        noise_std: args.noise_std,
        density: args.density,
        seed,
    };
    let synth = generate_synthetic(params)?;
    let manifest = write_synthetic(&out, &synth)?;
    write_run_meta(&out, "synth", seed, global.jobs, &synth.dataset.content_hash())?;
    println!(
        "wrote {} subjects ({} rois, {} timepoints) to {}",
        args.subjects,
        args.rois,
        args.timepoints,
        manifest.display()
    );
    Ok(())
}

pub fn fc(global: &Global, args: &FcArgs, out_slot: &mut Option<PathBuf>) -> Result<()> {
    let out = resolve_out(global, None)?;
    let seed = global.seed.unwrap_or(7);
    let diffusion = parse_diffusion(&args.diffusion)?;
    if let Some(k) = args.keep {
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::Usage(format!("--keep {k} outside (0, 1]")));
        }
    }
    prepare_out(&out, out_slot)?;

    let dataset = load_dataset(&args.data)?;
    write_run_meta(&out, "fc", seed, global.jobs, &dataset.content_hash())?;
    let factory = InputFactory::new(&dataset)?;
    for (i, subject) in dataset.subjects().iter().enumerate() {
        write_matrix_csv(&out.join(format!("fc_{}.csv", subject.id)), factory.connectivity(i))?;
    }
    if let Some(keep) = args.keep {
        for (i, subject) in dataset.subjects().iter().enumerate() {
            let graph =
                build_static_graph_from_fc(factory.connectivity(i), subject.label, keep, &diffusion)?;
            dump_graph(&out, &subject.id, &graph)?;
        }
    }
    println!("wrote {} connectivity matrices to {}", dataset.len(), out.display());
    Ok(())
}

pub fn train(global: &Global, out_slot: &mut Option<PathBuf>) -> Result<()> {
    let config = load_config(global)?;
    let out = resolve_out(global, config.out_dir.as_ref())?;
    let seed = global.seed.unwrap_or(config.seed);
    prepare_out(&out, out_slot)?;

    let dataset = load_dataset(&config.dataset)?;
    write_run_meta(&out, "train", seed, global.jobs, &dataset.content_hash())?;
    let grid = config.grid(vector_dim(&dataset))?;
    let candidates = grid.candidates(config.family)?;
    let [candidate] = candidates.as_slice() else {
        return Err(Error::Config(format!(
            "train needs every grid axis pinned to one value; the config yields {} candidates",
            candidates.len()
        )));
    };

    let labels = dataset.labels();
    let all: Vec<usize> = (0..dataset.len()).collect();
    let mut split_stream = Stream::new(seed).derive("train_split");
    let (train_idx, val_idx) = stratified_train_val(&all, &labels, &mut split_stream)?;
    let factory = InputFactory::new(&dataset)?;
    let prepared = factory.prepare(candidate)?;
    let fit =
        fit_candidate(candidate, &prepared, &labels, &train_idx, &val_idx, &Stream::new(seed).derive("train"))?;

    let mut w = csv::Writer::from_path(out.join("history.csv"))?;
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for (epoch, (train_loss, val_loss)) in fit.history.iter().enumerate() {
        w.write_record([&epoch.to_string(), &format_float(*train_loss), &format_float(*val_loss)])?;
    }
    w.flush()?;

    match &fit.predictor {
        Predictor::Gradient(model) => {
            let dir = out.join("checkpoint");
            save_model(&dir, model)?;
            println!("checkpoint written to {}", dir.display());
        }
        Predictor::Svm(_) => println!("svm models are refit from data; no checkpoint written"),
    }
    println!(
        "{}: val loss {:.4} at epoch {}",
        candidate.describe(),
        fit.val_loss,
        fit.best_epoch
    );
    Ok(())
}

pub fn search(global: &Global, out_slot: &mut Option<PathBuf>) -> Result<()> {
    let config = load_config(global)?;
    let out = resolve_out(global, config.out_dir.as_ref())?;
    let seed = global.seed.unwrap_or(config.seed);
    prepare_out(&out, out_slot)?;

    let dataset = load_dataset(&config.dataset)?;
    write_run_meta(&out, "search", seed, global.jobs, &dataset.content_hash())?;
    let grid = config.grid(vector_dim(&dataset))?;

    // Same slice the full protocol searches on: the stratified holdout,
    // split again into train/val. The pool stays untouched.
    let labels = dataset.labels();
    let all: Vec<usize> = (0..dataset.len()).collect();
    let mut holdout_stream = Stream::new(seed).derive("holdout");
    let (_pool, holdout) = stratified_train_val(&all, &labels, &mut holdout_stream)?;
    let mut search_stream = Stream::new(seed).derive("search_split");
    let (search_train, search_val) = stratified_train_val(&holdout, &labels, &mut search_stream)?;

    let factory = InputFactory::new(&dataset)?;
    let outcome = grid_search(&factory, config.family, &grid, &search_train, &search_val, seed)?;
    write_search_csv(&out.join("search_results.csv"), &outcome)?;
    let best = outcome.best();
    println!(
        "best of {}: {} (val loss {:.4})",
        outcome.points.len(),
        best.candidate.describe(),
        best.val_loss
    );
    Ok(())
}

pub fn cv(global: &Global, out_slot: &mut Option<PathBuf>) -> Result<()> {
    let config = load_config(global)?;
    let out = resolve_out(global, config.out_dir.as_ref())?;
    let seed = global.seed.unwrap_or(config.seed);
    prepare_out(&out, out_slot)?;

    let dataset = load_dataset(&config.dataset)?;
    write_run_meta(&out, "cv", seed, global.jobs, &dataset.content_hash())?;
    let grid = config.grid(vector_dim(&dataset))?;
    let outcome = search_then_cv(
        &dataset,
        config.family,
        &grid,
        config.folds,
        seed,
        config.reuse_holdout_in_cv,
        &config.name,
    )?;

    write_search_csv(&out.join("search_results.csv"), &outcome.search)?;
    write_folds_csv(&out.join("report_folds.csv"), &[&outcome.report])?;
    write_summary_csv(&out.join("report_summary.csv"), &[&outcome.report])?;
    println!("chosen: {}", outcome.report.chosen);
    for m in &outcome.report.summary {
        println!("{}: {:.3} +/- {:.3}", m.metric, m.mean, m.std);
    }
    Ok(())
}

pub fn scale(global: &Global, args: &ScaleArgs, out_slot: &mut Option<PathBuf>) -> Result<()> {
    let sizes = parse_usize_values(&args.sizes)?;
    let config = load_config(global)?;
    let families = match &args.families {
        Some(list) => parse_families(list)?,
        None => vec![config.family],
    };
    let out = resolve_out(global, config.out_dir.as_ref())?;
    let seed = global.seed.unwrap_or(config.seed);
    prepare_out(&out, out_slot)?;

    let dataset = load_dataset(&config.dataset)?;
    write_run_meta(&out, "scale", seed, global.jobs, &dataset.content_hash())?;
    let grid = config.grid(vector_dim(&dataset))?;
    let mut candidates = Vec::new();
    for &family in &families {
        let mut cands = grid.candidates(family)?;
        if cands.len() != 1 {
            return Err(Error::Config(format!(
                "scale needs a single pinned candidate per family; {} yields {}",
                family.as_str(),
                cands.len()
            )));
        }
        candidates.push((family, cands.remove(0)));
    }

    let factory = InputFactory::new(&dataset)?;
    let reports = scaling_study(&factory, &candidates, &sizes, args.test_size, seed)?;
    write_scaling_csv(&out.join("scaling.csv"), &reports)?;

    let mut series = Vec::new();
    for report in &reports {
        let ok: Vec<_> = report.points.iter().filter(|p| p.aborted.is_none()).collect();
        if ok.is_empty() {
            continue;
        }
        series.push(Series::new(
            report.family.as_str(),
            ok.iter().map(|p| p.size as f64).collect(),
            ok.iter().map(|p| p.bal_acc).collect(),
        ));
    }
    if series.is_empty() {
        println!("every point aborted; no plot written");
    } else {
        emit_plot(&out.join("scaling.svg"), &series, "training samples", "balanced accuracy")?;
    }
    for report in &reports {
        let accs: Vec<String> = report
            .points
            .iter()
            .map(|p| match &p.aborted {
                None => format!("{}:{:.3}", p.size, p.bal_acc),
                Some(_) => format!("{}:aborted", p.size),
            })
            .collect();
        println!("{}: {}", report.family.as_str(), accs.join(" "));
    }
    Ok(())
}

pub fn sweep(global: &Global, args: &SweepArgs, out_slot: &mut Option<PathBuf>) -> Result<()> {
    let family = Family::parse(&args.family).map_err(|e| Error::Usage(e.to_string()))?;
    if family != Family::Gcn {
        return Err(Error::Usage(format!("sweep is defined for gcn, got {}", family.as_str())));
    }
    let fractions = parse_f64_values(&args.fractions)?;
    for &f in &fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Usage(format!("keep fraction {f} outside (0, 1]")));
        }
    }
    let arms = SweepArms::parse(&args.diffusion).map_err(|e| Error::Usage(e.to_string()))?;
    if args.folds < 2 {
        return Err(Error::Usage(format!("--folds {} must be >= 2", args.folds)));
    }
    let config = match &global.config {
        Some(path) => Some(ExperimentConfig::load(path)?),
        None => None,
    };
    let data_path = match (&args.data, &config) {
        (Some(p), _) => p.clone(),
        (None, Some(c)) => c.dataset.clone(),
        (None, None) => return Err(Error::Usage("sweep needs --data or --config".into())),
    };
    let out = resolve_out(global, config.as_ref().and_then(|c| c.out_dir.as_ref()))?;
    let seed = global.seed.unwrap_or_else(|| config.as_ref().map_or(7, |c| c.seed));
    prepare_out(&out, out_slot)?;

    let dataset = load_dataset(&data_path)?;
    write_run_meta(&out, "sweep", seed, global.jobs, &dataset.content_hash())?;
    let base = match &config {
        Some(c) => {
            let grid = c.grid(vector_dim(&dataset))?;
            let mut cands = grid.candidates(Family::Gcn)?;
            if cands.len() != 1 {
                return Err(Error::Config(format!(
                    "sweep needs a single pinned gcn candidate; the config yields {}",
                    cands.len()
                )));
            }
            cands.remove(0)
        }
        None => Candidate::new(Family::Gcn),
    };

    let factory = InputFactory::new(&dataset)?;
    let table = threshold_sweep(&factory, &base, &fractions, arms, args.folds, seed)?;
    write_sweep_csv(&out.join("sweep.csv"), &table)?;

    let mut series = Vec::new();
    for arm in ["none", "heat"] {
        let cells: Vec<_> = table
            .rows
            .iter()
            .filter(|c| c.arm == arm && c.mean_bal_acc.is_finite())
            .collect();
        if cells.is_empty() {
            continue;
        }
        series.push(Series::with_err(
            arm,
            cells.iter().map(|c| c.keep_fraction).collect(),
            cells.iter().map(|c| c.mean_bal_acc).collect(),
            cells.iter().map(|c| c.std_bal_acc).collect(),
        ));
    }
    if series.is_empty() {
        println!("every cell aborted; no plot written");
    } else {
        emit_plot(&out.join("sweep.svg"), &series, "keep fraction", "balanced accuracy")?;
    }
    for arm in ["none", "heat"] {
        let means = table.arm_means(arm);
        if means.is_empty() {
            continue;
        }
        let finite: Vec<f64> = means.iter().map(|&(_, m)| m).filter(|m| m.is_finite()).collect();
        if finite.is_empty() {
            println!("{arm}: all {} fractions aborted", means.len());
            continue;
        }
        let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("{arm}: bal_acc {lo:.3}..{hi:.3} over {} fractions", means.len());
    }
    Ok(())
}

pub fn report(global: &Global, args: &ReportArgs, out_slot: &mut Option<PathBuf>) -> Result<()> {
    let out = resolve_out(global, None)?;
    let seed = global.seed.unwrap_or(7);
    prepare_out(&out, out_slot)?;

    let rows = read_folds_csv(&args.folds)?;
    write_run_meta(&out, "report", seed, global.jobs, &file_hash(&args.folds)?)?;
    let summary = summarize_fold_rows(&rows);
    let mut w = csv::Writer::from_path(out.join("report_summary.csv"))?;
    w.write_record(SUMMARY_HEADER)?;
    for r in &summary {
        w.write_record([r.family.as_str(), r.metric.as_str(), &format_float(r.mean), &format_float(r.std)])?;
    }
    w.flush()?;
    for r in summary.iter().filter(|r| r.metric == "bal_acc") {
        println!("{}: bal_acc {:.3} +/- {:.3}", r.family, r.mean, r.std);
    }
    Ok(())
}

fn load_config(global: &Global) -> Result<ExperimentConfig> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| Error::Usage("this verb needs --config".into()))?;
    ExperimentConfig::load(path)
}

fn resolve_out(global: &Global, config_dir: Option<&PathBuf>) -> Result<PathBuf> {
    global
        .out
        .clone()
        .or_else(|| config_dir.cloned())
        .ok_or_else(|| Error::Usage("no output directory: pass --out, set BRAINGRAPH_OUT, or set [output] dir in the config".into()))
}

fn prepare_out(out: &Path, out_slot: &mut Option<PathBuf>) -> Result<()> {
    std::fs::create_dir_all(out)?;
    *out_slot = Some(out.to_path_buf());
    Ok(())
}

fn vector_dim(dataset: &TimeSeriesDataset) -> usize {
    let n = dataset.num_rois();
    n * (n - 1) / 2
}

fn parse_diffusion(s: &str) -> Result<DiffusionConfig> {
    Ok(match s {
        "none" => DiffusionConfig::none(),
        "heat" => DiffusionConfig::heat_default(),
        "ppr" => DiffusionConfig { scheme: Scheme::Ppr { alpha: 0.15 }, ..DiffusionConfig::heat_default() },
        other => return Err(Error::Usage(format!("unknown diffusion {other:?}; use none, heat, or ppr"))),
    })
}

fn parse_families(list: &str) -> Result<Vec<Family>> {
    list.split(',')
        .map(|s| Family::parse(s.trim()).map_err(|e| Error::Usage(e.to_string())))
        .collect()
}

fn write_search_csv(path: &Path, outcome: &SearchOutcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SEARCH_HEADER)?;
    for p in &outcome.points {
        let selected = if p.index == outcome.best_index { "1" } else { "0" };
        w.write_record([
            &p.index.to_string(),
            p.candidate.spec.family.as_str(),
            &p.candidate.describe(),
            &format_float(p.val_loss),
            &p.best_epoch.to_string(),
            selected,
            p.aborted.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_run_meta(out: &Path, verb: &str, seed: u64, jobs: usize, dataset_hash: &str) -> Result<()> {
    let argv: Vec<String> = std::env::args()
        .skip(1)
        .map(|a| if a.contains(' ') { format!("{a:?}") } else { a })
        .collect();
    let mut w = csv::Writer::from_path(out.join("run_meta.csv"))?;
    w.write_record(["key", "value"])?;
    w.write_record(["verb", verb])?;
    w.write_record(["argv", &argv.join(" ")])?;
    w.write_record(["seed", &seed.to_string()])?;
    w.write_record(["jobs", &jobs.to_string()])?;
    w.write_record(["version", env!("CARGO_PKG_VERSION")])?;
    w.write_record(["dataset_hash", dataset_hash])?;
    w.flush()?;
    Ok(())
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Comma list or `start:stop:step` range; range values are cleaned of
/// accumulated float noise and the stop value is included when the
/// step lands on it (within step * 1e-9).
pub(crate) fn parse_f64_values(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').map(parse_f64).collect(),
        3 => {
            let start = parse_f64(parts[0])?;
            let stop = parse_f64(parts[1])?;
            let step = parse_f64(parts[2])?;
            if step <= 0.0 || stop < start {
                return Err(Error::Usage(format!("range {s:?} needs start <= stop and step > 0")));
            }
            let eps = step * 1e-9;
            let mut vals = Vec::new();
            for k in 0..1_000_000u32 {
                let v = start + f64::from(k) * step;
                if v > stop + eps {
                    return Ok(vals);
                }
                vals.push(if (v - stop).abs() <= eps { stop } else { tidy(v) });
            }
            Err(Error::Usage(format!("range {s:?} yields too many values")))
        }
        _ => Err(Error::Usage(format!("range must be start:stop:step, got {s:?}"))),
    }
}

pub(crate) fn parse_usize_values(s: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').map(parse_usize).collect(),
        3 => {
            let start = parse_usize(parts[0])?;
            let stop = parse_usize(parts[1])?;
            let step = parse_usize(parts[2])?;
            if step == 0 || stop < start {
                return Err(Error::Usage(format!("range {s:?} needs start <= stop and step > 0")));
            }
            Ok((start..=stop).step_by(step).collect())
        }
        _ => Err(Error::Usage(format!("range must be start:stop:step, got {s:?}"))),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 =
        s.trim().parse().map_err(|_| Error::Usage(format!("bad number {:?}", s.trim())))?;
    if !v.is_finite() {
        return Err(Error::Usage(format!("number {v} is not finite")));
    }
    Ok(v)
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Usage(format!("bad count {:?}", s.trim())))
}

fn tidy(v: f64) -> f64 {
    format!("{v:.12e}").parse().unwrap()
}
