//! Batch driver for the braingraph pipeline: synthesize datasets, dump
//! connectivity, and run the training / search / CV / scaling / sweep
//! studies from the command line. Every run leaves a `run_meta.csv`
//! next to its outputs so it can be replayed exactly.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use braingraph::parallel::run_with_jobs;
use braingraph::Error;
use clap::{Args, Parser, Subcommand};

const RANGE_HELP: &str = "Range flags accept either a comma list (100,200,400) or start:stop:step \
(0.05:0.50:0.05). Ranges include the stop value when the step lands on it exactly.";

#[derive(Parser)]
#[command(name = "braingraph", version, about = "Functional-connectivity GNN benchmark driver", after_help = RANGE_HELP)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Master RNG seed; defaults to the config's seed, then 7
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for all artifacts
    #[arg(long, global = true, env = "BRAINGRAPH_OUT")]
    out: Option<PathBuf>,

    /// Experiment config (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads; 0 means one per core. Results are identical for any value.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate a two-class synthetic VAR dataset with planted class coupling
    Synth(SynthArgs),
    /// Write per-subject Pearson connectivity matrices (optionally thresholded graphs)
    Fc(FcArgs),
    /// Train the single candidate pinned by the config grid on one stratified split
    Train,
    /// Grid search on the held-out model-selection slice
    Search,
    /// Grid search on the holdout, then k-fold cross-validation on the pool
    Cv,
    /// Refit fixed candidates at growing training-set sizes against one test set
    Scale(ScaleArgs),
    /// Cross-validate a frozen GCN across edge-keep fractions and diffusion arms
    Sweep(SweepArgs),
    /// Recompute the summary table from an existing per-fold CSV
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    subjects: usize,
    #[arg(long)]
    rois: usize,
    #[arg(long)]
    timepoints: usize,
    /// Extra class-1 coupling strength on the planted node pairs
    #[arg(long, default_value_t = 0.5)]
    effect: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    /// Edge density of the base coupling graph
    #[arg(long, default_value_t = 0.2)]
    density: f64,
}

#[derive(Args)]
struct FcArgs {
    /// Dataset manifest to load
    #[arg(long)]
    data: PathBuf,
    /// Also dump graphs thresholded at this keep fraction
    #[arg(long)]
    keep: Option<f64>,
    /// Diffusion applied to dumped graphs: none, heat, or ppr
    #[arg(long, default_value = "none")]
    diffusion: String,
}

#[derive(Args)]
struct ScaleArgs {
    /// Training-set sizes, comma list or range
    #[arg(long)]
    sizes: String,
    /// Held-out test subjects shared by every size
    #[arg(long, default_value_t = 200)]
    test_size: usize,
    /// Families to scale, comma list; defaults to the config's family
    #[arg(long)]
    families: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Dataset manifest; defaults to the config's dataset
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "gcn")]
    family: String,
    /// Keep fractions to sweep, comma list or range
    #[arg(long)]
    fractions: String,
    /// Arms to run: both, none, or heat
    #[arg(long, default_value = "both")]
    diffusion: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-fold CSV produced by `cv`
    #[arg(long)]
    folds: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap treats --help/--version as errors; keep their exit at 0
            // and swallow broken pipes from `braingraph --help | head`.
            let code = if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
            let _ = e.print();
            return code;
        }
    };

    let mut out_dir: Option<PathBuf> = None;
    let jobs = cli.global.jobs;
    let result = run_with_jobs(jobs, || dispatch(&cli, &mut out_dir));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            if let Some(dir) = out_dir {
                let _ = std::fs::write(dir.join(".failed"), format!("{e}\n"));
            }
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli, out_dir: &mut Option<PathBuf>) -> braingraph::Result<()> {
    match &cli.verb {
        Verb::Synth(args) => commands::synth(&cli.global, args, out_dir),
        Verb::Fc(args) => commands::fc(&cli.global, args, out_dir),
        Verb::Train => commands::train(&cli.global, out_dir),
        Verb::Search => commands::search(&cli.global, out_dir),
        Verb::Cv => commands::cv(&cli.global, out_dir),
        Verb::Scale(args) => commands::scale(&cli.global, args, out_dir),
        Verb::Sweep(args) => commands::sweep(&cli.global, args, out_dir),
        Verb::Report(args) => commands::report(&cli.global, args, out_dir),
    }
}
