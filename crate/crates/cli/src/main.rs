//! Command-line surface for the n-gram family-classification pipeline:
//! `synth` generates labeled corpora, `train` builds a model bundle,
//! `classify` scores files, `evaluate` reports metrics, and `explain`
//! renders the per-pair feature reports.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use walkdir::WalkDir;

use gramsift_core::bundle::ModelBundle;
use gramsift_core::corpus::load_corpus;
use gramsift_core::explain::explain;
use gramsift_core::featurizer::dump_matrix;
use gramsift_core::forest::CalibrationMethod;
use gramsift_core::metrics::{classification_report, logloss, PredictionMatrix};
use gramsift_core::pipeline::{train_model, RunConfig};
use gramsift_core::synth::{generate, SynthSpec};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gramsift",
    version,
    about = "Explainable file-family classification from mined byte n-grams"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model bundle from a labeled corpus
    Train(TrainArgs),
    /// Classify a file or directory of files with a trained bundle
    Classify(ClassifyArgs),
    /// Evaluate a bundle against a labeled corpus
    Evaluate(EvaluateArgs),
    /// Print the per-pair feature explanation report
    Explain(ExplainArgs),
    /// Generate a synthetic labeled corpus
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus root directory
    #[arg(long)]
    corpus: PathBuf,
    /// Manifest of `<relative_path>\t<family>` lines
    #[arg(long)]
    manifest: PathBuf,
    /// Output bundle directory (must not already hold a bundle)
    #[arg(long)]
    out: PathBuf,
    /// Optional key=value config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mined gram lengths, comma-separated
    #[arg(long)]
    lengths: Option<String>,
    /// Fraction of training files sampled for thresholds
    #[arg(long)]
    alpha: Option<f64>,
    /// Grams sampled per file for thresholds
    #[arg(long)]
    beta: Option<usize>,
    /// Per-length threshold factors, e.g. `4=1.05,8=1.05,16=1.15,32=1.15`
    #[arg(long)]
    factors: Option<String>,
    /// Representativeness fraction for mining
    #[arg(long)]
    gamma: Option<f64>,
    /// Soft memory cap for the mining candidate table, in bytes
    #[arg(long)]
    memory_cap: Option<usize>,
    /// Total feature budget across family pairs
    #[arg(long)]
    budget: Option<usize>,
    /// Number of forest trees
    #[arg(long)]
    trees: Option<usize>,
    /// Features kept by importance pruning
    #[arg(long)]
    feature_cap: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    features_per_split: Option<usize>,
    /// Probability calibration: `sigmoid` or `none`
    #[arg(long)]
    calibration: Option<String>,
    /// Cross-validation folds for calibration
    #[arg(long)]
    folds: Option<usize>,
    /// Write the mined-representative dump here
    #[arg(long)]
    dump_reps: Option<PathBuf>,
    /// Write the featurized training matrix here
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// A file, or a directory walked recursively
    #[arg(long)]
    input: PathBuf,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Probability clip for the log loss
    #[arg(long, default_value_t = 1e-15)]
    epsilon: f64,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Restrict the report to one family pair
    #[arg(long, num_args = 2, value_names = ["FAMILY_A", "FAMILY_B"])]
    pair: Option<Vec<String>>,
    /// Features per section
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Emit the machine-readable variant
    #[arg(long)]
    machine: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON spec file
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

struct CliError {
    code: u8,
    source: anyhow::Error,
}

impl CliError {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_USAGE, source: e.into() }
    }
    fn data(e: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_DATA, source: e.into() }
    }
    fn internal(e: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_INTERNAL, source: e.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                0
            } else {
                EXIT_USAGE
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            eprintln!("error: could not configure the thread pool");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Explain(args) => cmd_explain(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

// --- config resolution: flags override config file overrides defaults ---

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))
        .map_err(CliError::usage)?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(anyhow!(
                "config line {}: expected key=value, got {raw:?}",
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parsed<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse::<T>()
        .map_err(|_| CliError::usage(anyhow!("config key {key}: cannot parse {value:?}")))
}

fn parse_lengths(key: &str, value: &str) -> Result<Vec<usize>, CliError> {
    value
        .split(',')
        .map(|p| parsed::<usize>(key, p.trim()))
        .collect()
}

fn parse_factors(key: &str, value: &str) -> Result<BTreeMap<usize, f64>, CliError> {
    value
        .split(',')
        .map(|pair| {
            let (n, f) = pair
                .split_once('=')
                .ok_or_else(|| CliError::usage(anyhow!("config key {key}: expected N=factor")))?;
            Ok((parsed::<usize>(key, n.trim())?, parsed::<f64>(key, f.trim())?))
        })
        .collect()
}

fn resolve_run_config(args: &TrainArgs) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    // flag wins, then config file, then the built-in default
    macro_rules! pick {
        ($flag:expr, $key:literal, $parse:expr) => {
            match (&$flag, file.get($key)) {
                (Some(v), _) => Some(v.clone()),
                (None, Some(v)) => Some($parse($key, v)?),
                (None, None) => None,
            }
        };
    }
    let seed: Option<u64> = pick!(args.seed, "seed", parsed::<u64>);
    let mut cfg = RunConfig::with_seed(seed.unwrap_or(0));
    cfg.corpus_root = args.corpus.display().to_string();
    cfg.manifest = args.manifest.display().to_string();

    let lengths_flag = args
        .lengths
        .as_ref()
        .map(|v| parse_lengths("lengths", v))
        .transpose()?;
    if let Some(v) = pick!(lengths_flag, "lengths", parse_lengths) {
        cfg.stage1.lengths = v;
    }
    if let Some(v) = pick!(args.alpha, "alpha", parsed::<f64>) {
        cfg.stage1.alpha = v;
    }
    if let Some(v) = pick!(args.beta, "beta", parsed::<usize>) {
        cfg.stage1.beta = v;
    }
    let factors_flag = args
        .factors
        .as_ref()
        .map(|v| parse_factors("factors", v))
        .transpose()?;
    if let Some(v) = pick!(factors_flag, "factors", parse_factors) {
        cfg.stage1.factors = v;
    }
    if let Some(v) = pick!(args.gamma, "gamma", parsed::<f64>) {
        cfg.stage2.gamma = v;
    }
    if let Some(v) = pick!(args.memory_cap, "memory_cap", parsed::<usize>) {
        cfg.stage2.memory_cap_bytes = Some(v);
    }
    if let Some(v) = pick!(args.budget, "budget", parsed::<usize>) {
        cfg.stage3.budget_b = v;
    }
    if let Some(v) = pick!(args.trees, "trees", parsed::<usize>) {
        cfg.forest.n_trees = v;
    }
    if let Some(v) = pick!(args.feature_cap, "feature_cap", parsed::<usize>) {
        cfg.forest.feature_cap_c = v;
    }
    if let Some(v) = pick!(args.max_depth, "max_depth", parsed::<usize>) {
        cfg.forest.max_depth = Some(v);
    }
    if let Some(v) = pick!(args.min_leaf, "min_leaf", parsed::<usize>) {
        cfg.forest.min_leaf = v;
    }
    if let Some(v) = pick!(args.features_per_split, "features_per_split", parsed::<usize>) {
        cfg.forest.features_per_split = Some(v);
    }
    let calibration_flag = args.calibration.clone();
    if let Some(v) = pick!(calibration_flag, "calibration", |_k, v: &str| Ok(v.to_string())) {
        cfg.calibration.method = CalibrationMethod::parse(&v)
            .ok_or_else(|| CliError::usage(anyhow!("calibration must be `sigmoid` or `none`")))?;
    }
    if let Some(v) = pick!(args.folds, "folds", parsed::<usize>) {
        cfg.calibration.folds = v;
    }
    Ok(cfg)
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let cfg = resolve_run_config(&args)?;
    let corpus = load_corpus(&args.corpus, &args.manifest).map_err(CliError::data)?;
    let trained = train_model(&corpus, &cfg).map_err(|e| {
        eprintln!("stage \"{}\" failed", e.stage());
        CliError::data(e)
    })?;

    trained.bundle.save(&args.out).map_err(CliError::data)?;

    if let Some(path) = &args.dump_reps {
        let mut text = String::new();
        for reps in &trained.representatives {
            text.push_str(&reps.dump());
        }
        std::fs::write(path, text).map_err(CliError::internal)?;
    }
    if let Some(path) = &args.dump_matrix {
        let b = trained.selected.len();
        let text = dump_matrix(&trained.train_rows, b, corpus.k());
        std::fs::write(path, text).map_err(CliError::internal)?;
    }

    println!(
        "trained {} families, {} samples; {} selected features, {} after pruning",
        corpus.k(),
        corpus.samples().len(),
        trained.selected.len(),
        trained.bundle.features.len()
    );
    print!("{}", trained.timings.render());
    println!("bundle written to {}", args.out.display());
    Ok(())
}

fn collect_inputs(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if !input.is_dir() {
        return Err(CliError::data(anyhow!(
            "input {} is neither a file nor a directory",
            input.display()
        )));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(input).sort_by_file_name() {
        let entry = entry.map_err(CliError::data)?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let bundle = ModelBundle::load(&args.bundle).map_err(CliError::data)?;
    let files = collect_inputs(&args.input)?;

    let mut out = String::new();
    out.push_str(&format!("path\tpredicted\t{}\n", bundle.families.join("\t")));

    let results: Vec<(PathBuf, Result<(Vec<f64>, String), String>)> = files
        .par_iter()
        .map(|path| {
            let r = std::fs::read(path)
                .map(|bytes| bundle.predict(&bytes))
                .map_err(|e| e.to_string());
            (path.clone(), r)
        })
        .collect();

    let mut failures = 0usize;
    for (path, result) in results {
        match result {
            Ok((probs, family)) => {
                let cells: Vec<String> = probs.iter().map(|p| format!("{p:.8e}")).collect();
                out.push_str(&format!(
                    "{}\t{}\t{}\n",
                    path.display(),
                    family,
                    cells.join("\t")
                ));
            }
            Err(message) => {
                failures += 1;
                out.push_str(&format!("{}\tERROR\t{}\n", path.display(), message));
            }
        }
    }

    match &args.out {
        Some(path) => std::fs::write(path, out).map_err(CliError::internal)?,
        None => {
            std::io::stdout()
                .write_all(out.as_bytes())
                .map_err(CliError::internal)?;
        }
    }
    if failures > 0 {
        return Err(CliError::data(anyhow!("{failures} input file(s) failed")));
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let bundle = ModelBundle::load(&args.bundle).map_err(CliError::data)?;
    let corpus = load_corpus(&args.corpus, &args.manifest).map_err(CliError::data)?;

    let mut truth = Vec::with_capacity(corpus.samples().len());
    for s in corpus.samples() {
        let idx = bundle
            .families
            .iter()
            .position(|f| f == &s.family)
            .ok_or_else(|| {
                CliError::data(anyhow!(
                    "family {:?} of sample {} is unknown to the bundle (knows: {})",
                    s.family,
                    s.id,
                    bundle.families.join(", ")
                ))
            })?;
        truth.push(idx);
    }
    let probs: Vec<Vec<f64>> = corpus
        .samples()
        .par_iter()
        .map(|s| bundle.predict(&s.bytes).0)
        .collect();
    let pm = PredictionMatrix {
        sample_ids: corpus.samples().iter().map(|s| s.id.0.clone()).collect(),
        probs,
        truth,
        class_order: bundle.families.clone(),
    };
    let loss = logloss(&pm, args.epsilon).map_err(CliError::data)?;
    let report = classification_report(&pm).map_err(CliError::data)?;

    println!("samples          {}", pm.probs.len());
    println!("logloss          {loss:.9}");
    println!("accuracy         {:.6}", report.accuracy);
    println!("macro precision  {:.6}", report.macro_precision);
    println!("macro recall     {:.6}", report.macro_recall);
    println!("confusion matrix (rows: truth, columns: predicted)");
    let width = bundle
        .families
        .iter()
        .map(|f| f.len())
        .max()
        .unwrap_or(4)
        .max(5);
    print!("{:<width$}", "");
    for f in &bundle.families {
        print!(" {f:>width$}");
    }
    println!();
    for (i, f) in bundle.families.iter().enumerate() {
        print!("{f:<width$}");
        for j in 0..bundle.families.len() {
            print!(" {:>width$}", report.confusion[i][j]);
        }
        println!();
    }
    Ok(())
}

fn cmd_explain(args: ExplainArgs) -> Result<(), CliError> {
    let bundle = ModelBundle::load(&args.bundle).map_err(CliError::data)?;
    let pair = args.pair.as_ref().map(|p| (p[0].as_str(), p[1].as_str()));
    let report = explain(&bundle, pair, args.top).map_err(CliError::data)?;
    let text = if args.machine {
        report.render_machine(&bundle)
    } else {
        report.render_text()
    };
    print!("{text}");
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.spec)
        .with_context(|| format!("cannot read spec {}", args.spec.display()))
        .map_err(CliError::usage)?;
    let spec = SynthSpec::from_json(&text).map_err(CliError::usage)?;
    let generated = generate(&spec, &args.out).map_err(CliError::data)?;
    println!("manifest {}", generated.manifest.display());
    println!("ground truth {}", generated.ground_truth.display());
    Ok(())
}
