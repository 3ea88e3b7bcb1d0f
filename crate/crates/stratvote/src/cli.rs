//! Command-line interface. Exit codes: 0 success, 1 usage error, 2 data
//! error, 3 internal error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use stratvote_core::fit::decide_record;
use stratvote_core::{Eta, Family, Model, TmgType};

use crate::data::{self, DataError, Dataset};
use crate::eval::{self, EvalConfig, EvalError, Mode};
use crate::generate::{self, GenerateError, GeneratorConfig};
use crate::report;

pub const SEED_ENV: &str = "STRATVOTE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "stratvote",
    version,
    about = "Decision models for voting with poll information"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a generator config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate model families and write report tables.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Loo)]
        mode: ModeArg,
        /// Training epochs of the NN baseline.
        #[arg(long)]
        nn_epochs: Option<usize>,
    },
    /// Fit every voter on all of their records.
    Fit {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Predict each record's vote with a fixed or fitted model.
    Predict {
        #[arg(long)]
        data: PathBuf,
        /// Model family of an explicit descriptor.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        /// Believed electorate size, or `n` for the poll size.
        #[arg(long)]
        eta: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long = "type")]
        voter_type: Option<String>,
        /// Per-voter models written by `fit`.
        #[arg(long, conflicts_with = "model")]
        fitted: Option<PathBuf>,
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild CSV tables from the JSON reports in a directory.
    Report {
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated families, e.g. AU,LD,LDLB,CV,PRAG,TMG,NN.
    #[arg(long, value_delimiter = ',', required = true)]
    families: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Loo,
    Upper,
    Both,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } | DataError::Json(_) => CliError::Internal(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Empty | EvalError::Decide { .. } | EvalError::Network(_) => {
                CliError::Data(e.to_string())
            }
            EvalError::Pool(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<GenerateError> for CliError {
    fn from(e: GenerateError) -> Self {
        match e {
            GenerateError::Config(_) | GenerateError::InfeasiblePoll { .. } => {
                CliError::Usage(e.to_string())
            }
            GenerateError::Data(d) => d.into(),
            GenerateError::Decide(_) => CliError::Internal(e.to_string()),
        }
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn parse_families(names: &[String]) -> Result<Vec<Family>, CliError> {
    let mut out = Vec::new();
    for name in names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()) {
        let f: Family = name
            .parse()
            .map_err(|_| CliError::Usage(format!("unknown model family {name:?}")))?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no model family given".into()));
    }
    Ok(out)
}

fn needs_seed(families: &[Family]) -> bool {
    families
        .iter()
        .any(|f| matches!(f, Family::CalculusOfVoting | Family::NeuralNet))
}

fn require_seed(seed: Option<u64>, families: &[Family]) -> Result<u64, CliError> {
    match seed {
        Some(s) => Ok(s),
        None if needs_seed(families) => Err(CliError::Usage(format!(
            "--seed (or {SEED_ENV}) is required for CV and NN"
        ))),
        None => Ok(0),
    }
}

/// Any failure to read the input, unreadable files included, is a data error.
fn load(path: &Path) -> Result<Dataset, CliError> {
    data::load_dataset(path).map_err(|e| CliError::Data(e.to_string()))
}

fn internal(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("{}: {e}", path.display()))
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate { config, seed, out } => simulate(&config, seed, &out),
        Command::Evaluate {
            run,
            mode,
            nn_epochs,
        } => {
            let families = parse_families(&run.families)?;
            let seed = require_seed(run.seed, &families)?;
            let ds = load(&run.data)?;
            let mut cfg = EvalConfig {
                seed,
                jobs: run.jobs,
                ..EvalConfig::default()
            };
            if let Some(e) = nn_epochs {
                cfg.nn.epochs = e;
            }
            let modes: &[Mode] = match mode {
                ModeArg::Loo => &[Mode::Loo],
                ModeArg::Upper => &[Mode::Upper],
                ModeArg::Both => &[Mode::Loo, Mode::Upper],
            };
            let mut reports = Vec::new();
            for &f in &families {
                for &m in modes {
                    reports.push(eval::evaluate(f, &ds, m, &cfg)?);
                }
            }
            report::write_reports(&run.out, &reports)?;
            for r in &reports {
                println!(
                    "{:<6} {:<5} F_A = {}",
                    r.family.name(),
                    r.mode.name(),
                    r.overall
                        .weighted_f()
                        .map_or("n/a".to_string(), |v| format!("{v:.4}"))
                );
            }
            Ok(())
        }
        Command::Fit { run } => {
            let families = parse_families(&run.families)?;
            if families.contains(&Family::NeuralNet) {
                return Err(CliError::Usage(
                    "NN is trained by evaluate, not fitted per voter".into(),
                ));
            }
            let seed = require_seed(run.seed, &families)?;
            let ds = load(&run.data)?;
            let cfg = EvalConfig {
                seed,
                jobs: run.jobs,
                ..EvalConfig::default()
            };
            fs::create_dir_all(&run.out).map_err(internal(&run.out))?;
            for f in families {
                let fitted = eval::fit_all(f, &ds, &cfg)?;
                let path = run.out.join(format!("fitted_{}.json", f.name()));
                let mut text = serde_json::to_string_pretty(&fitted)
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                text.push('\n');
                fs::write(&path, text).map_err(internal(&path))?;
                println!(
                    "{}: {} voters -> {}",
                    f.name(),
                    fitted.len(),
                    path.display()
                );
            }
            Ok(())
        }
        Command::Predict {
            data: data_path,
            model,
            alpha,
            beta,
            r,
            eta,
            k,
            voter_type,
            fitted,
            seed,
            out,
        } => {
            let models = match (model, fitted) {
                (Some(name), None) => {
                    let m = descriptor(
                        &name,
                        alpha,
                        beta,
                        r,
                        eta.as_deref(),
                        k,
                        voter_type.as_deref(),
                    )?;
                    ModelSource::Fixed(m)
                }
                (None, Some(path)) => {
                    let text = fs::read_to_string(&path).map_err(internal(&path))?;
                    let map: BTreeMap<String, Model> = serde_json::from_str(&text)
                        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                    ModelSource::PerVoter(map)
                }
                _ => return Err(CliError::Usage("give either --model or --fitted".into())),
            };
            let families: Vec<Family> = match &models {
                ModelSource::Fixed(m) => vec![m.family()],
                ModelSource::PerVoter(map) => map.values().map(Model::family).collect(),
            };
            let seed = require_seed(seed, &families)?;
            let ds = load(&data_path)?;
            predict(&ds, &models, seed, out.as_deref())
        }
        Command::Report { reports, out } => {
            let loaded = report::read_reports(&reports)?;
            if loaded.is_empty() {
                return Err(CliError::Data(format!(
                    "no report_*.json files in {}",
                    reports.display()
                )));
            }
            report::write_reports(out.as_deref().unwrap_or(&reports), &loaded)?;
            Ok(())
        }
    }
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let seed = seed.ok_or_else(|| {
        CliError::Usage(format!("simulate needs --seed or the {SEED_ENV} variable"))
    })?;
    let text = fs::read_to_string(config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    let cfg: GeneratorConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    let generated = generate::generate_synthetic(&cfg, seed)?;
    data::save_dataset(out, &generated.dataset)?;
    let path = out.join("voters.json");
    let mut text = serde_json::to_string_pretty(&generated.voter_models)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(internal(&path))?;
    println!(
        "{} records from {} voters -> {}",
        generated.dataset.records.len(),
        generated.dataset.manifest.voters,
        out.display()
    );
    Ok(())
}

enum ModelSource {
    Fixed(Model),
    PerVoter(BTreeMap<String, Model>),
}

fn need<T>(v: Option<T>, flag: &str, family: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--model {family} needs --{flag}")))
}

fn descriptor(
    name: &str,
    alpha: Option<f64>,
    beta: Option<f64>,
    r: Option<f64>,
    eta: Option<&str>,
    k: Option<usize>,
    voter_type: Option<&str>,
) -> Result<Model, CliError> {
    let family: Family = name
        .parse()
        .map_err(|_| CliError::Usage(format!("unknown model family {name:?}")))?;
    let model = match family {
        Family::Truth => Model::Truth,
        Family::BestResponse => Model::BestResponse,
        Family::Pragmatist => Model::Pragmatist {
            k: need(k, "k", name)?,
        },
        Family::CalculusOfVoting => {
            let text = need(eta, "eta", name)?;
            let eta: Eta = text
                .parse()
                .map_err(|_| CliError::Usage(format!("--eta {text:?} is not a count or `n`")))?;
            Model::CalculusOfVoting { eta }
        }
        Family::LocalDominance => Model::LocalDominance {
            r: need(r, "r", name)?,
        },
        Family::LeaderBiasedLd => Model::LeaderBiasedLd {
            r: need(r, "r", name)?,
        },
        Family::Tmg => {
            let t = need(voter_type, "type", name)?;
            let voter_type: TmgType = t
                .parse()
                .map_err(|_| CliError::Usage(format!("--type {t:?} is not TRT, CMP or LB")))?;
            Model::Tmg { voter_type }
        }
        Family::AttainabilityUtility => Model::AttainabilityUtility {
            alpha: need(alpha, "alpha", name)?,
            beta: need(beta, "beta", name)?,
        },
        Family::NeuralNet => {
            return Err(CliError::Usage("NN predictions come from evaluate".into()));
        }
    };
    // range checks that do not depend on the dataset
    model.validate(usize::MAX).or_else(|e| match e {
        stratvote_core::DecideError::TmgNeedsThreeCandidates(_) => Ok(()),
        other => Err(CliError::Usage(other.to_string())),
    })?;
    Ok(model)
}

fn predict(
    ds: &Dataset,
    models: &ModelSource,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut decision = eval::default_decision_config();
    decision.cv.seed = seed;
    let mut rows = Vec::with_capacity(ds.records.len());
    for r in &ds.records {
        let model = match models {
            ModelSource::Fixed(m) => *m,
            ModelSource::PerVoter(map) => *map.get(&r.voter_id).ok_or_else(|| {
                CliError::Data(format!("no fitted model for voter {}", r.voter_id))
            })?,
        };
        let c = decide_record(&model, r, &decision).map_err(|e| CliError::Data(e.to_string()))?;
        rows.push([
            r.voter_id.clone(),
            r.round.to_string(),
            (c.0 + 1).to_string(),
            c.to_string(),
        ]);
    }
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p).map_err(internal(p))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let written = (|| -> Result<(), csv::Error> {
        w.write_record(["voter_id", "round", "predicted", "candidate"])?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })();
    match written {
        Err(e) if !matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe) => {
            Err(CliError::Internal(e.to_string()))
        }
        // a closed stdout (e.g. piped into `head`) just ends the output
        _ => Ok(()),
    }
}
