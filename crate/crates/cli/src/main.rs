//! `formatkit` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 generation backend
//! failure (a partial report is still written), 4 non-finite training state.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use formatkit::checkers::{CheckerRegistry, ExternalValidator, StructuralXdlValidator, ToyTextEnv};
use formatkit::data_io::{self, DataError};
use formatkit::generator::{Backend, HttpGenerator, MockBackend, SharedBackend};
use formatkit::model::TaskInstance;
use formatkit::pipeline::{check_responses, run_generation};
use formatkit::refine::RefineOptions;
use formatkit::reff::{self, KlController, PolicyPair, QuerySource, ReffError, ToyFormatEnv, ToyPolicy, TrainConfig};

const EXIT_INPUT: u8 = 2;
const EXIT_BACKEND: u8 = 3;
const EXIT_NONFINITE: u8 = 4;

#[derive(Parser)]
#[command(name = "formatkit", version, about = "Check, evaluate and repair formatted model outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check stored responses against a dataset.
    Check(CheckArgs),
    /// Generate one response per instance and score it.
    Eval(GenArgs),
    /// Generate, then repair format errors with checker feedback.
    Refine(RefineArgs),
    /// Train the toy policy with checker rewards and a KL penalty.
    ReffDemo(ReffArgs),
}

#[derive(Args)]
struct CheckerArgs {
    /// Key-value file configuring the XDL stand-in compiler.
    #[arg(long)]
    xdl_config: Option<PathBuf>,
    /// Session/action table for the Agent stand-in environment.
    #[arg(long)]
    agent_env: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// JSON Lines of {"id": ..., "response": ...}.
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    checkers: CheckerArgs,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Completions endpoint URL; the API key is read from FORMATKIT_API_KEY.
    #[arg(long, requires = "model", conflicts_with = "mock")]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Offline backend: `echo-refs`, `const:<text>` or `script:<path>`.
    #[arg(long, required_unless_present = "endpoint")]
    mock: Option<String>,
    #[arg(long, default_value_t = 1)]
    concurrency: usize,
    /// Evaluate a seeded sample of at most this many instances.
    #[arg(long)]
    sample_cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    checkers: CheckerArgs,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, default_value_t = 5)]
    max_steps: usize,
    /// Ask for reflections before each corrected answer.
    #[arg(long)]
    thoughts: bool,
    /// Prompt budget in characters.
    #[arg(long, default_value_t = 32_000)]
    max_prompt_chars: usize,
}

#[derive(Args)]
struct ReffArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = reff::DEFAULT_INIT_BETA)]
    beta_init: f64,
    #[arg(long, default_value_t = reff::DEFAULT_KL_TARGET)]
    kl_target: f64,
    #[arg(long, default_value_t = reff::DEFAULT_HORIZON)]
    horizon: f64,
    /// Learning rate used as is, replacing the scaled default.
    #[arg(long)]
    lr: Option<f64>,
    /// Keep beta at --beta-init (which may then be 0).
    #[arg(long)]
    freeze_beta: bool,
    #[arg(long, default_value = "tst")]
    query_source: QuerySource,
    /// Run supervised steps on training targets before RL.
    #[arg(long)]
    warm_start: bool,
    #[arg(long)]
    out: PathBuf,
}

/// An error paired with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_INPUT,
            error: e.into(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Eval(a) => cmd_generate(a, RefineOptions { max_steps: 1, ..RefineOptions::default() }),
        Command::Refine(a) => {
            let options = RefineOptions {
                max_steps: a.max_steps,
                with_thoughts: a.thoughts,
                max_prompt_chars: a.max_prompt_chars,
                ..RefineOptions::default()
            };
            cmd_generate(a.gen, options)
        }
        Command::ReffDemo(a) => cmd_reff_demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn registry(args: &CheckerArgs) -> Result<CheckerRegistry, Failure> {
    let agent: Arc<dyn ExternalValidator> = match &args.agent_env {
        Some(p) => Arc::new(ToyTextEnv::load(p)?),
        None => Arc::new(ToyTextEnv::default()),
    };
    let xdl: Arc<dyn ExternalValidator> = match &args.xdl_config {
        Some(p) => Arc::new(StructuralXdlValidator::load(p)?),
        None => Arc::new(StructuralXdlValidator::default()),
    };
    Ok(CheckerRegistry::new(agent, xdl))
}

fn load_dataset(path: &Path) -> Result<Vec<TaskInstance>, DataError> {
    Ok(data_io::load_jsonl(path)?.records)
}

fn cmd_check(args: CheckArgs) -> Result<(), Failure> {
    let registry = registry(&args.checkers)?;
    let dataset = load_dataset(&args.dataset)?;
    let responses = data_io::load_responses(&args.responses)?;
    let outcome = check_responses(&dataset, &responses, &registry)?;
    data_io::write_report::<()>(&outcome.report, None, &args.out)?;
    data_io::write_verdicts(&outcome.verdicts, &args.out)?;
    print_overall(&outcome.report);
    Ok(())
}

fn backend(args: &GenArgs) -> Result<Box<dyn Backend>, Failure> {
    if let Some(endpoint) = &args.endpoint {
        let model = args.model.as_deref().ok_or_else(|| anyhow!("--endpoint requires --model"))?;
        fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
        let log_path = args.out.join("requests.jsonl");
        let log = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
        let client = HttpGenerator::from_env(endpoint.clone(), model)?.with_request_log(Box::new(log));
        return Ok(Box::new(SharedBackend(Arc::new(client))));
    }
    let spec = args.mock.as_deref().unwrap_or_default();
    Ok(Box::new(if spec == "echo-refs" {
        MockBackend::EchoReferences
    } else if let Some(text) = spec.strip_prefix("const:") {
        MockBackend::Constant(text.to_string())
    } else if let Some(path) = spec.strip_prefix("script:") {
        MockBackend::Scripts(data_io::load_scripts(Path::new(path))?)
    } else {
        return Err(anyhow!("unknown --mock {spec:?}; expected echo-refs, const:<text> or script:<path>").into());
    }))
}

fn cmd_generate(args: GenArgs, options: RefineOptions) -> Result<(), Failure> {
    if options.max_steps == 0 {
        return Err(anyhow!("--max-steps must be at least 1").into());
    }
    let registry = registry(&args.checkers)?;
    let mut dataset = load_dataset(&args.dataset)?;
    if let Some(cap) = args.sample_cap {
        dataset = data_io::sample_queries(&dataset, cap, args.seed)?;
    }
    let backend = backend(&args)?;
    let outcome = run_generation(&dataset, backend.as_ref(), &registry, &BTreeMap::new(), &options, args.concurrency)?;
    data_io::write_report(&outcome.report, Some(&outcome.traces), &args.out)?;
    data_io::write_verdicts(&outcome.verdicts, &args.out)?;
    print_overall(&outcome.report);
    let failed = outcome.failed_ids();
    if !failed.is_empty() {
        return Err(Failure {
            code: EXIT_BACKEND,
            error: anyhow!(
                "generation failed for {} of {} instance(s): {}; partial report written",
                failed.len(),
                dataset.len(),
                failed.join(", ")
            ),
        });
    }
    Ok(())
}

fn print_overall(report: &formatkit::metrics::EvalReport) {
    match report.overall_ffr() {
        Some(f) => println!("overall FFR: {f:.4}"),
        None => println!("overall FFR: n/a (no instances)"),
    }
}

fn nonfinite(e: &ReffError) -> bool {
    match e {
        ReffError::NonFinite(_) | ReffError::NonFiniteGradient => true,
        ReffError::Training { source, .. } => nonfinite(source),
        _ => false,
    }
}

fn cmd_reff_demo(args: ReffArgs) -> Result<(), Failure> {
    let mut config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        ..TrainConfig::new(args.seed)
    };
    if let Some(lr) = args.lr {
        config.learning_rate = lr;
        config.lr_scale = 1.0;
    }
    let mut controller = if args.freeze_beta {
        KlController::fixed(args.beta_init)?
    } else {
        KlController::new(args.beta_init, args.kl_target, args.horizon)?
    };
    let env = ToyFormatEnv::default();
    let mut pair = PolicyPair::new(ToyPolicy::uniform(env.seq_len(), env.vocab())?);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let log = match reff::train(&env, &mut pair, &mut controller, &config, args.query_source, args.warm_start) {
        Ok(log) => log,
        Err(e) => {
            if let ReffError::Training { log, .. } = &e {
                write_train_log(log, &args.out)?;
            }
            let code = if nonfinite(&e) { EXIT_NONFINITE } else { EXIT_INPUT };
            return Err(Failure { code, error: e.into() });
        }
    };
    write_train_log(&log, &args.out)?;
    let summary = log.summary.as_ref().expect("completed runs have a summary");
    let doc = serde_json::json!({ "config": config, "controller": controller, "summary": summary });
    let path = args.out.join("reff_summary.json");
    fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("writing {}", path.display()))?;

    println!("baseline FFR (enumerated): {:.6}", summary.baseline_ffr);
    println!("final FFR (enumerated):    {:.6}", summary.final_ffr);
    println!("final KL:                  {:.4}", summary.final_kl);
    println!("final beta:                {:.6}", summary.final_beta);
    println!("sample diversity:          {:.4}", summary.diversity);
    Ok(())
}

fn write_train_log(log: &reff::TrainLog, dir: &Path) -> anyhow::Result<()> {
    let path = dir.join("train_log.jsonl");
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    log.write_records(&mut out)?;
    std::io::Write::flush(&mut out)?;
    Ok(())
}
