use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nemus::config::{parse_settings, ConfigError, Mode, PipelineConfig, Settings};
use nemus::encoding::build_dataset;
use nemus::induction::extract_rule;
use nemus::kb::ParsedProgram;
use nemus::pipeline::{
    compile, load_examples, load_program, read_text, render_map, rule_source, run_induction,
    to_json_text, train_model, write_bytes, GridDocument, InductionDocument, Metadata,
    PipelineError, Stage, TrainOptions, VerdictDocument,
};
use nemus::som::{label_map, LabeledMap};
use nemus::validator::validate_hypothesis;

const USAGE: u8 = 1;
const PARSE: u8 = 2;
const INVALID: u8 = 3;
const INTERNAL: u8 = 4;

/// Self-organized induction of logic rules over a NeMuS-encoded knowledge base.
#[derive(Parser)]
#[command(name = "nemus", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a KB into the Shared NeMuS JSON document.
    #[command(alias = "dump")]
    Compile(IoArgs),
    /// Emit the feature dataset as CSV.
    Encode(IoArgs),
    /// Train a SOM; writes grid JSON and a QE-history CSV.
    TrainSom(TrainArgs),
    /// Train an associative SOM; writes grid JSON and a QE-history CSV.
    TrainAsom(TrainArgs),
    /// Induce a rule from examples on a trained grid.
    Induce(InduceArgs),
    /// Check a rule file against a KB and examples. Exit 0 iff valid.
    Validate(ValidateArgs),
    /// Render a trained grid (and optional induction results) as SVG.
    Export(ExportArgs),
    /// Run every stage and write all artifacts plus a manifest.
    Pipeline(PipelineArgs),
}

/// Options accepted by every subcommand. Flags override the config file.
#[derive(Args)]
struct Shared {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Constant syntax: `capitalized` (Jake, ?X) or `prolog` (jake, X).
    #[arg(long)]
    constants: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct IoArgs {
    #[command(flatten)]
    shared: Shared,
    /// `atoms` or `constants`.
    #[arg(long = "mode")]
    dataset: Option<String>,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    shared: Shared,
    /// Grid size as ROWSxCOLS.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    /// `atoms` or `constants`.
    #[arg(long)]
    dataset: Option<String>,
    /// Ancillary inputs for train-asom: `predicates` or `none`.
    #[arg(long)]
    ancillary: Option<String>,
    #[arg(long, default_value = "grid.json")]
    out: PathBuf,
    #[arg(long, default_value = "qe.csv")]
    qe_out: PathBuf,
}

#[derive(Args)]
struct InduceArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    examples: Option<PathBuf>,
    /// Grid JSON written by train-som or train-asom.
    #[arg(long)]
    grid: PathBuf,
    /// Directory for rule.kb, induction.json and map.svg.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    rule: PathBuf,
    #[arg(long)]
    examples: Option<PathBuf>,
    /// Verdict JSON file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    grid: PathBuf,
    /// Induction JSON whose vectors are drawn as triangles.
    #[arg(long)]
    induction: Option<PathBuf>,
    #[arg(long, default_value = "map.svg")]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    examples: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    /// `som` or `asom`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    ancillary: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Pipeline(PipelineError),
    Invalid,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn settings(shared: &Shared, extra: &[(&str, Option<String>)]) -> Result<Settings, Failure> {
    let mut s = match &shared.config {
        Some(path) => parse_settings(&read_text(Stage::Config, path)?)?,
        None => Settings::new(),
    };
    let flags = [
        ("kb", shared.kb.as_ref().map(|p| p.display().to_string())),
        ("constants", shared.constants.clone()),
        ("seed", shared.seed.map(|v| v.to_string())),
    ];
    for (k, v) in flags.iter().chain(extra) {
        if let Some(v) = v {
            s.insert(k.to_string(), v.clone());
        }
    }
    Ok(s)
}

fn path_arg(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_bytes(Stage::Export, path, text.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Pipeline(PipelineError::failed(Stage::Export, e)))?;
        }
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(stage: Stage, path: &Path) -> Result<T, Failure> {
    let text = read_text(stage, path)?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::Pipeline(PipelineError::Document {
            stage,
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    })
}

fn cmd_compile(args: &IoArgs) -> Outcome {
    let s = settings(&args.shared, &[])?;
    let cfg = PipelineConfig::from_settings_requiring(&s, &["kb"])?;
    let nemus = compile(&load_program(&cfg.kb, cfg.constants)?)?;
    let mut doc = nemus.to_json();
    doc.as_object_mut().expect("object").insert(
        "metadata".into(),
        serde_json::to_value(Metadata::new(cfg.seed, cfg.hash())).expect("metadata"),
    );
    emit(args.out.as_deref(), &to_json_text(&doc))
}

fn cmd_encode(args: &IoArgs) -> Outcome {
    let s = settings(&args.shared, &[("dataset", args.dataset.clone())])?;
    let cfg = PipelineConfig::from_settings_requiring(&s, &["kb"])?;
    let nemus = compile(&load_program(&cfg.kb, cfg.constants)?)?;
    let dataset = build_dataset(&nemus, cfg.dataset)
        .map_err(|e| PipelineError::failed(Stage::Encode, e))?;
    let meta = Metadata::new(cfg.seed, cfg.hash());
    emit(args.out.as_deref(), &dataset.to_csv(&nemus, &[meta.to_string()]))
}

fn cmd_train(args: &TrainArgs, mode: Mode) -> Outcome {
    let s = settings(
        &args.shared,
        &[
            ("mode", Some(mode.to_string())),
            ("grid", args.grid.clone()),
            ("iters", args.iters.map(|v| v.to_string())),
            ("dataset", args.dataset.clone()),
            ("ancillary", args.ancillary.clone()),
        ],
    )?;
    let cfg = PipelineConfig::from_settings_requiring(&s, &["kb"])?;
    let nemus = compile(&load_program(&cfg.kb, cfg.constants)?)?;
    let dataset = build_dataset(&nemus, cfg.dataset)
        .map_err(|e| PipelineError::failed(Stage::Encode, e))?;
    let schedule = cfg.schedule();
    let trained = train_model(
        &dataset,
        &TrainOptions {
            rows: cfg.rows,
            cols: cfg.cols,
            mode,
            schedule,
            seed: cfg.seed,
            activity_sigma: cfg.activity_sigma,
            ancillary: cfg.ancillary,
        },
    )?;
    let map = label_map(trained.model.codebook(), &dataset.rows, &dataset.labels)
        .map_err(|e| PipelineError::failed(Stage::Label, e))?;
    let doc = GridDocument {
        metadata: Metadata::new(cfg.seed, cfg.hash()),
        model: trained.model,
        schedule,
        initial_qe: trained.initial_qe,
        qe_history: trained.qe_history,
        labels: map.labels,
    };
    write_bytes(Stage::Export, &args.out, to_json_text(&doc).as_bytes())?;
    write_bytes(Stage::Export, &args.qe_out, doc.qe_csv().as_bytes())?;
    println!(
        "initial QE {:.6}, final QE {:.6}",
        doc.initial_qe,
        doc.qe_history.last().copied().unwrap_or(doc.initial_qe)
    );
    Ok(())
}

fn cmd_induce(args: &InduceArgs) -> Outcome {
    let s = settings(
        &args.shared,
        &[
            ("target", args.target.clone()),
            ("examples", path_arg(&args.examples)),
        ],
    )?;
    let cfg = PipelineConfig::from_settings(&s)?;
    let program = load_program(&cfg.kb, cfg.constants)?;
    let examples = load_examples(&cfg.examples, cfg.constants)?;
    let nemus = compile(&program)?;
    let grid: GridDocument = read_json(Stage::Induce, &args.grid)?;
    let dataset = build_dataset(&nemus, cfg.dataset)
        .map_err(|e| PipelineError::failed(Stage::Encode, e))?;
    let codebook = grid.model.codebook();
    let map = label_map(codebook, &dataset.rows, &dataset.labels)
        .map_err(|e| PipelineError::failed(Stage::Label, e))?;
    let (results, skipped) = run_induction(
        codebook,
        &map,
        &nemus,
        &dataset,
        &examples,
        &cfg.target,
        &cfg.induction,
    )?;
    let rule = extract_rule(&map, &nemus, &cfg.target, &results, cfg.induction.k_vote)
        .map_err(|e| PipelineError::failed(Stage::Extract, e))?;
    let meta = Metadata::new(cfg.seed, cfg.hash());
    let svg = render_map(codebook, &map, &nemus, &dataset, &results, &meta)?;
    fs::create_dir_all(&args.out).map_err(|source| PipelineError::Write {
        stage: Stage::Export,
        path: args.out.clone(),
        source,
    })?;
    let rule_text = rule_source(&rule, cfg.constants, &meta);
    let doc = InductionDocument {
        metadata: meta,
        target: cfg.target.clone(),
        config: cfg.induction,
        results,
        skipped,
    };
    write_bytes(Stage::Export, &args.out.join("rule.kb"), rule_text.as_bytes())?;
    write_bytes(
        Stage::Export,
        &args.out.join("induction.json"),
        to_json_text(&doc).as_bytes(),
    )?;
    write_bytes(Stage::Export, &args.out.join("map.svg"), svg.as_bytes())?;
    print!("{}", rule.to_source(cfg.constants));
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Outcome {
    let s = settings(&args.shared, &[("examples", path_arg(&args.examples))])?;
    let cfg = PipelineConfig::from_settings_requiring(&s, &["kb", "examples"])?;
    let bk = load_program(&cfg.kb, cfg.constants)?;
    let hypothesis = load_program(&args.rule, cfg.constants)?;
    let examples = load_examples(&cfg.examples, cfg.constants)?;
    let background = ParsedProgram {
        facts: bk.facts.iter().chain(&hypothesis.facts).cloned().collect(),
        rules: bk.rules,
    };
    let (pos, neg): (Vec<_>, Vec<_>) = examples.into_iter().partition(|e| e.is_positive());
    let pos: Vec<_> = pos.into_iter().map(|e| e.atom).collect();
    let neg: Vec<_> = neg.into_iter().map(|e| e.atom).collect();
    let verdict = validate_hypothesis(&background, &hypothesis.rules, &pos, &neg)
        .map_err(|e| PipelineError::failed(Stage::Validate, e))?;
    let valid = verdict.valid;
    let doc = VerdictDocument {
        metadata: Metadata::new(cfg.seed, cfg.hash()),
        verdict,
    };
    emit(args.out.as_deref(), &to_json_text(&doc))?;
    if valid {
        Ok(())
    } else {
        Err(Failure::Invalid)
    }
}

fn cmd_export(args: &ExportArgs) -> Outcome {
    let s = settings(&args.shared, &[])?;
    let cfg = PipelineConfig::from_settings_requiring(&s, &["kb"])?;
    let nemus = compile(&load_program(&cfg.kb, cfg.constants)?)?;
    let grid: GridDocument = read_json(Stage::Export, &args.grid)?;
    let dataset = build_dataset(&nemus, cfg.dataset)
        .map_err(|e| PipelineError::failed(Stage::Encode, e))?;
    let codebook = grid.model.codebook();
    let map = LabeledMap {
        labels: grid.labels.clone(),
        ..label_map(codebook, &dataset.rows, &dataset.labels)
            .map_err(|e| PipelineError::failed(Stage::Label, e))?
    };
    let results = match &args.induction {
        Some(p) => read_json::<InductionDocument>(Stage::Export, p)?.results,
        None => Vec::new(),
    };
    let svg = render_map(codebook, &map, &nemus, &dataset, &results, &grid.metadata)?;
    write_bytes(Stage::Export, &args.out, svg.as_bytes())?;
    Ok(())
}

fn cmd_pipeline(args: &PipelineArgs) -> Outcome {
    let s = settings(
        &args.shared,
        &[
            ("examples", path_arg(&args.examples)),
            ("target", args.target.clone()),
            ("grid", args.grid.clone()),
            ("iters", args.iters.map(|v| v.to_string())),
            ("mode", args.mode.clone()),
            ("ancillary", args.ancillary.clone()),
            ("out", path_arg(&args.out)),
        ],
    )?;
    let cfg = PipelineConfig::from_settings(&s)?;
    let out = nemus::pipeline::run_pipeline(&cfg)?;
    print!("{}", out.rule.to_source(cfg.constants));
    println!(
        "valid: {} ({} artifacts in {})",
        out.verdict.valid,
        out.manifest.artifacts.len(),
        cfg.out.display()
    );
    if out.verdict.valid {
        Ok(())
    } else {
        Err(Failure::Invalid)
    }
}

fn exit_code(e: &PipelineError) -> u8 {
    match e {
        PipelineError::Parse { .. } | PipelineError::Document { .. } => PARSE,
        PipelineError::Path { .. } => USAGE,
        PipelineError::Write { .. } | PipelineError::Failed { .. } => INTERNAL,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Compile(a) => cmd_compile(a),
        Command::Encode(a) => cmd_encode(a),
        Command::TrainSom(a) => cmd_train(a, Mode::Som),
        Command::TrainAsom(a) => cmd_train(a, Mode::Asom),
        Command::Induce(a) => cmd_induce(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Export(a) => cmd_export(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Invalid) => ExitCode::from(INVALID),
    }
}
