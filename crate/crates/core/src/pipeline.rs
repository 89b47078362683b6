//! End-to-end run: compile, encode, train, label, induce, validate, export.
//!
//! Every artifact carries the same metadata (tool version, seed, config hash)
//! and `manifest.json` lists each artifact with its SHA-256.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asom::{init_asom_with, train_asom, AsomGrid, AsomOptions};
use crate::config::{Ancillary, Mode, PipelineConfig};
use crate::encoding::{build_dataset, instance_one_hot, Dataset};
use crate::induction::{
    extract_rule, select_training_rows, train_induction_vector, InductionConfig, InductionResult,
    Rule,
};
use crate::kb::{
    build_corpus, parse_examples_with, parse_kb_with, ConstantStyle, KbError, LabeledExample,
    ParsedProgram,
};
use crate::som::{
    init_grid, label_map, quantization_error, train, Codebook, LabeledMap, Schedule, SomGrid,
};
use crate::space::{compile_nemus, SharedNemus};
use crate::svg::{export_map_svg, InductionMark, SamplePlacement};
use crate::validator::{validate_hypothesis, Verdict};

pub const TOOL: &str = "nemus";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Compile,
    Encode,
    Train,
    Label,
    Induce,
    Extract,
    Validate,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Compile => "compile",
            Stage::Encode => "encode",
            Stage::Train => "train",
            Stage::Label => "label",
            Stage::Induce => "induce",
            Stage::Extract => "extract",
            Stage::Validate => "validate",
            Stage::Export => "export",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{stage}: cannot read `{}`: {source}", path.display())]
    Path {
        stage: Stage,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{stage}: cannot write `{}`: {source}", path.display())]
    Write {
        stage: Stage,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{stage}: `{}`: {source}", path.display())]
    Parse {
        stage: Stage,
        path: PathBuf,
        source: KbError,
    },
    #[error("{stage}: `{}`: {message}", path.display())]
    Document {
        stage: Stage,
        path: PathBuf,
        message: String,
    },
    #[error("{stage}: {message}")]
    Failed { stage: Stage, message: String },
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Path { stage, .. }
            | PipelineError::Write { stage, .. }
            | PipelineError::Parse { stage, .. }
            | PipelineError::Document { stage, .. }
            | PipelineError::Failed { stage, .. } => *stage,
        }
    }

    pub fn failed(stage: Stage, err: impl fmt::Display) -> Self {
        PipelineError::Failed {
            stage,
            message: err.to_string(),
        }
    }
}

/// Provenance attached to every artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Metadata {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Metadata {
            tool: TOOL.into(),
            version: VERSION.into(),
            seed,
            config_hash: config_hash.into(),
        }
    }
}

impl fmt::Display for Metadata {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} seed={} config={}",
            self.tool, self.version, self.seed, self.config_hash
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_text(stage: Stage, path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Path {
        stage,
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_bytes(stage: Stage, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    fs::write(path, bytes).map_err(|source| PipelineError::Write {
        stage,
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable document");
    s.push('\n');
    s
}

pub fn load_program(path: &Path, style: ConstantStyle) -> Result<ParsedProgram, PipelineError> {
    let text = read_text(Stage::Compile, path)?;
    parse_kb_with(&text, style).map_err(|source| PipelineError::Parse {
        stage: Stage::Compile,
        path: path.to_path_buf(),
        source,
    })
}

pub fn compile(program: &ParsedProgram) -> Result<SharedNemus, PipelineError> {
    compile_nemus(&build_corpus(program)).map_err(|e| PipelineError::failed(Stage::Compile, e))
}

pub fn load_examples(
    path: &Path,
    style: ConstantStyle,
) -> Result<Vec<LabeledExample>, PipelineError> {
    let text = read_text(Stage::Induce, path)?;
    parse_examples_with(&text, style).map_err(|source| PipelineError::Parse {
        stage: Stage::Induce,
        path: path.to_path_buf(),
        source,
    })
}

/// A trained codebook of either kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Som(SomGrid),
    Asom(AsomGrid),
}

impl TrainedModel {
    pub fn codebook(&self) -> &dyn Codebook {
        match self {
            TrainedModel::Som(g) => g,
            TrainedModel::Asom(g) => g,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDocument {
    pub metadata: Metadata,
    pub model: TrainedModel,
    pub schedule: Schedule,
    pub initial_qe: f64,
    pub qe_history: Vec<f64>,
    /// Per-neuron labels of the map built from the training dataset.
    pub labels: Vec<Option<usize>>,
}

impl GridDocument {
    pub fn qe_csv(&self) -> String {
        let mut s = format!("# {}\nepoch,qe\n0,{}\n", self.metadata, self.initial_qe);
        for (i, q) in self.qe_history.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, q));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub rows: usize,
    pub cols: usize,
    pub mode: Mode,
    pub schedule: Schedule,
    pub seed: u64,
    pub activity_sigma: f64,
    pub ancillary: Ancillary,
}

pub struct Trained {
    pub model: TrainedModel,
    pub initial_qe: f64,
    pub qe_history: Vec<f64>,
}

pub fn train_model(dataset: &Dataset, opts: &TrainOptions) -> Result<Trained, PipelineError> {
    let fail = |e| PipelineError::failed(Stage::Train, e);
    match opts.mode {
        Mode::Som => {
            let mut g = init_grid(opts.rows, opts.cols, dataset.dim(), opts.seed).map_err(fail)?;
            let initial_qe = quantization_error(&g, &dataset.rows).map_err(fail)?;
            let qe_history = train(&mut g, &dataset.rows, &opts.schedule, opts.seed).map_err(fail)?;
            Ok(Trained {
                model: TrainedModel::Som(g),
                initial_qe,
                qe_history,
            })
        }
        Mode::Asom => {
            let ancillary = match opts.ancillary {
                Ancillary::Predicates => vec![instance_one_hot(dataset)],
                Ancillary::None => Vec::new(),
            };
            let dims: Vec<usize> = ancillary
                .iter()
                .map(|rows| rows.first().map_or(0, Vec::len))
                .collect();
            let options = AsomOptions {
                activity_sigma: opts.activity_sigma,
                normalize: true,
            };
            let mut g = init_asom_with(opts.rows, opts.cols, dataset.dim(), &dims, opts.seed, options)
                .map_err(fail)?;
            let initial_qe = quantization_error(&g, &dataset.rows).map_err(fail)?;
            let qe_history = train_asom(&mut g, &dataset.rows, &ancillary, &opts.schedule, opts.seed)
                .map_err(fail)?;
            Ok(Trained {
                model: TrainedModel::Asom(g),
                initial_qe,
                qe_history,
            })
        }
    }
}

/// An example that produced no induction vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedExample {
    pub example: LabeledExample,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductionDocument {
    pub metadata: Metadata,
    pub target: String,
    pub config: InductionConfig,
    pub results: Vec<InductionResult>,
    pub skipped: Vec<SkippedExample>,
}

/// Induces one vector per example of `target`. Examples of other predicates
/// and examples selecting no rows are reported as skipped. The `i`-th
/// trained example uses seed `config.seed + i`.
pub fn run_induction(
    codebook: &dyn Codebook,
    map: &LabeledMap,
    nemus: &SharedNemus,
    dataset: &Dataset,
    examples: &[LabeledExample],
    target: &str,
    config: &InductionConfig,
) -> Result<(Vec<InductionResult>, Vec<SkippedExample>), PipelineError> {
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for ex in examples {
        if ex.atom.predicate != target {
            skipped.push(SkippedExample {
                example: ex.clone(),
                reason: format!("predicate is not the target `{target}`"),
            });
            continue;
        }
        let sel = select_training_rows(nemus, dataset, ex)
            .map_err(|e| PipelineError::failed(Stage::Induce, e))?;
        if sel.rows.is_empty() {
            let reason = if sel.unknown_constants.is_empty() {
                "selects no training rows".to_string()
            } else {
                format!("unknown constants: {}", sel.unknown_constants.join(", "))
            };
            skipped.push(SkippedExample {
                example: ex.clone(),
                reason,
            });
            continue;
        }
        let seed = config.seed.wrapping_add(results.len() as u64);
        let r = train_induction_vector(codebook, map, dataset, &sel, ex, config, seed)
            .map_err(|e| PipelineError::failed(Stage::Induce, e))?;
        results.push(r);
    }
    Ok((results, skipped))
}

/// BMU of every dataset row, labelled by the row's predicate.
pub fn sample_placements(
    codebook: &dyn Codebook,
    dataset: &Dataset,
) -> Result<Vec<SamplePlacement>, PipelineError> {
    dataset
        .rows
        .iter()
        .zip(&dataset.labels)
        .map(|(x, &label)| {
            codebook
                .find_bmu(x)
                .map(|neuron| SamplePlacement { neuron, label })
                .map_err(|e| PipelineError::failed(Stage::Export, e))
        })
        .collect()
}

pub fn induction_marks(results: &[InductionResult]) -> Vec<InductionMark> {
    results
        .iter()
        .enumerate()
        .map(|(i, r)| InductionMark {
            neuron: r.bmu,
            name: format!("v{i}"),
        })
        .collect()
}

pub fn predicate_names(nemus: &SharedNemus) -> Vec<String> {
    (0..nemus.predicate_count())
        .map(|p| nemus.predicate_name(p).unwrap_or("?").to_string())
        .collect()
}

pub fn render_map(
    codebook: &dyn Codebook,
    map: &LabeledMap,
    nemus: &SharedNemus,
    dataset: &Dataset,
    results: &[InductionResult],
    metadata: &Metadata,
) -> Result<String, PipelineError> {
    let samples = sample_placements(codebook, dataset)?;
    export_map_svg(
        map,
        &samples,
        &induction_marks(results),
        &predicate_names(nemus),
        &metadata.to_string(),
    )
    .map_err(|e| PipelineError::failed(Stage::Export, e))
}

pub fn rule_source(rule: &Rule, style: ConstantStyle, metadata: &Metadata) -> String {
    format!("% {metadata}\n{}", rule.to_source(style))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictDocument {
    pub metadata: Metadata,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub metadata: Metadata,
    pub artifacts: Vec<ManifestEntry>,
}

impl Manifest {
    /// Names of listed artifacts in `dir` that are missing or whose content
    /// no longer matches the recorded hash.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|e| match fs::read(dir.join(&e.name)) {
                Ok(bytes) => sha256_hex(&bytes) != e.sha256 || bytes.len() != e.bytes,
                Err(_) => true,
            })
            .map(|e| e.name.clone())
            .collect()
    }
}

pub struct PipelineOutput {
    pub manifest: Manifest,
    pub rule: Rule,
    pub verdict: Verdict,
}

pub const ARTIFACTS: [&str; 7] = [
    "nemus.json",
    "dataset.csv",
    "grid.json",
    "map.svg",
    "induction.json",
    "rule.kb",
    "verdict.json",
];

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let style = config.constants;
    let metadata = Metadata::new(config.seed, config.hash());

    let program = load_program(&config.kb, style)?;
    let examples = load_examples(&config.examples, style)?;
    let nemus = compile(&program)?;

    let dataset = build_dataset(&nemus, config.dataset)
        .map_err(|e| PipelineError::failed(Stage::Encode, e))?;

    let schedule = config.schedule();
    let trained = train_model(
        &dataset,
        &TrainOptions {
            rows: config.rows,
            cols: config.cols,
            mode: config.mode,
            schedule,
            seed: config.seed,
            activity_sigma: config.activity_sigma,
            ancillary: config.ancillary,
        },
    )?;
    let codebook = trained.model.codebook();
    let map = label_map(codebook, &dataset.rows, &dataset.labels)
        .map_err(|e| PipelineError::failed(Stage::Label, e))?;

    let (results, skipped) = run_induction(
        codebook,
        &map,
        &nemus,
        &dataset,
        &examples,
        &config.target,
        &config.induction,
    )?;
    let rule = extract_rule(
        &map,
        &nemus,
        &config.target,
        &results,
        config.induction.k_vote,
    )
    .map_err(|e| PipelineError::failed(Stage::Extract, e))?;

    let (positives, negatives): (Vec<_>, Vec<_>) = examples
        .iter()
        .filter(|e| e.atom.predicate == config.target)
        .partition(|e| e.is_positive());
    let positives: Vec<_> = positives.into_iter().map(|e| e.atom.clone()).collect();
    let negatives: Vec<_> = negatives.into_iter().map(|e| e.atom.clone()).collect();
    let verdict = validate_hypothesis(&program, &rule.clauses(), &positives, &negatives)
        .map_err(|e| PipelineError::failed(Stage::Validate, e))?;

    let mut nemus_doc = nemus.to_json();
    nemus_doc
        .as_object_mut()
        .expect("nemus document is an object")
        .insert(
            "metadata".into(),
            serde_json::to_value(&metadata).expect("metadata"),
        );
    let preamble = [metadata.to_string()];
    let grid_doc = GridDocument {
        metadata: metadata.clone(),
        schedule,
        initial_qe: trained.initial_qe,
        qe_history: trained.qe_history.clone(),
        labels: map.labels.clone(),
        model: trained.model.clone(),
    };
    let svg = render_map(codebook, &map, &nemus, &dataset, &results, &metadata)?;
    let induction_doc = InductionDocument {
        metadata: metadata.clone(),
        target: config.target.clone(),
        config: config.induction,
        results,
        skipped,
    };
    let verdict_doc = VerdictDocument {
        metadata: metadata.clone(),
        verdict: verdict.clone(),
    };

    let contents: [String; 7] = [
        to_json_text(&nemus_doc),
        dataset.to_csv(&nemus, &preamble),
        to_json_text(&grid_doc),
        svg,
        to_json_text(&induction_doc),
        rule_source(&rule, style, &metadata),
        to_json_text(&verdict_doc),
    ];

    fs::create_dir_all(&config.out).map_err(|source| PipelineError::Write {
        stage: Stage::Export,
        path: config.out.clone(),
        source,
    })?;
    let mut artifacts = Vec::new();
    for (name, body) in ARTIFACTS.iter().zip(&contents) {
        write_bytes(Stage::Export, &config.out.join(name), body.as_bytes())?;
        artifacts.push(ManifestEntry {
            name: name.to_string(),
            sha256: sha256_hex(body.as_bytes()),
            bytes: body.len(),
        });
    }
    let manifest = Manifest {
        metadata,
        artifacts,
    };
    write_bytes(
        Stage::Export,
        &config.out.join("manifest.json"),
        to_json_text(&manifest).as_bytes(),
    )?;
    log::info!(
        "wrote {} artifacts to {}",
        manifest.artifacts.len(),
        config.out.display()
    );
    Ok(PipelineOutput {
        manifest,
        rule,
        verdict,
    })
}
