//! Command-line surface of the `debatetree` binary.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{Dataset, PairSample};
use crate::gateway::{render_prompt, unused_bindings, Bindings, TemplateId};
use crate::mock::MockScript;
use crate::pipeline::{
    self, write_artifacts, write_compare_manifest, write_failure, PipelineError, Providers, RunConfig, Variant,
    VariantManifest,
};
use crate::provider::EndpointConfig;
use crate::transcript::Transcript;
use crate::tree::DebateTree;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;

pub const ENV_CHAT_ENDPOINT: &str = "TOD_CHAT_ENDPOINT";
pub const ENV_CHAT_MODEL: &str = "TOD_CHAT_MODEL";
pub const ENV_API_KEY: &str = "TOD_API_KEY";
pub const ENV_EMBED_ENDPOINT: &str = "TOD_EMBED_ENDPOINT";
pub const ENV_EMBED_MODEL: &str = "TOD_EMBED_MODEL";

#[derive(Debug, Parser)]
#[command(
    name = "debatetree",
    version,
    about = "Compare two papers through a tree of persona debates"
)]
pub struct Cli {
    /// Log filter, e.g. `info` or `debatetree=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one variant on one paper pair.
    Run(RunArgs),
    /// Check a dataset file and print per-category counts.
    ValidateDataset {
        /// Tab-separated dataset file.
        path: PathBuf,
    },
    /// Print a tree document as indented text.
    InspectTree {
        /// Tree document (tree.json).
        path: PathBuf,
        /// Render only this node, e.g. `0.1`.
        #[arg(long)]
        node: Option<String>,
    },
    /// Render debate prompt templates with bindings from a YAML file.
    RenderPrompts(RenderArgs),
    /// Run all five variants on one pair and write a side-by-side manifest.
    Compare(PairArgs),
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Dataset file to take the pair from.
    #[arg(long, conflicts_with = "pair")]
    pub dataset: Option<PathBuf>,
    /// 1-based data row of --dataset.
    #[arg(long, default_value_t = 1)]
    pub row: usize,
    /// JSON or YAML file holding one pair (topic_title, paper_a, paper_b, ...).
    #[arg(long)]
    pub pair: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// TOML config file. Precedence: flags > config file > environment > defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replay a YAML mock script instead of calling providers.
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// Segments retrieved per query (delta) [default: 5]
    #[arg(long)]
    pub delta: Option<usize>,
    /// Claims per persona and subtopics per node (k) [default: 3]
    #[arg(long)]
    pub k: Option<usize>,
    /// Maximum tree depth (l) [default: 3]
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Sentences per retrieval segment [default: 3]
    #[arg(long)]
    pub segment_sentences: Option<usize>,
    /// Sibling debates run in parallel [default: 1]
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Nucleus mass for every task [default: 0.99]
    #[arg(long)]
    pub nucleus_mass: Option<f64>,
    /// Max tokens per reply for every task [default: 1024]
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Label recorded in the run config; not used for sampling [default: none]
    #[arg(long)]
    pub seed_label: Option<String>,
    /// Chat-completions base URL [env: TOD_CHAT_ENDPOINT]
    #[arg(long)]
    pub chat_endpoint: Option<String>,
    /// Chat model name [env: TOD_CHAT_MODEL]
    #[arg(long)]
    pub chat_model: Option<String>,
    /// Embeddings base URL [env: TOD_EMBED_ENDPOINT]
    #[arg(long)]
    pub embed_endpoint: Option<String>,
    /// Embedding model name [env: TOD_EMBED_MODEL]
    #[arg(long)]
    pub embed_model: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Pipeline variant.
    #[arg(long, value_enum, default_value_t = Variant::Tod)]
    pub variant: Variant,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// One of the eight debate template ids.
    #[arg(long, required_unless_present = "all", conflicts_with = "all")]
    pub template: Option<String>,
    /// Render all eight debate templates.
    #[arg(long)]
    pub all: bool,
    /// YAML file mapping template id to its bindings, or a flat bindings map
    /// when rendering one template.
    #[arg(long)]
    pub bindings: PathBuf,
    /// Write `<template>.txt` files here instead of printing.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// A failure with the exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Provider(_) => EXIT_PROVIDER,
            PipelineError::Config(_) | PipelineError::Input(_) => EXIT_CONFIG,
            _ => EXIT_FAILED,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Env = dyn Fn(&str) -> Option<String>;

fn env_endpoint(env: &Env, url_var: &str, model_var: &str) -> Option<EndpointConfig> {
    let url = env(url_var)?;
    Some(EndpointConfig {
        url,
        model: env(model_var).unwrap_or_default(),
        api_key: None,
        timeout_secs: 120,
    })
}

fn merge_toml(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_toml(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn endpoint_override(slot: &mut Option<EndpointConfig>, url: &Option<String>, model: &Option<String>) {
    if url.is_none() && model.is_none() {
        return;
    }
    let e = slot.get_or_insert_with(|| EndpointConfig {
        url: String::new(),
        model: String::new(),
        api_key: None,
        timeout_secs: 120,
    });
    if let Some(u) = url {
        e.url = u.clone();
    }
    if let Some(m) = model {
        e.model = m.clone();
    }
}

/// Layers defaults, environment, config file, then flags.
pub fn resolve_config(args: &PairArgs, variant: Variant, env: &Env) -> Result<RunConfig, CliError> {
    let mut config = RunConfig {
        variant,
        chat: env_endpoint(env, ENV_CHAT_ENDPOINT, ENV_CHAT_MODEL),
        embeddings: env_endpoint(env, ENV_EMBED_ENDPOINT, ENV_EMBED_MODEL),
        ..RunConfig::default()
    };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let file: toml::Value =
            toml::from_str(&text).map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        let mut base = toml::Value::try_from(&config).map_err(|e| CliError::config(e.to_string()))?;
        merge_toml(&mut base, file);
        config = base
            .try_into()
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
    }
    config.variant = variant;
    if let Some(v) = args.delta {
        config.delta = v;
    }
    if let Some(v) = args.k {
        config.k = v;
    }
    if let Some(v) = args.max_depth {
        config.max_depth = v;
    }
    if let Some(v) = args.segment_sentences {
        config.segment_sentences = v;
    }
    if let Some(v) = args.concurrency {
        config.concurrency = v;
    }
    if let Some(v) = &args.seed_label {
        config.seed_label = Some(v.clone());
    }
    config.sampling.set_all(args.nucleus_mass, args.max_tokens);
    endpoint_override(&mut config.chat, &args.chat_endpoint, &args.chat_model);
    endpoint_override(&mut config.embeddings, &args.embed_endpoint, &args.embed_model);
    if let Some(key) = env(ENV_API_KEY) {
        for e in [config.chat.as_mut(), config.embeddings.as_mut()].into_iter().flatten() {
            e.api_key.get_or_insert(key.clone());
        }
    }
    config.validate().map_err(CliError::from)?;
    Ok(config)
}

/// The selected pair and its id (`row-<n>` or the pair file's stem).
pub fn load_pair(args: &PairArgs) -> Result<(String, PairSample), CliError> {
    match (&args.dataset, &args.pair) {
        (Some(path), None) => {
            let dataset = Dataset::load(path).map_err(|e| CliError::config(e.to_string()))?;
            let sample = dataset.row(args.row).map_err(|e| CliError::config(e.to_string()))?;
            Ok((format!("row-{}", args.row), sample.clone()))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read pair {}: {e}", path.display())))?;
            let pair: PairSample = serde_yaml::from_str(&text)
                .map_err(|e| CliError::config(format!("invalid pair file {}: {e}", path.display())))?;
            pair.validate().map_err(|e| CliError::config(e.to_string()))?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "pair".into());
            Ok((id, pair))
        }
        _ => Err(CliError::config("give exactly one of --dataset or --pair")),
    }
}

fn load_mock(args: &PairArgs) -> Result<Option<MockScript>, CliError> {
    args.mock
        .as_ref()
        .map(|p| MockScript::load(p).map_err(CliError::config))
        .transpose()
}

/// A written run and its summary.
type Finished = (VariantManifest, Option<String>);
/// The error and, when the failure was written out, its manifest.
type Aborted = (CliError, Option<Box<VariantManifest>>);

/// Runs one variant and writes its artifacts; failures still write the
/// transcript and a failed manifest.
fn execute(
    out: &Path,
    pair_id: &str,
    pair: &PairSample,
    config: &RunConfig,
    mock: Option<&MockScript>,
) -> Result<Finished, Aborted> {
    let providers = match mock {
        Some(script) => Providers::mock(config, script).0,
        None => Providers::http(config).map_err(|e| (CliError::from(e), None))?,
    };
    let transcript = Transcript::new();
    match pipeline::run(pair, config, &providers, &transcript) {
        Ok(artifacts) => {
            let m = write_artifacts(out, pair_id, &artifacts)
                .map_err(|e| (CliError::config(format!("cannot write artifacts: {e}")), None))?;
            Ok((m, Some(artifacts.summary)))
        }
        Err(e) => {
            let message = e.to_string();
            let m = write_failure(out, pair_id, config, &message, &transcript.entries())
                .ok()
                .map(Box::new);
            Err((CliError::from(e), m))
        }
    }
}

fn cmd_run(args: &RunArgs, env: &Env) -> Result<i32, CliError> {
    let config = resolve_config(&args.pair, args.variant, env)?;
    let (pair_id, pair) = load_pair(&args.pair)?;
    let mock = load_mock(&args.pair)?;
    match execute(&args.pair.out, &pair_id, &pair, &config, mock.as_ref()) {
        Ok((m, _)) => {
            let dir = args.pair.out.join(&pair_id).join(config.variant.as_str());
            for f in [
                m.files.summary.as_deref(),
                m.files.tree.as_deref(),
                Some(m.files.transcript.as_str()),
                Some("manifest.json"),
            ]
            .into_iter()
            .flatten()
            {
                println!("{}", dir.join(f).display());
            }
            Ok(EXIT_OK)
        }
        Err((e, _)) => Err(e),
    }
}

fn cmd_compare(args: &PairArgs, env: &Env) -> Result<i32, CliError> {
    let base = resolve_config(args, Variant::Tod, env)?;
    let (pair_id, pair) = load_pair(args)?;
    let mock = load_mock(args)?;
    let mut runs = Vec::new();
    for variant in Variant::ALL {
        let config = base.with_variant(variant);
        match execute(&args.out, &pair_id, &pair, &config, mock.as_ref()) {
            Ok(run) => runs.push(run),
            Err((e, Some(m))) => {
                eprintln!("{variant}: {e}");
                runs.push((*m, None));
            }
            Err((e, None)) => return Err(e),
        }
    }
    let manifest = write_compare_manifest(&args.out, &pair_id, &runs)
        .map_err(|e| CliError::config(format!("cannot write manifest: {e}")))?;
    for entry in &manifest.variants {
        println!("{}\t{:?}", entry.variant, entry.status);
    }
    println!("{}", args.out.join(&pair_id).join("manifest.json").display());
    Ok(if manifest.any_failed() { EXIT_FAILED } else { EXIT_OK })
}

fn cmd_validate(path: &Path) -> Result<i32, CliError> {
    let report = Dataset::validate_file(path).map_err(|e| CliError::config(e.to_string()))?;
    print!("{report}");
    Ok(if report.is_valid() { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_inspect(path: &Path, node: Option<&str>) -> Result<i32, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let tree = DebateTree::from_json(&text).map_err(|e| CliError::config(e.to_string()))?;
    let rendered = tree.render(node).map_err(|e| CliError::config(e.to_string()))?;
    print!("{rendered}");
    Ok(EXIT_OK)
}

fn string_map(value: &serde_yaml::Value) -> Option<Bindings> {
    let map = value.as_mapping()?;
    let mut out = BTreeMap::new();
    for (k, v) in map {
        let key = k.as_str()?.to_string();
        let val = match v {
            serde_yaml::Value::String(s) => s.clone(),
            serde_yaml::Value::Number(n) => n.to_string(),
            serde_yaml::Value::Bool(b) => b.to_string(),
            serde_yaml::Value::Null => String::new(),
            _ => return None,
        };
        out.insert(key, val);
    }
    Some(out)
}

/// Bindings for `template` from a per-template or flat YAML map.
pub fn bindings_for(doc: &serde_yaml::Value, template: TemplateId, allow_flat: bool) -> Result<Bindings, CliError> {
    if let Some(section) = doc.get(template.as_str()) {
        return string_map(section)
            .ok_or_else(|| CliError::config(format!("bindings for `{template}` must map names to strings")));
    }
    if allow_flat {
        if let Some(flat) = string_map(doc) {
            return Ok(flat);
        }
    }
    Err(CliError::config(format!(
        "bindings file has no section for `{template}`"
    )))
}

fn cmd_render(args: &RenderArgs) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&args.bindings)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", args.bindings.display())))?;
    let doc: serde_yaml::Value = serde_yaml::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid bindings {}: {e}", args.bindings.display())))?;
    let templates: Vec<TemplateId> = match &args.template {
        Some(id) => vec![TemplateId::parse_debate(id).map_err(|e| CliError::config(e.to_string()))?],
        None => TemplateId::DEBATE.to_vec(),
    };
    let single = templates.len() == 1;
    let mut rendered = Vec::new();
    for t in templates {
        let b = bindings_for(&doc, t, single)?;
        for extra in unused_bindings(t, &b) {
            eprintln!("warning: `{t}` does not use binding `{extra}`");
        }
        rendered.push((t, render_prompt(t, &b).map_err(|e| CliError::config(e.to_string()))?));
    }
    match &args.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
            for (t, text) in &rendered {
                let path = dir.join(format!("{t}.txt"));
                std::fs::write(&path, text)
                    .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
                println!("{}", path.display());
            }
        }
        None if single => print!("{}", rendered[0].1),
        None => {
            for (t, text) in &rendered {
                println!("===== {t} =====");
                print!("{text}");
                if !text.ends_with('\n') {
                    println!();
                }
            }
        }
    }
    Ok(EXIT_OK)
}

/// Dispatches a parsed command; returns the process exit status.
pub fn run_cli(cli: &Cli, env: &Env) -> i32 {
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args, env),
        Command::ValidateDataset { path } => cmd_validate(path),
        Command::InspectTree { path, node } => cmd_inspect(path, node.as_deref()),
        Command::RenderPrompts(args) => cmd_render(args),
        Command::Compare(args) => cmd_compare(args, env),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn main() -> i32 {
    let cli = Cli::parse();
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(&cli.log));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
    run_cli(&cli, &|k| std::env::var(k).ok())
}
