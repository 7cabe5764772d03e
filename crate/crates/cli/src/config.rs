//! Config file, environment and output headers.
//!
//! Values are resolved as flag, then config file, then environment. The LLM
//! bearer token is read only from `EVALKIT_LLM_API_KEY`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use evalkit_core::annotation::AnnotatorMode;
use evalkit_core::connectors::{
    CrsEndpoint, GatewayOptions, HttpGateway, LlmGateway, PatternGateway, ENV_LLM_API_KEY,
    ENV_LLM_ENDPOINT, ENV_LLM_MODEL,
};
use evalkit_core::dialogue::{parse_corpus_str, Corpus, IntentSchema};
use evalkit_core::simulation::GoalConfig;
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{config_error, validation_error, Classify, CmdResult};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub schema: Option<PathBuf>,
    pub llm: LlmSection,
    pub annotate: AnnotateSection,
    pub simulate: SimulateSection,
    /// Named HTTP CRS endpoints, selectable with `--crs <crs_id>`.
    pub crs: Vec<CrsEndpoint>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub timeout_ms: Option<u64>,
    pub max_retries: Option<u32>,
    pub streaming: Option<bool>,
    /// Offline pattern table used instead of an endpoint.
    pub script: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateSection {
    pub mode: Option<AnnotatorMode>,
    pub overwrite: Option<bool>,
    pub catalog: Option<PathBuf>,
    pub context_window: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub simulator: Option<String>,
    pub n: Option<usize>,
    pub jobs: Option<usize>,
    pub max_utterances: Option<usize>,
    pub max_consecutive_nonprogress: Option<usize>,
    pub timeout_ms: Option<u64>,
    pub catalog: Option<PathBuf>,
    pub interaction_model: Option<PathBuf>,
    pub goal: Option<GoalConfig>,
}

impl FileConfig {
    /// Reads a TOML config. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: Option<&Path>) -> CmdResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).config(format!("reading config {}", path.display()))?;
        let mut config: FileConfig =
            toml::from_str(&text).config(format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut config.schema,
            &mut config.llm.script,
            &mut config.annotate.catalog,
            &mut config.simulate.catalog,
            &mut config.simulate.interaction_model,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

/// Process environment snapshot, injectable for tests.
#[derive(Debug, Clone, Default)]
pub struct Env {
    vars: BTreeMap<String, String>,
}

impl Env {
    pub fn from_process() -> Self {
        let vars = [ENV_LLM_ENDPOINT, ENV_LLM_MODEL, ENV_LLM_API_KEY]
            .into_iter()
            .filter_map(|k| {
                std::env::var(k)
                    .ok()
                    .filter(|v| !v.is_empty())
                    .map(|v| (k.to_string(), v))
            })
            .collect();
        Self { vars }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.vars.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LlmFlags {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub script: Option<PathBuf>,
}

/// A gateway plus the settings that describe it in the config hash.
pub struct ResolvedLlm {
    pub gateway: Arc<dyn LlmGateway>,
    pub description: Value,
}

pub fn resolve_llm(
    flags: &LlmFlags,
    file: &LlmSection,
    env: &Env,
) -> CmdResult<Option<ResolvedLlm>> {
    if let Some(script) = flags.script.as_ref().or(file.script.as_ref()) {
        let text = read_text(script)?;
        let gateway = PatternGateway::from_table(&text)
            .config(format!("reading LLM script {}", script.display()))?;
        return Ok(Some(ResolvedLlm {
            gateway: Arc::new(gateway),
            description: json!({ "script_sha256": sha256_hex(text.as_bytes()) }),
        }));
    }
    let endpoint = flags
        .endpoint
        .clone()
        .or_else(|| file.endpoint.clone())
        .or_else(|| env.get(ENV_LLM_ENDPOINT).map(String::from));
    let Some(endpoint) = endpoint else {
        return Ok(None);
    };
    let model = flags
        .model
        .clone()
        .or_else(|| file.model.clone())
        .or_else(|| env.get(ENV_LLM_MODEL).map(String::from))
        .ok_or_else(|| {
            config_error(format!(
                "LLM endpoint is set but no model; use --llm-model or {ENV_LLM_MODEL}"
            ))
        })?;
    let mut options = GatewayOptions::new(endpoint, model);
    if let Some(t) = file.temperature {
        options.temperature = t;
    }
    if let Some(ms) = file.timeout_ms {
        options.timeout = Duration::from_millis(ms);
    }
    if let Some(r) = file.max_retries {
        options.max_retries = r;
    }
    if let Some(s) = file.streaming {
        options.streaming = s;
    }
    options.api_key = env.get(ENV_LLM_API_KEY).map(String::from);
    let description = json!({
        "endpoint": options.endpoint,
        "model": options.model,
        "temperature": options.temperature,
        "max_retries": options.max_retries,
        "timeout_ms": options.timeout.as_millis() as u64,
    });
    let gateway = HttpGateway::new(options).config("LLM gateway")?;
    Ok(Some(ResolvedLlm {
        gateway: Arc::new(gateway),
        description,
    }))
}

pub fn missing_llm_error() -> crate::error::Failure {
    config_error(format!(
        "no LLM configured; set --llm-endpoint, [llm] endpoint in the config, {ENV_LLM_ENDPOINT}, or --llm-script"
    ))
}

pub fn load_schema(flag: Option<&Path>, file: &FileConfig) -> CmdResult<(IntentSchema, Value)> {
    match flag.or(file.schema.as_deref()) {
        None => Ok((IntentSchema::default(), json!("default"))),
        Some(path) => {
            let text = read_text(path)?;
            let schema = IntentSchema::from_json(&text)
                .config(format!("parsing schema {}", path.display()))?;
            Ok((schema, json!(sha256_hex(text.as_bytes()))))
        }
    }
}

pub fn read_text(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).config(format!("reading {}", path.display()))
}

/// Parses and concatenates corpora. The first file's header is kept.
pub fn read_corpora(paths: &[PathBuf], schema: &IntentSchema) -> CmdResult<(Corpus, Vec<String>)> {
    if paths.is_empty() {
        return Err(config_error("at least one --input is required"));
    }
    let mut merged: Option<Corpus> = None;
    let mut digests = Vec::new();
    for path in paths {
        let text = read_text(path)?;
        digests.push(sha256_hex(text.as_bytes()));
        let corpus = parse_corpus_str(&text, schema).validation(path.display())?;
        match merged.as_mut() {
            None => merged = Some(corpus),
            Some(m) => {
                for d in corpus.dialogues {
                    if m.dialogues.iter().any(|x| x.dialogue_id == d.dialogue_id) {
                        return Err(validation_error(format!(
                            "{}: dialogue_id `{}` already appears in an earlier input",
                            path.display(),
                            d.dialogue_id
                        )));
                    }
                    m.dialogues.push(d);
                }
            }
        }
    }
    Ok((merged.expect("at least one input"), digests))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Hash of the resolved settings. Paths and secrets are left out so the
/// same run reproduces the same header anywhere.
pub fn config_hash(resolved: &Value) -> String {
    sha256_hex(&serde_json::to_vec(resolved).expect("config serializes"))
}

pub fn report_header(command: &str, seed: u64, resolved: &Value, inputs: &[String]) -> Value {
    json!({
        "kind": "header",
        "command": command,
        "seed": seed,
        "config_hash": config_hash(resolved),
        "config": resolved,
        "inputs": inputs,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

/// Writes to `path`, or stdout when absent.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match path {
        Some(p) => fs::write(p, bytes).config(format!("writing {}", p.display())),
        None => std::io::stdout()
            .write_all(bytes)
            .config("writing to stdout"),
    }
}

pub fn jsonl(lines: &[Value]) -> Vec<u8> {
    let mut out = Vec::new();
    for line in lines {
        serde_json::to_writer(&mut out, line).expect("json serializes");
        out.push(b'\n');
    }
    out
}
