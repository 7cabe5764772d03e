use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use evalkit_core::annotation::AnnotatorConfig;
use evalkit_core::connectors::{CrsConnector, CrsEndpoint, HttpCrs, StubBehavior, StubCrs};
use evalkit_core::dialogue::serialize_corpus;
use evalkit_core::simulation::{
    generate_corpus, AbusSimulator, Catalog, GenerationPlan, InteractionModel, LlmUserSimulator,
    RunLimits, SimulationError, UserSimulator,
};
use evalkit_core::Corpus;
use serde_json::{json, Value};

use crate::config::{
    config_hash, load_schema, missing_llm_error, read_text, resolve_llm, sha256_hex, write_output,
    Env, FileConfig, LlmFlags,
};
use crate::error::{config_error, Classify, CmdResult, Failure};
use crate::Common;

pub struct SimulateArgs {
    pub simulator: Option<String>,
    pub crs: Vec<String>,
    pub n: Option<usize>,
    pub jobs: Option<usize>,
    pub max_utterances: Option<usize>,
    pub catalog: Option<PathBuf>,
    pub interaction_model: Option<PathBuf>,
    pub llm: LlmFlags,
}

/// A CRS built from a `--crs` value, with the settings that go into the config hash.
pub struct CrsChoice {
    pub connector: Box<dyn CrsConnector>,
    pub description: Value,
}

fn stub(name: Option<&str>, spec: &str) -> CmdResult<CrsChoice> {
    let (kind, arg) = match spec.split_once('=') {
        Some((k, a)) => (k, Some(a)),
        None => (spec, None),
    };
    let behavior = match (kind, arg) {
        ("echo", None) => StubBehavior::Echo,
        ("goodbye", None) => StubBehavior::Goodbye,
        ("always-recommend", Some(item)) if !item.is_empty() => StubBehavior::AlwaysRecommend { item: item.into() },
        ("repeat", Some(text)) if !text.is_empty() => StubBehavior::Repeat { text: text.into() },
        _ => {
            return Err(config_error(format!(
                "unknown stub `stub:{spec}`; expected echo, goodbye, always-recommend=<item> or repeat=<text>"
            )))
        }
    };
    let id = name
        .map(String::from)
        .unwrap_or_else(|| format!("stub-{kind}"));
    Ok(CrsChoice {
        connector: Box::new(StubCrs::new(id.clone(), behavior)),
        description: json!({ "crs_id": id, "stub": spec }),
    })
}

fn http(endpoint: CrsEndpoint) -> CrsChoice {
    let description = serde_json::to_value(&endpoint).expect("endpoint serializes");
    CrsChoice {
        connector: Box::new(HttpCrs::new(endpoint)),
        description,
    }
}

fn id_from_url(url: &str) -> String {
    let rest = url.split_once("://").map(|(_, r)| r).unwrap_or(url);
    rest.trim_end_matches('/')
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Parses one `--crs` value.
pub fn parse_crs(spec: &str, file: &FileConfig) -> CmdResult<CrsChoice> {
    if let Some(endpoint) = file.crs.iter().find(|e| e.crs_id == spec) {
        return Ok(http(endpoint.clone()));
    }
    let is_target =
        |s: &str| s.starts_with("stub:") || s.starts_with("http://") || s.starts_with("https://");
    let (name, target) = if is_target(spec) {
        (None, spec)
    } else {
        match spec.split_once('=') {
            Some((name, target)) if !name.is_empty() && is_target(target) => (Some(name), target),
            _ => {
                return Err(config_error(format!(
                    "`{spec}` is not a stub, a URL, or a crs_id from the config"
                )))
            }
        }
    };
    match target.strip_prefix("stub:") {
        Some(rest) => stub(name, rest),
        None => {
            let id = name
                .map(String::from)
                .unwrap_or_else(|| id_from_url(target));
            Ok(http(CrsEndpoint::new(id, target)))
        }
    }
}

fn classify(err: SimulationError) -> Failure {
    match err {
        SimulationError::Gateway(_)
        | SimulationError::Connector(_)
        | SimulationError::AllRunsFailed(_) => Failure::Connector(err.into()),
        SimulationError::Nlu(_) => Failure::Validation(err.into()),
        _ => Failure::Config(err.into()),
    }
}

pub fn run(common: &Common, file: &FileConfig, env: &Env, args: &SimulateArgs) -> CmdResult {
    let sim_file = &file.simulate;
    let (schema, schema_id) = load_schema(common.schema.as_deref(), file)?;
    let seed = common.seed.or(file.seed).unwrap_or(0);
    let n = args.n.or(sim_file.n).unwrap_or(200);
    let jobs = args.jobs.or(sim_file.jobs).unwrap_or(1).max(1);
    let defaults = RunLimits::default();
    let limits = RunLimits {
        max_utterances: args
            .max_utterances
            .or(sim_file.max_utterances)
            .unwrap_or(defaults.max_utterances),
        max_consecutive_nonprogress: sim_file
            .max_consecutive_nonprogress
            .unwrap_or(defaults.max_consecutive_nonprogress),
        per_call_timeout: sim_file
            .timeout_ms
            .map(Duration::from_millis)
            .unwrap_or(defaults.per_call_timeout),
        seed,
    };
    limits.validate().map_err(classify)?;

    let (catalog, catalog_id) = match args.catalog.as_ref().or(sim_file.catalog.as_ref()) {
        Some(path) => {
            let text = read_text(path)?;
            let c =
                Catalog::from_json(&text).config(format!("reading catalog {}", path.display()))?;
            (c, json!(sha256_hex(text.as_bytes())))
        }
        None => (Catalog::bundled(), json!("bundled")),
    };
    let goal_config = sim_file.goal.clone().unwrap_or_default();

    let simulator_kind = args
        .simulator
        .clone()
        .or_else(|| sim_file.simulator.clone())
        .unwrap_or_else(|| "abus".into());
    let nlu = AnnotatorConfig::rule(schema).with_titles(catalog.titles());
    let (simulator, simulator_config): (Box<dyn UserSimulator>, Value) =
        match simulator_kind.as_str() {
            "abus" => {
                let (model, model_id) = match args
                    .interaction_model
                    .as_ref()
                    .or(sim_file.interaction_model.as_ref())
                {
                    Some(path) => {
                        let text = read_text(path)?;
                        let m = InteractionModel::from_tsv(&text).map_err(classify)?;
                        (m, json!(sha256_hex(text.as_bytes())))
                    }
                    None => (InteractionModel::bundled(), json!("bundled")),
                };
                model.check_schema(&nlu.schema).map_err(classify)?;
                let sim = AbusSimulator::new(model, catalog.clone()).with_nlu(nlu, None);
                (
                    Box::new(sim),
                    json!({ "kind": "abus", "interaction_model": model_id }),
                )
            }
            "llm-us" => {
                let llm = resolve_llm(&args.llm, &file.llm, env)?.ok_or_else(missing_llm_error)?;
                let sim = LlmUserSimulator::new(llm.gateway).with_nlu(nlu);
                (
                    Box::new(sim),
                    json!({ "kind": "llm-us", "llm": llm.description }),
                )
            }
            other => {
                return Err(config_error(format!(
                    "unknown simulator `{other}`; expected abus or llm-us"
                )))
            }
        };

    let mut crss = Vec::new();
    let mut ids = BTreeSet::new();
    for spec in &args.crs {
        let choice = parse_crs(spec, file)?;
        if !ids.insert(choice.connector.crs_id().to_string()) {
            return Err(config_error(format!(
                "CRS id `{}` given twice",
                choice.connector.crs_id()
            )));
        }
        crss.push(choice);
    }

    let resolved = json!({
        "simulator": simulator_config,
        "crs": crss.iter().map(|c| c.description.clone()).collect::<Vec<_>>(),
        "n": n,
        "max_utterances": limits.max_utterances,
        "max_consecutive_nonprogress": limits.max_consecutive_nonprogress,
        "timeout_ms": limits.per_call_timeout.as_millis() as u64,
        "catalog": catalog_id,
        "goal": goal_config,
        "schema": schema_id,
    });

    let plan = GenerationPlan {
        n,
        base_seed: seed,
        limits,
        catalog: &catalog,
        goal_config: &goal_config,
        jobs,
    };
    let mut out = Corpus::default();
    let mut failures = Vec::new();
    for crs in &crss {
        let crs_id = crs.connector.crs_id().to_string();
        let records = match generate_corpus(simulator.as_ref(), crs.connector.as_ref(), &plan) {
            Ok(corpus) => {
                out.dialogues.extend(corpus.dialogues);
                serde_json::from_value(corpus.header["failures"].clone()).unwrap_or_default()
            }
            Err(SimulationError::AllRunsFailed(records)) => records,
            Err(e) => return Err(classify(e)),
        };
        for r in records {
            eprintln!(
                "{crs_id}: run {} (seed {}) failed: {}",
                r.index, r.seed, r.reason
            );
            failures.push(
                json!({ "crs_id": crs_id, "index": r.index, "seed": r.seed, "reason": r.reason }),
            );
        }
    }
    if out.is_empty() {
        return Err(Failure::Connector(anyhow::anyhow!(
            "all {} simulated conversation(s) failed",
            failures.len()
        )));
    }
    eprintln!(
        "simulated {} dialogue(s) with {} failure(s)",
        out.len(),
        failures.len()
    );
    out.header.insert("seed".into(), json!(seed));
    out.header
        .insert("config_hash".into(), json!(config_hash(&resolved)));
    out.header.insert("config".into(), resolved);
    out.header.insert("failures".into(), Value::Array(failures));
    write_output(common.output.as_deref(), &serialize_corpus(&out))
}
