use std::path::PathBuf;

use evalkit_core::annotation::{
    annotate_corpus, bundled_examples, AnnotationError, AnnotatorConfig, AnnotatorMode,
};
use evalkit_core::dialogue::serialize_corpus;
use evalkit_core::simulation::Catalog;
use serde_json::json;

use crate::config::{
    config_hash, load_schema, missing_llm_error, read_corpora, read_text, resolve_llm, sha256_hex,
    write_output, Env, FileConfig, LlmFlags,
};
use crate::error::{Classify, CmdResult, Failure};
use crate::{Common, Mode};

pub struct AnnotateArgs {
    pub mode: Option<Mode>,
    pub overwrite: bool,
    pub catalog: Option<PathBuf>,
    pub llm: LlmFlags,
}

pub fn run(common: &Common, file: &FileConfig, env: &Env, args: &AnnotateArgs) -> CmdResult {
    let (schema, schema_id) = load_schema(common.schema.as_deref(), file)?;
    let mode = match args.mode {
        Some(Mode::Rule) => AnnotatorMode::Rule,
        Some(Mode::Llm) => AnnotatorMode::Llm,
        None => file.annotate.mode.unwrap_or(AnnotatorMode::Rule),
    };
    let (titles, catalog_id) = match args.catalog.as_ref().or(file.annotate.catalog.as_ref()) {
        Some(path) => {
            let text = read_text(path)?;
            let catalog =
                Catalog::from_json(&text).config(format!("reading catalog {}", path.display()))?;
            (catalog.titles(), json!(sha256_hex(text.as_bytes())))
        }
        None => (Catalog::bundled().titles(), json!("bundled")),
    };

    let mut config = match mode {
        AnnotatorMode::Rule => AnnotatorConfig::rule(schema),
        AnnotatorMode::Llm => AnnotatorConfig::llm(schema, bundled_examples()),
    }
    .with_titles(titles);
    config.overwrite = args.overwrite || file.annotate.overwrite.unwrap_or(false);
    if let Some(w) = file.annotate.context_window {
        config.context_window = w;
    }

    let llm = match mode {
        AnnotatorMode::Rule => None,
        AnnotatorMode::Llm => {
            Some(resolve_llm(&args.llm, &file.llm, env)?.ok_or_else(missing_llm_error)?)
        }
    };
    let seed = common.seed.or(file.seed).unwrap_or(0);
    let resolved = json!({
        "mode": mode,
        "schema": schema_id,
        "catalog": catalog_id,
        "overwrite": config.overwrite,
        "context_window": config.context_window,
        "prompt_template": config.prompt_template_id(),
        "llm": llm.as_ref().map(|l| l.description.clone()),
    });

    let (corpus, _) = read_corpora(&common.input, &config.schema)?;
    let gateway = llm.as_ref().map(|l| l.gateway.as_ref());
    let (mut annotated, summary) =
        annotate_corpus(&corpus, &config, gateway).map_err(|e| match e {
            AnnotationError::Config(_) | AnnotationError::MissingGateway => {
                Failure::Config(e.into())
            }
            AnnotationError::Gateway { .. } => Failure::Connector(e.into()),
            AnnotationError::Aggregate { .. } if mode == AnnotatorMode::Llm => {
                Failure::Connector(e.into())
            }
            AnnotationError::Aggregate { .. } => Failure::Validation(e.into()),
        })?;
    for w in &summary.warnings {
        log::warn!("{w}");
    }
    eprintln!(
        "annotated {} utterance(s), kept {}",
        summary.annotated, summary.kept
    );

    annotated
        .header
        .entry("seed".to_string())
        .or_insert(json!(seed));
    annotated.header.insert(
        "annotation".into(),
        json!({ "config_hash": config_hash(&resolved), "seed": seed, "config": resolved }),
    );
    write_output(common.output.as_deref(), &serialize_corpus(&annotated))
}
