use std::path::Path;

use evalkit_core::metrics::{evaluate_system, EvaluateOptions, GroundTruth, MetricError};
use evalkit_core::MetricKind;
use serde_json::json;

use crate::config::{
    jsonl, load_schema, read_corpora, read_text, report_header, sha256_hex, write_output,
    FileConfig,
};
use crate::error::{config_error, Classify, CmdResult, Failure};
use crate::Common;

pub fn parse_metrics(names: &[String]) -> CmdResult<Vec<MetricKind>> {
    names
        .iter()
        .filter(|n| !n.trim().is_empty())
        .map(|n| n.parse::<MetricKind>().map_err(config_error))
        .collect()
}

pub fn run(
    common: &Common,
    file: &FileConfig,
    metric_names: &[String],
    ground_truth: Option<&Path>,
) -> CmdResult {
    let metrics = parse_metrics(metric_names)?;
    let (schema, schema_id) = load_schema(common.schema.as_deref(), file)?;
    let gt = match ground_truth {
        Some(path) => {
            let text = read_text(path)?;
            let gt = GroundTruth::from_jsonl(&text).validation(path.display())?;
            Some((gt, sha256_hex(text.as_bytes())))
        }
        None => None,
    };
    let (corpus, mut digests) = read_corpora(&common.input, &schema)?;
    if let Some((_, digest)) = &gt {
        digests.push(digest.clone());
    }
    let options = EvaluateOptions {
        ground_truth: gt.as_ref().map(|(g, _)| g),
    };
    let reports = evaluate_system(&corpus, &metrics, &options).map_err(|e| match e {
        MetricError::MissingGroundTruth | MetricError::InvalidCutoff => Failure::Config(e.into()),
        other => Failure::Validation(anyhow::Error::new(other).context("evaluating corpus")),
    })?;

    let seed = common.seed.or(file.seed).unwrap_or(0);
    let names: Vec<String> = metrics.iter().map(MetricKind::name).collect();
    let resolved = json!({ "metrics": names, "schema": schema_id });
    let mut lines = vec![report_header("evaluate", seed, &resolved, &digests)];
    for report in &reports {
        for w in &report.warnings {
            log::warn!("{}: {w}", report.metric);
        }
        lines.push(serde_json::to_value(report).expect("report serializes"));
    }
    write_output(common.output.as_deref(), &jsonl(&lines))
}
