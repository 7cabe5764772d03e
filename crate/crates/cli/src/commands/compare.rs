use std::path::Path;

use evalkit_core::analysis::{
    rank_systems, reliability_report, tau_b_on_intersection, PublishedScores, ReliabilityReport,
    Scores,
};
use evalkit_core::dialogue::{parse_corpus_str, satisfaction_score};
use evalkit_core::MetricKind;
use serde_json::{json, Value};

use crate::config::{
    jsonl, load_schema, read_text, report_header, sha256_hex, write_output, FileConfig,
};
use crate::error::{config_error, validation_error, Classify, CmdResult, Failure};
use crate::Common;

pub struct CompareArgs {
    pub reference: Option<String>,
    pub candidate: Option<String>,
    pub satisfaction: String,
    pub metric: String,
}

/// Scores loaded from one source, with a short label and a reproducible id.
pub struct Loaded {
    pub label: String,
    pub scores: Scores,
    pub id: Value,
}

const PUBLISHED_METRICS: [&str; 4] = ["recall@1", "sr", "srrr", "rdl"];
const PUBLISHED_SIMULATORS: [&str; 2] = ["abus", "llm-us"];

fn fixture(source: &str, metric: &str) -> CmdResult<Loaded> {
    let published = PublishedScores::bundled();
    let scores = published.scores(source, metric).ok_or_else(|| {
        let known: Vec<String> = published
            .keys()
            .map(|(s, m)| format!("fixture:{s}:{m}"))
            .collect();
        config_error(format!(
            "no published scores for `{source}:{metric}`; known: {}",
            known.join(", ")
        ))
    })?;
    Ok(Loaded {
        label: format!("{source}:{metric}"),
        scores: scores.clone(),
        id: json!(format!("fixture:{source}:{metric}")),
    })
}

/// Picks the `metric` report from an `evaluate` output, or reads a
/// `system<TAB>score` table.
fn parse_score_file(text: &str, metric: &str) -> Result<Scores, String> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .peekable();
    let Some(first) = lines.peek() else {
        return Err("file is empty".into());
    };
    if first.starts_with('{') {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: Value =
                serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            if value.get("metric").and_then(Value::as_str) == Some(metric) {
                return serde_json::from_value(value["per_system"].clone())
                    .map_err(|e| format!("line {}: {e}", i + 1));
            }
        }
        return Err(format!("no `{metric}` report in file"));
    }
    let mut scores = Scores::new();
    for (i, line) in lines.enumerate() {
        let (system, value) = line
            .split_once('\t')
            .ok_or_else(|| format!("row {}: expected system<TAB>score", i + 1))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| format!("row {}: {e}", i + 1))?;
        scores.insert(system.trim().to_string(), value);
    }
    Ok(scores)
}

fn load(spec: &str, metric: &str, common: &Common, file: &FileConfig) -> CmdResult<Loaded> {
    if let Some(rest) = spec.strip_prefix("fixture:") {
        let (source, metric) = rest
            .split_once(':')
            .ok_or_else(|| config_error(format!("`{spec}` should be fixture:<source>:<metric>")))?;
        return fixture(source, metric);
    }
    if let Some(path) = spec.strip_prefix("corpus:") {
        let path = Path::new(path);
        let (schema, _) = load_schema(common.schema.as_deref(), file)?;
        let text = read_text(path)?;
        let corpus = parse_corpus_str(&text, &schema).validation(path.display())?;
        let mut scores = Scores::new();
        for system in corpus.counts_per_system().keys() {
            match satisfaction_score(&corpus, system) {
                Ok(s) => {
                    scores.insert(system.clone(), s);
                }
                Err(e) => log::warn!("{}: {e}", path.display()),
            }
        }
        return Ok(Loaded {
            label: "satisfaction".into(),
            scores,
            id: json!(sha256_hex(text.as_bytes())),
        });
    }
    let path = Path::new(spec);
    let text = read_text(path)?;
    let scores = parse_score_file(&text, metric)
        .map_err(|e| validation_error(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Loaded {
        label: format!("{stem}:{metric}"),
        scores,
        id: json!(sha256_hex(text.as_bytes())),
    })
}

fn analysis_failure(e: evalkit_core::analysis::AnalysisError) -> Failure {
    Failure::Validation(e.into())
}

fn ranking(scores: &Scores, systems: &[String]) -> Value {
    let subset: Scores = systems
        .iter()
        .filter_map(|s| scores.get(s).map(|v| (s.clone(), *v)))
        .collect();
    match rank_systems(&subset) {
        Ok(r) => json!(r.order()),
        Err(_) => Value::Null,
    }
}

/// One reliability record: the report fields plus both rankings.
pub fn reliability_record(
    reference: &Loaded,
    candidate: &Loaded,
    satisfaction: &Loaded,
) -> CmdResult<Value> {
    let report = reliability_report(&reference.scores, &candidate.scores, &satisfaction.scores)
        .map_err(analysis_failure)?
        .named(reference.label.clone(), candidate.label.clone());
    let mut value = serde_json::to_value(&report).expect("report serializes");
    ReliabilityReport::validate_json(&value).map_err(validation_error)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let obj = value.as_object_mut().expect("report is an object");
    obj.insert("kind".into(), json!("reliability"));
    obj.insert(
        "reference_ranking".into(),
        ranking(&reference.scores, &report.systems),
    );
    obj.insert(
        "candidate_ranking".into(),
        ranking(&candidate.scores, &report.systems),
    );
    Ok(value)
}

/// τ-b of one score set against satisfaction, with its ranking.
pub fn correlation_record(scores: &Loaded, satisfaction: &Loaded) -> CmdResult<Value> {
    let c =
        tau_b_on_intersection(&scores.scores, &satisfaction.scores).map_err(analysis_failure)?;
    Ok(json!({
        "kind": "correlation",
        "scores": scores.label,
        "against": satisfaction.label,
        "tau_b": c.tau_b,
        "systems": c.systems,
        "dropped": c.dropped,
        "ranking": ranking(&scores.scores, &c.systems),
    }))
}

pub fn run(common: &Common, file: &FileConfig, args: &CompareArgs) -> CmdResult {
    let metric = args
        .metric
        .parse::<MetricKind>()
        .map(|m| m.name())
        .unwrap_or_else(|_| args.metric.clone());
    let satisfaction = load(&args.satisfaction, &metric, common, file)?;
    let mut records = Vec::new();
    let resolved = match (&args.reference, &args.candidate) {
        (Some(r), Some(c)) => {
            let reference = load(r, &metric, common, file)?;
            let candidate = load(c, &metric, common, file)?;
            records.push(reliability_record(&reference, &candidate, &satisfaction)?);
            json!({
                "metric": metric,
                "reference": reference.id,
                "candidate": candidate.id,
                "satisfaction": satisfaction.id,
            })
        }
        (None, None) => {
            for m in PUBLISHED_METRICS {
                records.push(correlation_record(&fixture("human", m)?, &satisfaction)?);
            }
            let reference = fixture("human", "rdl")?;
            for sim in PUBLISHED_SIMULATORS {
                records.push(reliability_record(
                    &reference,
                    &fixture(sim, "rdl")?,
                    &satisfaction,
                )?);
            }
            json!({ "published": true, "satisfaction": satisfaction.id })
        }
        _ => {
            return Err(config_error(
                "--reference and --candidate must be given together",
            ))
        }
    };
    for r in &records {
        if r["kind"] == "reliability" {
            eprintln!(
                "{} vs {}: tau_b {} avg |diff| {:.4}",
                r["candidate"].as_str().unwrap_or("?"),
                r["reference"].as_str().unwrap_or("?"),
                r["tau_b"],
                r["average_abs_diff"].as_f64().unwrap_or(f64::NAN)
            );
        }
    }
    let seed = common.seed.or(file.seed).unwrap_or(0);
    let mut lines = vec![report_header("compare", seed, &resolved, &[])];
    lines.extend(records);
    write_output(common.output.as_deref(), &jsonl(&lines))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_file_formats() {
        let reports = "{\"kind\":\"header\"}\n{\"metric\":\"sr\",\"per_system\":{\"A\":0.5}}\n{\"metric\":\"rdl\",\"per_system\":{\"A\":0.1,\"B\":0.2}}\n";
        let s = parse_score_file(reports, "rdl").unwrap();
        assert_eq!(s.len(), 2);
        assert!(parse_score_file(reports, "srrr").is_err());
        let table = "# comment\nA\t0.3\nB\t0.4\n";
        assert_eq!(parse_score_file(table, "rdl").unwrap()["B"], 0.4);
        assert!(parse_score_file("A 0.3", "rdl").is_err());
        assert!(parse_score_file("", "rdl").is_err());
    }

    #[test]
    fn published_records() {
        let sat = fixture("human", "satisfaction").unwrap();
        let rdl = correlation_record(&fixture("human", "rdl").unwrap(), &sat).unwrap();
        assert!((rdl["tau_b"].as_f64().unwrap() - 0.78).abs() < 0.005);
        let abus = reliability_record(
            &fixture("human", "rdl").unwrap(),
            &fixture("abus", "rdl").unwrap(),
            &sat,
        )
        .unwrap();
        assert!((abus["average_abs_diff"].as_f64().unwrap() - 0.107).abs() < 0.001);
        assert_eq!(abus["systems"].as_array().unwrap().len(), 8);
        assert!(fixture("human", "nope").is_err());
    }
}
