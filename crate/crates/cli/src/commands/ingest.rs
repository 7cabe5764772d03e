use std::collections::BTreeMap;
use std::fmt::Write as _;

use evalkit_core::dialogue::Satisfaction;
use serde_json::{json, Value};

use crate::config::{jsonl, load_schema, read_corpora, report_header, write_output, FileConfig};
use crate::error::CmdResult;
use crate::Common;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SystemCounts {
    pub dialogues: usize,
    pub utterances: usize,
    pub satisfied: usize,
    pub frustrated: usize,
}

pub fn summarize(corpus: &evalkit_core::Corpus) -> BTreeMap<String, SystemCounts> {
    let mut counts: BTreeMap<String, SystemCounts> = BTreeMap::new();
    for d in &corpus.dialogues {
        let c = counts.entry(d.crs_id.clone()).or_default();
        c.dialogues += 1;
        c.utterances += d.len();
        match d.satisfaction {
            Some(Satisfaction::Satisfied) => c.satisfied += 1,
            Some(Satisfaction::Frustrated) => c.frustrated += 1,
            None => {}
        }
    }
    counts
}

pub fn render_table(counts: &BTreeMap<String, SystemCounts>) -> String {
    let mut out = String::from("system\tdialogues\tutterances\tsatisfied\tfrustrated\n");
    let mut total = SystemCounts::default();
    for (system, c) in counts {
        writeln!(
            out,
            "{system}\t{}\t{}\t{}\t{}",
            c.dialogues, c.utterances, c.satisfied, c.frustrated
        )
        .unwrap();
        total.dialogues += c.dialogues;
        total.utterances += c.utterances;
        total.satisfied += c.satisfied;
        total.frustrated += c.frustrated;
    }
    writeln!(
        out,
        "Total\t{}\t{}\t{}\t{}",
        total.dialogues, total.utterances, total.satisfied, total.frustrated
    )
    .unwrap();
    out
}

pub fn run(common: &Common, file: &FileConfig) -> CmdResult {
    let (schema, schema_id) = load_schema(common.schema.as_deref(), file)?;
    let (corpus, digests) = read_corpora(&common.input, &schema)?;
    let counts = summarize(&corpus);
    print!("{}", render_table(&counts));
    if let Some(path) = common.output.as_deref() {
        let seed = common.seed.or(file.seed).unwrap_or(0);
        let resolved = json!({ "schema": schema_id });
        let per_system: BTreeMap<&str, Value> = counts
            .iter()
            .map(|(k, c)| {
                (
                    k.as_str(),
                    json!({
                        "dialogues": c.dialogues,
                        "utterances": c.utterances,
                        "satisfied": c.satisfied,
                        "frustrated": c.frustrated,
                    }),
                )
            })
            .collect();
        let summary = json!({ "kind": "summary", "total": corpus.len(), "per_system": per_system });
        write_output(
            Some(path),
            &jsonl(&[report_header("ingest", seed, &resolved, &digests), summary]),
        )?;
    }
    Ok(())
}
