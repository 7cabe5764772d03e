#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evalkit_core::analysis::PublishedScores;
use evalkit_core::dialogue::{serialize_corpus, Satisfaction, Speaker};
use evalkit_core::{Corpus, Dialogue};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// The binary with the LLM environment variables cleared.
pub fn evalkit() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_evalkit"));
    for var in [
        "EVALKIT_LLM_ENDPOINT",
        "EVALKIT_LLM_MODEL",
        "EVALKIT_LLM_API_KEY",
    ] {
        cmd.env_remove(var);
    }
    cmd
}

pub fn run(args: &[&str]) -> Output {
    evalkit().args(args).output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn jsonl(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A corpus with the published per-system dialogue counts and
/// satisfaction labels close to the published satisfaction scores.
pub fn arena_manifest() -> Vec<u8> {
    let published = PublishedScores::bundled();
    let counts = published.scores("human", "dialogues").unwrap();
    let satisfaction = published.scores("human", "satisfaction").unwrap();
    let mut dialogues = Vec::new();
    for (system, n) in counts {
        let n = *n as usize;
        let satisfied = (satisfaction[system] * n as f64).round() as usize;
        for i in 0..n {
            let mut d = Dialogue::new(format!("{system}-{i:03}"), system.clone());
            d.push(Speaker::User, "Hi, any movie for tonight?");
            d.push(Speaker::System, "How about Heat?").items = vec!["Heat".into()];
            d.satisfaction = Some(if i < satisfied {
                Satisfaction::Satisfied
            } else {
                Satisfaction::Frustrated
            });
            dialogues.push(d);
        }
    }
    serialize_corpus(&Corpus::new(dialogues))
}
