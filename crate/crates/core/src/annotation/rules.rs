use crate::dialogue::{
    DialogueAct, IntentSchema, Speaker, Utterance, ACCEPT, ITEM_SLOT, OTHER, RECOMMEND, REJECT,
};

use super::AnnotationError;

/// Cue-phrase lexicon: `intent<TAB>cue phrase` per line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleTable {
    entries: Vec<(String, String)>,
}

impl RuleTable {
    pub fn from_tsv(text: &str) -> Result<Self, AnnotationError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (intent, cue) = line.split_once('\t').ok_or_else(|| {
                AnnotationError::Config(format!("rule line {}: expected intent<TAB>cue", i + 1))
            })?;
            let cue = normalize(cue.trim());
            if intent.trim().is_empty() || cue.is_empty() {
                return Err(AnnotationError::Config(format!(
                    "rule line {}: empty intent or cue",
                    i + 1
                )));
            }
            entries.push((intent.trim().to_string(), cue));
        }
        Ok(Self { entries })
    }

    /// The lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_tsv(include_str!("../../data/rules.tsv")).expect("bundled rule table parses")
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn check_schema(&self, schema: &IntentSchema) -> Result<(), AnnotationError> {
        match self
            .entries
            .iter()
            .find(|(intent, _)| !schema.contains(intent))
        {
            Some((intent, _)) => Err(AnnotationError::Config(format!(
                "rule table uses intent `{intent}` which is not in the schema"
            ))),
            None => Ok(()),
        }
    }
}

fn normalize(text: &str) -> String {
    text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// Byte offsets of every whole-phrase occurrence of `needle` in `haystack`.
fn phrase_positions(haystack: &str, needle: &str) -> Vec<usize> {
    let mut out = Vec::new();
    if needle.is_empty() {
        return out;
    }
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before_ok = haystack[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !is_word_char(c));
        let after_ok = haystack[end..]
            .chars()
            .next()
            .is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            out.push(start);
        }
        from = start + needle.chars().next().map_or(1, char::len_utf8);
    }
    out
}

/// Titles from `catalog` mentioned in `text`, in order of appearance. Longer
/// titles win over titles nested inside them.
pub(crate) fn find_titles(text: &str, catalog: &[String]) -> Vec<String> {
    let lowered = normalize(text);
    let mut hits: Vec<(usize, usize, &String)> = catalog
        .iter()
        .flat_map(|title| {
            let needle = normalize(title);
            phrase_positions(&lowered, &needle)
                .into_iter()
                .map(move |p| (p, needle.len(), title))
        })
        .collect();
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut covered_until = 0;
    let mut titles: Vec<String> = Vec::new();
    for (start, len, title) in hits {
        if start < covered_until {
            continue;
        }
        covered_until = start + len;
        if !titles.contains(title) {
            titles.push(title.clone());
        }
    }
    titles
}

fn add_titles(act: &mut DialogueAct, titles: &[String]) {
    for title in titles {
        if !act.item_values().any(|v| v == title) {
            act.slots
                .push(crate::dialogue::Slot::new(ITEM_SLOT, title.clone()));
        }
    }
}

/// Keyword annotator: cue phrases per intent plus a title-matching pass.
///
/// System utterances that mention catalog titles (or carry structured items)
/// get a `Recommend` act with one `TITLE` slot per item. In user utterances,
/// mentioned titles attach to the first `Accept` or `Reject` act.
pub(crate) fn annotate(
    utterance: &Utterance,
    _context: &[Utterance],
    rules: &RuleTable,
    titles: &[String],
    schema: &IntentSchema,
) -> Vec<DialogueAct> {
    if utterance.text.trim().is_empty() {
        return Vec::new();
    }
    let text = normalize(&utterance.text);
    let mut acts: Vec<DialogueAct> = Vec::new();
    for (intent, cue) in rules.entries() {
        if !schema.allows(utterance.speaker, intent) || acts.iter().any(|a| a.is(intent)) {
            continue;
        }
        if !phrase_positions(&text, cue).is_empty() {
            acts.push(DialogueAct::new(intent.clone()));
        }
    }

    let mut mentioned = find_titles(&utterance.text, titles);
    match utterance.speaker {
        Speaker::System => {
            for item in &utterance.items {
                if !mentioned.contains(item) {
                    mentioned.push(item.clone());
                }
            }
            if !mentioned.is_empty() && schema.allows(Speaker::System, RECOMMEND) {
                match acts.iter_mut().find(|a| a.is(RECOMMEND)) {
                    Some(act) => add_titles(act, &mentioned),
                    None => {
                        let mut act = DialogueAct::new(RECOMMEND);
                        add_titles(&mut act, &mentioned);
                        acts.insert(0, act);
                    }
                }
            }
        }
        Speaker::User => {
            if let Some(act) = acts.iter_mut().find(|a| a.is(ACCEPT) || a.is(REJECT)) {
                add_titles(act, &mentioned);
            }
        }
    }
    if acts.is_empty() && schema.allows(utterance.speaker, OTHER) {
        acts.push(DialogueAct::new(OTHER));
    }
    acts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phrase_matching_respects_word_boundaries() {
        assert_eq!(phrase_positions("hi there", "hi"), vec![0]);
        assert!(phrase_positions("this is it", "hi").is_empty());
        assert_eq!(
            phrase_positions("i'll watch it. i'll watch", "i'll watch"),
            vec![0, 15]
        );
    }

    #[test]
    fn titles_in_order_and_longest_first() {
        let catalog = vec!["Heat".to_string(), "Heat 2".to_string(), "Up".to_string()];
        assert_eq!(
            find_titles("Have you seen Up or Heat 2?", &catalog),
            vec!["Up".to_string(), "Heat 2".to_string()]
        );
        assert!(find_titles("Upside down", &catalog).is_empty());
    }

    #[test]
    fn table_parsing() {
        let table = RuleTable::from_tsv("# c\nAccept\tSounds Good\n\nReject\tno thanks\n").unwrap();
        assert_eq!(
            table.entries(),
            &[
                ("Accept".to_string(), "sounds good".to_string()),
                ("Reject".to_string(), "no thanks".to_string())
            ]
        );
        assert!(RuleTable::from_tsv("Accept sounds good").is_err());
        let bad = RuleTable::from_tsv("Teleport\tbeam me").unwrap();
        assert!(bad.check_schema(&IntentSchema::default()).is_err());
        assert!(RuleTable::bundled()
            .check_schema(&IntentSchema::default())
            .is_ok());
    }

    #[test]
    fn no_cue_falls_back_to_other() {
        let schema = IntentSchema::default();
        let u = Utterance::new(0, Speaker::System, "zxqv");
        assert_eq!(
            annotate(&u, &[], &RuleTable::bundled(), &[], &schema),
            vec![DialogueAct::new(OTHER)]
        );
        let empty = Utterance::new(0, Speaker::User, "  ");
        assert!(annotate(&empty, &[], &RuleTable::bundled(), &[], &schema).is_empty());
    }
}
