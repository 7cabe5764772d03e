use crate::connectors::{ChatMessage, LlmGateway};
use crate::dialogue::{DialogueAct, IntentSchema, Metadata, Slot, Speaker, Utterance, OTHER};

use super::{Annotation, AnnotationError, FewShotExample};

/// A prompt with `{name}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub text: String,
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }

    pub fn bundled_annotation() -> Self {
        Self::new(
            "annotate-v1",
            include_str!("../../data/prompts/annotate.txt"),
        )
    }

    /// Substitutes each `{key}` with its value. Unknown placeholders are left as they are.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = self.text.clone();
        for (key, value) in values {
            out = out.replace(&format!("{{{key}}}"), value);
        }
        out
    }
}

pub(crate) fn render_turns(turns: &[Utterance]) -> String {
    if turns.is_empty() {
        return "(no previous turns)".into();
    }
    turns
        .iter()
        .map(|u| format!("{}: {}", u.speaker, u.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_acts(acts: &[DialogueAct]) -> String {
    if acts.is_empty() {
        "None".into()
    } else {
        acts.iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn render_examples(examples: &[FewShotExample]) -> String {
    examples
        .iter()
        .map(|ex| format!("{}: {}\n{}", ex.speaker, ex.text, render_acts(&ex.acts)))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub(crate) fn build_prompt(
    template: &PromptTemplate,
    utterance: &Utterance,
    context: &[Utterance],
    examples: &[FewShotExample],
    schema: &IntentSchema,
) -> String {
    let intents: Vec<&str> = schema.intents_for(utterance.speaker).collect();
    let line = format!("{}: {}", utterance.speaker, utterance.text);
    template.render(&[
        ("context", &render_turns(context)),
        ("utterance", &line),
        ("schema", &intents.join(", ")),
        ("examples", &render_examples(examples)),
    ])
}

const CORRECTION: &str =
    "That answer could not be read. Reply only with dialogue acts, one per line, in the form Intent(slot='value'), or None.";

pub(crate) fn annotate_with_llm(
    utterance: &Utterance,
    context: &[Utterance],
    template: &PromptTemplate,
    examples: &[FewShotExample],
    schema: &IntentSchema,
    gateway: &dyn LlmGateway,
) -> Result<Annotation, AnnotationError> {
    let prompt = build_prompt(template, utterance, context, examples, schema);
    let mut messages = vec![ChatMessage::user(prompt)];
    let gateway_err = |source| AnnotationError::Gateway {
        index: utterance.index,
        source,
    };

    let first = gateway.complete(&messages).map_err(gateway_err)?;
    let first_err = match parse_acts(&first, utterance.speaker, schema) {
        Ok(acts) => {
            return Ok(Annotation {
                acts,
                warning: None,
            })
        }
        Err(e) => e,
    };
    log::debug!("unparseable annotation reply ({first_err}), retrying once");
    messages.push(ChatMessage::assistant(first));
    messages.push(ChatMessage::user(CORRECTION));
    let second = gateway.complete(&messages).map_err(gateway_err)?;
    match parse_acts(&second, utterance.speaker, schema) {
        Ok(acts) => Ok(Annotation {
            acts,
            warning: None,
        }),
        Err(e) => {
            let mut fallback = DialogueAct::new(OTHER);
            let mut extra = Metadata::new();
            extra.insert("warning".into(), "unparseable-llm-reply".into());
            fallback.extra = extra;
            Ok(Annotation {
                acts: vec![fallback],
                warning: Some(format!(
                    "utterance {}: unparseable LLM reply: {e}",
                    utterance.index
                )),
            })
        }
    }
}

/// Parses acts written as `Intent(slot='value', slot=value)`, one or more per
/// reply, separated by newlines, commas or semicolons. `None` means no act.
pub fn parse_acts(
    reply: &str,
    speaker: Speaker,
    schema: &IntentSchema,
) -> Result<Vec<DialogueAct>, String> {
    let mut parser = ActParser {
        chars: reply.trim().chars().collect(),
        pos: 0,
    };
    let mut acts: Vec<DialogueAct> = Vec::new();
    parser.skip_separators();
    if parser.at_end() {
        return Err("empty reply".into());
    }
    let rest: String = parser.chars[parser.pos..].iter().collect();
    if rest
        .trim()
        .trim_end_matches('.')
        .eq_ignore_ascii_case("none")
    {
        return Ok(acts);
    }
    while !parser.at_end() {
        let act = parser.act()?;
        if !schema.allows(speaker, &act.intent) {
            return Err(format!("intent `{}` is not a {speaker} intent", act.intent));
        }
        match acts.iter_mut().find(|a| a.intent == act.intent) {
            Some(existing) => {
                for slot in act.slots {
                    if !existing.slots.contains(&slot) {
                        existing.slots.push(slot);
                    }
                }
            }
            None => acts.push(act),
        }
        parser.skip_separators();
    }
    Ok(acts)
}

struct ActParser {
    chars: Vec<char>,
    pos: usize,
}

impl ActParser {
    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn skip_separators(&mut self) {
        while self
            .peek()
            .is_some_and(|c| c.is_whitespace() || matches!(c, ',' | ';' | '-' | '*' | '`'))
        {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '-')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(format!("expected a name at position {start}"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn value(&mut self) -> Result<String, String> {
        self.skip_ws();
        match self.peek() {
            Some(q @ ('\'' | '"')) => {
                self.pos += 1;
                let start = self.pos;
                // A closing quote only counts when followed by `,` or `)`, so
                // titles with apostrophes survive.
                loop {
                    match self.peek() {
                        None => return Err("unterminated quoted value".into()),
                        Some(c) if c == q => {
                            let mut look = self.pos + 1;
                            while self.chars.get(look).is_some_and(|c| c.is_whitespace()) {
                                look += 1;
                            }
                            if matches!(self.chars.get(look), Some(',') | Some(')')) {
                                let value: String = self.chars[start..self.pos].iter().collect();
                                self.pos += 1;
                                return Ok(value);
                            }
                            self.pos += 1;
                        }
                        Some(_) => self.pos += 1,
                    }
                }
            }
            _ => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c != ',' && c != ')') {
                    self.pos += 1;
                }
                let value: String = self.chars[start..self.pos].iter().collect();
                Ok(value.trim().to_string())
            }
        }
    }

    fn act(&mut self) -> Result<DialogueAct, String> {
        let intent = self.ident()?;
        let mut act = DialogueAct::new(intent);
        self.skip_ws();
        if self.peek() != Some('(') {
            return Ok(act);
        }
        self.pos += 1;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    return Ok(act);
                }
                None => return Err("missing `)`".into()),
                _ => {}
            }
            let slot = self.ident()?;
            self.skip_ws();
            if self.peek() != Some('=') {
                return Err(format!("expected `=` after slot `{slot}`"));
            }
            self.pos += 1;
            let value = self.value()?;
            if value.is_empty() {
                return Err(format!("empty value for slot `{slot}`"));
            }
            let slot = Slot::new(slot, value);
            if !act.slots.contains(&slot) {
                act.slots.push(slot);
            }
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {}
                _ => return Err("expected `,` or `)` in slot list".into()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::{ACCEPT, ITEM_SLOT, RECOMMEND};

    #[test]
    fn parses_bracket_notation() {
        let schema = IntentSchema::default();
        let acts = parse_acts(
            "Recommend(TITLE='Step Brothers', TITLE='Walk Hard: The Dewey Cox Story')",
            Speaker::System,
            &schema,
        )
        .unwrap();
        assert_eq!(
            acts,
            vec![DialogueAct::new(RECOMMEND)
                .with_slot(ITEM_SLOT, "Step Brothers")
                .with_slot(ITEM_SLOT, "Walk Hard: The Dewey Cox Story")]
        );
    }

    #[test]
    fn parses_multiple_and_bare_acts() {
        let schema = IntentSchema::default();
        let acts = parse_acts("Accept()\nInquire(slot=director)", Speaker::User, &schema).unwrap();
        assert_eq!(
            acts,
            vec![
                DialogueAct::new(ACCEPT),
                DialogueAct::new("Inquire").with_slot("slot", "director")
            ]
        );
        assert_eq!(
            parse_acts("Accept", Speaker::User, &schema).unwrap(),
            vec![DialogueAct::new(ACCEPT)]
        );
        assert!(parse_acts("None", Speaker::User, &schema)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn apostrophes_inside_titles() {
        let schema = IntentSchema::default();
        let acts = parse_acts(
            "Recommend(TITLE='Ocean's Eleven')",
            Speaker::System,
            &schema,
        )
        .unwrap();
        assert_eq!(acts[0].slots[0].value, "Ocean's Eleven");
    }

    #[test]
    fn rejects_garbage_and_wrong_role() {
        let schema = IntentSchema::default();
        assert!(parse_acts(
            "I think this is a recommendation.",
            Speaker::System,
            &schema
        )
        .is_err());
        assert!(parse_acts("Accept()", Speaker::System, &schema).is_err());
        assert!(parse_acts("Recommend(TITLE=", Speaker::System, &schema).is_err());
        assert!(parse_acts("", Speaker::System, &schema).is_err());
    }

    #[test]
    fn template_rendering() {
        let t = PromptTemplate::new("t", "{utterance} | {context} | {unknown}");
        assert_eq!(
            t.render(&[("utterance", "u"), ("context", "c")]),
            "u | c | {unknown}"
        );
    }
}
