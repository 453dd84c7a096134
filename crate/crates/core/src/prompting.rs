//! Prompt templates for the understanding and generation models, and the
//! inverse parser for generated output.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Instance;
use crate::labels::Task;

pub const HT_OPEN: &str = "[ht]";
pub const HT_CLOSE: &str = "[/ht]";
pub const MOT_OPEN: &str = "[mot]";
pub const MOT_CLOSE: &str = "[/mot]";
pub const ACT_OPEN: &str = "[act]";
pub const ACT_CLOSE: &str = "[/act]";

/// The six atomic template tags.
pub const SPECIAL_TAGS: [&str; 6] = [HT_OPEN, HT_CLOSE, MOT_OPEN, MOT_CLOSE, ACT_OPEN, ACT_CLOSE];

/// Bumped whenever the default templates change.
pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("task {0} has no understanding prompt")]
    WrongTask(&'static str),
    #[error("generation produced an empty action")]
    EmptyGeneration,
    #[error("template file line {line}: {message}")]
    TemplateFile { line: usize, message: String },
}

/// Template strings. `C` is the character placeholder, `__` a slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub history: String,
    pub motivation: String,
    pub action: String,
    pub emotion: String,
    pub generation_history: String,
    pub generation_motivation: String,
    pub generation_target: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            history: "C's history actions are __.".into(),
            motivation: "C's motivation is __.".into(),
            action: "C's action is __.".into(),
            emotion: "C's emotion is __.".into(),
            generation_history: "[ht] C's history actions are __ [/ht]".into(),
            generation_motivation: "[mot] C has __ motivation [/mot]".into(),
            generation_target: "[act] __ [/act]".into(),
        }
    }
}

impl Templates {
    /// Parses `name = template` lines; names not given keep their default.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut t = Templates::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, value) = line.split_once('=').ok_or(PromptError::TemplateFile {
                line: i + 1,
                message: "expected `name = template`".into(),
            })?;
            let slot = match name.trim() {
                "history" => &mut t.history,
                "motivation" => &mut t.motivation,
                "action" => &mut t.action,
                "emotion" => &mut t.emotion,
                "generation_history" => &mut t.generation_history,
                "generation_motivation" => &mut t.generation_motivation,
                "generation_target" => &mut t.generation_target,
                other => {
                    return Err(PromptError::TemplateFile {
                        line: i + 1,
                        message: format!("unknown template {other:?}"),
                    })
                }
            };
            *slot = value.trim().to_string();
        }
        Ok(t)
    }
}

/// Input (and training target) of the generator, with tag spans as byte
/// ranges: `ht` and `mot` index into `input`, `act` into `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRendering {
    pub input: String,
    pub target: Option<String>,
    pub spans: BTreeMap<&'static str, Range<usize>>,
}

/// Replaces the standalone `C` placeholder and `__` slots left to right. A
/// slot value ending in sentence punctuation absorbs a following `.`.
pub fn fill(template: &str, character: &str, slots: &[&str]) -> String {
    let chars: Vec<char> = template.chars().collect();
    let mut out = String::with_capacity(template.len() + 64);
    let mut next_slot = slots.iter();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '_' && chars.get(i + 1) == Some(&'_') {
            let value = next_slot.next().copied().unwrap_or("");
            out.push_str(value);
            i += 2;
            if value.ends_with(['.', '!', '?']) && chars.get(i) == Some(&'.') {
                i += 1;
            }
            continue;
        }
        let standalone = c == 'C'
            && (i == 0 || !chars[i - 1].is_alphanumeric())
            && chars.get(i + 1).is_none_or(|n| !n.is_alphanumeric());
        if standalone {
            out.push_str(character);
        } else {
            out.push(c);
        }
        i += 1;
    }
    out
}

fn join_motivations(inst: &Instance) -> String {
    inst.motivations
        .iter()
        .map(|m| m.display_name())
        .collect::<Vec<_>>()
        .join(", ")
}

fn join_emotions(inst: &Instance) -> String {
    inst.emotions
        .iter()
        .map(|e| e.display_name())
        .collect::<Vec<_>>()
        .join(", ")
}

/// EU: history, motivation, action. MU: history, emotion, action.
pub fn render_understanding_prompt(inst: &Instance, task: Task) -> Result<String, PromptError> {
    render_understanding_with(&Templates::default(), inst, task)
}

pub fn render_understanding_with(
    templates: &Templates,
    inst: &Instance,
    task: Task,
) -> Result<String, PromptError> {
    let c = inst.character.trim();
    if c.is_empty() {
        return Err(PromptError::MissingField("character"));
    }
    if inst.action.trim().is_empty() {
        return Err(PromptError::MissingField("action"));
    }
    let state = match task {
        Task::Eu => {
            if inst.motivations.is_empty() {
                return Err(PromptError::MissingField("motivations"));
            }
            fill(&templates.motivation, c, &[&join_motivations(inst)])
        }
        Task::Mu => {
            if inst.emotions.is_empty() {
                return Err(PromptError::MissingField("emotions"));
            }
            fill(&templates.emotion, c, &[&join_emotions(inst)])
        }
        Task::Cag => return Err(PromptError::WrongTask("cag")),
    };
    let mut parts = Vec::with_capacity(3);
    let history = inst.history.join(" ");
    if !history.trim().is_empty() {
        parts.push(fill(&templates.history, c, &[history.trim()]));
    }
    parts.push(state);
    parts.push(fill(&templates.action, c, &[inst.action.trim()]));
    Ok(parts.join(" "))
}

/// Generation input without emotion; the target wraps the action.
pub fn render_generation_prompt(inst: &Instance) -> Result<PromptRendering, PromptError> {
    render_generation_with(&Templates::default(), inst, true)
}

/// `include_motivation = false` drops the motivation block (ablation).
pub fn render_generation_with(
    templates: &Templates,
    inst: &Instance,
    include_motivation: bool,
) -> Result<PromptRendering, PromptError> {
    let c = inst.character.trim();
    if c.is_empty() {
        return Err(PromptError::MissingField("character"));
    }
    if include_motivation && inst.motivations.is_empty() {
        return Err(PromptError::MissingField("motivations"));
    }
    let mut input = String::new();
    let mut spans = BTreeMap::new();
    let history = inst.history.join(" ");
    if !history.trim().is_empty() {
        let block = fill(&templates.generation_history, c, &[history.trim()]);
        record_span(&mut spans, "ht", &block, 0, HT_OPEN, HT_CLOSE);
        input.push_str(&block);
    }
    if include_motivation {
        if !input.is_empty() {
            input.push_str(" and ");
        }
        let block = fill(&templates.generation_motivation, c, &[&join_motivations(inst)]);
        record_span(&mut spans, "mot", &block, input.len(), MOT_OPEN, MOT_CLOSE);
        input.push_str(&block);
    }
    if input.is_empty() {
        // nothing but the character is known
        input = fill(&templates.generation_history, c, &[""]);
        record_span(&mut spans, "ht", &input.clone(), 0, HT_OPEN, HT_CLOSE);
    }
    let target = if inst.action.trim().is_empty() {
        None
    } else {
        let t = fill(&templates.generation_target, c, &[inst.action.trim()]);
        record_span(&mut spans, "act", &t, 0, ACT_OPEN, ACT_CLOSE);
        Some(t)
    };
    Ok(PromptRendering { input, target, spans })
}

fn record_span(
    spans: &mut BTreeMap<&'static str, Range<usize>>,
    name: &'static str,
    block: &str,
    offset: usize,
    open: &str,
    close: &str,
) {
    if let (Some(s), Some(e)) = (block.find(open), block.rfind(close)) {
        spans.insert(name, offset + s..offset + e + close.len());
    }
}

/// Parsed generator output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAction {
    pub action: String,
    /// False when the `[act] .. [/act]` pair was incomplete.
    pub tagged: bool,
}

/// Content between the first `[act]` and the following `[/act]`. Without a
/// complete pair, falls back to the text after any prompt echo.
pub fn parse_generated_action(decoded: &str) -> Result<ParsedAction, PromptError> {
    let (raw, tagged) = match decoded.find(ACT_OPEN) {
        Some(start) => {
            let rest = &decoded[start + ACT_OPEN.len()..];
            match rest.find(ACT_CLOSE) {
                Some(end) => (&rest[..end], true),
                None => (rest, false),
            }
        }
        None => {
            let mut rest = decoded;
            for close in [MOT_CLOSE, HT_CLOSE] {
                if let Some(i) = rest.rfind(close) {
                    rest = &rest[i + close.len()..];
                    break;
                }
            }
            if let Some(i) = rest.find(ACT_CLOSE) {
                rest = &rest[..i];
            }
            (rest, false)
        }
    };
    let mut action = raw.to_string();
    for tag in SPECIAL_TAGS.iter().chain(["<eos>", "<bos>", "<pad>"].iter()) {
        action = action.replace(tag, " ");
    }
    let action = action.split_whitespace().collect::<Vec<_>>().join(" ");
    if action.is_empty() {
        return Err(PromptError::EmptyGeneration);
    }
    Ok(ParsedAction { action, tagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{EmotionLabel, MotivationLabel};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn kim() -> Instance {
        Instance {
            story_id: "s".into(),
            line_idx: 2,
            character: "Kim".into(),
            history: vec!["Kim went out.".into()],
            action: "Kim enjoyed the sea.".into(),
            motivations: BTreeSet::from([MotivationLabel::SpiritualGrowth]),
            emotions: BTreeSet::from([EmotionLabel::Joy]),
        }
    }

    #[test]
    fn eu_prompt() {
        assert_eq!(
            render_understanding_prompt(&kim(), Task::Eu).unwrap(),
            "Kim's history actions are Kim went out. Kim's motivation is spiritual growth. Kim's action is Kim enjoyed the sea."
        );
    }

    #[test]
    fn mu_prompt_and_empty_history() {
        let mut k = kim();
        assert_eq!(
            render_understanding_prompt(&k, Task::Mu).unwrap(),
            "Kim's history actions are Kim went out. Kim's emotion is joy. Kim's action is Kim enjoyed the sea."
        );
        k.history.clear();
        assert_eq!(
            render_understanding_prompt(&k, Task::Mu).unwrap(),
            "Kim's emotion is joy. Kim's action is Kim enjoyed the sea."
        );
    }

    #[test]
    fn multi_label_slot() {
        let mut k = kim();
        k.emotions.insert(EmotionLabel::Trust);
        let p = render_understanding_prompt(&k, Task::Mu).unwrap();
        assert!(p.contains("Kim's emotion is joy, trust."));
    }

    #[test]
    fn missing_fields() {
        let mut k = kim();
        k.motivations.clear();
        assert_eq!(
            render_understanding_prompt(&k, Task::Eu),
            Err(PromptError::MissingField("motivations"))
        );
        assert!(render_generation_prompt(&k).is_err());
        let mut k = kim();
        k.emotions.clear();
        assert_eq!(
            render_understanding_prompt(&k, Task::Mu),
            Err(PromptError::MissingField("emotions"))
        );
        let mut k = kim();
        k.character = " ".into();
        assert_eq!(render_generation_prompt(&k), Err(PromptError::MissingField("character")));
    }

    #[test]
    fn generation_prompt() {
        let mut k = kim();
        k.action = "Kim went home.".into();
        let r = render_generation_prompt(&k).unwrap();
        assert_eq!(
            r.input,
            "[ht] Kim's history actions are Kim went out. [/ht] and [mot] Kim has spiritual growth motivation [/mot]"
        );
        assert_eq!(r.target.as_deref(), Some("[act] Kim went home. [/act]"));
        assert!(!r.input.contains("joy"));
        assert_eq!(&r.input[r.spans["mot"].clone()], "[mot] Kim has spiritual growth motivation [/mot]");
        assert_eq!(r, render_generation_prompt(&k).unwrap());
    }

    #[test]
    fn without_motivation_ablation() {
        let r = render_generation_with(&Templates::default(), &kim(), false).unwrap();
        assert_eq!(r.input, "[ht] Kim's history actions are Kim went out. [/ht]");
    }

    #[test]
    fn parse_cases() {
        assert_eq!(
            parse_generated_action("[act] She smiled. [/act]").unwrap(),
            ParsedAction { action: "She smiled.".into(), tagged: true }
        );
        assert_eq!(
            parse_generated_action("[act] She smiled.").unwrap(),
            ParsedAction { action: "She smiled.".into(), tagged: false }
        );
        assert_eq!(parse_generated_action("[act][/act]"), Err(PromptError::EmptyGeneration));
        assert_eq!(
            parse_generated_action("[mot] Kim has love motivation [/mot] Kim called mom.").unwrap(),
            ParsedAction { action: "Kim called mom.".into(), tagged: false }
        );
    }

    #[test]
    fn template_file() {
        let t = Templates::parse("# custom\nemotion = C feels __.\n").unwrap();
        assert_eq!(t.emotion, "C feels __.");
        assert_eq!(t.action, Templates::default().action);
        assert!(Templates::parse("nonsense").is_err());
        assert!(Templates::parse("bogus = x").is_err());
    }

    proptest! {
        #[test]
        fn render_parse_identity(action in "[A-Za-z][a-z ,']{0,40}[a-z][.!?]") {
            let mut k = kim();
            k.action = action.clone();
            let r = render_generation_prompt(&k).unwrap();
            let back = parse_generated_action(r.target.as_deref().unwrap()).unwrap();
            let norm = action.split_whitespace().collect::<Vec<_>>().join(" ");
            prop_assert_eq!(back.action, norm);
            prop_assert!(back.tagged);
        }

        #[test]
        fn each_label_named_once(ms in prop::sample::subsequence(MotivationLabel::ALL.to_vec(), 1..=5)) {
            let mut k = kim();
            k.motivations = ms.iter().copied().collect();
            let p = render_understanding_prompt(&k, Task::Eu).unwrap();
            for m in &ms {
                prop_assert_eq!(p.matches(m.display_name()).count(), 1);
            }
        }
    }
}
