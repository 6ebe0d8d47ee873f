//! Prompt assembly.
//!
//! Every prompt has four sections (guidelines, cases, grammar highlights,
//! output configurations), a handful of few-shot exchanges and the subject
//! descriptor. Templates are plain-text files, one per rule kind:
//!
//! ```text
//! [GUIDELINES]
//! 1. ...
//! [CASES]
//! Case 1: ...
//! ...
//! Case 10: ...
//! [GRAMMAR]
//! ...
//! [OUTPUT]
//! ...
//! ```
//!
//! Few-shot exchanges live in `few_shot.jsonl`, one
//! `{"rule_kind", "input", "output"}` object per line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ParameterDescriptor;
use crate::rules::RuleKind;

pub const DEFAULT_K_SHOTS: usize = 2;
pub const DEFAULT_TOKEN_BUDGET: usize = 4096;
pub const CASE_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Guidelines,
    Cases,
    GrammarHighlights,
    OutputConfigurations,
}

impl Section {
    pub const ORDER: [Section; 4] = [
        Section::Guidelines,
        Section::Cases,
        Section::GrammarHighlights,
        Section::OutputConfigurations,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Section::Guidelines => "### Guidelines",
            Section::Cases => "### Cases",
            Section::GrammarHighlights => "### Grammar Highlights",
            Section::OutputConfigurations => "### Output Configurations",
        }
    }

    fn marker(self) -> &'static str {
        match self {
            Section::Guidelines => "[GUIDELINES]",
            Section::Cases => "[CASES]",
            Section::GrammarHighlights => "[GRAMMAR]",
            Section::OutputConfigurations => "[OUTPUT]",
        }
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("no prompt template for rule kind `{0}`")]
    MissingKind(RuleKind),
    #[error("template `{source_name}`: {message}")]
    Template {
        source_name: String,
        message: String,
    },
    #[error("few-shot pool line {line}: {message}")]
    FewShot { line: usize, message: String },
    #[error("prompt needs ~{needed} tokens without few-shot examples, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub rule_kind: RuleKind,
    pub input: String,
    pub output: String,
}

/// Template for one rule kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KindTemplate {
    pub guidelines: String,
    /// Exactly ten entries, `cases[i]` is "Case i+1".
    pub cases: Vec<String>,
    pub grammar: String,
    pub output: String,
}

impl KindTemplate {
    /// Parse the sectioned plain-text template format.
    pub fn parse(source_name: &str, text: &str) -> Result<KindTemplate, PromptError> {
        let err = |message: String| PromptError::Template {
            source_name: source_name.to_string(),
            message,
        };
        let mut sections: BTreeMap<Section, String> = BTreeMap::new();
        let mut current: Option<Section> = None;
        for line in text.lines() {
            if let Some(section) = Section::ORDER
                .into_iter()
                .find(|s| line.trim() == s.marker())
            {
                if sections.contains_key(&section) {
                    return Err(err(format!("section {} appears twice", section.marker())));
                }
                sections.insert(section, String::new());
                current = Some(section);
                continue;
            }
            match current {
                Some(s) => {
                    let body = sections.get_mut(&s).expect("inserted on marker");
                    body.push_str(line);
                    body.push('\n');
                }
                None => {
                    if !(line.trim().is_empty() || line.starts_with('#')) {
                        return Err(err("text before the first section marker".into()));
                    }
                }
            }
        }
        let mut take = |s: Section| {
            sections
                .remove(&s)
                .map(|b| b.trim().to_string())
                .filter(|b| !b.is_empty())
                .ok_or_else(|| err(format!("missing or empty section {}", s.marker())))
        };
        let guidelines = take(Section::Guidelines)?;
        let cases_text = take(Section::Cases)?;
        let grammar = take(Section::GrammarHighlights)?;
        let output = take(Section::OutputConfigurations)?;

        let mut cases: Vec<String> = Vec::new();
        for line in cases_text.lines() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let expected = format!("Case {}:", cases.len() + 1);
            if trimmed.starts_with("Case ")
                && trimmed
                    .split_once(':')
                    .is_some_and(|(h, _)| h[5..].trim().parse::<usize>().is_ok())
            {
                if !trimmed.starts_with(&expected) {
                    return Err(err(format!("expected `{expected}`, found `{trimmed}`")));
                }
                cases.push(trimmed.to_string());
            } else if let Some(last) = cases.last_mut() {
                last.push(' ');
                last.push_str(trimmed);
            } else {
                return Err(err(format!("case text before `Case 1:`: `{trimmed}`")));
            }
        }
        if cases.len() != CASE_COUNT {
            return Err(err(format!(
                "expected {CASE_COUNT} cases, found {}",
                cases.len()
            )));
        }
        Ok(KindTemplate {
            guidelines,
            cases,
            grammar,
            output,
        })
    }

    fn section_text(&self, section: Section) -> String {
        match section {
            Section::Guidelines => self.guidelines.clone(),
            Section::Cases => self.cases.join("\n"),
            Section::GrammarHighlights => self.grammar.clone(),
            Section::OutputConfigurations => self.output.clone(),
        }
    }
}

/// Templates for all rule kinds plus the few-shot pool.
#[derive(Debug, Clone)]
pub struct PromptTemplateSet {
    pub kinds: BTreeMap<RuleKind, KindTemplate>,
    pub few_shot: Vec<FewShot>,
    /// Upper bound on the estimated token count of a rendered prompt.
    pub token_budget: usize,
}

const BUILTIN: [(RuleKind, &str); 4] = [
    (
        RuleKind::Operational,
        include_str!("../templates/operational.txt"),
    ),
    (
        RuleKind::ParameterConstraint,
        include_str!("../templates/parameter_constraint.txt"),
    ),
    (
        RuleKind::TypeFormat,
        include_str!("../templates/type_format.txt"),
    ),
    (
        RuleKind::Examples,
        include_str!("../templates/examples.txt"),
    ),
];
const BUILTIN_FEW_SHOT: &str = include_str!("../templates/few_shot.jsonl");

impl PromptTemplateSet {
    /// The templates shipped with the crate.
    pub fn builtin() -> PromptTemplateSet {
        let kinds = BUILTIN
            .iter()
            .map(|(k, text)| {
                (
                    *k,
                    KindTemplate::parse(k.as_str(), text).expect("builtin template is valid"),
                )
            })
            .collect();
        PromptTemplateSet {
            kinds,
            few_shot: parse_few_shot(BUILTIN_FEW_SHOT).expect("builtin few-shot pool is valid"),
            token_budget: DEFAULT_TOKEN_BUDGET,
        }
    }

    /// Load `<kind>.txt` for every rule kind present in `dir`, plus
    /// `few_shot.jsonl` when it exists.
    pub fn load_dir(dir: &Path) -> Result<PromptTemplateSet, PromptError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| PromptError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let mut kinds = BTreeMap::new();
        for kind in RuleKind::ALL {
            let path = dir.join(format!("{}.txt", kind.as_str()));
            if path.exists() {
                kinds.insert(
                    kind,
                    KindTemplate::parse(&path.display().to_string(), &read(&path)?)?,
                );
            }
        }
        let pool = dir.join("few_shot.jsonl");
        let few_shot = if pool.exists() {
            parse_few_shot(&read(&pool)?)?
        } else {
            Vec::new()
        };
        Ok(PromptTemplateSet {
            kinds,
            few_shot,
            token_budget: DEFAULT_TOKEN_BUDGET,
        })
    }

    pub fn template(&self, kind: RuleKind) -> Result<&KindTemplate, PromptError> {
        self.kinds.get(&kind).ok_or(PromptError::MissingKind(kind))
    }
}

pub fn parse_few_shot(text: &str) -> Result<Vec<FewShot>, PromptError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<FewShot>(l).map_err(|e| PromptError::FewShot {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Model-agnostic token estimate: one token per four characters.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub rule_kind: RuleKind,
    pub sections: Vec<(Section, String)>,
    pub few_shot: Vec<FewShot>,
    pub subject: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

impl fmt::Display for ChatMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = match self.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        write!(f, "[{role}]\n{}", self.content)
    }
}

const EMPTY_DESCRIPTION: &str = "(empty)";
const SYSTEM_PREAMBLE: &str =
    "You extract machine-interpretable rules from the natural-language descriptions of REST API parameters.";

/// Render the subject block for one descriptor.
pub fn render_subject(descriptor: &ParameterDescriptor) -> String {
    let keywords =
        serde_json::to_string(&descriptor.machine_keywords).unwrap_or_else(|_| "{}".into());
    let description = match descriptor.description.as_deref() {
        Some(d) if !d.trim().is_empty() => d,
        _ => EMPTY_DESCRIPTION,
    };
    format!(
        "Parameter: {}\nLocation: {}\nOperation: {} {}\nKeywords: {}\nDescription: {}",
        descriptor.id.name,
        descriptor.id.location,
        descriptor.id.method.as_str().to_ascii_uppercase(),
        descriptor.id.path,
        keywords,
        description
    )
}

/// Assemble the prompt for one descriptor and rule kind.
///
/// Few-shot examples are the first `k_shots` pool entries of the kind. When
/// the estimate exceeds the budget they are dropped from the end; the
/// subject is never shortened.
pub fn build_prompt(
    descriptor: &ParameterDescriptor,
    rule_kind: RuleKind,
    templates: &PromptTemplateSet,
    k_shots: usize,
) -> Result<PromptBundle, PromptError> {
    let template = templates.template(rule_kind)?;
    let sections: Vec<(Section, String)> = Section::ORDER
        .into_iter()
        .map(|s| (s, template.section_text(s)))
        .collect();
    let mut bundle = PromptBundle {
        rule_kind,
        sections,
        few_shot: templates
            .few_shot
            .iter()
            .filter(|f| f.rule_kind == rule_kind)
            .take(k_shots)
            .cloned()
            .collect(),
        subject: render_subject(descriptor),
    };
    while bundle.estimated_tokens() > templates.token_budget {
        if bundle.few_shot.pop().is_none() {
            return Err(PromptError::BudgetExceeded {
                needed: bundle.estimated_tokens(),
                budget: templates.token_budget,
            });
        }
    }
    Ok(bundle)
}

impl PromptBundle {
    pub fn system_text(&self) -> String {
        let mut out = String::from(SYSTEM_PREAMBLE);
        for (section, text) in &self.sections {
            out.push_str("\n\n");
            out.push_str(section.header());
            out.push('\n');
            out.push_str(text);
        }
        out
    }

    pub fn estimated_tokens(&self) -> usize {
        render_messages(self)
            .iter()
            .map(|m| estimate_tokens(&m.content))
            .sum()
    }
}

/// One system message, the few-shot exchanges as user/assistant pairs, then
/// the subject as the final user message.
pub fn render_messages(bundle: &PromptBundle) -> Vec<ChatMessage> {
    let mut out = Vec::with_capacity(2 + 2 * bundle.few_shot.len());
    out.push(ChatMessage::new(Role::System, bundle.system_text()));
    for shot in &bundle.few_shot {
        out.push(ChatMessage::new(Role::User, shot.input.clone()));
        out.push(ChatMessage::new(Role::Assistant, shot.output.clone()));
    }
    out.push(ChatMessage::new(Role::User, bundle.subject.clone()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DescriptorId, HttpMethod, ParamLocation};

    fn descriptor(name: &str, description: Option<&str>) -> ParameterDescriptor {
        let mut kw = serde_json::Map::new();
        kw.insert("type".into(), "string".into());
        ParameterDescriptor {
            id: DescriptorId {
                service: "FDIC Bank Data".into(),
                path: "/institutions".into(),
                method: HttpMethod::Get,
                location: ParamLocation::Query,
                name: name.into(),
            },
            required: false,
            machine_keywords: kw,
            description: description.map(str::to_string),
            pointer: String::new(),
            schema_pointer: String::new(),
        }
    }

    fn rendered(bundle: &PromptBundle) -> String {
        render_messages(bundle)
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn builtin_templates_parse() {
        let t = PromptTemplateSet::builtin();
        assert_eq!(t.kinds.len(), 4);
        for kind in RuleKind::ALL {
            let tpl = t.template(kind).unwrap();
            assert_eq!(tpl.cases.len(), 10);
            assert!(tpl.cases[0].contains("Output \"None\""));
            assert!(tpl.cases[9].starts_with("Case 10: For complex relationships"));
            assert!(t.few_shot.iter().filter(|f| f.rule_kind == kind).count() >= DEFAULT_K_SHOTS);
        }
    }

    #[test]
    fn output_keys_depend_on_kind() {
        let t = PromptTemplateSet::builtin();
        let d = descriptor(
            "sort_order",
            Some("Indicator if ascending (ASC) or descending (DESC)"),
        );
        let examples = build_prompt(&d, RuleKind::Examples, &t, 2).unwrap();
        let pc = build_prompt(&d, RuleKind::ParameterConstraint, &t, 2).unwrap();
        let out = |b: &PromptBundle| b.sections[3].1.clone();
        assert!(out(&pc).contains("min [minimum], max [maximum], default [default]"));
        assert!(!out(&examples).contains("min ["));
        assert!(!out(&examples).contains("default ["));
    }

    #[test]
    fn bundle_carries_required_instructions() {
        let t = PromptTemplateSet::builtin();
        let d = descriptor(
            "sort_order",
            Some("Indicator if ascending (ASC) or descending (DESC)"),
        );
        for kind in RuleKind::ALL {
            let b = build_prompt(&d, kind, &t, 2).unwrap();
            let text = rendered(&b);
            assert!(text.contains("Interpret the description in the least constraining way"));
            assert!(text.contains("Output \"None\""));
            assert!(text.contains("'AllOrNone', 'ZeroOrOne'"));
            assert!(b.subject.contains("sort_order"));
            assert!(b
                .subject
                .contains("Indicator if ascending (ASC) or descending (DESC)"));
            for s in Section::ORDER {
                assert_eq!(text.matches(s.header()).count(), 1, "{kind} {s:?}");
            }
        }
    }

    #[test]
    fn empty_description_is_marked() {
        let t = PromptTemplateSet::builtin();
        let b = build_prompt(&descriptor("q", None), RuleKind::Examples, &t, 2).unwrap();
        assert!(b.subject.ends_with("Description: (empty)"));
    }

    #[test]
    fn filters_description_is_verbatim() {
        let t = PromptTemplateSet::builtin();
        let desc = "The filter for the bank search.\nExamples:\n* Filter by State name \n`STNAME:\\\"West Virginia\\\"`";
        let b = build_prompt(
            &descriptor("filters", Some(desc)),
            RuleKind::Examples,
            &t,
            2,
        )
        .unwrap();
        assert!(rendered(&b).contains("STNAME:\\\"West Virginia\\\""));
    }

    #[test]
    fn message_counts() {
        let t = PromptTemplateSet::builtin();
        let d = descriptor("sort_order", Some("x"));
        let b0 = build_prompt(&d, RuleKind::Examples, &t, 0).unwrap();
        assert_eq!(render_messages(&b0).len(), 2);
        let b2 = build_prompt(&d, RuleKind::Examples, &t, 2).unwrap();
        let m = render_messages(&b2);
        assert_eq!(m.len(), 6);
        assert_eq!(m[0].role, Role::System);
        assert_eq!(m[1].role, Role::User);
        assert_eq!(m[2].role, Role::Assistant);
        assert_eq!(m[5].role, Role::User);
        assert_eq!(render_messages(&b2), render_messages(&b2));
    }

    #[test]
    fn budget_drops_few_shots_first() {
        let mut t = PromptTemplateSet::builtin();
        let d = descriptor(
            "sort_order",
            Some("Indicator if ascending (ASC) or descending (DESC)"),
        );
        let full = build_prompt(&d, RuleKind::Examples, &t, 2).unwrap();
        let zero = build_prompt(&d, RuleKind::Examples, &t, 0).unwrap();
        t.token_budget = zero.estimated_tokens() + 1;
        let trimmed = build_prompt(&d, RuleKind::Examples, &t, 2).unwrap();
        assert!(trimmed.few_shot.len() < full.few_shot.len());
        assert_eq!(trimmed.subject, full.subject);
        assert!(trimmed.estimated_tokens() <= t.token_budget);

        t.token_budget = zero.estimated_tokens() - 1;
        assert!(matches!(
            build_prompt(&d, RuleKind::Examples, &t, 2),
            Err(PromptError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn template_errors() {
        let ok = "[GUIDELINES]\ng\n[CASES]\n".to_string()
            + &(1..=10)
                .map(|i| format!("Case {i}: c{i}\n"))
                .collect::<String>()
            + "[GRAMMAR]\ng\n[OUTPUT]\no\n";
        assert!(KindTemplate::parse("t", &ok).is_ok());
        let nine = ok.replace("Case 10: c10\n", "");
        assert!(KindTemplate::parse("t", &nine).is_err());
        let no_output = ok.replace("[OUTPUT]\no\n", "");
        assert!(KindTemplate::parse("t", &no_output).is_err());
        let misnumbered = ok.replace("Case 3:", "Case 4:");
        assert!(KindTemplate::parse("t", &misnumbered).is_err());
    }

    #[test]
    fn missing_kind_is_configuration_error() {
        let mut t = PromptTemplateSet::builtin();
        t.kinds.remove(&RuleKind::TypeFormat);
        let d = descriptor("x", None);
        assert!(matches!(
            build_prompt(&d, RuleKind::TypeFormat, &t, 2),
            Err(PromptError::MissingKind(_))
        ));
    }

    #[test]
    fn load_dir_reads_shipped_files() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
        let loaded = PromptTemplateSet::load_dir(&dir).unwrap();
        let builtin = PromptTemplateSet::builtin();
        assert_eq!(loaded.kinds, builtin.kinds);
        assert_eq!(loaded.few_shot, builtin.few_shot);
    }
}
