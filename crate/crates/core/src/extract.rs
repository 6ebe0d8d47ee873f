//! Rule extraction: one completion per rule kind per descriptor, parsed into
//! typed rules.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl;
use crate::llm::{self, Backend, BackendError, CompletionRequest, RequestTag};
use crate::model::{DescriptorId, ParameterDescriptor};
use crate::prompt::{self, PromptError, PromptTemplateSet};
use crate::rules::{ExtractedRule, Provenance, RuleBody, RuleKind};
use crate::value::{self, Value};

const OAS_TYPES: [&str; 7] = [
    "string", "number", "integer", "boolean", "array", "object", "file",
];
const COLLECTION_FORMATS: [&str; 5] = ["csv", "ssv", "tsv", "pipes", "multi"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedLine {
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionDiagnostics {
    pub skipped_lines: Vec<SkippedLine>,
    pub none_responses: usize,
    pub malformed_responses: usize,
}

impl ExtractionDiagnostics {
    pub fn merge(&mut self, other: ExtractionDiagnostics) {
        self.skipped_lines.extend(other.skipped_lines);
        self.none_responses += other.none_responses;
        self.malformed_responses += other.malformed_responses;
    }

    fn skip(&mut self, text: &str, reason: impl Into<String>) {
        self.skipped_lines.push(SkippedLine {
            text: text.to_string(),
            reason: reason.into(),
        });
    }
}

/// Rules parsed from one model response.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedOutput {
    pub rules: Vec<RuleBody>,
    pub diagnostics: ExtractionDiagnostics,
}

/// Parse a response to a prompt of the given kind. Never fails: anything
/// that cannot be read is recorded in the diagnostics.
pub fn parse_model_output(text: &str, kind: RuleKind) -> ParsedOutput {
    parse_model_output_typed(text, kind, None)
}

/// Like [`parse_model_output`], interpreting example values and defaults
/// against a declared OpenAPI type.
pub fn parse_model_output_typed(
    text: &str,
    kind: RuleKind,
    oas_type: Option<&str>,
) -> ParsedOutput {
    let mut diagnostics = ExtractionDiagnostics::default();
    let mut pairs = Vec::new();
    let mut saw_none = false;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if is_none_line(trimmed) {
            saw_none = true;
            continue;
        }
        let found = scan_pairs(trimmed);
        if found.is_empty() {
            // Operational responses sometimes drop the `constraint [...]`
            // wrapper and give the bare expression.
            if kind == RuleKind::Operational {
                let bare = trimmed.trim_end_matches('.').trim_matches('`').trim();
                if let Ok(expr) = dsl::parse_constraint(bare) {
                    pairs.push((
                        trimmed.to_string(),
                        "constraint".to_string(),
                        None,
                        Some(expr),
                    ));
                    continue;
                }
            }
            diagnostics.skip(trimmed, "no `key [value]` pair");
            continue;
        }
        for (key, value) in found {
            pairs.push((trimmed.to_string(), key, Some(value), None));
        }
    }

    let rules = match kind {
        RuleKind::Operational => operational_rules(pairs, &mut diagnostics),
        RuleKind::ParameterConstraint => {
            parameter_constraint_rule(pairs, oas_type, &mut diagnostics)
        }
        RuleKind::TypeFormat => type_format_rule(pairs, &mut diagnostics),
        RuleKind::Examples => examples_rule(pairs, oas_type, &mut diagnostics),
    };
    if rules.is_empty() {
        if saw_none {
            diagnostics.none_responses += 1;
        } else {
            diagnostics.malformed_responses += 1;
        }
    }
    ParsedOutput { rules, diagnostics }
}

/// `None`, optionally quoted, punctuated or behind an `Output:` label.
fn is_none_line(line: &str) -> bool {
    let tail = line.rsplit(':').next().unwrap_or(line);
    let word = tail
        .trim()
        .trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '.' | '*'));
    word.eq_ignore_ascii_case("none")
}

/// Find `key [value]` pairs. Brackets inside values nest; brackets inside
/// double quotes are ignored.
fn scan_pairs(line: &str) -> Vec<(String, String)> {
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].1 != '[' {
            i += 1;
            continue;
        }
        // Key: identifier immediately before the bracket, spaces allowed.
        let mut k_end = i;
        while k_end > 0 && chars[k_end - 1].1 == ' ' {
            k_end -= 1;
        }
        let mut k_start = k_end;
        while k_start > 0
            && (chars[k_start - 1].1.is_ascii_alphanumeric() || chars[k_start - 1].1 == '_')
        {
            k_start -= 1;
        }
        let mut depth = 0usize;
        let mut in_quotes = false;
        let mut close = None;
        for (j, &(_, c)) in chars.iter().enumerate().skip(i) {
            match c {
                '"' => in_quotes = !in_quotes,
                '[' if !in_quotes => depth += 1,
                ']' if !in_quotes => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(j);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(close) = close else { break };
        if k_start < k_end {
            let key = line[chars[k_start].0..chars[k_end].0].to_string();
            let value = line[chars[i].0 + 1..chars[close].0].trim().to_string();
            out.push((key, value));
        }
        i = close + 1;
    }
    out
}

type Pair = (String, String, Option<String>, Option<dsl::ConstraintExpr>);

fn is_null(value: &str) -> bool {
    value.is_empty() || value.eq_ignore_ascii_case("none") || value.eq_ignore_ascii_case("null")
}

fn operational_rules(pairs: Vec<Pair>, diagnostics: &mut ExtractionDiagnostics) -> Vec<RuleBody> {
    let mut rules: Vec<RuleBody> = Vec::new();
    for (line, key, value, parsed) in pairs {
        if !matches!(
            key.to_ascii_lowercase().as_str(),
            "constraint" | "dependency"
        ) {
            diagnostics.skip(
                &line,
                format!("unknown key `{key}` for operational constraints"),
            );
            continue;
        }
        let expr = match (parsed, value) {
            (Some(expr), _) => expr,
            (None, Some(v)) if is_null(&v) => continue,
            (None, Some(v)) => match dsl::parse_constraint(&v) {
                Ok(expr) => expr,
                Err(e) => {
                    diagnostics.skip(&line, format!("constraint does not parse: {e}"));
                    continue;
                }
            },
            (None, None) => continue,
        };
        let rule = RuleBody::Operational {
            expr: dsl::canonicalize(&expr),
        };
        if !rules.contains(&rule) {
            rules.push(rule);
        }
    }
    rules
}

fn parameter_constraint_rule(
    pairs: Vec<Pair>,
    oas_type: Option<&str>,
    diagnostics: &mut ExtractionDiagnostics,
) -> Vec<RuleBody> {
    let (mut min, mut max, mut default) = (None, None, None);
    for (line, key, value, _) in pairs {
        let value = value.unwrap_or_default();
        let slot = match key.to_ascii_lowercase().as_str() {
            "min" | "minimum" => 0,
            "max" | "maximum" => 1,
            "default" => 2,
            _ => {
                diagnostics.skip(
                    &line,
                    format!("unknown key `{key}` for parameter constraints"),
                );
                continue;
            }
        };
        if is_null(&value) {
            continue;
        }
        if slot == 2 {
            if default.is_some() {
                diagnostics.skip(&line, "repeated `default`");
            } else {
                default = Some(Value::coerce(&value, oas_type));
            }
            continue;
        }
        let target = if slot == 0 { &mut min } else { &mut max };
        match value::parse_decimal(value.trim_matches(|c| c == '"' || c == '\'')) {
            Some(_) if target.is_some() => diagnostics.skip(&line, format!("repeated `{key}`")),
            Some(n) => *target = Some(n),
            None => diagnostics.skip(&line, format!("`{key}` is not a number: {value}")),
        }
    }
    if let (Some(lo), Some(hi)) = (min, max) {
        if lo > hi {
            diagnostics.skip(
                &format!("min [{lo}], max [{hi}]"),
                "min exceeds max; bounds dropped",
            );
            min = None;
            max = None;
        }
    }
    let rule = RuleBody::ParameterConstraint { min, max, default };
    if rule.validate().is_ok() {
        vec![rule]
    } else {
        Vec::new()
    }
}

fn type_format_rule(pairs: Vec<Pair>, diagnostics: &mut ExtractionDiagnostics) -> Vec<RuleBody> {
    let (mut oas_type, mut items, mut format, mut collection_format) = (None, None, None, None);
    for (line, key, value, _) in pairs {
        let value = value.unwrap_or_default();
        let value = value
            .trim_matches(|c| c == '"' || c == '\'' || c == '`')
            .trim();
        if is_null(value) {
            continue;
        }
        let (slot, allowed): (&mut Option<String>, Option<&[&str]>) =
            match key.to_ascii_lowercase().as_str() {
                "type" => (&mut oas_type, Some(&OAS_TYPES)),
                "items" => (&mut items, Some(&OAS_TYPES)),
                "format" => (&mut format, None),
                "collectionformat" | "collection_format" => {
                    (&mut collection_format, Some(&COLLECTION_FORMATS))
                }
                _ => {
                    diagnostics.skip(&line, format!("unknown key `{key}` for type/format rules"));
                    continue;
                }
            };
        let normalized = if allowed.is_some() {
            value.to_ascii_lowercase()
        } else {
            value.to_string()
        };
        if let Some(allowed) = allowed {
            if !allowed.contains(&normalized.as_str()) {
                diagnostics.skip(&line, format!("`{key}` value not recognized: {value}"));
                continue;
            }
        }
        if slot.is_some() {
            diagnostics.skip(&line, format!("repeated `{key}`"));
        } else {
            *slot = Some(normalized);
        }
    }
    let rule = RuleBody::TypeFormat {
        oas_type,
        items,
        format,
        collection_format,
    };
    if rule.validate().is_ok() {
        vec![rule]
    } else {
        Vec::new()
    }
}

fn examples_rule(
    pairs: Vec<Pair>,
    oas_type: Option<&str>,
    diagnostics: &mut ExtractionDiagnostics,
) -> Vec<RuleBody> {
    let mut values: Vec<Value> = Vec::new();
    let mut exhaustive = false;
    for (line, key, value, _) in pairs {
        let value = value.unwrap_or_default();
        match key.to_ascii_lowercase().as_str() {
            "example" | "examples" | "value" => {
                if is_null(&value) {
                    continue;
                }
                let v = Value::coerce(&value, oas_type);
                if !values.contains(&v) {
                    values.push(v);
                }
            }
            "exhaustive" | "enum" => match value.to_ascii_lowercase().as_str() {
                "true" | "yes" => exhaustive = true,
                "false" | "no" => exhaustive = false,
                _ => diagnostics.skip(&line, format!("`{key}` is not a boolean: {value}")),
            },
            _ => diagnostics.skip(&line, format!("unknown key `{key}` for example values")),
        }
    }
    if values.is_empty() {
        Vec::new()
    } else {
        vec![RuleBody::Examples { values, exhaustive }]
    }
}

// ---------------------------------------------------------------------------
// Extraction driver

/// Request settings shared by every completion of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSettings {
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub k_shots: usize,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        ExtractionSettings {
            model_name: "gpt-3.5-turbo".into(),
            temperature: llm::DEFAULT_TEMPERATURE,
            max_output_tokens: llm::DEFAULT_MAX_OUTPUT_TOKENS,
            k_shots: prompt::DEFAULT_K_SHOTS,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("{descriptor} ({kind}): {source}")]
    Backend {
        descriptor: DescriptorId,
        kind: RuleKind,
        #[source]
        source: Box<BackendError>,
    },
    #[error("{descriptor} ({kind}): {source}")]
    Prompt {
        descriptor: DescriptorId,
        kind: RuleKind,
        #[source]
        source: Box<PromptError>,
    },
}

impl ExtractionError {
    pub fn descriptor(&self) -> &DescriptorId {
        match self {
            ExtractionError::Backend { descriptor, .. }
            | ExtractionError::Prompt { descriptor, .. } => descriptor,
        }
    }
}

/// Audit record for one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionLogEntry {
    pub descriptor: DescriptorId,
    pub rule_kind: RuleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
    #[serde(default)]
    pub rules: Vec<RuleBody>,
    #[serde(default)]
    pub diagnostics: ExtractionDiagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExtractionLogEntry {
    pub fn extracted_rules(&self) -> Vec<ExtractedRule> {
        let provenance = Provenance {
            prompt_digest: self.prompt_digest.clone().unwrap_or_default(),
            raw_output: self.raw_output.clone().unwrap_or_default(),
        };
        self.rules
            .iter()
            .map(|body| ExtractedRule {
                target: self.descriptor.clone(),
                body: body.clone(),
                provenance: provenance.clone(),
            })
            .collect()
    }
}

/// Result of extracting all four kinds for one descriptor.
#[derive(Debug, Default)]
pub struct DescriptorExtraction {
    pub rules: Vec<ExtractedRule>,
    pub diagnostics: ExtractionDiagnostics,
    pub errors: Vec<ExtractionError>,
    pub log: Vec<ExtractionLogEntry>,
}

fn request_for(
    descriptor: &ParameterDescriptor,
    kind: RuleKind,
    templates: &PromptTemplateSet,
    settings: &ExtractionSettings,
) -> Result<CompletionRequest, PromptError> {
    let bundle = prompt::build_prompt(descriptor, kind, templates, settings.k_shots)?;
    Ok(CompletionRequest {
        messages: prompt::render_messages(&bundle),
        model_name: settings.model_name.clone(),
        temperature: settings.temperature,
        max_output_tokens: settings.max_output_tokens,
        request_tag: Some(RequestTag {
            descriptor: descriptor.id.clone(),
            rule_kind: kind,
        }),
    })
}

/// Extract one rule kind. Returns the parsed output together with its log
/// entry.
fn extract_kind(
    descriptor: &ParameterDescriptor,
    kind: RuleKind,
    backend: &dyn Backend,
    templates: &PromptTemplateSet,
    settings: &ExtractionSettings,
) -> (Result<ParsedOutput, ExtractionError>, ExtractionLogEntry) {
    let mut entry = ExtractionLogEntry {
        descriptor: descriptor.id.clone(),
        rule_kind: kind,
        prompt_digest: None,
        raw_output: None,
        rules: Vec::new(),
        diagnostics: ExtractionDiagnostics::default(),
        error: None,
    };
    let request = match request_for(descriptor, kind, templates, settings) {
        Ok(r) => r,
        Err(source) => {
            entry.error = Some(source.to_string());
            return (
                Err(ExtractionError::Prompt {
                    descriptor: descriptor.id.clone(),
                    kind,
                    source: Box::new(source),
                }),
                entry,
            );
        }
    };
    entry.prompt_digest = Some(llm::cache_key(&request));
    match backend.complete(&request) {
        Ok(result) => {
            let parsed = parse_model_output_typed(&result.text, kind, example_type(descriptor));
            entry.raw_output = Some(result.text);
            entry.rules = parsed.rules.clone();
            entry.diagnostics = parsed.diagnostics.clone();
            (Ok(parsed), entry)
        }
        Err(source) => {
            entry.error = Some(source.to_string());
            (
                Err(ExtractionError::Backend {
                    descriptor: descriptor.id.clone(),
                    kind,
                    source: Box::new(source),
                }),
                entry,
            )
        }
    }
}

/// The type used to read example values and defaults: the declared type
/// for scalars, none for arrays and objects.
fn example_type(descriptor: &ParameterDescriptor) -> Option<&str> {
    descriptor
        .declared_type()
        .filter(|t| !matches!(*t, "array" | "object"))
}

/// Issue the four completions for a descriptor and collect its rules.
/// Failures of one kind are reported without discarding the others.
pub fn extract_rules(
    descriptor: &ParameterDescriptor,
    backend: &dyn Backend,
    templates: &PromptTemplateSet,
    settings: &ExtractionSettings,
) -> DescriptorExtraction {
    let mut out = DescriptorExtraction::default();
    for kind in RuleKind::ALL {
        let (parsed, entry) = extract_kind(descriptor, kind, backend, templates, settings);
        match parsed {
            Ok(parsed) => {
                out.rules.extend(entry.extracted_rules());
                out.diagnostics.merge(parsed.diagnostics);
            }
            Err(e) => {
                log::warn!("extraction failed: {e}");
                out.errors.push(e);
            }
        }
        out.log.push(entry);
    }
    out
}

/// Example values for a descriptor, deduplicated in first-seen order and
/// typed by its declared type.
pub fn generate_example_values(
    descriptor: &ParameterDescriptor,
    backend: &dyn Backend,
    templates: &PromptTemplateSet,
    settings: &ExtractionSettings,
) -> Result<Vec<Value>, ExtractionError> {
    let (parsed, _) = extract_kind(descriptor, RuleKind::Examples, backend, templates, settings);
    Ok(parsed?
        .rules
        .into_iter()
        .flat_map(|r| match r {
            RuleBody::Examples { values, .. } => values,
            _ => Vec::new(),
        })
        .collect())
}

/// Extraction over many descriptors.
#[derive(Debug, Default)]
pub struct ExtractionRun {
    pub rules: Vec<ExtractedRule>,
    pub diagnostics: ExtractionDiagnostics,
    pub errors: Vec<ExtractionError>,
    pub log: Vec<ExtractionLogEntry>,
}

impl ExtractionRun {
    pub fn log_jsonl(&self) -> String {
        log_to_jsonl(&self.log)
    }
}

pub fn log_to_jsonl(entries: &[ExtractionLogEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&serde_json::to_string(entry).expect("log entries serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error)]
#[error("extraction log line {line}: {message}")]
pub struct LogParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse_log_jsonl(text: &str) -> Result<Vec<ExtractionLogEntry>, LogParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LogParseError {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Run [`extract_rules`] over `descriptors` on up to `workers` threads.
/// Output is ordered by descriptor position, independent of completion
/// order.
pub fn extract_all(
    descriptors: &[ParameterDescriptor],
    backend: &dyn Backend,
    templates: &PromptTemplateSet,
    settings: &ExtractionSettings,
    workers: usize,
) -> ExtractionRun {
    let slots: Vec<Mutex<Option<DescriptorExtraction>>> =
        descriptors.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, descriptors.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(descriptor) = descriptors.get(i) else {
                    break;
                };
                let result = extract_rules(descriptor, backend, templates, settings);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });
    let mut run = ExtractionRun::default();
    for slot in slots {
        let one = slot
            .into_inner()
            .expect("slot lock")
            .expect("every descriptor processed");
        run.rules.extend(one.rules);
        run.diagnostics.merge(one.diagnostics);
        run.errors.extend(one.errors);
        run.log.extend(one.log);
    }
    run
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, kind: RuleKind) -> ParsedOutput {
        parse_model_output(text, kind)
    }

    #[test]
    fn parameter_constraint_line() {
        let out = parse(
            "min [1], max [100], default [10]",
            RuleKind::ParameterConstraint,
        );
        assert_eq!(
            out.rules,
            vec![RuleBody::ParameterConstraint {
                min: Some(1.0),
                max: Some(100.0),
                default: Some(Value::Number(10.0))
            }]
        );
        assert!(out.diagnostics.skipped_lines.is_empty());
    }

    #[test]
    fn none_response() {
        for text in ["None", "none.", "\"None\"", "Output: None", "  None\n"] {
            let out = parse(text, RuleKind::Examples);
            assert!(out.rules.is_empty(), "{text}");
            assert_eq!(out.diagnostics.none_responses, 1, "{text}");
            assert_eq!(out.diagnostics.malformed_responses, 0);
        }
    }

    #[test]
    fn type_format_line() {
        let out = parse(
            "type [string], collectionFormat [csv]",
            RuleKind::TypeFormat,
        );
        assert_eq!(
            out.rules,
            vec![RuleBody::TypeFormat {
                oas_type: Some("string".into()),
                items: None,
                format: None,
                collection_format: Some("csv".into())
            }]
        );
    }

    #[test]
    fn prose_is_skipped_not_fatal() {
        let text = "Sure! Here are the values:\nexample [ASC]\nexample [DESC]\nexhaustive [true]\nHope this helps.";
        let out = parse(text, RuleKind::Examples);
        assert_eq!(
            out.rules,
            vec![RuleBody::Examples {
                values: vec!["ASC".into(), "DESC".into()],
                exhaustive: true
            }]
        );
        assert_eq!(out.diagnostics.skipped_lines.len(), 2);
    }

    #[test]
    fn garbage_is_malformed() {
        let out = parse("lorem ipsum", RuleKind::TypeFormat);
        assert!(out.rules.is_empty());
        assert_eq!(out.diagnostics.malformed_responses, 1);
        assert_eq!(out.diagnostics.skipped_lines.len(), 1);
    }

    #[test]
    fn operational_constraints_are_canonical() {
        let out = parse(
            "constraint [AllOrNone(offset, limit)]\nZeroOrOne(b, a)",
            RuleKind::Operational,
        );
        let texts: Vec<String> = out
            .rules
            .iter()
            .map(|r| match r {
                RuleBody::Operational { expr } => expr.to_string(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(texts, ["AllOrNone(limit, offset)", "ZeroOrOne(a, b)"]);
    }

    #[test]
    fn bad_constraint_is_skipped() {
        let out = parse(
            "constraint [Maybe(a, b)]\nconstraint [a < 3]",
            RuleKind::Operational,
        );
        assert_eq!(out.rules.len(), 1);
        assert_eq!(out.diagnostics.skipped_lines.len(), 1);
        assert!(out.diagnostics.skipped_lines[0]
            .reason
            .contains("does not parse"));
    }

    #[test]
    fn examples_with_brackets_and_quotes() {
        let out = parse(
            "example [STNAME:\"West [Virginia]\"]\nexample [[1, 2]]",
            RuleKind::Examples,
        );
        match &out.rules[0] {
            RuleBody::Examples { values, exhaustive } => {
                assert_eq!(
                    values,
                    &vec![
                        Value::from("STNAME:\"West [Virginia]\""),
                        Value::from("[1, 2]")
                    ]
                );
                assert!(!exhaustive);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inverted_bounds_are_dropped() {
        let out = parse(
            "min [10], max [1], default [5]",
            RuleKind::ParameterConstraint,
        );
        assert_eq!(
            out.rules,
            vec![RuleBody::ParameterConstraint {
                min: None,
                max: None,
                default: Some(5.0.into())
            }]
        );
        assert_eq!(out.diagnostics.skipped_lines.len(), 1);
    }

    #[test]
    fn typed_examples() {
        let out = parse_model_output_typed(
            "example [5]\nexample [7]",
            RuleKind::Examples,
            Some("string"),
        );
        assert_eq!(
            out.rules,
            vec![RuleBody::Examples {
                values: vec!["5".into(), "7".into()],
                exhaustive: false
            }]
        );
        let out = parse_model_output_typed("example [\"5\"]", RuleKind::Examples, Some("integer"));
        assert_eq!(
            out.rules,
            vec![RuleBody::Examples {
                values: vec![5.0.into()],
                exhaustive: false
            }]
        );
    }

    #[test]
    fn multibyte_text_does_not_panic() {
        for text in [
            "ü[ß]",
            "[",
            "]]][[",
            "é [",
            "a [\"]",
            "日本 [語] x [",
            "\u{0} [\u{1}]",
        ] {
            for kind in RuleKind::ALL {
                let _ = parse(text, kind);
            }
        }
    }
}
