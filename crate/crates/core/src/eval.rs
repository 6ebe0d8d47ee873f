//! Scoring: rule matching against ground truth, precision/recall/F1, value
//! sampling and value-accuracy reports.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::model::DescriptorId;
use crate::rules::{ExtractedRule, RuleBody, RuleKind};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("duplicate ground-truth entry for {descriptor} ({kind}): {rule}")]
    DuplicateTruth {
        descriptor: DescriptorId,
        kind: RuleKind,
        rule: String,
    },
    #[error("ground truth is empty")]
    EmptyTruth,
    #[error("judgments: {0}")]
    Csv(String),
}

/// One curated rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    #[serde(flatten)]
    pub descriptor: DescriptorId,
    pub rule: RuleBody,
}

impl GroundTruthEntry {
    pub fn service(&self) -> &str {
        &self.descriptor.service
    }
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthEntry>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: GroundTruthEntry =
            serde_json::from_str(line).map_err(|e| DatasetError::Line {
                line: i + 1,
                message: e.to_string(),
            })?;
        entry
            .rule
            .validate()
            .map_err(|message| DatasetError::Line {
                line: i + 1,
                message,
            })?;
        out.push(GroundTruthEntry {
            descriptor: entry.descriptor,
            rule: entry.rule.canonical(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl EvalCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        EvalCounts { tp, fp, fn_ }
    }

    /// Number of ground-truth rules.
    pub fn truth(&self) -> usize {
        self.tp + self.fn_
    }
}

impl std::ops::Add for EvalCounts {
    type Output = EvalCounts;

    fn add(self, o: EvalCounts) -> EvalCounts {
        EvalCounts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

/// Ratios in `[0, 1]`; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// A ratio `num / den` kept exact so percentages round without float error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    fn new(num: usize, den: usize) -> Option<Ratio> {
        (den > 0).then_some(Ratio {
            num: num as u64,
            den: den as u64,
        })
    }

    fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Nearest integer percent, halves rounded up.
    fn percent(self) -> u64 {
        (200 * self.num + self.den) / (2 * self.den)
    }
}

fn ratios(c: EvalCounts) -> [Option<Ratio>; 3] {
    let p = Ratio::new(c.tp, c.tp + c.fp);
    let r = Ratio::new(c.tp, c.tp + c.fn_);
    // 2pr / (p + r) reduces to 2tp / (2tp + fp + fn); with tp = 0 both p
    // and r are zero or undefined, so F1 is undefined.
    let f = if c.tp > 0 {
        Ratio::new(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
    } else {
        None
    };
    [p, r, f]
}

pub fn compute_metrics(counts: EvalCounts) -> EvalMetrics {
    let [p, r, f] = ratios(counts);
    EvalMetrics {
        precision: p.map(Ratio::value),
        recall: r.map(Ratio::value),
        f1: f.map(Ratio::value),
    }
}

/// Integer percentages for display; `None` is undefined.
pub fn metric_percents(counts: EvalCounts) -> [Option<u64>; 3] {
    ratios(counts).map(|r| r.map(Ratio::percent))
}

pub fn format_percent(p: Option<u64>) -> String {
    match p {
        Some(p) => format!("{p}%"),
        None => "N/A".to_string(),
    }
}

/// Matching key: operational constraints are scoped to the operation,
/// everything else to the parameter.
fn match_scope(descriptor: &DescriptorId, rule: &RuleBody) -> (String, RuleKind, String) {
    let scope = match rule {
        RuleBody::Operational { .. } => descriptor.operation().to_string(),
        _ => descriptor.to_string(),
    };
    (scope, rule.kind(), rule.match_key())
}

/// Count matches between extracted rules and ground truth. Extracted rules
/// are deduplicated first; each truth entry matches at most once.
pub fn compare_rules(
    extracted: &[ExtractedRule],
    truth: &[GroundTruthEntry],
) -> Result<EvalCounts, DatasetError> {
    let mut truth_keys = HashSet::new();
    for t in truth {
        if !truth_keys.insert(match_scope(&t.descriptor, &t.rule)) {
            return Err(DatasetError::DuplicateTruth {
                descriptor: t.descriptor.clone(),
                kind: t.rule.kind(),
                rule: t.rule.match_key(),
            });
        }
    }
    let extracted_keys: HashSet<_> = extracted
        .iter()
        .map(|r| match_scope(&r.target, &r.body))
        .collect();
    let tp = extracted_keys.intersection(&truth_keys).count();
    Ok(EvalCounts::new(
        tp,
        extracted_keys.len() - tp,
        truth_keys.len() - tp,
    ))
}

/// [`compare_rules`] per service, keyed by service name.
pub fn compare_by_service(
    extracted: &[ExtractedRule],
    truth: &[GroundTruthEntry],
) -> Result<BTreeMap<String, EvalCounts>, DatasetError> {
    let mut services: BTreeMap<String, (Vec<ExtractedRule>, Vec<GroundTruthEntry>)> =
        BTreeMap::new();
    for r in extracted {
        services
            .entry(r.target.service.clone())
            .or_default()
            .0
            .push(r.clone());
    }
    for t in truth {
        services
            .entry(t.descriptor.service.clone())
            .or_default()
            .1
            .push(t.clone());
    }
    services
        .into_iter()
        .map(|(s, (e, t))| Ok((s, compare_rules(&e, &t)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub service: String,
    pub ground_truth: usize,
    #[serde(flatten)]
    pub counts: EvalCounts,
    pub precision: String,
    pub recall: String,
    pub f1: String,
}

impl EvalRow {
    pub fn new(service: impl Into<String>, counts: EvalCounts) -> Self {
        let [p, r, f] = metric_percents(counts);
        EvalRow {
            service: service.into(),
            ground_truth: counts.truth(),
            counts,
            precision: format_percent(p),
            recall: format_percent(r),
            f1: format_percent(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub services: Vec<EvalRow>,
    pub total: EvalRow,
}

impl EvalReport {
    pub fn from_counts(per_service: &BTreeMap<String, EvalCounts>) -> Self {
        let total = per_service
            .values()
            .fold(EvalCounts::default(), |a, &b| a + b);
        EvalReport {
            services: per_service
                .iter()
                .map(|(s, c)| EvalRow::new(s.clone(), *c))
                .collect(),
            total: EvalRow::new("Total", total),
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Service | Rules in ground truth | TP | FP | FN | Precision | Recall | F1 |\n|---|---:|---:|---:|---:|---:|---:|---:|\n",
        );
        for row in self.services.iter().chain(std::iter::once(&self.total)) {
            let _ = writeln!(out, "{}", row_markdown(row));
        }
        out
    }
}

pub fn row_markdown(row: &EvalRow) -> String {
    format!(
        "| {} | {} | {} | {} | {} | {} | {} | {} |",
        row.service,
        row.ground_truth,
        row.counts.tp,
        row.counts.fp,
        row.counts.fn_,
        row.precision,
        row.recall,
        row.f1
    )
}

// ---------------------------------------------------------------------------
// Value sampling and judgments

/// Up to `n` values drawn uniformly without replacement, deterministic in
/// `seed`. Selected values keep their original relative order.
pub fn sample_values<T: Clone>(values: &[T], n: usize, seed: u64) -> Vec<T> {
    if values.len() <= n {
        return values.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, values.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| values[i].clone()).collect()
}

/// One human verdict on a generated value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueJudgment {
    pub service: String,
    pub path: String,
    pub method: String,
    pub parameter: String,
    pub value: String,
    pub syntactic: bool,
    pub semantic: bool,
    pub judge: String,
}

pub fn parse_judgments(csv_text: &str) -> Result<Vec<ValueJudgment>, DatasetError> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let mut out = Vec::new();
    for (i, record) in reader.deserialize::<ValueJudgment>().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let j = record.map_err(|e| DatasetError::Csv(format!("line {line}: {e}")))?;
        if j.semantic && !j.syntactic {
            return Err(DatasetError::Csv(format!(
                "line {line}: semantically valid value must be syntactically valid"
            )));
        }
        out.push(j);
    }
    Ok(out)
}

pub fn judgments_to_csv(judgments: &[ValueJudgment]) -> Result<String, DatasetError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for j in judgments {
        writer
            .serialize(j)
            .map_err(|e| DatasetError::Csv(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| DatasetError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| DatasetError::Csv(e.to_string()))
}

/// Check a value against declared keywords (type, enum, bounds, pattern,
/// common formats). Meant to pre-fill the syntactic column for judges.
pub fn syntactic_precheck(value: &Value, keywords: &Map<String, Json>) -> Result<(), String> {
    let ty = keywords.get("type").and_then(Json::as_str);
    match (ty, value) {
        (Some("integer"), Value::Number(n)) if n.fract() != 0.0 => {
            return Err(format!("{n} is not an integer"))
        }
        (Some("integer" | "number"), Value::Number(_)) => {}
        (Some("integer" | "number"), v) => return Err(format!("{v} is not numeric")),
        (Some("boolean"), Value::Bool(_)) => {}
        (Some("boolean"), v) => return Err(format!("{v} is not a boolean")),
        _ => {}
    }
    if let Some(Json::Array(allowed)) = keywords.get("enum") {
        if !allowed
            .iter()
            .any(|a| Value::from_json(a).as_ref() == Some(value))
        {
            return Err(format!("{value} is not an allowed value"));
        }
    }
    if let Some(n) = value.as_f64() {
        if keywords
            .get("minimum")
            .and_then(Json::as_f64)
            .is_some_and(|m| n < m)
        {
            return Err(format!("{n} is below the minimum"));
        }
        if keywords
            .get("maximum")
            .and_then(Json::as_f64)
            .is_some_and(|m| n > m)
        {
            return Err(format!("{n} is above the maximum"));
        }
    }
    if let Value::Text(s) = value {
        if let Some(pattern) = keywords.get("pattern").and_then(Json::as_str) {
            let re = regex::Regex::new(pattern).map_err(|e| format!("unusable pattern: {e}"))?;
            if !re.is_match(s) {
                return Err(format!("{s:?} does not match {pattern}"));
            }
        }
        let format_re = match keywords.get("format").and_then(Json::as_str) {
            Some("date") => Some(r"^\d{4}-\d{2}-\d{2}$"),
            Some("date-time") => {
                Some(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:\d{2})$")
            }
            _ => None,
        };
        if let Some(f) = format_re {
            if !regex::Regex::new(f).expect("static pattern").is_match(s) {
                return Err(format!("{s:?} is not in the declared format"));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceAccuracy {
    pub service: String,
    pub judged: usize,
    pub syntactic_valid: usize,
    pub semantic_valid: usize,
    /// Semantically valid share, in percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub services: Vec<ServiceAccuracy>,
    /// Mean of the per-service accuracies.
    pub macro_average: Option<f64>,
    /// Semantically valid share of all judged values.
    pub micro_average: Option<f64>,
    /// Services listed but without judgments.
    pub excluded: Vec<String>,
    /// An externally reported average to reconcile against, if any.
    pub reference_average: Option<f64>,
}

pub fn macro_average(percents: &[f64]) -> Option<f64> {
    (!percents.is_empty()).then(|| percents.iter().sum::<f64>() / percents.len() as f64)
}

/// Per-service accuracy with macro and micro averages. Services in
/// `expected_services` that have no judgments are excluded with a warning.
pub fn accuracy_report(
    judgments: &[ValueJudgment],
    expected_services: &[String],
) -> AccuracyReport {
    let mut by_service: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for j in judgments {
        let e = by_service.entry(j.service.as_str()).or_default();
        e.0 += 1;
        e.1 += usize::from(j.syntactic);
        e.2 += usize::from(j.semantic);
    }
    let excluded: Vec<String> = expected_services
        .iter()
        .filter(|s| !by_service.contains_key(s.as_str()))
        .cloned()
        .collect();
    for s in &excluded {
        log::warn!("service {s} has no judgments; excluded from averages");
    }
    let services: Vec<ServiceAccuracy> = by_service
        .into_iter()
        .map(|(service, (judged, syn, sem))| ServiceAccuracy {
            service: service.to_string(),
            judged,
            syntactic_valid: syn,
            semantic_valid: sem,
            accuracy: 100.0 * sem as f64 / judged as f64,
        })
        .collect();
    let total: usize = services.iter().map(|s| s.judged).sum();
    let valid: usize = services.iter().map(|s| s.semantic_valid).sum();
    AccuracyReport {
        macro_average: macro_average(&services.iter().map(|s| s.accuracy).collect::<Vec<_>>()),
        micro_average: (total > 0).then(|| 100.0 * valid as f64 / total as f64),
        services,
        excluded,
        reference_average: None,
    }
}

fn pct2(x: Option<f64>) -> String {
    match x {
        Some(x) => format!("{x:.2}%"),
        None => "N/A".into(),
    }
}

impl AccuracyReport {
    pub fn with_reference(mut self, reference: Option<f64>) -> Self {
        self.reference_average = reference;
        self
    }

    /// Notes printed under the table: both averages and, when a reference
    /// is set, how far each is from it.
    pub fn footer(&self) -> Vec<String> {
        let mut lines = vec![
            format!(
                "Macro average (mean of per-service accuracies): {}",
                pct2(self.macro_average)
            ),
            format!(
                "Micro average (all judged values pooled): {}",
                pct2(self.micro_average)
            ),
        ];
        if let Some(r) = self.reference_average {
            let diff = |x: Option<f64>| match x {
                Some(x) => format!("{:+.2} points", x - r),
                None => "n/a".into(),
            };
            lines.push(format!(
                "Reference average {r:.2}%: macro differs by {}, micro by {}.",
                diff(self.macro_average),
                diff(self.micro_average)
            ));
        }
        if !self.excluded.is_empty() {
            lines.push(format!(
                "Excluded (no judgments): {}",
                self.excluded.join(", ")
            ));
        }
        lines
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Service | Judged | Syntactically valid | Semantically valid | Accuracy |\n|---|---:|---:|---:|---:|\n");
        for s in &self.services {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.2}% |",
                s.service, s.judged, s.syntactic_valid, s.semantic_valid, s.accuracy
            );
        }
        let _ = writeln!(
            out,
            "| Average (macro) | | | | {} |",
            pct2(self.macro_average)
        );
        let _ = writeln!(
            out,
            "| Average (micro) | | | | {} |",
            pct2(self.micro_average)
        );
        out.push('\n');
        for line in self.footer() {
            let _ = writeln!(out, "{line}");
        }
        out
    }
}
