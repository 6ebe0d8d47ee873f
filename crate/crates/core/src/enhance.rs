//! Merging extracted rules into a specification document.
//!
//! Placement:
//!
//! | rule | keywords |
//! |------|----------|
//! | parameter constraint | `minimum`, `maximum`, `default` |
//! | type/format | `type`, `items`, `format`, `collectionFormat` (OAS 3: `style`/`explode`) |
//! | closed example set | `enum` |
//! | open example set | `example` (first value) and `x-example-values` |
//! | operational constraint | operation-level `x-dependencies` |
//!
//! Keywords already in the document are never changed. A rule that
//! disagrees with one is recorded as a conflict; a rule that adds nothing is
//! recorded as a duplicate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::dsl;
use crate::model::{
    self, join_pointer, ApiSpecification, DescriptorId, OasVersion, ParamLocation,
    ParameterDescriptor, SpecError,
};
use crate::rules::{ExtractedRule, RuleBody};
use crate::value::{number_to_json, Value};

pub const X_DEPENDENCIES: &str = "x-dependencies";
pub const X_EXAMPLE_VALUES: &str = "x-example-values";

/// Keywords written for one applied rule. `writes` maps keyword pointers to
/// the value stored there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Parameter (or operation) object the rule was placed on.
    pub target: String,
    pub writes: Map<String, Json>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedRule {
    pub rule: ExtractedRule,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordRef {
    pub pointer: String,
    pub value: Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub rule: ExtractedRule,
    /// The keyword the rule disagrees with, when there is one.
    pub existing_keyword: Option<KeywordRef>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateRecord {
    pub rule: ExtractedRule,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct EnhancedSpec {
    pub base: ApiSpecification,
    pub applied: Vec<AppliedRule>,
    pub conflicts: Vec<ConflictRecord>,
    pub duplicates: Vec<DuplicateRecord>,
    pub document: Json,
}

impl EnhancedSpec {
    /// The enhanced document read back as a specification.
    pub fn spec(&self) -> Result<ApiSpecification, SpecError> {
        self.base.reparse(self.document.clone())
    }

    pub fn rule_count(&self) -> usize {
        self.applied.len() + self.conflicts.len() + self.duplicates.len()
    }

    /// JSON report of conflicts and duplicates.
    pub fn conflict_report(&self) -> Json {
        json!({
            "service": self.base.service,
            "applied": self.applied.len(),
            "conflicts": self.conflicts,
            "duplicates": self.duplicates,
        })
    }
}

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("rule targets unknown parameter {0}")]
    UnknownTarget(DescriptorId),
    #[error("pointer {0} does not address an object in the document")]
    BadPointer(String),
}

enum Outcome {
    Apply {
        target: String,
        writes: Vec<(String, Json)>,
    },
    Duplicate(String),
    Conflict {
        existing: Option<KeywordRef>,
        reason: String,
    },
}

fn conflict(pointer: &str, value: &Json, reason: String) -> Outcome {
    Outcome::Conflict {
        existing: Some(KeywordRef {
            pointer: pointer.to_string(),
            value: value.clone(),
        }),
        reason,
    }
}

/// Merge `rules` into the document of `spec`, in order.
pub fn enhance(
    spec: &ApiSpecification,
    rules: &[ExtractedRule],
) -> Result<EnhancedSpec, EnhanceError> {
    let mut out = EnhancedSpec {
        base: spec.clone(),
        applied: Vec::new(),
        conflicts: Vec::new(),
        duplicates: Vec::new(),
        document: spec.raw_document.clone(),
    };
    for rule in rules {
        let descriptor = spec
            .descriptor(&rule.target)
            .ok_or_else(|| EnhanceError::UnknownTarget(rule.target.clone()))?;
        let outcome = plan(spec, descriptor, rule, &out.document);
        match outcome {
            Outcome::Apply { target, writes } => {
                let mut map = Map::new();
                for (pointer, value) in writes {
                    write(&mut out.document, &pointer, value.clone())?;
                    map.insert(pointer, value);
                }
                out.applied.push(AppliedRule {
                    rule: rule.clone(),
                    placement: Placement {
                        target,
                        writes: map,
                    },
                });
            }
            Outcome::Duplicate(reason) => {
                log::debug!("duplicate rule for {}: {reason}", rule.target);
                out.duplicates.push(DuplicateRecord {
                    rule: rule.clone(),
                    reason,
                });
            }
            Outcome::Conflict { existing, reason } => {
                log::info!("conflict for {}: {reason}", rule.target);
                out.conflicts.push(ConflictRecord {
                    rule: rule.clone(),
                    existing_keyword: existing,
                    reason,
                });
            }
        }
    }
    Ok(out)
}

/// Set `pointer` to `value`, creating the final object level if needed.
fn write(doc: &mut Json, pointer: &str, value: Json) -> Result<(), EnhanceError> {
    let (parent, key) = pointer
        .rsplit_once('/')
        .ok_or_else(|| EnhanceError::BadPointer(pointer.into()))?;
    let key = key.replace("~1", "/").replace("~0", "~");
    if doc.pointer(parent).is_none() {
        write(doc, parent, Json::Object(Map::new()))?;
    }
    match doc.pointer_mut(parent) {
        Some(Json::Object(obj)) => {
            obj.insert(key, value);
            Ok(())
        }
        _ => Err(EnhanceError::BadPointer(parent.into())),
    }
}

/// Keyword values as currently in the document.
struct View<'a> {
    doc: &'a Json,
    param_ptr: &'a str,
    schema_ptr: &'a str,
}

impl View<'_> {
    fn schema_ptr(&self, key: &str) -> String {
        join_pointer(self.schema_ptr, key)
    }

    fn param_ptr(&self, key: &str) -> String {
        join_pointer(self.param_ptr, key)
    }

    fn schema(&self, key: &str) -> Option<&Json> {
        self.doc.pointer(&self.schema_ptr(key))
    }

    fn param(&self, key: &str) -> Option<&Json> {
        self.doc.pointer(&self.param_ptr(key))
    }

    fn declared_type(&self) -> Option<&str> {
        self.schema("type").and_then(Json::as_str)
    }
}

fn plan(
    spec: &ApiSpecification,
    descriptor: &ParameterDescriptor,
    rule: &ExtractedRule,
    doc: &Json,
) -> Outcome {
    let view = View {
        doc,
        param_ptr: &descriptor.pointer,
        schema_ptr: &descriptor.schema_pointer,
    };
    match &rule.body {
        RuleBody::Operational { expr } => plan_operational(spec, descriptor, expr, doc),
        RuleBody::ParameterConstraint { min, max, default } => {
            plan_bounds(&view, *min, *max, default.as_ref())
        }
        RuleBody::TypeFormat {
            oas_type,
            items,
            format,
            collection_format,
        } => plan_type_format(
            spec.oas_version,
            descriptor.id.location,
            &view,
            oas_type.as_deref(),
            items.as_deref(),
            format.as_deref(),
            collection_format.as_deref(),
        ),
        RuleBody::Examples { values, exhaustive } => {
            if *exhaustive {
                plan_enum(&view, values)
            } else {
                plan_examples(&view, values)
            }
        }
    }
}

fn plan_operational(
    spec: &ApiSpecification,
    descriptor: &ParameterDescriptor,
    expr: &dsl::ConstraintExpr,
    doc: &Json,
) -> Outcome {
    let op = spec
        .operation(&descriptor.id.path, descriptor.id.method)
        .expect("descriptor belongs to an operation");
    let known: BTreeSet<&str> = op.parameters.iter().map(|p| p.id.name.as_str()).collect();
    if let Some(unknown) = expr.parameters().into_iter().find(|p| !known.contains(p)) {
        return Outcome::Conflict {
            existing: None,
            reason: format!(
                "binding: `{unknown}` is not a parameter of {} {}",
                op.method, op.path
            ),
        };
    }
    let text = dsl::canonicalize(expr).to_string();
    let pointer = join_pointer(&op.pointer, X_DEPENDENCIES);
    let mut list = match doc.pointer(&pointer) {
        None => Vec::new(),
        Some(Json::Array(items)) => items.clone(),
        Some(other) => {
            return conflict(
                &pointer,
                other,
                format!("binding: {X_DEPENDENCIES} is not a list"),
            )
        }
    };
    if list.iter().any(|e| e.as_str() == Some(text.as_str())) {
        return Outcome::Duplicate(format!("{X_DEPENDENCIES} already holds `{text}`"));
    }
    list.push(Json::String(text));
    Outcome::Apply {
        target: op.pointer.clone(),
        writes: vec![(pointer, Json::Array(list))],
    }
}

fn json_f64(v: &Json) -> Option<f64> {
    v.as_f64()
}

/// Whether a value fits a declared OpenAPI type.
fn fits_type(value: &Value, oas_type: Option<&str>) -> bool {
    match (oas_type, value) {
        (Some("integer"), Value::Number(n)) => n.fract() == 0.0,
        (Some("integer" | "number"), _) => false,
        (Some("string"), v) => matches!(v, Value::Text(_)),
        (Some("boolean"), v) => matches!(v, Value::Bool(_)),
        _ => true,
    }
}

fn plan_bounds(
    view: &View<'_>,
    min: Option<f64>,
    max: Option<f64>,
    default: Option<&Value>,
) -> Outcome {
    let mut writes = Vec::new();
    let declared = view.declared_type();
    let mut lo = view.schema("minimum").and_then(json_f64);
    let mut hi = view.schema("maximum").and_then(json_f64);

    for (key, new) in [("minimum", min), ("maximum", max)] {
        let Some(new) = new else { continue };
        if let Some(t) = declared.filter(|t| !matches!(*t, "integer" | "number")) {
            let ptr = view.schema_ptr("type");
            return conflict(
                &ptr,
                &json!(t),
                format!("numeric-bound: `{key}` on a {t} parameter"),
            );
        }
        let ptr = view.schema_ptr(key);
        match view.schema(key) {
            Some(existing) if existing.as_f64() == Some(new) => {}
            Some(existing) => {
                return conflict(
                    &ptr,
                    existing,
                    format!("keyword-mismatch: `{key}` is already {existing}"),
                )
            }
            None => {
                let other_key = if key == "minimum" {
                    "maximum"
                } else {
                    "minimum"
                };
                let violates = match key {
                    "minimum" => hi.is_some_and(|h| new > h),
                    _ => lo.is_some_and(|l| new < l),
                };
                if violates {
                    let other = view.schema(other_key).cloned().unwrap_or(Json::Null);
                    return conflict(
                        &view.schema_ptr(other_key),
                        &other,
                        format!("range: `{key}` {new} crosses `{other_key}`"),
                    );
                }
                if key == "minimum" {
                    lo = Some(new);
                } else {
                    hi = Some(new);
                }
                writes.push((ptr, number_to_json(new)));
            }
        }
    }

    if let Some(default) = default {
        let ptr = view.schema_ptr("default");
        let as_json = default.to_json();
        match view.schema("default") {
            Some(existing) if Value::from_json(existing).as_ref() == Some(default) => {}
            Some(existing) => {
                return conflict(
                    &ptr,
                    existing,
                    format!("keyword-mismatch: `default` is already {existing}"),
                );
            }
            None => {
                if !fits_type(default, declared) {
                    let t = declared.unwrap_or_default();
                    return conflict(
                        &view.schema_ptr("type"),
                        &json!(t),
                        format!("type: default {default} is not of type {t}"),
                    );
                }
                if let Some(n) = default.as_f64() {
                    if lo.is_some_and(|l| n < l) || hi.is_some_and(|h| n > h) {
                        return Outcome::Conflict {
                            existing: None,
                            reason: format!("range: default {n} outside the declared bounds"),
                        };
                    }
                }
                if let Some(Json::Array(allowed)) = view.schema("enum") {
                    if !allowed
                        .iter()
                        .any(|a| Value::from_json(a).as_ref() == Some(default))
                    {
                        return conflict(
                            &view.schema_ptr("enum"),
                            &Json::Array(allowed.clone()),
                            format!("enum: default {default} is not an allowed value"),
                        );
                    }
                }
                writes.push((ptr, as_json));
            }
        }
    }

    if writes.is_empty() {
        Outcome::Duplicate("bounds and default already declared".into())
    } else {
        Outcome::Apply {
            target: view.param_ptr.to_string(),
            writes,
        }
    }
}

/// OAS 3 `style`/`explode` equivalent of a Swagger 2.0 collection format.
fn style_for(collection_format: &str) -> Option<(&'static str, bool)> {
    match collection_format {
        "csv" => Some(("form", false)),
        "ssv" => Some(("spaceDelimited", false)),
        "pipes" => Some(("pipeDelimited", false)),
        "multi" => Some(("form", true)),
        _ => None,
    }
}

#[allow(clippy::too_many_arguments)]
fn plan_type_format(
    version: OasVersion,
    location: ParamLocation,
    view: &View<'_>,
    oas_type: Option<&str>,
    items: Option<&str>,
    format: Option<&str>,
    collection_format: Option<&str>,
) -> Outcome {
    let mut writes = Vec::new();
    let mut effective_type = view.declared_type().map(str::to_string);

    if let Some(t) = oas_type {
        let ptr = view.schema_ptr("type");
        match view.schema("type") {
            Some(existing) if existing.as_str() == Some(t) => {}
            Some(existing) => {
                return conflict(
                    &ptr,
                    existing,
                    format!("type: parameter is declared {existing}, rule says {t}"),
                )
            }
            None => {
                effective_type = Some(t.to_string());
                writes.push((ptr, json!(t)));
            }
        }
    }

    if let Some(item_type) = items {
        if effective_type.as_deref() != Some("array") {
            return Outcome::Conflict {
                existing: None,
                reason: "items: item type on a non-array parameter".into(),
            };
        }
        let ptr = join_pointer(&view.schema_ptr("items"), "type");
        match view.doc.pointer(&ptr) {
            Some(existing) if existing.as_str() == Some(item_type) => {}
            Some(existing) => {
                return conflict(
                    &ptr,
                    existing,
                    format!("items: item type is declared {existing}"),
                )
            }
            None => writes.push((ptr, json!(item_type))),
        }
    }

    if let Some(f) = format {
        let ptr = view.schema_ptr("format");
        match view.schema("format") {
            Some(existing) if existing.as_str() == Some(f) => {}
            Some(existing) => {
                return conflict(
                    &ptr,
                    existing,
                    format!("format: parameter is declared {existing}"),
                )
            }
            None => writes.push((ptr, json!(f))),
        }
    }

    if let Some(cf) = collection_format {
        if effective_type.as_deref() != Some("array") {
            let t = effective_type
                .clone()
                .map(Json::String)
                .unwrap_or(Json::Null);
            return conflict(
                &view.schema_ptr("type"),
                &t,
                format!("collectionFormat: `{cf}` needs an array parameter"),
            );
        }
        if location == ParamLocation::BodyProperty {
            return Outcome::Conflict {
                existing: None,
                reason: "collectionFormat: not applicable to body properties".into(),
            };
        }
        match version {
            OasVersion::V2 => {
                let ptr = view.param_ptr("collectionFormat");
                match view.param("collectionFormat") {
                    Some(existing) if existing.as_str() == Some(cf) => {}
                    Some(existing) => {
                        return conflict(
                            &ptr,
                            existing,
                            format!("collectionFormat: parameter is declared {existing}"),
                        )
                    }
                    None => writes.push((ptr, json!(cf))),
                }
            }
            OasVersion::V3 => {
                let Some((style, explode)) = style_for(cf) else {
                    return Outcome::Conflict {
                        existing: None,
                        reason: format!("collectionFormat: `{cf}` has no OpenAPI 3 style"),
                    };
                };
                for (key, value) in [("style", json!(style)), ("explode", json!(explode))] {
                    let ptr = view.param_ptr(key);
                    match view.param(key) {
                        Some(existing) if *existing == value => {}
                        Some(existing) => {
                            return conflict(
                                &ptr,
                                existing,
                                format!("collectionFormat: `{key}` is declared {existing}"),
                            )
                        }
                        None => writes.push((ptr, value)),
                    }
                }
            }
        }
    }

    if writes.is_empty() {
        Outcome::Duplicate("type and format already declared".into())
    } else {
        Outcome::Apply {
            target: view.param_ptr.to_string(),
            writes,
        }
    }
}

/// Pointer of the object that holds value keywords: `items` for arrays.
fn value_schema(view: &View<'_>) -> Result<String, Outcome> {
    if view.declared_type() == Some("array") {
        let items = view.schema_ptr("items");
        match view.doc.pointer(&items) {
            Some(Json::Object(_)) => Ok(items),
            _ => Err(Outcome::Conflict {
                existing: None,
                reason: "items: array parameter without item schema".into(),
            }),
        }
    } else {
        Ok(view.schema_ptr.to_string())
    }
}

fn check_values(view: &View<'_>, holder: &str, values: &[Value]) -> Option<Outcome> {
    let item_type = view
        .doc
        .pointer(&join_pointer(holder, "type"))
        .and_then(Json::as_str);
    for v in values {
        if !fits_type(v, item_type) {
            let t = item_type.unwrap_or_default();
            return Some(conflict(
                &join_pointer(holder, "type"),
                &json!(t),
                format!("type: value {v} is not of type {t}"),
            ));
        }
        if let Some(n) = v.as_f64() {
            for key in ["minimum", "maximum"] {
                if let Some(bound) = view
                    .doc
                    .pointer(&join_pointer(holder, key))
                    .and_then(Json::as_f64)
                {
                    let bad = if key == "minimum" {
                        n < bound
                    } else {
                        n > bound
                    };
                    if bad {
                        return Some(conflict(
                            &join_pointer(holder, key),
                            &json!(bound),
                            format!("range: value {n} outside `{key}`"),
                        ));
                    }
                }
            }
        }
    }
    None
}

fn plan_enum(view: &View<'_>, values: &[Value]) -> Outcome {
    let holder = match value_schema(view) {
        Ok(h) => h,
        Err(o) => return o,
    };
    if let Some(c) = check_values(view, &holder, values) {
        return c;
    }
    let ptr = join_pointer(&holder, "enum");
    let mut set: Vec<Json> = Vec::new();
    for v in values {
        let j = v.to_json();
        if !set.contains(&j) {
            set.push(j);
        }
    }
    if let Some(existing) = view.doc.pointer(&ptr) {
        let same = existing.as_array().is_some_and(|e| {
            e.len() == set.len() && set.iter().all(|v| e.iter().any(|x| values_equal(x, v)))
        });
        return if same {
            Outcome::Duplicate("enum already declares these values".into())
        } else {
            conflict(
                &ptr,
                existing,
                format!("enum: parameter already declares {existing}"),
            )
        };
    }
    if let Some(default) = view.doc.pointer(&join_pointer(&holder, "default")) {
        if !set.iter().any(|v| values_equal(v, default)) {
            return conflict(
                &join_pointer(&holder, "default"),
                default,
                format!("enum: declared default {default} is not among the values"),
            );
        }
    }
    Outcome::Apply {
        target: view.param_ptr.to_string(),
        writes: vec![(ptr, Json::Array(set))],
    }
}

/// JSON equality that treats `1` and `1.0` alike.
fn values_equal(a: &Json, b: &Json) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

fn plan_examples(view: &View<'_>, values: &[Value]) -> Outcome {
    let holder = view.schema_ptr.to_string();
    let enum_holder = match value_schema(view) {
        Ok(h) => h,
        Err(_) => holder.clone(),
    };
    if let Some(c) = check_values(view, &enum_holder, values) {
        return c;
    }
    if let Some(Json::Array(allowed)) = view.doc.pointer(&join_pointer(&enum_holder, "enum")) {
        if let Some(v) = values
            .iter()
            .find(|v| !allowed.iter().any(|a| values_equal(a, &v.to_json())))
        {
            return conflict(
                &join_pointer(&enum_holder, "enum"),
                &Json::Array(allowed.clone()),
                format!("enum: example {v} is not an allowed value"),
            );
        }
    }
    let mut writes = Vec::new();
    let example_ptr = join_pointer(&holder, "example");
    if view.doc.pointer(&example_ptr).is_none() {
        writes.push((example_ptr, values[0].to_json()));
    }
    let list_ptr = join_pointer(&holder, X_EXAMPLE_VALUES);
    let mut list = match view.doc.pointer(&list_ptr) {
        None => Vec::new(),
        Some(Json::Array(items)) => items.clone(),
        Some(other) => {
            return conflict(
                &list_ptr,
                other,
                format!("examples: {X_EXAMPLE_VALUES} is not a list"),
            )
        }
    };
    let before = list.len();
    for v in values {
        let j = v.to_json();
        if !list.iter().any(|x| values_equal(x, &j)) {
            list.push(j);
        }
    }
    if list.len() > before {
        writes.push((list_ptr, Json::Array(list)));
    }
    if writes.is_empty() {
        Outcome::Duplicate("example values already listed".into())
    } else {
        Outcome::Apply {
            target: view.param_ptr.to_string(),
            writes,
        }
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// `style` is only meaningful for array and object parameters.
    StyleOnScalar,
    RangeInverted,
    DefaultOutOfRange,
    DefaultNotInEnum,
    CollectionFormatOnNonArray,
    UnparsableDependency,
    UnreadableDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub pointer: String,
    pub check: Check,
    pub message: String,
}

pub fn validate_enhanced(enhanced: &EnhancedSpec) -> Vec<Diagnostic> {
    validate_document(&enhanced.document, enhanced.base.source_format)
}

/// Consistency checks over a specification document.
pub fn validate_document(document: &Json, format: model::SourceFormat) -> Vec<Diagnostic> {
    let spec = match model::from_document(document.clone(), format) {
        Ok(s) => s,
        Err(e) => {
            return vec![Diagnostic {
                pointer: String::new(),
                check: Check::UnreadableDocument,
                message: e.to_string(),
            }]
        }
    };
    let mut out: Vec<Diagnostic> = Vec::new();
    let mut push = |pointer: &str, check: Check, message: String| {
        if !out.iter().any(|d| d.pointer == pointer && d.check == check) {
            out.push(Diagnostic {
                pointer: pointer.to_string(),
                check,
                message,
            });
        }
    };

    for op in &spec.operations {
        match document.pointer(&join_pointer(&op.pointer, X_DEPENDENCIES)) {
            None => {}
            Some(Json::Array(entries)) => {
                for (i, entry) in entries.iter().enumerate() {
                    let ptr =
                        join_pointer(&join_pointer(&op.pointer, X_DEPENDENCIES), &i.to_string());
                    match entry.as_str().map(dsl::parse_constraint) {
                        Some(Ok(_)) => {}
                        Some(Err(e)) => push(
                            &ptr,
                            Check::UnparsableDependency,
                            format!("does not parse: {e}"),
                        ),
                        None => push(
                            &ptr,
                            Check::UnparsableDependency,
                            "entry is not a string".into(),
                        ),
                    }
                }
            }
            Some(_) => push(
                &op.pointer,
                Check::UnparsableDependency,
                format!("{X_DEPENDENCIES} is not a list"),
            ),
        }

        for p in &op.parameters {
            let kw = &p.machine_keywords;
            let ty = p.declared_type();
            if kw.contains_key("style") && !matches!(ty, Some("array" | "object")) {
                push(
                    &join_pointer(&p.pointer, "style"),
                    Check::StyleOnScalar,
                    format!(
                        "`style` is only allowed on array or object parameters, `{}` is {}",
                        p.id.name,
                        ty.unwrap_or("untyped")
                    ),
                );
            }
            if kw.contains_key("collectionFormat") && ty != Some("array") {
                push(
                    &join_pointer(&p.pointer, "collectionFormat"),
                    Check::CollectionFormatOnNonArray,
                    format!("`collectionFormat` on non-array parameter `{}`", p.id.name),
                );
            }
            let lo = kw.get("minimum").and_then(Json::as_f64);
            let hi = kw.get("maximum").and_then(Json::as_f64);
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if lo > hi {
                    push(
                        &join_pointer(&p.schema_pointer, "minimum"),
                        Check::RangeInverted,
                        format!("`{}` has minimum {lo} above maximum {hi}", p.id.name),
                    );
                }
            }
            if let Some(default) = kw.get("default") {
                let ptr = join_pointer(&p.schema_pointer, "default");
                if let Some(d) = default.as_f64() {
                    if lo.is_some_and(|l| d < l) || hi.is_some_and(|h| d > h) {
                        push(
                            &ptr,
                            Check::DefaultOutOfRange,
                            format!("default {d} of `{}` is outside its bounds", p.id.name),
                        );
                    }
                }
                if let Some(Json::Array(allowed)) = kw.get("enum") {
                    if !allowed.iter().any(|a| values_equal(a, default)) {
                        push(
                            &ptr,
                            Check::DefaultNotInEnum,
                            format!("default {default} of `{}` is not in its enum", p.id.name),
                        );
                    }
                }
            }
        }
    }
    out
}
