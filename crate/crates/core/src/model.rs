//! OpenAPI documents: parsing, the normalized parameter model, and
//! serialization.
//!
//! Both Swagger 2.0 and OpenAPI 3.x documents are read into the same
//! [`ApiSpecification`]. Every query/path/header/cookie/formData parameter
//! and every leaf property of a request body schema becomes one
//! [`ParameterDescriptor`] that keeps the machine-readable keywords apart
//! from the human-readable description. The parsed tree itself is kept in
//! [`ApiSpecification::raw_document`] so that enhancement and
//! re-serialization never lose content.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Yaml,
    Json,
}

impl SourceFormat {
    /// Guess from a file extension (`yaml`, `yml`, `json`).
    pub fn from_extension(ext: &str) -> Option<SourceFormat> {
        match ext.to_ascii_lowercase().as_str() {
            "yaml" | "yml" => Some(SourceFormat::Yaml),
            "json" => Some(SourceFormat::Json),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            SourceFormat::Yaml => "yaml",
            SourceFormat::Json => "json",
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OasVersion {
    /// Swagger 2.0
    V2,
    /// OpenAPI 3.x
    V3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HttpMethod {
    Get,
    Post,
    Put,
    Delete,
    Patch,
    Head,
    Options,
}

impl HttpMethod {
    pub const ALL: [HttpMethod; 7] = [
        HttpMethod::Get,
        HttpMethod::Post,
        HttpMethod::Put,
        HttpMethod::Delete,
        HttpMethod::Patch,
        HttpMethod::Head,
        HttpMethod::Options,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HttpMethod::Get => "get",
            HttpMethod::Post => "post",
            HttpMethod::Put => "put",
            HttpMethod::Delete => "delete",
            HttpMethod::Patch => "patch",
            HttpMethod::Head => "head",
            HttpMethod::Options => "options",
        }
    }

    pub fn parse(s: &str) -> Option<HttpMethod> {
        let lower = s.to_ascii_lowercase();
        HttpMethod::ALL.into_iter().find(|m| m.as_str() == lower)
    }
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamLocation {
    Path,
    Query,
    Header,
    Cookie,
    /// Swagger 2.0 `in: formData`.
    FormData,
    /// A (possibly nested, dotted) property of a request body schema.
    BodyProperty,
}

impl ParamLocation {
    fn from_in(s: &str) -> Option<ParamLocation> {
        match s {
            "path" => Some(ParamLocation::Path),
            "query" => Some(ParamLocation::Query),
            "header" => Some(ParamLocation::Header),
            "cookie" => Some(ParamLocation::Cookie),
            "formData" => Some(ParamLocation::FormData),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamLocation::Path => "path",
            ParamLocation::Query => "query",
            ParamLocation::Header => "header",
            ParamLocation::Cookie => "cookie",
            ParamLocation::FormData => "formData",
            ParamLocation::BodyProperty => "body-property",
        }
    }
}

impl fmt::Display for ParamLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of one parameter across the pipeline: rules, logs and ground
/// truth all refer to descriptors through it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DescriptorId {
    pub service: String,
    pub path: String,
    pub method: HttpMethod,
    pub location: ParamLocation,
    pub name: String,
}

impl DescriptorId {
    pub fn operation(&self) -> OperationId {
        OperationId {
            service: self.service.clone(),
            path: self.path.clone(),
            method: self.method,
        }
    }
}

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{} {}:{}:{}",
            self.service,
            self.method.as_str().to_ascii_uppercase(),
            self.path,
            self.location,
            self.name
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OperationId {
    pub service: String,
    pub path: String,
    pub method: HttpMethod,
}

impl fmt::Display for OperationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{} {}",
            self.service,
            self.method.as_str().to_ascii_uppercase(),
            self.path
        )
    }
}

/// One extraction unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDescriptor {
    pub id: DescriptorId,
    pub required: bool,
    /// Recognized OpenAPI keywords with their values, parameter-level
    /// keywords first, then schema-level ones.
    pub machine_keywords: Map<String, Json>,
    /// Verbatim description (trailing whitespace removed). `None` marks a
    /// parameter without a human-readable part.
    pub description: Option<String>,
    /// JSON pointer of the parameter object (or body property schema).
    pub pointer: String,
    /// JSON pointer of the object holding schema keywords (`type`, `enum`,
    /// ...). Same as `pointer` for Swagger 2.0 non-body parameters and for
    /// body properties.
    pub schema_pointer: String,
}

impl ParameterDescriptor {
    pub fn name(&self) -> &str {
        &self.id.name
    }

    pub fn location(&self) -> ParamLocation {
        self.id.location
    }

    /// Description text, empty when the parameter has none.
    pub fn description_text(&self) -> &str {
        self.description.as_deref().unwrap_or("")
    }

    pub fn declared_type(&self) -> Option<&str> {
        self.machine_keywords.get("type").and_then(Json::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationRecord {
    pub path: String,
    pub method: HttpMethod,
    pub operation_id: Option<String>,
    pub parameters: Vec<ParameterDescriptor>,
    /// Status code to schema reference (`$ref` target, inline type name or
    /// `None` when the response has no schema).
    pub responses: BTreeMap<String, Option<String>>,
    pub pointer: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiSpecification {
    pub source_format: SourceFormat,
    pub oas_version: OasVersion,
    /// The literal `swagger`/`openapi` version string.
    pub version_string: String,
    pub title: String,
    /// Service label used in descriptor identities; defaults to the title.
    pub service: String,
    pub operations: Vec<OperationRecord>,
    pub raw_document: Json,
}

/// Equality ignores the source format: a YAML document and its JSON
/// rendering are the same specification.
impl PartialEq for ApiSpecification {
    fn eq(&self, other: &Self) -> bool {
        self.oas_version == other.oas_version
            && self.version_string == other.version_string
            && self.title == other.title
            && self.service == other.service
            && self.operations == other.operations
            && self.raw_document == other.raw_document
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed {format} at line {line}, column {column}: {message}")]
    Syntax {
        format: SourceFormat,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported document: {0}")]
    Unsupported(String),
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error("external reference `{0}` is not supported")]
    ExternalRef(String),
    #[error("unresolved reference `{0}`")]
    UnresolvedRef(String),
    #[error("duplicate operation {method} {path}")]
    DuplicateOperation { path: String, method: HttpMethod },
    #[error("duplicate {location} parameter `{name}` in {method} {path}")]
    DuplicateParameter {
        path: String,
        method: HttpMethod,
        location: ParamLocation,
        name: String,
    },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

const V2_PARAM_KEYWORDS: &[&str] = &[
    "type",
    "format",
    "items",
    "collectionFormat",
    "enum",
    "minimum",
    "maximum",
    "exclusiveMinimum",
    "exclusiveMaximum",
    "default",
    "pattern",
    "minLength",
    "maxLength",
    "minItems",
    "maxItems",
    "uniqueItems",
    "multipleOf",
    "allowEmptyValue",
];

const V3_PARAM_KEYWORDS: &[&str] = &[
    "style",
    "explode",
    "allowReserved",
    "allowEmptyValue",
    "deprecated",
    "example",
];

const SCHEMA_KEYWORDS: &[&str] = &[
    "type",
    "format",
    "items",
    "enum",
    "minimum",
    "maximum",
    "exclusiveMinimum",
    "exclusiveMaximum",
    "default",
    "pattern",
    "minLength",
    "maxLength",
    "minItems",
    "maxItems",
    "uniqueItems",
    "multipleOf",
    "nullable",
    "example",
];

/// Parse an OpenAPI document. Without a hint, text starting with `{` is read
/// as JSON and everything else as YAML.
pub fn parse_spec(
    document: &str,
    format_hint: Option<SourceFormat>,
) -> Result<ApiSpecification, SpecError> {
    if document.trim().is_empty() {
        return Err(SpecError::Invalid("document is empty".into()));
    }
    let format = format_hint.unwrap_or_else(|| {
        if document.trim_start().starts_with('{') {
            SourceFormat::Json
        } else {
            SourceFormat::Yaml
        }
    });
    let raw = match format {
        SourceFormat::Json => {
            serde_json::from_str::<Json>(document).map_err(|e| SpecError::Syntax {
                format,
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        }
        SourceFormat::Yaml => {
            let yaml: serde_yaml::Value = serde_yaml::from_str(document).map_err(|e| {
                let (line, column) = e
                    .location()
                    .map(|l| (l.line(), l.column()))
                    .unwrap_or((0, 0));
                SpecError::Syntax {
                    format,
                    line,
                    column,
                    message: e.to_string(),
                }
            })?;
            yaml_to_json(yaml)
        }
    };
    from_document(raw, format)
}

/// Build the model from an already parsed tree.
pub fn from_document(
    raw: Json,
    source_format: SourceFormat,
) -> Result<ApiSpecification, SpecError> {
    let root = raw
        .as_object()
        .ok_or_else(|| SpecError::Unsupported("document root is not a mapping".into()))?;
    let (oas_version, version_string) = detect_version(root)?;
    let title = root
        .get("info")
        .and_then(|i| i.get("title"))
        .and_then(Json::as_str)
        .unwrap_or("")
        .to_string();
    let service = title.clone();

    let mut builder = Builder {
        raw: &raw,
        version: oas_version,
        service: &service,
    };
    let operations = match root.get("paths") {
        None | Some(Json::Null) => Vec::new(),
        Some(Json::Object(paths)) => builder.operations(paths)?,
        Some(_) => return Err(SpecError::Invalid("`paths` is not a mapping".into())),
    };

    Ok(ApiSpecification {
        source_format,
        oas_version,
        version_string,
        title,
        service,
        operations,
        raw_document: raw,
    })
}

fn detect_version(root: &Map<String, Json>) -> Result<(OasVersion, String), SpecError> {
    fn text(v: &Json) -> String {
        match v {
            Json::String(s) => s.clone(),
            other => other.to_string(),
        }
    }
    if let Some(v) = root.get("swagger") {
        let s = text(v);
        if s.starts_with('2') {
            return Ok((OasVersion::V2, s));
        }
        return Err(SpecError::Unsupported(format!("swagger version `{s}`")));
    }
    if let Some(v) = root.get("openapi") {
        let s = text(v);
        if s.starts_with("3.") {
            return Ok((OasVersion::V3, s));
        }
        return Err(SpecError::Unsupported(format!("openapi version `{s}`")));
    }
    Err(SpecError::Unsupported(
        "missing `swagger` or `openapi` version key".into(),
    ))
}

/// Convert a YAML tree to JSON; non-string mapping keys are stringified.
fn yaml_to_json(yaml: serde_yaml::Value) -> Json {
    use serde_yaml::Value as Y;
    match yaml {
        Y::Null => Json::Null,
        Y::Bool(b) => Json::Bool(b),
        Y::Number(n) => {
            if let Some(i) = n.as_i64() {
                Json::from(i)
            } else if let Some(u) = n.as_u64() {
                Json::from(u)
            } else {
                n.as_f64()
                    .and_then(serde_json::Number::from_f64)
                    .map(Json::Number)
                    .unwrap_or(Json::Null)
            }
        }
        Y::String(s) => Json::String(s),
        Y::Sequence(items) => Json::Array(items.into_iter().map(yaml_to_json).collect()),
        Y::Mapping(map) => {
            let mut out = Map::new();
            for (k, v) in map {
                let key = match k {
                    Y::String(s) => s,
                    Y::Number(n) => n.to_string(),
                    Y::Bool(b) => b.to_string(),
                    Y::Null => "null".to_string(),
                    other => serde_yaml::to_string(&other)
                        .unwrap_or_default()
                        .trim()
                        .to_string(),
                };
                out.insert(key, yaml_to_json(v));
            }
            Json::Object(out)
        }
        Y::Tagged(tagged) => yaml_to_json(tagged.value),
    }
}

pub(crate) fn escape_pointer_token(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

pub(crate) fn join_pointer(base: &str, token: &str) -> String {
    format!("{base}/{}", escape_pointer_token(token))
}

struct Builder<'a> {
    raw: &'a Json,
    version: OasVersion,
    service: &'a str,
}

/// A node reached after following `$ref`s, with the pointer of its final
/// location.
struct Resolved<'a> {
    node: &'a Json,
    pointer: String,
}

impl<'a> Builder<'a> {
    fn resolve(&self, node: &'a Json, pointer: String) -> Result<Resolved<'a>, SpecError> {
        let mut node = node;
        let mut pointer = pointer;
        let mut seen = HashSet::new();
        while let Some(reference) = node.get("$ref").and_then(Json::as_str) {
            let Some(target) = reference.strip_prefix('#') else {
                return Err(SpecError::ExternalRef(reference.to_string()));
            };
            if !seen.insert(target.to_string()) {
                return Err(SpecError::Invalid(format!(
                    "reference cycle through `{reference}`"
                )));
            }
            node = self
                .raw
                .pointer(target)
                .ok_or_else(|| SpecError::UnresolvedRef(reference.to_string()))?;
            pointer = target.to_string();
        }
        Ok(Resolved { node, pointer })
    }

    fn operations(
        &mut self,
        paths: &'a Map<String, Json>,
    ) -> Result<Vec<OperationRecord>, SpecError> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for (path, item) in paths {
            if path.starts_with("x-") {
                continue;
            }
            let item_ptr = join_pointer("/paths", path);
            let item = self.resolve(item, item_ptr)?;
            let Some(item_obj) = item.node.as_object() else {
                return Err(SpecError::Invalid(format!(
                    "path item `{path}` is not a mapping"
                )));
            };
            let shared = item_obj.get("parameters");
            for (key, op) in item_obj {
                let Some(method) = HttpMethod::parse(key) else {
                    continue;
                };
                if !seen.insert((path.clone(), method)) {
                    return Err(SpecError::DuplicateOperation {
                        path: path.clone(),
                        method,
                    });
                }
                let op_ptr = join_pointer(&item.pointer, key);
                out.push(self.operation(path, method, op, op_ptr, shared, &item.pointer)?);
            }
        }
        Ok(out)
    }

    fn operation(
        &self,
        path: &str,
        method: HttpMethod,
        op: &'a Json,
        op_ptr: String,
        shared: Option<&'a Json>,
        item_ptr: &str,
    ) -> Result<OperationRecord, SpecError> {
        let obj = op.as_object().ok_or_else(|| {
            SpecError::Invalid(format!("operation {method} {path} is not a mapping"))
        })?;

        // (location, name) -> descriptors, operation-level entries override
        // path-level ones.
        let mut params: Vec<ParameterDescriptor> = Vec::new();
        let lists = [
            (shared, join_pointer(item_ptr, "parameters"), false),
            (
                obj.get("parameters"),
                join_pointer(&op_ptr, "parameters"),
                true,
            ),
        ];
        for (list, list_ptr, overrides) in lists {
            let Some(list) = list else { continue };
            let items = list.as_array().ok_or_else(|| {
                SpecError::Invalid(format!("`parameters` of {method} {path} is not a list"))
            })?;
            let mut local = HashSet::new();
            for (i, p) in items.iter().enumerate() {
                let resolved = self.resolve(p, format!("{list_ptr}/{i}"))?;
                let new = self.parameter(path, method, resolved)?;
                for d in new {
                    let key = (d.id.location, d.id.name.clone());
                    if !local.insert(key.clone()) {
                        return Err(SpecError::DuplicateParameter {
                            path: path.to_string(),
                            method,
                            location: key.0,
                            name: key.1,
                        });
                    }
                    if overrides {
                        params.retain(|e| (e.id.location, &e.id.name) != (key.0, &key.1));
                    }
                    params.push(d);
                }
            }
        }

        if self.version == OasVersion::V3 {
            if let Some(body) = obj.get("requestBody") {
                let body = self.resolve(body, join_pointer(&op_ptr, "requestBody"))?;
                let required = body
                    .node
                    .get("required")
                    .and_then(Json::as_bool)
                    .unwrap_or(false);
                if let Some((media_ptr, schema)) = pick_media_schema(body.node, &body.pointer) {
                    let schema = self.resolve(schema, media_ptr)?;
                    let mut out = Vec::new();
                    self.flatten_body(
                        path,
                        method,
                        schema,
                        "",
                        required,
                        "body",
                        &mut Vec::new(),
                        &mut out,
                    )?;
                    params.extend(out);
                }
            }
        }

        let mut responses = BTreeMap::new();
        if let Some(Json::Object(rs)) = obj.get("responses") {
            for (code, r) in rs {
                if code.starts_with("x-") {
                    continue;
                }
                responses.insert(code.clone(), response_schema_ref(r, self.version));
            }
        }

        Ok(OperationRecord {
            path: path.to_string(),
            method,
            operation_id: obj
                .get("operationId")
                .and_then(Json::as_str)
                .map(str::to_string),
            parameters: params,
            responses,
            pointer: op_ptr,
        })
    }

    fn id(
        &self,
        path: &str,
        method: HttpMethod,
        location: ParamLocation,
        name: &str,
    ) -> DescriptorId {
        DescriptorId {
            service: self.service.to_string(),
            path: path.to_string(),
            method,
            location,
            name: name.to_string(),
        }
    }

    fn parameter(
        &self,
        path: &str,
        method: HttpMethod,
        param: Resolved<'a>,
    ) -> Result<Vec<ParameterDescriptor>, SpecError> {
        let obj = param.node.as_object().ok_or_else(|| {
            SpecError::Invalid(format!("parameter at {} is not a mapping", param.pointer))
        })?;
        let name = obj.get("name").and_then(Json::as_str).ok_or_else(|| {
            SpecError::Invalid(format!("parameter at {} has no name", param.pointer))
        })?;
        let location = obj
            .get("in")
            .and_then(Json::as_str)
            .ok_or_else(|| SpecError::Invalid(format!("parameter `{name}` has no `in`")))?;
        let required = obj.get("required").and_then(Json::as_bool).unwrap_or(false);

        if location == "body" {
            if self.version != OasVersion::V2 {
                return Err(SpecError::Invalid(format!(
                    "`in: body` parameter `{name}` in OpenAPI 3"
                )));
            }
            let Some(schema) = obj.get("schema") else {
                return Err(SpecError::Invalid(format!(
                    "body parameter `{name}` has no schema"
                )));
            };
            let schema = self.resolve(schema, join_pointer(&param.pointer, "schema"))?;
            let mut out = Vec::new();
            self.flatten_body(
                path,
                method,
                schema,
                "",
                required,
                name,
                &mut Vec::new(),
                &mut out,
            )?;
            if out.len() == 1 && out[0].id.name == name {
                // Scalar body: the parameter's own description applies.
                if out[0].description.is_none() {
                    out[0].description = description_of(param.node);
                }
            }
            return Ok(out);
        }

        let loc = ParamLocation::from_in(location).ok_or_else(|| {
            SpecError::Invalid(format!(
                "parameter `{name}` has unknown location `{location}`"
            ))
        })?;
        let mut keywords = Map::new();
        let schema_pointer = match self.version {
            OasVersion::V2 => {
                copy_keywords(obj, V2_PARAM_KEYWORDS, &mut keywords);
                param.pointer.clone()
            }
            OasVersion::V3 => {
                copy_keywords(obj, V3_PARAM_KEYWORDS, &mut keywords);
                match obj.get("schema") {
                    Some(schema) => {
                        let schema =
                            self.resolve(schema, join_pointer(&param.pointer, "schema"))?;
                        if let Some(s) = schema.node.as_object() {
                            copy_keywords(s, SCHEMA_KEYWORDS, &mut keywords);
                        }
                        schema.pointer
                    }
                    None => join_pointer(&param.pointer, "schema"),
                }
            }
        };
        Ok(vec![ParameterDescriptor {
            id: self.id(path, method, loc, name),
            required,
            machine_keywords: keywords,
            description: description_of(param.node),
            pointer: param.pointer,
            schema_pointer,
        }])
    }

    /// Emit one descriptor per leaf property of `schema`. A schema without
    /// properties is itself a leaf named `leaf_name`.
    #[allow(clippy::too_many_arguments)]
    fn flatten_body(
        &self,
        path: &str,
        method: HttpMethod,
        schema: Resolved<'a>,
        prefix: &str,
        required: bool,
        leaf_name: &str,
        stack: &mut Vec<String>,
        out: &mut Vec<ParameterDescriptor>,
    ) -> Result<(), SpecError> {
        let props = schema.node.get("properties").and_then(Json::as_object);
        let cyclic = stack.contains(&schema.pointer);
        match props {
            Some(props) if !props.is_empty() && !cyclic => {
                let required_set: HashSet<&str> = schema
                    .node
                    .get("required")
                    .and_then(Json::as_array)
                    .map(|a| a.iter().filter_map(Json::as_str).collect())
                    .unwrap_or_default();
                stack.push(schema.pointer.clone());
                let props_ptr = join_pointer(&schema.pointer, "properties");
                for (prop, sub) in props {
                    let sub = self.resolve(sub, join_pointer(&props_ptr, prop))?;
                    let name = if prefix.is_empty() {
                        prop.clone()
                    } else {
                        format!("{prefix}.{prop}")
                    };
                    self.flatten_body(
                        path,
                        method,
                        sub,
                        &name,
                        required_set.contains(prop.as_str()),
                        &name,
                        stack,
                        out,
                    )?;
                }
                stack.pop();
            }
            _ => {
                let mut keywords = Map::new();
                if let Some(obj) = schema.node.as_object() {
                    copy_keywords(obj, SCHEMA_KEYWORDS, &mut keywords);
                }
                out.push(ParameterDescriptor {
                    id: self.id(path, method, ParamLocation::BodyProperty, leaf_name),
                    required,
                    machine_keywords: keywords,
                    description: description_of(schema.node),
                    pointer: schema.pointer.clone(),
                    schema_pointer: schema.pointer,
                });
            }
        }
        Ok(())
    }
}

fn copy_keywords(src: &Map<String, Json>, allowed: &[&str], out: &mut Map<String, Json>) {
    for key in allowed {
        if let Some(v) = src.get(*key) {
            out.insert((*key).to_string(), v.clone());
        }
    }
}

fn description_of(node: &Json) -> Option<String> {
    node.get("description")
        .and_then(Json::as_str)
        .map(|d| d.trim_end().to_string())
}

fn pick_media_schema<'a>(body: &'a Json, body_ptr: &str) -> Option<(String, &'a Json)> {
    let content = body.get("content")?.as_object()?;
    let (media, entry) = content
        .iter()
        .find(|(k, v)| k.contains("json") && v.get("schema").is_some())
        .or_else(|| content.iter().find(|(_, v)| v.get("schema").is_some()))?;
    let ptr = join_pointer(
        &join_pointer(&join_pointer(body_ptr, "content"), media),
        "schema",
    );
    Some((ptr, entry.get("schema")?))
}

fn response_schema_ref(response: &Json, version: OasVersion) -> Option<String> {
    if let Some(r) = response.get("$ref").and_then(Json::as_str) {
        return Some(r.to_string());
    }
    let schema = match version {
        OasVersion::V2 => response.get("schema"),
        OasVersion::V3 => response
            .get("content")
            .and_then(Json::as_object)
            .and_then(|c| c.values().find_map(|m| m.get("schema"))),
    }?;
    schema
        .get("$ref")
        .and_then(Json::as_str)
        .or_else(|| schema.get("type").and_then(Json::as_str))
        .map(str::to_string)
}

impl ApiSpecification {
    /// Relabel every descriptor with a service name.
    pub fn with_service(mut self, service: impl Into<String>) -> Self {
        let service = service.into();
        for op in &mut self.operations {
            for p in &mut op.parameters {
                p.id.service = service.clone();
            }
        }
        self.service = service;
        self
    }

    pub fn operation(&self, path: &str, method: HttpMethod) -> Option<&OperationRecord> {
        self.operations
            .iter()
            .find(|o| o.path == path && o.method == method)
    }

    pub fn descriptor(&self, id: &DescriptorId) -> Option<&ParameterDescriptor> {
        self.operation(&id.path, id.method)?
            .parameters
            .iter()
            .find(|p| p.id.location == id.location && p.id.name == id.name)
    }

    /// Re-read the model from a (modified) document tree, keeping the
    /// service label and source format.
    pub fn reparse(&self, document: Json) -> Result<ApiSpecification, SpecError> {
        Ok(from_document(document, self.source_format)?.with_service(self.service.clone()))
    }
}

/// All descriptors, ordered by (path, method, location, name).
pub fn extract_descriptors(spec: &ApiSpecification) -> Vec<ParameterDescriptor> {
    let mut all: Vec<ParameterDescriptor> = spec
        .operations
        .iter()
        .flat_map(|o| o.parameters.iter().cloned())
        .collect();
    all.sort_by(|a, b| {
        (&a.id.path, a.id.method, a.id.location, &a.id.name).cmp(&(
            &b.id.path,
            b.id.method,
            b.id.location,
            &b.id.name,
        ))
    });
    all
}

/// Render the document tree.
pub fn serialize_spec(spec: &ApiSpecification, format: SourceFormat) -> Result<String, SpecError> {
    serialize_document(&spec.raw_document, format)
}

pub fn serialize_document(document: &Json, format: SourceFormat) -> Result<String, SpecError> {
    match format {
        SourceFormat::Json => serde_json::to_string_pretty(document)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| SpecError::Serialize(e.to_string())),
        SourceFormat::Yaml => {
            serde_yaml::to_string(document).map_err(|e| SpecError::Serialize(e.to_string()))
        }
    }
}
