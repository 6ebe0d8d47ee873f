//! Rule types produced by extraction and consumed by the enhancer and the
//! evaluator.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::dsl::{self, ConstraintExpr};
use crate::model::{DescriptorId, OperationId};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Operational,
    ParameterConstraint,
    TypeFormat,
    Examples,
}

impl RuleKind {
    pub const ALL: [RuleKind; 4] = [
        RuleKind::Operational,
        RuleKind::ParameterConstraint,
        RuleKind::TypeFormat,
        RuleKind::Examples,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::Operational => "operational",
            RuleKind::ParameterConstraint => "parameter_constraint",
            RuleKind::TypeFormat => "type_format",
            RuleKind::Examples => "examples",
        }
    }

    pub fn parse(s: &str) -> Option<RuleKind> {
        RuleKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The content of a rule, independent of where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleBody {
    /// Inter-parameter constraint scoped to the operation.
    Operational {
        #[serde(deserialize_with = "expr_or_text")]
        expr: ConstraintExpr,
    },
    ParameterConstraint {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<Value>,
    },
    TypeFormat {
        #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
        oas_type: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        items: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        format: Option<String>,
        #[serde(
            rename = "collectionFormat",
            default,
            skip_serializing_if = "Option::is_none"
        )]
        collection_format: Option<String>,
    },
    Examples {
        values: Vec<Value>,
        /// The values form a closed set (an enumeration).
        #[serde(default)]
        exhaustive: bool,
    },
}

/// Ground-truth files may spell operational constraints as DSL text instead
/// of the AST's JSON form.
fn expr_or_text<'de, D: Deserializer<'de>>(d: D) -> Result<ConstraintExpr, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Text(String),
        Ast(ConstraintExpr),
    }
    match Repr::deserialize(d)? {
        Repr::Text(s) => dsl::parse_constraint(&s).map_err(serde::de::Error::custom),
        Repr::Ast(e) => Ok(e),
    }
}

impl RuleBody {
    pub fn kind(&self) -> RuleKind {
        match self {
            RuleBody::Operational { .. } => RuleKind::Operational,
            RuleBody::ParameterConstraint { .. } => RuleKind::ParameterConstraint,
            RuleBody::TypeFormat { .. } => RuleKind::TypeFormat,
            RuleBody::Examples { .. } => RuleKind::Examples,
        }
    }

    /// Check the structural invariants of a rule.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            RuleBody::ParameterConstraint { min, max, default } => {
                if min.is_none() && max.is_none() && default.is_none() {
                    return Err("parameter constraint without min, max or default".into());
                }
                if let (Some(lo), Some(hi)) = (min, max) {
                    if lo > hi {
                        return Err(format!("min {lo} exceeds max {hi}"));
                    }
                }
                Ok(())
            }
            RuleBody::TypeFormat {
                oas_type,
                items,
                format,
                collection_format,
            } => {
                if oas_type.is_none()
                    && items.is_none()
                    && format.is_none()
                    && collection_format.is_none()
                {
                    return Err("type/format rule without fields".into());
                }
                Ok(())
            }
            RuleBody::Examples { values, .. } => {
                if values.is_empty() {
                    Err("example rule without values".into())
                } else {
                    Ok(())
                }
            }
            RuleBody::Operational { .. } => Ok(()),
        }
    }

    /// Canonical form: constraint expressions canonicalized, example values
    /// deduplicated and sorted.
    pub fn canonical(&self) -> RuleBody {
        match self {
            RuleBody::Operational { expr } => RuleBody::Operational {
                expr: dsl::canonicalize(expr),
            },
            RuleBody::Examples { values, exhaustive } => {
                let mut values = values.clone();
                values.sort_by(Value::canonical_cmp);
                values.dedup();
                RuleBody::Examples {
                    values,
                    exhaustive: *exhaustive,
                }
            }
            other => other.clone(),
        }
    }

    /// Text key under which two rules compare equal iff their canonical
    /// forms are equal.
    pub fn match_key(&self) -> String {
        serde_json::to_string(&self.canonical()).expect("rule bodies always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Cache key of the completion request that produced the rule.
    pub prompt_digest: String,
    pub raw_output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRule {
    /// Descriptor whose description the rule was extracted from.
    pub target: DescriptorId,
    pub body: RuleBody,
    pub provenance: Provenance,
}

impl ExtractedRule {
    pub fn kind(&self) -> RuleKind {
        self.body.kind()
    }

    pub fn scope(&self) -> OperationId {
        self.target.operation()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operational_rule_accepts_text_or_ast() {
        let a: RuleBody =
            serde_json::from_str(r#"{"kind":"operational","expr":"AllOrNone(b, a)"}"#).unwrap();
        let ast = serde_json::to_string(&a).unwrap();
        let b: RuleBody = serde_json::from_str(&ast).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.match_key(), b.match_key());
    }

    #[test]
    fn canonical_examples_are_sorted_sets() {
        let a = RuleBody::Examples {
            values: vec!["DESC".into(), "ASC".into(), "ASC".into()],
            exhaustive: true,
        };
        let b = RuleBody::Examples {
            values: vec!["ASC".into(), "DESC".into()],
            exhaustive: true,
        };
        assert_eq!(a.match_key(), b.match_key());
    }

    #[test]
    fn validation() {
        let bad = RuleBody::ParameterConstraint {
            min: Some(5.0),
            max: Some(1.0),
            default: None,
        };
        assert!(bad.validate().is_err());
        assert!(RuleBody::Examples {
            values: vec![],
            exhaustive: false
        }
        .validate()
        .is_err());
    }

    #[test]
    fn type_format_json_names() {
        let r = RuleBody::TypeFormat {
            oas_type: Some("array".into()),
            items: Some("string".into()),
            format: None,
            collection_format: Some("csv".into()),
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"kind":"type_format","type":"array","items":"string","collectionFormat":"csv"}"#
        );
    }
}
