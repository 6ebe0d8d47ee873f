//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use oas_enrich::dsl::{ArithOp, Assignment, ConstraintExpr, DepOp, LogicOp, Operand, RelOp};
use oas_enrich::value::Value;
use proptest::prelude::*;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(rel: &str) -> String {
    let path = fixtures().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Parameter names used by generated expressions. Includes names that need
/// backtick quoting.
pub const NAMES: [&str; 4] = ["a", "b", "page size", "true"];

fn name() -> impl Strategy<Value = String> {
    prop::sample::select(NAMES.to_vec()).prop_map(String::from)
}

fn number() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.0, 1.0, 2.0, 2.5, -3.0, 1000.0, 0.125])
}

fn nonzero_number() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![1.0, 2.0, 2.5, -3.0, 0.125])
}

fn text() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["x", "", "a\"b", "back\\slash", "ASC"]).prop_map(String::from)
}

fn operand() -> impl Strategy<Value = Operand> {
    let leaf = prop_oneof![
        3 => name().prop_map(Operand::Param),
        2 => number().prop_map(Operand::Number),
        1 => text().prop_map(Operand::Text),
        1 => any::<bool>().prop_map(Operand::Bool),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (
                prop::sample::select(vec![ArithOp::Add, ArithOp::Sub, ArithOp::Mul]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| Operand::arith(op, l, r)),
            (
                inner,
                prop_oneof![
                    name().prop_map(Operand::Param),
                    nonzero_number().prop_map(Operand::Number)
                ]
            )
                .prop_map(|(l, r)| Operand::arith(ArithOp::Div, l, r)),
        ]
    })
}

pub fn expr() -> impl Strategy<Value = ConstraintExpr> {
    let leaf = prop_oneof![
        2 => name().prop_map(ConstraintExpr::Present),
        3 => (prop::sample::select(RelOp::ALL.to_vec()), operand(), operand())
            .prop_map(|(op, l, r)| ConstraintExpr::relational(op, l, r)),
    ];
    leaf.prop_recursive(3, 16, 4, |inner| {
        prop_oneof![
            (
                prop::sample::select(DepOp::ALL.to_vec()),
                prop::collection::vec(inner.clone(), 2..=4)
            )
                .prop_map(|(op, mut args)| {
                    if op == DepOp::Requires {
                        args.truncate(2);
                    }
                    ConstraintExpr::Dependency { op, args }
                }),
            (
                prop::sample::select(vec![LogicOp::And, LogicOp::Or]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| ConstraintExpr::logical(op, l, r)),
            inner.prop_map(ConstraintExpr::negate),
        ]
    })
}

/// Every assignment of `NAMES` over a small domain (absent, 0, 2, "x").
pub fn all_assignments() -> Vec<Assignment> {
    let domain = [
        None,
        Some(Value::Number(0.0)),
        Some(Value::Number(2.0)),
        Some(Value::Text("x".into())),
    ];
    let mut out = vec![Assignment::new()];
    for n in NAMES {
        out = out
            .into_iter()
            .flat_map(|a| {
                domain.iter().map(move |v| {
                    let mut a = a.clone();
                    a.insert(n.to_string(), v.clone());
                    a
                })
            })
            .collect();
    }
    out
}

/// Scripted backend answering from a table keyed by `<parameter>/<kind>`,
/// `<kind>` or `*`; anything else gets "None".
pub fn scripted_from_table(script_json: &str) -> oas_enrich::llm::ScriptedBackend {
    let table: std::collections::BTreeMap<String, String> =
        serde_json::from_str(script_json).expect("script");
    oas_enrich::llm::ScriptedBackend::from_fn(move |request| {
        let answer = request.request_tag.as_ref().and_then(|tag| {
            let kind = tag.rule_kind.as_str();
            table
                .get(&format!("{}/{kind}", tag.descriptor.name))
                .or_else(|| table.get(kind))
                .or_else(|| table.get("*"))
        });
        Ok(answer.cloned().unwrap_or_else(|| "None".to_string()))
    })
}

/// `input` is embedded in `output`: object keys are kept with embedded
/// values, arrays under `x-` keys may grow at the end, all other arrays and
/// scalars are unchanged. Returns the first offending pointer.
pub fn embedded(
    input: &serde_json::Value,
    output: &serde_json::Value,
    at: &str,
    extension: bool,
) -> Result<(), String> {
    use serde_json::Value as J;
    match (input, output) {
        (J::Object(a), J::Object(b)) => {
            for (k, v) in a {
                let ptr = format!("{at}/{}", k.replace('~', "~0").replace('/', "~1"));
                let w = b.get(k).ok_or_else(|| format!("{ptr} removed"))?;
                embedded(v, w, &ptr, k.starts_with("x-"))?;
            }
            Ok(())
        }
        (J::Array(a), J::Array(b)) => {
            if a.len() > b.len() || (!extension && a.len() != b.len()) {
                return Err(format!("{at} array changed length"));
            }
            for (i, (v, w)) in a.iter().zip(b).enumerate() {
                embedded(v, w, &format!("{at}/{i}"), false)?;
            }
            Ok(())
        }
        (a, b) if a == b => Ok(()),
        _ => Err(format!("{at} changed")),
    }
}
