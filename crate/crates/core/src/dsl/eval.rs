use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ArithOp, ConstraintExpr, DepOp, LogicOp, Operand, RelOp};
use crate::value::Value;

/// Parameter name to value; a missing key and `None` both mean "absent".
pub type Assignment = BTreeMap<String, Option<Value>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TernaryVerdict {
    Satisfied,
    Violated,
    /// A relational constraint mentions a parameter the request does not carry.
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub verdict: TernaryVerdict,
    pub diagnostics: Vec<String>,
}

pub fn evaluate_constraint(expr: &ConstraintExpr, assignment: &Assignment) -> TernaryVerdict {
    evaluate_with_diagnostics(expr, assignment).verdict
}

/// Evaluate and collect type errors (text compared with a number, division
/// by zero, ...). Such errors yield [`TernaryVerdict::Violated`].
pub fn evaluate_with_diagnostics(expr: &ConstraintExpr, assignment: &Assignment) -> Evaluation {
    let mut diagnostics = Vec::new();
    let verdict = eval(expr, assignment, &mut diagnostics);
    Evaluation {
        verdict,
        diagnostics,
    }
}

fn lookup<'a>(assignment: &'a Assignment, name: &str) -> Option<&'a Value> {
    assignment.get(name).and_then(Option::as_ref)
}

fn eval(expr: &ConstraintExpr, asg: &Assignment, diags: &mut Vec<String>) -> TernaryVerdict {
    use TernaryVerdict::*;
    match expr {
        ConstraintExpr::Present(name) => {
            if lookup(asg, name).is_some() {
                Satisfied
            } else {
                Violated
            }
        }
        ConstraintExpr::Relational { op, lhs, rhs } => {
            let mut params = Vec::new();
            lhs.collect_params(&mut params);
            rhs.collect_params(&mut params);
            if params.iter().any(|p| lookup(asg, p).is_none()) {
                return Inapplicable;
            }
            let (l, r) = match (operand(lhs, asg), operand(rhs, asg)) {
                (Ok(l), Ok(r)) => (l, r),
                (Err(e), _) | (_, Err(e)) => {
                    diags.push(e);
                    return Violated;
                }
            };
            match compare(*op, &l, &r) {
                Ok(true) => Satisfied,
                Ok(false) => Violated,
                Err(e) => {
                    diags.push(e);
                    Violated
                }
            }
        }
        ConstraintExpr::Dependency { op, args } => {
            let held: Vec<bool> = args
                .iter()
                .map(|a| eval(a, asg, diags) == Satisfied)
                .collect();
            let count = held.iter().filter(|h| **h).count();
            let ok = match op {
                DepOp::AllOrNone => count == 0 || count == held.len(),
                DepOp::ZeroOrOne => count <= 1,
                DepOp::OnlyOne => count == 1,
                DepOp::Or => count >= 1,
                DepOp::Requires => !held[0] || held[1],
            };
            if ok {
                Satisfied
            } else {
                Violated
            }
        }
        ConstraintExpr::Logical { op, lhs, rhs } => {
            let l = eval(lhs, asg, diags);
            let r = eval(rhs, asg, diags);
            match op {
                LogicOp::And => {
                    if l == Violated || r == Violated {
                        Violated
                    } else if l == Inapplicable || r == Inapplicable {
                        Inapplicable
                    } else {
                        Satisfied
                    }
                }
                LogicOp::Or => {
                    if l == Satisfied || r == Satisfied {
                        Satisfied
                    } else if l == Inapplicable || r == Inapplicable {
                        Inapplicable
                    } else {
                        Violated
                    }
                }
            }
        }
        ConstraintExpr::Not(inner) => match eval(inner, asg, diags) {
            Satisfied => Violated,
            Violated => Satisfied,
            Inapplicable => Inapplicable,
        },
    }
}

fn operand(op: &Operand, asg: &Assignment) -> Result<Value, String> {
    Ok(match op {
        Operand::Param(name) => lookup(asg, name)
            .cloned()
            .ok_or_else(|| format!("parameter `{name}` is absent"))?,
        Operand::Number(n) => Value::Number(*n),
        Operand::Text(s) => Value::Text(s.clone()),
        Operand::Bool(b) => Value::Bool(*b),
        Operand::Arith { op, lhs, rhs } => {
            let l = operand(lhs, asg)?;
            let r = operand(rhs, asg)?;
            let (Value::Number(a), Value::Number(b)) = (&l, &r) else {
                return Err(format!(
                    "arithmetic `{}` needs numbers, got {} and {}",
                    op.symbol(),
                    l.type_name(),
                    r.type_name()
                ));
            };
            let v = match op {
                ArithOp::Add => a + b,
                ArithOp::Sub => a - b,
                ArithOp::Mul => a * b,
                ArithOp::Div => {
                    if *b == 0.0 {
                        return Err("division by zero".into());
                    }
                    a / b
                }
            };
            if !v.is_finite() {
                return Err(format!("arithmetic `{}` overflowed", op.symbol()));
            }
            Value::Number(v)
        }
    })
}

fn compare(op: RelOp, l: &Value, r: &Value) -> Result<bool, String> {
    use std::cmp::Ordering;
    let ord: Ordering = match (l, r) {
        (Value::Number(a), Value::Number(b)) => a.partial_cmp(b).ok_or("incomparable numbers")?,
        (Value::Text(a), Value::Text(b)) => a.cmp(b),
        (Value::Bool(a), Value::Bool(b)) => {
            return match op {
                RelOp::Eq => Ok(a == b),
                RelOp::Ne => Ok(a != b),
                _ => Err(format!("`{}` is not defined on booleans", op.symbol())),
            }
        }
        _ => {
            return Err(format!(
                "cannot compare {} with {} using `{}`",
                l.type_name(),
                r.type_name(),
                op.symbol()
            ))
        }
    };
    Ok(match op {
        RelOp::Lt => ord.is_lt(),
        RelOp::Gt => ord.is_gt(),
        RelOp::Le => ord.is_le(),
        RelOp::Ge => ord.is_ge(),
        RelOp::Eq => ord.is_eq(),
        RelOp::Ne => ord.is_ne(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_constraint;

    fn asg(pairs: &[(&str, Value)]) -> Assignment {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), Some(v.clone())))
            .collect()
    }

    fn verdict(src: &str, a: &Assignment) -> TernaryVerdict {
        evaluate_constraint(&parse_constraint(src).unwrap(), a)
    }

    #[test]
    fn all_or_none_with_both_present() {
        let a = asg(&[("a", 1.0.into()), ("b", 2.0.into())]);
        assert_eq!(verdict("AllOrNone(a, b)", &a), TernaryVerdict::Satisfied);
    }

    #[test]
    fn zero_or_one_truth_table_by_hand() {
        // (a present, b present) -> expected
        let table = [
            (false, false, TernaryVerdict::Satisfied),
            (true, false, TernaryVerdict::Satisfied),
            (false, true, TernaryVerdict::Satisfied),
            (true, true, TernaryVerdict::Violated),
        ];
        for (pa, pb, want) in table {
            let mut a = Assignment::new();
            a.insert("a".into(), pa.then_some(Value::Number(1.0)));
            a.insert("b".into(), pb.then_some(Value::Number(2.0)));
            assert_eq!(verdict("ZeroOrOne(a, b)", &a), want, "a={pa} b={pb}");
        }
    }

    #[test]
    fn absent_parameter_makes_relation_inapplicable() {
        assert_eq!(
            verdict("x < 10", &Assignment::new()),
            TernaryVerdict::Inapplicable
        );
        let mut a = Assignment::new();
        a.insert("x".into(), None);
        assert_eq!(verdict("x < 10", &a), TernaryVerdict::Inapplicable);
        // presence checks never return inapplicable
        assert_eq!(verdict("x", &a), TernaryVerdict::Violated);
    }

    #[test]
    fn type_mismatch_is_violation_with_diagnostic() {
        let a = asg(&[("x", "ten".into())]);
        let ev = evaluate_with_diagnostics(&parse_constraint("x < 10").unwrap(), &a);
        assert_eq!(ev.verdict, TernaryVerdict::Violated);
        assert_eq!(ev.diagnostics.len(), 1);
        assert!(ev.diagnostics[0].contains("cannot compare text with number"));
    }

    #[test]
    fn division_by_runtime_zero() {
        let a = asg(&[("x", 4.0.into()), ("y", 0.0.into())]);
        let ev = evaluate_with_diagnostics(&parse_constraint("x / y < 1").unwrap(), &a);
        assert_eq!(ev.verdict, TernaryVerdict::Violated);
        assert_eq!(ev.diagnostics, vec!["division by zero".to_string()]);
    }

    #[test]
    fn requires_with_predicate_condition() {
        let e = "Requires(format == \"csv\", delimiter)";
        let a = asg(&[("format", "csv".into())]);
        assert_eq!(verdict(e, &a), TernaryVerdict::Violated);
        let a = asg(&[("format", "json".into())]);
        assert_eq!(verdict(e, &a), TernaryVerdict::Satisfied);
        let a = asg(&[("format", "csv".into()), ("delimiter", ";".into())]);
        assert_eq!(verdict(e, &a), TernaryVerdict::Satisfied);
        // condition inapplicable (format absent) counts as not holding
        assert_eq!(verdict(e, &Assignment::new()), TernaryVerdict::Satisfied);
    }

    #[test]
    fn kleene_connectives() {
        let a = asg(&[("y", 1.0.into())]);
        assert_eq!(verdict("x < 1 && y", &a), TernaryVerdict::Inapplicable);
        assert_eq!(verdict("x < 1 || y", &a), TernaryVerdict::Satisfied);
        assert_eq!(verdict("x < 1 && !y", &a), TernaryVerdict::Violated);
        assert_eq!(verdict("!(x < 1)", &a), TernaryVerdict::Inapplicable);
    }

    #[test]
    fn arithmetic_and_text_ordering() {
        let a = asg(&[("a", 3.0.into()), ("b", 4.0.into()), ("s", "abc".into())]);
        assert_eq!(verdict("a + b * 2 == 11", &a), TernaryVerdict::Satisfied);
        assert_eq!(verdict("s < \"abd\"", &a), TernaryVerdict::Satisfied);
        assert_eq!(verdict("s + 1 > 0", &a), TernaryVerdict::Violated);
    }
}
