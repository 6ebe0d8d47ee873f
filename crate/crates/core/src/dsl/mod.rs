//! The inter-parameter constraint language.
//!
//! Surface syntax:
//!
//! ```text
//! AllOrNone(limit, offset)
//! Requires(format == "csv", delimiter)
//! min_results <= max_results && page_size * page < 1000
//! !ZeroOrOne(a, b) || `X-Api-Key`
//! ```
//!
//! Dependency operators use call syntax, relational and arithmetic operators
//! are infix with the usual precedence (arithmetic binds tighter than
//! relational, relational tighter than `&&`, `&&` tighter than `||`). A bare
//! parameter name in predicate position means "the parameter is present".
//! Names that are not plain identifiers are written between backticks.

mod canon;
mod eval;
mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use canon::canonicalize;
pub use eval::{
    evaluate_constraint, evaluate_with_diagnostics, Assignment, Evaluation, TernaryVerdict,
};
pub use parser::{parse_constraint, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl RelOp {
    pub const ALL: [RelOp; 6] = [
        RelOp::Lt,
        RelOp::Gt,
        RelOp::Le,
        RelOp::Ge,
        RelOp::Eq,
        RelOp::Ne,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Gt => ">",
            RelOp::Le => "<=",
            RelOp::Ge => ">=",
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArithOp {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl ArithOp {
    pub const ALL: [ArithOp; 4] = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div];

    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 4,
            ArithOp::Mul | ArithOp::Div => 5,
        }
    }
}

/// The closed dependency vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DepOp {
    AllOrNone,
    ZeroOrOne,
    OnlyOne,
    Or,
    Requires,
}

impl DepOp {
    pub const ALL: [DepOp; 5] = [
        DepOp::AllOrNone,
        DepOp::ZeroOrOne,
        DepOp::OnlyOne,
        DepOp::Or,
        DepOp::Requires,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DepOp::AllOrNone => "AllOrNone",
            DepOp::ZeroOrOne => "ZeroOrOne",
            DepOp::OnlyOne => "OnlyOne",
            DepOp::Or => "Or",
            DepOp::Requires => "Requires",
        }
    }

    pub fn from_name(name: &str) -> Option<DepOp> {
        DepOp::ALL.into_iter().find(|op| op.name() == name)
    }

    /// `Requires(condition, consequence)` is order sensitive; the others are
    /// symmetric in their arguments.
    pub fn is_commutative(self) -> bool {
        self != DepOp::Requires
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LogicOp {
    #[serde(rename = "&&")]
    And,
    #[serde(rename = "||")]
    Or,
}

impl LogicOp {
    pub fn symbol(self) -> &'static str {
        match self {
            LogicOp::And => "&&",
            LogicOp::Or => "||",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            LogicOp::Or => 1,
            LogicOp::And => 2,
        }
    }
}

/// A value-producing term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Param(String),
    Number(f64),
    Text(String),
    Bool(bool),
    Arith {
        op: ArithOp,
        lhs: Box<Operand>,
        rhs: Box<Operand>,
    },
}

impl Operand {
    pub fn param(name: impl Into<String>) -> Operand {
        Operand::Param(name.into())
    }

    pub fn arith(op: ArithOp, lhs: Operand, rhs: Operand) -> Operand {
        Operand::Arith {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Operand::Arith { op, .. } => op.precedence(),
            _ => u8::MAX,
        }
    }

    fn collect_params<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Operand::Param(name) => out.push(name),
            Operand::Arith { lhs, rhs, .. } => {
                lhs.collect_params(out);
                rhs.collect_params(out);
            }
            _ => {}
        }
    }
}

/// A predicate over the parameters of one operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintExpr {
    /// Bare parameter name: the parameter is present in the request.
    Present(String),
    Relational {
        op: RelOp,
        lhs: Operand,
        rhs: Operand,
    },
    Dependency {
        op: DepOp,
        args: Vec<ConstraintExpr>,
    },
    Logical {
        op: LogicOp,
        lhs: Box<ConstraintExpr>,
        rhs: Box<ConstraintExpr>,
    },
    Not(Box<ConstraintExpr>),
}

impl ConstraintExpr {
    pub fn present(name: impl Into<String>) -> Self {
        ConstraintExpr::Present(name.into())
    }

    pub fn relational(op: RelOp, lhs: Operand, rhs: Operand) -> Self {
        ConstraintExpr::Relational { op, lhs, rhs }
    }

    /// Dependency over bare parameter names.
    pub fn dependency<S: Into<String>>(op: DepOp, names: impl IntoIterator<Item = S>) -> Self {
        ConstraintExpr::Dependency {
            op,
            args: names
                .into_iter()
                .map(|n| ConstraintExpr::Present(n.into()))
                .collect(),
        }
    }

    pub fn logical(op: LogicOp, lhs: ConstraintExpr, rhs: ConstraintExpr) -> Self {
        ConstraintExpr::Logical {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn negate(inner: ConstraintExpr) -> Self {
        ConstraintExpr::Not(Box::new(inner))
    }

    /// Every parameter name the expression mentions, in order of appearance
    /// (duplicates removed).
    pub fn parameters(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        let mut seen = std::collections::HashSet::new();
        out.retain(|n| seen.insert(*n));
        out
    }

    fn collect_params<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ConstraintExpr::Present(name) => out.push(name),
            ConstraintExpr::Relational { lhs, rhs, .. } => {
                lhs.collect_params(out);
                rhs.collect_params(out);
            }
            ConstraintExpr::Dependency { args, .. } => {
                args.iter().for_each(|a| a.collect_params(out));
            }
            ConstraintExpr::Logical { lhs, rhs, .. } => {
                lhs.collect_params(out);
                rhs.collect_params(out);
            }
            ConstraintExpr::Not(inner) => inner.collect_params(out),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            ConstraintExpr::Logical { op, .. } => op.precedence(),
            _ => u8::MAX,
        }
    }
}

fn is_plain_ident(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !matches!(name, "true" | "false")
        && DepOp::from_name(name).is_none()
}

fn write_name(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    if is_plain_ident(name) {
        return f.write_str(name);
    }
    f.write_str("`")?;
    for c in name.chars() {
        match c {
            '`' => f.write_str("\\`")?,
            '\\' => f.write_str("\\\\")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("`")
}

fn write_text(f: &mut fmt::Formatter<'_>, text: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in text.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Param(name) => write_name(f, name),
            Operand::Number(n) => write!(f, "{n}"),
            Operand::Text(s) => write_text(f, s),
            Operand::Bool(b) => write!(f, "{b}"),
            Operand::Arith { op, lhs, rhs } => {
                let prec = op.precedence();
                if lhs.precedence() < prec {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if rhs.precedence() <= prec {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

impl fmt::Display for ConstraintExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintExpr::Present(name) => write_name(f, name),
            ConstraintExpr::Relational { op, lhs, rhs } => {
                write!(f, "{lhs} {} {rhs}", op.symbol())
            }
            ConstraintExpr::Dependency { op, args } => {
                write!(f, "{}(", op.name())?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{arg}")?;
                }
                f.write_str(")")
            }
            ConstraintExpr::Logical { op, lhs, rhs } => {
                let prec = op.precedence();
                if lhs.precedence() < prec {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if rhs.precedence() <= prec {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
            ConstraintExpr::Not(inner) => match inner.as_ref() {
                ConstraintExpr::Logical { .. } | ConstraintExpr::Relational { .. } => {
                    write!(f, "!({inner})")
                }
                _ => write!(f, "!{inner}"),
            },
        }
    }
}

impl std::str::FromStr for ConstraintExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_constraint(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printing_parenthesizes_by_precedence() {
        let e = ConstraintExpr::relational(
            RelOp::Lt,
            Operand::arith(
                ArithOp::Mul,
                Operand::arith(ArithOp::Add, Operand::param("a"), Operand::param("b")),
                Operand::Number(2.0),
            ),
            Operand::arith(
                ArithOp::Sub,
                Operand::param("c"),
                Operand::arith(ArithOp::Sub, Operand::param("d"), Operand::Number(1.0)),
            ),
        );
        assert_eq!(e.to_string(), "(a + b) * 2 < c - (d - 1)");
    }

    #[test]
    fn awkward_names_are_backticked() {
        let e = ConstraintExpr::dependency(DepOp::Or, ["X-Api-Key", "Or", "user.id"]);
        assert_eq!(e.to_string(), "Or(`X-Api-Key`, `Or`, user.id)");
    }

    #[test]
    fn parameters_are_listed_once() {
        let e: ConstraintExpr = "Requires(a > 1, b) && a + b < c".parse().unwrap();
        assert_eq!(e.parameters(), vec!["a", "b", "c"]);
    }

    #[test]
    fn json_form_is_stable() {
        let e: ConstraintExpr = "AllOrNone(limit, offset)".parse().unwrap();
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(
            json,
            r#"{"dependency":{"op":"AllOrNone","args":[{"present":"limit"},{"present":"offset"}]}}"#
        );
        let back: ConstraintExpr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);

        let rel: ConstraintExpr = "x <= 10".parse().unwrap();
        assert_eq!(
            serde_json::to_string(&rel).unwrap(),
            r#"{"relational":{"op":"<=","lhs":{"param":"x"},"rhs":{"number":10.0}}}"#
        );
    }
}
