use super::{ArithOp, ConstraintExpr, Operand, RelOp};

/// Normal form used to compare rules.
///
/// - `>`/`>=` are flipped to `<`/`<=` by swapping operands;
/// - operands of `==`, `!=`, `+`, `*`, `&&`, `||` are ordered by their
///   printed canonical text;
/// - arguments of every dependency operator except `Requires` are ordered
///   the same way;
/// - `!!e` becomes `e`.
///
/// The rewrite is idempotent and preserves evaluation verdicts.
pub fn canonicalize(expr: &ConstraintExpr) -> ConstraintExpr {
    match expr {
        ConstraintExpr::Present(name) => ConstraintExpr::Present(name.clone()),
        ConstraintExpr::Relational { op, lhs, rhs } => {
            let lhs = canonical_operand(lhs);
            let rhs = canonical_operand(rhs);
            match op {
                RelOp::Gt => ConstraintExpr::Relational {
                    op: RelOp::Lt,
                    lhs: rhs,
                    rhs: lhs,
                },
                RelOp::Ge => ConstraintExpr::Relational {
                    op: RelOp::Le,
                    lhs: rhs,
                    rhs: lhs,
                },
                RelOp::Eq | RelOp::Ne => {
                    let (lhs, rhs) = ordered(lhs, rhs, |o| o.to_string());
                    ConstraintExpr::Relational { op: *op, lhs, rhs }
                }
                RelOp::Lt | RelOp::Le => ConstraintExpr::Relational { op: *op, lhs, rhs },
            }
        }
        ConstraintExpr::Dependency { op, args } => {
            let mut args: Vec<ConstraintExpr> = args.iter().map(canonicalize).collect();
            if op.is_commutative() {
                args.sort_by_cached_key(|a| a.to_string());
            }
            ConstraintExpr::Dependency { op: *op, args }
        }
        ConstraintExpr::Logical { op, lhs, rhs } => {
            let (lhs, rhs) = ordered(canonicalize(lhs), canonicalize(rhs), |e| e.to_string());
            ConstraintExpr::Logical {
                op: *op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            }
        }
        ConstraintExpr::Not(inner) => match canonicalize(inner) {
            ConstraintExpr::Not(x) => *x,
            other => ConstraintExpr::Not(Box::new(other)),
        },
    }
}

fn canonical_operand(op: &Operand) -> Operand {
    match op {
        Operand::Arith { op, lhs, rhs } => {
            let lhs = canonical_operand(lhs);
            let rhs = canonical_operand(rhs);
            let (lhs, rhs) = match op {
                ArithOp::Add | ArithOp::Mul => ordered(lhs, rhs, |o| o.to_string()),
                ArithOp::Sub | ArithOp::Div => (lhs, rhs),
            };
            Operand::Arith {
                op: *op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            }
        }
        other => other.clone(),
    }
}

fn ordered<T>(a: T, b: T, key: impl Fn(&T) -> String) -> (T, T) {
    if key(&b) < key(&a) {
        (b, a)
    } else {
        (a, b)
    }
}
