use thiserror::Error;

use super::{ArithOp, ConstraintExpr, DepOp, LogicOp, Operand, RelOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at offset {position}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
}

impl ParseError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        ParseError {
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Text(String),
    True,
    False,
    LParen,
    RParen,
    Comma,
    Bang,
    AndAnd,
    OrOr,
    Rel(RelOp),
    Arith(ArithOp),
    Eof,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(n) => format!("identifier `{n}`"),
        Tok::Number(n) => format!("number {n}"),
        Tok::Text(_) => "string literal".into(),
        Tok::True => "`true`".into(),
        Tok::False => "`false`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Bang => "`!`".into(),
        Tok::AndAnd => "`&&`".into(),
        Tok::OrOr => "`||`".into(),
        Tok::Rel(op) => format!("`{}`", op.symbol()),
        Tok::Arith(op) => format!("`{}`", op.symbol()),
        Tok::Eof => "end of input".into(),
    }
}

struct Token {
    tok: Tok,
    pos: usize,
    /// Identifier was written between backticks and is never a keyword.
    quoted: bool,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut quoted = false;
        let tok = match c {
            '(' => {
                chars.next();
                Tok::LParen
            }
            ')' => {
                chars.next();
                Tok::RParen
            }
            ',' => {
                chars.next();
                Tok::Comma
            }
            '+' => {
                chars.next();
                Tok::Arith(ArithOp::Add)
            }
            '-' => {
                chars.next();
                Tok::Arith(ArithOp::Sub)
            }
            '*' => {
                chars.next();
                Tok::Arith(ArithOp::Mul)
            }
            '/' => {
                chars.next();
                Tok::Arith(ArithOp::Div)
            }
            '<' | '>' | '=' | '!' => {
                chars.next();
                let eq = matches!(chars.peek(), Some(&(_, '=')));
                if eq {
                    chars.next();
                }
                match (c, eq) {
                    ('<', false) => Tok::Rel(RelOp::Lt),
                    ('<', true) => Tok::Rel(RelOp::Le),
                    ('>', false) => Tok::Rel(RelOp::Gt),
                    ('>', true) => Tok::Rel(RelOp::Ge),
                    ('=', true) => Tok::Rel(RelOp::Eq),
                    ('!', true) => Tok::Rel(RelOp::Ne),
                    ('!', false) => Tok::Bang,
                    _ => return Err(ParseError::new(pos, "expected `==`")),
                }
            }
            '&' | '|' => {
                chars.next();
                match chars.next() {
                    Some((_, d)) if d == c => {
                        if c == '&' {
                            Tok::AndAnd
                        } else {
                            Tok::OrOr
                        }
                    }
                    _ => return Err(ParseError::new(pos, format!("expected `{c}{c}`"))),
                }
            }
            '"' => {
                chars.next();
                let mut text = String::new();
                loop {
                    match chars.next() {
                        None => return Err(ParseError::new(pos, "unterminated string literal")),
                        Some((_, '"')) => break,
                        Some((epos, '\\')) => match chars.next() {
                            Some((_, '"')) => text.push('"'),
                            Some((_, '\\')) => text.push('\\'),
                            Some((_, 'n')) => text.push('\n'),
                            Some((_, 't')) => text.push('\t'),
                            Some((_, 'r')) => text.push('\r'),
                            _ => return Err(ParseError::new(epos, "invalid escape sequence")),
                        },
                        Some((_, ch)) => text.push(ch),
                    }
                }
                Tok::Text(text)
            }
            '`' => {
                chars.next();
                let mut name = String::new();
                loop {
                    match chars.next() {
                        None => return Err(ParseError::new(pos, "unterminated quoted identifier")),
                        Some((_, '`')) => break,
                        Some((epos, '\\')) => match chars.next() {
                            Some((_, '`')) => name.push('`'),
                            Some((_, '\\')) => name.push('\\'),
                            _ => return Err(ParseError::new(epos, "invalid escape sequence")),
                        },
                        Some((_, ch)) => name.push(ch),
                    }
                }
                if name.is_empty() {
                    return Err(ParseError::new(pos, "empty quoted identifier"));
                }
                quoted = true;
                Tok::Ident(name)
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = pos;
                let mut end = pos;
                let mut prev = ' ';
                while let Some(&(i, d)) = chars.peek() {
                    let exponent_sign = matches!(d, '+' | '-') && matches!(prev, 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exponent_sign {
                        prev = d;
                        end = i + d.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                let lit = &src[start..end];
                match lit.parse::<f64>() {
                    Ok(n) if n.is_finite() => Tok::Number(n),
                    _ => return Err(ParseError::new(start, format!("invalid number `{lit}`"))),
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = pos;
                let mut end = pos;
                while let Some(&(i, d)) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' || d == '.' {
                        end = i + d.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                match &src[start..end] {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    name => Tok::Ident(name.to_string()),
                }
            }
            other => {
                return Err(ParseError::new(
                    pos,
                    format!("unexpected character `{other}`"),
                ));
            }
        };
        out.push(Token { tok, pos, quoted });
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: src.len(),
        quoted: false,
    });
    Ok(out)
}

/// Untyped syntax tree; checked into predicates/operands afterwards.
enum Node {
    Ident(String),
    Number(f64),
    Text(String),
    Bool(bool),
    Call(DepOp, Vec<(Node, usize)>),
    Not(Box<(Node, usize)>),
    Logic(LogicOp, Box<(Node, usize)>, Box<(Node, usize)>),
    Rel(RelOp, Box<(Node, usize)>, Box<(Node, usize)>),
    Arith(ArithOp, Box<(Node, usize)>, Box<(Node, usize)>),
}

const BP_OR: u8 = 1;
const BP_AND: u8 = 3;
const BP_REL: u8 = 5;
const BP_ADD: u8 = 7;
const BP_MUL: u8 = 9;

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.idx]
    }

    fn bump(&mut self) -> &Token {
        let t = &self.tokens[self.idx];
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let t = self.peek();
        if t.tok == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::new(
                t.pos,
                format!("expected {}, found {}", describe(&want), describe(&t.tok)),
            ))
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<(Node, usize), ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let t = self.peek();
            let (bp, kind) = match &t.tok {
                Tok::OrOr => (BP_OR, Infix::Logic(LogicOp::Or)),
                Tok::AndAnd => (BP_AND, Infix::Logic(LogicOp::And)),
                Tok::Rel(op) => (BP_REL, Infix::Rel(*op)),
                Tok::Arith(op @ (ArithOp::Add | ArithOp::Sub)) => (BP_ADD, Infix::Arith(*op)),
                Tok::Arith(op) => (BP_MUL, Infix::Arith(*op)),
                _ => break,
            };
            if bp < min_bp {
                break;
            }
            self.bump();
            // left associative: the right side must bind strictly tighter
            let rhs = self.expr(bp + 1)?;
            let start = lhs.1;
            lhs = match kind {
                Infix::Logic(op) => (Node::Logic(op, Box::new(lhs), Box::new(rhs)), start),
                Infix::Rel(op) => {
                    if let Tok::Rel(_) = self.peek().tok {
                        return Err(ParseError::new(
                            self.peek().pos,
                            "relational operators cannot be chained",
                        ));
                    }
                    (Node::Rel(op, Box::new(lhs), Box::new(rhs)), start)
                }
                Infix::Arith(op) => {
                    if op == ArithOp::Div && matches!(rhs.0, Node::Number(n) if n == 0.0) {
                        return Err(ParseError::new(rhs.1, "division by literal zero"));
                    }
                    (Node::Arith(op, Box::new(lhs), Box::new(rhs)), start)
                }
            };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<(Node, usize), ParseError> {
        let pos = self.peek().pos;
        let quoted = self.peek().quoted;
        let tok = self.bump().tok.clone();
        let node = match tok {
            Tok::Number(n) => Node::Number(n),
            Tok::Text(s) => Node::Text(s),
            Tok::True => Node::Bool(true),
            Tok::False => Node::Bool(false),
            Tok::Arith(ArithOp::Sub) => {
                let npos = self.peek().pos;
                match self.bump().tok.clone() {
                    Tok::Number(n) => Node::Number(-n),
                    other => {
                        return Err(ParseError::new(
                            npos,
                            format!(
                                "unary `-` applies only to number literals, found {}",
                                describe(&other)
                            ),
                        ))
                    }
                }
            }
            Tok::Bang => {
                let inner = self.expr(BP_REL)?;
                Node::Not(Box::new(inner))
            }
            Tok::LParen => {
                let inner = self.expr(0)?;
                self.expect(Tok::RParen)?;
                return Ok((inner.0, pos));
            }
            Tok::Ident(name) => {
                if !quoted && self.peek().tok == Tok::LParen {
                    let op = DepOp::from_name(&name).ok_or_else(|| {
                        let vocab: Vec<_> = DepOp::ALL.iter().map(|op| op.name()).collect();
                        ParseError::new(
                            pos,
                            format!(
                                "unknown operator `{name}`; accepted operators are {}",
                                vocab.join(", ")
                            ),
                        )
                    })?;
                    self.bump();
                    let mut args = Vec::new();
                    if self.peek().tok != Tok::RParen {
                        loop {
                            args.push(self.expr(0)?);
                            if self.peek().tok == Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen)?;
                    let arity_ok = match op {
                        DepOp::Requires => args.len() == 2,
                        _ => args.len() >= 2,
                    };
                    if !arity_ok {
                        let want = if op == DepOp::Requires {
                            "exactly 2"
                        } else {
                            "at least 2"
                        };
                        return Err(ParseError::new(
                            pos,
                            format!("`{}` takes {want} arguments, got {}", op.name(), args.len()),
                        ));
                    }
                    Node::Call(op, args)
                } else {
                    Node::Ident(name)
                }
            }
            other => {
                return Err(ParseError::new(
                    pos,
                    format!("unexpected {}", describe(&other)),
                ));
            }
        };
        Ok((node, pos))
    }
}

enum Infix {
    Logic(LogicOp),
    Rel(RelOp),
    Arith(ArithOp),
}

fn to_predicate((node, pos): (Node, usize)) -> Result<ConstraintExpr, ParseError> {
    Ok(match node {
        Node::Ident(name) => ConstraintExpr::Present(name),
        Node::Rel(op, l, r) => ConstraintExpr::Relational {
            op,
            lhs: to_operand(*l)?,
            rhs: to_operand(*r)?,
        },
        Node::Call(op, args) => ConstraintExpr::Dependency {
            op,
            args: args
                .into_iter()
                .map(to_predicate)
                .collect::<Result<_, _>>()?,
        },
        Node::Logic(op, l, r) => ConstraintExpr::Logical {
            op,
            lhs: Box::new(to_predicate(*l)?),
            rhs: Box::new(to_predicate(*r)?),
        },
        Node::Not(inner) => ConstraintExpr::Not(Box::new(to_predicate(*inner)?)),
        Node::Number(_) | Node::Text(_) | Node::Bool(_) | Node::Arith(..) => {
            return Err(ParseError::new(
                pos,
                "expected a predicate (relation, dependency or parameter name), found a value",
            ))
        }
    })
}

fn to_operand((node, pos): (Node, usize)) -> Result<Operand, ParseError> {
    Ok(match node {
        Node::Ident(name) => Operand::Param(name),
        Node::Number(n) => Operand::Number(n),
        Node::Text(s) => Operand::Text(s),
        Node::Bool(b) => Operand::Bool(b),
        Node::Arith(op, l, r) => Operand::Arith {
            op,
            lhs: Box::new(to_operand(*l)?),
            rhs: Box::new(to_operand(*r)?),
        },
        Node::Call(..) | Node::Not(_) | Node::Logic(..) | Node::Rel(..) => {
            return Err(ParseError::new(pos, "expected a value, found a predicate"))
        }
    })
}

/// Parse the textual constraint language into an AST.
pub fn parse_constraint(text: &str) -> Result<ConstraintExpr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::new(0, "empty constraint"));
    }
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, idx: 0 };
    let node = parser.expr(0)?;
    let t = parser.peek();
    if t.tok != Tok::Eof {
        return Err(ParseError::new(
            t.pos,
            format!("unexpected {}", describe(&t.tok)),
        ));
    }
    to_predicate(node)
}
