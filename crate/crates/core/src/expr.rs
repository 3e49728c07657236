//! A small arithmetic language for coefficient fields.
//!
//! Grammar (whitespace is ignored between tokens):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 'x' | 'y' | func '(' args ')' | '(' expr ')'
//! func    := abs | sin | cos | exp | log      (one argument)
//!          | min | max                       (two arguments)
//! number  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`. Errors carry the byte offset of the offending token.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedEnd,
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnknownIdentifier(String),
    BadNumber(String),
    Arity {
        func: &'static str,
        expected: usize,
        found: usize,
    },
    TrailingInput,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => write!(f, "empty expression"),
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected token {t:?}"),
            ParseErrorKind::UnknownIdentifier(s) => write!(f, "unknown identifier {s:?}"),
            ParseErrorKind::BadNumber(s) => write!(f, "malformed number {s:?}"),
            ParseErrorKind::Arity {
                func,
                expected,
                found,
            } => write!(f, "{func} takes {expected} argument(s), found {found}"),
            ParseErrorKind::TrailingInput => write!(f, "unexpected trailing input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation error at byte {offset}: {kind} (x = {x}, y = {y})")]
pub struct EvalError {
    pub offset: usize,
    pub kind: EvalErrorKind,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogOfNonPositive,
    NonFinite,
}

impl fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalErrorKind::DivisionByZero => write!(f, "division by zero"),
            EvalErrorKind::LogOfNonPositive => write!(f, "log of a non-positive value"),
            EvalErrorKind::NonFinite => write!(f, "non-finite result"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sin,
    Cos,
    Exp,
    Log,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Binary {
        op: BinOp,
        lhs: Box<Node>,
        rhs: Box<Node>,
        offset: usize,
    },
    Call {
        func: Func,
        args: Vec<Node>,
        offset: usize,
    },
}

/// Parsed expression over the variables `x` and `y`, keeping its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
}

impl Expression {
    pub fn parse(text: &str) -> Result<Expression, ParseError> {
        let tokens = lex(text)?;
        if tokens.is_empty() {
            return Err(ParseError {
                offset: 0,
                kind: ParseErrorKind::Empty,
            });
        }
        let mut parser = Parser {
            tokens,
            pos: 0,
            len: text.len(),
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError {
                offset: tok.offset,
                kind: ParseErrorKind::TrailingInput,
            });
        }
        Ok(Expression {
            source: text.to_string(),
            root,
        })
    }

    pub fn constant(value: f64) -> Expression {
        Expression {
            source: format!("{value:?}"),
            root: Node::Num(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        let v = eval_node(&self.root, x, y)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError {
                offset: 0,
                kind: EvalErrorKind::NonFinite,
                x,
                y,
            })
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        fn walk(n: &Node, var: Var) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(v) => *v == var,
                Node::Neg(inner) => walk(inner, var),
                Node::Binary { lhs, rhs, .. } => walk(lhs, var) || walk(rhs, var),
                Node::Call { args, .. } => args.iter().any(|a| walk(a, var)),
            }
        }
        walk(&self.root, var)
    }

    /// Value of a variable-free expression.
    pub fn as_constant(&self) -> Option<f64> {
        if self.uses(Var::X) || self.uses(Var::Y) {
            None
        } else {
            self.eval(0.0, 0.0).ok()
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl std::str::FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expression::parse(s)
    }
}

fn eval_node(node: &Node, x: f64, y: f64) -> Result<f64, EvalError> {
    let fail = |offset, kind| EvalError { offset, kind, x, y };
    match node {
        Node::Num(v) => Ok(*v),
        Node::Var(Var::X) => Ok(x),
        Node::Var(Var::Y) => Ok(y),
        Node::Neg(inner) => Ok(-eval_node(inner, x, y)?),
        Node::Binary {
            op,
            lhs,
            rhs,
            offset,
        } => {
            let a = eval_node(lhs, x, y)?;
            let b = eval_node(rhs, x, y)?;
            let v = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(fail(*offset, EvalErrorKind::DivisionByZero));
                    }
                    a / b
                }
                BinOp::Pow => a.powf(b),
            };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(fail(*offset, EvalErrorKind::NonFinite))
            }
        }
        Node::Call { func, args, offset } => {
            let a = eval_node(&args[0], x, y)?;
            let v = match func {
                Func::Abs => a.abs(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => {
                    if a <= 0.0 {
                        return Err(fail(*offset, EvalErrorKind::LogOfNonPositive));
                    }
                    a.ln()
                }
                Func::Min => a.min(eval_node(&args[1], x, y)?),
                Func::Max => a.max(eval_node(&args[1], x, y)?),
            };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(fail(*offset, EvalErrorKind::NonFinite))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lexeme = &text[start..i];
                let value: f64 = lexeme.parse().map_err(|_| ParseError {
                    offset: start,
                    kind: ParseErrorKind::BadNumber(lexeme.to_string()),
                })?;
                out.push(Token {
                    tok: Tok::Num(value),
                    offset: start,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    offset: start,
                });
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push(Token {
                    tok: Tok::Op(c as char),
                    offset: i,
                });
                i += 1;
            }
            b'(' | b')' | b',' => {
                let tok = match c {
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    _ => Tok::Comma,
                };
                out.push(Token { tok, offset: i });
                i += 1;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('\u{fffd}');
                return Err(ParseError {
                    offset: i,
                    kind: ParseErrorKind::UnexpectedChar(ch),
                });
            }
        }
    }
    Ok(out)
}

// Nesting cap keeps hostile inputs from overflowing the stack.
const MAX_DEPTH: usize = 256;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_error(&self) -> ParseError {
        ParseError {
            offset: self.len,
            kind: ParseErrorKind::UnexpectedEnd,
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        self.expr_at(0)
    }

    fn expr_at(&mut self, depth: usize) -> Result<Node, ParseError> {
        let mut lhs = self.term(depth)?;
        while let Some(Token {
            tok: Tok::Op(c @ ('+' | '-')),
            offset,
        }) = self.peek().cloned()
        {
            self.pos += 1;
            let rhs = self.term(depth)?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                offset,
            };
        }
        Ok(lhs)
    }

    fn term(&mut self, depth: usize) -> Result<Node, ParseError> {
        let mut lhs = self.unary(depth)?;
        while let Some(Token {
            tok: Tok::Op(c @ ('*' | '/')),
            offset,
        }) = self.peek().cloned()
        {
            self.pos += 1;
            let rhs = self.unary(depth)?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                offset,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self, depth: usize) -> Result<Node, ParseError> {
        if depth > MAX_DEPTH {
            let offset = self.peek().map_or(self.len, |t| t.offset);
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::UnexpectedToken("nesting too deep".into()),
            });
        }
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary(depth + 1)?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary(depth + 1)
            }
            _ => self.power(depth),
        }
    }

    fn power(&mut self, depth: usize) -> Result<Node, ParseError> {
        let base = self.atom(depth)?;
        if let Some(Token {
            tok: Tok::Op('^'),
            offset,
        }) = self.peek().cloned()
        {
            self.pos += 1;
            let exponent = self.unary(depth + 1)?;
            return Ok(Node::Binary {
                op: BinOp::Pow,
                lhs: Box::new(base),
                rhs: Box::new(exponent),
                offset,
            });
        }
        Ok(base)
    }

    fn atom(&mut self, depth: usize) -> Result<Node, ParseError> {
        let tok = self.next().ok_or_else(|| self.end_error())?;
        match tok.tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr_at(depth + 1)?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Node::Var(Var::X)),
                "y" => Ok(Node::Var(Var::Y)),
                _ => {
                    let func = Func::lookup(&name).ok_or(ParseError {
                        offset: tok.offset,
                        kind: ParseErrorKind::UnknownIdentifier(name.clone()),
                    })?;
                    match self.next() {
                        Some(Token {
                            tok: Tok::LParen, ..
                        }) => {}
                        Some(t) => {
                            return Err(ParseError {
                                offset: t.offset,
                                kind: ParseErrorKind::UnexpectedToken(describe(&t.tok)),
                            })
                        }
                        None => return Err(self.end_error()),
                    }
                    let mut args = vec![self.expr_at(depth + 1)?];
                    while let Some(Token {
                        tok: Tok::Comma, ..
                    }) = self.peek()
                    {
                        self.pos += 1;
                        args.push(self.expr_at(depth + 1)?);
                    }
                    self.expect_rparen()?;
                    if args.len() != func.arity() {
                        return Err(ParseError {
                            offset: tok.offset,
                            kind: ParseErrorKind::Arity {
                                func: func.name(),
                                expected: func.arity(),
                                found: args.len(),
                            },
                        });
                    }
                    Ok(Node::Call {
                        func,
                        args,
                        offset: tok.offset,
                    })
                }
            },
            other => Err(ParseError {
                offset: tok.offset,
                kind: ParseErrorKind::UnexpectedToken(describe(&other)),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some(Token {
                tok: Tok::RParen, ..
            }) => Ok(()),
            Some(t) => Err(ParseError {
                offset: t.offset,
                kind: ParseErrorKind::UnexpectedToken(describe(&t.tok)),
            }),
            None => Err(self.end_error()),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => v.to_string(),
        Tok::Ident(s) => s.clone(),
        Tok::Op(c) => c.to_string(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
    }
}
