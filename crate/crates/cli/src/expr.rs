//! The expression grammar for problem files.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := atom ('^' integer)?
//! atom   := number | 'x' integer | '(' expr ')' | func '(' expr (',' expr)* ')'
//! func   := max | min | abs
//! ```
//!
//! Polynomial expressions map to smooth models with symbolically
//! differentiated gradients. A `max`/`min`/`abs` node is only legal as the
//! outermost node, with smooth arguments: that keeps the mapping onto the
//! max-of-smooth / min-of-smooth model classes exact. Deeper nesting is
//! rejected rather than silently smoothed.

use std::fmt;
use std::sync::Arc;

use penopt::model::{FuncModel, ModelError, SmoothPiece};

/// Parse failure with 1-based line/column coordinates.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    fn at(col: usize, msg: impl Into<String>) -> Self {
        ParseError {
            line: 1,
            col,
            msg: msg.into(),
        }
    }

    /// Rebases the error onto its position inside a document.
    pub fn offset(mut self, line: usize, col_offset: usize) -> Self {
        self.line = line;
        self.col += col_offset;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Max,
    Min,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// 0-based variable index (`x1` parses to `Var(0)`).
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k as i32),
            Expr::Call(Func::Max, args) => args
                .iter()
                .map(|a| a.eval(x))
                .fold(f64::NEG_INFINITY, f64::max),
            Expr::Call(Func::Min, args) => {
                args.iter().map(|a| a.eval(x)).fold(f64::INFINITY, f64::min)
            }
            Expr::Call(Func::Abs, args) => args[0].eval(x).abs(),
        }
    }

    /// Symbolic partial derivative with respect to variable `i`; only
    /// defined on smooth (call-free) expressions.
    fn diff(&self, i: usize) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(j) => Expr::Num(if *j == i { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::Add(Box::new(a.diff(i)), Box::new(b.diff(i))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.diff(i)), Box::new(b.diff(i))),
            Expr::Mul(a, b) => Expr::Add(
                Box::new(Expr::Mul(Box::new(a.diff(i)), b.clone())),
                Box::new(Expr::Mul(a.clone(), Box::new(b.diff(i)))),
            ),
            Expr::Pow(a, k) => {
                if *k == 0 {
                    Expr::Num(0.0)
                } else {
                    // k·a^(k−1)·a′
                    Expr::Mul(
                        Box::new(Expr::Mul(
                            Box::new(Expr::Num(*k as f64)),
                            Box::new(Expr::Pow(a.clone(), k - 1)),
                        )),
                        Box::new(a.diff(i)),
                    )
                }
            }
            Expr::Call(..) => unreachable!("diff is only called on smooth expressions"),
        }
    }

    pub fn is_smooth(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.is_smooth() && b.is_smooth(),
            Expr::Pow(a, _) => a.is_smooth(),
            Expr::Call(..) => false,
        }
    }

    /// Largest variable index + 1 referenced by the expression.
    pub fn max_var(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.max_var().max(b.max_var()),
            Expr::Pow(a, _) => a.max_var(),
            Expr::Call(_, args) => args.iter().map(|a| a.max_var()).max().unwrap_or(0),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Pow(a, k) => write!(f, "({a})^{k}"),
            Expr::Call(func, args) => {
                let name = match func {
                    Func::Max => "max",
                    Func::Min => "min",
                    Func::Abs => "abs",
                };
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Var(usize),
    Func(Func),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let col = i + 1;
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                tokens.push((Token::Plus, col));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, col));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, col));
                i += 1;
            }
            '^' => {
                tokens.push((Token::Caret, col));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, col));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, col));
                i += 1;
            }
            ',' => {
                tokens.push((Token::Comma, col));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && matches!(chars[i], '0'..='9' | '.') {
                    i += 1;
                }
                // Exponent suffix: e/E with optional sign.
                if i < chars.len()
                    && matches!(chars[i], 'e' | 'E')
                    && i + 1 < chars.len()
                    && (chars[i + 1].is_ascii_digit()
                        || (matches!(chars[i + 1], '+' | '-')
                            && i + 2 < chars.len()
                            && chars[i + 2].is_ascii_digit()))
                {
                    i += 2;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text
                    .parse::<f64>()
                    .map_err(|_| ParseError::at(col, format!("bad number `{text}`")))?;
                tokens.push((Token::Num(value), col));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let token = match word.as_str() {
                    "max" => Token::Func(Func::Max),
                    "min" => Token::Func(Func::Min),
                    "abs" => Token::Func(Func::Abs),
                    _ => {
                        let Some(rest) = word.strip_prefix('x') else {
                            return Err(ParseError::at(col, format!("unknown identifier `{word}`")));
                        };
                        let idx: usize = rest.parse().map_err(|_| {
                            ParseError::at(col, format!("unknown identifier `{word}`"))
                        })?;
                        if idx == 0 {
                            return Err(ParseError::at(col, "variables are numbered from x1"));
                        }
                        Token::Var(idx - 1)
                    }
                };
                tokens.push((token, col));
            }
            other => return Err(ParseError::at(col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, c)| *c)
            .unwrap_or(self.end_col)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ParseError> {
        let col = self.col();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(ParseError::at(col, format!("expected {what}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.bump();
                    acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        while matches!(self.peek(), Some(Token::Star)) {
            self.bump();
            acc = Expr::Mul(Box::new(acc), Box::new(self.factor()?));
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            let col = self.col();
            match self.bump() {
                Some(Token::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                    Ok(Expr::Pow(Box::new(base), v as u32))
                }
                _ => Err(ParseError::at(col, "exponent must be a nonnegative integer")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::Var(i)) => Ok(Expr::Var(i)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Token::Func(f)) => {
                self.expect(Token::LParen, "`(` after function name")?;
                let mut args = vec![self.expr()?];
                while matches!(self.peek(), Some(Token::Comma)) {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Token::RParen, "`)`")?;
                if f == Func::Abs && args.len() != 1 {
                    return Err(ParseError::at(col, "abs takes exactly one argument"));
                }
                Ok(Expr::Call(f, args))
            }
            _ => Err(ParseError::at(col, "expected a number, variable, or `(`")),
        }
    }
}

/// Parses one expression; columns in errors are 1-based within `src`.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let tokens = lex(src)?;
    let end_col = src.chars().count() + 1;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end_col,
    };
    let expr = parser.expr()?;
    if parser.pos < parser.tokens.len() {
        return Err(ParseError::at(parser.col(), "trailing input after expression"));
    }
    Ok(expr)
}

/// Compiles an expression into a scalar function model over `n` variables.
///
/// A `max`/`min`/`abs` node must be the outermost node and its arguments
/// smooth; `abs(e)` lowers to `max(e, 0 − e)`.
pub fn to_func_model(expr: &Expr, n: usize) -> Result<FuncModel, ParseError> {
    if expr.max_var() > n {
        return Err(ParseError::at(
            1,
            format!("expression references x{} but the problem has {n} variables", expr.max_var()),
        ));
    }
    match expr {
        Expr::Call(func, args) => {
            for a in args {
                if !a.is_smooth() {
                    return Err(ParseError::at(
                        1,
                        "max/min/abs cannot nest inside another max/min/abs",
                    ));
                }
            }
            let pieces: Vec<Expr> = match func {
                Func::Abs => vec![
                    args[0].clone(),
                    Expr::Sub(Box::new(Expr::Num(0.0)), Box::new(args[0].clone())),
                ],
                _ => args.clone(),
            };
            let smooth: Vec<SmoothPiece> = pieces.iter().map(|p| compile_piece(p, n)).collect();
            let out = match func {
                Func::Min => FuncModel::min_of_smooth(n, smooth),
                _ => FuncModel::max_of_smooth(n, smooth),
            };
            out.map_err(|e: ModelError| ParseError::at(1, e.to_string()))
        }
        _ => {
            if !expr.is_smooth() {
                return Err(ParseError::at(
                    1,
                    "max/min/abs must be the outermost operation of the expression",
                ));
            }
            let piece = compile_piece(expr, n);
            Ok(FuncModel::Smooth {
                value: {
                    let v = piece.value.clone();
                    Arc::new(move |x: &[f64]| vec![v(x)])
                },
                jacobian: {
                    let g = piece.gradient.clone();
                    Arc::new(move |x: &[f64]| vec![g(x)])
                },
                dim_in: n,
                dim_out: 1,
            })
        }
    }
}

fn compile_piece(expr: &Expr, n: usize) -> SmoothPiece {
    let grads: Arc<Vec<Expr>> = Arc::new((0..n).map(|i| expr.diff(i)).collect());
    let body = Arc::new(expr.clone());
    let body_for_value = body.clone();
    SmoothPiece {
        value: Arc::new(move |x: &[f64]| body_for_value.eval(x)),
        gradient: Arc::new(move |x: &[f64]| grads.iter().map(|g| g.eval(x)).collect()),
    }
}
