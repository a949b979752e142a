//! A small arithmetic expression language for specifying symbols.
//!
//! Variables are `x1..xn` (torus coordinates), `xi1..xin` (frequency
//! coordinates) and `r` for the Euclidean norm of the frequency vector; `pi`
//! is the only named constant. `^` is right-associative and binds tighter
//! than unary minus, so `-x1^2` parses as `-(x1^2)`.

use crate::real::{norm, Real};
use num_complex::Complex;
use std::fmt;
use thiserror::Error;

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
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
    Pow,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Pi,
    /// Torus coordinate, 0-based.
    X(usize),
    /// Frequency coordinate, 0-based.
    Xi(usize),
    /// `r = |xi|`.
    Norm,
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Call(Func, Vec<Ast>),
}

#[derive(Debug, Clone, PartialEq)]
struct Ast {
    node: Node,
    /// Byte span in the source text.
    span: (usize, usize),
}

/// A parsed, immutable, side-effect-free expression over `T^n x R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolExpr {
    dim: usize,
    root: Ast,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable `{name}` at byte {offset} exceeds dimension {dim}")]
    IndexOutOfRange { offset: usize, name: String, dim: usize },
    #[error("empty expression")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("evaluation error in `{snippet}`: {message}")]
pub struct EvalError {
    pub message: String,
    /// The offending sub-expression, pretty-printed.
    pub snippet: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok {
    Num,
    Ident,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    tok: Tok,
    tok_start: usize,
    tok_text: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lx = Lexer { src, pos: 0, tok: Tok::End, tok_start: 0, tok_text: "" };
        lx.advance()?;
        Ok(lx)
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        if self.pos >= bytes.len() {
            self.tok = Tok::End;
            self.tok_text = "";
            return Ok(());
        }
        let c = bytes[self.pos];
        let single = |t| Some(t);
        let tok = match c {
            b'+' => single(Tok::Plus),
            b'-' => single(Tok::Minus),
            b'*' => single(Tok::Star),
            b'/' => single(Tok::Slash),
            b'^' => single(Tok::Caret),
            b'(' => single(Tok::LParen),
            b')' => single(Tok::RParen),
            b',' => single(Tok::Comma),
            _ => None,
        };
        if let Some(t) = tok {
            self.tok = t;
            self.pos += 1;
            self.tok_text = &self.src[self.tok_start..self.pos];
            return Ok(());
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut p = self.pos;
            while p < bytes.len() && (bytes[p].is_ascii_digit() || bytes[p] == b'.') {
                p += 1;
            }
            if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
                let mut q = p + 1;
                if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                    q += 1;
                }
                if q < bytes.len() && bytes[q].is_ascii_digit() {
                    p = q;
                    while p < bytes.len() && bytes[p].is_ascii_digit() {
                        p += 1;
                    }
                }
            }
            self.tok = Tok::Num;
            self.tok_text = &self.src[self.tok_start..p];
            self.pos = p;
            return Ok(());
        }
        if c.is_ascii_alphabetic() {
            let mut p = self.pos;
            while p < bytes.len() && (bytes[p].is_ascii_alphanumeric() || bytes[p] == b'_') {
                p += 1;
            }
            self.tok = Tok::Ident;
            self.tok_text = &self.src[self.tok_start..p];
            self.pos = p;
            return Ok(());
        }
        Err(ParseError::Syntax {
            offset: self.pos,
            message: format!("unexpected character `{}`", c as char),
        })
    }
}

struct Parser<'a> {
    lx: Lexer<'a>,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { offset: self.lx.tok_start, message: message.into() }
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.lx.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.lx.advance()?;
            let rhs = self.term()?;
            let span = (lhs.span.0, rhs.span.1);
            lhs = Ast { node: Node::Bin(op, Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.lx.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.lx.advance()?;
            let rhs = self.unary()?;
            let span = (lhs.span.0, rhs.span.1);
            lhs = Ast { node: Node::Bin(op, Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        if self.lx.tok == Tok::Minus {
            let start = self.lx.tok_start;
            self.lx.advance()?;
            let inner = self.unary()?;
            let span = (start, inner.span.1);
            return Ok(Ast { node: Node::Neg(Box::new(inner)), span });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.atom()?;
        if self.lx.tok == Tok::Caret {
            self.lx.advance()?;
            // Right-associative; the exponent may carry a unary minus.
            let exp = self.unary()?;
            let span = (base.span.0, exp.span.1);
            return Ok(Ast { node: Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)), span });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast, ParseError> {
        let start = self.lx.tok_start;
        match self.lx.tok {
            Tok::Num => {
                let text = self.lx.tok_text;
                let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                let end = start + text.len();
                self.lx.advance()?;
                Ok(Ast { node: Node::Num(v), span: (start, end) })
            }
            Tok::LParen => {
                self.lx.advance()?;
                let inner = self.expr()?;
                if self.lx.tok != Tok::RParen {
                    return Err(self.syntax("expected `)`"));
                }
                let end = self.lx.tok_start + 1;
                self.lx.advance()?;
                Ok(Ast { node: inner.node, span: (start, end) })
            }
            Tok::Ident => {
                let name = self.lx.tok_text.to_owned();
                let end = start + name.len();
                self.lx.advance()?;
                self.ident(&name, start, end)
            }
            Tok::End => Err(self.syntax("unexpected end of input")),
            _ => Err(self.syntax(format!("unexpected token `{}`", self.lx.tok_text))),
        }
    }

    fn ident(&mut self, name: &str, start: usize, end: usize) -> Result<Ast, ParseError> {
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "abs" => Some(Func::Abs),
            "sqrt" => Some(Func::Sqrt),
            "pow" => Some(Func::Pow),
            _ => None,
        };
        if let Some(f) = func {
            if self.lx.tok != Tok::LParen {
                return Err(self.syntax(format!("expected `(` after function `{name}`")));
            }
            self.lx.advance()?;
            let mut args = vec![self.expr()?];
            while self.lx.tok == Tok::Comma {
                self.lx.advance()?;
                args.push(self.expr()?);
            }
            if self.lx.tok != Tok::RParen {
                return Err(self.syntax("expected `)` closing argument list"));
            }
            let close = self.lx.tok_start + 1;
            self.lx.advance()?;
            if args.len() != f.arity() {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!(
                        "function `{name}` takes {} argument(s), got {}",
                        f.arity(),
                        args.len()
                    ),
                });
            }
            return Ok(Ast { node: Node::Call(f, args), span: (start, close) });
        }
        match name {
            "pi" => return Ok(Ast { node: Node::Pi, span: (start, end) }),
            "r" => return Ok(Ast { node: Node::Norm, span: (start, end) }),
            _ => {}
        }
        let var = |prefix: &str| -> Option<Result<usize, ParseError>> {
            let rest = name.strip_prefix(prefix)?;
            if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let idx: usize = match rest.parse() {
                Ok(v) => v,
                Err(_) => {
                    return Some(Err(ParseError::Syntax {
                        offset: start,
                        message: format!("malformed variable index in `{name}`"),
                    }))
                }
            };
            Some(Ok(idx))
        };
        // `xi` must be tried before `x` so `xi1` is not read as `x` + junk.
        if let Some(idx) = var("xi") {
            let idx = idx?;
            if idx == 0 || idx > self.dim {
                return Err(ParseError::IndexOutOfRange {
                    offset: start,
                    name: name.to_owned(),
                    dim: self.dim,
                });
            }
            return Ok(Ast { node: Node::Xi(idx - 1), span: (start, end) });
        }
        if let Some(idx) = var("x") {
            let idx = idx?;
            if idx == 0 || idx > self.dim {
                return Err(ParseError::IndexOutOfRange {
                    offset: start,
                    name: name.to_owned(),
                    dim: self.dim,
                });
            }
            return Ok(Ast { node: Node::X(idx - 1), span: (start, end) });
        }
        Err(ParseError::UnknownIdentifier { offset: start, name: name.to_owned() })
    }
}

impl SymbolExpr {
    /// Parse `text` as an expression over `x1..x<dim>`, `xi1..xi<dim>`, `r`.
    pub fn parse(text: &str, dim: usize) -> Result<SymbolExpr, ParseError> {
        assert!(dim >= 1, "dimension must be positive");
        if text.trim().is_empty() {
            return Err(ParseError::Empty);
        }
        let lx = Lexer::new(text)?;
        let mut p = Parser { lx, dim };
        let root = p.expr()?;
        if p.lx.tok != Tok::End {
            return Err(p.syntax(format!("trailing input `{}`", p.lx.tok_text)));
        }
        Ok(SymbolExpr { dim, root })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluate at a torus point `x` and frequency `xi`; `r = |xi|`.
    /// The result is real-valued (complex symbols are built from re/im pairs),
    /// returned with zero imaginary part.
    pub fn eval<R: Real>(&self, x: &[R], xi: &[R]) -> Result<Complex<R>, EvalError> {
        Ok(Complex::new(self.eval_real(x, xi)?, R::zero()))
    }

    /// Evaluate in the scalar type directly.
    pub fn eval_real<R: Real>(&self, x: &[R], xi: &[R]) -> Result<R, EvalError> {
        assert_eq!(x.len(), self.dim, "x has wrong dimension");
        assert_eq!(xi.len(), self.dim, "xi has wrong dimension");
        let r = norm(xi);
        eval_node(&self.root, x, xi, r)
    }
}

fn eval_node<R: Real>(ast: &Ast, x: &[R], xi: &[R], r: R) -> Result<R, EvalError> {
    let fail = |msg: &str| EvalError { message: msg.to_owned(), snippet: render(ast) };
    match &ast.node {
        Node::Num(v) => Ok(R::of(*v)),
        Node::Pi => Ok(R::PI()),
        Node::X(i) => Ok(x[*i]),
        Node::Xi(i) => Ok(xi[*i]),
        Node::Norm => Ok(r),
        Node::Neg(inner) => Ok(-eval_node(inner, x, xi, r)?),
        Node::Bin(op, a, b) => {
            let va = eval_node(a, x, xi, r)?;
            let vb = eval_node(b, x, xi, r)?;
            match op {
                BinOp::Add => Ok(va + vb),
                BinOp::Sub => Ok(va - vb),
                BinOp::Mul => Ok(va * vb),
                BinOp::Div => {
                    if vb == R::zero() {
                        Err(fail("division by zero"))
                    } else {
                        Ok(va / vb)
                    }
                }
                BinOp::Pow => power(va, vb).map_err(|m| fail(&m)),
            }
        }
        Node::Call(f, args) => {
            let a0 = eval_node(&args[0], x, xi, r)?;
            match f {
                Func::Sin => Ok(a0.sin()),
                Func::Cos => Ok(a0.cos()),
                Func::Exp => Ok(a0.exp()),
                Func::Abs => Ok(a0.abs()),
                Func::Log => {
                    if a0 <= R::zero() {
                        Err(fail("log of non-positive value"))
                    } else {
                        Ok(a0.ln())
                    }
                }
                Func::Sqrt => {
                    if a0 < R::zero() {
                        Err(fail("sqrt of negative value"))
                    } else {
                        Ok(a0.sqrt())
                    }
                }
                Func::Pow => {
                    let a1 = eval_node(&args[1], x, xi, r)?;
                    power(a0, a1).map_err(|m| fail(&m))
                }
            }
        }
    }
}

fn power<R: Real>(base: R, exp: R) -> Result<R, String> {
    if base > R::zero() {
        return Ok(base.powf(exp));
    }
    if base == R::zero() {
        if exp > R::zero() {
            return Ok(R::zero());
        }
        return Err("zero raised to a non-positive power".to_owned());
    }
    // Negative base: integer exponents only.
    if exp.fract() == R::zero() && exp.abs() < R::of(2147483647.0) {
        let e = exp.to_i32().expect("range-checked exponent");
        return Ok(base.powi(e));
    }
    Err("negative base with non-integer exponent".to_owned())
}

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(..) => 3,
        Node::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn render(ast: &Ast) -> String {
    let mut s = String::new();
    write_ast(&mut s, ast).expect("string write");
    s
}

fn write_ast(out: &mut String, ast: &Ast) -> fmt::Result {
    use fmt::Write;
    let wrap = |out: &mut String, child: &Ast, need: u8| -> fmt::Result {
        if precedence(&child.node) < need {
            write!(out, "(")?;
            write_ast(out, child)?;
            write!(out, ")")
        } else {
            write_ast(out, child)
        }
    };
    match &ast.node {
        Node::Num(v) => write!(out, "{v:?}"),
        Node::Pi => write!(out, "pi"),
        Node::X(i) => write!(out, "x{}", i + 1),
        Node::Xi(i) => write!(out, "xi{}", i + 1),
        Node::Norm => write!(out, "r"),
        Node::Neg(inner) => {
            write!(out, "-")?;
            wrap(out, inner, 3)
        }
        Node::Bin(op, a, b) => match op {
            BinOp::Add => {
                wrap(out, a, 1)?;
                write!(out, " + ")?;
                wrap(out, b, 2)
            }
            BinOp::Sub => {
                wrap(out, a, 1)?;
                write!(out, " - ")?;
                wrap(out, b, 2)
            }
            BinOp::Mul => {
                wrap(out, a, 2)?;
                write!(out, " * ")?;
                wrap(out, b, 3)
            }
            BinOp::Div => {
                wrap(out, a, 2)?;
                write!(out, " / ")?;
                wrap(out, b, 3)
            }
            BinOp::Pow => {
                wrap(out, a, 5)?;
                write!(out, "^")?;
                // Exponent re-parses through `unary`, which admits Neg and Pow.
                wrap(out, b, 3)
            }
        },
        Node::Call(f, args) => {
            write!(out, "{}(", f.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(out, ", ")?;
                }
                write_ast(out, a)?;
            }
            write!(out, ")")
        }
    }
}

impl fmt::Display for SymbolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(&self.root))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, dim: usize, x: &[f64], xi: &[f64]) -> f64 {
        SymbolExpr::parse(text, dim).unwrap().eval_real(x, xi).unwrap()
    }

    #[test]
    fn constants_and_arithmetic() {
        assert_eq!(ev("1", 2, &[0.0, 0.0], &[0.0, 0.0]), 1.0);
        let v = ev("xi1^2 / r^2", 2, &[0.0, 0.0], &[3.0, 4.0]);
        assert!((v - 0.36).abs() < 1e-15);
        let v = ev("sin(2*pi*x1) * r^-2", 2, &[0.25, 0.0], &[1.0, 1.0]);
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(ev("xi1 + xi2", 2, &[0.0, 0.0], &[1.0, 2.0]), 3.0);
        assert_eq!(ev("r", 2, &[0.7, 0.1], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        assert_eq!(ev("-2^2", 1, &[0.0], &[0.0]), -4.0);
        assert_eq!(ev("2^-2", 1, &[0.0], &[0.0]), 0.25);
        // right associativity: 2^3^2 = 2^9
        assert_eq!(ev("2^3^2", 1, &[0.0], &[0.0]), 512.0);
        assert_eq!(ev("pow(2, 10)", 1, &[0.0], &[0.0]), 1024.0);
    }

    #[test]
    fn singular_points_error() {
        let e = SymbolExpr::parse("1/r", 2).unwrap();
        let err = e.eval_real(&[0.0, 0.0], &[0.0, 0.0]).unwrap_err();
        assert!(err.message.contains("division by zero"));
        assert!(err.snippet.contains('/'));
        let e = SymbolExpr::parse("log(x1 - 2)", 1).unwrap();
        assert!(e.eval_real(&[0.5], &[1.0]).is_err());
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match SymbolExpr::parse("1 + (2 * 3", 1).unwrap_err() {
            ParseError::Syntax { offset, .. } => assert_eq!(offset, 10),
            other => panic!("unexpected {other:?}"),
        }
        match SymbolExpr::parse("xi3", 2).unwrap_err() {
            ParseError::IndexOutOfRange { name, dim, .. } => {
                assert_eq!(name, "xi3");
                assert_eq!(dim, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        match SymbolExpr::parse("foo(1)", 1).unwrap_err() {
            ParseError::UnknownIdentifier { name, offset } => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(SymbolExpr::parse("  ", 1), Err(ParseError::Empty)));
    }

    #[test]
    fn malformed_corpus_is_rejected_with_location() {
        let bad = [
            "1 +",
            "* 2",
            "(1",
            "1)",
            "sin()",
            "sin(1, 2)",
            "pow(1)",
            "1 2",
            "x0",
            "x1.5",
            "2 ^",
            "1 / / 2",
            "..",
        ];
        for text in bad {
            let e = SymbolExpr::parse(text, 2);
            assert!(e.is_err(), "`{text}` should fail");
        }
    }

    #[test]
    fn round_trip_printing() {
        let sources = [
            "xi1^2 / r^2",
            "-(x1 + x2) * sin(2*pi*x1)",
            "2^-3^2",
            "1 - 2 - 3",
            "pow(abs(xi1), 0.5) + sqrt(r)",
            "exp(-1/(r*r))",
            "-x1^2",
            "0.1 + 1e-3 * xi2",
        ];
        for src in sources {
            let e = SymbolExpr::parse(src, 2).unwrap();
            let printed = e.to_string();
            let reparsed = SymbolExpr::parse(&printed, 2)
                .unwrap_or_else(|err| panic!("reprint `{printed}` failed: {err}"));
            for k in 0..100u64 {
                // deterministic pseudo-random sample points
                let g = |s: u64| ((k * 2654435761 + s * 40503).wrapping_mul(2246822519) % 10_000) as f64 / 10_000.0;
                let x = [g(1), g(2)];
                let xi = [g(3) * 8.0 - 4.0, g(4) * 8.0 - 4.0];
                let a = e.eval_real(&x, &xi);
                let b = reparsed.eval_real(&x, &xi);
                match (a, b) {
                    (Ok(va), Ok(vb)) => assert_eq!(va, vb, "mismatch for `{src}` at {x:?} {xi:?}"),
                    (Err(_), Err(_)) => {}
                    other => panic!("one side errored for `{src}`: {other:?}"),
                }
            }
        }
    }
}
