//! Scalar expressions in one variable `x`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | power
//! power    := atom ('^' exponent)?
//! exponent := '-' exponent | power
//! atom     := number | 'x' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func     := sin | cos | exp | ln | sqrt | abs
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^3^2` is `2^(3^2)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Ln, Func::Sqrt, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn negated(self) -> Expr {
        Expr::Neg(Box::new(self))
    }

    /// Evaluates at `x`. Any subexpression that produces a NaN or infinity
    /// aborts evaluation; the error names the innermost such subexpression.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var => x,
            Expr::Const(c) => c.value(),
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Call(f, e) => f.apply(e.eval(x)?),
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval(x)?, r.eval(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain {
                x,
                expr: self.to_string(),
            })
        }
    }

    /// True when the expression does not mention `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Const(_) => true,
            Expr::Var => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Binary(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var | Expr::Const(_) => 1,
            Expr::Neg(e) | Expr::Call(_, e) => 1 + e.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }
}

/// Prints a fully parenthesized form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if v.is_sign_negative() => write!(f, "(-{:?})", -v),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var => f.write_str("x"),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Expr> {
        parse(s)
    }
}

/// Limit on both parser recursion and the depth of the resulting tree, so
/// hostile input cannot overflow the stack in the parser, in `eval`, or in
/// `Display`.
pub const MAX_DEPTH: usize = 256;

pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        depth: 0,
    };
    let (e, _) = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("operator or end of input"));
    }
    Ok(e)
}

/// A parsed subtree together with its depth.
type Node = (Expr, usize);

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &str) -> Error {
        let found = match self.src.get(self.pos) {
            None => "end of input".to_string(),
            Some(_) => {
                let rest = String::from_utf8_lossy(&self.src[self.pos..]);
                let tok: String = rest.chars().take(1).collect();
                format!("`{tok}`")
            }
        };
        Error::Syntax {
            offset: self.pos,
            expected: expected.to_string(),
            found,
        }
    }

    fn too_deep(&self) -> Error {
        Error::Syntax {
            offset: self.pos,
            expected: format!("nesting depth at most {MAX_DEPTH}"),
            found: "deeper nesting".to_string(),
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.too_deep());
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn unary_node(&self, (e, d): Node) -> Result<Node> {
        if d + 1 > MAX_DEPTH {
            return Err(self.too_deep());
        }
        Ok((e.negated(), d + 1))
    }

    fn binary_node(&self, op: BinOp, (l, dl): Node, (r, dr): Node) -> Result<Node> {
        let d = 1 + dl.max(dr);
        if d > MAX_DEPTH {
            return Err(self.too_deep());
        }
        Ok((Expr::binary(op, l, r), d))
    }

    fn expr(&mut self) -> Result<Node> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = self.binary_node(op, lhs, rhs)?;
        }
        self.leave();
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = self.binary_node(op, lhs, rhs)?;
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            self.enter()?;
            let inner = self.unary()?;
            self.leave();
            self.unary_node(inner)
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            self.enter()?;
            let exp = self.exponent()?;
            self.leave();
            self.binary_node(BinOp::Pow, base, exp)
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            self.enter()?;
            let inner = self.exponent()?;
            self.leave();
            self.unary_node(inner)
        } else {
            self.power()
        }
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("`)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok((self.number()?, 1)),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.error("number, `x`, constant, function, or `(`")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let src = self.src;
        let digits = |mut i: usize| {
            while i < src.len() && src[i].is_ascii_digit() {
                i += 1;
            }
            i
        };
        let mut end = digits(start);
        let int_digits = end - start;
        let mut frac_digits = 0;
        if end < src.len() && src[end] == b'.' {
            let after = digits(end + 1);
            frac_digits = after - end - 1;
            end = after;
        }
        if int_digits + frac_digits == 0 {
            return Err(self.error("digits"));
        }
        // Exponent only when followed by digits, so `2e` is not a number.
        if end < src.len() && (src[end] == b'e' || src[end] == b'E') {
            let mut i = end + 1;
            if i < src.len() && (src[i] == b'+' || src[i] == b'-') {
                i += 1;
            }
            let exp_end = digits(i);
            if exp_end > i {
                end = exp_end;
            }
        }
        let text = std::str::from_utf8(&src[start..end]).expect("ascii");
        let value: f64 = text.parse().map_err(|_| self.error("number"))?;
        if !value.is_finite() {
            return Err(Error::Syntax {
                offset: start,
                expected: "finite number literal".to_string(),
                found: format!("`{text}`"),
            });
        }
        self.pos = end;
        Ok(Expr::Num(value))
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match name {
            "x" => return Ok((Expr::Var, 1)),
            "pi" => return Ok((Expr::Const(Constant::Pi), 1)),
            "e" => return Ok((Expr::Const(Constant::E), 1)),
            _ => {}
        }
        let Some(func) = Func::from_name(name) else {
            self.pos = start;
            return Err(self.error("`x`, `pi`, `e`, or a function name"));
        };
        if !self.eat(b'(') {
            return Err(self.error("`(`"));
        }
        let (arg, d) = self.expr()?;
        if !self.eat(b')') {
            return Err(self.error("`)`"));
        }
        if d + 1 > MAX_DEPTH {
            return Err(self.too_deep());
        }
        Ok((Expr::Call(func, Box::new(arg)), d + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::binary(op, l, r)
    }

    #[test]
    fn precedence_examples() {
        assert_eq!(
            p("x^2 + 1"),
            bin(BinOp::Add, bin(BinOp::Pow, Expr::Var, Expr::num(2.0)), Expr::num(1.0))
        );
        assert_eq!(
            p("1 - x^2"),
            bin(BinOp::Sub, Expr::num(1.0), bin(BinOp::Pow, Expr::Var, Expr::num(2.0)))
        );
        assert_eq!(p("-x^2"), bin(BinOp::Pow, Expr::Var, Expr::num(2.0)).negated());
        assert_eq!(
            p("2^3^2"),
            bin(
                BinOp::Pow,
                Expr::num(2.0),
                bin(BinOp::Pow, Expr::num(3.0), Expr::num(2.0))
            )
        );
        assert_eq!(
            p("1 - 2 - 3"),
            bin(
                BinOp::Sub,
                bin(BinOp::Sub, Expr::num(1.0), Expr::num(2.0)),
                Expr::num(3.0)
            )
        );
        assert_eq!(
            p("8 / 4 * 2"),
            bin(
                BinOp::Mul,
                bin(BinOp::Div, Expr::num(8.0), Expr::num(4.0)),
                Expr::num(2.0)
            )
        );
        assert_eq!(p("-2*x"), bin(BinOp::Mul, Expr::num(2.0).negated(), Expr::Var));
        assert_eq!(p("x^-1"), bin(BinOp::Pow, Expr::Var, Expr::num(1.0).negated()));
    }

    #[test]
    fn literals_and_names() {
        assert_eq!(p("1.5e-3"), Expr::num(1.5e-3));
        assert_eq!(p(".25"), Expr::num(0.25));
        assert_eq!(p("3."), Expr::num(3.0));
        assert_eq!(p("pi"), Expr::Const(Constant::Pi));
        assert_eq!(p("2*e"), bin(BinOp::Mul, Expr::num(2.0), Expr::Const(Constant::E)));
        assert_eq!(p("sqrt(abs(x))").depth(), 3);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("sin(x") {
            Err(Error::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 5);
                assert!(expected.contains(')'));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse(""), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse("x +"), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse("y"), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse("sin x"), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse("2e"), Err(Error::Syntax { offset: 1, .. })));
        assert!(matches!(parse("x x"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse("1e999"), Err(Error::Syntax { .. })));
        assert!(matches!(parse("é"), Err(Error::Syntax { offset: 0, .. })));
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let deep = "(".repeat(10_000) + "x" + &")".repeat(10_000);
        assert!(matches!(parse(&deep), Err(Error::Syntax { .. })));
        let negs = "-".repeat(10_000) + "x";
        assert!(parse(&negs).is_err());
        let chain = vec!["x"; 100_000].join("+");
        assert!(parse(&chain).is_err());
        let ok = vec!["x"; 200].join("+");
        assert_eq!(parse(&ok).unwrap().depth(), 200);
    }

    #[test]
    fn eval_examples() {
        assert_eq!(p("x^2+1").eval(2.0).unwrap(), 5.0);
        assert_eq!(p("exp(0)").eval(7.0).unwrap(), 1.0);
        match p("1/x").eval(0.0) {
            Err(Error::Domain { x, expr }) => {
                assert_eq!(x, 0.0);
                assert_eq!(expr, "(1.0 / x)");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(p("ln(x)").eval(0.0), Err(Error::Domain { .. })));
        assert!(matches!(p("sqrt(x - 1)").eval(0.0), Err(Error::Domain { expr, .. }) if expr == "sqrt((x - 1.0))"));
        assert!(matches!(p("exp(x)").eval(1000.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn innermost_failing_subexpression_is_reported() {
        match p("1 + ln(x - 2)").eval(1.0) {
            Err(Error::Domain { expr, .. }) => assert_eq!(expr, "ln((x - 2.0))"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "x^2 + 1",
            "-x^2",
            "2^3^2",
            "1 - (2 - 3)",
            "sin(pi*x)/e",
            "-(-x)",
            "x^-2^-1",
        ] {
            let e = p(s);
            assert_eq!(p(&e.to_string()), e, "{s} printed as {e}");
        }
        assert_eq!(p("0.1").to_string(), "0.1");
    }
}
