//! Expression DSL for scenario-defined dynamics, disturbances and noise.
//!
//! The grammar is deliberately tiny and closed under differentiation, so a
//! scenario's disturbance and noise signals always admit the symbolic time
//! derivatives required by the total-disturbance diagnostics:
//!
//! ```text
//! sum    := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' exponent)?          exponent := uint ('^' uint)*   (right-assoc)
//! atom   := number | var | fn '(' sum ')' | '(' sum ')'
//! fn     := sin | cos | exp
//! ```
//!
//! `+ -` bind loosest, then `* /`, then unary minus, then `^`, whose exponent
//! must be a nonnegative integer literal. Evaluation is plain IEEE f64 with
//! left-to-right association; parsing and differentiation apply constant
//! folding (including `0`/`1` identities, which keep derivative trees small)
//! but never re-associate, so identical trees always evaluate bit-identically.

use std::fmt;
use thiserror::Error;

/// A parsed expression tree. Construct via [`parse`] or the folding
/// constructors; both keep trees in folded canonical form, which is what
/// makes `parse(to_string(e)) == e` hold exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power; the only exponent form the grammar admits.
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

/// Error produced while parsing expression source text. Positions are
/// 1-based character columns into the expression string.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at column {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared variable `{name}` at column {pos}")]
    UndeclaredVariable { name: String, pos: usize },
    #[error("unknown function `{name}` at column {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("exponent at column {pos} must be a nonnegative integer literal")]
    BadExponent { pos: usize },
}

/// Error produced while evaluating an expression tree.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero while evaluating `{context}`")]
    DivisionByZero { context: String },
    #[error("variable `{name}` has no bound value")]
    UnboundVariable { name: String },
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_owned())
    }

    /// Extract the constant value if the node is a literal.
    fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Fold helper: apply `op` if both sides are finite constants and the
    /// result is finite, otherwise build the node with `mk`.
    fn fold2(
        lhs: Expr,
        rhs: Expr,
        op: impl Fn(f64, f64) -> f64,
        mk: impl Fn(Box<Expr>, Box<Expr>) -> Expr,
    ) -> Expr {
        if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
            let v = op(a, b);
            if v.is_finite() {
                return Expr::Const(v);
            }
        }
        mk(Box::new(lhs), Box::new(rhs))
    }

    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn add(lhs: Expr, rhs: Expr) -> Expr {
        if lhs.as_const() == Some(0.0) {
            return rhs;
        }
        if rhs.as_const() == Some(0.0) {
            return lhs;
        }
        Expr::fold2(lhs, rhs, |a, b| a + b, Expr::Add)
    }

    pub fn sub(lhs: Expr, rhs: Expr) -> Expr {
        if rhs.as_const() == Some(0.0) {
            return lhs;
        }
        if lhs.as_const() == Some(0.0) {
            return Expr::neg(rhs);
        }
        Expr::fold2(lhs, rhs, |a, b| a - b, Expr::Sub)
    }

    /// View a product as `coefficient * rest` when one factor is a literal.
    fn split_coeff(&self) -> Option<(f64, &Expr)> {
        match self {
            Expr::Mul(a, b) => match (a.as_const(), b.as_const()) {
                (Some(c), _) => Some((c, b)),
                (_, Some(c)) => Some((c, a)),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn mul(lhs: Expr, rhs: Expr) -> Expr {
        if lhs.as_const() == Some(0.0) || rhs.as_const() == Some(0.0) {
            return Expr::Const(0.0);
        }
        if lhs.as_const() == Some(1.0) {
            return rhs;
        }
        if rhs.as_const() == Some(1.0) {
            return lhs;
        }
        // Merge literal coefficients across nested products and signs, so
        // repeated chain-rule differentiation (which multiplies by constant
        // inner derivatives) cannot grow trees without bound. An overflowing
        // merged coefficient is left unmerged; `fold2` below refuses
        // non-finite folds for the same reason.
        if let Some(a) = lhs.as_const() {
            if let Some((b, x)) = rhs.split_coeff() {
                if (a * b).is_finite() {
                    return Expr::mul(Expr::Const(a * b), x.clone());
                }
            }
            if let Expr::Neg(x) = &rhs {
                return Expr::mul(Expr::Const(-a), (**x).clone());
            }
        }
        if let Some(a) = rhs.as_const() {
            if let Some((b, x)) = lhs.split_coeff() {
                if (a * b).is_finite() {
                    return Expr::mul(Expr::Const(a * b), x.clone());
                }
            }
            if let Expr::Neg(x) = &lhs {
                return Expr::mul(Expr::Const(-a), (**x).clone());
            }
        }
        Expr::fold2(lhs, rhs, |a, b| a * b, Expr::Mul)
    }

    pub fn div(lhs: Expr, rhs: Expr) -> Expr {
        if rhs.as_const() == Some(1.0) {
            return lhs;
        }
        if lhs.as_const() == Some(0.0) && rhs.as_const().map_or(true, |b| b != 0.0) {
            return Expr::Const(0.0);
        }
        // Never fold a zero divisor away; the domain error must surface at
        // evaluation time.
        if rhs.as_const().map_or(false, |b| b == 0.0) {
            return Expr::Div(Box::new(lhs), Box::new(rhs));
        }
        Expr::fold2(lhs, rhs, |a, b| a / b, Expr::Div)
    }

    pub fn pow(base: Expr, exponent: u32) -> Expr {
        match exponent {
            0 => Expr::Const(1.0),
            1 => base,
            _ => match base.as_const() {
                Some(c) => {
                    let v = pow_int(c, exponent);
                    if v.is_finite() {
                        Expr::Const(v)
                    } else {
                        Expr::Pow(Box::new(Expr::Const(c)), exponent)
                    }
                }
                None => Expr::Pow(Box::new(base), exponent),
            },
        }
    }

    pub fn sin(e: Expr) -> Expr {
        match e.as_const() {
            Some(c) => Expr::Const(c.sin()),
            None => Expr::Sin(Box::new(e)),
        }
    }

    pub fn cos(e: Expr) -> Expr {
        match e.as_const() {
            Some(c) => Expr::Const(c.cos()),
            None => Expr::Cos(Box::new(e)),
        }
    }

    pub fn exp(e: Expr) -> Expr {
        match e.as_const() {
            Some(c) => {
                let v = c.exp();
                if v.is_finite() {
                    Expr::Const(v)
                } else {
                    Expr::Exp(Box::new(Expr::Const(c)))
                }
            }
            None => Expr::Exp(Box::new(e)),
        }
    }

    /// Evaluate with the given variable bindings (linear lookup; binding
    /// lists here never exceed a handful of names).
    pub fn eval(&self, bindings: &[(&str, f64)]) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(name) => bindings
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| EvalError::UnboundVariable { name: name.clone() }),
            Expr::Neg(e) => Ok(-e.eval(bindings)?),
            Expr::Add(a, b) => Ok(a.eval(bindings)? + b.eval(bindings)?),
            Expr::Sub(a, b) => Ok(a.eval(bindings)? - b.eval(bindings)?),
            Expr::Mul(a, b) => Ok(a.eval(bindings)? * b.eval(bindings)?),
            Expr::Div(a, b) => {
                let num = a.eval(bindings)?;
                let den = b.eval(bindings)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero {
                        context: self.to_string(),
                    });
                }
                Ok(num / den)
            }
            Expr::Pow(b, k) => Ok(pow_int(b.eval(bindings)?, *k)),
            Expr::Sin(e) => Ok(e.eval(bindings)?.sin()),
            Expr::Cos(e) => Ok(e.eval(bindings)?.cos()),
            Expr::Exp(e) => Ok(e.eval(bindings)?.exp()),
        }
    }

    /// Symbolic derivative with respect to `var`. The result stays inside
    /// the grammar and comes back constant-folded.
    pub fn differentiate(&self, var: &str) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(name) => {
                if name == var {
                    Expr::Const(1.0)
                } else {
                    Expr::Const(0.0)
                }
            }
            Expr::Neg(e) => Expr::neg(e.differentiate(var)),
            Expr::Add(a, b) => Expr::add(a.differentiate(var), b.differentiate(var)),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(var), b.differentiate(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(var), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate(var)),
            ),
            Expr::Div(a, b) => Expr::div(
                Expr::sub(
                    Expr::mul(a.differentiate(var), (**b).clone()),
                    Expr::mul((**a).clone(), b.differentiate(var)),
                ),
                Expr::pow((**b).clone(), 2),
            ),
            Expr::Pow(b, k) => Expr::mul(
                Expr::mul(Expr::Const(f64::from(*k)), Expr::pow((**b).clone(), k - 1)),
                b.differentiate(var),
            ),
            Expr::Sin(e) => Expr::mul(Expr::cos((**e).clone()), e.differentiate(var)),
            Expr::Cos(e) => Expr::neg(Expr::mul(Expr::sin((**e).clone()), e.differentiate(var))),
            Expr::Exp(e) => Expr::mul(Expr::exp((**e).clone()), e.differentiate(var)),
        }
    }
}

/// Integer power by binary exponentiation; self-consistent across all call
/// sites, which is all determinism requires.
fn pow_int(base: f64, mut k: u32) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while k > 0 {
        if k & 1 == 1 {
            acc *= b;
        }
        b *= b;
        k >>= 1;
    }
    acc
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

/// Operator precedence used by the printer; higher binds tighter. A
/// negative literal prints with a leading sign, so it binds exactly like a
/// negation node (otherwise `(-c)^k` would print as `-c^k`, which reparses
/// as `-(c^k)`).
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Const(c) if *c < 0.0 => 3,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(_) | Expr::Var(_) | Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) => 5,
    }
}

fn fmt_child(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "(")?;
        write!(f, "{e}")?;
        write!(f, ")")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    /// Precedence-aware printing. Operands on the right of a binary operator
    /// are required to bind strictly tighter, so left-associated trees print
    /// without parentheses and every other shape gains exactly the
    /// parentheses needed for `parse` to rebuild the identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                fmt_child(e, 3, f)
            }
            Expr::Add(a, b) => {
                fmt_child(a, 1, f)?;
                write!(f, " + ")?;
                fmt_child(b, 2, f)
            }
            Expr::Sub(a, b) => {
                fmt_child(a, 1, f)?;
                write!(f, " - ")?;
                fmt_child(b, 2, f)
            }
            Expr::Mul(a, b) => {
                fmt_child(a, 2, f)?;
                write!(f, " * ")?;
                fmt_child(b, 3, f)
            }
            Expr::Div(a, b) => {
                fmt_child(a, 2, f)?;
                write!(f, " / ")?;
                fmt_child(b, 3, f)
            }
            Expr::Pow(b, k) => {
                fmt_child(b, 5, f)?;
                write!(f, "^{k}")
            }
            Expr::Sin(e) => write!(f, "sin({e})"),
            Expr::Cos(e) => write!(f, "cos({e})"),
            Expr::Exp(e) => write!(f, "exp({e})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexing and parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    /// Numeric literal; `int` carries the value when the literal was a bare
    /// unsigned integer (no dot, no exponent marker), as required after `^`.
    Num { value: f64, int: Option<u32> },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            let col = lx.pos + 1;
            if lx.pos >= lx.src.len() {
                out.push((Tok::End, col));
                return Ok(out);
            }
            let c = lx.src[lx.pos];
            let tok = match c {
                b'+' => {
                    lx.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    lx.pos += 1;
                    Tok::Minus
                }
                b'*' => {
                    lx.pos += 1;
                    Tok::Star
                }
                b'/' => {
                    lx.pos += 1;
                    Tok::Slash
                }
                b'^' => {
                    lx.pos += 1;
                    Tok::Caret
                }
                b'(' => {
                    lx.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    lx.pos += 1;
                    Tok::RParen
                }
                b'0'..=b'9' | b'.' => lx.number(col)?,
                c if c.is_ascii_alphabetic() || c == b'_' => lx.ident(),
                other => {
                    return Err(ParseError::Syntax {
                        pos: col,
                        msg: format!("unexpected character `{}`", other as char),
                    })
                }
            };
            out.push((tok, col));
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn number(&mut self, col: usize) -> Result<Tok, ParseError> {
        let start = self.pos;
        let mut saw_dot = false;
        let mut saw_exp = false;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            match c {
                b'0'..=b'9' => self.pos += 1,
                b'.' if !saw_dot && !saw_exp => {
                    saw_dot = true;
                    self.pos += 1;
                }
                b'e' | b'E' if !saw_exp => {
                    saw_exp = true;
                    self.pos += 1;
                    if self.pos < self.src.len()
                        && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            pos: col,
            msg: format!("malformed number `{text}`"),
        })?;
        let int = if !saw_dot && !saw_exp {
            text.parse::<u32>().ok()
        } else {
            None
        };
        Ok(Tok::Num { value, int })
    }

    fn ident(&mut self) -> Tok {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        Tok::Ident(String::from_utf8(self.src[start..self.pos].to_vec()).expect("ascii slice"))
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    vars: &'a [&'a str],
}

/// Parse expression source against a declared variable set. The time
/// variable `t` is always in scope; any other identifier outside `vars`
/// (or any function other than `sin`/`cos`/`exp`) is an error, which is
/// how per-channel triangularity restrictions are enforced by callers.
pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, ParseError> {
    let toks = Lexer::tokenize(src)?;
    let mut p = Parser { toks, idx: 0, vars };
    let e = p.sum()?;
    let (tok, pos) = p.peek();
    if *tok != Tok::End {
        return Err(ParseError::Syntax {
            pos,
            msg: format!("unexpected trailing `{}`", tok_name(tok)),
        });
    }
    Ok(e)
}

fn tok_name(t: &Tok) -> String {
    match t {
        Tok::Num { value, .. } => format!("{value}"),
        Tok::Ident(s) => s.clone(),
        Tok::Plus => "+".into(),
        Tok::Minus => "-".into(),
        Tok::Star => "*".into(),
        Tok::Slash => "/".into(),
        Tok::Caret => "^".into(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::End => "end of input".into(),
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> (&Tok, usize) {
        let (t, p) = &self.toks[self.idx];
        (t, *p)
    }

    fn bump(&mut self) -> (Tok, usize) {
        let (t, p) = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        (t, p)
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    acc = Expr::add(acc, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = Expr::sub(acc, self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    acc = Expr::mul(acc, self.unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    acc = Expr::div(acc, self.unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek().0 == Tok::Minus {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek().0 == Tok::Caret {
            self.bump();
            let k = self.exponent()?;
            return Ok(Expr::pow(base, k));
        }
        Ok(base)
    }

    /// Right-associative tower of unsigned integer literals: `2^3^2` is
    /// `2^(3^2)`, folded to a single exponent value.
    fn exponent(&mut self) -> Result<u32, ParseError> {
        let (tok, pos) = self.bump();
        let head = match tok {
            Tok::Num { int: Some(k), .. } => k,
            _ => return Err(ParseError::BadExponent { pos }),
        };
        if *self.peek().0 == Tok::Caret {
            self.bump();
            let rest = self.exponent()?;
            return head
                .checked_pow(rest)
                .ok_or(ParseError::BadExponent { pos });
        }
        Ok(head)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num { value, .. } => Ok(Expr::Const(value)),
            Tok::LParen => {
                let e = self.sum()?;
                let (tok, pos) = self.bump();
                if tok != Tok::RParen {
                    return Err(ParseError::Syntax {
                        pos,
                        msg: format!("expected `)`, found `{}`", tok_name(&tok)),
                    });
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek().0 == Tok::LParen {
                    self.bump();
                    let arg = self.sum()?;
                    let (tok, cpos) = self.bump();
                    if tok != Tok::RParen {
                        return Err(ParseError::Syntax {
                            pos: cpos,
                            msg: format!("expected `)`, found `{}`", tok_name(&tok)),
                        });
                    }
                    match name.as_str() {
                        "sin" => Ok(Expr::sin(arg)),
                        "cos" => Ok(Expr::cos(arg)),
                        "exp" => Ok(Expr::exp(arg)),
                        _ => Err(ParseError::UnknownFunction { name, pos }),
                    }
                } else if name == "t" || self.vars.contains(&name.as_str()) {
                    Ok(Expr::Var(name))
                } else {
                    Err(ParseError::UndeclaredVariable { name, pos })
                }
            }
            other => Err(ParseError::Syntax {
                pos,
                msg: format!("expected a value, found `{}`", tok_name(&other)),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Time signals
// ---------------------------------------------------------------------------

/// A scalar signal of time together with precomputed symbolic derivatives
/// up to a fixed order. Disturbances carry derivatives up to the chain
/// order `n`, measurement noise up to `n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    derivs: Vec<Expr>,
}

impl Signal {
    /// Build from an expression in the single variable `t`, differentiating
    /// `max_order` times.
    pub fn new(expr: Expr, max_order: usize) -> Signal {
        let mut derivs = Vec::with_capacity(max_order + 1);
        derivs.push(expr);
        for q in 0..max_order {
            let next = derivs[q].differentiate("t");
            derivs.push(next);
        }
        Signal { derivs }
    }

    /// Highest derivative order available.
    pub fn order(&self) -> usize {
        self.derivs.len() - 1
    }

    /// The defining expression (order-0 derivative).
    pub fn expr(&self) -> &Expr {
        &self.derivs[0]
    }

    /// Evaluate the `q`-th derivative at time `t`.
    ///
    /// # Panics
    /// If `q` exceeds the order requested at construction; callers size
    /// signals from the chain order, so this indicates a programming error.
    pub fn eval_deriv(&self, q: usize, t: f64) -> Result<f64, EvalError> {
        assert!(
            q < self.derivs.len(),
            "derivative order {q} exceeds precomputed order {}",
            self.derivs.len() - 1
        );
        self.derivs[q].eval(&[("t", t)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str, vars: &[&str]) -> Expr {
        parse(src, vars).expect("parse failure in test input")
    }

    #[test]
    fn parses_three_term_sum_with_powers() {
        let e = p("0.3*x1+0.2*exp(-0.1*x2)+d^3", &["x1", "x2", "d"]);
        // Left association: ((a + b) + c), with the power as the last term.
        match &e {
            Expr::Add(ab, c) => {
                assert!(matches!(**c, Expr::Pow(_, 3)));
                assert!(matches!(**ab, Expr::Add(_, _)));
            }
            other => panic!("unexpected tree shape: {other:?}"),
        }
        let v = e
            .eval(&[("x1", 1.0), ("x2", 2.0), ("d", 0.5)])
            .expect("eval");
        let want = 0.3 * 1.0 + 0.2 * f64::exp(-0.1 * 2.0) + 0.5f64 * 0.5 * 0.5;
        assert!((v - want).abs() < 1e-15, "got {v}, want {want}");
    }

    #[test]
    fn evaluates_with_ieee_semantics() {
        let e = p("0.1*t*exp(-1*t)", &[]);
        let v = e.eval(&[("t", 1.0)]).expect("eval");
        let want = 0.1 * 1.0 * f64::exp(-1.0);
        assert_eq!(v, want, "evaluation must match literal f64 arithmetic");
    }

    #[test]
    fn second_derivative_of_damped_ramp() {
        // d²/dt² [0.1 t e^{-t}] = (0.1 t - 0.2) e^{-t}; at t = 0 this is -0.2.
        let e = p("0.1*t*exp(-1*t)", &[]);
        let d2 = e.differentiate("t").differentiate("t");
        let v = d2.eval(&[("t", 0.0)]).expect("eval");
        assert!((v - (-0.2)).abs() < 1e-15, "got {v}");
        // And pointwise at a few other times against the closed form.
        for &t in &[0.3, 1.0, 2.7] {
            let got = d2.eval(&[("t", t)]).expect("eval");
            let want = (0.1 * t - 0.2) * f64::exp(-t);
            assert!((got - want).abs() < 1e-14, "t={t}: got {got}, want {want}");
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let e = p("sin(2*t) + t^3 / (2 + cos(t))", &[]);
        let d = e.differentiate("t");
        for &t in &[0.0, 0.5, 1.3, 4.0] {
            let h = 1e-6;
            let fp = e.eval(&[("t", t + h)]).expect("eval");
            let fm = e.eval(&[("t", t - h)]).expect("eval");
            let fd = (fp - fm) / (2.0 * h);
            let sym = d.eval(&[("t", t)]).expect("eval");
            assert!((sym - fd).abs() < 1e-7, "t={t}: sym {sym} vs fd {fd}");
        }
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        let e = p("-t^2", &[]);
        assert_eq!(e.eval(&[("t", 3.0)]).expect("eval"), -9.0);
        let e = p("(-t)^2", &[]);
        assert_eq!(e.eval(&[("t", 3.0)]).expect("eval"), 9.0);
    }

    #[test]
    fn exponent_tower_is_right_associative() {
        let e = p("t^2^3", &[]);
        assert_eq!(e, Expr::Pow(Box::new(Expr::var("t")), 8));
    }

    #[test]
    fn rejects_undeclared_variable_with_position() {
        let err = parse("x1 + x2", &["x1"]).expect_err("x2 is undeclared");
        assert_eq!(
            err,
            ParseError::UndeclaredVariable {
                name: "x2".into(),
                pos: 6
            }
        );
    }

    #[test]
    fn rejects_unknown_function() {
        let err = parse("tan(t)", &[]).expect_err("tan is not in the grammar");
        assert!(matches!(err, ParseError::UnknownFunction { ref name, pos: 1 } if name == "tan"));
    }

    #[test]
    fn rejects_fractional_and_negative_exponents() {
        assert!(matches!(
            parse("t^0.5", &[]),
            Err(ParseError::BadExponent { .. })
        ));
        assert!(matches!(
            parse("t^-2", &[]),
            Err(ParseError::BadExponent { .. })
        ));
    }

    #[test]
    fn rejects_unbalanced_parens() {
        assert!(matches!(
            parse("sin(2*t", &[]),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(parse("2*t)", &[]), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn division_by_zero_is_a_domain_error() {
        let e = p("1 / sin(t)", &[]);
        assert!(matches!(
            e.eval(&[("t", 0.0)]),
            Err(EvalError::DivisionByZero { .. })
        ));
        // A literal zero divisor survives folding for the same reason.
        let e = p("1 / 0", &[]);
        assert!(matches!(
            e.eval(&[]),
            Err(EvalError::DivisionByZero { .. })
        ));
    }

    #[test]
    fn printing_reparses_to_the_same_tree() {
        for src in [
            "0.3*x1+0.2*exp(-0.1*x2)+d^3",
            "-(t + 1) * (t - 2)",
            "1 - (2 - t)",
            "t / (1 + t^2) / 2",
            "cos(t)^3 - sin(t^2)",
            "t * -2.5",
            // Folds to a negative-literal power base whose cube overflows,
            // so the node survives and must print parenthesized.
            "(-1e155)^3",
        ] {
            let e = p(src, &["x1", "x2", "d"]);
            let printed = e.to_string();
            let back = p(&printed, &["x1", "x2", "d"]);
            assert_eq!(back, e, "round-trip failed for `{src}` via `{printed}`");
        }
    }

    #[test]
    fn signal_precomputes_derivatives() {
        let s = Signal::new(p("0.1*t*exp(-1*t)", &[]), 3);
        assert_eq!(s.order(), 3);
        let v = s.eval_deriv(2, 0.0).expect("eval");
        assert!((v - (-0.2)).abs() < 1e-15);
        let v = s.eval_deriv(0, 1.0).expect("eval");
        assert!((v - 0.1 * f64::exp(-1.0)).abs() < 1e-16);
    }

    #[test]
    fn folding_keeps_derivative_trees_small() {
        let s = Signal::new(p("cos(2*t)", &[]), 8);
        fn count(e: &Expr) -> usize {
            match e {
                Expr::Const(_) | Expr::Var(_) => 1,
                Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => 1 + count(a),
                Expr::Pow(a, _) => 1 + count(a),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    1 + count(a) + count(b)
                }
            }
        }
        // Each derivative of cos(2t) is ±2^q sin/cos(2t): constant size.
        assert!(count(&s.derivs[8]) <= 8, "derivative tree blew up");
    }
}
