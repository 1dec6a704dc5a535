//! Scalar expressions over a chart: parsing, exact differentiation, evaluation.
//!
//! Expressions are immutable trees behind `Arc`, so cloning is cheap and
//! sharing across threads is free. Simplification is deliberately limited to
//! constant folding and 0/1 elimination.

use std::collections::BTreeSet;
use std::fmt;
use std::ops;
use std::sync::Arc;

use thiserror::Error;

use crate::chart::Chart;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("domain violation in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("non-finite result")]
    NonFinite,
    #[error("point has {got} coordinates, chart needs {want}")]
    PointLength { got: usize, want: usize },
    #[error("opaque jet `{0}` evaluated beyond its declared order")]
    InsufficientOrder(String),
    #[error("opaque jet `{name}` failed: {detail}")]
    Jet { name: String, detail: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at column {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at column {offset}")]
    UnknownSymbol { name: String, offset: usize },
}

impl ParseError {
    /// 1-based column of the offending byte; end of input is `len + 1`.
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownSymbol { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("opaque jets cannot be substituted")]
pub struct SubstituteError;

/// A function known only through its value and gradient at a point.
pub trait OpaqueJet: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Highest derivative order the jet can deliver.
    fn order(&self) -> usize {
        1
    }

    fn value(&self, pt: &[f64]) -> Result<f64, EvalError>;

    /// Gradient with respect to every chart coordinate.
    fn gradient(&self, pt: &[f64]) -> Result<Vec<f64>, EvalError>;

    fn partial(&self, pt: &[f64], c: usize) -> Result<f64, EvalError> {
        Ok(self.gradient(pt)?[c])
    }

    /// Derivatives of order two and higher; only called when `order()` allows it.
    fn higher(&self, _pt: &[f64], _path: &[usize]) -> Result<f64, EvalError> {
        Err(EvalError::InsufficientOrder(self.name().to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> Result<f64, EvalError> {
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Exp => Ok(x.exp()),
            Func::Log if x <= 0.0 => Err(EvalError::Domain { op: "log", detail: format!("argument {x}") }),
            Func::Log => Ok(x.ln()),
            Func::Sqrt if x < 0.0 => Err(EvalError::Domain { op: "sqrt", detail: format!("argument {x}") }),
            Func::Sqrt => Ok(x.sqrt()),
        }
    }
}

pub fn is_primitive(name: &str) -> bool {
    Func::from_name(name).is_some()
}

#[derive(Debug, Clone)]
pub struct JetRef {
    pub jet: Arc<dyn OpaqueJet>,
    pub path: Vec<usize>,
}

#[derive(Debug)]
pub enum Node {
    Const(f64),
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Pow(Expr, i32),
    Func(Func, Expr),
    Jet(JetRef),
}

#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.print_with(&|i| format!("q{i}")))
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::constant(v)
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(v: f64) -> Expr {
        Expr(Arc::new(Node::Const(v)))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(index: usize) -> Expr {
        Expr(Arc::new(Node::Var(index)))
    }

    pub fn jet(jet: Arc<dyn OpaqueJet>) -> Expr {
        Expr(Arc::new(Node::Jet(JetRef { jet, path: Vec::new() })))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a + b),
            (Some(a), _) if a == 0.0 => other.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => Expr(Arc::new(Node::Add(self.clone(), other.clone()))),
        }
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a - b),
            (_, Some(b)) if b == 0.0 => self.clone(),
            (Some(a), _) if a == 0.0 => other.neg(),
            _ => Expr(Arc::new(Node::Sub(self.clone(), other.clone()))),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a * b),
            (Some(a), _) | (_, Some(a)) if a == 0.0 => Expr::zero(),
            (Some(a), _) if a == 1.0 => other.clone(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (Some(a), _) if a == -1.0 => other.neg(),
            (_, Some(b)) if b == -1.0 => self.neg(),
            _ => Expr(Arc::new(Node::Mul(self.clone(), other.clone()))),
        }
    }

    pub fn div(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => Expr::constant(a / b),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            _ => Expr(Arc::new(Node::Div(self.clone(), other.clone()))),
        }
    }

    pub fn neg(&self) -> Expr {
        match &*self.0 {
            Node::Const(v) => Expr::constant(-v),
            Node::Neg(inner) => inner.clone(),
            _ => Expr(Arc::new(Node::Neg(self.clone()))),
        }
    }

    pub fn scale(&self, s: f64) -> Expr {
        Expr::constant(s).mul(self)
    }

    pub fn powi(&self, k: i32) -> Expr {
        if k == 0 {
            return Expr::one();
        }
        if k == 1 {
            return self.clone();
        }
        if let Some(v) = self.as_const() {
            let r = v.powi(k);
            if r.is_finite() {
                return Expr::constant(r);
            }
        }
        Expr(Arc::new(Node::Pow(self.clone(), k)))
    }

    pub fn func(f: Func, arg: &Expr) -> Expr {
        if let Some(v) = arg.as_const() {
            if let Ok(r) = f.apply(v) {
                if r.is_finite() {
                    return Expr::constant(r);
                }
            }
        }
        Expr(Arc::new(Node::Func(f, arg.clone())))
    }

    pub fn sin(&self) -> Expr {
        Expr::func(Func::Sin, self)
    }
    pub fn cos(&self) -> Expr {
        Expr::func(Func::Cos, self)
    }
    pub fn exp(&self) -> Expr {
        Expr::func(Func::Exp, self)
    }
    pub fn log(&self) -> Expr {
        Expr::func(Func::Log, self)
    }
    pub fn sqrt(&self) -> Expr {
        Expr::func(Func::Sqrt, self)
    }

    /// Sum of a list, folding constants as it goes.
    pub fn sum<'a, I: IntoIterator<Item = &'a Expr>>(items: I) -> Expr {
        items.into_iter().fold(Expr::zero(), |acc, e| acc.add(e))
    }

    /// Exact partial derivative with respect to coordinate `c`.
    pub fn derivative(&self, c: usize) -> Expr {
        match &*self.0 {
            Node::Const(_) => Expr::zero(),
            Node::Var(i) => Expr::constant(if *i == c { 1.0 } else { 0.0 }),
            Node::Add(a, b) => a.derivative(c).add(&b.derivative(c)),
            Node::Sub(a, b) => a.derivative(c).sub(&b.derivative(c)),
            Node::Mul(a, b) => a.derivative(c).mul(b).add(&a.mul(&b.derivative(c))),
            Node::Div(a, b) => {
                let da = a.derivative(c);
                let db = b.derivative(c);
                if db.is_zero() {
                    da.div(b)
                } else {
                    da.mul(b).sub(&a.mul(&db)).div(&b.powi(2))
                }
            }
            Node::Neg(a) => a.derivative(c).neg(),
            Node::Pow(a, k) => {
                let da = a.derivative(c);
                Expr::constant(*k as f64).mul(&a.powi(k - 1)).mul(&da)
            }
            Node::Func(f, a) => {
                let da = a.derivative(c);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match f {
                    Func::Sin => a.cos(),
                    Func::Cos => a.sin().neg(),
                    Func::Exp => self.clone(),
                    Func::Log => Expr::one().div(a),
                    Func::Sqrt => Expr::constant(0.5).div(self),
                };
                outer.mul(&da)
            }
            Node::Jet(j) => {
                let mut path = j.path.clone();
                path.push(c);
                Expr(Arc::new(Node::Jet(JetRef { jet: j.jet.clone(), path })))
            }
        }
    }

    /// Derivative orders still available from every opaque jet inside; `None` if there are none.
    pub fn jet_headroom(&self) -> Option<usize> {
        match &*self.0 {
            Node::Const(_) | Node::Var(_) => None,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                match (a.jet_headroom(), b.jet_headroom()) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                }
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => a.jet_headroom(),
            Node::Jet(j) => Some(j.jet.order().saturating_sub(j.path.len())),
        }
    }

    pub fn has_jet(&self) -> bool {
        self.jet_headroom().is_some()
    }

    /// Coordinates that occur syntactically. Jets are reported through `has_jet`.
    pub fn variables(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match &*self.0 {
            Node::Const(_) | Node::Jet(_) => {}
            Node::Var(i) => {
                out.insert(*i);
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => a.collect_vars(out),
        }
    }

    pub fn eval(&self, pt: &[f64]) -> Result<f64, EvalError> {
        let v = self.eval_raw(pt)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn eval_raw(&self, pt: &[f64]) -> Result<f64, EvalError> {
        Ok(match &*self.0 {
            Node::Const(v) => *v,
            Node::Var(i) => *pt.get(*i).ok_or(EvalError::PointLength { got: pt.len(), want: i + 1 })?,
            Node::Add(a, b) => a.eval_raw(pt)? + b.eval_raw(pt)?,
            Node::Sub(a, b) => a.eval_raw(pt)? - b.eval_raw(pt)?,
            Node::Mul(a, b) => a.eval_raw(pt)? * b.eval_raw(pt)?,
            Node::Div(a, b) => {
                let d = b.eval_raw(pt)?;
                if d == 0.0 {
                    return Err(EvalError::Domain { op: "division", detail: "divisor is zero".into() });
                }
                a.eval_raw(pt)? / d
            }
            Node::Neg(a) => -a.eval_raw(pt)?,
            Node::Pow(a, k) => {
                let b = a.eval_raw(pt)?;
                if b == 0.0 && *k < 0 {
                    return Err(EvalError::Domain { op: "power", detail: format!("0^{k}") });
                }
                b.powi(*k)
            }
            Node::Func(f, a) => f.apply(a.eval_raw(pt)?)?,
            Node::Jet(j) => match j.path.len() {
                0 => j.jet.value(pt)?,
                1 => j.jet.partial(pt, j.path[0])?,
                len if len <= j.jet.order() => j.jet.higher(pt, &j.path)?,
                _ => return Err(EvalError::InsufficientOrder(j.jet.name().to_string())),
            },
        })
    }

    /// Replace coordinate `i` by `map[i]`, producing an expression on another chart.
    pub fn substitute(&self, map: &[Expr]) -> Result<Expr, SubstituteError> {
        Ok(match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Var(i) => map[*i].clone(),
            Node::Add(a, b) => a.substitute(map)?.add(&b.substitute(map)?),
            Node::Sub(a, b) => a.substitute(map)?.sub(&b.substitute(map)?),
            Node::Mul(a, b) => a.substitute(map)?.mul(&b.substitute(map)?),
            Node::Div(a, b) => a.substitute(map)?.div(&b.substitute(map)?),
            Node::Neg(a) => a.substitute(map)?.neg(),
            Node::Pow(a, k) => a.substitute(map)?.powi(*k),
            Node::Func(f, a) => Expr::func(*f, &a.substitute(map)?),
            Node::Jet(_) => return Err(SubstituteError),
        })
    }

    /// Render in the parser's grammar using the chart's coordinate names.
    pub fn print(&self, chart: &Chart) -> String {
        self.print_with(&|i| chart.name(i).to_string())
    }

    pub fn print_with(&self, name: &dyn Fn(usize) -> String) -> String {
        match &*self.0 {
            Node::Const(v) => {
                if *v < 0.0 {
                    format!("(-{})", fmt_num(-v))
                } else {
                    fmt_num(*v)
                }
            }
            Node::Var(i) => name(*i),
            Node::Add(a, b) => format!("({} + {})", a.print_with(name), b.print_with(name)),
            Node::Sub(a, b) => format!("({} - {})", a.print_with(name), b.print_with(name)),
            Node::Mul(a, b) => format!("({} * {})", a.print_with(name), b.print_with(name)),
            Node::Div(a, b) => format!("({} / {})", a.print_with(name), b.print_with(name)),
            Node::Neg(a) => format!("(-{})", a.print_with(name)),
            Node::Pow(a, k) if *k < 0 => format!("(1 / ({})^{})", a.print_with(name), -k),
            Node::Pow(a, k) => format!("({})^{}", a.print_with(name), k),
            Node::Func(f, a) => format!("{}({})", f.name(), a.print_with(name)),
            Node::Jet(j) => {
                let path: Vec<String> = j.path.iter().map(|&c| name(c)).collect();
                if path.is_empty() {
                    format!("<{}>", j.jet.name())
                } else {
                    format!("<d[{}] {}>", path.join(","), j.jet.name())
                }
            }
        }
    }
}

fn fmt_num(v: f64) -> String {
    // `{:?}` gives the shortest round-tripping form, possibly with an exponent.
    let s = format!("{v:?}");
    s.trim_end_matches(".0").to_string()
}

impl ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(self, rhs)
    }
}
impl ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}
impl ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}
impl ops::Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::div(self, rhs)
    }
}
impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

/// Parse `text` against the symbols registered in `chart`.
pub fn parse(text: &str, chart: &Chart) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, chart };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    chart: &'a Chart,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos + 1, message: message.to_string() }
    }

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

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = acc.add(&self.term()?);
            } else if self.eat(b'-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                acc = acc.mul(&self.factor()?);
            } else if self.eat(b'/') {
                acc = acc.div(&self.factor()?);
            } else {
                return Ok(acc);
            }
        }
    }

    // Unary minus binds looser than '^', so -x^2 is -(x^2).
    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(self.factor()?.neg());
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let k = self.exponent()?;
            return Ok(base.powi(k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let negative = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("expected integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut k: i32 = digits.parse().map_err(|_| ParseError::Syntax {
            offset: start + 1,
            message: "exponent out of range".into(),
        })?;
        if self.eat(b'^') {
            let outer = self.exponent()?;
            if outer < 0 {
                return Err(self.syntax("negative exponent on an integer exponent"));
            }
            k = k.checked_pow(outer as u32).ok_or_else(|| self.syntax("exponent out of range"))?;
        }
        Ok(if negative { -k } else { k })
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if let Some(f) = Func::from_name(name) {
                    if !self.eat(b'(') {
                        return Err(self.syntax("expected `(` after primitive"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.syntax("expected `)`"));
                    }
                    return Ok(Expr::func(f, &arg));
                }
                match self.chart.resolve(name) {
                    Some(sym) if sym.sign == 1.0 => Ok(Expr::var(sym.index)),
                    Some(sym) => Ok(Expr::var(sym.index).scale(sym.sign)),
                    None => Err(ParseError::UnknownSymbol { name: name.to_string(), offset: start + 1 }),
                }
            }
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(self.syntax("malformed number"));
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::constant)
            .map_err(|_| ParseError::Syntax { offset: start + 1, message: "malformed number".into() })
    }
}

/// Central-difference self test of a jet's gradient; returns the worst relative error.
pub fn jet_gradient_error(jet: &dyn OpaqueJet, pt: &[f64], step: f64) -> Result<f64, EvalError> {
    let grad = jet.gradient(pt)?;
    let mut worst: f64 = 0.0;
    let mut probe = pt.to_vec();
    for c in 0..pt.len() {
        let h = step * pt[c].abs().max(1.0);
        probe[c] = pt[c] + h;
        let up = jet.value(&probe)?;
        probe[c] = pt[c] - h;
        let down = jet.value(&probe)?;
        probe[c] = pt[c];
        let fd = (up - down) / (2.0 * h);
        let scale = grad[c].abs().max(fd.abs()).max(1.0);
        worst = worst.max((grad[c] - fd).abs() / scale);
    }
    Ok(worst)
}
