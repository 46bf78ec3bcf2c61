//! Symbolic expressions over the coordinates `x1..xn`, the radius `r`, and the
//! unknowns `u, v` (or `u1..um, v1..vm`).
//!
//! Every nonlinearity in the crate (the scalar `f(x,u)`, the pair `f(x,v)`,
//! `g(x,u)`, and a general Hamiltonian `H(x,u_1..u_m,v_1..v_m)`) is an
//! [`ExprNode`]. Partial derivatives are exact trees produced by
//! [`ExprNode::differentiate`]; antiderivatives in one variable come from
//! [`antiderivative_in`], with a quadrature fallback wrapped by [`Field`].

mod antideriv;
mod diff;
mod field;
mod parse;
mod simplify;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use antideriv::{antiderivative_in, Antiderivative};
pub use field::{Field, Primitive};
pub use parse::parse;

/// A variable the expression language knows about.
///
/// Indices are zero-based: `X(0)` is `x1`, `U(1)` is `u2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    R,
    X(u8),
    U(u8),
    V(u8),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Symbol::R => write!(f, "r"),
            Symbol::X(i) => write!(f, "x{}", i + 1),
            Symbol::U(0) => write!(f, "u"),
            Symbol::V(0) => write!(f, "v"),
            Symbol::U(k) => write!(f, "u{}", k + 1),
            Symbol::V(k) => write!(f, "v{}", k + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("undeclared symbol {0}")]
    UndeclaredSymbol(String),
    #[error("unbound symbol {0}")]
    Unbound(Symbol),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature of antiderivative did not converge: {0}")]
    Quadrature(String),
}

/// The set of names an expression string may use, plus named constants that
/// are substituted at parse time (e.g. `p = 3`).
#[derive(Clone, Debug, Default)]
pub struct SymbolSet {
    names: BTreeMap<String, Symbol>,
    constants: BTreeMap<String, f64>,
}

impl SymbolSet {
    pub fn empty() -> Self {
        Self::default()
    }

    fn with_coordinates(n: usize) -> Self {
        let mut set = Self::empty();
        for i in 0..n {
            set.declare(&format!("x{}", i + 1), Symbol::X(i as u8));
        }
        set
    }

    /// `{x1..xn, u}`: the scalar problem on a general domain.
    pub fn scalar(n: usize) -> Self {
        let mut set = Self::with_coordinates(n);
        set.declare("u", Symbol::U(0));
        set
    }

    /// `{x1..xn, u, v}`.
    pub fn pair(n: usize) -> Self {
        let mut set = Self::scalar(n);
        set.declare("v", Symbol::V(0));
        set
    }

    /// `{x1..xn, r, u1..um, v1..vm}`; `u` and `v` alias `u1` and `v1`.
    pub fn general(n: usize, m: usize) -> Self {
        let mut set = Self::with_coordinates(n);
        set.declare("r", Symbol::R);
        for k in 0..m {
            set.declare(&format!("u{}", k + 1), Symbol::U(k as u8));
            set.declare(&format!("v{}", k + 1), Symbol::V(k as u8));
        }
        if m >= 1 {
            set.declare("u", Symbol::U(0));
            set.declare("v", Symbol::V(0));
        }
        set
    }

    /// `{r, u}` for radial scalar nonlinearities.
    pub fn radial_scalar() -> Self {
        let mut set = Self::empty();
        set.declare("r", Symbol::R);
        set.declare("u", Symbol::U(0));
        set
    }

    /// `{r, u, v}` for radial pair nonlinearities.
    pub fn radial_pair() -> Self {
        let mut set = Self::radial_scalar();
        set.declare("v", Symbol::V(0));
        set
    }

    pub fn declare(&mut self, name: &str, symbol: Symbol) -> &mut Self {
        self.names.insert(name.to_string(), symbol);
        self
    }

    /// Registers a named constant; occurrences are replaced by the value.
    pub fn constant(mut self, name: &str, value: f64) -> Self {
        self.constants.insert(name.to_string(), value);
        self
    }

    pub fn lookup(&self, name: &str) -> Option<Lookup> {
        if let Some(s) = self.names.get(name) {
            return Some(Lookup::Symbol(*s));
        }
        self.constants.get(name).map(|c| Lookup::Constant(*c))
    }

    pub fn contains(&self, symbol: Symbol) -> bool {
        self.names.values().any(|s| *s == symbol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lookup {
    Symbol(Symbol),
    Constant(f64),
}

/// Values for the free variables of an expression. Small and scanned
/// linearly; hot loops reuse one binding and overwrite slots.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Binding {
    slots: Vec<(Symbol, f64)>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, symbol: Symbol, value: f64) -> Self {
        self.set(symbol, value);
        self
    }

    pub fn set(&mut self, symbol: Symbol, value: f64) {
        match self.slots.iter_mut().find(|(s, _)| *s == symbol) {
            Some(slot) => slot.1 = value,
            None => self.slots.push((symbol, value)),
        }
    }

    pub fn get(&self, symbol: Symbol) -> Option<f64> {
        self.slots.iter().find(|(s, _)| *s == symbol).map(|(_, v)| *v)
    }
}

/// Expression tree. Immutable once built; subtraction and negation are
/// encoded as sums with a `-1` product factor.
#[derive(Clone, Debug, PartialEq)]
pub enum ExprNode {
    Const(f64),
    Var(Symbol),
    Sum(Vec<ExprNode>),
    Product(Vec<ExprNode>),
    Quotient(Box<ExprNode>, Box<ExprNode>),
    Power(Box<ExprNode>, Box<ExprNode>),
    Exp(Box<ExprNode>),
    Log(Box<ExprNode>),
}

#[allow(clippy::should_implement_trait)]
impl ExprNode {
    pub fn constant(c: f64) -> Self {
        ExprNode::Const(c)
    }

    pub fn var(s: Symbol) -> Self {
        ExprNode::Var(s)
    }

    pub fn add(a: ExprNode, b: ExprNode) -> Self {
        ExprNode::Sum(vec![a, b])
    }

    pub fn sub(a: ExprNode, b: ExprNode) -> Self {
        ExprNode::Sum(vec![a, ExprNode::neg(b)])
    }

    pub fn mul(a: ExprNode, b: ExprNode) -> Self {
        ExprNode::Product(vec![a, b])
    }

    pub fn div(a: ExprNode, b: ExprNode) -> Self {
        ExprNode::Quotient(Box::new(a), Box::new(b))
    }

    pub fn pow(base: ExprNode, exponent: ExprNode) -> Self {
        ExprNode::Power(Box::new(base), Box::new(exponent))
    }

    pub fn neg(a: ExprNode) -> Self {
        ExprNode::Product(vec![ExprNode::Const(-1.0), a])
    }

    pub fn exp(a: ExprNode) -> Self {
        ExprNode::Exp(Box::new(a))
    }

    pub fn log(a: ExprNode) -> Self {
        ExprNode::Log(Box::new(a))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            ExprNode::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn children(&self) -> Vec<&ExprNode> {
        match self {
            ExprNode::Const(_) | ExprNode::Var(_) => Vec::new(),
            ExprNode::Sum(xs) | ExprNode::Product(xs) => xs.iter().collect(),
            ExprNode::Quotient(a, b) | ExprNode::Power(a, b) => vec![a, b],
            ExprNode::Exp(a) | ExprNode::Log(a) => vec![a],
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        if let ExprNode::Var(s) = self {
            out.insert(*s);
        }
        for c in self.children() {
            c.collect_symbols(out);
        }
    }

    pub fn depends_on(&self, s: Symbol) -> bool {
        match self {
            ExprNode::Var(v) => *v == s,
            _ => self.children().into_iter().any(|c| c.depends_on(s)),
        }
    }

    /// Applies `map` to every variable. Used to embed a pair nonlinearity
    /// into the `k`-th slot of a general Hamiltonian.
    pub fn rename(&self, map: &impl Fn(Symbol) -> Symbol) -> ExprNode {
        self.map_vars(&|s| ExprNode::Var(map(s)))
    }

    /// Replaces `s` by `value` everywhere.
    pub fn substitute(&self, s: Symbol, value: &ExprNode) -> ExprNode {
        self.map_vars(&|v| if v == s { value.clone() } else { ExprNode::Var(v) })
    }

    fn map_vars(&self, f: &impl Fn(Symbol) -> ExprNode) -> ExprNode {
        let bx = |e: &ExprNode| Box::new(e.map_vars(f));
        match self {
            ExprNode::Const(c) => ExprNode::Const(*c),
            ExprNode::Var(s) => f(*s),
            ExprNode::Sum(xs) => ExprNode::Sum(xs.iter().map(|x| x.map_vars(f)).collect()),
            ExprNode::Product(xs) => ExprNode::Product(xs.iter().map(|x| x.map_vars(f)).collect()),
            ExprNode::Quotient(a, b) => ExprNode::Quotient(bx(a), bx(b)),
            ExprNode::Power(a, b) => ExprNode::Power(bx(a), bx(b)),
            ExprNode::Exp(a) => ExprNode::Exp(bx(a)),
            ExprNode::Log(a) => ExprNode::Log(bx(a)),
        }
    }

    pub fn differentiate(&self, var: Symbol) -> ExprNode {
        diff::differentiate(self, var)
    }

    pub fn simplify(&self) -> ExprNode {
        simplify::simplify(self)
    }

    pub fn evaluate(&self, b: &Binding) -> Result<f64, ExprError> {
        match self {
            ExprNode::Const(c) => Ok(*c),
            ExprNode::Var(s) => b.get(*s).ok_or(ExprError::Unbound(*s)),
            ExprNode::Sum(xs) => xs.iter().try_fold(0.0, |acc, x| Ok(acc + x.evaluate(b)?)),
            ExprNode::Product(xs) => xs.iter().try_fold(1.0, |acc, x| Ok(acc * x.evaluate(b)?)),
            ExprNode::Quotient(a, d) => {
                let den = d.evaluate(b)?;
                if den == 0.0 {
                    return Err(ExprError::Domain("division by zero".into()));
                }
                Ok(a.evaluate(b)? / den)
            }
            ExprNode::Power(base, exponent) => power(base.evaluate(b)?, exponent.evaluate(b)?),
            ExprNode::Exp(a) => Ok(a.evaluate(b)?.exp()),
            ExprNode::Log(a) => {
                let x = a.evaluate(b)?;
                if x <= 0.0 {
                    return Err(ExprError::Domain(format!("log of non-positive value {x}")));
                }
                Ok(x.ln())
            }
        }
    }
}

pub(crate) fn power(base: f64, exponent: f64) -> Result<f64, ExprError> {
    let integral = exponent.fract() == 0.0 && exponent.abs() < 1.0e9;
    if base == 0.0 && exponent < 0.0 {
        return Err(ExprError::Domain(format!("0^{exponent}")));
    }
    if integral {
        return Ok(base.powi(exponent as i32));
    }
    if base < 0.0 {
        return Err(ExprError::Domain(format!("negative base {base} with non-integer exponent {exponent}")));
    }
    Ok(base.powf(exponent))
}

impl fmt::Display for ExprNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn atom(e: &ExprNode) -> bool {
            matches!(e, ExprNode::Var(_) | ExprNode::Exp(_) | ExprNode::Log(_))
                || matches!(e, ExprNode::Const(c) if *c >= 0.0)
        }
        fn wrapped(e: &ExprNode) -> String {
            if atom(e) {
                e.to_string()
            } else {
                format!("({e})")
            }
        }
        match self {
            ExprNode::Const(c) if *c < 0.0 => write!(f, "({c})"),
            ExprNode::Const(c) => write!(f, "{c}"),
            ExprNode::Var(s) => write!(f, "{s}"),
            ExprNode::Sum(xs) if xs.is_empty() => write!(f, "0"),
            ExprNode::Product(xs) if xs.is_empty() => write!(f, "1"),
            ExprNode::Sum(xs) => {
                let parts: Vec<String> = xs.iter().map(wrapped).collect();
                write!(f, "{}", parts.join(" + "))
            }
            ExprNode::Product(xs) => {
                let parts: Vec<String> = xs.iter().map(wrapped).collect();
                write!(f, "{}", parts.join("*"))
            }
            ExprNode::Quotient(a, b) => write!(f, "{}/{}", wrapped(a), wrapped(b)),
            ExprNode::Power(a, b) => write!(f, "{}^{}", wrapped(a), wrapped(b)),
            ExprNode::Exp(a) => write!(f, "exp({a})"),
            ExprNode::Log(a) => write!(f, "log({a})"),
        }
    }
}
