//! Small symbolic expression trees in (x, y, t) with exact differentiation.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Add(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    /// Integer power with exponent ≥ 1.
    Powi(Arc<Expr>, u32),
}

pub fn c(v: f64) -> Expr {
    Expr::Const(v)
}

pub fn x() -> Expr {
    Expr::Var(Var::X)
}

pub fn y() -> Expr {
    Expr::Var(Var::Y)
}

pub fn t() -> Expr {
    Expr::Var(Var::T)
}

pub fn sin(e: Expr) -> Expr {
    match e {
        Expr::Const(v) => Expr::Const(v.sin()),
        e => Expr::Sin(Arc::new(e)),
    }
}

pub fn cos(e: Expr) -> Expr {
    match e {
        Expr::Const(v) => Expr::Const(v.cos()),
        e => Expr::Cos(Arc::new(e)),
    }
}

impl Expr {
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 1.0)
    }

    pub fn powi(self, n: u32) -> Expr {
        match (self, n) {
            (_, 0) => Expr::Const(1.0),
            (e, 1) => e,
            (Expr::Const(v), n) => Expr::Const(v.powi(n as i32)),
            (e, n) => Expr::Powi(Arc::new(e), n),
        }
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::T) => t,
            Expr::Add(a, b) => a.eval(x, y, t) + b.eval(x, y, t),
            Expr::Mul(a, b) => a.eval(x, y, t) * b.eval(x, y, t),
            Expr::Neg(a) => -a.eval(x, y, t),
            Expr::Sin(a) => a.eval(x, y, t).sin(),
            Expr::Cos(a) => a.eval(x, y, t).cos(),
            Expr::Powi(a, n) => a.eval(x, y, t).powi(*n as i32),
        }
    }

    pub fn diff(&self, v: Var) -> Expr {
        match self {
            Expr::Const(_) => c(0.0),
            Expr::Var(w) => c(if *w == v { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => a.diff(v) + b.diff(v),
            Expr::Mul(a, b) => a.diff(v) * (**b).clone() + (**a).clone() * b.diff(v),
            Expr::Neg(a) => -a.diff(v),
            Expr::Sin(a) => cos((**a).clone()) * a.diff(v),
            Expr::Cos(a) => -(sin((**a).clone()) * a.diff(v)),
            Expr::Powi(a, n) => c(*n as f64) * (**a).clone().powi(n - 1) * a.diff(v),
        }
    }
}

impl Add for Expr {
    type Output = Expr;

    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
            (a, b) if a.is_zero() => b,
            (a, b) if b.is_zero() => a,
            (a, b) => Expr::Add(Arc::new(a), Arc::new(b)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;

    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;

    fn neg(self) -> Expr {
        match self {
            Expr::Const(a) => Expr::Const(-a),
            Expr::Neg(a) => (*a).clone(),
            a => Expr::Neg(Arc::new(a)),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;

    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
            (a, b) if a.is_zero() || b.is_zero() => Expr::Const(0.0),
            (a, b) if a.is_one() => b,
            (a, b) if b.is_one() => a,
            (a, b) => Expr::Mul(Arc::new(a), Arc::new(b)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Powi(a, n) => write!(f, "({a})^{n}"),
        }
    }
}

/// Laplacian ∂ₓₓ + ∂ᵧᵧ.
pub fn laplacian(e: &Expr) -> Expr {
    e.diff(Var::X).diff(Var::X) + e.diff(Var::Y).diff(Var::Y)
}
