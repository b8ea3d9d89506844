//! Manufactured solutions with symbolically derived forcing.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{channel_half_height, Point, VectorField};
use crate::timestepper::ProblemData;

use super::expr::{c, laplacian, sin, t, x, y, Expr, Var};

#[derive(Clone, Debug)]
pub struct ManufacturedCase {
    pub name: String,
    pub u: [Expr; 2],
    pub p: Expr,
    /// ∂ₜu − Δu + ∇p, built by differentiation of `u` and `p`.
    pub f: [Expr; 2],
    /// `grad_u[i][j] = ∂ⱼ uᵢ`
    pub grad_u: [[Expr; 2]; 2],
    pub grad_p: [Expr; 2],
}

impl ManufacturedCase {
    pub fn new(name: &str, u: [Expr; 2], p: Expr) -> Self {
        let grad_p = [p.diff(Var::X), p.diff(Var::Y)];
        let f = [0, 1].map(|i| u[i].diff(Var::T) - laplacian(&u[i]) + grad_p[i].clone());
        let grad_u = [0, 1].map(|i| [u[i].diff(Var::X), u[i].diff(Var::Y)]);
        Self { name: name.to_string(), u, p, f, grad_u, grad_p }
    }

    pub fn velocity(&self, p: Point, t: f64) -> [f64; 2] {
        [self.u[0].eval(p[0], p[1], t), self.u[1].eval(p[0], p[1], t)]
    }

    pub fn pressure(&self, p: Point, t: f64) -> f64 {
        self.p.eval(p[0], p[1], t)
    }

    pub fn velocity_gradient(&self, p: Point, t: f64) -> [[f64; 2]; 2] {
        [0, 1].map(|i| [0, 1].map(|j| self.grad_u[i][j].eval(p[0], p[1], t)))
    }

    pub fn pressure_gradient(&self, p: Point, t: f64) -> [f64; 2] {
        [self.grad_p[0].eval(p[0], p[1], t), self.grad_p[1].eval(p[0], p[1], t)]
    }

    pub fn forcing(&self, p: Point, t: f64) -> [f64; 2] {
        [self.f[0].eval(p[0], p[1], t), self.f[1].eval(p[0], p[1], t)]
    }

    pub fn divergence(&self, p: Point, t: f64) -> f64 {
        self.grad_u[0][0].eval(p[0], p[1], t) + self.grad_u[1][1].eval(p[0], p[1], t)
    }

    /// Strong-form residual ∂ₜu − Δu + ∇p − f, evaluated from the
    /// expressions independently of how `f` was built.
    pub fn strong_residual(&self, p: Point, t: f64) -> [f64; 2] {
        let f = self.forcing(p, t);
        [0, 1].map(|i| {
            let dt = self.u[i].diff(Var::T).eval(p[0], p[1], t);
            let lap = laplacian(&self.u[i]).eval(p[0], p[1], t);
            dt - lap + self.grad_p[i].eval(p[0], p[1], t) - f[i]
        })
    }

    pub fn velocity_field(self: &Arc<Self>) -> Arc<VectorField> {
        let me = self.clone();
        Arc::new(move |p, t| me.velocity(p, t))
    }

    pub fn forcing_field(self: &Arc<Self>) -> Arc<VectorField> {
        let me = self.clone();
        Arc::new(move |p, t| me.forcing(p, t))
    }

    /// Forcing, initial data and the exactness flag for the time stepper.
    pub fn problem_data(self: &Arc<Self>) -> ProblemData {
        ProblemData { forcing: self.forcing_field(), initial: self.velocity_field(), analytic_in_time: true }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "channel2d" => Ok(channel2d_case()),
            "zero" => Ok(zero_case()),
            other => Err(Error::Config(format!("unknown manufactured case `{other}` (expected channel2d or zero)"))),
        }
    }
}

/// u = (sin t (g(t)² − y²), 0), p = sin t (8 − 2x), g(t) = 1 − sin(t)/10.
pub fn channel2d_case() -> ManufacturedCase {
    let g = c(1.0) - sin(t()) * c(0.1);
    let u1 = sin(t()) * (g.powi(2) - y().powi(2));
    let p = sin(t()) * (c(8.0) - c(2.0) * x());
    let case = ManufacturedCase::new("channel2d", [u1, c(0.0)], p);
    debug_assert!((channel_half_height(1.0) - (1.0 - 1f64.sin() / 10.0)).abs() < 1e-15);
    case
}

pub fn zero_case() -> ManufacturedCase {
    ManufacturedCase::new("zero", [c(0.0), c(0.0)], c(0.0))
}
