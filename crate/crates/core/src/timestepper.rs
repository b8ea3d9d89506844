//! Eulerian BDF time stepping on the moving domain.

use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{
    apply_pressure_gauge, assemble_forcing, assemble_gradient_form, assemble_mass, assemble_nitsche,
    assemble_pressure_mass, assemble_stokes, assemble_time_terms, context, l2_project, AssembledSystem, GaugeMode,
    SlabContext,
};
use crate::error::{Error, Result};
use crate::geometry::{strip_width_with_factor, BoundaryTag, DomainMotion, Point, StripParams, VectorField};
use crate::linsolve::{solve_saddle_point, SparseMatrix, DEFAULT_REL_TOL};
use crate::mesh::{background_for, check_step_coverage, classify_active, ActiveSlabMesh, BackgroundMesh};
use crate::quadrature::CutQuadrature;
use crate::space::{DofMap, FieldState, LagrangeSpace};
use crate::stabilization::{assemble_cip, assemble_ghost_penalty, GhostVariant};

pub use crate::assembly::bdf_coefficients;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Bdf2Init {
    #[default]
    Bdf1Bootstrap,
    AnalyticPrev,
}

impl FromStr for Bdf2Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bdf1_bootstrap" => Ok(Bdf2Init::Bdf1Bootstrap),
            "analytic_prev" => Ok(Bdf2Init::AnalyticPrev),
            other => Err(Error::Config(format!(
                "unknown BDF(2) initialization `{other}` (expected bdf1_bootstrap or analytic_prev)"
            ))),
        }
    }
}

impl Bdf2Init {
    pub fn as_str(self) -> &'static str {
        match self {
            Bdf2Init::Bdf1Bootstrap => "bdf1_bootstrap",
            Bdf2Init::AnalyticPrev => "analytic_prev",
        }
    }
}

/// Pressure gauge selection; `Auto` picks `None` when an outflow boundary
/// exists and `ZeroMean` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GaugeChoice {
    #[default]
    Auto,
    Fixed(GaugeMode),
}

impl FromStr for GaugeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(GaugeChoice::Auto),
            "none" => Ok(GaugeChoice::Fixed(GaugeMode::None)),
            "zero_mean" => Ok(GaugeChoice::Fixed(GaugeMode::ZeroMean)),
            other => Err(Error::Config(format!("unknown pressure gauge `{other}` (expected auto, none or zero_mean)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub degree: usize,
    pub bdf_order: usize,
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
    pub gamma_d: f64,
    pub gamma_g: f64,
    pub gamma_p: f64,
    pub ghost_variant: GhostVariant,
    pub bdf2_init: Bdf2Init,
    pub gauge: GaugeChoice,
    pub c_delta: f64,
    pub rel_tol: f64,
    /// Check block symmetry and skew-symmetry on every step.
    pub check_structure: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            degree: 1,
            bdf_order: 1,
            h: 0.25,
            dt: 0.2,
            t_final: 2.0,
            gamma_d: 500.0,
            gamma_g: 1e-3,
            gamma_p: 1e-3,
            ghost_variant: GhostVariant::Jump,
            bdf2_init: Bdf2Init::Bdf1Bootstrap,
            gauge: GaugeChoice::Auto,
            c_delta: 1.0,
            rel_tol: DEFAULT_REL_TOL,
            check_structure: true,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !matches!(self.degree, 1 | 2) {
            return bad("m", format!("polynomial degree must be 1 or 2, got {}", self.degree));
        }
        if !matches!(self.bdf_order, 1 | 2) {
            return bad("s", format!("BDF order must be 1 or 2, got {}", self.bdf_order));
        }
        for (name, v) in [("h", self.h), ("dt", self.dt), ("gamma_d", self.gamma_d)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, format!("must be positive, got {v}"));
            }
        }
        for (name, v) in [("gamma_g", self.gamma_g), ("gamma_p", self.gamma_p), ("t_final", self.t_final)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(name, format!("must be nonnegative, got {v}"));
            }
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return bad("rel_tol", format!("must lie in (0, 1), got {}", self.rel_tol));
        }
        if !(self.c_delta >= 1.0) {
            return bad("c_delta", format!("must be >= 1, got {}", self.c_delta));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Right-hand side and initial data of a run.
#[derive(Clone)]
pub struct ProblemData {
    pub forcing: Arc<VectorField>,
    /// Velocity at time t; evaluated at t = 0 (and t = −Δt for
    /// `analytic_prev`).
    pub initial: Arc<VectorField>,
    /// The initial field is an exact solution valid for t < 0 as well.
    pub analytic_in_time: bool,
}

impl ProblemData {
    pub fn zero() -> Self {
        Self { forcing: Arc::new(|_, _| [0.0, 0.0]), initial: Arc::new(|_, _| [0.0, 0.0]), analytic_in_time: false }
    }

    pub fn free_decay<F>(u0: F) -> Self
    where
        F: Fn(Point) -> [f64; 2] + Send + Sync + 'static,
    {
        Self { forcing: Arc::new(|_, _| [0.0, 0.0]), initial: Arc::new(move |x, _| u0(x)), analytic_in_time: false }
    }
}

/// One time level kept for the BDF history.
#[derive(Clone, Debug)]
pub struct Level {
    pub time: f64,
    pub state: FieldState,
    /// Slab on which `state` is defined.
    pub slab: Arc<ActiveSlabMesh>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub bdf_order: usize,
    /// ‖u_hⁿ‖²_{Ωⁿ}
    pub l2_sq: f64,
    /// |||u_hⁿ|||²_{h,n}
    pub triple_sq: f64,
    /// s_hⁿ(p_hⁿ, p_hⁿ) without γ_p
    pub cip_sq: f64,
    /// ‖f(t_n)‖²_{Ωⁿ}
    pub forcing_sq: f64,
    /// (γ_D/h)‖u_D(t_n)‖²_{∂Ω_Dⁿ}
    pub dirichlet_sq: f64,
    pub residual: f64,
    pub refinements: usize,
    pub active_cells: usize,
    pub physical_cells: usize,
    pub unknowns: usize,
    pub velocity_asymmetry: f64,
    pub coupling_skewness: f64,
    /// |(p_h, 1)_{Ωⁿ}| / |Ωⁿ|
    pub pressure_mean: f64,
    pub domain_area: f64,
}

impl StepDiagnostics {
    pub const CSV_HEADER: &'static str = "step,time,bdf_order,l2_sq,triple_sq,cip_sq,forcing_sq,dirichlet_sq,residual,refinements,\
active_cells,physical_cells,unknowns,velocity_asymmetry,coupling_skewness,pressure_mean,domain_area";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e},{},{},{},{},{:.3e},{:.3e},{:.3e},{:.12e}",
            self.step,
            self.time,
            self.bdf_order,
            self.l2_sq,
            self.triple_sq,
            self.cip_sq,
            self.forcing_sq,
            self.dirichlet_sq,
            self.residual,
            self.refinements,
            self.active_cells,
            self.physical_cells,
            self.unknowns,
            self.velocity_asymmetry,
            self.coupling_skewness,
            self.pressure_mean,
            self.domain_area
        )
    }
}

/// History and bookkeeping of a run.
#[derive(Clone, Debug)]
pub struct TimeState {
    pub n: usize,
    pub t: f64,
    /// Most recent level first.
    pub levels: Vec<Level>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// ‖u_h⁰‖²_{Ω¹}
    pub initial_l2_sq: f64,
}

impl TimeState {
    pub fn current(&self) -> &Level {
        &self.levels[0]
    }
}

/// Everything visible to an observer after a step.
pub struct StepView<'a> {
    pub n: usize,
    pub t: f64,
    pub mesh: &'a BackgroundMesh,
    pub space: &'a LagrangeSpace,
    pub slab: &'a ActiveSlabMesh,
    pub dofs: &'a DofMap,
    pub state: &'a FieldState,
    pub diagnostics: &'a StepDiagnostics,
}

/// Assembled operator of one step and its parts.
pub struct StepSystem {
    pub system: AssembledSystem,
    pub dofs: DofMap,
    pub quad: CutQuadrature,
    pub gradient: SparseMatrix,
    pub ghost: SparseMatrix,
    pub cip: SparseMatrix,
    pub boundary: SparseMatrix,
}

pub struct Simulation<'a> {
    pub config: SchemeConfig,
    pub motion: &'a DomainMotion,
    pub data: ProblemData,
    pub mesh: BackgroundMesh,
    pub space: LagrangeSpace,
    pub strip: StripParams,
}

impl<'a> Simulation<'a> {
    pub fn new(motion: &'a DomainMotion, data: ProblemData, config: SchemeConfig) -> Result<Self> {
        config.validate()?;
        if config.bdf_order == 2 && config.bdf2_init == Bdf2Init::AnalyticPrev && !data.analytic_in_time {
            return Err(Error::Config(
                "bdf2_init = analytic_prev needs a manufactured solution to evaluate u(-dt)".into(),
            ));
        }
        let mesh = background_for(motion, config.h)?;
        let space = LagrangeSpace::new(&mesh, config.degree)?;
        let strip = strip_width_with_factor(motion, config.bdf_order, config.dt, config.c_delta)?;
        Ok(Self { config, motion, data, mesh, space, strip })
    }

    pub fn time_of(&self, n: usize) -> f64 {
        n as f64 * self.config.dt
    }

    pub fn slab(&self, n: usize) -> Result<ActiveSlabMesh> {
        let mut s = classify_active(&self.mesh, self.motion, self.time_of(n), self.strip.delta)?;
        s.step_index = n;
        Ok(s)
    }

    fn ctx<'b>(&'b self, slab: &'b ActiveSlabMesh, quad: &'b CutQuadrature, dofs: &'b DofMap) -> SlabContext<'b> {
        context(&self.mesh, &self.space, slab, quad, dofs)
    }

    fn gauge(&self, t: f64) -> GaugeMode {
        match self.config.gauge {
            GaugeChoice::Auto if self.motion.has_do_nothing(t) => GaugeMode::None,
            GaugeChoice::Auto => GaugeMode::ZeroMean,
            GaugeChoice::Fixed(m) => m,
        }
    }

    /// Projects u(·, t) onto the velocity space over Ω_δ of `slab`, with a
    /// mass-scaled ghost penalty γ_g h² g_h controlling DOFs whose support
    /// barely meets Ω_δ.
    pub fn project(&self, slab: &ActiveSlabMesh, t: f64) -> Result<FieldState> {
        let cfg = &self.config;
        let quad = CutQuadrature::enlarged(&self.mesh, slab, 2 * cfg.degree + 2);
        let dofs = DofMap::new(&self.space, slab);
        let ctx = self.ctx(slab, &quad, &dofs);
        let stab = assemble_ghost_penalty(&ctx, cfg.ghost_variant, cfg.gamma_g * ctx.h * ctx.h).build();
        let init = self.data.initial.clone();
        l2_project(&ctx, &move |x| init(x, t), Some(&stab), cfg.rel_tol)
    }

    /// Initial history: u_h⁰ (and u_h⁻¹ for `analytic_prev`), projected over
    /// Ω_δ¹ so they cover the first physical domains.
    pub fn initialize(&self) -> Result<TimeState> {
        let slab1 = Arc::new(self.slab(1)?);
        let u0 = self.project(&slab1, 0.0)?;
        let mut levels = vec![Level { time: 0.0, state: u0, slab: slab1.clone() }];
        if self.config.bdf_order == 2 && self.config.bdf2_init == Bdf2Init::AnalyticPrev {
            let dt = self.config.dt;
            let um1 = self.project(&slab1, -dt)?;
            levels.push(Level { time: -dt, state: um1, slab: slab1.clone() });
        }
        let quad = CutQuadrature::new(&self.mesh, &slab1, 2 * self.config.degree, 2 * self.config.degree + 1);
        let dofs = DofMap::new(&self.space, &slab1);
        let mass = assemble_mass(&self.ctx(&slab1, &quad, &dofs));
        let x = levels[0].state.to_solution(&dofs);
        Ok(TimeState { n: 0, t: 0.0, levels, diagnostics: Vec::new(), initial_l2_sq: mass.bilinear(&x, &x) })
    }

    /// Geometric containment Ωⁿ ⊂ Ω_δ of every history level, checked at
    /// the physical quadrature points.
    fn check_containment(&self, slab: &ActiveSlabMesh, quad: &CutQuadrature, history: &[&Level]) -> Result<()> {
        for level in history {
            check_step_coverage(&level.slab, slab)?;
            let prev = &level.slab;
            let tol = 1e-10 * self.mesh.h_min;
            for cq in &quad.cells {
                for q in &cq.volume {
                    let phi = prev.constraints.iter().map(|c| c.value(q.x)).fold(f64::NEG_INFINITY, f64::max);
                    if phi > prev.delta + tol {
                        return Err(Error::ContainmentViolation {
                            step: slab.step_index,
                            detail: format!(
                                "quadrature point ({:.6}, {:.6}) of t = {} lies outside the enlarged domain of t = {}",
                                q.x[0], q.x[1], slab.time, prev.time
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Assembles the step system. `history` holds u^{n−1}, …; with an empty
    /// history the stationary operator is assembled.
    pub fn assemble(&self, slab: &ActiveSlabMesh, history: &[&FieldState]) -> Result<StepSystem> {
        let cfg = &self.config;
        let t = slab.time;
        let quad = CutQuadrature::new(&self.mesh, slab, 2 * cfg.degree, 2 * cfg.degree + 1);
        let dofs = DofMap::new(&self.space, slab);
        let ctx = self.ctx(slab, &quad, &dofs);
        let n = ctx.n();

        let mut builder = assemble_stokes(&ctx);
        let nitsche = assemble_nitsche(&ctx, self.motion, cfg.gamma_d, t)?;
        builder.extend(&nitsche.matrix);
        let mut rhs = assemble_forcing(&ctx, self.data.forcing.as_ref(), t);
        for (r, v) in rhs.iter_mut().zip(&nitsche.rhs) {
            *r += v;
        }
        if !history.is_empty() {
            let alpha = bdf_coefficients(history.len())?;
            let time = assemble_time_terms(&ctx, &alpha, cfg.dt, history)?;
            builder.extend(&time.matrix);
            for (r, v) in rhs.iter_mut().zip(&time.rhs) {
                *r += v;
            }
        }
        let ghost = assemble_ghost_penalty(&ctx, cfg.ghost_variant, 1.0).build();
        let cip = assemble_cip(&ctx, 1.0).build();
        let matrix = builder.build().add(&ghost.scaled(cfg.gamma_g)).add(&cip.scaled(cfg.gamma_p));
        debug_assert_eq!(matrix.nrows(), n);
        let system = AssembledSystem::new(matrix, rhs, &dofs);
        let system = apply_pressure_gauge(system, &ctx, self.motion.has_do_nothing(t), self.gauge(t))?;
        let gradient = assemble_gradient_form(&ctx);
        let boundary = crate::assembly::assemble_dirichlet_boundary_mass(&ctx);
        Ok(StepSystem { system, dofs, quad, gradient, ghost, cip, boundary })
    }

    /// Solves an assembled step and evaluates its diagnostics.
    fn solve_step(&self, slab: &ActiveSlabMesh, sys: &StepSystem, order: usize) -> Result<(FieldState, StepDiagnostics)> {
        let cfg = &self.config;
        let sol = solve_saddle_point(&sys.system.matrix, &sys.system.rhs, sys.dofs.pressure_offset(), cfg.rel_tol)?;
        let x = &sol.x;
        let state = FieldState::from_solution(self.space.n_dofs, &sys.dofs, x);
        let ctx = self.ctx(slab, &sys.quad, &sys.dofs);
        let xs = &x[..sys.dofs.n_unknowns()];
        let mass = assemble_mass(&ctx);
        let pmass = assemble_pressure_mass(&ctx);
        let area: f64 = sys.quad.volume();
        let ones: Vec<f64> = (0..xs.len()).map(|i| if sys.dofs.pressure_offset() <= i { 1.0 } else { 0.0 }).collect();
        let pressure_mean = pmass.bilinear(&ones, xs).abs() / area;
        let forcing = self.data.forcing.clone();
        let forcing_sq = forcing_norm_sq(&sys.quad, forcing.as_ref(), slab.time);
        let dirichlet_sq = cfg.gamma_d / ctx.h * dirichlet_norm_sq(&sys.quad, self.motion, slab.time);
        let (asym, skew) = if cfg.check_structure {
            (sys.system.velocity_asymmetry(), sys.system.coupling_skewness())
        } else {
            (0.0, 0.0)
        };
        let diag = StepDiagnostics {
            step: slab.step_index,
            time: slab.time,
            bdf_order: order,
            l2_sq: mass.bilinear(xs, xs),
            triple_sq: sys.gradient.bilinear(xs, xs)
                + cfg.gamma_g * sys.ghost.bilinear(xs, xs)
                + cfg.gamma_d / ctx.h * sys.boundary.bilinear(xs, xs),
            cip_sq: sys.cip.bilinear(xs, xs),
            forcing_sq,
            dirichlet_sq,
            residual: sol.residual,
            refinements: sol.refinements,
            active_cells: slab.cells_delta.len(),
            physical_cells: slab.cells_phys.len(),
            unknowns: sys.system.matrix.nrows(),
            velocity_asymmetry: asym,
            coupling_skewness: skew,
            pressure_mean,
            domain_area: area,
        };
        Ok((state, diag))
    }

    /// Stationary discrete problem at time `t` (no time derivative).
    pub fn stationary(&self, t_index: usize) -> Result<(Arc<ActiveSlabMesh>, FieldState)> {
        let slab = Arc::new(self.slab(t_index)?);
        let sys = self.assemble(&slab, &[])?;
        let (state, _) = self.solve_step(&slab, &sys, 0)?;
        Ok((slab, state))
    }

    /// Advances by one step.
    pub fn step(&self, mut state: TimeState) -> Result<(TimeState, StepOutput)> {
        let n = state.n + 1;
        let order = self.config.bdf_order.min(state.levels.len());
        let slab = Arc::new(self.slab(n)?);
        let history: Vec<&Level> = state.levels.iter().take(order).collect();
        let sys_quad = CutQuadrature::new(&self.mesh, &slab, 2 * self.config.degree, 2 * self.config.degree + 1);
        self.check_containment(&slab, &sys_quad, &history)?;
        let hist_states: Vec<&FieldState> = history.iter().map(|l| &l.state).collect();
        let sys = self.assemble(&slab, &hist_states)?;
        let (field, diag) = self.solve_step(&slab, &sys, order)?;
        let keep = self.config.bdf_order.max(1);
        state.levels.insert(0, Level { time: slab.time, state: field, slab: slab.clone() });
        state.levels.truncate(keep);
        state.n = n;
        state.t = slab.time;
        state.diagnostics.push(diag);
        Ok((state, StepOutput { slab, dofs: sys.dofs }))
    }

    /// Runs the full time loop, calling `observer` after every step.
    pub fn run<F>(&self, mut observer: F) -> Result<TimeState>
    where
        F: FnMut(&StepView) -> Result<()>,
    {
        let mut state = self.initialize()?;
        for _ in 0..self.config.n_steps() {
            let (next, out) = self.step(state)?;
            state = next;
            let view = StepView {
                n: state.n,
                t: state.t,
                mesh: &self.mesh,
                space: &self.space,
                slab: &out.slab,
                dofs: &out.dofs,
                state: &state.levels[0].state,
                diagnostics: state.diagnostics.last().expect("step recorded"),
            };
            observer(&view)?;
        }
        Ok(state)
    }
}

/// Slab and numbering of the step just taken.
pub struct StepOutput {
    pub slab: Arc<ActiveSlabMesh>,
    pub dofs: DofMap,
}

fn forcing_norm_sq(quad: &CutQuadrature, f: &VectorField, t: f64) -> f64 {
    quad.cells
        .iter()
        .flat_map(|c| c.volume.iter())
        .map(|q| {
            let v = f(q.x, t);
            q.w * (v[0] * v[0] + v[1] * v[1])
        })
        .sum()
}

fn dirichlet_norm_sq(quad: &CutQuadrature, motion: &DomainMotion, t: f64) -> f64 {
    quad.cells
        .iter()
        .flat_map(|c| c.surface.iter())
        .filter(|s| s.tag == BoundaryTag::Dirichlet)
        .map(|s| {
            let v = motion.dirichlet_data(s.x, t);
            s.w * (v[0] * v[0] + v[1] * v[1])
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    /// max_n of ‖u_hⁿ‖² + Σ_{k≤n} Δt(|||u_h^k|||² + γ_p s_h(p_h^k, p_h^k))
    pub max_energy: f64,
    /// max_n of the energy divided by the data bound
    /// ‖u_h⁰‖² + t_n max_k (‖f(t_k)‖² + (γ_D/h)‖u_D(t_k)‖²_{∂Ω_D}).
    pub max_ratio: f64,
    /// Fitted exponential growth rate λ ≥ 0 of the ratio.
    pub growth_rate: f64,
    /// max_n of ratio · exp(−λ t_n).
    pub max_detrended_ratio: f64,
    pub factor: f64,
    pub blow_up: bool,
    pub energy: Vec<f64>,
}

/// Discrete energy monitor of a completed run.
pub fn stability_monitor(
    diagnostics: &[StepDiagnostics],
    initial_l2_sq: f64,
    gamma_p: f64,
    dt: f64,
    factor: f64,
) -> StabilityReport {
    let mut acc = 0.0;
    let mut data_max: f64 = 0.0;
    let mut energy = Vec::with_capacity(diagnostics.len());
    let mut ratios = Vec::with_capacity(diagnostics.len());
    let scale = initial_l2_sq.max(f64::MIN_POSITIVE);
    for d in diagnostics {
        acc += dt * (d.triple_sq + gamma_p * d.cip_sq);
        data_max = data_max.max(d.forcing_sq + d.dirichlet_sq);
        let e = d.l2_sq + acc;
        let bound = initial_l2_sq + d.time * data_max;
        let ratio = if bound > 1e-300 {
            e / bound
        } else if e <= 1e-24 * scale.max(1.0) {
            0.0
        } else {
            f64::INFINITY
        };
        energy.push(e);
        ratios.push((d.time, ratio));
    }
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    // least-squares slope of log(ratio) over t, clamped at zero
    let pts: Vec<(f64, f64)> = ratios.iter().filter(|r| r.1 > 0.0 && r.1.is_finite()).map(|&(t, r)| (t, r.ln())).collect();
    let growth_rate = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 }
    } else {
        0.0
    };
    let max_detrended_ratio = ratios.iter().map(|&(t, r)| r * (-growth_rate * t).exp()).fold(0.0, f64::max);
    StabilityReport {
        max_energy: energy.iter().copied().fold(0.0, f64::max),
        max_ratio,
        growth_rate,
        max_detrended_ratio,
        factor,
        blow_up: !(max_detrended_ratio <= factor),
        energy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bdf_coefficients_are_consistent() {
        assert_eq!(bdf_coefficients(1).unwrap(), vec![1.0, -1.0]);
        let a = bdf_coefficients(2).unwrap();
        assert_eq!(a, vec![1.5, -2.0, 0.5]);
        assert_eq!(a.iter().sum::<f64>(), 0.0);
        assert!(bdf_coefficients(3).is_err());
        assert!(bdf_coefficients(0).is_err());
    }

    #[test]
    fn config_validation_names_the_field() {
        let c = SchemeConfig { bdf_order: 3, ..Default::default() };
        match c.validate() {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "s"),
            other => panic!("{other:?}"),
        }
        assert!(SchemeConfig { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(SchemeConfig::default().validate().is_ok());
    }

    #[test]
    fn step_count() {
        let c = SchemeConfig { dt: 0.2, t_final: 2.0, ..Default::default() };
        assert_eq!(c.n_steps(), 10);
        let c = SchemeConfig { dt: 0.8 / 16.0, t_final: 2.0, ..Default::default() };
        assert_eq!(c.n_steps(), 40);
    }

    #[test]
    fn monitor_of_zero_run() {
        let d = vec![StepDiagnostics { time: 0.1, ..Default::default() }; 3];
        let r = stability_monitor(&d, 0.0, 1e-3, 0.1, 10.0);
        assert_eq!(r.max_energy, 0.0);
        assert_eq!(r.max_ratio, 0.0);
        assert!(!r.blow_up);
    }

    #[test]
    fn parse_options() {
        assert_eq!("analytic_prev".parse::<Bdf2Init>().unwrap(), Bdf2Init::AnalyticPrev);
        assert_eq!("zero_mean".parse::<GaugeChoice>().unwrap(), GaugeChoice::Fixed(GaugeMode::ZeroMean));
        assert!("fancy".parse::<GaugeChoice>().is_err());
    }
}
