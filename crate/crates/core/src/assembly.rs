//! Assembly of the Stokes form, Nitsche boundary terms, BDF time terms and
//! forcing on cut meshes.
//!
//! Unknowns are ordered as all x-velocity DOFs, all y-velocity DOFs, the
//! pressure DOFs and optionally one mean-value multiplier (see [`DofMap`]).
//! Element contributions are computed in parallel and scattered in cell
//! order, so assembled matrices are bit-reproducible.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, DomainMotion, Point};
use crate::linsolve::{solve, SparseMatrix, TripletBuilder};
use crate::mesh::{ActiveSlabMesh, BackgroundMesh};
use crate::quadrature::{CellQuadrature, CutQuadrature};
use crate::space::{CellBasis, DofMap, FieldState, LagrangeSpace, MAX_LOCAL};

pub type Local = [[f64; MAX_LOCAL]; MAX_LOCAL];

pub type ForcingFn = dyn Fn(Point, f64) -> [f64; 2] + Send + Sync;

/// Everything needed to assemble on one time level.
#[derive(Clone, Copy)]
pub struct SlabContext<'a> {
    pub mesh: &'a BackgroundMesh,
    pub space: &'a LagrangeSpace,
    pub slab: &'a ActiveSlabMesh,
    pub quad: &'a CutQuadrature,
    pub dofs: &'a DofMap,
    /// Mesh size used in all penalty scalings (minimal edge length).
    pub h: f64,
}

impl SlabContext<'_> {
    pub fn n(&self) -> usize {
        self.dofs.n_unknowns()
    }

    pub fn builder(&self) -> TripletBuilder {
        TripletBuilder::new(self.n(), self.n())
    }

    fn basis(&self, c: usize) -> CellBasis {
        self.space.basis(self.mesh, c)
    }
}

/// Matrix and right-hand side pieces of one term.
#[derive(Clone, Debug)]
pub struct Contribution {
    pub matrix: TripletBuilder,
    pub rhs: Vec<f64>,
}

impl Contribution {
    pub fn new(n: usize) -> Self {
        Self { matrix: TripletBuilder::new(n, n), rhs: vec![0.0; n] }
    }
}

pub(crate) fn scatter_velocity(b: &mut TripletBuilder, dofs: &DofMap, cell_dofs: &[usize], local: &Local, scale: f64) {
    for comp in 0..2 {
        for (a, &da) in cell_dofs.iter().enumerate() {
            let Some(i) = dofs.u(comp, da) else { continue };
            for (bb, &db) in cell_dofs.iter().enumerate() {
                let v = local[a][bb];
                if v != 0.0 {
                    if let Some(j) = dofs.u(comp, db) {
                        b.add(i, j, scale * v);
                    }
                }
            }
        }
    }
}

pub(crate) fn scatter_pressure(b: &mut TripletBuilder, dofs: &DofMap, cell_dofs: &[usize], local: &Local, scale: f64) {
    for (a, &da) in cell_dofs.iter().enumerate() {
        let Some(i) = dofs.p(da) else { continue };
        for (bb, &db) in cell_dofs.iter().enumerate() {
            let v = local[a][bb];
            if v != 0.0 {
                if let Some(j) = dofs.p(db) {
                    b.add(i, j, scale * v);
                }
            }
        }
    }
}

struct QpIter<'a> {
    basis: CellBasis,
    cq: &'a CellQuadrature,
}

impl QpIter<'_> {
    fn volume(&self, mut f: impl FnMut(Point, f64, &[f64; MAX_LOCAL], &[[f64; 2]; MAX_LOCAL])) {
        let mut v = [0.0; MAX_LOCAL];
        let mut g = [[0.0; 2]; MAX_LOCAL];
        for q in &self.cq.volume {
            self.basis.eval(q.x, &mut v, &mut g);
            f(q.x, q.w, &v, &g);
        }
    }
}

struct StokesLocal {
    cell: usize,
    stiffness: Local,
    /// `div_coupling[c][a][b] = ∫ ∂_c φ_a ψ_b`
    div_coupling: [Local; 2],
}

/// (∇u, ∇v) − (p, div v) + (div u, q) over Ωⁿ.
pub fn assemble_stokes(ctx: &SlabContext) -> TripletBuilder {
    let nl = ctx.space.n_local();
    let locals: Vec<StokesLocal> = ctx
        .quad
        .cells
        .par_iter()
        .map(|cq| {
            let it = QpIter { basis: ctx.basis(cq.cell), cq };
            let mut k = [[0.0; MAX_LOCAL]; MAX_LOCAL];
            let mut d = [[[0.0; MAX_LOCAL]; MAX_LOCAL]; 2];
            it.volume(|_, w, v, g| {
                for a in 0..nl {
                    for b in 0..nl {
                        k[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                        d[0][a][b] += w * g[a][0] * v[b];
                        d[1][a][b] += w * g[a][1] * v[b];
                    }
                }
            });
            StokesLocal { cell: cq.cell, stiffness: k, div_coupling: d }
        })
        .collect();

    let mut out = ctx.builder();
    for l in &locals {
        let cd = ctx.space.cell_dofs(l.cell);
        scatter_velocity(&mut out, ctx.dofs, cd, &l.stiffness, 1.0);
        for comp in 0..2 {
            for (a, &da) in cd.iter().enumerate() {
                for (b, &db) in cd.iter().enumerate() {
                    let v = l.div_coupling[comp][a][b];
                    if v == 0.0 {
                        continue;
                    }
                    // test velocity a, trial pressure b: −(p, div v)
                    if let (Some(i), Some(j)) = (ctx.dofs.u(comp, da), ctx.dofs.p(db)) {
                        out.add(i, j, -v);
                    }
                    // test pressure b, trial velocity a: (div u, q)
                    if let (Some(i), Some(j)) = (ctx.dofs.p(db), ctx.dofs.u(comp, da)) {
                        out.add(i, j, v);
                    }
                }
            }
        }
    }
    out
}

/// Velocity gradient form (∇u, ∇v)_{Ωⁿ} alone, per component.
pub fn assemble_gradient_form(ctx: &SlabContext) -> SparseMatrix {
    let nl = ctx.space.n_local();
    let locals: Vec<(usize, Local)> = ctx
        .quad
        .cells
        .par_iter()
        .map(|cq| {
            let mut k = [[0.0; MAX_LOCAL]; MAX_LOCAL];
            QpIter { basis: ctx.basis(cq.cell), cq }.volume(|_, w, _, g| {
                for a in 0..nl {
                    for b in 0..nl {
                        k[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    }
                }
            });
            (cq.cell, k)
        })
        .collect();
    let mut out = ctx.builder();
    for (c, k) in &locals {
        scatter_velocity(&mut out, ctx.dofs, ctx.space.cell_dofs(*c), k, 1.0);
    }
    out.build()
}

fn local_mass(ctx: &SlabContext, cq: &CellQuadrature) -> Local {
    let nl = ctx.space.n_local();
    let mut m = [[0.0; MAX_LOCAL]; MAX_LOCAL];
    QpIter { basis: ctx.basis(cq.cell), cq }.volume(|_, w, v, _| {
        for a in 0..nl {
            for b in 0..nl {
                m[a][b] += w * v[a] * v[b];
            }
        }
    });
    m
}

/// Velocity mass matrix over the quadrature region, per component.
pub fn assemble_mass(ctx: &SlabContext) -> SparseMatrix {
    let locals: Vec<(usize, Local)> = ctx.quad.cells.par_iter().map(|cq| (cq.cell, local_mass(ctx, cq))).collect();
    let mut out = ctx.builder();
    for (c, m) in &locals {
        scatter_velocity(&mut out, ctx.dofs, ctx.space.cell_dofs(*c), m, 1.0);
    }
    out.build()
}

/// Pressure mass matrix over Ωⁿ.
pub fn assemble_pressure_mass(ctx: &SlabContext) -> SparseMatrix {
    let locals: Vec<(usize, Local)> = ctx.quad.cells.par_iter().map(|cq| (cq.cell, local_mass(ctx, cq))).collect();
    let mut out = ctx.builder();
    for (c, m) in &locals {
        scatter_pressure(&mut out, ctx.dofs, ctx.space.cell_dofs(*c), m, 1.0);
    }
    out.build()
}

/// Which parts of the Nitsche form to include.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NitscheParts {
    All,
    PenaltyOnly,
    ConsistencyOnly,
}

/// Nitsche terms on the Dirichlet part of ∂Ωⁿ:
/// −(∂ₙu − p n, v) − (u, ∂ₙv + q n) + (γ_D/h)(u, v), with right-hand side
/// −(u_D, ∂ₙv + q n) + (γ_D/h)(u_D, v). Do-nothing pieces contribute nothing.
pub fn assemble_nitsche(ctx: &SlabContext, motion: &DomainMotion, gamma_d: f64, t: f64) -> Result<Contribution> {
    assemble_nitsche_parts(ctx, motion, gamma_d, t, NitscheParts::All)
}

pub fn assemble_nitsche_parts(
    ctx: &SlabContext,
    motion: &DomainMotion,
    gamma_d: f64,
    t: f64,
    parts: NitscheParts,
) -> Result<Contribution> {
    if !(gamma_d > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma_d", reason: format!("must be positive, got {gamma_d}") });
    }
    let nl = ctx.space.n_local();
    let pen = gamma_d / ctx.h;
    let (use_cons, use_pen) = match parts {
        NitscheParts::All => (true, true),
        NitscheParts::PenaltyOnly => (false, true),
        NitscheParts::ConsistencyOnly => (true, false),
    };
    struct NitscheLocal {
        cell: usize,
        vv: Local,
        /// test velocity a (comp c), trial pressure b: ∫ φ_a n_c ψ_b
        vp: [Local; 2],
        rhs_v: [[f64; MAX_LOCAL]; 2],
        rhs_q: [f64; MAX_LOCAL],
    }
    let locals: Vec<NitscheLocal> = ctx
        .quad
        .cells
        .par_iter()
        .filter(|cq| cq.surface.iter().any(|s| s.tag == BoundaryTag::Dirichlet))
        .map(|cq| {
            let basis = ctx.basis(cq.cell);
            let mut l = NitscheLocal {
                cell: cq.cell,
                vv: [[0.0; MAX_LOCAL]; MAX_LOCAL],
                vp: [[[0.0; MAX_LOCAL]; MAX_LOCAL]; 2],
                rhs_v: [[0.0; MAX_LOCAL]; 2],
                rhs_q: [0.0; MAX_LOCAL],
            };
            let mut v = [0.0; MAX_LOCAL];
            let mut g = [[0.0; 2]; MAX_LOCAL];
            for s in cq.surface.iter().filter(|s| s.tag == BoundaryTag::Dirichlet) {
                basis.eval(s.x, &mut v, &mut g);
                let n = s.normal;
                let dn: Vec<f64> = (0..nl).map(|a| g[a][0] * n[0] + g[a][1] * n[1]).collect();
                let ud = motion.dirichlet_data(s.x, t);
                for a in 0..nl {
                    for b in 0..nl {
                        let mut e = 0.0;
                        if use_cons {
                            e -= dn[b] * v[a] + v[b] * dn[a];
                        }
                        if use_pen {
                            e += pen * v[a] * v[b];
                        }
                        l.vv[a][b] += s.w * e;
                        if use_cons {
                            l.vp[0][a][b] += s.w * v[a] * n[0] * v[b];
                            l.vp[1][a][b] += s.w * v[a] * n[1] * v[b];
                        }
                    }
                    for c in 0..2 {
                        let mut r = 0.0;
                        if use_cons {
                            r -= ud[c] * dn[a];
                        }
                        if use_pen {
                            r += pen * ud[c] * v[a];
                        }
                        l.rhs_v[c][a] += s.w * r;
                    }
                    if use_cons {
                        l.rhs_q[a] -= s.w * (ud[0] * n[0] + ud[1] * n[1]) * v[a];
                    }
                }
            }
            l
        })
        .collect();

    let mut out = Contribution::new(ctx.n());
    for l in &locals {
        let cd = ctx.space.cell_dofs(l.cell);
        scatter_velocity(&mut out.matrix, ctx.dofs, cd, &l.vv, 1.0);
        for comp in 0..2 {
            for (a, &da) in cd.iter().enumerate() {
                for (b, &db) in cd.iter().enumerate() {
                    let v = l.vp[comp][a][b];
                    if v == 0.0 {
                        continue;
                    }
                    // +(p n, v)
                    if let (Some(i), Some(j)) = (ctx.dofs.u(comp, da), ctx.dofs.p(db)) {
                        out.matrix.add(i, j, v);
                    }
                    // −(u·n, q) with test pressure b, trial velocity a
                    if let (Some(i), Some(j)) = (ctx.dofs.p(db), ctx.dofs.u(comp, da)) {
                        out.matrix.add(i, j, -v);
                    }
                }
                if let Some(i) = ctx.dofs.u(comp, da) {
                    out.rhs[i] += l.rhs_v[comp][a];
                }
            }
        }
        for (a, &da) in cd.iter().enumerate() {
            if let Some(i) = ctx.dofs.p(da) {
                out.rhs[i] += l.rhs_q[a];
            }
        }
    }
    Ok(out)
}

/// Boundary mass (u, v) over the Dirichlet part of ∂Ωⁿ, per component.
pub fn assemble_dirichlet_boundary_mass(ctx: &SlabContext) -> SparseMatrix {
    let nl = ctx.space.n_local();
    let locals: Vec<(usize, Local)> = ctx
        .quad
        .cells
        .par_iter()
        .filter(|cq| !cq.surface.is_empty())
        .map(|cq| {
            let basis = ctx.basis(cq.cell);
            let mut m = [[0.0; MAX_LOCAL]; MAX_LOCAL];
            let mut v = [0.0; MAX_LOCAL];
            let mut g = [[0.0; 2]; MAX_LOCAL];
            for s in cq.surface.iter().filter(|s| s.tag == BoundaryTag::Dirichlet) {
                basis.eval(s.x, &mut v, &mut g);
                for a in 0..nl {
                    for b in 0..nl {
                        m[a][b] += s.w * v[a] * v[b];
                    }
                }
            }
            (cq.cell, m)
        })
        .collect();
    let mut out = ctx.builder();
    for (c, m) in &locals {
        scatter_velocity(&mut out, ctx.dofs, ctx.space.cell_dofs(*c), m, 1.0);
    }
    out.build()
}

/// (f, v)_{Ωⁿ}
pub fn assemble_forcing(ctx: &SlabContext, f: &ForcingFn, t: f64) -> Vec<f64> {
    let nl = ctx.space.n_local();
    let locals: Vec<(usize, [[f64; MAX_LOCAL]; 2])> = ctx
        .quad
        .cells
        .par_iter()
        .map(|cq| {
            let mut r = [[0.0; MAX_LOCAL]; 2];
            QpIter { basis: ctx.basis(cq.cell), cq }.volume(|x, w, v, _| {
                let fx = f(x, t);
                for a in 0..nl {
                    r[0][a] += w * fx[0] * v[a];
                    r[1][a] += w * fx[1] * v[a];
                }
            });
            (cq.cell, r)
        })
        .collect();
    let mut rhs = vec![0.0; ctx.n()];
    for (c, r) in &locals {
        for (a, &d) in ctx.space.cell_dofs(*c).iter().enumerate() {
            for comp in 0..2 {
                if let Some(i) = ctx.dofs.u(comp, d) {
                    rhs[i] += r[comp][a];
                }
            }
        }
    }
    rhs
}

/// BDF(s) coefficients (α₀, …, α_s); D_t u = Σ αᵢ u^{n−i} / Δt.
pub fn bdf_coefficients(s: usize) -> Result<Vec<f64>> {
    match s {
        1 => Ok(vec![1.0, -1.0]),
        2 => Ok(vec![1.5, -2.0, 0.5]),
        _ => Err(Error::InvalidParameter { name: "s", reason: format!("BDF order must be 1 or 2, got {s}") }),
    }
}

/// (α₀/Δt)(u, v)_{Ωⁿ} on the matrix and −Σ_{i≥1} (αᵢ/Δt)(u^{n−i}, v)_{Ωⁿ}
/// on the right-hand side. `history[i-1]` holds u^{n−i}; every DOF of every
/// physical cell must be active in each of them.
pub fn assemble_time_terms(ctx: &SlabContext, alpha: &[f64], dt: f64, history: &[&FieldState]) -> Result<Contribution> {
    if history.len() + 1 != alpha.len() {
        return Err(Error::InvalidParameter {
            name: "history",
            reason: format!("BDF with {} coefficients needs {} previous states", alpha.len(), alpha.len() - 1),
        });
    }
    for (i, state) in history.iter().enumerate() {
        for &c in &ctx.slab.cells_phys {
            if let Some(&d) = ctx.space.cell_dofs(c).iter().find(|&&d| !state.velocity_active[d]) {
                return Err(Error::ContainmentViolation {
                    step: ctx.slab.step_index,
                    detail: format!("DOF {d} of physical cell {c} is inactive in u^(n-{})", i + 1),
                });
            }
        }
    }
    let nl = ctx.space.n_local();
    let locals: Vec<(usize, Local)> = ctx.quad.cells.par_iter().map(|cq| (cq.cell, local_mass(ctx, cq))).collect();
    let mut out = Contribution::new(ctx.n());
    for (c, m) in &locals {
        let cd = ctx.space.cell_dofs(*c);
        scatter_velocity(&mut out.matrix, ctx.dofs, cd, m, alpha[0] / dt);
        for comp in 0..2 {
            for a in 0..nl {
                let Some(i) = ctx.dofs.u(comp, cd[a]) else { continue };
                let mut r = 0.0;
                for (k, state) in history.iter().enumerate() {
                    let mu: f64 = (0..nl).map(|b| m[a][b] * state.u[comp][cd[b]]).sum();
                    r -= alpha[k + 1] / dt * mu;
                }
                out.rhs[i] += r;
            }
        }
    }
    Ok(out)
}

pub type VelocityField<'a> = &'a (dyn Fn(Point) -> [f64; 2] + Sync);

/// L² projection of an analytic velocity field onto the active velocity
/// DOFs, using the volume rules of `quad` (typically over Ω_δ). An optional
/// `stabilization` (full-size, velocity block used) is added to the mass
/// matrix; it must vanish on polynomials of the space degree.
pub fn l2_project(
    ctx: &SlabContext,
    field: VelocityField,
    stabilization: Option<&SparseMatrix>,
    rel_tol: f64,
) -> Result<FieldState> {
    let nl = ctx.space.n_local();
    let nv = ctx.dofs.n_velocity();
    let mut mass = assemble_mass(ctx).block(0..nv, 0..nv);
    if let Some(s) = stabilization {
        mass = mass.add(&s.block(0..nv, 0..nv));
    }
    let locals: Vec<(usize, [[f64; MAX_LOCAL]; 2])> = ctx
        .quad
        .cells
        .par_iter()
        .map(|cq| {
            let mut r = [[0.0; MAX_LOCAL]; 2];
            QpIter { basis: ctx.basis(cq.cell), cq }.volume(|x, w, v, _| {
                let u = field(x);
                for a in 0..nl {
                    r[0][a] += w * u[0] * v[a];
                    r[1][a] += w * u[1] * v[a];
                }
            });
            (cq.cell, r)
        })
        .collect();
    let mut rhs = [vec![0.0; nv], vec![0.0; nv]];
    for (c, r) in &locals {
        for (a, &d) in ctx.space.cell_dofs(*c).iter().enumerate() {
            if let Some(i) = ctx.dofs.u(0, d) {
                rhs[0][i] += r[0][a];
                rhs[1][i] += r[1][a];
            }
        }
    }
    // every active DOF needs support in the integration region
    if (0..nv).any(|i| mass.get(i, i) <= 0.0) {
        return Err(Error::Singular("projection mass matrix has an empty row".into()));
    }
    let mut x = vec![0.0; ctx.n()];
    for comp in 0..2 {
        let s = solve(&mass, &rhs[comp], rel_tol)?;
        x[comp * nv..(comp + 1) * nv].copy_from_slice(&s.x);
    }
    let mut state = FieldState::from_solution(ctx.space.n_dofs, ctx.dofs, &x);
    state.pressure_active.iter_mut().for_each(|a| *a = false);
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaugeMode {
    None,
    ZeroMean,
}

/// Unknown layout of an assembled system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub multiplier: bool,
}

impl BlockLayout {
    pub fn velocity(&self) -> std::ops::Range<usize> {
        0..2 * self.n_velocity
    }

    pub fn pressure(&self) -> std::ops::Range<usize> {
        2 * self.n_velocity..2 * self.n_velocity + self.n_pressure
    }
}

#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub layout: BlockLayout,
}

impl AssembledSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>, dofs: &DofMap) -> Self {
        Self {
            matrix,
            rhs,
            layout: BlockLayout { n_velocity: dofs.n_velocity(), n_pressure: dofs.n_pressure(), multiplier: false },
        }
    }

    /// Relative asymmetry of the velocity block.
    pub fn velocity_asymmetry(&self) -> f64 {
        let a = self.matrix.block(self.layout.velocity(), self.layout.velocity());
        let d = a.add(&a.transpose().scaled(-1.0));
        d.max_abs() / a.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Relative deviation from B_pu = −B_upᵀ.
    pub fn coupling_skewness(&self) -> f64 {
        let up = self.matrix.block(self.layout.velocity(), self.layout.pressure());
        let pu = self.matrix.block(self.layout.pressure(), self.layout.velocity());
        let d = pu.add(&up.transpose());
        d.max_abs() / up.max_abs().max(pu.max_abs()).max(f64::MIN_POSITIVE)
    }
}

/// Fixes the pressure constant. `None` is accepted only when a do-nothing
/// boundary exists; `ZeroMean` appends a multiplier enforcing (p, 1)_{Ωⁿ} = 0.
pub fn apply_pressure_gauge(
    system: AssembledSystem,
    ctx: &SlabContext,
    has_do_nothing: bool,
    mode: GaugeMode,
) -> Result<AssembledSystem> {
    match mode {
        GaugeMode::None if !has_do_nothing => Err(Error::Gauge(
            "gauge `none` with Dirichlet data on the whole boundary leaves the constant pressure undetermined; \
             use zero_mean"
                .into(),
        )),
        GaugeMode::None => Ok(system),
        GaugeMode::ZeroMean => {
            let nl = ctx.space.n_local();
            let n = system.matrix.nrows();
            let lambda = n;
            let mut t = system.matrix.triplets();
            let mut ones = vec![0.0; n];
            for cq in &ctx.quad.cells {
                let cd = ctx.space.cell_dofs(cq.cell);
                QpIter { basis: ctx.basis(cq.cell), cq }.volume(|_, w, v, _| {
                    for a in 0..nl {
                        if let Some(i) = ctx.dofs.p(cd[a]) {
                            ones[i] += w * v[a];
                        }
                    }
                });
            }
            for (i, &m) in ones.iter().enumerate() {
                if m != 0.0 {
                    t.push((i, lambda, m));
                    t.push((lambda, i, m));
                }
            }
            let mut rhs = system.rhs;
            rhs.push(0.0);
            let mut layout = system.layout;
            layout.multiplier = true;
            Ok(AssembledSystem { matrix: SparseMatrix::from_triplets(n + 1, n + 1, &t), rhs, layout })
        }
    }
}

/// Convenience for building a context from owned parts.
pub fn context<'a>(
    mesh: &'a BackgroundMesh,
    space: &'a LagrangeSpace,
    slab: &'a ActiveSlabMesh,
    quad: &'a CutQuadrature,
    dofs: &'a DofMap,
) -> SlabContext<'a> {
    SlabContext { mesh, space, slab, quad, dofs, h: mesh.h_min }
}
