//! Face-based stabilizations: ghost penalty on the velocity (three variants)
//! and continuous interior penalty on the pressure.

use std::fmt;
use std::str::FromStr;

use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;

use crate::assembly::{assemble_dirichlet_boundary_mass, assemble_gradient_form, SlabContext};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linsolve::{SparseMatrix, TripletBuilder};
use crate::quadrature::{line_rule, map_triangle_rule, QuadPoint};
use crate::space::{CellBasis, MAX_LOCAL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum GhostVariant {
    #[default]
    Jump,
    Projection,
    Direct,
}

impl GhostVariant {
    pub const ALL: [GhostVariant; 3] = [GhostVariant::Jump, GhostVariant::Projection, GhostVariant::Direct];

    pub fn as_str(self) -> &'static str {
        match self {
            GhostVariant::Jump => "jump",
            GhostVariant::Projection => "projection",
            GhostVariant::Direct => "direct",
        }
    }
}

impl fmt::Display for GhostVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GhostVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jump" => Ok(GhostVariant::Jump),
            "projection" => Ok(GhostVariant::Projection),
            "direct" => Ok(GhostVariant::Direct),
            other => Err(Error::Config(format!(
                "unknown ghost penalty variant `{other}` (expected jump, projection or direct)"
            ))),
        }
    }
}

/// Local matrix over the concatenated DOF lists of the two cells of a face.
/// Global DOFs shared by both cells appear twice; scattering sums them.
struct PatchLocal {
    dofs: Vec<usize>,
    mat: Vec<f64>,
}

impl PatchLocal {
    fn n(&self) -> usize {
        self.dofs.len()
    }
}

fn patch_dofs(ctx: &SlabContext, f: usize) -> (Vec<usize>, [CellBasis; 2]) {
    let [k1, k2] = ctx.mesh.faces[f].cells;
    let mut dofs = ctx.space.cell_dofs(k1).to_vec();
    dofs.extend_from_slice(ctx.space.cell_dofs(k2));
    (dofs, [ctx.space.basis(ctx.mesh, k1), ctx.space.basis(ctx.mesh, k2)])
}

/// Visits (weight, jump vector) pairs with Σ_k scales[k-1] ∫_e ⟦∂ₙᵏu⟧⟦∂ₙᵏv⟧ =
/// Σ w (jump·u)(jump·v) over the patch DOFs.
fn derivative_jump_terms(ctx: &SlabContext, f: usize, basis: &[CellBasis; 2], scales: &[f64], mut visit: impl FnMut(f64, &[f64])) {
    let nl = ctx.space.n_local();
    let n2 = 2 * nl;
    let [a, b] = ctx.mesh.face_points(f);
    let len = ctx.mesh.face_length(f);
    let n = ctx.mesh.face_normal(f);
    let mut jump = vec![0.0; n2];
    let (mut v, mut g) = ([0.0; MAX_LOCAL], [[0.0; 2]; MAX_LOCAL]);
    // first derivatives: linear along the face for P2, degree-2 rule is exact
    if let Some(&s1) = scales.first() {
        for (s, w) in line_rule(2 * (ctx.space.degree - 1)) {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            for (side, sign) in [(0, 1.0), (1, -1.0)] {
                basis[side].eval(x, &mut v, &mut g);
                for i in 0..nl {
                    jump[side * nl + i] = sign * (g[i][0] * n[0] + g[i][1] * n[1]);
                }
            }
            visit(s1 * w * len, &jump);
        }
    }
    // second derivatives are constant per cell
    if ctx.space.degree >= 2 {
        if let Some(&s2) = scales.get(1) {
            for (side, sign) in [(0, 1.0), (1, -1.0)] {
                let h = basis[side].hessians();
                for i in 0..nl {
                    let hn = [h[i][0][0] * n[0] + h[i][0][1] * n[1], h[i][1][0] * n[0] + h[i][1][1] * n[1]];
                    jump[side * nl + i] = sign * (n[0] * hn[0] + n[1] * hn[1]);
                }
            }
            visit(s2 * len, &jump);
        }
    }
}

fn add_outer(mat: &mut [f64], w: f64, d: &[f64]) {
    let n2 = d.len();
    for i in 0..n2 {
        if d[i] == 0.0 {
            continue;
        }
        for j in 0..n2 {
            mat[i * n2 + j] += w * d[i] * d[j];
        }
    }
}

fn derivative_jump_local(ctx: &SlabContext, f: usize, scales: &[f64]) -> PatchLocal {
    let (dofs, basis) = patch_dofs(ctx, f);
    let mut mat = vec![0.0; dofs.len() * dofs.len()];
    derivative_jump_terms(ctx, f, &basis, scales, |w, d| add_outer(&mut mat, w, d));
    PatchLocal { dofs, mat }
}

fn patch_points(ctx: &SlabContext, f: usize, degree: usize) -> [Vec<QuadPoint>; 2] {
    let [k1, k2] = ctx.mesh.faces[f].cells;
    let mut q1 = Vec::new();
    let mut q2 = Vec::new();
    map_triangle_rule(&ctx.mesh.cell_vertices(k1), degree, &mut q1);
    map_triangle_rule(&ctx.mesh.cell_vertices(k2), degree, &mut q2);
    [q1, q2]
}

/// Scaled monomials of total degree ≤ m centred at `c`.
fn monomials(x: Point, c: Point, scale: f64, m: usize, out: &mut Vec<f64>) {
    out.clear();
    let (dx, dy) = ((x[0] - c[0]) / scale, (x[1] - c[1]) / scale);
    for total in 0..=m {
        for py in 0..=total {
            out.push(dx.powi((total - py) as i32) * dy.powi(py as i32));
        }
    }
}

/// ∫_{w_e} (u − π u) v with π the L² projection onto P_m(w_e).
fn projection_local(ctx: &SlabContext, f: usize) -> PatchLocal {
    let nl = ctx.space.n_local();
    let m = ctx.space.degree;
    let (dofs, basis) = patch_dofs(ctx, f);
    let n2 = 2 * nl;
    let nq = (m + 1) * (m + 2) / 2;
    let pts = patch_points(ctx, f, 2 * m);
    let [a, b] = ctx.mesh.face_points(f);
    let centre = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let scale = ctx.mesh.face_length(f);

    let mut mass = vec![0.0; n2 * n2];
    let mut coupling = Mat::<f64>::zeros(nq, n2);
    let mut gram = Mat::<f64>::zeros(nq, nq);
    let (mut v, mut g) = ([0.0; MAX_LOCAL], [[0.0; 2]; MAX_LOCAL]);
    let mut q = Vec::with_capacity(nq);
    for side in 0..2 {
        for p in &pts[side] {
            basis[side].eval(p.x, &mut v, &mut g);
            monomials(p.x, centre, scale, m, &mut q);
            let off = side * nl;
            for i in 0..nl {
                for j in 0..nl {
                    mass[(off + i) * n2 + off + j] += p.w * v[i] * v[j];
                }
                for r in 0..nq {
                    coupling[(r, off + i)] += p.w * q[r] * v[i];
                }
            }
            for r in 0..nq {
                for s in 0..nq {
                    gram[(r, s)] += p.w * q[r] * q[s];
                }
            }
        }
    }
    let reduced = gram.partial_piv_lu().solve(&coupling);
    let correction = coupling.transpose() * &reduced;
    for i in 0..n2 {
        for j in 0..n2 {
            mass[i * n2 + j] -= 0.5 * (correction[(i, j)] + correction[(j, i)]);
        }
    }
    PatchLocal { dofs, mat: mass }
}

/// Visits (weight, difference vector) pairs with
/// ∫_{w_e} (u₁ − u₂)(v₁ − v₂) = Σ w (d·u)(d·v), uᵢ the polynomial extension of u|_{Kᵢ}.
fn direct_terms(ctx: &SlabContext, f: usize, basis: &[CellBasis; 2], mut visit: impl FnMut(f64, &[f64])) {
    let nl = ctx.space.n_local();
    let pts = patch_points(ctx, f, 2 * ctx.space.degree);
    let (mut v, mut g) = ([0.0; MAX_LOCAL], [[0.0; 2]; MAX_LOCAL]);
    let mut d = vec![0.0; 2 * nl];
    for p in pts.iter().flatten() {
        for (side, sign) in [(0, 1.0), (1, -1.0)] {
            basis[side].eval(p.x, &mut v, &mut g);
            for i in 0..nl {
                d[side * nl + i] = sign * v[i];
            }
        }
        visit(p.w, &d);
    }
}

fn direct_local(ctx: &SlabContext, f: usize) -> PatchLocal {
    let (dofs, basis) = patch_dofs(ctx, f);
    let mut mat = vec![0.0; dofs.len() * dofs.len()];
    direct_terms(ctx, f, &basis, |w, d| add_outer(&mut mat, w, d));
    PatchLocal { dofs, mat }
}

fn ghost_local(ctx: &SlabContext, f: usize, variant: GhostVariant) -> PatchLocal {
    let h = ctx.h;
    match variant {
        GhostVariant::Jump => {
            let scales: Vec<f64> = (1..=ctx.space.degree).map(|k| h.powi(2 * k as i32 - 1)).collect();
            derivative_jump_local(ctx, f, &scales)
        }
        GhostVariant::Projection => {
            let mut l = projection_local(ctx, f);
            l.mat.iter_mut().for_each(|x| *x /= h * h);
            l
        }
        GhostVariant::Direct => {
            let mut l = direct_local(ctx, f);
            l.mat.iter_mut().for_each(|x| *x /= h * h);
            l
        }
    }
}

/// γ_g g_hⁿ(u, v) over the ghost faces, applied to each velocity component.
pub fn assemble_ghost_penalty(ctx: &SlabContext, variant: GhostVariant, gamma_g: f64) -> TripletBuilder {
    let locals: Vec<PatchLocal> = ctx.slab.faces_ghost.par_iter().map(|&f| ghost_local(ctx, f, variant)).collect();
    let mut out = ctx.builder();
    for l in &locals {
        let n = l.n();
        for comp in 0..2 {
            for i in 0..n {
                let Some(r) = ctx.dofs.u(comp, l.dofs[i]) else { continue };
                for j in 0..n {
                    let v = l.mat[i * n + j];
                    if v != 0.0 {
                        if let Some(c) = ctx.dofs.u(comp, l.dofs[j]) {
                            out.add(r, c, gamma_g * v);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Faces carrying the pressure stabilization with their derivative scalings.
fn cip_faces(ctx: &SlabContext) -> Vec<(usize, Vec<f64>)> {
    let h = ctx.h;
    let mut faces: Vec<(usize, Vec<f64>)> = ctx.slab.faces_int.iter().map(|&f| (f, vec![h.powi(3)])).collect();
    let cut_scales: Vec<f64> = (1..=ctx.space.degree).map(|k| h.powi(2 * k as i32 + 1)).collect();
    faces.extend(
        ctx.slab
            .faces_cut
            .iter()
            .filter(|&&f| ctx.mesh.faces[f].cells.iter().all(|&c| ctx.slab.is_physical(c)))
            .map(|&f| (f, cut_scales.clone())),
    );
    faces.sort_unstable_by_key(|x| x.0);
    faces
}

/// γ_p s_hⁿ(p, q): normal-derivative jumps over interior faces and cut faces
/// between two physical cells.
pub fn assemble_cip(ctx: &SlabContext, gamma_p: f64) -> TripletBuilder {
    let faces = cip_faces(ctx);
    let locals: Vec<PatchLocal> = faces.par_iter().map(|(f, s)| derivative_jump_local(ctx, *f, s)).collect();
    let mut out = ctx.builder();
    for l in &locals {
        let n = l.n();
        for i in 0..n {
            let Some(r) = ctx.dofs.p(l.dofs[i]) else { continue };
            for j in 0..n {
                let v = l.mat[i * n + j];
                if v != 0.0 {
                    if let Some(c) = ctx.dofs.p(l.dofs[j]) {
                        out.add(r, c, gamma_p * v);
                    }
                }
            }
        }
    }
    out
}

/// ∫_{w_e} (u − π u)² with π the L² projection onto P_m(w_e), from patch values.
fn projection_energy_local(ctx: &SlabContext, f: usize, basis: &[CellBasis; 2], values: &[f64]) -> f64 {
    let nl = ctx.space.n_local();
    let m = ctx.space.degree;
    let nq = (m + 1) * (m + 2) / 2;
    let pts = patch_points(ctx, f, 2 * m);
    let [a, b] = ctx.mesh.face_points(f);
    let centre = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let scale = ctx.mesh.face_length(f);
    let (mut v, mut g) = ([0.0; MAX_LOCAL], [[0.0; 2]; MAX_LOCAL]);
    let mut q = Vec::with_capacity(nq);
    let mut samples = Vec::new();
    let mut rhs = Mat::<f64>::zeros(nq, 1);
    let mut gram = Mat::<f64>::zeros(nq, nq);
    for side in 0..2 {
        for p in &pts[side] {
            basis[side].eval(p.x, &mut v, &mut g);
            let u: f64 = (0..nl).map(|i| v[i] * values[side * nl + i]).sum();
            monomials(p.x, centre, scale, m, &mut q);
            for r in 0..nq {
                rhs[(r, 0)] += p.w * q[r] * u;
                for s in 0..nq {
                    gram[(r, s)] += p.w * q[r] * q[s];
                }
            }
            samples.push((p.w, u, q.clone()));
        }
    }
    let c = gram.partial_piv_lu().solve(&rhs);
    samples
        .iter()
        .map(|(w, u, q)| {
            let r = u - (0..nq).map(|k| c[(k, 0)] * q[k]).sum::<f64>();
            w * r * r
        })
        .sum()
}

/// Patch values of one field component, zero on inactive DOFs.
fn patch_values(dofs: &[usize], x: &[f64], index: impl Fn(usize) -> Option<usize>) -> Vec<f64> {
    dofs.iter().map(|&d| index(d).map_or(0.0, |i| x[i])).collect()
}

/// γ_g g_hⁿ(u, u) evaluated directly from the field: squared derivative jumps,
/// projection residuals or extension differences at quadrature points. Agrees
/// with the assembled matrix and avoids the cancellation of uᵀGu on
/// polynomial fields.
pub fn ghost_penalty_form(ctx: &SlabContext, variant: GhostVariant, gamma_g: f64, x: &[f64]) -> f64 {
    let h = ctx.h;
    let parts: Vec<f64> = ctx
        .slab
        .faces_ghost
        .par_iter()
        .map(|&f| {
            let (dofs, basis) = patch_dofs(ctx, f);
            let mut sum = 0.0;
            for comp in 0..2 {
                let vals = patch_values(&dofs, x, |d| ctx.dofs.u(comp, d));
                let mut acc = 0.0;
                let mut visit = |w: f64, d: &[f64]| {
                    let j: f64 = d.iter().zip(&vals).map(|(a, b)| a * b).sum();
                    acc += w * j * j;
                };
                match variant {
                    GhostVariant::Jump => {
                        let scales: Vec<f64> = (1..=ctx.space.degree).map(|k| h.powi(2 * k as i32 - 1)).collect();
                        derivative_jump_terms(ctx, f, &basis, &scales, &mut visit);
                    }
                    GhostVariant::Projection => acc = projection_energy_local(ctx, f, &basis, &vals) / (h * h),
                    GhostVariant::Direct => {
                        direct_terms(ctx, f, &basis, &mut visit);
                        acc /= h * h;
                    }
                }
                sum += acc;
            }
            sum
        })
        .collect();
    gamma_g * parts.iter().sum::<f64>()
}

/// γ_p s_hⁿ(p, p) evaluated directly from squared derivative jumps.
pub fn cip_form(ctx: &SlabContext, gamma_p: f64, x: &[f64]) -> f64 {
    let parts: Vec<f64> = cip_faces(ctx)
        .par_iter()
        .map(|(f, scales)| {
            let (dofs, basis) = patch_dofs(ctx, *f);
            let vals = patch_values(&dofs, x, |d| ctx.dofs.p(d));
            let mut acc = 0.0;
            derivative_jump_terms(ctx, *f, &basis, scales, |w, d| {
                let j: f64 = d.iter().zip(&vals).map(|(a, b)| a * b).sum();
                acc += w * j * j;
            });
            acc
        })
        .collect();
    gamma_p * parts.iter().sum::<f64>()
}

/// The three quadratic forms making up the triple norm.
pub struct TripleNormParts {
    pub gradient: SparseMatrix,
    /// Unscaled ghost penalty g_hⁿ.
    pub ghost: SparseMatrix,
    /// Mass on the Dirichlet part of ∂Ωⁿ.
    pub boundary: SparseMatrix,
    pub gamma_d: f64,
    pub gamma_g: f64,
    pub h: f64,
}

impl TripleNormParts {
    pub fn new(ctx: &SlabContext, gamma_d: f64, gamma_g: f64, variant: GhostVariant) -> Self {
        Self {
            gradient: assemble_gradient_form(ctx),
            ghost: assemble_ghost_penalty(ctx, variant, 1.0).build(),
            boundary: assemble_dirichlet_boundary_mass(ctx),
            gamma_d,
            gamma_g,
            h: ctx.h,
        }
    }

    /// Squared triple norm of a compressed solution vector.
    pub fn squared(&self, x: &[f64]) -> f64 {
        let x = &x[..self.gradient.nrows().min(x.len())];
        self.gradient.bilinear(x, x)
            + self.gamma_g * self.ghost.bilinear(x, x)
            + self.gamma_d / self.h * self.boundary.bilinear(x, x)
    }
}

/// (‖∇u‖²_{Ωⁿ} + γ_g g_hⁿ(u,u) + (γ_D/h)‖u‖²_{∂Ωⁿ_D})^{1/2}
pub fn triple_norm(ctx: &SlabContext, x: &[f64], gamma_d: f64, gamma_g: f64, variant: GhostVariant) -> f64 {
    TripleNormParts::new(ctx, gamma_d, gamma_g, variant).squared(x).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_strings_round_trip() {
        for v in GhostVariant::ALL {
            assert_eq!(v.as_str().parse::<GhostVariant>().unwrap(), v);
        }
        assert!("reduced".parse::<GhostVariant>().is_err());
    }

    #[test]
    fn monomial_count() {
        let mut q = Vec::new();
        monomials([1.0, 2.0], [0.0, 0.0], 1.0, 2, &mut q);
        assert_eq!(q, vec![1.0, 1.0, 2.0, 1.0, 2.0, 4.0]);
    }
}
