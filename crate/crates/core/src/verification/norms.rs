//! Discrete space-time error norms (Σₙ Δt ‖e(tₙ)‖²)^{1/2}.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{ActiveSlabMesh, BackgroundMesh};
use crate::quadrature::CutQuadrature;
use crate::space::{FieldState, LagrangeSpace, MAX_LOCAL};

use super::manufactured::ManufacturedCase;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormKind {
    VelocityL2,
    VelocityH1,
    PressureL2,
    PressureH1,
}

impl NormKind {
    pub const ALL: [NormKind; 4] = [NormKind::VelocityL2, NormKind::VelocityH1, NormKind::PressureL2, NormKind::PressureH1];

    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::VelocityL2 => "u_L2L2",
            NormKind::VelocityH1 => "u_L2H1",
            NormKind::PressureL2 => "p_L2L2",
            NormKind::PressureH1 => "p_L2H1",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Squared spatial errors and exact norms at one time level, in
/// [`NormKind`] order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LevelErrors {
    pub error_sq: [f64; 4],
    pub exact_sq: [f64; 4],
}

/// Errors of a discrete state against the manufactured solution on Ωⁿ,
/// with degree 2m+2 cut quadrature. With `mean_free_pressure` both
/// pressures are compared after removing their means over Ωⁿ.
pub fn level_errors(
    mesh: &BackgroundMesh,
    space: &LagrangeSpace,
    slab: &ActiveSlabMesh,
    state: &FieldState,
    case: &ManufacturedCase,
    t: f64,
    mean_free_pressure: bool,
) -> LevelErrors {
    let deg = 2 * space.degree + 2;
    let quad = CutQuadrature::new(mesh, slab, deg, 1);
    let nl = space.n_local();
    let (p_shift, pe_shift) = if mean_free_pressure {
        let mut acc = [0.0; 3];
        for cq in &quad.cells {
            let basis = space.basis(mesh, cq.cell);
            let cd = space.cell_dofs(cq.cell);
            let (mut v, mut g) = ([0.0; MAX_LOCAL], [[0.0; 2]; MAX_LOCAL]);
            for q in &cq.volume {
                basis.eval(q.x, &mut v, &mut g);
                let ph: f64 = (0..nl).map(|a| state.p[cd[a]] * v[a]).sum();
                acc[0] += q.w * ph;
                acc[1] += q.w * case.pressure(q.x, t);
                acc[2] += q.w;
            }
        }
        (acc[0] / acc[2], acc[1] / acc[2])
    } else {
        (0.0, 0.0)
    };
    quad.cells
        .par_iter()
        .map(|cq| {
            let basis = space.basis(mesh, cq.cell);
            let cd = space.cell_dofs(cq.cell);
            let (mut v, mut g) = ([0.0; MAX_LOCAL], [[0.0; 2]; MAX_LOCAL]);
            let mut out = LevelErrors::default();
            for q in &cq.volume {
                basis.eval(q.x, &mut v, &mut g);
                let mut uh = [0.0; 2];
                let mut guh = [[0.0; 2]; 2];
                let mut ph = 0.0;
                let mut gph = [0.0; 2];
                for a in 0..nl {
                    let d = cd[a];
                    for i in 0..2 {
                        uh[i] += state.u[i][d] * v[a];
                        for j in 0..2 {
                            guh[i][j] += state.u[i][d] * g[a][j];
                        }
                        gph[i] += state.p[d] * g[a][i];
                    }
                    ph += state.p[d] * v[a];
                }
                let ue = case.velocity(q.x, t);
                let gue = case.velocity_gradient(q.x, t);
                let pe = case.pressure(q.x, t) - pe_shift;
                let gpe = case.pressure_gradient(q.x, t);
                let w = q.w;
                let sq = |a: f64| a * a;
                out.error_sq[0] += w * (sq(ue[0] - uh[0]) + sq(ue[1] - uh[1]));
                out.exact_sq[0] += w * (sq(ue[0]) + sq(ue[1]));
                for i in 0..2 {
                    for j in 0..2 {
                        out.error_sq[1] += w * sq(gue[i][j] - guh[i][j]);
                        out.exact_sq[1] += w * sq(gue[i][j]);
                    }
                }
                out.error_sq[2] += w * sq(pe - (ph - p_shift));
                out.exact_sq[2] += w * sq(pe);
                out.error_sq[3] += w * (sq(gpe[0] - gph[0]) + sq(gpe[1] - gph[1]));
                out.exact_sq[3] += w * (sq(gpe[0]) + sq(gpe[1]));
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(LevelErrors::default(), |mut acc, l| {
            for k in 0..4 {
                acc.error_sq[k] += l.error_sq[k];
                acc.exact_sq[k] += l.exact_sq[k];
            }
            acc
        })
}

/// Running sums Σₙ Δt ‖·‖² of errors and exact norms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorAccumulator {
    pub error_sq: [f64; 4],
    pub exact_sq: [f64; 4],
    pub steps: usize,
    /// Per-step spatial errors ‖e(tₙ)‖, for plotting.
    pub history: Vec<(f64, [f64; 4])>,
}

impl ErrorAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, t: f64, dt: f64, level: &LevelErrors) {
        for k in 0..4 {
            self.error_sq[k] += dt * level.error_sq[k];
            self.exact_sq[k] += dt * level.exact_sq[k];
        }
        self.steps += 1;
        self.history.push((t, level.error_sq.map(f64::sqrt)));
    }

    /// Normalized errors; fails when an exact norm vanishes.
    pub fn finish(&self) -> Result<SpaceTimeErrors> {
        let mut rel = [0.0; 4];
        for kind in NormKind::ALL {
            let k = kind.index();
            if !(self.exact_sq[k] > 0.0) {
                return Err(Error::ZeroNormalizer { norm: kind.as_str() });
            }
            rel[k] = (self.error_sq[k] / self.exact_sq[k]).sqrt();
        }
        Ok(SpaceTimeErrors {
            relative: rel,
            absolute: self.error_sq.map(f64::sqrt),
            exact: self.exact_sq.map(f64::sqrt),
        })
    }

    /// Velocity norms only, for cases whose exact pressure vanishes.
    pub fn finish_partial(&self) -> [Option<f64>; 4] {
        let mut out = [None; 4];
        for k in 0..4 {
            if self.exact_sq[k] > 0.0 {
                out[k] = Some((self.error_sq[k] / self.exact_sq[k]).sqrt());
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimeErrors {
    pub relative: [f64; 4],
    pub absolute: [f64; 4],
    pub exact: [f64; 4],
}

impl SpaceTimeErrors {
    pub fn get(&self, kind: NormKind) -> f64 {
        self.relative[kind.index()]
    }
}
