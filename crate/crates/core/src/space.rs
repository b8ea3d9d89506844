//! Continuous P1/P2 Lagrange spaces on the background mesh and the
//! per-step compression of active degrees of freedom.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::{ActiveSlabMesh, BackgroundMesh};
use crate::quadrature::{cross, sub};

pub const MAX_LOCAL: usize = 6;

/// Affine geometry of one triangle and its P_m basis. Basis functions are
/// polynomials, so they can be evaluated outside the cell as well
/// (canonical extension).
#[derive(Clone, Copy, Debug)]
pub struct CellBasis {
    pub vertices: [Point; 3],
    pub grad_lambda: [[f64; 2]; 3],
    pub area: f64,
    pub degree: usize,
}

impl CellBasis {
    pub fn new(vertices: [Point; 3], degree: usize) -> Self {
        let e1 = sub(vertices[1], vertices[0]);
        let e2 = sub(vertices[2], vertices[0]);
        let det = cross(e1, e2);
        let g1 = [e2[1] / det, -e2[0] / det];
        let g2 = [-e1[1] / det, e1[0] / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        Self { vertices, grad_lambda: [g0, g1, g2], area: 0.5 * det.abs(), degree }
    }

    pub fn n_local(&self) -> usize {
        local_count(self.degree)
    }

    pub fn lambda(&self, x: Point) -> [f64; 3] {
        let d = sub(x, self.vertices[0]);
        let l1 = self.grad_lambda[1][0] * d[0] + self.grad_lambda[1][1] * d[1];
        let l2 = self.grad_lambda[2][0] * d[0] + self.grad_lambda[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    /// Values and gradients of the local basis at `x`.
    pub fn eval(&self, x: Point, vals: &mut [f64; MAX_LOCAL], grads: &mut [[f64; 2]; MAX_LOCAL]) {
        let l = self.lambda(x);
        let g = &self.grad_lambda;
        match self.degree {
            1 => {
                for i in 0..3 {
                    vals[i] = l[i];
                    grads[i] = g[i];
                }
            }
            2 => {
                for i in 0..3 {
                    vals[i] = l[i] * (2.0 * l[i] - 1.0);
                    let s = 4.0 * l[i] - 1.0;
                    grads[i] = [s * g[i][0], s * g[i][1]];
                }
                for k in 0..3 {
                    let (i, j) = (k, (k + 1) % 3);
                    vals[3 + k] = 4.0 * l[i] * l[j];
                    grads[3 + k] = [
                        4.0 * (l[j] * g[i][0] + l[i] * g[j][0]),
                        4.0 * (l[j] * g[i][1] + l[i] * g[j][1]),
                    ];
                }
            }
            _ => unreachable!("unsupported degree"),
        }
    }

    /// Hessians of the local basis (constant per cell).
    pub fn hessians(&self) -> [[[f64; 2]; 2]; MAX_LOCAL] {
        let mut h = [[[0.0; 2]; 2]; MAX_LOCAL];
        if self.degree == 2 {
            let g = &self.grad_lambda;
            let outer = |a: [f64; 2], b: [f64; 2]| [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]];
            for i in 0..3 {
                let o = outer(g[i], g[i]);
                for r in 0..2 {
                    for c in 0..2 {
                        h[i][r][c] = 4.0 * o[r][c];
                    }
                }
            }
            for k in 0..3 {
                let (i, j) = (k, (k + 1) % 3);
                let (a, b) = (outer(g[i], g[j]), outer(g[j], g[i]));
                for r in 0..2 {
                    for c in 0..2 {
                        h[3 + k][r][c] = 4.0 * (a[r][c] + b[r][c]);
                    }
                }
            }
        }
        h
    }
}

pub fn local_count(degree: usize) -> usize {
    match degree {
        1 => 3,
        2 => 6,
        _ => 0,
    }
}

/// Global Lagrange DOF numbering: vertex nodes keep the vertex index, edge
/// midpoints (P2) follow as `n_vertices + edge`. The numbering is the same
/// at every time step.
#[derive(Clone, Debug)]
pub struct LagrangeSpace {
    pub degree: usize,
    pub n_dofs: usize,
    cell_dofs: Vec<[usize; MAX_LOCAL]>,
    pub node_coords: Vec<Point>,
}

impl LagrangeSpace {
    pub fn new(mesh: &BackgroundMesh, degree: usize) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::InvalidParameter { name: "m", reason: format!("degree must be 1 or 2, got {degree}") });
        }
        let nv = mesh.vertices.len();
        let mut node_coords = mesh.vertices.clone();
        let mut cell_dofs = Vec::with_capacity(mesh.cells.len());
        for (c, cell) in mesh.cells.iter().enumerate() {
            let mut d = [usize::MAX; MAX_LOCAL];
            d[..3].copy_from_slice(cell);
            if degree == 2 {
                for k in 0..3 {
                    d[3 + k] = nv + mesh.cell_edges[c][k];
                }
            }
            cell_dofs.push(d);
        }
        if degree == 2 {
            for e in &mesh.edges {
                let (a, b) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
                node_coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            }
        }
        Ok(Self { degree, n_dofs: node_coords.len(), cell_dofs, node_coords })
    }

    pub fn n_local(&self) -> usize {
        local_count(self.degree)
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c][..self.n_local()]
    }

    pub fn basis(&self, mesh: &BackgroundMesh, c: usize) -> CellBasis {
        CellBasis::new(mesh.cell_vertices(c), self.degree)
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.node_coords.iter().map(|&p| f(p)).collect()
    }
}

const NONE: usize = usize::MAX;

/// Compressed unknown numbering for one step: all x-velocity DOFs, then all
/// y-velocity DOFs, then pressure DOFs, then an optional mean multiplier.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub velocity: Vec<usize>,
    pub pressure: Vec<usize>,
    vel_local: Vec<usize>,
    pres_local: Vec<usize>,
    pub multiplier: bool,
}

impl DofMap {
    pub fn new(space: &LagrangeSpace, slab: &ActiveSlabMesh) -> Self {
        let collect = |cells: &[usize]| {
            let mut mark = vec![false; space.n_dofs];
            for &c in cells {
                for &d in space.cell_dofs(c) {
                    mark[d] = true;
                }
            }
            let ids: Vec<usize> = (0..space.n_dofs).filter(|&d| mark[d]).collect();
            let mut local = vec![NONE; space.n_dofs];
            for (i, &d) in ids.iter().enumerate() {
                local[d] = i;
            }
            (ids, local)
        };
        let (velocity, vel_local) = collect(&slab.cells_delta);
        let (pressure, pres_local) = collect(&slab.cells_phys);
        Self { velocity, pressure, vel_local, pres_local, multiplier: false }
    }

    pub fn n_velocity(&self) -> usize {
        self.velocity.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.len()
    }

    pub fn n_unknowns(&self) -> usize {
        2 * self.velocity.len() + self.pressure.len() + usize::from(self.multiplier)
    }

    /// Unknown index of velocity component `comp` at background DOF `d`.
    #[inline]
    pub fn u(&self, comp: usize, d: usize) -> Option<usize> {
        let l = self.vel_local[d];
        (l != NONE).then(|| comp * self.velocity.len() + l)
    }

    #[inline]
    pub fn p(&self, d: usize) -> Option<usize> {
        let l = self.pres_local[d];
        (l != NONE).then(|| 2 * self.velocity.len() + l)
    }

    pub fn multiplier_index(&self) -> Option<usize> {
        self.multiplier.then(|| 2 * self.velocity.len() + self.pressure.len())
    }

    pub fn pressure_offset(&self) -> usize {
        2 * self.velocity.len()
    }

    pub fn is_velocity_active(&self, d: usize) -> bool {
        self.vel_local[d] != NONE
    }

    pub fn is_pressure_active(&self, d: usize) -> bool {
        self.pres_local[d] != NONE
    }
}

/// Discrete velocity and pressure at one time level, indexed by background
/// DOF. Values outside the active sets are zero and must not be read.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub u: [Vec<f64>; 2],
    pub p: Vec<f64>,
    pub velocity_active: Vec<bool>,
    pub pressure_active: Vec<bool>,
}

impl FieldState {
    pub fn zeros(n_dofs: usize) -> Self {
        Self {
            u: [vec![0.0; n_dofs], vec![0.0; n_dofs]],
            p: vec![0.0; n_dofs],
            velocity_active: vec![false; n_dofs],
            pressure_active: vec![false; n_dofs],
        }
    }

    /// Scatters a compressed solution vector back to background indexing.
    pub fn from_solution(n_dofs: usize, dofs: &DofMap, x: &[f64]) -> Self {
        let mut s = Self::zeros(n_dofs);
        let nv = dofs.n_velocity();
        for (i, &d) in dofs.velocity.iter().enumerate() {
            s.u[0][d] = x[i];
            s.u[1][d] = x[nv + i];
            s.velocity_active[d] = true;
        }
        for (i, &d) in dofs.pressure.iter().enumerate() {
            s.p[d] = x[2 * nv + i];
            s.pressure_active[d] = true;
        }
        s
    }

    /// Gathers the compressed vector for the given numbering (zero where this
    /// state is inactive).
    pub fn to_solution(&self, dofs: &DofMap) -> Vec<f64> {
        let mut x = vec![0.0; dofs.n_unknowns()];
        let nv = dofs.n_velocity();
        for (i, &d) in dofs.velocity.iter().enumerate() {
            x[i] = self.u[0][d];
            x[nv + i] = self.u[1][d];
        }
        for (i, &d) in dofs.pressure.iter().enumerate() {
            x[2 * nv + i] = self.p[d];
        }
        x
    }

    pub fn velocity_at(&self, dofs: &[usize], vals: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (k, &d) in dofs.iter().enumerate() {
            out[0] += self.u[0][d] * vals[k];
            out[1] += self.u[1][d] * vals[k];
        }
        out
    }
}
