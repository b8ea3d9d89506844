#![allow(dead_code)]

pub mod oracle;
pub mod poly;

use cutstokes_core::assembly::{context, SlabContext};
use cutstokes_core::geometry::{Aabb, HalfPlane, Point};
use cutstokes_core::mesh::{build_background, classify_with_constraints, ActiveSlabMesh, BackgroundMesh};
use cutstokes_core::quadrature::CutQuadrature;
use cutstokes_core::space::{DofMap, LagrangeSpace};

/// Mesh, space, slab, quadrature and numbering for assembly tests.
pub struct Setup {
    pub mesh: BackgroundMesh,
    pub space: LagrangeSpace,
    pub slab: ActiveSlabMesh,
    pub quad: CutQuadrature,
    pub dofs: DofMap,
}

impl Setup {
    pub fn from_mesh(mesh: BackgroundMesh, constraints: Vec<HalfPlane>, delta: f64, degree: usize) -> Self {
        let space = LagrangeSpace::new(&mesh, degree).unwrap();
        let slab = classify_with_constraints(&mesh, constraints, 0.0, delta, 1).unwrap();
        let quad = CutQuadrature::new(&mesh, &slab, 2 * degree + 2, 2 * degree + 2);
        let dofs = DofMap::new(&space, &slab);
        Self { mesh, space, slab, quad, dofs }
    }

    pub fn grid(bbox: Aabb, nx: usize, ny: usize, constraints: Vec<HalfPlane>, delta: f64, degree: usize) -> Self {
        Self::from_mesh(build_background(bbox, nx, ny).unwrap(), constraints, delta, degree)
    }

    pub fn ctx(&self) -> SlabContext<'_> {
        context(&self.mesh, &self.space, &self.slab, &self.quad, &self.dofs)
    }
}

/// The reference triangle (0,0), (1,0), (0,1) as a one-cell mesh.
pub fn reference_triangle() -> BackgroundMesh {
    BackgroundMesh {
        vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        cells: vec![[0, 1, 2]],
        edges: vec![[0, 1], [1, 2], [2, 0]],
        cell_edges: vec![[0, 1, 2]],
        faces: Vec::new(),
        h_min: 1.0,
        h_max: 2f64.sqrt(),
        bbox: Aabb::new([0.0, 0.0], [1.0, 1.0]),
    }
}

use std::sync::Arc;

use cutstokes_core::geometry::{BackgroundLayout, BoundaryTag, DomainMotion};
use cutstokes_core::space::FieldState;
use cutstokes_core::verification::ManufacturedCase;

/// Unit square whose walls lie on grid lines of every h = 1/k.
pub fn aligned_unit_square() -> DomainMotion {
    let layout = BackgroundLayout { origin: [0.0, 0.0], extent: Aabb::new([0.0, 0.0], [1.0, 1.0]) };
    DomainMotion::from_half_planes("aligned_square", 0.0, layout, |_| {
        vec![
            HalfPlane::new([-1.0, 0.0], 0.0, BoundaryTag::Dirichlet),
            HalfPlane::new([1.0, 0.0], -1.0, BoundaryTag::Dirichlet),
            HalfPlane::new([0.0, -1.0], 0.0, BoundaryTag::Dirichlet),
            HalfPlane::new([0.0, 1.0], -1.0, BoundaryTag::Dirichlet),
        ]
    })
}

/// `motion` with Dirichlet data taken from the manufactured velocity.
pub fn with_case_data(motion: DomainMotion, case: &Arc<ManufacturedCase>) -> DomainMotion {
    let c = case.clone();
    motion.with_dirichlet_data(move |x, t| c.velocity(x, t))
}

/// Nodal interpolant of the manufactured solution, all DOFs active.
pub fn interpolate_case(space: &LagrangeSpace, case: &ManufacturedCase, t: f64) -> FieldState {
    let mut s = FieldState::zeros(space.n_dofs);
    s.u[0] = space.interpolate(|x| case.velocity(x, t)[0]);
    s.u[1] = space.interpolate(|x| case.velocity(x, t)[1]);
    s.p = space.interpolate(|x| case.pressure(x, t));
    s.velocity_active.iter_mut().for_each(|a| *a = true);
    s.pressure_active.iter_mut().for_each(|a| *a = true);
    s
}

pub fn dof_at(space: &LagrangeSpace, x: Point) -> usize {
    space
        .node_coords
        .iter()
        .position(|p| (p[0] - x[0]).abs() < 1e-12 && (p[1] - x[1]).abs() < 1e-12)
        .expect("node exists")
}
