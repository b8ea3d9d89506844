//! Background triangulation and per-step active meshes.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, DomainMotion, HalfPlane, Point};
use crate::quadrature::{clip_triangle, dist, triangle_area, ClippedCell};

/// Interior face of the background mesh. `cells[0]` lies on the side the
/// normal points away from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub cells: [usize; 2],
}

#[derive(Clone, Debug)]
pub struct BackgroundMesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    /// All edges, numbered in order of first appearance.
    pub edges: Vec<[usize; 2]>,
    /// Local edge k of a cell joins local vertices k and k+1 (mod 3).
    pub cell_edges: Vec<[usize; 3]>,
    /// Interior edges with both neighbours.
    pub faces: Vec<Face>,
    pub h_min: f64,
    pub h_max: f64,
    pub bbox: Aabb,
}

impl BackgroundMesh {
    pub fn cell_vertices(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn face_points(&self, f: usize) -> [Point; 2] {
        let [a, b] = self.faces[f].vertices;
        [self.vertices[a], self.vertices[b]]
    }

    /// Unit normal of face `f` pointing from `cells[0]` into `cells[1]`.
    pub fn face_normal(&self, f: usize) -> [f64; 2] {
        let [a, b] = self.face_points(f);
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = t[0].hypot(t[1]);
        let mut n = [t[1] / len, -t[0] / len];
        // orient away from the centroid of cells[0]
        let v = self.cell_vertices(self.faces[f].cells[0]);
        let cx = (v[0][0] + v[1][0] + v[2][0]) / 3.0;
        let cy = (v[0][1] + v[1][1] + v[2][1]) / 3.0;
        if n[0] * (a[0] - cx) + n[1] * (a[1] - cy) < 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    pub fn face_length(&self, f: usize) -> f64 {
        let [a, b] = self.face_points(f);
        dist(a, b)
    }

    /// Legacy VTK ASCII dump of the triangulation with optional cell scalars.
    pub fn write_vtk<W: Write>(&self, out: &mut W, cell_data: &[(&str, Vec<f64>)]) -> std::io::Result<()> {
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "background mesh")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(out, "POINTS {} double", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(out, "{} {} 0", v[0], v[1])?;
        }
        writeln!(out, "CELLS {} {}", self.cells.len(), 4 * self.cells.len())?;
        for c in &self.cells {
            writeln!(out, "3 {} {} {}", c[0], c[1], c[2])?;
        }
        writeln!(out, "CELL_TYPES {}", self.cells.len())?;
        for _ in &self.cells {
            writeln!(out, "5")?;
        }
        if !cell_data.is_empty() {
            writeln!(out, "CELL_DATA {}", self.cells.len())?;
            for (name, vals) in cell_data {
                writeln!(out, "SCALARS {name} double 1")?;
                writeln!(out, "LOOKUP_TABLE default")?;
                for v in vals {
                    writeln!(out, "{v}")?;
                }
            }
        }
        Ok(())
    }
}

/// Uniform triangulation of `bbox`: every grid quad is split along the
/// diagonal from its lower-left to its upper-right corner.
pub fn build_background(bbox: Aabb, nx: usize, ny: usize) -> Result<BackgroundMesh> {
    let (lx, ly) = (bbox.max[0] - bbox.min[0], bbox.max[1] - bbox.min[1]);
    if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
        return Err(Error::DegenerateBox(format!("{bbox:?}")));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::DegenerateBox(format!("cell counts {nx} x {ny}")));
    }
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { bbox.max[0] } else { bbox.min[0] + i as f64 * hx };
            let y = if j == ny { bbox.max[1] } else { bbox.min[1] + j as f64 * hy };
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }

    let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut edge_cells: Vec<Vec<usize>> = Vec::new();
    let mut cell_edges = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let mut ce = [0; 3];
        for k in 0..3 {
            let (a, b) = (cell[k], cell[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let e = *edge_ids.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                edge_cells.push(Vec::new());
                edges.len() - 1
            });
            edge_cells[e].push(c);
            ce[k] = e;
        }
        cell_edges.push(ce);
    }
    let faces = edges
        .iter()
        .zip(&edge_cells)
        .filter(|(_, cs)| cs.len() == 2)
        .map(|(e, cs)| Face { vertices: *e, cells: [cs[0], cs[1]] })
        .collect();

    let lengths = edges.iter().map(|e| dist(vertices[e[0]], vertices[e[1]]));
    let (h_min, h_max) = lengths.fold((f64::INFINITY, 0.0f64), |(lo, hi), l| (lo.min(l), hi.max(l)));

    Ok(BackgroundMesh { vertices, cells, edges, cell_edges, faces, h_min, h_max, bbox })
}

/// Background mesh with spacing `h` laid out for the given motion.
pub fn background_for(motion: &DomainMotion, h: f64) -> Result<BackgroundMesh> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter { name: "h", reason: format!("must be positive, got {h}") });
    }
    let (bbox, nx, ny) = motion.layout().grid(h);
    build_background(bbox, nx, ny)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Outside,
    /// Meets Ω_δ but not Ω.
    Ghost,
    /// Entirely inside Ω.
    Interior,
    /// Meets Ω and ∂Ω.
    Cut,
}

impl CellKind {
    pub fn is_active(self) -> bool {
        self != CellKind::Outside
    }

    pub fn is_physical(self) -> bool {
        matches!(self, CellKind::Interior | CellKind::Cut)
    }
}

/// Active cells and face partition at one time level.
#[derive(Clone, Debug)]
pub struct ActiveSlabMesh {
    pub step_index: usize,
    pub time: f64,
    pub delta: f64,
    pub kinds: Vec<CellKind>,
    pub cells_delta: Vec<usize>,
    pub cells_phys: Vec<usize>,
    pub faces_int: Vec<usize>,
    pub faces_cut: Vec<usize>,
    pub faces_ext: Vec<usize>,
    pub faces_ghost: Vec<usize>,
    /// Exact `K ∩ Ω` for every cut cell.
    pub clipped: BTreeMap<usize, ClippedCell>,
    pub constraints: Vec<HalfPlane>,
}

impl ActiveSlabMesh {
    pub fn is_active(&self, c: usize) -> bool {
        self.kinds[c].is_active()
    }

    pub fn is_physical(&self, c: usize) -> bool {
        self.kinds[c].is_physical()
    }

    /// Measure of Ω ∩ (union of physical cells).
    pub fn physical_area(&self, mesh: &BackgroundMesh) -> f64 {
        self.cells_phys
            .iter()
            .map(|&c| match self.clipped.get(&c) {
                Some(cl) => cl.area,
                None => triangle_area(&mesh.cell_vertices(c)).abs(),
            })
            .sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.clipped.values().map(ClippedCell::boundary_length).sum()
    }
}

fn classify_cell(v: &[Point; 3], constraints: &[HalfPlane], delta: f64, tol: f64) -> (CellKind, Option<ClippedCell>) {
    let area = triangle_area(v).abs();
    let max_vertex = |c: &HalfPlane| v.iter().map(|&p| c.value(p)).fold(f64::NEG_INFINITY, f64::max);
    let min_vertex = |c: &HalfPlane| v.iter().map(|&p| c.value(p)).fold(f64::INFINITY, f64::min);
    if constraints.iter().all(|c| max_vertex(c) < -tol) {
        return (CellKind::Interior, None);
    }
    if constraints.iter().any(|c| min_vertex(c) > delta + tol) {
        return (CellKind::Outside, None);
    }
    let phys = clip_triangle(v, constraints, tol);
    if phys.area > 1e-12 * area {
        let kind = if phys.segments.is_empty() && phys.area >= area * (1.0 - 1e-12) {
            CellKind::Interior
        } else {
            CellKind::Cut
        };
        return (kind, (kind == CellKind::Cut).then_some(phys));
    }
    if delta > 0.0 {
        let shifted: Vec<HalfPlane> = constraints.iter().map(|c| c.shifted(delta)).collect();
        if clip_triangle(v, &shifted, tol).area > 1e-12 * area {
            return (CellKind::Ghost, None);
        }
    }
    (CellKind::Outside, None)
}

/// Active meshes T_{h,δ}ⁿ ⊇ T_hⁿ and the face partition at time `t`.
///
/// Membership is decided from the exact intersection of each cell with the
/// polygonal domain; cells touching Ω only in a point or along an edge
/// (zero measure) are not physical.
pub fn classify_active(mesh: &BackgroundMesh, motion: &DomainMotion, t: f64, delta: f64) -> Result<ActiveSlabMesh> {
    classify_with_constraints(mesh, motion.constraints_at(t), t, delta, 0)
}

pub fn classify_with_constraints(
    mesh: &BackgroundMesh,
    constraints: Vec<HalfPlane>,
    t: f64,
    delta: f64,
    step_index: usize,
) -> Result<ActiveSlabMesh> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter { name: "delta", reason: format!("must be >= 0, got {delta}") });
    }
    let tol = 1e-12 * mesh.h_min;
    let results: Vec<(CellKind, Option<ClippedCell>)> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| classify_cell(&mesh.cell_vertices(c), &constraints, delta, tol))
        .collect();

    let mut kinds = Vec::with_capacity(results.len());
    let mut clipped = BTreeMap::new();
    for (c, (kind, cl)) in results.into_iter().enumerate() {
        kinds.push(kind);
        if let Some(cl) = cl {
            clipped.insert(c, cl);
        }
    }
    let cells_delta: Vec<usize> = (0..kinds.len()).filter(|&c| kinds[c].is_active()).collect();
    let cells_phys: Vec<usize> = (0..kinds.len()).filter(|&c| kinds[c].is_physical()).collect();
    if cells_phys.is_empty() {
        return Err(Error::EmptyPhysicalMesh { time: t });
    }

    let (mut faces_int, mut faces_cut, mut faces_ext) = (Vec::new(), Vec::new(), Vec::new());
    for (f, face) in mesh.faces.iter().enumerate() {
        let [k1, k2] = face.cells.map(|c| kinds[c]);
        if !k1.is_active() || !k2.is_active() {
            continue;
        }
        if k1 == CellKind::Cut || k2 == CellKind::Cut {
            faces_cut.push(f);
        } else if k1 == CellKind::Interior && k2 == CellKind::Interior {
            faces_int.push(f);
        } else {
            faces_ext.push(f);
        }
    }
    let mut faces_ghost: Vec<usize> = faces_cut.iter().chain(&faces_ext).copied().collect();
    faces_ghost.sort_unstable();

    Ok(ActiveSlabMesh {
        step_index,
        time: t,
        delta,
        kinds,
        cells_delta,
        cells_phys,
        faces_int,
        faces_cut,
        faces_ext,
        faces_ghost,
        clipped,
        constraints,
    })
}

/// Every physical cell at the current level must have been active at the
/// previous one (discrete form of Ωⁿ ⊂ Ω_δ^{n-1}).
pub fn check_step_coverage(prev: &ActiveSlabMesh, cur: &ActiveSlabMesh) -> Result<()> {
    if let Some(&c) = cur.cells_phys.iter().find(|&&c| !prev.is_active(c)) {
        return Err(Error::ContainmentViolation {
            step: cur.step_index,
            detail: format!("cell {c} is physical at t = {} but inactive at t = {}", cur.time, prev.time),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_channel_2d, BackgroundLayout, BoundaryTag};

    fn unit_layout() -> BackgroundLayout {
        BackgroundLayout { origin: [0.0, 0.0], extent: Aabb::new([0.0, 0.0], [1.0, 1.0]) }
    }

    #[test]
    fn small_meshes() {
        let m = build_background(Aabb::new([0.0, 0.0], [2.0, 1.0]), 2, 1).unwrap();
        assert_eq!(m.cells.len(), 4);
        assert_eq!(m.vertices.len(), 6);
        assert_eq!(m.faces.len(), 3);
        let m = build_background(Aabb::new([0.0, 0.0], [1.0, 1.0]), 1, 1).unwrap();
        assert_eq!(m.cells.len(), 2);
        assert_eq!(m.faces.len(), 1);
        assert_eq!(m.faces[0].cells, [0, 1]);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(build_background(Aabb::new([0.0, 0.0], [0.0, 1.0]), 2, 2).is_err());
        assert!(build_background(Aabb::new([0.0, 0.0], [1.0, 1.0]), 0, 2).is_err());
    }

    #[test]
    fn euler_and_orientation() {
        let m = build_background(Aabb::new([-1.0, 0.0], [3.0, 2.0]), 7, 5).unwrap();
        // V - E + F = 1 for a disk
        assert_eq!(m.vertices.len() + m.cells.len(), m.edges.len() + 1);
        for c in 0..m.n_cells() {
            assert!(triangle_area(&m.cell_vertices(c)) > 0.0);
        }
        assert!(m.h_max / m.h_min <= 3.0);
        for f in 0..m.faces.len() {
            let n = m.face_normal(f);
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn domain_covering_box() {
        let m = build_background(Aabb::new([0.0, 0.0], [1.0, 1.0]), 3, 3).unwrap();
        let everywhere = vec![HalfPlane::constant(-1.0)];
        let s = classify_with_constraints(&m, everywhere, 0.0, 0.0, 0).unwrap();
        assert_eq!(s.cells_delta.len(), m.n_cells());
        assert_eq!(s.cells_phys.len(), m.n_cells());
        assert!(s.faces_cut.is_empty() && s.faces_ext.is_empty());
        assert_eq!(s.faces_int.len(), m.faces.len());
    }

    #[test]
    fn horizontal_interface_matches_sign_check() {
        // 2x1 quads of height 1, interface y = 1/2
        let m = build_background(Aabb::new([0.0, 0.0], [2.0, 1.0]), 2, 1).unwrap();
        let plane = HalfPlane::new([0.0, 1.0], -0.5, BoundaryTag::Dirichlet);
        let s = classify_with_constraints(&m, vec![plane], 0.0, 0.0, 0).unwrap();
        // brute force: a cell is cut iff its vertex values change sign
        for c in 0..m.n_cells() {
            let vals: Vec<f64> = m.cell_vertices(c).iter().map(|&p| plane.value(p)).collect();
            let cut = vals.iter().any(|&v| v < 0.0) && vals.iter().any(|&v| v > 0.0);
            assert_eq!(s.kinds[c] == CellKind::Cut, cut, "cell {c}");
        }
        assert_eq!(s.cells_phys.len(), 4);
        assert_eq!(s.faces_cut.len(), 3);
        assert!(s.faces_int.is_empty());

        // finer strip: interior faces appear below the interface
        let m = build_background(Aabb::new([0.0, 0.0], [2.0, 1.0]), 2, 4).unwrap();
        let s = classify_with_constraints(&m, vec![HalfPlane::new([0.0, 1.0], -0.6, BoundaryTag::Dirichlet)], 0.0, 0.0, 0)
            .unwrap();
        for &f in &s.faces_int {
            let [a, b] = m.faces[f].cells;
            assert_eq!(s.kinds[a], CellKind::Interior);
            assert_eq!(s.kinds[b], CellKind::Interior);
        }
        assert!(!s.faces_int.is_empty());
    }

    #[test]
    fn large_delta_activates_everything() {
        let m = build_background(Aabb::new([0.0, 0.0], [2.0, 2.0]), 4, 4).unwrap();
        let plane = HalfPlane::new([1.0, 0.0], -0.3, BoundaryTag::Dirichlet);
        let s = classify_with_constraints(&m, vec![plane], 0.0, 10.0, 0).unwrap();
        assert_eq!(s.cells_delta.len(), m.n_cells());
        assert!(s.cells_phys.len() < m.n_cells());
    }

    #[test]
    fn empty_domain_is_an_error() {
        let m = build_background(Aabb::new([0.0, 0.0], [1.0, 1.0]), 2, 2).unwrap();
        let far = HalfPlane::new([1.0, 0.0], 5.0, BoundaryTag::Dirichlet);
        assert!(matches!(
            classify_with_constraints(&m, vec![far], 0.3, 0.0, 0),
            Err(Error::EmptyPhysicalMesh { .. })
        ));
        let _ = unit_layout();
    }

    #[test]
    fn channel_partition_and_nesting() {
        let motion = make_channel_2d();
        let m = background_for(&motion, 0.25).unwrap();
        for (i, t) in [0.0, 0.3, 1.1, 1.9].iter().enumerate() {
            let s = classify_active(&m, &motion, *t, 0.02).unwrap();
            for &c in &s.cells_phys {
                assert!(s.is_active(c));
            }
            // faces partition the interior faces of the active mesh
            let n_active_faces = m.faces.iter().filter(|f| s.is_active(f.cells[0]) && s.is_active(f.cells[1])).count();
            assert_eq!(s.faces_int.len() + s.faces_cut.len() + s.faces_ext.len(), n_active_faces, "t index {i}");
            let g = crate::geometry::channel_half_height(*t);
            assert!((s.physical_area(&m) - 8.0 * g).abs() < 1e-12);
            assert!((s.boundary_length() - (4.0 * g + 8.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn coverage_between_steps() {
        let motion = make_channel_2d();
        let m = background_for(&motion, 0.125).unwrap();
        let dt = 0.1;
        let delta = motion.w_max() * dt;
        let mut prev = classify_active(&m, &motion, 0.0, delta).unwrap();
        for n in 1..=20 {
            let cur = classify_active(&m, &motion, n as f64 * dt, delta).unwrap();
            check_step_coverage(&prev, &cur).unwrap();
            prev = cur;
        }
    }

    #[test]
    fn deterministic_classification() {
        let motion = make_channel_2d();
        let m = background_for(&motion, 0.25).unwrap();
        let a = classify_active(&m, &motion, 0.7, 0.03).unwrap();
        let b = classify_active(&m, &motion, 0.7, 0.03).unwrap();
        assert_eq!(a.kinds, b.kinds);
        assert_eq!(a.faces_cut, b.faces_cut);
        assert_eq!(a.clipped, b.clipped);
    }
}
