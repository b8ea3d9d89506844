//! Reference rules and cut-cell quadrature.
//!
//! Cells are clipped exactly against the affine constraints of the domain,
//! so volume and surface rules on `K ∩ Ω` are exact up to the polynomial
//! degree of the mapped reference rules.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::geometry::{BoundaryTag, HalfPlane, Point};
use crate::mesh::{ActiveSlabMesh, BackgroundMesh};

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// 1-D rule on [0, 1] exact for polynomials of degree `degree`.
pub fn line_rule(degree: usize) -> Vec<(f64, f64)> {
    gauss_legendre_unit(degree / 2 + 1)
}

/// Rule on the reference triangle (0,0),(1,0),(0,1), weights summing to 1/2,
/// exact for polynomials of total degree `degree`.
pub fn triangle_rule(degree: usize) -> &'static [([f64; 2], f64)] {
    const MAX: usize = 16;
    static RULES: OnceLock<Vec<Vec<([f64; 2], f64)>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=MAX).map(build_triangle_rule).collect());
    &rules[degree.min(MAX)]
}

fn build_triangle_rule(degree: usize) -> Vec<([f64; 2], f64)> {
    match degree {
        0 | 1 => vec![([1.0 / 3.0, 1.0 / 3.0], 0.5)],
        2 => vec![
            ([1.0 / 6.0, 1.0 / 6.0], 1.0 / 6.0),
            ([2.0 / 3.0, 1.0 / 6.0], 1.0 / 6.0),
            ([1.0 / 6.0, 2.0 / 3.0], 1.0 / 6.0),
        ],
        _ => {
            // Collapsed tensor Gauss rule: x = u, y = v (1 - u), dxdy = (1 - u) dudv.
            let gu = gauss_legendre_unit((degree + 2).div_ceil(2));
            let gv = gauss_legendre_unit((degree + 1).div_ceil(2));
            let mut out = Vec::with_capacity(gu.len() * gv.len());
            for &(u, wu) in &gu {
                for &(v, wv) in &gv {
                    out.push(([u, v * (1.0 - u)], wu * wv * (1.0 - u)));
                }
            }
            out
        }
    }
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

pub fn triangle_area(v: &[Point; 3]) -> f64 {
    0.5 * cross(sub(v[1], v[0]), sub(v[2], v[0]))
}

/// Maps the reference rule of the given degree onto a (non-degenerate or
/// degenerate) triangle; weights scale with |area|.
pub fn map_triangle_rule(v: &[Point; 3], degree: usize, out: &mut Vec<QuadPoint>) {
    let det = 2.0 * triangle_area(v).abs();
    if det == 0.0 {
        return;
    }
    let e1 = sub(v[1], v[0]);
    let e2 = sub(v[2], v[0]);
    for &([xi, eta], w) in triangle_rule(degree) {
        out.push(QuadPoint {
            x: [v[0][0] + xi * e1[0] + eta * e2[0], v[0][1] + xi * e1[1] + eta * e2[1]],
            w: w * det,
        });
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    pub x: Point,
    pub w: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub x: Point,
    pub w: f64,
    /// Unit normal pointing out of the domain.
    pub normal: [f64; 2],
    pub tag: BoundaryTag,
}

/// Straight piece of `K ∩ ∂Ω` lying on one constraint line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySegment {
    pub a: Point,
    pub b: Point,
    pub constraint: usize,
    pub normal: [f64; 2],
    pub tag: BoundaryTag,
}

impl BoundarySegment {
    pub fn length(&self) -> f64 {
        dist(self.a, self.b)
    }
}

/// Exact intersection of a triangle with a convex polygonal domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ClippedCell {
    /// Counter-clockwise vertices of `K ∩ Ω` (possibly empty).
    pub polygon: Vec<Point>,
    pub area: f64,
    pub segments: Vec<BoundarySegment>,
}

impl ClippedCell {
    /// Fan triangulation anchored at the first polygon vertex.
    pub fn triangles(&self) -> Vec<[Point; 3]> {
        if self.polygon.len() < 3 {
            return Vec::new();
        }
        (1..self.polygon.len() - 1)
            .map(|i| [self.polygon[0], self.polygon[i], self.polygon[i + 1]])
            .collect()
    }

    pub fn boundary_length(&self) -> f64 {
        self.segments.iter().map(BoundarySegment::length).sum()
    }
}

fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// One Sutherland–Hodgman pass keeping `{f ≤ 0}`; values within `tol` of
/// zero are snapped onto the line.
fn clip_against(poly: &[Point], f: impl Fn(Point) -> f64, tol: f64) -> Vec<Point> {
    let n = poly.len();
    if n == 0 {
        return Vec::new();
    }
    let vals: Vec<f64> = poly
        .iter()
        .map(|&p| {
            let v = f(p);
            if v.abs() <= tol {
                0.0
            } else {
                v
            }
        })
        .collect();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (poly[i], poly[j]);
        let (fa, fb) = (vals[i], vals[j]);
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let s = fa / (fa - fb);
            out.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    // drop repeated vertices
    let mut dedup: Vec<Point> = Vec::with_capacity(out.len());
    for p in out {
        if dedup.last().is_none_or(|&q| dist(p, q) > tol) {
            dedup.push(p);
        }
    }
    while dedup.len() > 1 && dist(dedup[0], *dedup.last().unwrap()) <= tol {
        dedup.pop();
    }
    dedup
}

/// Clips a counter-clockwise triangle against every constraint and records
/// the boundary pieces of the result.
pub fn clip_triangle(v: &[Point; 3], constraints: &[HalfPlane], tol: f64) -> ClippedCell {
    let mut poly = if triangle_area(v) < 0.0 { vec![v[0], v[2], v[1]] } else { v.to_vec() };
    for c in constraints {
        poly = clip_against(&poly, |p| c.value(p), tol);
        if poly.is_empty() {
            break;
        }
    }
    let area = polygon_area(&poly);
    if poly.len() < 3 || area <= 0.0 {
        return ClippedCell { polygon: Vec::new(), area: 0.0, segments: Vec::new() };
    }
    let mut segments = Vec::new();
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        if dist(a, b) <= tol {
            continue;
        }
        if let Some((k, c)) = constraints.iter().enumerate().find(|(_, c)| {
            !c.is_degenerate() && c.value(a).abs() <= 4.0 * tol && c.value(b).abs() <= 4.0 * tol
        }) {
            let nn = c.normal[0].hypot(c.normal[1]);
            segments.push(BoundarySegment {
                a,
                b,
                constraint: k,
                normal: [c.normal[0] / nn, c.normal[1] / nn],
                tag: c.tag,
            });
        }
    }
    ClippedCell { polygon: poly, area, segments }
}

/// Result of clipping one triangle with one vertex-linear level set.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexClip {
    /// Fan of at most three sub-triangles covering `{φ < 0} ∩ K`.
    pub inside: Vec<[Point; 3]>,
    /// `{φ = 0} ∩ K` when it is a segment of positive length.
    pub interface: Option<[Point; 2]>,
    pub normal: [f64; 2],
}

impl SimplexClip {
    pub fn inside_area(&self) -> f64 {
        self.inside.iter().map(|t| triangle_area(t).abs()).sum()
    }

    pub fn interface_length(&self) -> f64 {
        self.interface.map_or(0.0, |[a, b]| dist(a, b))
    }
}

/// Affine function with the given values at the triangle vertices.
fn linear_reconstruction(v: &[Point; 3], phi: [f64; 3]) -> HalfPlane {
    let det = cross(sub(v[1], v[0]), sub(v[2], v[0]));
    let e1 = sub(v[1], v[0]);
    let e2 = sub(v[2], v[0]);
    let d1 = phi[1] - phi[0];
    let d2 = phi[2] - phi[0];
    // grad · e1 = d1, grad · e2 = d2
    let gx = (d1 * e2[1] - d2 * e1[1]) / det;
    let gy = (d2 * e1[0] - d1 * e2[0]) / det;
    HalfPlane::new([gx, gy], phi[0] - gx * v[0][0] - gy * v[0][1], BoundaryTag::Dirichlet)
}

/// Clips a triangle with the linear interpolant of vertex level-set values.
pub fn clip_simplex(v: &[Point; 3], phi: [f64; 3]) -> SimplexClip {
    debug_assert!(phi.iter().any(|&p| p != 0.0), "level set vanishes on the whole cell");
    let plane = linear_reconstruction(v, phi);
    let scale = dist(v[0], v[1]).max(dist(v[1], v[2])).max(dist(v[2], v[0]));
    let clipped = clip_triangle(v, &[plane], 1e-12 * scale);
    SimplexClip {
        inside: clipped.triangles(),
        interface: clipped.segments.first().map(|s| [s.a, s.b]),
        normal: clipped.segments.first().map_or([0.0, 0.0], |s| s.normal),
    }
}

/// Volume and surface rules on one active cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellQuadrature {
    pub cell: usize,
    pub volume: Vec<QuadPoint>,
    pub surface: Vec<SurfacePoint>,
}

impl CellQuadrature {
    pub fn volume_weight(&self) -> f64 {
        self.volume.iter().map(|q| q.w).sum()
    }

    pub fn surface_weight(&self) -> f64 {
        self.surface.iter().map(|q| q.w).sum()
    }
}

/// Quadrature on a clipped cell: reference rules of exactness
/// `volume_degree` on each fan triangle and Gauss rules of exactness
/// `surface_degree` on each boundary segment.
pub fn cell_rule(cell: usize, clipped: &ClippedCell, volume_degree: usize, surface_degree: usize) -> CellQuadrature {
    let mut volume = Vec::new();
    for t in clipped.triangles() {
        map_triangle_rule(&t, volume_degree, &mut volume);
    }
    let line = line_rule(surface_degree);
    let mut surface = Vec::with_capacity(line.len() * clipped.segments.len());
    for s in &clipped.segments {
        let len = s.length();
        for &(r, w) in &line {
            surface.push(SurfacePoint {
                x: [s.a[0] + r * (s.b[0] - s.a[0]), s.a[1] + r * (s.b[1] - s.a[1])],
                w: w * len,
                normal: s.normal,
                tag: s.tag,
            });
        }
    }
    CellQuadrature { cell, volume, surface }
}

/// Rule on an uncut cell.
pub fn full_cell_rule(cell: usize, v: &[Point; 3], volume_degree: usize) -> CellQuadrature {
    let mut volume = Vec::new();
    map_triangle_rule(v, volume_degree, &mut volume);
    CellQuadrature { cell, volume, surface: Vec::new() }
}

/// Cut rule for a single vertex-linear level set.
pub fn cell_rule_linear(v: &[Point; 3], phi: [f64; 3], volume_degree: usize, surface_degree: usize) -> CellQuadrature {
    let plane = linear_reconstruction(v, phi);
    let scale = dist(v[0], v[1]).max(dist(v[1], v[2])).max(dist(v[2], v[0]));
    let clipped = clip_triangle(v, &[plane], 1e-12 * scale);
    cell_rule(0, &clipped, volume_degree, surface_degree)
}

/// Quadrature for every physical cell of a slab (aligned with `cells_phys`),
/// or for every active cell over Ω_δ when built with [`CutQuadrature::enlarged`].
#[derive(Clone, Debug)]
pub struct CutQuadrature {
    pub volume_degree: usize,
    pub surface_degree: usize,
    pub cells: Vec<CellQuadrature>,
}

impl CutQuadrature {
    pub fn new(mesh: &BackgroundMesh, slab: &ActiveSlabMesh, volume_degree: usize, surface_degree: usize) -> Self {
        let cells = slab
            .cells_phys
            .par_iter()
            .map(|&c| match slab.clipped.get(&c) {
                Some(cl) => cell_rule(c, cl, volume_degree, surface_degree),
                None => full_cell_rule(c, &mesh.cell_vertices(c), volume_degree),
            })
            .collect();
        Self { volume_degree, surface_degree, cells }
    }

    /// Volume rules over `K ∩ Ω_δ` for all cells of the active mesh.
    pub fn enlarged(mesh: &BackgroundMesh, slab: &ActiveSlabMesh, volume_degree: usize) -> Self {
        let shifted: Vec<HalfPlane> = slab.constraints.iter().map(|c| c.shifted(slab.delta)).collect();
        let tol = 1e-12 * mesh.h_min;
        let cells = slab
            .cells_delta
            .par_iter()
            .map(|&c| {
                let v = mesh.cell_vertices(c);
                let mut q = cell_rule(c, &clip_triangle(&v, &shifted, tol), volume_degree, 0);
                q.surface.clear();
                q
            })
            .collect();
        Self { volume_degree, surface_degree: 0, cells }
    }

    pub fn volume(&self) -> f64 {
        self.cells.iter().map(CellQuadrature::volume_weight).sum()
    }

    pub fn surface(&self) -> f64 {
        self.cells.iter().map(CellQuadrature::surface_weight).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn monomial_on_ref(i: u32, j: u32) -> f64 {
        // ∫_T x^i y^j = i! j! / (i + j + 2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(i) * fact(j) / fact(i + j + 2)
    }

    #[test]
    fn triangle_rules_are_exact() {
        for deg in 0..=10usize {
            let rule = triangle_rule(deg);
            for i in 0..=deg as u32 {
                for j in 0..=(deg as u32 - i) {
                    let q: f64 = rule.iter().map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32)).sum();
                    assert!((q - monomial_on_ref(i, j)).abs() < 1e-14, "deg {deg} x^{i} y^{j}");
                }
            }
        }
    }

    #[test]
    fn line_rules_are_exact() {
        for deg in 0..=9usize {
            for k in 0..=deg as i32 {
                let q: f64 = line_rule(deg).iter().map(|(x, w)| w * x.powi(k)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn clip_fully_inside_and_outside() {
        let c = clip_simplex(&REF, [-1.0, -1.0, -1.0]);
        assert_eq!(c.inside.len(), 1);
        assert!(c.interface.is_none());
        assert!((c.inside_area() - 0.5).abs() < 1e-15);
        let c = clip_simplex(&REF, [1.0, 1.0, 1.0]);
        assert!(c.inside.is_empty());
        assert!(c.interface.is_none());
    }

    #[test]
    fn clip_reference_half() {
        // φ = -1 + 2y: inside below y = 1/2.
        let c = clip_simplex(&REF, [-1.0, -1.0, 1.0]);
        assert!(c.inside.len() <= 3);
        assert!((c.inside_area() - 3.0 / 8.0).abs() < 1e-14);
        assert!((c.interface_length() - 0.5).abs() < 1e-14);
        let [a, b] = c.interface.unwrap();
        assert!((a[1] - 0.5).abs() < 1e-15 && (b[1] - 0.5).abs() < 1e-15);
        assert!(c.normal[1] > 0.999);
    }

    #[test]
    fn cut_rule_weights() {
        let q = cell_rule_linear(&REF, [-1.0, -1.0, -1.0], 3, 3);
        assert!((q.volume_weight() - 0.5).abs() < 1e-15);
        let q = cell_rule_linear(&REF, [-1.0, -1.0, 1.0], 2, 3);
        assert!((q.volume_weight() - 3.0 / 8.0).abs() < 1e-14);
        assert!((q.surface_weight() - 0.5).abs() < 1e-14);
        for s in &q.surface {
            assert!(s.normal[1] > 0.0);
        }
    }

    #[test]
    fn complement_areas_add_up() {
        let v = [[0.3, -0.2], [1.4, 0.1], [0.5, 1.3]];
        let phi = [0.3, -0.7, 0.45];
        let a = clip_simplex(&v, phi).inside_area();
        let b = clip_simplex(&v, phi.map(|p| -p)).inside_area();
        assert!((a + b - triangle_area(&v)).abs() < 1e-14);
    }

    #[test]
    fn multi_constraint_corner() {
        // unit square corner cut from a triangle
        let v = [[-0.5, -0.5], [0.5, -0.5], [-0.5, 0.5]];
        let cs = [
            HalfPlane::new([-1.0, 0.0], 0.0, BoundaryTag::Dirichlet),
            HalfPlane::new([0.0, -1.0], 0.0, BoundaryTag::DoNothing),
        ];
        let c = clip_triangle(&v, &cs, 1e-13);
        // x,y >= 0 and x + y <= 0 → only the corner point
        assert_eq!(c.area, 0.0);
        let v = [[-0.5, -0.5], [1.5, -0.5], [-0.5, 1.5]];
        let c = clip_triangle(&v, &cs, 1e-13);
        assert!((c.area - 0.5).abs() < 1e-14);
        assert_eq!(c.segments.len(), 2);
        assert!((c.boundary_length() - 2.0).abs() < 1e-14);
        let tags: Vec<_> = c.segments.iter().map(|s| s.tag).collect();
        assert!(tags.contains(&BoundaryTag::Dirichlet) && tags.contains(&BoundaryTag::DoNothing));
    }

    #[test]
    fn edge_on_boundary_is_a_segment() {
        let cs = [HalfPlane::new([0.0, -1.0], 0.0, BoundaryTag::Dirichlet)];
        let c = clip_triangle(&REF, &cs, 1e-13);
        assert!((c.area - 0.5).abs() < 1e-15);
        assert_eq!(c.segments.len(), 1);
        assert!((c.segments[0].length() - 1.0).abs() < 1e-15);
    }
}
