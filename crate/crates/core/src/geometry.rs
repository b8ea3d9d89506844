//! Moving physical domains described by time-dependent affine half-planes.
//!
//! A domain is the intersection of half-planes `{x : n·x + c < 0}`; its level
//! set is the pointwise maximum of the affine constraint values. With unit
//! normals this is a signed distance inside the domain and along the faces,
//! and every piece of the boundary lies on exactly one constraint line, which
//! also carries the boundary tag of that piece.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    DoNothing,
}

/// Affine constraint `normal·x + offset`, negative inside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub normal: [f64; 2],
    pub offset: f64,
    pub tag: BoundaryTag,
}

impl HalfPlane {
    pub fn new(normal: [f64; 2], offset: f64, tag: BoundaryTag) -> Self {
        Self { normal, offset, tag }
    }

    /// A constraint with zero normal: constant value everywhere.
    pub fn constant(value: f64) -> Self {
        Self::new([0.0, 0.0], value, BoundaryTag::Dirichlet)
    }

    #[inline]
    pub fn value(&self, p: Point) -> f64 {
        self.normal[0] * p[0] + self.normal[1] * p[1] + self.offset
    }

    /// Same constraint with the zero level moved outwards by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self { offset: self.offset - delta, ..*self }
    }

    pub fn is_degenerate(&self) -> bool {
        self.normal[0] == 0.0 && self.normal[1] == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }
}

/// Placement hint for background meshes: grid lines pass through `origin`
/// and the grid covers `extent`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackgroundLayout {
    pub origin: Point,
    pub extent: Aabb,
}

impl BackgroundLayout {
    /// Smallest grid of spacing `h` aligned with `origin` that covers `extent`.
    pub fn grid(&self, h: f64) -> (Aabb, usize, usize) {
        let lo = |k: usize| ((self.extent.min[k] - self.origin[k]) / h + 1e-9).floor();
        let hi = |k: usize| ((self.extent.max[k] - self.origin[k]) / h - 1e-9).ceil();
        let (ix0, ix1, iy0, iy1) = (lo(0), hi(0), lo(1), hi(1));
        let bbox = Aabb::new(
            [self.origin[0] + ix0 * h, self.origin[1] + iy0 * h],
            [self.origin[0] + ix1 * h, self.origin[1] + iy1 * h],
        );
        (bbox, (ix1 - ix0) as usize, (iy1 - iy0) as usize)
    }
}

type ConstraintFn = dyn Fn(f64) -> Vec<HalfPlane> + Send + Sync;
pub type VectorField = dyn Fn(Point, f64) -> [f64; 2] + Send + Sync;

/// Analytic description of the moving domain Ω(t).
#[derive(Clone)]
pub struct DomainMotion {
    name: String,
    constraints: Arc<ConstraintFn>,
    dirichlet_data: Arc<VectorField>,
    w_max: f64,
    layout: BackgroundLayout,
}

impl fmt::Debug for DomainMotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DomainMotion")
            .field("name", &self.name)
            .field("w_max", &self.w_max)
            .field("layout", &self.layout)
            .finish()
    }
}

impl DomainMotion {
    /// `constraints(t)` must return unit-normal (or zero-normal) half-planes.
    pub fn from_half_planes<F>(name: &str, w_max: f64, layout: BackgroundLayout, constraints: F) -> Self
    where
        F: Fn(f64) -> Vec<HalfPlane> + Send + Sync + 'static,
    {
        assert!(w_max >= 0.0, "w_max must be nonnegative");
        Self {
            name: name.to_string(),
            constraints: Arc::new(constraints),
            dirichlet_data: Arc::new(|_, _| [0.0, 0.0]),
            w_max,
            layout,
        }
    }

    pub fn with_dirichlet_data<F>(mut self, data: F) -> Self
    where
        F: Fn(Point, f64) -> [f64; 2] + Send + Sync + 'static,
    {
        self.dirichlet_data = Arc::new(data);
        self
    }

    pub fn with_dirichlet_field(mut self, data: Arc<VectorField>) -> Self {
        self.dirichlet_data = data;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn layout(&self) -> &BackgroundLayout {
        &self.layout
    }

    pub fn constraints_at(&self, t: f64) -> Vec<HalfPlane> {
        (self.constraints)(t)
    }

    pub fn levelset(&self, p: Point, t: f64) -> f64 {
        self.constraints_at(t)
            .iter()
            .map(|c| c.value(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Level set of Ω_δ(t): negative iff `p` lies in the δ-enlarged domain.
    pub fn enlarged_levelset(&self, t: f64, delta: f64) -> impl Fn(Point) -> f64 + '_ {
        let constraints = self.constraints_at(t);
        move |p| {
            constraints
                .iter()
                .map(|c| c.value(p))
                .fold(f64::NEG_INFINITY, f64::max)
                - delta
        }
    }

    /// Tag of the constraint that is active (largest) at `p`.
    pub fn boundary_tag(&self, p: Point, t: f64) -> BoundaryTag {
        self.constraints_at(t)
            .iter()
            .filter(|c| !c.is_degenerate())
            .max_by(|a, b| a.value(p).total_cmp(&b.value(p)))
            .map(|c| c.tag)
            .unwrap_or(BoundaryTag::Dirichlet)
    }

    pub fn dirichlet_data(&self, p: Point, t: f64) -> [f64; 2] {
        (self.dirichlet_data)(p, t)
    }

    pub fn has_do_nothing(&self, t: f64) -> bool {
        self.constraints_at(t).iter().any(|c| c.tag == BoundaryTag::DoNothing)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "channel2d" => Ok(make_channel_2d()),
            "stationary_box2d" => Ok(make_stationary_box_2d()),
            other => Err(Error::InvalidParameter {
                name: "motion",
                reason: format!("unknown motion `{other}` (expected channel2d | stationary_box2d)"),
            }),
        }
    }
}

/// Half-height of the channel, g(t) = 1 - sin(t)/10.
pub fn channel_half_height(t: f64) -> f64 {
    1.0 - t.sin() / 10.0
}

/// Channel (0,4) x (-g(t), g(t)); Dirichlet inflow and walls, do-nothing outflow at x = 4.
pub fn make_channel_2d() -> DomainMotion {
    let layout = BackgroundLayout {
        origin: [0.0, 0.0],
        extent: Aabb::new([-0.05, -1.1], [4.05, 1.1]),
    };
    DomainMotion::from_half_planes("channel2d", 0.1, layout, |t| {
        let g = channel_half_height(t);
        vec![
            HalfPlane::new([-1.0, 0.0], 0.0, BoundaryTag::Dirichlet),
            HalfPlane::new([1.0, 0.0], -4.0, BoundaryTag::DoNothing),
            HalfPlane::new([0.0, 1.0], -g, BoundaryTag::Dirichlet),
            HalfPlane::new([0.0, -1.0], -g, BoundaryTag::Dirichlet),
        ]
    })
}

/// Fixed unit square, all Dirichlet. The background grid is shifted so the
/// walls cut through cells.
pub fn make_stationary_box_2d() -> DomainMotion {
    let layout = BackgroundLayout {
        origin: [-0.0371, -0.0529],
        extent: Aabb::new([-0.05, -0.05], [1.05, 1.05]),
    };
    DomainMotion::from_half_planes("stationary_box2d", 0.0, layout, |_| {
        vec![
            HalfPlane::new([-1.0, 0.0], 0.0, BoundaryTag::Dirichlet),
            HalfPlane::new([1.0, 0.0], -1.0, BoundaryTag::Dirichlet),
            HalfPlane::new([0.0, -1.0], 0.0, BoundaryTag::Dirichlet),
            HalfPlane::new([0.0, 1.0], -1.0, BoundaryTag::Dirichlet),
        ]
    })
}

/// Strip parameters tying δ to the BDF order and the boundary speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StripParams {
    pub s: usize,
    pub dt: f64,
    pub delta: f64,
    pub c_delta: f64,
}

impl StripParams {
    /// Checks s·w_max·Δt ≤ δ ≤ c_δ·s·w_max·Δt.
    pub fn is_admissible(&self, w_max: f64) -> bool {
        let lower = self.s as f64 * w_max * self.dt;
        self.delta >= lower * (1.0 - 1e-14) && self.delta <= self.c_delta * lower * (1.0 + 1e-14)
    }
}

/// δ at its lower admissible bound s·w_max·Δt.
pub fn strip_width(motion: &DomainMotion, s: usize, dt: f64) -> Result<StripParams> {
    strip_width_with_factor(motion, s, dt, 1.0)
}

/// δ = c_δ·s·w_max·Δt.
pub fn strip_width_with_factor(motion: &DomainMotion, s: usize, dt: f64, c_delta: f64) -> Result<StripParams> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("time step must be positive, got {dt}"),
        });
    }
    if !(c_delta >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "c_delta",
            reason: format!("safety factor must be >= 1, got {c_delta}"),
        });
    }
    Ok(StripParams {
        s,
        dt,
        delta: c_delta * s as f64 * motion.w_max() * dt,
        c_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn channel_values() {
        let m = make_channel_2d();
        assert_eq!(m.w_max(), 0.1);
        assert!((m.levelset([2.0, 0.0], 0.0) + 1.0).abs() < 1e-15);
        assert!((m.levelset([2.0, 0.95], FRAC_PI_2) - 0.05).abs() < 1e-14);
    }

    #[test]
    fn channel_tags() {
        let m = make_channel_2d();
        assert_eq!(m.boundary_tag([0.0, 0.2], 0.3), BoundaryTag::Dirichlet);
        assert_eq!(m.boundary_tag([4.0, 0.2], 0.3), BoundaryTag::DoNothing);
        assert_eq!(m.boundary_tag([2.0, channel_half_height(0.3)], 0.3), BoundaryTag::Dirichlet);
        assert!(m.has_do_nothing(1.0));
        assert!(!make_stationary_box_2d().has_do_nothing(1.0));
    }

    #[test]
    fn strip_widths() {
        let m = make_channel_2d();
        let p = strip_width(&m, 1, 0.1).unwrap();
        assert!((p.delta - 0.01).abs() < 1e-16);
        assert_eq!(p.c_delta, 1.0);
        assert!(p.is_admissible(m.w_max()));
        let p = strip_width(&m, 2, 0.05).unwrap();
        assert!((p.delta - 0.01).abs() < 1e-16);
        let still = make_stationary_box_2d();
        assert_eq!(strip_width(&still, 2, 0.1).unwrap().delta, 0.0);
        assert!(strip_width(&m, 1, 0.0).is_err());
        assert!(strip_width(&m, 1, -0.1).is_err());
    }

    #[test]
    fn enlarged_shift() {
        let m = make_channel_2d();
        let phi0 = m.enlarged_levelset(0.4, 0.0);
        for p in [[1.0, 0.3], [3.9, -0.99], [4.2, 2.0]] {
            assert_eq!(phi0(p), m.levelset(p, 0.4));
        }
        let phi = m.enlarged_levelset(0.0, 0.01);
        assert!((phi([2.0, 0.0]) + 1.01).abs() < 1e-15);
        // 0.005 outside the upper wall
        assert!((phi([2.0, 1.005]) + 0.005).abs() < 1e-15);
    }

    #[test]
    fn layout_grid_covers_extent() {
        let m = make_channel_2d();
        let (bbox, nx, ny) = m.layout().grid(0.25);
        assert_eq!(bbox.min, [-0.25, -1.25]);
        assert_eq!(bbox.max, [4.25, 1.25]);
        assert_eq!((nx, ny), (18, 10));
        assert!(DomainMotion::by_name("nope").is_err());
    }
}
