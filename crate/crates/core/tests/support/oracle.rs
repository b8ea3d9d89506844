//! Slice-sampling oracle for integrals over a triangle intersected with
//! half-planes. Works directly from the inequalities: the region is cut into
//! x-slabs between pairwise line intersections, each slab is sampled with a
//! composite Gauss rule in x, and every sample integrates its exact
//! y-interval in closed form.

#![allow(dead_code)]

use cutstokes_core::geometry::{HalfPlane, Point};
use cutstokes_core::quadrature::gauss_legendre_unit;

/// `a x + b y + c <= 0`
#[derive(Clone, Copy, Debug)]
pub struct Ineq {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub fn region(tri: &[Point; 3], constraints: &[HalfPlane]) -> Vec<Ineq> {
    let area2 = (tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]);
    let s = area2.signum();
    let mut out = Vec::new();
    for k in 0..3 {
        let (p, q) = (tri[k], tri[(k + 1) % 3]);
        // inside is to the left of p->q for counter-clockwise triangles
        let (a, b) = (q[1] - p[1], -(q[0] - p[0]));
        out.push(Ineq { a: s * a, b: s * b, c: -s * (a * p[0] + b * p[1]) });
    }
    for h in constraints {
        out.push(Ineq { a: h.normal[0], b: h.normal[1], c: h.offset });
    }
    out
}

fn y_interval(ineqs: &[Ineq], x: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for q in ineqs {
        if q.b > 0.0 {
            hi = hi.min(-(q.a * x + q.c) / q.b);
        } else if q.b < 0.0 {
            lo = lo.max(-(q.a * x + q.c) / q.b);
        } else if q.a * x + q.c > 0.0 {
            return None;
        }
    }
    (hi > lo).then_some((lo, hi))
}

fn breakpoints(ineqs: &[Ineq], x0: f64, x1: f64) -> Vec<f64> {
    let mut xs = vec![x0, x1];
    for i in 0..ineqs.len() {
        for j in i + 1..ineqs.len() {
            let (p, q) = (ineqs[i], ineqs[j]);
            let det = p.a * q.b - q.a * p.b;
            if det.abs() > 1e-14 {
                let x = (-p.c * q.b + q.c * p.b) / det;
                if x > x0 && x < x1 {
                    xs.push(x);
                }
            }
        }
        if ineqs[i].b == 0.0 && ineqs[i].a != 0.0 {
            let x = -ineqs[i].c / ineqs[i].a;
            if x > x0 && x < x1 {
                xs.push(x);
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    xs
}

/// `out[px][py] = ∫ x^px y^py` over the region for px, py ≤ `max_deg`,
/// using about `samples` x-samples in total.
pub fn monomial_integrals(tri: &[Point; 3], constraints: &[HalfPlane], max_deg: usize, samples: usize) -> Vec<Vec<f64>> {
    let ineqs = region(tri, constraints);
    let x0 = tri.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let x1 = tri.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let xs = breakpoints(&ineqs, x0, x1);
    const ORDER: usize = 8;
    let per = (samples / (xs.len() - 1) / ORDER).max(1);
    let rule = gauss_legendre_unit(ORDER);
    let mut out = vec![vec![0.0; max_deg + 1]; max_deg + 1];
    for w in xs.windows(2) {
        let len = (w[1] - w[0]) / per as f64;
        for (k, &(s, wt)) in (0..per).flat_map(|k| rule.iter().map(move |r| (k, r))) {
            let x = w[0] + (k as f64 + s) * len;
            if let Some((lo, hi)) = y_interval(&ineqs, x) {
                for px in 0..=max_deg {
                    for py in 0..=max_deg {
                        let k = py as i32 + 1;
                        out[px][py] += wt * len * x.powi(px as i32) * (hi.powi(k) - lo.powi(k)) / k as f64;
                    }
                }
            }
        }
    }
    out
}

/// Length of the part of each constraint line bounding the region.
pub fn constraint_boundary_length(tri: &[Point; 3], constraints: &[HalfPlane]) -> f64 {
    let ineqs = region(tri, constraints);
    let mut total = 0.0;
    for (k, h) in constraints.iter().enumerate() {
        if h.is_degenerate() {
            continue;
        }
        // line p(s) = p0 + s·t with t ⟂ n
        let n = h.normal;
        let nn = n[0] * n[0] + n[1] * n[1];
        let p0 = [-h.offset * n[0] / nn, -h.offset * n[1] / nn];
        let t = [-n[1] / nn.sqrt(), n[0] / nn.sqrt()];
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut empty = false;
        for (j, q) in ineqs.iter().enumerate() {
            if j == 3 + k {
                continue;
            }
            let slope = q.a * t[0] + q.b * t[1];
            let base = q.a * p0[0] + q.b * p0[1] + q.c;
            if slope.abs() < 1e-14 {
                if base > 1e-14 {
                    empty = true;
                }
            } else if slope > 0.0 {
                hi = hi.min(-base / slope);
            } else {
                lo = lo.max(-base / slope);
            }
        }
        if !empty && hi > lo {
            total += hi - lo;
        }
    }
    total
}
