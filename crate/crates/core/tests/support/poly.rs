//! Dense bivariate polynomials for hand-built basis functions.

#![allow(dead_code)]

use cutstokes_core::geometry::Point;

pub const N: usize = 5;

/// `c[i][j]` multiplies `x^i y^j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Poly(pub [[f64; N]; N]);

impl Poly {
    pub fn zero() -> Self {
        Poly([[0.0; N]; N])
    }

    pub fn affine(c: f64, a: f64, b: f64) -> Self {
        let mut p = Self::zero();
        p.0[0][0] = c;
        p.0[1][0] = a;
        p.0[0][1] = b;
        p
    }

    pub fn scale(self, s: f64) -> Self {
        Poly(self.0.map(|r| r.map(|v| v * s)))
    }

    pub fn add(self, o: Self) -> Self {
        let mut p = self;
        for i in 0..N {
            for j in 0..N {
                p.0[i][j] += o.0[i][j];
            }
        }
        p
    }

    pub fn mul(self, o: Self) -> Self {
        let mut p = Self::zero();
        for i in 0..N {
            for j in 0..N {
                if self.0[i][j] == 0.0 {
                    continue;
                }
                for k in 0..N - i {
                    for l in 0..N - j {
                        p.0[i + k][j + l] += self.0[i][j] * o.0[k][l];
                    }
                }
            }
        }
        p
    }

    pub fn dx(self) -> Self {
        let mut p = Self::zero();
        for i in 1..N {
            for j in 0..N {
                p.0[i - 1][j] = i as f64 * self.0[i][j];
            }
        }
        p
    }

    pub fn dy(self) -> Self {
        let mut p = Self::zero();
        for i in 0..N {
            for j in 1..N {
                p.0[i][j - 1] = j as f64 * self.0[i][j];
            }
        }
        p
    }

    pub fn eval(&self, x: Point) -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            for j in 0..N {
                s += self.0[i][j] * x[0].powi(i as i32) * x[1].powi(j as i32);
            }
        }
        s
    }

    /// Integral given monomial moments `m[i][j] = ∫ x^i y^j`.
    pub fn integrate(&self, m: &[Vec<f64>]) -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            for j in 0..N {
                if self.0[i][j] != 0.0 {
                    s += self.0[i][j] * m[i][j];
                }
            }
        }
        s
    }
}

/// Lagrange basis on the reference triangle (0,0), (1,0), (0,1) with the
/// node each function belongs to.
pub fn reference_basis(degree: usize) -> Vec<(Point, Poly)> {
    let l = [Poly::affine(1.0, -1.0, -1.0), Poly::affine(0.0, 1.0, 0.0), Poly::affine(0.0, 0.0, 1.0)];
    let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    match degree {
        1 => (0..3).map(|i| (v[i], l[i])).collect(),
        _ => {
            let mut out: Vec<(Point, Poly)> =
                (0..3).map(|i| (v[i], l[i].mul(l[i].scale(2.0).add(Poly::affine(-1.0, 0.0, 0.0))))).collect();
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let mid = [0.5 * (v[i][0] + v[j][0]), 0.5 * (v[i][1] + v[j][1])];
                out.push((mid, l[i].mul(l[j]).scale(4.0)));
            }
            out
        }
    }
}
