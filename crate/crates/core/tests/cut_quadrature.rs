mod support;

use cutstokes_core::geometry::{make_channel_2d, BoundaryTag, HalfPlane, Point};
use cutstokes_core::mesh::{background_for, classify_active};
use cutstokes_core::quadrature::{cell_rule, clip_simplex, clip_triangle, CutQuadrature};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracle;

fn unit_plane(rng: &mut ChaCha8Rng, centre: Point) -> HalfPlane {
    let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let n = [a.cos(), a.sin()];
    let shift: f64 = rng.gen_range(-0.25..0.25);
    HalfPlane::new(n, -(n[0] * centre[0] + n[1] * centre[1]) - shift, BoundaryTag::Dirichlet)
}

#[test]
fn reference_clip_hand_values() {
    let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let c = clip_simplex(&tri, [-0.5, 0.5, 0.5]);
    let area: f64 = c.inside_area();
    assert!((area - 0.125).abs() < 1e-12);
    assert!((0.5 - area - 0.375).abs() < 1e-12);
    assert!((c.interface_length() - 0.5f64.sqrt()).abs() < 1e-12);
    let x_half = clip_triangle(&tri, &[HalfPlane::new([1.0, 0.0], -0.5, BoundaryTag::Dirichlet)], 1e-14);
    assert!((x_half.area - 0.375).abs() < 1e-12);
    assert!((x_half.boundary_length() - 0.5).abs() < 1e-12);
}

#[test]
fn cut_rules_match_slice_oracle_on_monomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for _ in 0..40 {
        let tri: [Point; 3] = [
            [rng.gen_range(-1.0..0.0), rng.gen_range(-1.0..0.0)],
            [rng.gen_range(0.3..1.2), rng.gen_range(-1.0..0.2)],
            [rng.gen_range(-0.5..0.8), rng.gen_range(0.4..1.3)],
        ];
        let centre = [(tri[0][0] + tri[1][0] + tri[2][0]) / 3.0, (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0];
        let nc = rng.gen_range(1..=3);
        let cons: Vec<HalfPlane> = (0..nc).map(|_| unit_plane(&mut rng, centre)).collect();
        let clipped = clip_triangle(&tri, &cons, 1e-14);
        if clipped.area <= 0.0 {
            continue;
        }
        let rule = cell_rule(0, &clipped, 6, 4);
        let oracle_values = oracle::monomial_integrals(&tri, &cons, 3, 100_000 / 40);
        for px in 0..=3 {
            for py in 0..=(6 - px).min(3) {
                let q: f64 = rule.volume.iter().map(|p| p.w * p.x[0].powi(px) * p.x[1].powi(py)).sum();
                let o = oracle_values[px as usize][py as usize];
                assert!((q - o).abs() < 1e-8, "x^{px} y^{py}: {q} vs {o}");
            }
        }
        let len = oracle::constraint_boundary_length(&tri, &cons);
        assert!((clipped.boundary_length() - len).abs() < 1e-10, "{} vs {len}", clipped.boundary_length());
        assert!((rule.surface_weight() - len).abs() < 1e-10);
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn channel_quadrature_reproduces_domain() {
    let motion = make_channel_2d();
    let mesh = background_for(&motion, 0.125).unwrap();
    for t in [0.0, 0.37, 1.5] {
        let slab = classify_active(&mesh, &motion, t, 0.0).unwrap();
        let q = CutQuadrature::new(&mesh, &slab, 4, 5);
        let g = cutstokes_core::geometry::channel_half_height(t);
        assert!((q.volume() - 8.0 * g).abs() < 1e-11);
        assert!((q.surface() - (8.0 + 4.0 * g)).abs() < 1e-11);
        // ∫ y² over the channel = 4·2g³/3
        let iy2: f64 = q.cells.iter().flat_map(|c| &c.volume).map(|p| p.w * p.x[1] * p.x[1]).sum();
        assert!((iy2 - 8.0 * g.powi(3) / 3.0).abs() < 1e-11);
        // outflow length carried with the do-nothing tag
        let outflow: f64 =
            q.cells.iter().flat_map(|c| &c.surface).filter(|s| s.tag == BoundaryTag::DoNothing).map(|s| s.w).sum();
        assert!((outflow - 2.0 * g).abs() < 1e-11);
    }
}

#[test]
fn enlarged_quadrature_covers_strip() {
    let motion = make_channel_2d();
    let mesh = background_for(&motion, 0.125).unwrap();
    let delta = 0.03;
    let slab = classify_active(&mesh, &motion, 0.5, delta).unwrap();
    let q = CutQuadrature::enlarged(&mesh, &slab, 2);
    let g = cutstokes_core::geometry::channel_half_height(0.5) + delta;
    // Ω_δ is the rectangle (−δ, 4+δ) × (−g−δ, g+δ)
    assert!((q.volume() - (4.0 + 2.0 * delta) * 2.0 * g).abs() < 1e-11);
}
