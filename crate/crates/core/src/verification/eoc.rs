//! Experimental orders of convergence: pairwise log-ratios and a damped
//! Gauss–Newton fit of g(τ) = g₀ + c·τ^p.

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::Mat;

use super::norms::NormKind;

/// Fitted model g(τ) = limit + coefficient·τ^order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerFit {
    pub limit: f64,
    pub coefficient: f64,
    pub order: f64,
    /// Asymptotic standard errors of (limit, coefficient, order); `None`
    /// when the fit has no residual degrees of freedom.
    pub std_errors: Option<[f64; 3]>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the fit did not converge or the relative standard error of
    /// the order exceeds 20 %.
    pub indeterminate: bool,
}

impl PowerFit {
    pub const MAX_REL_STD_ERROR: f64 = 0.2;

    fn failed(iterations: usize) -> Self {
        Self {
            limit: f64::NAN,
            coefficient: f64::NAN,
            order: f64::NAN,
            std_errors: None,
            iterations,
            converged: false,
            indeterminate: true,
        }
    }

    pub fn relative_order_error(&self) -> Option<f64> {
        self.std_errors.map(|s| s[2] / self.order.abs())
    }

    /// The order, or `None` when indeterminate.
    pub fn order_if_determinate(&self) -> Option<f64> {
        (!self.indeterminate).then_some(self.order)
    }
}

/// log(e_{i−1}/e_i)/log(τ_{i−1}/τ_i) for consecutive entries; the first
/// entry is `None`.
pub fn pairwise_eoc(taus: &[f64], values: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; taus.len().min(values.len())];
    for i in 1..out.len() {
        let (r, q) = (values[i - 1] / values[i], taus[i - 1] / taus[i]);
        if r > 0.0 && r.is_finite() && q > 0.0 && q != 1.0 {
            out[i] = Some(r.ln() / q.ln());
        }
    }
    out
}

fn linear_coefficients(taus: &[f64], values: &[f64], p: f64) -> Option<(f64, f64)> {
    // least squares for (a, c) with p fixed
    let n = taus.len() as f64;
    let s: Vec<f64> = taus.iter().map(|t| t.powf(p)).collect();
    let (sx, sy) = (s.iter().sum::<f64>(), values.iter().sum::<f64>());
    let sxx: f64 = s.iter().map(|x| x * x).sum();
    let sxy: f64 = s.iter().zip(values).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    if det.abs() <= 1e-300 {
        return None;
    }
    let c = (n * sxy - sx * sy) / det;
    Some(((sy - c * sx) / n, c))
}

fn ssr(taus: &[f64], values: &[f64], q: [f64; 3]) -> f64 {
    taus.iter().zip(values).map(|(t, v)| (q[0] + q[1] * t.powf(q[2]) - v).powi(2)).sum()
}

fn initial_order(taus: &[f64], values: &[f64]) -> f64 {
    // log-ratios of successive differences are exact for geometric τ
    let d: Vec<f64> = values.windows(2).map(|w| w[0] - w[1]).collect();
    let mut est = Vec::new();
    for i in 1..d.len() {
        let (r, q) = (d[i - 1] / d[i], taus[i - 1] / taus[i]);
        if r > 0.0 && r.is_finite() && q > 0.0 && q != 1.0 {
            est.push(r.ln() / q.ln());
        }
    }
    if est.is_empty() {
        est = pairwise_eoc(taus, values).into_iter().flatten().collect();
    }
    let p = if est.is_empty() { 1.0 } else { est.iter().sum::<f64>() / est.len() as f64 };
    if p.is_finite() {
        p.clamp(0.05, 10.0)
    } else {
        1.0
    }
}

fn solve_small(a: &[[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let m = Mat::<f64>::from_fn(3, 3, |i, j| a[i][j]);
    let rhs = Mat::<f64>::from_fn(3, 1, |i, _| b[i]);
    let x = m.partial_piv_lu().solve(&rhs);
    let out = [x[(0, 0)], x[(1, 0)], x[(2, 0)]];
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn inverse_small(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut inv = [[0.0; 3]; 3];
    for k in 0..3 {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let col = solve_small(a, e)?;
        for i in 0..3 {
            inv[i][k] = col[i];
        }
    }
    Some(inv)
}

/// Nonlinear least-squares fit of g(τ) = g₀ + c·τ^p.
pub fn fit_power_law(taus: &[f64], values: &[f64]) -> PowerFit {
    let n = taus.len().min(values.len());
    if n < 3 || taus[..n].iter().any(|t| !(*t > 0.0)) || values[..n].iter().any(|v| !v.is_finite()) {
        return PowerFit::failed(0);
    }
    let (taus, values) = (&taus[..n], &values[..n]);
    let p0 = initial_order(taus, values);
    let Some((a0, c0)) = linear_coefficients(taus, values, p0) else {
        return PowerFit::failed(0);
    };
    let mut q = [a0, c0, p0];
    let mut cur = ssr(taus, values, q);
    let scale: f64 = values.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut damping = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let jac = |q: [f64; 3], t: f64| {
        let tp = t.powf(q[2]);
        [1.0, tp, q[1] * tp * t.ln()]
    };
    let normal = |q: [f64; 3]| {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (t, v) in taus.iter().zip(values) {
            let j = jac(q, *t);
            let r = q[0] + q[1] * t.powf(q[2]) - v;
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        (jtj, jtr)
    };
    for it in 0..500 {
        iterations = it + 1;
        if cur <= 1e-30 * scale {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal(q);
        // Jacobi scaling
        let d: Vec<f64> = (0..3).map(|a| jtj[a][a].sqrt().max(f64::MIN_POSITIVE)).collect();
        let mut scaled = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                scaled[a][b] = jtj[a][b] / (d[a] * d[b]);
            }
        }
        let Some(step) = solve_small(&scaled, [0, 1, 2].map(|a| -jtr[a] / d[a])) else { break };
        let step = [0, 1, 2].map(|a| step[a] / d[a]);
        let mut accepted = false;
        let mut lam = damping;
        for _ in 0..60 {
            let trial = [q[0] + lam * step[0], q[1] + lam * step[1], q[2] + lam * step[2]];
            let s = ssr(taus, values, trial);
            if s.is_finite() && s <= cur {
                let small = (0..3).all(|a| (lam * step[a]).abs() <= 1e-12 * q[a].abs().max(1e-300) + 1e-300);
                let stalled = cur - s <= 1e-15 * cur;
                q = trial;
                cur = s;
                accepted = true;
                damping = (lam * 2.0).min(1.0);
                if small || stalled && lam == 1.0 {
                    converged = true;
                }
                break;
            }
            lam *= 0.5;
        }
        if !accepted {
            // no descent direction left: at a (numerical) minimum
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let (jtj, _) = normal(q);
    let dof = n as isize - 3;
    let std_errors = if dof > 0 {
        inverse_small(&jtj).map(|inv| {
            let s2 = cur / dof as f64;
            [0, 1, 2].map(|a| (s2 * inv[a][a]).max(0.0).sqrt())
        })
    } else {
        None
    };
    let singular = inverse_small(&jtj).is_none() || q[1] == 0.0;
    let mut fit = PowerFit {
        limit: q[0],
        coefficient: q[1],
        order: q[2],
        std_errors,
        iterations,
        converged,
        indeterminate: false,
    };
    let rel_bad = match (dof > 0, fit.relative_order_error()) {
        (true, Some(r)) => !(r <= PowerFit::MAX_REL_STD_ERROR),
        (true, None) => true,
        (false, _) => false,
    };
    fit.indeterminate =
        !converged || singular || rel_bad || !q.iter().all(|v| v.is_finite()) || !(fit.order > 0.0);
    fit
}

/// Errors of one norm over an (h, Δt) grid with fits along both axes.
#[derive(Clone, Debug, PartialEq)]
pub struct EocTable {
    pub norm: NormKind,
    pub hs: Vec<f64>,
    pub dts: Vec<f64>,
    /// `values[i][j]` for (hs[i], dts[j]); `None` marks a failed run.
    pub values: Vec<Vec<Option<f64>>>,
    /// Fit in Δt for every h row (g_h, eoc_Δt).
    pub row_fits: Vec<Option<PowerFit>>,
    /// Fit in h for every Δt column (g_Δt, eoc_h).
    pub col_fits: Vec<Option<PowerFit>>,
}

fn fit_line(taus: &[f64], values: &[Option<f64>]) -> Option<PowerFit> {
    if taus.len() < 3 || values.iter().any(Option::is_none) {
        return None;
    }
    let v: Vec<f64> = values.iter().map(|v| v.unwrap()).collect();
    Some(fit_power_law(taus, &v))
}

impl EocTable {
    pub fn new(norm: NormKind, hs: Vec<f64>, dts: Vec<f64>, values: Vec<Vec<Option<f64>>>) -> Self {
        let row_fits = values.iter().map(|row| fit_line(&dts, row)).collect();
        let col_fits = (0..dts.len())
            .map(|j| {
                let col: Vec<Option<f64>> = values.iter().map(|r| r[j]).collect();
                fit_line(&hs, &col)
            })
            .collect();
        Self { norm, hs, dts, values, row_fits, col_fits }
    }

    /// Rows are h, columns Δt, with trailing g_h/eoc_Δt columns and
    /// g_Δt/eoc_h rows. `n/a` marks a fit that is not applicable (fewer than
    /// three values or a failed run on the line), `nan` a failed run and
    /// `indet` an indeterminate order.
    pub fn to_csv(&self) -> String {
        let fmt_fit = |f: &Option<PowerFit>| match f {
            None => ("n/a".to_string(), "n/a".to_string()),
            Some(f) => (
                format!("{:.6e}", f.limit),
                if f.indeterminate { "indet".into() } else { format!("{:.4}", f.order) },
            ),
        };
        let mut s = String::new();
        let _ = write!(s, "{}\\dt", self.norm);
        for dt in &self.dts {
            let _ = write!(s, ",{dt}");
        }
        s.push_str(",g_h,eoc_dt\n");
        for (i, h) in self.hs.iter().enumerate() {
            let _ = write!(s, "{h}");
            for v in &self.values[i] {
                match v {
                    Some(v) => {
                        let _ = write!(s, ",{v:.6e}");
                    }
                    None => s.push_str(",nan"),
                }
            }
            let (g, p) = fmt_fit(&self.row_fits[i]);
            let _ = writeln!(s, ",{g},{p}");
        }
        let fits: Vec<(String, String)> = self.col_fits.iter().map(fmt_fit).collect();
        s.push_str("g_dt");
        for f in &fits {
            let _ = write!(s, ",{}", f.0);
        }
        s.push_str(",,\neoc_h");
        for f in &fits {
            let _ = write!(s, ",{}", f.1);
        }
        s.push_str(",,\n");
        s
    }
}
