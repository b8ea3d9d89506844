//! Fast invariant checks of an installed binary.

use cutstokes_core::assembly::bdf_coefficients;
use cutstokes_core::verification::{fit_power_law, NormKind};

use crate::config::{InitialData, RunConfig};
use crate::run::execute;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Check {
    match f() {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

pub fn run_selftest() -> Vec<Check> {
    vec![
        check("config_defaults_validate", || {
            RunConfig::default().resolve().map(|_| "ok".into()).map_err(|e| e.to_string())
        }),
        check("bdf_coefficients_sum_to_zero", || {
            for s in [1, 2] {
                let a = bdf_coefficients(s).map_err(|e| e.to_string())?;
                let sum: f64 = a.iter().sum();
                let first: f64 = a.iter().enumerate().map(|(k, a)| -(k as f64) * a).sum();
                if sum.abs() > 1e-14 || (first - 1.0).abs() > 1e-14 {
                    return Err(format!("s={s}: sum {sum:e}, first moment {first}"));
                }
            }
            Ok("ok".into())
        }),
        check("power_law_round_trip", || {
            let taus = [0.4, 0.2, 0.1, 0.05, 0.025];
            let v: Vec<f64> = taus.iter().map(|t: &f64| 0.01 + 3.0 * t.powf(1.7)).collect();
            let f = fit_power_law(&taus, &v);
            if f.indeterminate || (f.order - 1.7).abs() > 1e-4 {
                return Err(format!("{f:?}"));
            }
            Ok(format!("order {:.6}", f.order))
        }),
        check("zero_data_box_stays_zero", || {
            let cfg = RunConfig {
                motion: "stationary_box2d".into(),
                initial: InitialData::Zero,
                t_final: 0.4,
                ..Default::default()
            };
            let out = execute(&cfg).map_err(|e| e.to_string())?;
            let m = out.diagnostics.iter().map(|d| d.l2_sq.sqrt()).fold(0.0, f64::max);
            if m > 1e-12 {
                return Err(format!("max |u_h| = {m:e}"));
            }
            Ok(format!("max |u_h| = {m:e}"))
        }),
        check("channel_smoke_run", || {
            let cfg = RunConfig { case: Some("channel2d".into()), t_final: 0.4, ..Default::default() };
            let out = execute(&cfg).map_err(|e| e.to_string())?;
            if !out.passed() {
                return Err(format!("residual {:e}, blow_up {}", out.max_residual, out.stability.blow_up));
            }
            let e = out.relative(NormKind::VelocityL2).ok_or("no error")?;
            if !(e < 1.0) {
                return Err(format!("relative velocity error {e}"));
            }
            Ok(format!("u_L2L2 {e:.3e}, residual {:.1e}", out.max_residual))
        }),
    ]
}
