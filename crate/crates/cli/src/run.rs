//! Single runs: time loop, monitors, error norms and output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cutstokes_core::assembly::GaugeMode;
use cutstokes_core::timestepper::{stability_monitor, GaugeChoice, Simulation, StabilityReport, StepDiagnostics};
use cutstokes_core::verification::{level_errors, ErrorAccumulator, NormKind};
use cutstokes_core::vtk;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Results of a completed time loop.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub diagnostics: Vec<StepDiagnostics>,
    pub initial_l2_sq: f64,
    pub stability: StabilityReport,
    /// Present when the config names a manufactured case.
    pub errors: Option<ErrorAccumulator>,
    pub max_residual: f64,
    pub rel_tol: f64,
}

impl RunOutcome {
    /// Relative space-time errors; `None` where the exact norm vanishes.
    pub fn relative_errors(&self) -> Option<[Option<f64>; 4]> {
        self.errors.as_ref().map(ErrorAccumulator::finish_partial)
    }

    pub fn relative(&self, kind: NormKind) -> Option<f64> {
        self.relative_errors().and_then(|e| e[kind.index()])
    }

    pub fn residual_ok(&self) -> bool {
        self.max_residual <= self.rel_tol
    }

    /// Completed with every solve converged and no blow-up flagged.
    pub fn passed(&self) -> bool {
        self.residual_ok() && !self.stability.blow_up
    }
}

/// Optional per-step VTK output.
pub struct VtkSink {
    pub dir: PathBuf,
    pub every: usize,
}

/// Runs the configured simulation without writing files.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    execute_with(cfg, None)
}

pub fn execute_with(cfg: &RunConfig, vtk_sink: Option<&VtkSink>) -> Result<RunOutcome> {
    let resolved = cfg.resolve()?;
    let scheme = resolved.scheme.clone();
    let mean_free = match scheme.gauge {
        GaugeChoice::Auto => !resolved.motion.has_do_nothing(0.0),
        GaugeChoice::Fixed(GaugeMode::ZeroMean) => true,
        GaugeChoice::Fixed(GaugeMode::None) => false,
    };
    let sim = Simulation::new(&resolved.motion, resolved.data.clone(), scheme.clone())?;
    let mut acc = resolved.case.as_ref().map(|_| ErrorAccumulator::new());
    let final_state = sim.run(|view| {
        if let (Some(case), Some(acc)) = (&resolved.case, acc.as_mut()) {
            let lev = level_errors(view.mesh, view.space, view.slab, view.state, case, view.t, mean_free);
            acc.add(view.t, scheme.dt, &lev);
        }
        if let Some(sink) = vtk_sink {
            if view.n % sink.every == 0 {
                let path = sink.dir.join(format!("step_{:05}.vtk", view.n));
                let mut buf = Vec::new();
                vtk::write_fields(&mut buf, view.mesh, view.slab, view.state)
                    .map_err(|e| cutstokes_core::Error::Config(format!("vtk: {e}")))?;
                write_atomic(&path, &buf).map_err(|e| cutstokes_core::Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    })?;
    let stability = stability_monitor(
        &final_state.diagnostics,
        final_state.initial_l2_sq,
        scheme.gamma_p,
        scheme.dt,
        cfg.monitor_factor,
    );
    let max_residual = final_state.diagnostics.iter().map(|d| d.residual).fold(0.0, f64::max);
    Ok(RunOutcome {
        diagnostics: final_state.diagnostics,
        initial_l2_sq: final_state.initial_l2_sq,
        stability,
        errors: acc,
        max_residual,
        rel_tol: scheme.rel_tol,
    })
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let err = |source| CliError::Write { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

pub fn config_comment(cfg: &RunConfig) -> String {
    format!("# config: {}\n", cfg.to_json_line())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.12e}"))
}

pub fn diagnostics_csv(cfg: &RunConfig, out: &RunOutcome) -> String {
    let mut s = config_comment(cfg);
    s.push_str(StepDiagnostics::CSV_HEADER);
    s.push('\n');
    for d in &out.diagnostics {
        s.push_str(&d.csv_row());
        s.push('\n');
    }
    s
}

pub fn errors_csv(cfg: &RunConfig, acc: &ErrorAccumulator) -> String {
    let mut s = config_comment(cfg);
    s.push_str("quantity");
    for k in NormKind::ALL {
        let _ = write!(s, ",{k}");
    }
    s.push('\n');
    let rel = acc.finish_partial();
    s.push_str("relative");
    for v in rel {
        let _ = write!(s, ",{}", fmt_opt(v));
    }
    s.push('\n');
    for (name, sq) in [("absolute", &acc.error_sq), ("exact", &acc.exact_sq)] {
        s.push_str(name);
        for v in sq {
            let _ = write!(s, ",{:.12e}", v.sqrt());
        }
        s.push('\n');
    }
    s
}

/// Spatial errors per step, each norm divided by its maximum over time.
pub fn error_history_csv(cfg: &RunConfig, acc: &ErrorAccumulator) -> String {
    let mut max = [0.0f64; 4];
    for (_, e) in &acc.history {
        for k in 0..4 {
            max[k] = max[k].max(e[k]);
        }
    }
    let mut s = config_comment(cfg);
    s.push_str("time");
    for k in NormKind::ALL {
        let _ = write!(s, ",{k}");
    }
    s.push('\n');
    for (t, e) in &acc.history {
        let _ = write!(s, "{t:.6}");
        for k in 0..4 {
            let v = if max[k] > 0.0 { Some(e[k] / max[k]) } else { None };
            let _ = write!(s, ",{}", fmt_opt(v));
        }
        s.push('\n');
    }
    s
}

pub fn gnuplot_script() -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key left top\nset xlabel 't'\nset ylabel 'error / max error'\n\
set terminal pngcairo size 900,600\nset output 'errors_over_time.png'\n",
    );
    s.push_str("plot ");
    let cols: Vec<String> = NormKind::ALL
        .iter()
        .enumerate()
        .map(|(i, k)| format!("'error_history.csv' skip 2 using 1:{} with linespoints title '{}'", i + 2, k.as_str().replace('_', "\\_")))
        .collect();
    s.push_str(&cols.join(", \\\n     "));
    s.push('\n');
    s
}

fn summary_json(out: &RunOutcome) -> String {
    let rel = out.relative_errors();
    let v = serde_json::json!({
        "status": if out.passed() { "ok" } else { "monitor_failed" },
        "steps": out.diagnostics.len(),
        "max_residual": out.max_residual,
        "rel_tol": out.rel_tol,
        "residual_ok": out.residual_ok(),
        "stability": {
            "max_ratio": out.stability.max_ratio,
            "growth_rate": out.stability.growth_rate,
            "max_detrended_ratio": out.stability.max_detrended_ratio,
            "factor": out.stability.factor,
            "blow_up": out.stability.blow_up,
        },
        "relative_errors": rel.map(|r| {
            NormKind::ALL.iter().map(|k| (k.as_str().to_string(), serde_json::json!(r[k.index()]))).collect::<serde_json::Map<_, _>>()
        }),
    });
    serde_json::to_string_pretty(&v).expect("summary serializes") + "\n"
}

/// Runs and writes all output files into `cfg.output_dir`.
pub fn run_to_dir(cfg: &RunConfig) -> Result<RunOutcome> {
    let dir = &cfg.output_dir;
    let sink = cfg.dump_vtk.then(|| VtkSink { dir: dir.join("vtk"), every: cfg.vtk_every });
    let out = execute_with(cfg, sink.as_ref())?;
    write_atomic(&dir.join("diagnostics.csv"), diagnostics_csv(cfg, &out).as_bytes())?;
    if let Some(acc) = &out.errors {
        write_atomic(&dir.join("errors.csv"), errors_csv(cfg, acc).as_bytes())?;
        write_atomic(&dir.join("error_history.csv"), error_history_csv(cfg, acc).as_bytes())?;
        write_atomic(&dir.join("errors_over_time.gp"), gnuplot_script().as_bytes())?;
    }
    write_atomic(&dir.join("summary.json"), summary_json(&out).as_bytes())?;
    Ok(out)
}

/// Writes `error.json` describing a failed run.
pub fn write_error(dir: &Path, err: &CliError) -> Result<()> {
    let text = serde_json::to_string_pretty(&err.record()).expect("error serializes") + "\n";
    write_atomic(&dir.join("error.json"), text.as_bytes())
}
