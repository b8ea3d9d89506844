//! Convergence studies over (h, Δt) grids.

use std::fmt::Write as _;
use std::path::PathBuf;

use cutstokes_core::verification::{pairwise_eoc, EocTable, NormKind};
use rayon::prelude::*;

use crate::config::{RunConfig, StudyConfig};
use crate::error::{CliError, Result};
use crate::run::{config_comment, execute, write_atomic};

/// Environment variable holding the number of concurrent runs.
pub const WORKERS_ENV: &str = "CUTSTOKES_WORKERS";

/// Outcome of one grid cell.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub h: f64,
    pub dt: f64,
    /// Relative space-time errors in [`NormKind`] order.
    pub values: std::result::Result<[Option<f64>; 4], String>,
    pub max_residual: f64,
    pub blow_up: bool,
}

#[derive(Clone, Debug)]
pub enum StudyResult {
    /// Δt = c·h along `hs`.
    Coupled { cells: Vec<CellResult> },
    /// Every h against every Δt, row-major in h.
    Cartesian { hs: Vec<f64>, dts: Vec<f64>, cells: Vec<CellResult>, tables: Vec<EocTable> },
}

impl StudyResult {
    pub fn cells(&self) -> &[CellResult] {
        match self {
            StudyResult::Coupled { cells } | StudyResult::Cartesian { cells, .. } => cells,
        }
    }

    /// Pairwise orders in h along a coupled sweep for one norm.
    pub fn coupled_eoc(&self, kind: NormKind) -> Vec<Option<f64>> {
        let cells = self.cells();
        let hs: Vec<f64> = cells.iter().map(|c| c.h).collect();
        let vs: Vec<f64> = cells.iter().map(|c| value(c, kind).unwrap_or(f64::NAN)).collect();
        pairwise_eoc(&hs, &vs)
    }

    pub fn table(&self, kind: NormKind) -> Option<&EocTable> {
        match self {
            StudyResult::Cartesian { tables, .. } => tables.iter().find(|t| t.norm == kind),
            StudyResult::Coupled { .. } => None,
        }
    }
}

fn value(c: &CellResult, kind: NormKind) -> Option<f64> {
    c.values.as_ref().ok().and_then(|v| v[kind.index()])
}

pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::invalid(WORKERS_ENV, format!("expected a positive integer, got `{s}`"))),
        },
    }
}

fn run_cell(base: &RunConfig, h: f64, dt: f64) -> CellResult {
    let cfg = RunConfig { h, dt, study: None, dump_vtk: false, ..base.clone() };
    match execute(&cfg) {
        Ok(out) => CellResult {
            h,
            dt,
            values: out.relative_errors().ok_or_else(|| "no manufactured case".to_string()),
            max_residual: out.max_residual,
            blow_up: out.stability.blow_up,
        },
        Err(e) => CellResult { h, dt, values: Err(e.to_string()), max_residual: f64::NAN, blow_up: false },
    }
}

/// Runs all cells of the study; cell failures are recorded, not raised.
pub fn run_study(cfg: &RunConfig, workers: Option<usize>) -> Result<StudyResult> {
    cfg.resolve()?;
    let study: &StudyConfig = cfg.study.as_ref().ok_or_else(|| CliError::invalid("study", "missing study section"))?;
    if cfg.case.is_none() {
        return Err(CliError::invalid("case", "a study needs a manufactured `case`"));
    }
    let pairs: Vec<(f64, f64)> = match (&study.dts, study.dt_over_h) {
        (Some(dts), _) => study.hs.iter().flat_map(|&h| dts.iter().map(move |&dt| (h, dt))).collect(),
        (None, Some(c)) => study.hs.iter().map(|&h| (h, c * h)).collect(),
        (None, None) => unreachable!("validated"),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let cells: Vec<CellResult> = pool.install(|| pairs.par_iter().map(|&(h, dt)| run_cell(cfg, h, dt)).collect());
    Ok(match &study.dts {
        None => StudyResult::Coupled { cells },
        Some(dts) => {
            let hs = study.hs.clone();
            let tables = NormKind::ALL
                .iter()
                .map(|&k| {
                    let values = hs
                        .iter()
                        .enumerate()
                        .map(|(i, _)| (0..dts.len()).map(|j| value(&cells[i * dts.len() + j], k)).collect())
                        .collect();
                    EocTable::new(k, hs.clone(), dts.clone(), values)
                })
                .collect();
            StudyResult::Cartesian { hs, dts: dts.clone(), cells, tables }
        }
    })
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.prec$e}"))
}

pub fn coupled_csv(cfg: &RunConfig, result: &StudyResult) -> String {
    let mut s = config_comment(cfg);
    s.push_str("h,dt");
    for k in NormKind::ALL {
        let _ = write!(s, ",{k},eoc_{k}");
    }
    s.push('\n');
    let eocs: Vec<Vec<Option<f64>>> = NormKind::ALL.iter().map(|&k| result.coupled_eoc(k)).collect();
    for (i, c) in result.cells().iter().enumerate() {
        let _ = write!(s, "{},{}", c.h, c.dt);
        for k in NormKind::ALL {
            let v = match &c.values {
                Err(_) => "nan".to_string(),
                Ok(v) => fmt_opt(v[k.index()], 6),
            };
            let e = eocs[k.index()][i].map_or_else(|| "n/a".to_string(), |e| format!("{e:.4}"));
            let _ = write!(s, ",{v},{e}");
        }
        s.push('\n');
    }
    s
}

pub fn cells_csv(cfg: &RunConfig, result: &StudyResult) -> String {
    let mut s = config_comment(cfg);
    s.push_str("h,dt,status,max_residual,blow_up,message\n");
    for c in result.cells() {
        let (status, msg) = match &c.values {
            Ok(_) => ("ok", String::new()),
            Err(m) => ("failed", m.replace(['"', '\n'], " ")),
        };
        let _ = writeln!(s, "{},{},{status},{:.3e},{},\"{msg}\"", c.h, c.dt, c.max_residual, c.blow_up);
    }
    s
}

/// Writes the study tables into `cfg.output_dir` and returns the paths.
pub fn write_study(cfg: &RunConfig, result: &StudyResult) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    let mut files = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, text.as_bytes())?;
        files.push(p);
        Ok(())
    };
    match result {
        StudyResult::Coupled { .. } => put("coupled.csv".into(), coupled_csv(cfg, result))?,
        StudyResult::Cartesian { tables, .. } => {
            for t in tables {
                put(format!("eoc_{}.csv", t.norm), config_comment(cfg) + &t.to_csv())?;
            }
        }
    }
    put("cells.csv".into(), cells_csv(cfg, result))?;
    Ok(files)
}
