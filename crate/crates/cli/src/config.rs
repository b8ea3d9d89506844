//! JSON run configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cutstokes_core::geometry::DomainMotion;
use cutstokes_core::stabilization::GhostVariant;
use cutstokes_core::timestepper::{Bdf2Init, GaugeChoice, ProblemData, SchemeConfig};
use cutstokes_core::verification::ManufacturedCase;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Initial velocity of runs without a manufactured solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    #[default]
    Zero,
    /// u₀ = (1 − y², 0)
    Poiseuille,
    /// u₀ = (sin πx sin πy, x(1 − x) y)
    Bump,
    /// Divergence-free eddy with stream function (1 − y²)² sin²(πx/4),
    /// vanishing on x = 0 and y = ±1.
    Vortex,
}

impl InitialData {
    pub fn field(self) -> fn([f64; 2]) -> [f64; 2] {
        use std::f64::consts::PI;
        match self {
            InitialData::Zero => |_| [0.0, 0.0],
            InitialData::Poiseuille => |p| [1.0 - p[1] * p[1], 0.0],
            InitialData::Bump => |p| [(PI * p[0]).sin() * (PI * p[1]).sin(), p[0] * (1.0 - p[0]) * p[1]],
            InitialData::Vortex => |p| {
                let (w, s) = (1.0 - p[1] * p[1], (0.25 * PI * p[0]).sin());
                [-4.0 * p[1] * w * s * s, -0.25 * PI * w * w * (0.5 * PI * p[0]).sin()]
            },
        }
    }
}

/// Grid of a convergence study: `dts` gives a Cartesian sweep, `dt_over_h`
/// couples Δt = c·h.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub hs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dts: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_over_h: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// `channel2d` or `stationary_box2d`.
    pub motion: String,
    /// Manufactured solution (`channel2d` or `zero`); supplies forcing,
    /// Dirichlet and initial data and enables error norms.
    pub case: Option<String>,
    /// Initial velocity when `case` is unset.
    pub initial: InitialData,
    pub m: usize,
    pub s: usize,
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
    pub gamma_d: f64,
    pub gamma_g: f64,
    pub gamma_p: f64,
    pub ghost_variant: String,
    pub bdf2_init: String,
    pub gauge: String,
    pub c_delta: f64,
    pub rel_tol: f64,
    pub output_dir: PathBuf,
    pub dump_vtk: bool,
    pub vtk_every: usize,
    /// Blow-up factor of the stability monitor.
    pub monitor_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            motion: "channel2d".into(),
            case: None,
            initial: InitialData::Zero,
            m: 1,
            s: 1,
            h: 0.25,
            dt: 0.2,
            t_final: 2.0,
            gamma_d: 500.0,
            gamma_g: 1e-3,
            gamma_p: 1e-3,
            ghost_variant: "jump".into(),
            bdf2_init: "bdf1_bootstrap".into(),
            gauge: "auto".into(),
            c_delta: 1.0,
            rel_tol: 1e-10,
            output_dir: PathBuf::from("out"),
            dump_vtk: false,
            vtk_every: 1,
            monitor_factor: 10.0,
            study: None,
        }
    }
}

/// Everything needed to start a simulation.
pub struct Resolved {
    pub scheme: SchemeConfig,
    pub motion: DomainMotion,
    pub case: Option<Arc<ManufacturedCase>>,
    pub data: ProblemData,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Single-line JSON of the full resolved config.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn scheme(&self) -> Result<SchemeConfig> {
        let ghost_variant: GhostVariant =
            self.ghost_variant.parse().map_err(|e: cutstokes_core::Error| CliError::invalid("ghost_variant", e.to_string()))?;
        let bdf2_init: Bdf2Init =
            self.bdf2_init.parse().map_err(|e: cutstokes_core::Error| CliError::invalid("bdf2_init", e.to_string()))?;
        let gauge: GaugeChoice =
            self.gauge.parse().map_err(|e: cutstokes_core::Error| CliError::invalid("gauge", e.to_string()))?;
        let scheme = SchemeConfig {
            degree: self.m,
            bdf_order: self.s,
            h: self.h,
            dt: self.dt,
            t_final: self.t_final,
            gamma_d: self.gamma_d,
            gamma_g: self.gamma_g,
            gamma_p: self.gamma_p,
            ghost_variant,
            bdf2_init,
            gauge,
            c_delta: self.c_delta,
            rel_tol: self.rel_tol,
            check_structure: true,
        };
        scheme.validate().map_err(|e| match e {
            cutstokes_core::Error::InvalidParameter { name, reason } => CliError::invalid(name, reason),
            other => CliError::Core(other),
        })?;
        Ok(scheme)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let scheme = self.scheme()?;
        if self.vtk_every == 0 {
            return Err(CliError::invalid("vtk_every", "must be at least 1"));
        }
        if !(self.monitor_factor > 0.0) {
            return Err(CliError::invalid("monitor_factor", "must be positive"));
        }
        let motion = DomainMotion::by_name(&self.motion).map_err(|e| CliError::invalid("motion", e.to_string()))?;
        let (motion, case, data) = match &self.case {
            Some(name) => {
                let case = Arc::new(ManufacturedCase::by_name(name).map_err(|e| CliError::invalid("case", e.to_string()))?);
                let c = case.clone();
                let motion = motion.with_dirichlet_data(move |x, t| c.velocity(x, t));
                let data = case.problem_data();
                (motion, Some(case), data)
            }
            None => (motion, None, ProblemData::free_decay(self.initial.field())),
        };
        if scheme.bdf_order == 2 && scheme.bdf2_init == Bdf2Init::AnalyticPrev && case.is_none() {
            return Err(CliError::invalid("bdf2_init", "analytic_prev needs a manufactured `case`"));
        }
        if let Some(study) = &self.study {
            validate_study(study)?;
        }
        Ok(Resolved { scheme, motion, case, data })
    }
}

fn validate_study(s: &StudyConfig) -> Result<()> {
    if s.hs.is_empty() || s.hs.iter().any(|h| !(*h > 0.0)) {
        return Err(CliError::invalid("study.hs", "needs at least one positive mesh size"));
    }
    match (&s.dts, s.dt_over_h) {
        (Some(_), Some(_)) => Err(CliError::invalid("study", "give either `dts` or `dt_over_h`, not both")),
        (None, None) => Err(CliError::invalid("study", "give `dts` (Cartesian) or `dt_over_h` (coupled)")),
        (Some(d), None) if d.is_empty() || d.iter().any(|v| !(*v > 0.0)) => {
            Err(CliError::invalid("study.dts", "needs at least one positive step"))
        }
        (None, Some(c)) if !(c > 0.0) => Err(CliError::invalid("study.dt_over_h", "must be positive")),
        _ => Ok(()),
    }
}
