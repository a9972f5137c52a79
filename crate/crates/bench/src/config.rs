//! Experiment configuration: a versioned TOML document.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use spacetime_dd::{InnerConfig, Method, SolverConfig};

use crate::error::{BenchError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    pub discretization: Discretization,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub initial_guess: InitialGuess,
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Heat equation with the manufactured solution
    /// `(e^{-t/2} − e^{-t})(x² − x³)`.
    HeatManufactured,
    /// `∂_t u − ∂_x(a ∂_x u) + b ∂_x u + c u = f` with constant coefficients
    /// and the source manufactured from the same exact solution.
    Adr { a: f64, b: f64, c: f64 },
    /// `∂_t u − ∂_x(∂_x u + γ sin|∂_x u|) + arctan u = f`.
    Quasilinear {
        gamma: f64,
        #[serde(default)]
        source: QuasilinearSource,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuasilinearSource {
    /// Manufactured from the exact solution; `e_e` uses that solution.
    #[default]
    Manufactured,
    /// Smooth bump supported in `t ∈ (0, 2)`; `e_e` is measured against the
    /// monolithic discrete solution.
    Bump,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub num_elements: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub tau: f64,
    #[serde(default = "half")]
    pub interface: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub window: f64,
    pub points: usize,
    pub panel: Option<f64>,
    /// Gauss points per time panel for `e_e`.
    pub error_points: usize,
    /// Random samples for the coefficient assumption check; 0 disables it.
    pub assumption_samples: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = spacetime_dd::QuadratureSpec::default();
        Self { window: q.window, points: q.points, panel: q.panel, error_points: 3, assumption_samples: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub outer: f64,
    pub max_outer: usize,
    pub inner: f64,
    pub inner_max_iter: usize,
    pub s_inner: f64,
    pub phi_inner: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let inner = InnerConfig::default();
        Self {
            outer: 1e-10,
            max_outer: 200,
            inner: inner.tol,
            inner_max_iter: inner.max_iter,
            s_inner: inner.s_inner,
            phi_inner: inner.phi_inner,
        }
    }
}

impl Tolerances {
    pub fn inner_config(&self) -> InnerConfig {
        InnerConfig { tol: self.inner, max_iter: self.inner_max_iter, s_inner: self.s_inner, phi_inner: self.phi_inner }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    #[default]
    Zero,
    /// Uniform entries in `[-1, 1]` drawn from the configured seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Mdn1,
    Mdn2,
    Rr,
}

impl MethodKind {
    pub fn method(self) -> Method {
        match self {
            MethodKind::Mdn1 => Method::Mdn1,
            MethodKind::Mdn2 => Method::Mdn2,
            MethodKind::Rr => Method::Rr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    /// Output label; defaults to the method name.
    pub label: Option<String>,
    /// Rotation angle in radians (MDN only).
    pub phi: Option<f64>,
    /// Rotation angle as a multiple of π (MDN only).
    pub phi_over_pi: Option<f64>,
    pub s: f64,
}

impl MethodConfig {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.method().name().to_string())
    }

    pub fn phi(&self) -> Option<f64> {
        self.phi.or(self.phi_over_pi.map(|v| v * PI))
    }

    pub fn solver_config(&self, tol: &Tolerances) -> SolverConfig {
        SolverConfig {
            method: self.kind.method(),
            phi: self.phi().unwrap_or(0.0),
            s: self.s,
            tol: tol.outer,
            max_outer: tol.max_outer,
            inner: tol.inner_config(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: Vec<SweepGrid>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub kind: MethodKind,
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub phi_over_pi: Vec<f64>,
    pub s: Vec<f64>,
}

impl SweepGrid {
    /// Grid points `(φ, s)` in row-major order over `φ` then `s`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let phis: Vec<f64> = match self.kind {
            MethodKind::Rr => vec![0.0],
            _ => self.phi.iter().copied().chain(self.phi_over_pi.iter().map(|v| v * PI)).collect(),
        };
        phis.iter().flat_map(|&phi| self.s.iter().map(move |&s| (phi, s))).collect()
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", self.schema_version));
        }
        let d = &self.discretization;
        if d.n == 0 || d.num_elements < 2 || d.tau.is_nan() || d.tau <= 0.0 {
            return bad("discretization needs N ≥ 1, num_elements ≥ 2 and tau > 0".into());
        }
        if self.quadrature.error_points == 0 {
            return bad("quadrature.error_points must be positive".into());
        }
        let mut stems = std::collections::BTreeSet::new();
        for m in &self.methods {
            self.check_method(m.kind, m.phi.is_some() && m.phi_over_pi.is_some(), m.phi(), m.s)?;
            let stem = crate::report::file_stem(&m.label());
            if stem == "summary" || stem.starts_with("monolithic") || !stems.insert(stem) {
                return bad(format!("method label {:?} is reserved or not unique", m.label()));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.grid.is_empty() {
                return bad("sweep.grid is empty".into());
            }
            for g in &sweep.grid {
                if g.s.is_empty() || (g.kind != MethodKind::Rr && g.phi.is_empty() && g.phi_over_pi.is_empty()) {
                    return bad(format!("sweep grid for {:?} has an empty axis", g.kind));
                }
            }
        }
        Ok(())
    }

    fn check_method(&self, kind: MethodKind, both: bool, phi: Option<f64>, s: f64) -> Result<()> {
        if both {
            return Err(BenchError::Config("give either phi or phi_over_pi, not both".into()));
        }
        if kind != MethodKind::Rr && phi.is_none() {
            return Err(BenchError::Config(format!("{kind:?} needs phi or phi_over_pi")));
        }
        if s.is_nan() || s <= 0.0 {
            return Err(BenchError::Config(format!("{kind:?}: s must be positive")));
        }
        Ok(())
    }

    /// The `run` subcommand needs at least one method.
    pub fn require_methods(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(BenchError::Config("method list is empty".into()));
        }
        Ok(())
    }

    pub fn require_sweep(&self) -> Result<&SweepConfig> {
        self.sweep.as_ref().ok_or_else(|| BenchError::Config("no [sweep] section".into()))
    }
}
