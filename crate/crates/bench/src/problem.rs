//! Benchmark problems and the relative space-time error functional.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::{Mat, MatRef};
use spacetime_dd::spatial::gauss3;
use spacetime_dd::system::{composite_gauss, TimeTable};
use spacetime_dd::{Nonlinearity, Problem, Region, SourceTerm};

use crate::config::{ProblemConfig, QuasilinearSource};

/// Exact solution value and spatial derivative at `(t, x)`.
pub type Exact = fn(f64, f64) -> (f64, f64);

/// Time factor `g = e^{-t/2} − e^{-t}` and `g'` for `t > 0`, zero otherwise.
fn time_factor(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    let (a, b) = ((-t / 2.0).exp(), (-t).exp());
    (a - b, b - 0.5 * a)
}

/// `p = x² − x³` with `p'` and `p''`.
fn space_factor(x: f64) -> (f64, f64, f64) {
    (x * x - x * x * x, 2.0 * x - 3.0 * x * x, 2.0 - 6.0 * x)
}

/// `u = (e^{-t/2} − e^{-t})(x² − x³)` for `t > 0`, zero otherwise.
pub fn manufactured_u(t: f64, x: f64) -> (f64, f64) {
    let (g, _) = time_factor(t);
    let (p, dp, _) = space_factor(x);
    (g * p, g * dp)
}

/// Source of the heat equation whose solution is [`manufactured_u`].
pub fn manufactured_f(t: f64, x: f64) -> f64 {
    let (g, dg) = time_factor(t);
    let (p, _, d2p) = space_factor(x);
    dg * p - g * d2p
}

pub fn manufactured_problem() -> (SourceTerm, Exact) {
    (SourceTerm::new(manufactured_f, true), manufactured_u)
}

/// Source for `∂_t u − ∂_x(a ∂_x u) + b ∂_x u + c u` with constant
/// coefficients and the manufactured solution.
pub fn adr_source(a: f64, b: f64, c: f64) -> SourceTerm {
    SourceTerm::new(
        move |t, x| {
            let (g, dg) = time_factor(t);
            let (p, dp, d2p) = space_factor(x);
            dg * p + g * (-a * d2p + b * dp + c * p)
        },
        true,
    )
}

/// Source for `∂_t u − ∂_x(∂_x u + γ sin|∂_x u|) + arctan u` with the
/// manufactured solution.
pub fn quasilinear_source(gamma: f64) -> SourceTerm {
    SourceTerm::new(
        move |t, x| {
            let (g, dg) = time_factor(t);
            let (p, dp, d2p) = space_factor(x);
            let z = g * dp;
            let dalpha = (1.0 + gamma * z.abs().cos() * z.signum()) * g * d2p;
            dg * p - dalpha + (g * p).atan()
        },
        true,
    )
}

/// Smooth source supported in `t ∈ (0, 2)`.
pub fn bump_source(amplitude: f64) -> SourceTerm {
    SourceTerm::new(
        move |t, x| {
            if t <= 0.0 || t >= 2.0 {
                return 0.0;
            }
            let s = t * (2.0 - t);
            amplitude * (1.0 - 1.0 / s).exp() * (PI * x).sin()
        },
        true,
    )
}

/// Coefficients, source and (when known) exact solution of a configured
/// problem.
pub struct ProblemData {
    pub nl: Nonlinearity,
    pub source: SourceTerm,
    pub exact: Option<Exact>,
}

impl ProblemData {
    pub fn from_config(cfg: &ProblemConfig) -> spacetime_dd::Result<Self> {
        let constant = |v: f64| -> Arc<dyn Fn(f64) -> f64 + Send + Sync> { Arc::new(move |_| v) };
        Ok(match *cfg {
            ProblemConfig::HeatManufactured => {
                let (source, exact) = manufactured_problem();
                Self { nl: Nonlinearity::heat(), source, exact: Some(exact) }
            }
            ProblemConfig::Adr { a, b, c } => Self {
                nl: Nonlinearity::adr(constant(a), constant(b), constant(c))?,
                source: adr_source(a, b, c),
                exact: Some(manufactured_u),
            },
            ProblemConfig::Quasilinear { gamma, source, amplitude } => {
                let nl = Nonlinearity::quasilinear(gamma)?;
                match source {
                    QuasilinearSource::Manufactured => {
                        Self { nl, source: quasilinear_source(gamma), exact: Some(manufactured_u) }
                    }
                    QuasilinearSource::Bump => Self { nl, source: bump_source(amplitude), exact: None },
                }
            }
        })
    }
}

/// Relative error
/// `Σ_i ‖u − u_i‖_{L²(0,1; H¹(Ω_i))} / Σ_i ‖u‖_{L²(0,1; H¹(Ω_i))}`
/// with composite Gauss–Legendre in time and three points per element.
pub struct ErrorEvaluator {
    table: TimeTable,
    /// Per subdomain: reference `(u, u_x)` at every time and spatial
    /// quadrature point, laid out `[q][element][point]`.
    reference: [Vec<(f64, f64)>; 2],
    elements: [Vec<usize>; 2],
    maps: [Vec<Option<usize>>; 2],
    norms: [f64; 2],
    h: f64,
}

impl ErrorEvaluator {
    /// Measures against an exact solution.
    pub fn new(problem: &Problem, u: Exact, points_per_panel: usize) -> Self {
        let mesh = &problem.mesh;
        let h = mesh.h();
        let (gx, _) = gauss3();
        Self::build(problem, points_per_panel, |t, e, k| u(t, mesh.node_x(e) + gx[k] * h))
    }

    /// Measures against discrete subdomain fields, e.g. the restrictions of
    /// the monolithic solution.
    pub fn from_fields(problem: &Problem, u1: MatRef<'_, f64>, u2: MatRef<'_, f64>, points_per_panel: usize) -> Self {
        let mut ev = Self::build(problem, points_per_panel, |_, _, _| (0.0, 0.0));
        for (i, u) in [u1, u2].into_iter().enumerate() {
            ev.reference[i] = ev.sample(i, u);
        }
        ev.norms = [0, 1].map(|i| ev.norm_of(i, &ev.reference[i]));
        ev
    }

    fn build(problem: &Problem, points_per_panel: usize, eval: impl Fn(f64, usize, usize) -> (f64, f64)) -> Self {
        let basis = &problem.basis;
        let panel = (1.0 / 16.0f64).min(1.0 / (basis.n() as f64 * basis.tau()));
        let (t, w) = composite_gauss(0.0, 1.0, panel, points_per_panel);
        let table = TimeTable::new(basis, t, w);
        let mesh = &problem.mesh;
        let mut reference: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
        let mut elements: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, r) in [Region::Sub1, Region::Sub2].into_iter().enumerate() {
            elements[i] = mesh.elements(r).collect();
            for &tq in &table.t {
                for &e in &elements[i] {
                    for k in 0..3 {
                        reference[i].push(eval(tq, e, k));
                    }
                }
            }
        }
        let maps = [mesh.local_map(Region::Sub1), mesh.local_map(Region::Sub2)];
        let mut ev = Self { table, reference, elements, maps, norms: [0.0; 2], h: mesh.h() };
        ev.norms = [0, 1].map(|i| ev.norm_of(i, &ev.reference[i]));
        ev
    }

    /// Values and derivatives of a subdomain field at the quadrature points.
    fn sample(&self, i: usize, u: MatRef<'_, f64>) -> Vec<(f64, f64)> {
        let (gx, _) = gauss3();
        let uq: Mat<f64> = &self.table.psi * u;
        let map = &self.maps[i];
        let mut out = Vec::with_capacity(self.table.t.len() * self.elements[i].len() * 3);
        for q in 0..self.table.t.len() {
            for &e in &self.elements[i] {
                let v0 = map[e].map_or(0.0, |j| uq[(q, j)]);
                let v1 = map[e + 1].map_or(0.0, |j| uq[(q, j)]);
                let dv = (v1 - v0) / self.h;
                for &s in &gx {
                    out.push((v0 * (1.0 - s) + v1 * s, dv));
                }
            }
        }
        out
    }

    fn norm_of(&self, i: usize, vals: &[(f64, f64)]) -> f64 {
        let (_, gw) = gauss3();
        let ne = self.elements[i].len();
        let mut acc = 0.0;
        for (q, &wq) in self.table.w.iter().enumerate() {
            let mut tq_acc = 0.0;
            for k in 0..ne {
                for p in 0..3 {
                    let (v, dv) = vals[(q * ne + k) * 3 + p];
                    tq_acc += gw[p] * (v * v + dv * dv);
                }
            }
            acc += wq * self.h * tq_acc;
        }
        acc.sqrt()
    }

    /// Error norms of the two subdomain fields.
    pub fn subdomain_errors(&self, u1: MatRef<'_, f64>, u2: MatRef<'_, f64>) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, u) in [u1, u2].into_iter().enumerate() {
            let diff: Vec<(f64, f64)> =
                self.sample(i, u).into_iter().zip(&self.reference[i]).map(|(a, b)| (b.0 - a.0, b.1 - a.1)).collect();
            out[i] = self.norm_of(i, &diff);
        }
        out
    }

    pub fn reference_norms(&self) -> [f64; 2] {
        self.norms
    }

    pub fn relative_error(&self, u1: MatRef<'_, f64>, u2: MatRef<'_, f64>) -> f64 {
        let e = self.subdomain_errors(u1, u2);
        (e[0] + e[1]) / (self.norms[0] + self.norms[1])
    }
}
