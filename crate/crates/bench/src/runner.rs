//! Experiment execution: monolithic reference, configured methods, sweeps.

use std::cell::Cell;

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use spacetime_dd::system::QuadratureSpec;
use spacetime_dd::{
    check_assumptions, AssumptionReport, DdSolver, IterationTrace, Method, Problem, Region, SolverConfig, SpatialMesh,
    TemporalBasis,
};

use crate::config::{ExperimentConfig, InitialGuess, MethodKind};
use crate::error::{BenchError, Result};
use crate::problem::{ErrorEvaluator, ProblemData};

/// Relative `e_e` change below which an iteration counts as plateaued.
pub const PLATEAU_THRESHOLD: f64 = 1e-3;

/// First `n` with `|e(n) − e(n+1)| / e(n) < PLATEAU_THRESHOLD`.
pub fn plateau_index(errors: &[f64]) -> Option<usize> {
    errors.windows(2).position(|w| w[0] == 0.0 || ((w[0] - w[1]) / w[0]).abs() < PLATEAU_THRESHOLD)
}

/// One method's run.
#[derive(Debug, Clone)]
pub struct MethodReport {
    pub label: String,
    pub method: Method,
    pub phi: f64,
    pub s: f64,
    pub trace: IterationTrace,
    pub eta: Mat<f64>,
    pub fields: (Mat<f64>, Mat<f64>),
}

impl MethodReport {
    pub fn errors(&self) -> Vec<f64> {
        self.trace.errors()
    }

    pub fn plateau_index(&self) -> Option<usize> {
        plateau_index(&self.errors())
    }

    pub fn plateau_value(&self) -> Option<f64> {
        self.plateau_index().map(|n| self.errors()[n])
    }

    pub fn fitted_l(&self) -> Option<f64> {
        self.trace.contraction
    }

    /// Outer iterations performed, not counting the initial guess.
    pub fn iterations(&self) -> usize {
        self.trace.records.len().saturating_sub(1)
    }
}

/// The monolithic reference solution and its error.
#[derive(Debug, Clone)]
pub struct MonolithicReport {
    pub e_e: f64,
    pub eta: Mat<f64>,
    pub fields: (Mat<f64>, Mat<f64>),
}

#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub monolithic: MonolithicReport,
    pub methods: Vec<MethodReport>,
    pub assumptions: Option<AssumptionReport>,
}

impl ErrorReport {
    pub fn any_diverged(&self) -> bool {
        self.methods.iter().any(|m| m.trace.diverged)
    }
}

/// One sweep grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub phi: f64,
    pub s: f64,
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub fitted_l: Option<f64>,
}

/// Trace, interface trace and subdomain fields of one run.
type RunOutcome = (IterationTrace, Mat<f64>, (Mat<f64>, Mat<f64>));

/// A configured problem with its loads assembled once.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub data: ProblemData,
    loads: [Mat<f64>; 3],
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let d = config.discretization;
        let q = config.quadrature;
        let data = ProblemData::from_config(&config.problem)?;
        let quad = QuadratureSpec { window: q.window, points: q.points, panel: q.panel, ..QuadratureSpec::default() };
        let problem = Problem::new(
            TemporalBasis::new(d.n, d.tau)?,
            SpatialMesh::new(d.num_elements, d.interface)?,
            data.nl.clone(),
            quad,
        )?;
        let loads = [Region::Whole, Region::Sub1, Region::Sub2].map(|r| problem.load_vector(r, &data.source));
        let [a, b, c] = loads;
        Ok(Self { config, problem, data, loads: [a?, b?, c?] })
    }

    pub fn solver(&self) -> DdSolver<'_> {
        DdSolver::with_loads(&self.problem, self.loads.clone(), self.config.tolerances.inner_config())
    }

    /// Interface initial guess shared by all methods.
    pub fn initial_guess(&self) -> Mat<f64> {
        let nt = self.problem.nt();
        match self.config.initial_guess {
            InitialGuess::Zero => Mat::zeros(nt, 1),
            InitialGuess::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
                Mat::from_fn(nt, 1, |_, _| rng.random_range(-1.0..=1.0))
            }
        }
    }

    fn assumptions(&self) -> Result<Option<AssumptionReport>> {
        let samples = self.config.quadrature.assumption_samples;
        if samples == 0 || self.data.nl.is_affine() {
            return Ok(None);
        }
        let report = check_assumptions(&self.data.nl, samples, self.config.seed);
        if !report.passed {
            return Err(BenchError::Config(format!("coefficient assumptions violated: {report:?}")));
        }
        Ok(Some(report))
    }

    fn monolithic(&self, solver: &DdSolver<'_>) -> Result<(MonolithicReport, ErrorEvaluator)> {
        let fail = |source| BenchError::Solver { method: Method::Monolithic.name().into(), iteration: 0, source };
        let u = solver.monolithic_solve().map_err(fail)?;
        let (u1, u2) = solver.split_whole(u.as_ref());
        let points = self.config.quadrature.error_points;
        let ev = match self.data.exact {
            Some(exact) => ErrorEvaluator::new(&self.problem, exact, points),
            None => ErrorEvaluator::from_fields(&self.problem, u1.as_ref(), u2.as_ref(), points),
        };
        let e_e = ev.relative_error(u1.as_ref(), u2.as_ref());
        Ok((MonolithicReport { e_e, eta: solver.interface_trace(u.as_ref()), fields: (u1, u2) }, ev))
    }

    /// Error evaluator of the configured problem; measures against the
    /// monolithic solution when no exact solution is known.
    pub fn evaluator(&self) -> Result<ErrorEvaluator> {
        Ok(self.monolithic(&self.solver())?.1)
    }

    fn run_one(
        &self,
        solver: &DdSolver<'_>,
        label: &str,
        cfg: &SolverConfig,
        eta0: MatRef<'_, f64>,
        ev: Option<&ErrorEvaluator>,
    ) -> Result<RunOutcome> {
        let calls = Cell::new(0usize);
        let observe = |u1: MatRef<'_, f64>, u2: MatRef<'_, f64>| {
            calls.set(calls.get() + 1);
            ev.map_or(f64::NAN, |ev| ev.relative_error(u1, u2))
        };
        let res = solver.run(cfg, eta0, Some(&observe)).map_err(|source| BenchError::Solver {
            method: label.to_string(),
            iteration: calls.get(),
            source,
        })?;
        let mut trace = res.trace;
        if ev.is_none() {
            trace.records.iter_mut().for_each(|r| r.error = None);
        }
        Ok((trace, res.eta, res.fields))
    }

    /// Runs every configured method from the same initial guess.
    pub fn run(&self) -> Result<ErrorReport> {
        self.config.require_methods()?;
        let assumptions = self.assumptions()?;
        let solver = self.solver();
        let (monolithic, ev) = self.monolithic(&solver)?;
        let eta0 = self.initial_guess();
        let mut methods = Vec::with_capacity(self.config.methods.len());
        for m in &self.config.methods {
            let cfg = m.solver_config(&self.config.tolerances);
            let label = m.label();
            let (trace, eta, fields) = self.run_one(&solver, &label, &cfg, eta0.as_ref(), Some(&ev))?;
            methods.push(MethodReport { label, method: cfg.method, phi: cfg.phi, s: cfg.s, trace, eta, fields });
        }
        Ok(ErrorReport { monolithic, methods, assumptions })
    }

    /// Evaluates every sweep grid point on a pool of `threads` workers.
    /// Rows follow the grid order regardless of scheduling.
    pub fn sweep(&self, threads: usize) -> Result<Vec<SweepRow>> {
        let sweep = self.config.require_sweep()?;
        self.assumptions()?;
        let points: Vec<(MethodKind, f64, f64)> =
            sweep.grid.iter().flat_map(|g| g.points().into_iter().map(move |(phi, s)| (g.kind, phi, s))).collect();
        let eta0 = self.initial_guess();
        // Factorizations are shared; quasilinear warm starts are not, so
        // each point of a nonlinear problem gets its own solver.
        let shared = self.data.nl.is_affine().then(|| self.solver());
        let eval = |&(kind, phi, s): &(MethodKind, f64, f64)| -> Result<SweepRow> {
            let method = kind.method();
            let cfg = SolverConfig {
                method,
                phi,
                s,
                tol: self.config.tolerances.outer,
                max_outer: self.config.tolerances.max_outer,
                inner: self.config.tolerances.inner_config(),
            };
            let own;
            let solver = match &shared {
                Some(s) => s,
                None => {
                    own = self.solver();
                    &own
                }
            };
            let (trace, _, _) = self.run_one(solver, method.name(), &cfg, eta0.as_ref(), None)?;
            Ok(SweepRow {
                method,
                phi,
                s,
                converged: trace.converged,
                diverged: trace.diverged,
                iterations: trace.records.len().saturating_sub(1),
                fitted_l: trace.contraction,
            })
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| BenchError::Config(format!("cannot start thread pool: {e}")))?;
        pool.install(|| points.par_iter().map(eval).collect())
    }
}
