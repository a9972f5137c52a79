//! Subdomain solves, Steklov–Poincaré applications and the interface
//! iterations.
//!
//! Interface traces are temporal coefficient vectors of length `dim`
//! (`nt × 1` matrices); dual interface vectors share that layout and are
//! mapped back to traces only through `J`, `P₁` or `P₂`.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, flatten, unflatten, Sparse, SparseCholesky, SparseLu};
use crate::nonlinearity::SourceTerm;
use crate::spatial::Region;
use crate::system::{hphi_adjoint_apply, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Mdn1,
    Mdn2,
    Rr,
    Monolithic,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Mdn1 => "MDN1",
            Method::Mdn2 => "MDN2",
            Method::Rr => "RR",
            Method::Monolithic => "Monolithic",
        }
    }
}

/// Rotated Richardson iteration used for subdomain and monolithic solves of
/// quasilinear problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    /// Relative increment tolerance in the `G`-norm.
    pub tol: f64,
    pub max_iter: usize,
    pub s_inner: f64,
    pub phi_inner: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, s_inner: 0.7, phi_inner: PI / 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub phi: f64,
    pub s: f64,
    /// Relative increment tolerance in the `P`-norm (MDN) or `J`-norm (RR).
    pub tol: f64,
    pub max_outer: usize,
    pub inner: InnerConfig,
}

impl SolverConfig {
    pub fn mdn1(phi: f64, s: f64) -> Self {
        Self { method: Method::Mdn1, phi, s, tol: 1e-10, max_outer: 200, inner: InnerConfig::default() }
    }

    pub fn mdn2(phi: f64, s: f64) -> Self {
        Self { method: Method::Mdn2, ..Self::mdn1(phi, s) }
    }

    pub fn rr(s: f64) -> Self {
        Self { method: Method::Rr, ..Self::mdn1(0.0, s) }
    }

    pub fn monolithic() -> Self {
        Self { method: Method::Monolithic, ..Self::mdn1(0.0, 1.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidParameter(format!("s must be positive, got {}", self.s)));
        }
        if matches!(self.method, Method::Mdn1 | Method::Mdn2) && !(self.phi > 0.0 && self.phi < PI / 2.0) {
            return Err(Error::InvalidParameter(format!("phi must lie in (0, pi/2), got {}", self.phi)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_outer == 0 {
            return Err(Error::InvalidParameter("tol and max_outer must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub n: usize,
    /// `‖η^n − η^{n−1}‖` in the method's norm; `None` for `n = 0`.
    pub increment: Option<f64>,
    /// `increment / ‖η^n‖`, the quantity compared against the tolerance.
    pub relative_increment: Option<f64>,
    /// `‖S₁η^n + S₂η^n‖` in the `J⁻¹`-norm.
    pub residual: f64,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterRecord>,
    /// Fitted geometric rate of the increments, when at least four are
    /// available.
    pub contraction: Option<f64>,
    pub converged: bool,
    pub diverged: bool,
    pub stagnated: bool,
}

impl IterationTrace {
    pub fn increments(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.increment).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.error).collect()
    }
}

/// Least-squares rate `exp(slope)` of `log(increment)` over iterations
/// `2..=n`; `None` with fewer than four increments.
pub fn fit_contraction(records: &[IterRecord]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        records.iter().filter_map(|r| r.increment.filter(|&v| v > 0.0).map(|v| (r.n as f64, v.ln()))).collect();
    if pts.len() < 4 {
        return None;
    }
    let fit: Vec<_> = pts.into_iter().filter(|&(n, _)| n >= 2.0).collect();
    let m = fit.len() as f64;
    let mx = fit.iter().map(|p| p.0).sum::<f64>() / m;
    let my = fit.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InnerStats {
    pub iterations: usize,
    /// Relative `G`-norm increments, one per iteration.
    pub increments: Vec<f64>,
}

pub struct RunResult {
    pub eta: Mat<f64>,
    pub fields: (Mat<f64>, Mat<f64>),
    pub trace: IterationTrace,
}

/// Computes a scalar error of a subdomain field pair; used to fill
/// [`IterRecord::error`].
pub type Observer<'a> = &'a dyn Fn(MatRef<'_, f64>, MatRef<'_, f64>) -> f64;

struct RobinFactor {
    s: f64,
    region: Region,
    lu: Arc<SparseLu>,
}

struct InnerFactor {
    key: (Region, bool, u64),
    chol: Arc<SparseCholesky>,
    g: Arc<Sparse>,
}

/// Solver state for one problem and one source term: cached loads,
/// factorizations and quasilinear warm starts.
pub struct DdSolver<'a> {
    pub problem: &'a Problem,
    loads: [Mat<f64>; 3],
    dirichlet_lu: [OnceLock<SparseLu>; 3],
    monolithic_lu: OnceLock<SparseLu>,
    robin: Mutex<Vec<RobinFactor>>,
    inner: Mutex<Vec<InnerFactor>>,
    warm: Mutex<[Option<Mat<f64>>; 3]>,
    pub inner_cfg: InnerConfig,
}

fn slot(r: Region) -> usize {
    match r {
        Region::Whole => 0,
        Region::Sub1 => 1,
        Region::Sub2 => 2,
    }
}

fn column(u: MatRef<'_, f64>, j: usize) -> Mat<f64> {
    Mat::from_fn(u.nrows(), 1, |i, _| u[(i, j)])
}

fn columns(u: MatRef<'_, f64>, idx: &[usize]) -> Mat<f64> {
    Mat::from_fn(u.nrows(), idx.len(), |i, j| u[(i, idx[j])])
}

fn quad_norm(m: MatRef<'_, f64>, v: MatRef<'_, f64>) -> f64 {
    let mv = m * v;
    linalg::dot(v, mv.as_ref()).max(0.0).sqrt()
}

impl<'a> DdSolver<'a> {
    pub fn new(problem: &'a Problem, f: &SourceTerm, inner_cfg: InnerConfig) -> Result<Self> {
        let loads = [
            problem.load_vector(Region::Whole, f)?,
            problem.load_vector(Region::Sub1, f)?,
            problem.load_vector(Region::Sub2, f)?,
        ];
        Ok(Self::with_loads(problem, loads, inner_cfg))
    }

    /// Uses precomputed load vectors for the whole domain and subdomains 1, 2.
    pub fn with_loads(problem: &'a Problem, loads: [Mat<f64>; 3], inner_cfg: InnerConfig) -> Self {
        Self {
            problem,
            loads,
            dirichlet_lu: [OnceLock::new(), OnceLock::new(), OnceLock::new()],
            monolithic_lu: OnceLock::new(),
            robin: Mutex::new(Vec::new()),
            inner: Mutex::new(Vec::new()),
            warm: Mutex::new([None, None, None]),
            inner_cfg,
        }
    }

    pub fn load(&self, r: Region) -> &Mat<f64> {
        &self.loads[slot(r)]
    }

    fn is_linear(&self) -> bool {
        self.problem.nl.is_affine()
    }

    fn dirichlet_factor(&self, r: Region) -> Result<&SparseLu> {
        if let Some(lu) = self.dirichlet_lu[slot(r)].get() {
            return Ok(lu);
        }
        let rs = self.problem.region(r);
        let a = self.problem.affine_block(r, &rs.interior, &rs.interior);
        let lu = SparseLu::new(&a)?;
        Ok(self.dirichlet_lu[slot(r)].get_or_init(|| lu))
    }

    fn inner_factor(
        &self,
        r: Region,
        include_iface: bool,
        robin: Option<f64>,
    ) -> Result<(Arc<SparseCholesky>, Arc<Sparse>)> {
        let key = (r, include_iface, robin.unwrap_or(0.0).to_bits());
        let mut cache = self.inner.lock().expect("inner cache lock");
        if let Some(f) = cache.iter().find(|f| f.key == key) {
            return Ok((f.chol.clone(), f.g.clone()));
        }
        let rs = self.problem.region(r);
        let idx: Vec<usize> = if include_iface { (0..rs.nx()).collect() } else { rs.interior.clone() };
        let g = self.problem.energy_block(r, &idx, robin);
        let chol = Arc::new(SparseCholesky::new(&g)?);
        let g = Arc::new(g);
        cache.push(InnerFactor { key, chol: chol.clone(), g: g.clone() });
        Ok((chol, g))
    }

    /// Rotated preconditioned Richardson iteration on the unknown columns
    /// `idx` of `u`: `u_I ← u_I − s G⁻¹ (H^φ)ᵀ res(u)_I`.
    fn inner_iterate(
        &self,
        r: Region,
        u: &mut Mat<f64>,
        idx: &[usize],
        include_iface: bool,
        robin: Option<f64>,
        residual: &dyn Fn(MatRef<'_, f64>) -> Mat<f64>,
    ) -> Result<InnerStats> {
        let cfg = self.inner_cfg;
        let (chol, g) = self.inner_factor(r, include_iface, robin)?;
        let hphi = self.problem.hphi(cfg.phi_inner);
        let nt = self.problem.nt();
        let mut stats = InnerStats::default();
        let mut rises = 0;
        for it in 1..=cfg.max_iter {
            let res = residual(u.as_ref());
            let rot = hphi_adjoint_apply(hphi.as_ref(), res.as_ref());
            let rhs = flatten(columns(rot.as_ref(), idx).as_ref());
            let delta = chol.solve(rhs.as_ref());
            let step = cfg.s_inner * linalg::dot(delta.as_ref(), rhs.as_ref()).max(0.0).sqrt();
            let d = unflatten(delta.as_ref(), nt, idx.len());
            for (jj, &j) in idx.iter().enumerate() {
                for i in 0..nt {
                    u[(i, j)] -= cfg.s_inner * d[(i, jj)];
                }
            }
            let cur = flatten(columns(u.as_ref(), idx).as_ref());
            let gcur = g.as_ref() * &cur;
            let scale = linalg::dot(cur.as_ref(), gcur.as_ref()).max(0.0).sqrt();
            let inc = if scale > 0.0 { step / scale } else { step };
            if let Some(&prev) = stats.increments.last() {
                rises = if inc > prev { rises + 1 } else { 0 };
            }
            stats.increments.push(inc);
            stats.iterations = it;
            if inc <= cfg.tol || step == 0.0 {
                return Ok(stats);
            }
            if rises >= 5 {
                return Err(Error::InnerDivergence { iterations: it, increment: inc });
            }
        }
        Err(Error::InnerNotConverged {
            iterations: stats.iterations,
            increment: stats.increments.last().copied().unwrap_or(f64::NAN),
        })
    }

    fn warm_start(&self, r: Region) -> Option<Mat<f64>> {
        self.warm.lock().expect("warm start lock")[slot(r)].clone()
    }

    fn store_warm(&self, r: Region, u: &Mat<f64>) {
        self.warm.lock().expect("warm start lock")[slot(r)] = Some(u.clone());
    }

    /// Field on subdomain `r` with interface coefficients `eta` solving the
    /// Galerkin equations for all interior test functions.
    pub fn dirichlet_solve(&self, r: Region, eta: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.dirichlet_solve_with_stats(r, eta).map(|(u, _)| u)
    }

    pub fn dirichlet_solve_with_stats(&self, r: Region, eta: MatRef<'_, f64>) -> Result<(Mat<f64>, InnerStats)> {
        assert!(r != Region::Whole);
        let p = self.problem;
        let rs = p.region(r);
        let nt = p.nt();
        let load = self.load(r);
        let mut u = match (self.is_linear(), self.warm_start(r)) {
            (false, Some(w)) => w,
            _ => Mat::zeros(nt, rs.nx()),
        };
        for i in 0..nt {
            u[(i, rs.iface)] = eta[(i, 0)];
        }
        if rs.interior.is_empty() {
            return Ok((u, InnerStats::default()));
        }
        if self.is_linear() {
            let res = p.residual(r, u.as_ref(), load.as_ref());
            let mut rhs = flatten(columns(res.as_ref(), &rs.interior).as_ref());
            rhs *= -1.0;
            let x = self.dirichlet_factor(r)?.solve(rhs.as_ref());
            let x = unflatten(x.as_ref(), nt, rs.interior.len());
            for (jj, &j) in rs.interior.iter().enumerate() {
                for i in 0..nt {
                    u[(i, j)] += x[(i, jj)];
                }
            }
            return Ok((u, InnerStats { iterations: 1, increments: vec![] }));
        }
        let stats = self.inner_iterate(r, &mut u, &rs.interior, false, None, &|v| p.residual(r, v, load.as_ref()))?;
        self.store_warm(r, &u);
        Ok((u, stats))
    }

    /// `S_r η`: interface row of the subdomain residual at the Dirichlet
    /// solution, returned together with that solution.
    pub fn apply_steklov(&self, r: Region, eta: MatRef<'_, f64>) -> Result<(Mat<f64>, Mat<f64>)> {
        let u = self.dirichlet_solve(r, eta)?;
        let res = self.problem.residual(r, u.as_ref(), self.load(r).as_ref());
        Ok((column(res.as_ref(), self.problem.region(r).iface), u))
    }

    fn robin_factor(&self, r: Region, s: f64) -> Result<Arc<SparseLu>> {
        let mut cache = self.robin.lock().expect("robin cache lock");
        if let Some(f) = cache.iter().find(|f| f.region == r && f.s == s) {
            return Ok(f.lu.clone());
        }
        let p = self.problem;
        let rs = p.region(r);
        let all: Vec<usize> = (0..rs.nx()).collect();
        let a = p.affine_block(r, &all, &all);
        let mut trip: Vec<_> =
            linalg::entries(&a).into_iter().map(|(i, j, v)| faer::sparse::Triplet::new(i, j, v)).collect();
        let nx = rs.nx();
        for (i, j, v) in linalg::entries(&p.mass_t) {
            trip.push(faer::sparse::Triplet::new(i * nx + rs.iface, j * nx + rs.iface, s * v));
        }
        let lu = Arc::new(SparseLu::new(&linalg::from_triplets(a.nrows(), a.ncols(), &trip))?);
        cache.push(RobinFactor { s, region: r, lu: lu.clone() });
        Ok(lu)
    }

    /// Interface trace `η` of the Robin problem `sJη + S_r η = λ`, with the
    /// subdomain field.
    pub fn robin_solve(&self, r: Region, lambda: MatRef<'_, f64>, s: f64) -> Result<(Mat<f64>, Mat<f64>)> {
        if s.is_nan() || s <= 0.0 {
            return Err(Error::InvalidParameter(format!("Robin weight must be positive, got {s}")));
        }
        let p = self.problem;
        let rs = p.region(r);
        let nt = p.nt();
        let nx = rs.nx();
        let mut rhs = self.load(r).clone();
        for i in 0..nt {
            rhs[(i, rs.iface)] += lambda[(i, 0)];
        }
        let u = if self.is_linear() {
            let x = self.robin_factor(r, s)?.solve(flatten(rhs.as_ref()).as_ref());
            unflatten(x.as_ref(), nt, nx)
        } else {
            let mut u = self.warm_start(r).unwrap_or_else(|| Mat::zeros(nt, nx));
            let all: Vec<usize> = (0..nx).collect();
            let mass = &p.mass_t;
            self.inner_iterate(r, &mut u, &all, true, Some(s), &|v| {
                let mut res = p.residual(r, v, rhs.as_ref());
                let tr = mass * column(v, rs.iface);
                for i in 0..nt {
                    res[(i, rs.iface)] += s * tr[(i, 0)];
                }
                res
            })?;
            self.store_warm(r, &u);
            u
        };
        Ok((column(u.as_ref(), rs.iface), u))
    }

    /// Undecomposed discrete solution on all free nodes.
    pub fn monolithic_solve(&self) -> Result<Mat<f64>> {
        let p = self.problem;
        let rs = p.region(Region::Whole);
        let nt = p.nt();
        let load = self.load(Region::Whole);
        if self.is_linear() {
            let lu = match self.monolithic_lu.get() {
                Some(lu) => lu,
                None => {
                    let lu = SparseLu::new(&p.assemble_linear(Region::Whole)?)?;
                    self.monolithic_lu.get_or_init(|| lu)
                }
            };
            let x = lu.solve(flatten(load.as_ref()).as_ref());
            return Ok(unflatten(x.as_ref(), nt, rs.nx()));
        }
        let mut u = Mat::zeros(nt, rs.nx());
        let all: Vec<usize> = (0..rs.nx()).collect();
        self.inner_iterate(Region::Whole, &mut u, &all, true, None, &|v| p.residual(Region::Whole, v, load.as_ref()))?;
        Ok(u)
    }

    /// Interface column of a whole-domain field.
    pub fn interface_trace(&self, whole: MatRef<'_, f64>) -> Mat<f64> {
        column(whole, self.problem.region(Region::Whole).iface)
    }

    /// Restrictions of a whole-domain field to the two subdomains.
    pub fn split_whole(&self, whole: MatRef<'_, f64>) -> (Mat<f64>, Mat<f64>) {
        let p = self.problem;
        let m = p.mesh.interface_node();
        let nw = p.region(Region::Whole).nx();
        let first: Vec<usize> = (0..m).collect();
        let second: Vec<usize> = (m - 1..nw).collect();
        (columns(whole, &first), columns(whole, &second))
    }

    fn residual_norm(&self, jchol: &faer::linalg::solvers::Llt<f64>, r: MatRef<'_, f64>) -> f64 {
        let x = jchol.solve(r);
        linalg::dot(r, x.as_ref()).max(0.0).sqrt()
    }

    /// Modified Dirichlet–Neumann iteration
    /// `η ← η + s P⁻¹ (H^φ)ᵀ (−S₁η − S₂η)`.
    pub fn mdn_run(
        &self,
        cfg: &SolverConfig,
        eta0: MatRef<'_, f64>,
        observer: Option<Observer<'_>>,
    ) -> Result<RunResult> {
        cfg.validate()?;
        let p = self.problem;
        let pm = match cfg.method {
            Method::Mdn1 => p.p1()?,
            Method::Mdn2 => p.p2()?,
            m => return Err(Error::InvalidParameter(format!("{} is not an MDN method", m.name()))),
        };
        let pchol = linalg::dense_cholesky(pm.as_ref())?;
        let jchol = linalg::dense_cholesky(p.riesz().as_ref())?;
        let hphi = p.hphi(cfg.phi);
        let mut eta = eta0.to_owned();
        let mut prev: Option<Mat<f64>> = None;
        let mut monitor = Monitor::default();
        loop {
            let n = monitor.trace.records.len();
            let (s1, u1) = self.apply_steklov(Region::Sub1, eta.as_ref())?;
            let (s2, u2) = self.apply_steklov(Region::Sub2, eta.as_ref())?;
            let sres = &s1 + &s2;
            let inc = prev.as_ref().map(|pv| increments(pm.as_ref(), eta.as_ref(), pv.as_ref()));
            let record = IterRecord {
                n,
                increment: inc.map(|v| v.0),
                relative_increment: inc.map(|v| v.1),
                residual: self.residual_norm(&jchol, sres.as_ref()),
                error: observer.map(|f| f(u1.as_ref(), u2.as_ref())),
            };
            if monitor.push(record, cfg) {
                return Ok(RunResult { eta, fields: (u1, u2), trace: monitor.finish() });
            }
            let mut rot = hphi_adjoint_apply(hphi.as_ref(), sres.as_ref());
            rot *= -cfg.s;
            let step = pchol.solve(rot.as_ref());
            prev = Some(eta.clone());
            eta += &step;
        }
    }

    /// Robin–Robin iteration
    /// `η ← (sJ+S₂)⁻¹(sJ−S₁)(sJ+S₁)⁻¹(sJ−S₂)η`.
    pub fn rr_run(
        &self,
        cfg: &SolverConfig,
        eta0: MatRef<'_, f64>,
        observer: Option<Observer<'_>>,
    ) -> Result<RunResult> {
        cfg.validate()?;
        if cfg.method != Method::Rr {
            return Err(Error::InvalidParameter(format!("{} is not the Robin-Robin method", cfg.method.name())));
        }
        let p = self.problem;
        let j = p.riesz();
        let jchol = linalg::dense_cholesky(j.as_ref())?;
        let s = cfg.s;
        let mut eta = eta0.to_owned();
        let mut prev: Option<Mat<f64>> = None;
        let mut monitor = Monitor::default();
        loop {
            let n = monitor.trace.records.len();
            let (s1, u1) = self.apply_steklov(Region::Sub1, eta.as_ref())?;
            let (s2, u2) = self.apply_steklov(Region::Sub2, eta.as_ref())?;
            let sres = &s1 + &s2;
            let inc = prev.as_ref().map(|pv| increments(j.as_ref(), eta.as_ref(), pv.as_ref()));
            let record = IterRecord {
                n,
                increment: inc.map(|v| v.0),
                relative_increment: inc.map(|v| v.1),
                residual: self.residual_norm(&jchol, sres.as_ref()),
                error: observer.map(|f| f(u1.as_ref(), u2.as_ref())),
            };
            if monitor.push(record, cfg) {
                return Ok(RunResult { eta, fields: (u1, u2), trace: monitor.finish() });
            }
            let lambda1 = s * (&j * &eta) - &s2;
            let (xi, _) = self.robin_solve(Region::Sub1, lambda1.as_ref(), s)?;
            let (s1xi, _) = self.apply_steklov(Region::Sub1, xi.as_ref())?;
            let lambda2 = s * (&j * &xi) - &s1xi;
            let (next, _) = self.robin_solve(Region::Sub2, lambda2.as_ref(), s)?;
            prev = Some(std::mem::replace(&mut eta, next));
        }
    }

    /// Dispatches on the configured method; the monolithic method returns
    /// its interface trace and restrictions with a single-record trace.
    pub fn run(&self, cfg: &SolverConfig, eta0: MatRef<'_, f64>, observer: Option<Observer<'_>>) -> Result<RunResult> {
        match cfg.method {
            Method::Mdn1 | Method::Mdn2 => self.mdn_run(cfg, eta0, observer),
            Method::Rr => self.rr_run(cfg, eta0, observer),
            Method::Monolithic => {
                let u = self.monolithic_solve()?;
                let eta = self.interface_trace(u.as_ref());
                let (u1, u2) = self.split_whole(u.as_ref());
                let jchol = linalg::dense_cholesky(self.problem.riesz().as_ref())?;
                let (s1, _) = self.apply_steklov(Region::Sub1, eta.as_ref())?;
                let (s2, _) = self.apply_steklov(Region::Sub2, eta.as_ref())?;
                let record = IterRecord {
                    n: 0,
                    increment: None,
                    relative_increment: None,
                    residual: self.residual_norm(&jchol, (&s1 + &s2).as_ref()),
                    error: observer.map(|f| f(u1.as_ref(), u2.as_ref())),
                };
                let trace = IterationTrace { records: vec![record], converged: true, ..Default::default() };
                Ok(RunResult { eta, fields: (u1, u2), trace })
            }
        }
    }
}

/// Absolute and relative increment in the norm induced by `m`.
fn increments(m: MatRef<'_, f64>, cur: MatRef<'_, f64>, prev: MatRef<'_, f64>) -> (f64, f64) {
    let d = cur - prev;
    let num = quad_norm(m, d.as_ref());
    let den = quad_norm(m, cur);
    (num, if den > 0.0 { num / den } else { num })
}

/// Stopping, divergence and stagnation bookkeeping of an outer iteration.
#[derive(Default)]
struct Monitor {
    trace: IterationTrace,
    rises: usize,
    best: f64,
    best_at: usize,
}

impl Monitor {
    /// Appends a record; returns `true` when the iteration must stop.
    fn push(&mut self, rec: IterRecord, cfg: &SolverConfig) -> bool {
        let n = rec.n;
        let (Some(inc), Some(rel)) = (rec.increment, rec.relative_increment) else {
            self.trace.records.push(rec);
            return false;
        };
        self.trace.records.push(rec);
        if n == 1 || inc < self.best {
            self.best = inc;
            self.best_at = n;
        }
        if n >= 2 {
            let prev = self.trace.records[n - 1].increment.unwrap_or(f64::INFINITY);
            self.rises = if inc > prev { self.rises + 1 } else { 0 };
        }
        if rel <= cfg.tol {
            self.trace.converged = true;
            return true;
        }
        if self.rises >= 5 || !inc.is_finite() {
            self.trace.diverged = true;
            return true;
        }
        if n - self.best_at >= 10 {
            self.trace.stagnated = true;
            return true;
        }
        n >= cfg.max_outer
    }

    fn finish(mut self) -> IterationTrace {
        self.trace.contraction = fit_contraction(&self.trace.records);
        self.trace
    }
}
