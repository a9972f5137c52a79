//! Space-time operators, load vectors and interface operators.
//!
//! A field on a region is stored as a matrix `U[t, x]` over temporal basis
//! index `t` and the region's free spatial nodes `x`; the flat ordering used
//! by assembled matrices is `t·nx + x`. Dual vectors (residuals, loads) use
//! the same layout with the test function in place of the trial function.

use std::sync::OnceLock;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, kron_sum, submatrix, Sparse, SparseLu};
use crate::nonlinearity::{Nonlinearity, SourceTerm};
use crate::spatial::{gauss3, Region, SpatialMatrices, SpatialMesh};
use crate::temporal::{GramKind, TemporalBasis};

/// Time quadrature for terms that are not applied through Gram matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Half width `T_q` of the window `[-T_q, T_q]`.
    pub window: f64,
    /// Gauss–Legendre points per panel.
    pub points: usize,
    /// Panel length; `None` selects `min(τ/4, 1/(Nτ))`.
    pub panel: Option<f64>,
    /// Largest admissible tail estimate `2/(π² T_q)` of the basis energy
    /// outside the window.
    pub tail_budget: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { window: 50.0, points: 4, panel: None, tail_budget: 1e-2 }
    }
}

impl QuadratureSpec {
    pub fn panel_length(&self, basis: &TemporalBasis) -> f64 {
        self.panel.unwrap_or_else(|| {
            let tau = basis.tau();
            (tau / 4.0).min(1.0 / (basis.n() as f64 * tau))
        })
    }

    /// The slowest basis functions decay like `1/(π t)`, so their energy
    /// outside `[-T, T]` is at most `2/(π² T)`.
    pub fn tail_estimate(&self) -> f64 {
        2.0 / (std::f64::consts::PI.powi(2) * self.window)
    }

    pub fn check(&self) -> Result<()> {
        if self.window.is_nan() || self.window <= 0.0 || self.points == 0 {
            return Err(Error::InvalidParameter("quadrature window and order must be positive".into()));
        }
        let tail = self.tail_estimate();
        if tail > self.tail_budget {
            return Err(Error::WindowTooSmall { tail, budget: self.tail_budget });
        }
        Ok(())
    }

    /// Composite rule on `[a, b]` with panels no longer than the panel length.
    pub fn rule(&self, basis: &TemporalBasis, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        composite_gauss(a, b, self.panel_length(basis), self.points)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

pub fn composite_gauss(a: f64, b: f64, max_panel: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = (((b - a) / max_panel).ceil() as usize).max(1);
    let hp = (b - a) / panels as f64;
    let (gx, gw) = gauss_legendre(points);
    let mut t = Vec::with_capacity(panels * points);
    let mut w = Vec::with_capacity(panels * points);
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * hp;
        for q in 0..points {
            t.push(c + 0.5 * hp * gx[q]);
            w.push(0.5 * hp * gw[q]);
        }
    }
    (t, w)
}

/// Basis values `Ψ[q, j] = ψ_j(t_q)` with quadrature weights.
#[derive(Debug, Clone)]
pub struct TimeTable {
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub psi: Mat<f64>,
}

impl TimeTable {
    pub fn new(basis: &TemporalBasis, t: Vec<f64>, w: Vec<f64>) -> Self {
        let dim = basis.dim();
        let mut psi = Mat::zeros(t.len(), dim);
        let mut row = vec![0.0; dim];
        for (q, &tq) in t.iter().enumerate() {
            basis.time_eval_all(tq, &mut row);
            for j in 0..dim {
                psi[(q, j)] = row[j];
            }
        }
        Self { t, w, psi }
    }
}

/// Operators of one region: the affine part of the form as
/// `HPMᵀ ⊗ M + Mass ⊗ K_lin`, rows indexed by test functions.
#[derive(Debug, Clone)]
pub struct RegionSystem {
    pub region: Region,
    pub nodes: Vec<usize>,
    pub spatial: SpatialMatrices,
    /// `∫ a φ'_l φ'_k + b φ'_l φ_k + c φ_l φ_k`.
    pub k_lin: Sparse,
    /// Local index of the interface node.
    pub iface: usize,
    /// Local indices of the non-interface free nodes.
    pub interior: Vec<usize>,
}

impl RegionSystem {
    pub fn nx(&self) -> usize {
        self.nodes.len()
    }
}

/// A fully assembled discrete setup: basis, mesh, coefficients and the
/// operators of the whole domain and both subdomains.
#[derive(Debug)]
pub struct Problem {
    pub basis: TemporalBasis,
    pub mesh: SpatialMesh,
    pub nl: Nonlinearity,
    pub quad: QuadratureSpec,
    pub mass_t: Sparse,
    /// Half-derivative pairing in form orientation.
    pub hpm: Sparse,
    /// `HPMᵀ`, the temporal factor of the system matrix.
    pub hpm_sys: Sparse,
    pub hpp: Sparse,
    pub qq: Sparse,
    regions: [RegionSystem; 3],
    window_table: OnceLock<TimeTable>,
}

fn region_slot(r: Region) -> usize {
    match r {
        Region::Whole => 0,
        Region::Sub1 => 1,
        Region::Sub2 => 2,
    }
}

impl Problem {
    pub fn new(basis: TemporalBasis, mesh: SpatialMesh, nl: Nonlinearity, quad: QuadratureSpec) -> Result<Self> {
        quad.check()?;
        let build = |region: Region| {
            let spatial = mesh.assemble(region);
            let (ka, kb, kc) =
                mesh.assemble_weighted(region, nl.affine.a.as_ref(), nl.affine.b.as_ref(), nl.affine.c.as_ref());
            let k_lin = add3(&ka, &kb, &kc);
            let iface = mesh.interface_local(region);
            let interior = (0..spatial.nodes.len()).filter(|&i| i != iface).collect();
            RegionSystem { region, nodes: spatial.nodes.clone(), spatial, k_lin, iface, interior }
        };
        let hpm = basis.gram(GramKind::HalfPlusMinus).matrix;
        Ok(Self {
            mass_t: basis.gram(GramKind::Mass).matrix,
            hpm_sys: linalg::transpose(&hpm),
            hpm,
            hpp: basis.gram(GramKind::HalfPlusPlus).matrix,
            qq: basis.gram(GramKind::QuarterQuarter).matrix,
            regions: [build(Region::Whole), build(Region::Sub1), build(Region::Sub2)],
            basis,
            mesh,
            nl,
            quad,
            window_table: OnceLock::new(),
        })
    }

    pub fn nt(&self) -> usize {
        self.basis.dim()
    }

    pub fn region(&self, r: Region) -> &RegionSystem {
        &self.regions[region_slot(r)]
    }

    /// Affine part applied to a field: `Σ T U Sᵀ`.
    pub fn apply_affine(&self, r: Region, u: MatRef<'_, f64>) -> Mat<f64> {
        let rs = self.region(r);
        assert_eq!((u.nrows(), u.ncols()), (self.nt(), rs.nx()));
        let mut out = apply_kron(&self.hpm_sys, &rs.spatial.mass, u);
        out += apply_kron(&self.mass_t, &rs.k_lin, u);
        out
    }

    /// Assembled system matrix of the affine part over the given spatial rows
    /// and columns (local indices) of a region.
    pub fn affine_block(&self, r: Region, rows: &[usize], cols: &[usize]) -> Sparse {
        let rs = self.region(r);
        let m = submatrix(&rs.spatial.mass, rows, cols);
        let k = submatrix(&rs.k_lin, rows, cols);
        kron_sum(&[(&self.hpm_sys, &m), (&self.mass_t, &k)])
    }

    /// Full system matrix of a region for an affine nonlinearity.
    pub fn assemble_linear(&self, r: Region) -> Result<Sparse> {
        if !self.nl.is_affine() {
            return Err(Error::NotLinear);
        }
        let all: Vec<usize> = (0..self.region(r).nx()).collect();
        Ok(self.affine_block(r, &all, &all))
    }

    /// `G = HPP ⊗ M + Mass ⊗ K` over the given local spatial indices, plus
    /// `s·Mass ⊗ e_Γe_Γᵀ` when a Robin weight is given.
    pub fn energy_block(&self, r: Region, idx: &[usize], robin: Option<f64>) -> Sparse {
        let rs = self.region(r);
        let m = submatrix(&rs.spatial.mass, idx, idx);
        let k = submatrix(&rs.spatial.stiffness, idx, idx);
        let g = kron_sum(&[(&self.hpp, &m), (&self.mass_t, &k)]);
        match robin {
            Some(s) => {
                let pos = idx.iter().position(|&i| i == rs.iface).expect("interface in index set");
                add_interface_mass(&g, &self.mass_t, idx.len(), pos, s)
            }
            None => g,
        }
    }

    pub fn window_table(&self) -> &TimeTable {
        self.window_table.get_or_init(|| {
            let w = self.quad.window;
            let (t, wt) = self.quad.rule(&self.basis, -w, w);
            TimeTable::new(&self.basis, t, wt)
        })
    }

    /// Quadrature part of the form: `∫∫ α_r ∂_x v + β_r v` for every test
    /// function of the region. Zero for affine nonlinearities.
    pub fn apply_remainder(&self, r: Region, u: MatRef<'_, f64>) -> Mat<f64> {
        let rs = self.region(r);
        let nt = self.nt();
        let Some(rem) = &self.nl.remainder else {
            return Mat::zeros(nt, rs.nx());
        };
        let table = self.window_table();
        let uq = &table.psi * u;
        let nq = table.t.len();
        let h = self.mesh.h();
        let map = self.mesh.local_map(r);
        let (gx, gw) = gauss3();
        let mut g = Mat::<f64>::zeros(nq, rs.nx());
        for q in 0..nq {
            let wt = table.w[q];
            for e in self.mesh.elements(r) {
                let loc = [map[e], map[e + 1]];
                let v0 = loc[0].map_or(0.0, |i| uq[(q, i)]);
                let v1 = loc[1].map_or(0.0, |i| uq[(q, i)]);
                let z = (v1 - v0) / h;
                let x0 = self.mesh.node_x(e);
                let mut acc = [0.0; 2];
                for p in 0..3 {
                    let s = gx[p];
                    let x = x0 + s * h;
                    let y = v0 * (1.0 - s) + v1 * s;
                    let a = (rem.alpha)(x, y, z);
                    let b = (rem.beta)(x, y, z);
                    let w = gw[p] * h * wt;
                    acc[0] += w * (-a / h + b * (1.0 - s));
                    acc[1] += w * (a / h + b * s);
                }
                for k in 0..2 {
                    if let Some(i) = loc[k] {
                        g[(q, i)] += acc[k];
                    }
                }
            }
        }
        table.psi.transpose() * &g
    }

    /// `a_r(u, v_k)` for every test function `v_k` of the region.
    pub fn apply_form(&self, r: Region, u: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = self.apply_affine(r, u);
        if !self.nl.is_affine() {
            out += self.apply_remainder(r, u);
        }
        out
    }

    /// `a_r(u, v_k) − (f, v_k)`.
    pub fn residual(&self, r: Region, u: MatRef<'_, f64>, load: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = self.apply_form(r, u);
        out -= load;
        out
    }

    /// `(f, v_k)` over the region, by tensor quadrature.
    pub fn load_vector(&self, r: Region, f: &SourceTerm) -> Result<Mat<f64>> {
        self.quad.check()?;
        let w = self.quad.window;
        let a = if f.causal { 0.0 } else { -w };
        let (t, wt) = self.quad.rule(&self.basis, a, w);
        Ok(self.load_with_rule(r, f, &t, &wt))
    }

    pub fn load_with_rule(&self, r: Region, f: &SourceTerm, t: &[f64], wt: &[f64]) -> Mat<f64> {
        const CHUNK: usize = 2048;
        let rs = self.region(r);
        let h = self.mesh.h();
        let map = self.mesh.local_map(r);
        let (gx, gw) = gauss3();
        let mut out = Mat::<f64>::zeros(self.nt(), rs.nx());
        for start in (0..t.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(t.len());
            let table = TimeTable::new(&self.basis, t[start..end].to_vec(), wt[start..end].to_vec());
            let mut g = Mat::<f64>::zeros(end - start, rs.nx());
            for (q, &tq) in table.t.iter().enumerate() {
                for e in self.mesh.elements(r) {
                    let x0 = self.mesh.node_x(e);
                    let mut acc = [0.0; 2];
                    for p in 0..3 {
                        let s = gx[p];
                        let fv = f.eval(tq, x0 + s * h) * gw[p] * h * table.w[q];
                        acc[0] += fv * (1.0 - s);
                        acc[1] += fv * s;
                    }
                    for k in 0..2 {
                        if let Some(i) = map[e + k] {
                            g[(q, i)] += acc[k];
                        }
                    }
                }
            }
            out += table.psi.transpose() * &g;
        }
        out
    }

    /// Interface preconditioner from the parabolic energy: Schur complement of
    /// `HPP ⊗ M₂ + Mass ⊗ K₂` onto the interface node.
    pub fn p1(&self) -> Result<Mat<f64>> {
        let r = Region::Sub2;
        let rs = self.region(r);
        let nt = self.nt();
        let ii = &rs.interior;
        let g = [rs.iface];
        let gii = self.energy_block(r, ii, None);
        let m_ig = submatrix(&rs.spatial.mass, ii, &g);
        let k_ig = submatrix(&rs.spatial.stiffness, ii, &g);
        let g_ig = kron_sum(&[(&self.hpp, &m_ig), (&self.mass_t, &k_ig)]);
        let m_gg = submatrix(&rs.spatial.mass, &g, &g);
        let k_gg = submatrix(&rs.spatial.stiffness, &g, &g);
        let g_gg = kron_sum(&[(&self.hpp, &m_gg), (&self.mass_t, &k_gg)]).to_dense();
        let mut p = g_gg;
        if ii.is_empty() {
            return Ok(p);
        }
        let chol = linalg::SparseCholesky::new(&gii)?;
        let g_ig_t = linalg::transpose(&g_ig);
        const BATCH: usize = 32;
        for c0 in (0..nt).step_by(BATCH) {
            let c1 = (c0 + BATCH).min(nt);
            let cols: Vec<usize> = (c0..c1).collect();
            let rhs = submatrix(&g_ig, &(0..g_ig.nrows()).collect::<Vec<_>>(), &cols).to_dense();
            let x = chol.solve(rhs.as_ref());
            let prod = &g_ig_t * &x;
            for (jj, j) in (c0..c1).enumerate() {
                for i in 0..nt {
                    p[(i, j)] -= prod[(i, jj)];
                }
            }
        }
        Ok(p)
    }

    /// Elliptic Schur complement of the subdomain-2 stiffness onto the
    /// interface node.
    pub fn elliptic_schur2(&self) -> Result<f64> {
        let rs = self.region(Region::Sub2);
        let g = [rs.iface];
        let k = &rs.spatial.stiffness;
        let kgg = submatrix(k, &g, &g).to_dense()[(0, 0)];
        if rs.interior.is_empty() {
            return Ok(kgg);
        }
        let kii = submatrix(k, &rs.interior, &rs.interior);
        let kig = submatrix(k, &rs.interior, &g).to_dense();
        let x = SparseLu::new(&kii)?.solve(kig.as_ref());
        Ok(kgg - linalg::dot(kig.as_ref(), x.as_ref()))
    }

    /// Interface preconditioner `QQ + σ₂·Mass` with `σ₂` the elliptic Schur
    /// complement of subdomain 2.
    pub fn p2(&self) -> Result<Mat<f64>> {
        let sigma = self.elliptic_schur2()?;
        let mut p = self.qq.to_dense();
        p += sigma * self.mass_t.to_dense();
        Ok(p)
    }

    /// Riesz map of `L²(Γ × ℝ)` on interface coefficient vectors.
    pub fn riesz(&self) -> Mat<f64> {
        self.mass_t.to_dense()
    }

    pub fn hphi(&self, phi: f64) -> Mat<f64> {
        self.basis.hphi(phi)
    }
}

/// `(T ⊗ S) vec(U) = T U Sᵀ`.
pub fn apply_kron(t: &Sparse, s: &Sparse, u: MatRef<'_, f64>) -> Mat<f64> {
    let tu = t * u;
    let stu = s * tu.transpose();
    stu.transpose().to_owned()
}

/// Adjoint of `H^φ ⊗ I` on a dual field: `(H^φ)ᵀ R`.
pub fn hphi_adjoint_apply(hphi: MatRef<'_, f64>, r: MatRef<'_, f64>) -> Mat<f64> {
    hphi.transpose() * r
}

fn add3(a: &Sparse, b: &Sparse, c: &Sparse) -> Sparse {
    let mut trip = Vec::new();
    for m in [a, b, c] {
        for (i, j, v) in linalg::entries(m) {
            trip.push(faer::sparse::Triplet::new(i, j, v));
        }
    }
    linalg::from_triplets(a.nrows(), a.ncols(), &trip)
}

/// `g + s·(T ⊗ e_pe_pᵀ)` for spatial block size `nx`.
fn add_interface_mass(g: &Sparse, t: &Sparse, nx: usize, pos: usize, s: f64) -> Sparse {
    let mut trip: Vec<_> =
        linalg::entries(g).into_iter().map(|(i, j, v)| faer::sparse::Triplet::new(i, j, v)).collect();
    for (i, j, v) in linalg::entries(t) {
        trip.push(faer::sparse::Triplet::new(i * nx + pos, j * nx + pos, s * v));
    }
    linalg::from_triplets(g.nrows(), g.ncols(), &trip)
}
