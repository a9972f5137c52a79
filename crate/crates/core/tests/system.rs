use std::f64::consts::PI;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spacetime_dd::linalg::{dense_cholesky, flatten, min_sym_eigenvalue, submatrix, unflatten};
use spacetime_dd::system::{gauss_legendre, QuadratureSpec};
use spacetime_dd::{Error, Nonlinearity, Problem, Region, SourceTerm, SpatialMesh, TemporalBasis};

fn heat(n: usize, tau: f64, ne: usize) -> Problem {
    let basis = TemporalBasis::new(n, tau).unwrap();
    let mesh = SpatialMesh::new(ne, 0.5).unwrap();
    Problem::new(basis, mesh, Nonlinearity::heat(), QuadratureSpec::default()).unwrap()
}

fn with_nl(n: usize, tau: f64, ne: usize, nl: Nonlinearity) -> Problem {
    let basis = TemporalBasis::new(n, tau).unwrap();
    let mesh = SpatialMesh::new(ne, 0.5).unwrap();
    Problem::new(basis, mesh, nl, QuadratureSpec::default()).unwrap()
}

fn random_field(nt: usize, nx: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(nt, nx, |_, _| rng.random_range(-1.0..1.0))
}

/// Dense `(T ⊗ S)` with flat index `t·nx + x`.
fn dense_kron(t: &Mat<f64>, s: &Mat<f64>) -> Mat<f64> {
    let (nt, nx) = (t.nrows(), s.nrows());
    Mat::from_fn(nt * nx, nt * nx, |r, c| t[(r / nx, c / nx)] * s[(r % nx, c % nx)])
}

fn manufactured_f(t: f64, x: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let (a, b) = ((-t / 2.0).exp(), (-t).exp());
    (b - 0.5 * a) * (x * x - x * x * x) - (a - b) * (2.0 - 6.0 * x)
}

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels.
fn composite(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for k in 0..order {
            out.push((c + 0.5 * h * x[k], 0.5 * h * w[k]));
        }
    }
    out
}

fn hat(mesh: &SpatialMesh, node: usize, x: f64) -> (f64, f64) {
    let h = mesh.h();
    let xn = mesh.node_x(node);
    let d = (x - xn) / h;
    if d.abs() >= 1.0 {
        (0.0, 0.0)
    } else if d < 0.0 {
        (1.0 + d, 1.0 / h)
    } else {
        (1.0 - d, -1.0 / h)
    }
}

#[test]
fn linear_operator_on_single_dof_mesh() {
    let p = heat(1, 0.5, 2);
    let a = p.assemble_linear(Region::Whole).unwrap().to_dense();
    assert_eq!((a.nrows(), a.ncols()), (4, 4));
    let h: f64 = 0.5;
    let (m, k) = (2.0 * h / 3.0, 2.0 / h);
    assert!((m - 1.0 / 3.0).abs() < 1e-15);
    let hpm = p.hpm.to_dense();
    let mt = p.mass_t.to_dense();
    let expected = Mat::from_fn(4, 4, |i, j| m * hpm[(j, i)] + k * mt[(i, j)]);
    assert!((&a - &expected).norm_max() < 1e-14);
    // Only the interface dof exists, so the Dirichlet interior is empty.
    assert!(p.region(Region::Whole).interior.is_empty());
}

#[test]
fn linear_operator_matches_dense_kronecker_form() {
    let p = heat(3, 0.5, 6);
    for r in [Region::Whole, Region::Sub1, Region::Sub2] {
        let rs = p.region(r);
        let a = p.assemble_linear(r).unwrap().to_dense();
        let expected = dense_kron(&p.hpm.to_dense().transpose().to_owned(), &rs.spatial.mass.to_dense())
            + dense_kron(&p.mass_t.to_dense(), &rs.spatial.stiffness.to_dense());
        assert!((&a - &expected).norm_max() < 1e-13);
    }
}

#[test]
fn heat_symmetric_part_is_mass_times_stiffness() {
    let p = heat(5, 0.5, 8);
    for r in [Region::Whole, Region::Sub1, Region::Sub2] {
        let a = p.assemble_linear(r).unwrap().to_dense();
        let sym = Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
        let expected = dense_kron(&p.mass_t.to_dense(), &p.region(r).spatial.stiffness.to_dense());
        assert!((&sym - &expected).norm_max() < 1e-13);
        assert!(dense_cholesky(expected.as_ref()).is_ok());
    }
}

#[test]
fn linear_assembly_rejects_nonaffine_coefficients() {
    let p = with_nl(2, 0.5, 4, Nonlinearity::quasilinear(0.25).unwrap());
    assert!(matches!(p.assemble_linear(Region::Whole), Err(Error::NotLinear)));
}

#[test]
fn zero_field_has_zero_residual() {
    for nl in [Nonlinearity::heat(), Nonlinearity::quasilinear(0.5).unwrap()] {
        let p = with_nl(4, 0.5, 8, nl);
        for r in [Region::Whole, Region::Sub1, Region::Sub2] {
            let nx = p.region(r).nx();
            let zero = Mat::<f64>::zeros(p.nt(), nx);
            let res = p.residual(r, zero.as_ref(), zero.as_ref());
            assert_eq!(res.norm_max(), 0.0);
            let load = p.load_vector(r, &SourceTerm::zero()).unwrap();
            assert_eq!(load.norm_max(), 0.0);
        }
    }
}

#[test]
fn affine_residual_matches_assembled_operator() {
    let p = heat(6, 0.5, 10);
    let u = random_field(p.nt(), p.region(Region::Sub1).nx(), 5);
    let a = p.assemble_linear(Region::Sub1).unwrap();
    let direct = unflatten((&a * flatten(u.as_ref())).as_ref(), p.nt(), u.ncols());
    let zero = Mat::<f64>::zeros(u.nrows(), u.ncols());
    let res = p.residual(Region::Sub1, u.as_ref(), zero.as_ref());
    assert!((&res - &direct).norm_l2() <= 1e-12 * direct.norm_l2());
}

/// The quadrature part evaluated with a finer six-point time rule, explicit
/// hat functions and the three-point spatial rule (random fields are rough
/// in space, so a different spatial rule would measure its own error).
fn remainder_oracle(p: &Problem, r: Region, u: &Mat<f64>) -> Mat<f64> {
    let rem = p.nl.remainder.as_ref().unwrap();
    let mesh = &p.mesh;
    let nodes = p.region(r).nodes.clone();
    let w = p.quad.window;
    let dt = p.quad.panel_length(&p.basis);
    let times = composite(-w, w, (2.0 * w / dt).round() as usize, 6);
    let (gx, gw) = spacetime_dd::spatial::gauss3();
    let h = mesh.h();
    let mut psi = vec![0.0; p.nt()];
    let mut out = Mat::<f64>::zeros(p.nt(), nodes.len());
    for &(t, wt) in &times {
        p.basis.time_eval_all(t, &mut psi);
        let ut: Vec<f64> = (0..nodes.len()).map(|j| (0..p.nt()).map(|i| psi[i] * u[(i, j)]).sum()).collect();
        for e in mesh.elements(r) {
            for k in 0..gx.len() {
                let x = mesh.node_x(e) + h * gx[k];
                let wx = h * gw[k];
                let (mut y, mut z) = (0.0, 0.0);
                for (j, &nd) in nodes.iter().enumerate() {
                    let (v, dv) = hat(mesh, nd, x);
                    y += ut[j] * v;
                    z += ut[j] * dv;
                }
                let (a, b) = ((rem.alpha)(x, y, z), (rem.beta)(x, y, z));
                for (j, &nd) in nodes.iter().enumerate() {
                    let (v, dv) = hat(mesh, nd, x);
                    if v == 0.0 && dv == 0.0 {
                        continue;
                    }
                    let g = wt * wx * (a * dv + b * v);
                    for i in 0..p.nt() {
                        out[(i, j)] += g * psi[i];
                    }
                }
            }
        }
    }
    out
}

#[test]
fn remainder_matches_independent_quadrature() {
    let smooth = Nonlinearity::custom(
        "smooth",
        Arc::new(|x: f64, _, z: f64| (1.0 + x) * z + 0.3 * z.atan()),
        Arc::new(|_, y: f64, z: f64| y.atan() - y + 0.1 * (z / 8.0).sin()),
        1.3,
        1.0,
        1.0,
    );
    let p = with_nl(3, 0.5, 16, smooth);
    for r in [Region::Whole, Region::Sub2] {
        let u = random_field(p.nt(), p.region(r).nx(), 17);
        let fast = p.apply_remainder(r, u.as_ref());
        let oracle = remainder_oracle(&p, r, &u);
        let rel = (&fast - &oracle).norm_l2() / oracle.norm_l2();
        assert!(rel < 1e-8, "relative difference {rel:e}");
    }
}

#[test]
fn opaque_heat_flux_truncation_is_within_tail_bound() {
    // The heat flux handed over as a black box: on the one-dof mesh the
    // remainder applied to unit fields returns `K·Mass_T` with the time
    // integrals cut to the window, so every Gram entry may move by at most
    // the declared tail energy.
    let opaque = Nonlinearity::custom("heat", Arc::new(|_, _, z: f64| z), Arc::new(|_, _, _| 0.0), 1.0, 1.0, 0.0);
    let p = with_nl(3, 0.5, 2, opaque);
    let k = 4.0;
    let mass = p.mass_t.to_dense();
    let mut worst = 0.0f64;
    for j in 0..p.nt() {
        let mut e = Mat::<f64>::zeros(p.nt(), 1);
        e[(j, 0)] = 1.0;
        let col = p.apply_remainder(Region::Whole, e.as_ref());
        for i in 0..p.nt() {
            worst = worst.max((col[(i, 0)] / k - mass[(i, j)]).abs());
        }
    }
    assert!(worst > 0.0 && worst < p.quad.tail_estimate(), "{worst:e}");
}

#[test]
fn window_tail_stays_within_declared_estimate() {
    let make = |window: f64| {
        let basis = TemporalBasis::new(3, 0.5).unwrap();
        let mesh = SpatialMesh::new(4, 0.5).unwrap();
        let quad = QuadratureSpec { window, ..QuadratureSpec::default() };
        Problem::new(basis, mesh, Nonlinearity::quasilinear(0.5).unwrap(), quad).unwrap()
    };
    let (p50, p400) = (make(50.0), make(400.0));
    let u = random_field(p50.nt(), p50.region(Region::Whole).nx(), 3);
    let a = p50.apply_remainder(Region::Whole, u.as_ref());
    let b = p400.apply_remainder(Region::Whole, u.as_ref());
    let rel = (&a - &b).norm_l2() / b.norm_l2();
    assert!(rel < p50.quad.tail_estimate(), "{rel:e}");
}

#[test]
fn small_window_is_rejected() {
    let quad = QuadratureSpec { window: 1.0, ..QuadratureSpec::default() };
    assert!(matches!(quad.check(), Err(Error::WindowTooSmall { .. })));
    let basis = TemporalBasis::new(2, 0.5).unwrap();
    let mesh = SpatialMesh::new(4, 0.5).unwrap();
    assert!(Problem::new(basis, mesh, Nonlinearity::heat(), quad).is_err());
}

#[test]
fn load_vector_matches_independent_quadrature() {
    let p = heat(4, 0.5, 8);
    let f = SourceTerm::new(manufactured_f, true);
    let r = Region::Sub1;
    let load = p.load_vector(r, &f).unwrap();
    let nodes = p.region(r).nodes.clone();
    let mesh = &p.mesh;
    let (gx, gw) = gauss_legendre(6);
    let h = mesh.h();
    let times = composite(0.0, 60.0, 6000, 5);
    let mut psi = vec![0.0; p.nt()];
    let mut oracle = Mat::<f64>::zeros(p.nt(), nodes.len());
    for &(t, wt) in &times {
        p.basis.time_eval_all(t, &mut psi);
        for (j, &nd) in nodes.iter().enumerate() {
            let mut sx = 0.0;
            for e in [nd - 1, nd].into_iter().filter(|e| mesh.elements(r).any(|x| x == *e)) {
                for k in 0..6 {
                    let x = mesh.node_x(e) + 0.5 * h * (1.0 + gx[k]);
                    sx += 0.5 * h * gw[k] * manufactured_f(t, x) * hat(mesh, nd, x).0;
                }
            }
            for i in 0..p.nt() {
                oracle[(i, j)] += wt * sx * psi[i];
            }
        }
    }
    let diff = (&load - &oracle).norm_max();
    assert!(diff < 1e-8, "{diff:e}");
}

#[test]
fn load_vector_is_converged_in_quadrature_order() {
    let f = SourceTerm::new(manufactured_f, true);
    for n in [4, 16] {
        let p = heat(n, 0.5, 16);
        let base = p.load_vector(Region::Whole, &f).unwrap();
        let quad = QuadratureSpec { points: 8, ..QuadratureSpec::default() };
        let (t, w) = quad.rule(&p.basis, 0.0, quad.window);
        let fine = p.load_with_rule(Region::Whole, &f, &t, &w);
        assert!((&base - &fine).norm_max() < 1e-8);
    }
}

/// Dense Schur complement of `g` onto the given index set.
fn dense_schur(g: &Mat<f64>, keep: &[usize]) -> Mat<f64> {
    let n = g.nrows();
    let elim: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let pick = |rows: &[usize], cols: &[usize]| Mat::from_fn(rows.len(), cols.len(), |i, j| g[(rows[i], cols[j])]);
    let gkk = pick(keep, keep);
    if elim.is_empty() {
        return gkk;
    }
    let gee = pick(&elim, &elim);
    let gek = pick(&elim, keep);
    let gke = pick(keep, &elim);
    let x = gee.full_piv_lu().solve(gek.as_ref());
    gkk - gke * x
}

#[test]
fn p1_is_dense_schur_complement_of_parabolic_energy() {
    for (n, ne) in [(1, 2), (2, 4), (3, 8)] {
        let p = heat(n, 0.5, ne);
        let rs = p.region(Region::Sub2);
        let g = dense_kron(&p.hpp.to_dense(), &rs.spatial.mass.to_dense())
            + dense_kron(&p.mass_t.to_dense(), &rs.spatial.stiffness.to_dense());
        let keep: Vec<usize> = (0..p.nt()).map(|i| i * rs.nx() + rs.iface).collect();
        let oracle = dense_schur(&g, &keep);
        let p1 = p.p1().unwrap();
        assert!((&p1 - &oracle).norm_max() < 1e-10 * oracle.norm_max());
        assert!((&p1 - p1.transpose()).norm_max() < 1e-12 * p1.norm_max());
        assert!(min_sym_eigenvalue(p1.as_ref()) > 0.0);
    }
}

#[test]
fn p2_is_quarter_gram_plus_elliptic_schur_mass() {
    let p = heat(6, 0.5, 16);
    let sigma = p.elliptic_schur2().unwrap();
    assert!((sigma - 2.0).abs() < 1e-12);
    let k2 = p.region(Region::Sub2).spatial.stiffness.to_dense();
    let oracle = dense_schur(&k2, &[p.region(Region::Sub2).iface]);
    assert!((oracle[(0, 0)] - sigma).abs() < 1e-12);
    let p2 = p.p2().unwrap();
    let quarter = &p2 - sigma * p.mass_t.to_dense();
    assert!((&quarter - p.qq.to_dense()).norm_max() < 1e-14);
    assert!((&p2 - p2.transpose()).norm_max() == 0.0);
    assert!(dense_cholesky(p2.as_ref()).is_ok());
}

#[test]
fn elliptic_schur_on_other_interface_positions() {
    let basis = TemporalBasis::new(2, 0.5).unwrap();
    let mesh = SpatialMesh::new(8, 0.25).unwrap();
    let p = Problem::new(basis, mesh, Nonlinearity::heat(), QuadratureSpec::default()).unwrap();
    assert!((p.elliptic_schur2().unwrap() - 1.0 / 0.75).abs() < 1e-12);
}

#[test]
fn hphi_identities() {
    let p = heat(5, 0.5, 4);
    let nt = p.nt();
    let id = Mat::<f64>::identity(nt, nt);
    assert!((p.hphi(0.0) - &id).norm_max() == 0.0);
    for phi in [0.02 * PI, 0.3, 1.2] {
        let hp = p.hphi(phi);
        let h = p.basis.hilbert_matrix();
        let inv = phi.cos() * &id + phi.sin() * &h;
        assert!((&hp * &inv - &id).norm_max() < 1e-14);
        let r = random_field(nt, 1, 9);
        let mu = random_field(nt, 1, 10);
        let lhs = (r.transpose() * (&hp * &mu))[(0, 0)];
        let adj = spacetime_dd::system::hphi_adjoint_apply(hp.as_ref(), r.as_ref());
        let rhs = (adj.transpose() * &mu)[(0, 0)];
        assert!((lhs - rhs).abs() < 1e-14);
    }
}

#[test]
fn riesz_map_is_l2_gram() {
    let p = heat(3, 0.5, 4);
    let j = p.riesz();
    assert!(dense_cholesky(j.as_ref()).is_ok());
    let zero = Mat::<f64>::zeros(p.nt(), 1);
    assert_eq!((&j * &zero).norm_max(), 0.0);
    let eta = random_field(p.nt(), 1, 4);
    let energy = (eta.transpose() * (&j * &eta))[(0, 0)];
    // ∫ η(t)² dt by composite quadrature on [−T, T], with the 1/T tail
    // removed by Richardson extrapolation in T.
    let integral = |t_max: f64| {
        let mut psi = vec![0.0; p.nt()];
        composite(-t_max, t_max, (t_max * 40.0) as usize, 6)
            .into_iter()
            .map(|(t, w)| {
                p.basis.time_eval_all(t, &mut psi);
                let v: f64 = (0..p.nt()).map(|i| psi[i] * eta[(i, 0)]).sum();
                w * v * v
            })
            .sum::<f64>()
    };
    let extrapolated = 2.0 * integral(4000.0) - integral(2000.0);
    assert!((extrapolated - energy).abs() < 1e-6, "{extrapolated} vs {energy}");
}

#[test]
fn rotated_heat_operator_is_monotone() {
    let phi = 0.02 * PI;
    for n in [1, 2, 4, 8] {
        for ne in [2, 8, 16] {
            let p = heat(n, 0.5, ne);
            let hp = p.hphi(phi);
            for r in [Region::Whole, Region::Sub1, Region::Sub2] {
                let nx = p.region(r).nx();
                let a = p.assemble_linear(r).unwrap().to_dense();
                let rot = dense_kron(&hp.transpose().to_owned(), &Mat::identity(nx, nx)) * &a;
                let lam = min_sym_eigenvalue(rot.as_ref());
                assert!(lam > 0.0, "N={n} ne={ne} {r:?}: {lam:e}");
            }
        }
    }
}

#[test]
fn inner_solver_matrix_is_spd_with_and_without_robin_term() {
    let p = heat(4, 0.5, 8);
    for r in [Region::Whole, Region::Sub1, Region::Sub2] {
        let rs = p.region(r);
        let all: Vec<usize> = (0..rs.nx()).collect();
        for (idx, robin) in [(rs.interior.clone(), None), (all.clone(), None), (all, Some(2.5))] {
            let g = p.energy_block(r, &idx, robin).to_dense();
            assert!((&g - g.transpose()).norm_max() < 1e-13);
            assert!(dense_cholesky(g.as_ref()).is_ok());
        }
    }
    let rs = p.region(Region::Sub2);
    let all: Vec<usize> = (0..rs.nx()).collect();
    let plain = p.energy_block(Region::Sub2, &all, None).to_dense();
    let robin = p.energy_block(Region::Sub2, &all, Some(3.0)).to_dense();
    let diff = &robin - &plain;
    let keep: Vec<usize> = (0..p.nt()).map(|i| i * rs.nx() + rs.iface).collect();
    let mt = p.mass_t.to_dense();
    for i in 0..diff.nrows() {
        for j in 0..diff.ncols() {
            let expected = match (keep.iter().position(|&k| k == i), keep.iter().position(|&k| k == j)) {
                (Some(a), Some(b)) => 3.0 * mt[(a, b)],
                _ => 0.0,
            };
            assert!((diff[(i, j)] - expected).abs() < 1e-14);
        }
    }
}

#[test]
fn affine_block_restricts_full_operator() {
    let p = heat(2, 0.5, 6);
    let rs = p.region(Region::Sub1);
    let full = p.assemble_linear(Region::Sub1).unwrap();
    let rows: Vec<usize> =
        (0..p.nt()).flat_map(|i| rs.interior.iter().map(move |&x| (i, x))).map(|(i, x)| i * rs.nx() + x).collect();
    let block = p.affine_block(Region::Sub1, &rs.interior, &rs.interior).to_dense();
    let sub = submatrix(&full, &rows, &rows).to_dense();
    assert!((&block - &sub).norm_max() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residual_is_additive_in_load(seed in any::<u64>()) {
        let p = with_nl(2, 0.5, 4, Nonlinearity::quasilinear(0.25).unwrap());
        let nx = p.region(Region::Sub2).nx();
        let u = random_field(p.nt(), nx, seed);
        let f = random_field(p.nt(), nx, seed ^ 1);
        let zero = Mat::<f64>::zeros(p.nt(), nx);
        let a = p.residual(Region::Sub2, u.as_ref(), f.as_ref());
        let b = p.residual(Region::Sub2, u.as_ref(), zero.as_ref()) - &f;
        prop_assert!((&a - &b).norm_max() < 1e-13);
    }

    #[test]
    fn affine_application_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let c = |v: f64| -> Arc<dyn Fn(f64) -> f64 + Send + Sync> { Arc::new(move |_| v) };
        let nl = Nonlinearity::adr(Arc::new(|x| 1.0 + x), c(0.1), c(0.2)).unwrap();
        let p = with_nl(2, 0.5, 6, nl);
        let nx = p.region(Region::Whole).nx();
        let u = random_field(p.nt(), nx, seed);
        let v = random_field(p.nt(), nx, seed.wrapping_add(7));
        let lhs = p.apply_form(Region::Whole, (a * &u + b * &v).as_ref());
        let rhs = a * p.apply_form(Region::Whole, u.as_ref()) + b * p.apply_form(Region::Whole, v.as_ref());
        prop_assert!((&lhs - &rhs).norm_max() < 1e-12 * (1.0 + rhs.norm_max()));
    }
}
