//! Coefficient functions `α(x, y, z)`, `β(x, y, z)` of the quasilinear operator
//! `∂_t u − ∂_x α(x, u, ∂_x u) + β(x, u, ∂_x u)`.
//!
//! Each instance carries an affine principal part `α = a(x) z`,
//! `β = b(x) z + c(x) y` that the discretization applies exactly, plus an
//! optional remainder evaluated by quadrature.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Coef = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Flux = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Poincaré constant `(1/π)²` of the unit interval, the largest of the three
/// domains in the supplied decompositions.
pub const UNIT_POINCARE: f64 = 1.0 / (PI * PI);

#[derive(Clone)]
pub struct AffinePart {
    pub a: Coef,
    pub b: Coef,
    pub c: Coef,
}

#[derive(Clone)]
pub struct Remainder {
    pub alpha: Flux,
    pub beta: Flux,
}

#[derive(Clone)]
pub struct Nonlinearity {
    pub name: String,
    pub affine: AffinePart,
    pub remainder: Option<Remainder>,
    /// Lipschitz bound.
    pub h1: f64,
    /// Lower monotonicity bound (`inf h₂`).
    pub h2: f64,
    /// Upper monotonicity bound (`sup h₃`).
    pub h3: f64,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("affine", &self.is_affine())
            .field("h1", &self.h1)
            .field("h2", &self.h2)
            .field("h3", &self.h3)
            .finish()
    }
}

fn constant(v: f64) -> Coef {
    Arc::new(move |_| v)
}

impl Nonlinearity {
    /// Fully opaque coefficients; every term goes through quadrature.
    pub fn custom(name: impl Into<String>, alpha: Flux, beta: Flux, h1: f64, h2: f64, h3: f64) -> Self {
        Self {
            name: name.into(),
            affine: AffinePart { a: constant(0.0), b: constant(0.0), c: constant(0.0) },
            remainder: Some(Remainder { alpha, beta }),
            h1,
            h2,
            h3,
        }
    }

    pub fn heat() -> Self {
        Self {
            name: "heat".into(),
            affine: AffinePart { a: constant(1.0), b: constant(0.0), c: constant(0.0) },
            remainder: None,
            h1: 1.0,
            h2: 1.0,
            h3: 0.0,
        }
    }

    /// `α = a(x) z`, `β = b(x) z + c(x) y`. The coefficient ranges are probed
    /// on a uniform grid of `(0, 1)`.
    pub fn adr(a: Coef, b: Coef, c: Coef) -> Result<Self> {
        let xs: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let mut h1 = 0.0_f64;
        let mut h2 = f64::INFINITY;
        let mut h3 = 0.0_f64;
        for &x in &xs {
            let (av, bv, cv) = (a(x), b(x), c(x));
            h1 = h1.max(av.abs()).max(bv.abs()).max(cv.abs());
            h2 = h2.min(av - bv * bv / 2.0);
            // The advective cross term b·δz·δy needs δy² absorbed by Young's
            // inequality, which costs 1/2 in h₃ whenever b ≠ 0.
            let pointwise = if bv != 0.0 { 0.5 - cv } else { -cv };
            h3 = h3.max(cv * cv + bv * bv / 2.0).max(pointwise);
        }
        let nl = Self { name: "adr".into(), affine: AffinePart { a, b, c }, remainder: None, h1, h2, h3 };
        nl.check_bound(UNIT_POINCARE)?;
        Ok(nl)
    }

    /// `α = z + γ sin|z|`, `β = arctan y`.
    pub fn quasilinear(gamma: f64) -> Result<Self> {
        let nl = Self {
            name: format!("quasilinear({gamma})"),
            affine: AffinePart { a: constant(1.0), b: constant(0.0), c: constant(1.0) },
            remainder: Some(Remainder {
                alpha: Arc::new(move |_, _, z: f64| gamma * libm::sin(z.abs())),
                beta: Arc::new(|_, y: f64, _| libm::atan(y) - y),
            }),
            h1: 1.0 + gamma.abs(),
            h2: 1.0 - gamma.abs(),
            h3: 1.0,
        };
        nl.check_bound(UNIT_POINCARE)?;
        Ok(nl)
    }

    pub fn is_affine(&self) -> bool {
        self.remainder.is_none()
    }

    pub fn alpha(&self, x: f64, y: f64, z: f64) -> f64 {
        let lin = (self.affine.a)(x) * z;
        match &self.remainder {
            Some(r) => lin + (r.alpha)(x, y, z),
            None => lin,
        }
    }

    pub fn beta(&self, x: f64, y: f64, z: f64) -> f64 {
        let lin = (self.affine.b)(x) * z + (self.affine.c)(x) * y;
        match &self.remainder {
            Some(r) => lin + (r.beta)(x, y, z),
            None => lin,
        }
    }

    /// `h₂ − C_p h₃`, positive when the declared constants are admissible.
    pub fn bound_margin(&self, c_p: f64) -> f64 {
        self.h2 - c_p * self.h3
    }

    pub fn check_bound(&self, c_p: f64) -> Result<()> {
        let margin = self.bound_margin(c_p);
        if margin > 0.0 {
            Ok(())
        } else {
            Err(Error::AssumptionViolated(format!(
                "{}: h2 = {:.6} is not above C_p * h3 = {:.6}",
                self.name,
                self.h2,
                c_p * self.h3
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub samples: usize,
    pub poincare_constant: f64,
    /// `min h₁(|δz|+|δy|) − |δα|` over the samples.
    pub alpha_lipschitz_margin: f64,
    /// `min h₁(|δz|+|δy|) − |δβ|` over the samples.
    pub beta_lipschitz_margin: f64,
    /// `min δα·δz + δβ·δy − h₂δz² + h₃δy²` over the samples.
    pub monotone_margin: f64,
    /// `h₂ − C_p h₃`.
    pub bound_margin: f64,
    pub passed: bool,
}

/// Sampled check of the Lipschitz and monotonicity inequalities with the
/// declared constants. Half of the pairs are independent draws in
/// `[-10, 10]²`, half are close pairs probing local slopes.
pub fn check_assumptions(nl: &Nonlinearity, samples: usize, seed: u64) -> AssumptionReport {
    assert!(samples >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lip_a = f64::INFINITY;
    let mut lip_b = f64::INFINITY;
    let mut mono = f64::INFINITY;
    for k in 0..samples {
        let x: f64 = rng.random_range(0.0..1.0);
        let y: f64 = rng.random_range(-10.0..10.0);
        let z: f64 = rng.random_range(-10.0..10.0);
        let (y2, z2) = if k % 2 == 0 {
            (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))
        } else {
            (y + rng.random_range(-1e-2..1e-2), z + rng.random_range(-1e-2..1e-2))
        };
        let (dy, dz) = (y - y2, z - z2);
        let da = nl.alpha(x, y, z) - nl.alpha(x, y2, z2);
        let db = nl.beta(x, y, z) - nl.beta(x, y2, z2);
        let lip = nl.h1 * (dz.abs() + dy.abs());
        // Relative slack for rounding in the differences.
        let eps = 1e-12 * (1.0 + lip);
        lip_a = lip_a.min(lip - da.abs() + eps);
        lip_b = lip_b.min(lip - db.abs() + eps);
        let m = da * dz + db * dy - nl.h2 * dz * dz + nl.h3 * dy * dy;
        mono = mono.min(m + 1e-12 * (1.0 + dz * dz + dy * dy));
    }
    let bound_margin = nl.bound_margin(UNIT_POINCARE);
    AssumptionReport {
        samples,
        poincare_constant: UNIT_POINCARE,
        alpha_lipschitz_margin: lip_a,
        beta_lipschitz_margin: lip_b,
        monotone_margin: mono,
        bound_margin,
        passed: lip_a >= 0.0 && lip_b >= 0.0 && mono >= 0.0 && bound_margin > 0.0,
    }
}

/// Source term `f(t, x)`.
#[derive(Clone)]
pub struct SourceTerm {
    pub f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    /// `f` vanishes for `t ≤ 0`, so time quadrature may skip the negative axis.
    pub causal: bool,
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerm").field("causal", &self.causal).finish()
    }
}

impl SourceTerm {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, causal: bool) -> Self {
        Self { f: Arc::new(f), causal }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| 0.0, true)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        if self.causal && t <= 0.0 {
            0.0
        } else {
            (self.f)(t, x)
        }
    }
}
