//! Spectral temporal basis on the whole time axis.
//!
//! Each basis function is defined by its Fourier transform, a piecewise linear
//! hat on the frequency grid `ω_j = jτ` truncated to `|ω| ≤ Nτ`. The top band
//! `j = N` is therefore a half hat.
//!
//! Index layout, used by every matrix in the crate: `0..=N` are the even
//! (cosine) functions `ψ_0..ψ_N`, `N+1..=2N+1` are their Hilbert transforms
//! `ψ̃_0..ψ̃_N`.
//!
//! Fourier convention: `Fv(ω) = ∫ v(t) e^{-iωt} dt`, inverse with `1/(2π)`, so
//! every Parseval identity carries a `1/(2π)`.

use std::f64::consts::PI;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalBasis {
    n: usize,
    tau: f64,
}

/// Which temporal bilinear form a Gram matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GramKind {
    /// `(u, v)_{L²(ℝ)}`.
    Mass,
    /// `(∂⁺½u, ∂⁻½v)`, weight `iξ`; skew-symmetric.
    HalfPlusMinus,
    /// `(∂⁺½u, ∂⁺½v)`, weight `|ξ|`.
    HalfPlusPlus,
    /// `(∂^¼u, ∂^¼v)`, weight `√|ξ|`.
    QuarterQuarter,
}

/// Entry `(j, l)` is the form evaluated with basis function `j` in the first
/// slot and `l` in the second.
#[derive(Debug, Clone)]
pub struct TemporalGram {
    pub kind: GramKind,
    pub matrix: SparseColMat<usize, f64>,
}

impl TemporalBasis {
    pub fn new(n: usize, tau: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { n, tau })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        2 * (self.n + 1)
    }

    /// Index of `ψ_j`.
    pub fn cos_index(&self, j: usize) -> usize {
        assert!(j <= self.n);
        j
    }

    /// Index of `ψ̃_j`.
    pub fn sin_index(&self, j: usize) -> usize {
        assert!(j <= self.n);
        self.n + 1 + j
    }

    /// Splits a basis index into (band `j`, is-sine-family).
    fn split(&self, idx: usize) -> Result<(usize, bool)> {
        if idx >= self.dim() {
            return Err(Error::IndexOutOfRange { idx, dim: self.dim() });
        }
        Ok(if idx <= self.n { (idx, false) } else { (idx - self.n - 1, true) })
    }

    /// Real frequency hat `h_j(|ω|)` of band `j`.
    fn hat(&self, j: usize, omega_abs: f64) -> f64 {
        if omega_abs > self.n as f64 * self.tau {
            return 0.0;
        }
        (1.0 - (omega_abs / self.tau - j as f64).abs()).max(0.0)
    }

    pub fn fourier_eval(&self, idx: usize, omega: f64) -> Result<Complex64> {
        let (j, odd) = self.split(idx)?;
        let h = self.hat(j, omega.abs());
        Ok(if odd {
            let sgn = if omega > 0.0 {
                1.0
            } else if omega < 0.0 {
                -1.0
            } else {
                0.0
            };
            Complex64::new(0.0, -sgn * h)
        } else {
            Complex64::new(h, 0.0)
        })
    }

    pub fn time_eval(&self, idx: usize, t: f64) -> Result<f64> {
        let (j, odd) = self.split(idx)?;
        Ok(self.eval_band(j, odd, t))
    }

    /// Values of all `dim` basis functions at `t`, in index layout.
    pub fn time_eval_all(&self, t: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim());
        let n = self.n;
        let tau = self.tau;
        let s2 = sinc(t * tau / 2.0).powi(2) * tau / PI;
        out[0] = 0.5 * s2;
        out[n + 1] = tau / PI * g_fn(t * tau);
        for j in 1..n {
            let (sn, cs) = (j as f64 * tau * t).sin_cos();
            out[j] = s2 * cs;
            out[n + 1 + j] = s2 * sn;
        }
        out[n] = self.eval_band(n, false, t);
        out[2 * n + 1] = self.eval_band(n, true, t);
    }

    fn eval_band(&self, j: usize, odd: bool, t: f64) -> f64 {
        let tau = self.tau;
        let n = self.n;
        if j < n {
            if j == 0 {
                return if odd { tau / PI * g_fn(t * tau) } else { tau / (2.0 * PI) * sinc(t * tau / 2.0).powi(2) };
            }
            let s2 = sinc(t * tau / 2.0).powi(2) * tau / PI;
            let arg = j as f64 * tau * t;
            return if odd { s2 * arg.sin() } else { s2 * arg.cos() };
        }
        // Half hat rising on [(N-1)τ, Nτ] and cut off at Nτ.
        let b = n as f64 * tau;
        let c = b - tau / 2.0;
        if odd {
            let d = b - tau / 4.0;
            (0.5 * tau * (d * t).sin() * sinc(tau * t / 4.0) - 0.5 * tau * (c * t).cos() * g_fn(tau * t / 2.0)) / PI
        } else {
            (b * sinc(b * t) - c * sinc(c * t) * sinc(tau * t / 2.0)) / PI
        }
    }

    pub fn gram(&self, kind: GramKind) -> TemporalGram {
        let n1 = self.n + 1;
        let mut trip = Vec::new();
        match kind {
            GramKind::Mass | GramKind::HalfPlusPlus | GramKind::QuarterQuarter => {
                let e = self.band_gram(weight_of(kind));
                for off in [0, n1] {
                    push_tridiag(&mut trip, &e, off, off, 1.0);
                }
            }
            GramKind::HalfPlusMinus => {
                let e = self.band_gram(Weight::Abs);
                push_tridiag(&mut trip, &e, 0, n1, -1.0);
                push_tridiag(&mut trip, &e, n1, 0, 1.0);
            }
        }
        let dim = self.dim();
        let matrix = SparseColMat::try_new_from_triplets(dim, dim, &trip).expect("gram triplets are in range");
        TemporalGram { kind, matrix }
    }

    /// The `(N+1)×(N+1)` tridiagonal band Gram
    /// `E[j][l] = (1/π) ∫_0^{Nτ} w(ξ) h_j(ξ) h_l(ξ) dξ` stored as
    /// (diagonal, superdiagonal).
    pub fn band_gram(&self, w: Weight) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let tau = self.tau;
        let scale = match w {
            Weight::One => tau,
            Weight::Abs => tau * tau,
            Weight::Sqrt => tau * tau.sqrt(),
        } / PI;
        let mut diag = vec![0.0; n + 1];
        let mut sup = vec![0.0; n];
        for k in 0..n {
            let mu = |m: usize| cell_moment(w, k, m);
            let (m0, m1, m2) = (mu(0), mu(1), mu(2));
            diag[k] += scale * (m0 - 2.0 * m1 + m2);
            sup[k] += scale * (m1 - m2);
            diag[k + 1] += scale * m2;
        }
        (diag, sup)
    }

    /// Coefficient matrix of the Hilbert transform on the discrete space:
    /// `ψ_j ↦ ψ̃_j`, `ψ̃_j ↦ -ψ_j`.
    pub fn hilbert_matrix(&self) -> Mat<f64> {
        let n1 = self.n + 1;
        let mut h = Mat::zeros(self.dim(), self.dim());
        for j in 0..n1 {
            h[(n1 + j, j)] = 1.0;
            h[(j, n1 + j)] = -1.0;
        }
        h
    }

    /// `cos φ·I − sin φ·H`.
    pub fn hphi(&self, phi: f64) -> Mat<f64> {
        let (s, c) = phi.sin_cos();
        let h = self.hilbert_matrix();
        Mat::from_fn(self.dim(), self.dim(), |i, j| (if i == j { c } else { 0.0 }) - s * h[(i, j)])
    }
}

/// Frequency weights of the symmetric band Grams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    One,
    Abs,
    Sqrt,
}

fn weight_of(kind: GramKind) -> Weight {
    match kind {
        GramKind::Mass => Weight::One,
        GramKind::HalfPlusPlus | GramKind::HalfPlusMinus => Weight::Abs,
        GramKind::QuarterQuarter => Weight::Sqrt,
    }
}

fn push_tridiag(
    trip: &mut Vec<Triplet<usize, usize, f64>>,
    e: &(Vec<f64>, Vec<f64>),
    row0: usize,
    col0: usize,
    sign: f64,
) {
    let (diag, sup) = e;
    for (k, &d) in diag.iter().enumerate() {
        trip.push(Triplet::new(row0 + k, col0 + k, sign * d));
    }
    for (k, &s) in sup.iter().enumerate() {
        trip.push(Triplet::new(row0 + k, col0 + k + 1, sign * s));
        trip.push(Triplet::new(row0 + k + 1, col0 + k, sign * s));
    }
}

/// `∫_0^1 w(k+s) s^m ds` for `w(v) ∈ {1, v, √v}`.
fn cell_moment(w: Weight, k: usize, m: usize) -> f64 {
    let kf = k as f64;
    let mf = m as f64;
    match w {
        Weight::One => 1.0 / (mf + 1.0),
        Weight::Abs => kf / (mf + 1.0) + 1.0 / (mf + 2.0),
        Weight::Sqrt => {
            if k == 0 {
                1.0 / (mf + 1.5)
            } else if k < 8 {
                // Substitute v = k + s and integrate v^{i+1/2} exactly.
                let mut acc = 0.0;
                let mut binom = 1.0;
                for i in 0..=m {
                    let p = i as f64 + 1.5;
                    let term = ((kf + 1.0).powf(p) - kf.powf(p)) / p;
                    acc += binom * (-kf).powi((m - i) as i32) * term;
                    binom *= (m - i) as f64 / (i + 1) as f64;
                }
                acc
            } else {
                // √(k+s) = √k Σ C(1/2, n) (s/k)^n, converging fast for k ≥ 8.
                let mut acc = 0.0;
                let mut coeff = 1.0;
                let mut kpow = 1.0;
                for nn in 0..64 {
                    let term = coeff * kpow / (mf + nn as f64 + 1.0);
                    acc += term;
                    if term.abs() < 1e-18 * acc.abs() {
                        break;
                    }
                    coeff *= (0.5 - nn as f64) / (nn as f64 + 1.0);
                    kpow /= kf;
                }
                kf.sqrt() * acc
            }
        }
    }
}

/// `sin x / x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `(x − sin x) / x²`, odd and smooth at the origin.
pub fn g_fn(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        let mut term = x / 6.0;
        let mut acc = term;
        let mut k = 1.0;
        while term.abs() > 1e-18 * acc.abs().max(f64::MIN_POSITIVE) {
            term *= -x2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
            acc += term;
            k += 1.0;
            if k > 30.0 {
                break;
            }
        }
        acc
    } else {
        (x - x.sin()) / (x * x)
    }
}
