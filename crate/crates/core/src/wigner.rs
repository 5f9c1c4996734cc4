//! Wigner function of a single-mode state in the number basis.
//!
//! Conventions: x = (b + b+)/sqrt(2), p = -i (b - b+)/sqrt(2),
//! alpha = (x + i p)/sqrt(2), and the vacuum has W(0,0) = 1/pi with
//! integral(W dx dp) = 1. Evaluation uses the closed form in terms of
//! associated Laguerre polynomials,
//!
//!   W(x,p) = e^{-2|a|^2}/pi * [ sum_n rho_nn (-1)^n L_n(4|a|^2)
//!            + sum_{k>=1, m} 2 Re(rho_{m+k,m} (2 a*)^k) (-1)^m
//!              sqrt(m!/(m+k)!) L_m^k(4|a|^2) ]
//!
//! with rho_{m+k,m} = <m+k|rho|m> and the upward Laguerre recurrence in m.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::states::DensityMatrix;
use crate::{Result, SimError};

/// Wigner values on a rectangular grid, row-major over x then p.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// w[ix * ps.len() + ip]
    pub w: Vec<f64>,
}

/// Uniformly spaced samples including both endpoints.
pub fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![min];
    }
    let step = (max - min) / (n - 1) as f64;
    (0..n).map(|i| min + i as f64 * step).collect()
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    lf
}

/// W(x, p) for a density matrix in the number basis.
fn point(mat: &DMatrix<Complex64>, lnfact: &[f64], x: f64, p: f64) -> f64 {
    let d = mat.nrows();
    let alpha = Complex64::new(x, p) / 2.0_f64.sqrt();
    let z = 4.0 * alpha.norm_sqr();
    let two_abs = 2.0 * alpha.norm();
    let phase = -alpha.arg();
    let mut total = 0.0;
    for k in 0..d {
        // coefficient (2 a*)^k with the factorial ratio folded in per m
        let powk = two_abs.powi(k as i32);
        let mut lm2 = 0.0;
        let mut lm1 = 0.0;
        let mut sign = 1.0;
        for m in 0..d - k {
            // L_m^k(z) by upward recurrence in m
            let l = if m == 0 {
                1.0
            } else if m == 1 {
                1.0 + k as f64 - z
            } else {
                let mf = m as f64;
                ((2.0 * mf - 1.0 + k as f64 - z) * lm1 - (mf - 1.0 + k as f64) * lm2) / mf
            };
            lm2 = lm1;
            lm1 = l;
            if k == 0 {
                total += mat[(m, m)].re * sign * l;
            } else if powk > 0.0 {
                let ratio = (0.5 * (lnfact[m] - lnfact[m + k])).exp();
                let coef = Complex64::from_polar(powk * ratio, phase * k as f64);
                total += 2.0 * (mat[(m + k, m)] * coef).re * sign * l;
            }
            sign = -sign;
        }
    }
    total * (-0.5 * z).exp() / std::f64::consts::PI
}

/// Evaluates the Wigner function of a single-mode state on a grid.
/// The matrix is interpreted in the number basis |0>..|d-1>.
pub fn wigner_grid(rho: &DensityMatrix, xs: &[f64], ps: &[f64]) -> Result<WignerGrid> {
    if xs.is_empty() || ps.is_empty() {
        return Err(SimError::InvalidConfig("empty Wigner grid".into()));
    }
    let herm = crate::linalg::max_hermiticity_violation(&rho.mat);
    if herm > 1e-8 {
        return Err(SimError::Numerical(format!(
            "Wigner input is not Hermitian (violation {herm:.3e})"
        )));
    }
    let d = rho.mat.nrows();
    let lnfact = ln_factorials(d);
    let mut w = Vec::with_capacity(xs.len() * ps.len());
    for &x in xs {
        for &p in ps {
            w.push(point(&rho.mat, &lnfact, x, p));
        }
    }
    Ok(WignerGrid {
        xs: xs.to_vec(),
        ps: ps.to_vec(),
        w,
    })
}

fn trapezoid_weights(v: &[f64]) -> (f64, Vec<f64>) {
    let n = v.len();
    if n < 2 {
        return (1.0, vec![1.0; n]);
    }
    let h = (v[n - 1] - v[0]) / (n - 1) as f64;
    let mut wts = vec![1.0; n];
    wts[0] = 0.5;
    wts[n - 1] = 0.5;
    (h, wts)
}

impl WignerGrid {
    pub fn value(&self, ix: usize, ip: usize) -> f64 {
        self.w[ix * self.ps.len() + ip]
    }

    /// Trapezoid integral of W over the grid (should be close to 1 when the
    /// grid covers the state's support).
    pub fn integral(&self) -> f64 {
        self.reduce(|v| v)
    }

    /// Integral of |W|; the negativity volume is this minus 1.
    pub fn abs_integral(&self) -> f64 {
        self.reduce(f64::abs)
    }

    /// integral(|W|) - 1, a standard nonclassicality measure.
    pub fn negativity_volume(&self) -> f64 {
        self.abs_integral() - 1.0
    }

    fn reduce(&self, f: impl Fn(f64) -> f64) -> f64 {
        let (hx, wx) = trapezoid_weights(&self.xs);
        let (hp, wp) = trapezoid_weights(&self.ps);
        let mut acc = 0.0;
        for (ix, &a) in wx.iter().enumerate() {
            for (ip, &b) in wp.iter().enumerate() {
                acc += a * b * f(self.value(ix, ip));
            }
        }
        acc * hx * hp
    }

    /// Most negative value and its location (x, p).
    pub fn min(&self) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for ix in 0..self.xs.len() {
            for ip in 0..self.ps.len() {
                let v = self.value(ix, ip);
                if v < best.0 {
                    best = (v, self.xs[ix], self.ps[ip]);
                }
            }
        }
        best
    }

    /// P(x): W integrated over p.
    pub fn marginal_x(&self) -> Vec<f64> {
        let (hp, wp) = trapezoid_weights(&self.ps);
        (0..self.xs.len())
            .map(|ix| {
                hp * wp
                    .iter()
                    .enumerate()
                    .map(|(ip, &b)| b * self.value(ix, ip))
                    .sum::<f64>()
            })
            .collect()
    }

    /// P(p): W integrated over x.
    pub fn marginal_p(&self) -> Vec<f64> {
        let (hx, wx) = trapezoid_weights(&self.xs);
        (0..self.ps.len())
            .map(|ip| {
                hx * wx
                    .iter()
                    .enumerate()
                    .map(|(ix, &a)| a * self.value(ix, ip))
                    .sum::<f64>()
            })
            .collect()
    }
}
