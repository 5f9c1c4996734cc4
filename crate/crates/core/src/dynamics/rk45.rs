//! Adaptive embedded Runge-Kutta (Dormand-Prince 5(4)) over complex vectors.

use num_complex::Complex64;

use crate::{Result, SimError};

#[derive(Debug, Clone, Copy)]
pub struct Rk45 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Rk45 {
    fn default() -> Self {
        Rk45 {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b_hat (error estimator weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

impl Rk45 {
    /// Integrates y' = rhs(t, y) from t0 to t1 in place. `h` carries the
    /// step-size guess across calls.
    pub fn integrate<F>(
        &self,
        mut rhs: F,
        y: &mut Vec<Complex64>,
        t0: f64,
        t1: f64,
        h: &mut f64,
        stats: &mut StepStats,
    ) -> Result<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        let span = t1 - t0;
        if span <= 0.0 {
            if span == 0.0 {
                return Ok(());
            }
            return Err(SimError::Numerical("non-increasing time span".into()));
        }
        if !h.is_finite() || *h <= 0.0 {
            *h = span / 100.0;
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut k1 = vec![zero; n];
        let mut k2 = vec![zero; n];
        let mut k3 = vec![zero; n];
        let mut k4 = vec![zero; n];
        let mut k5 = vec![zero; n];
        let mut k6 = vec![zero; n];
        let mut k7 = vec![zero; n];
        let mut ytmp = vec![zero; n];
        let mut ynew = vec![zero; n];

        let mut t = t0;
        rhs(t, y, &mut k1);
        let mut steps = 0usize;
        while t < t1 - 1e-15 * span.max(1.0) {
            steps += 1;
            if steps > self.max_steps {
                return Err(SimError::Numerical("step budget exhausted".into()));
            }
            let mut hs = (*h).min(t1 - t);
            if hs < 1e-14 * span.max(1.0) {
                return Err(SimError::Numerical(
                    "step-size underflow: tolerance unreachable".into(),
                ));
            }

            for i in 0..n {
                ytmp[i] = y[i] + hs * A21 * k1[i];
            }
            rhs(t + C2 * hs, &ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(t + C3 * hs, &ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(t + C4 * hs, &ytmp, &mut k4);
            for i in 0..n {
                ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(t + C5 * hs, &ytmp, &mut k5);
            for i in 0..n {
                ytmp[i] = y[i]
                    + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(t + hs, &ytmp, &mut k6);
            for i in 0..n {
                ynew[i] =
                    y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            rhs(t + hs, &ynew, &mut k7);

            // scaled RMS error estimate
            let mut err_sq = 0.0;
            for i in 0..n {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let scale = self.atol + self.rtol * y[i].norm().max(ynew[i].norm());
                let r = e.norm() / scale;
                err_sq += r * r;
            }
            let err = (err_sq / n as f64).sqrt();

            if err <= 1.0 {
                t += hs;
                std::mem::swap(y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7); // FSAL
                stats.accepted += 1;
            } else {
                stats.rejected += 1;
            }
            let factor = if err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            hs *= factor;
            *h = hs;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        // y' = -y, y(0) = 1 -> e^{-t}
        let rk = Rk45 {
            rtol: 1e-10,
            atol: 1e-12,
            ..Default::default()
        };
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let mut h = 0.0;
        let mut st = StepStats::default();
        rk.integrate(
            |_, y, dy| dy[0] = -y[0],
            &mut y,
            0.0,
            2.0,
            &mut h,
            &mut st,
        )
        .unwrap();
        assert!((y[0].re - (-2.0_f64).exp()).abs() < 1e-9);
        assert!(st.accepted > 0);
    }

    #[test]
    fn phase_rotation() {
        // y' = -i w y -> e^{-i w t}
        let rk = Rk45 {
            rtol: 1e-11,
            atol: 1e-13,
            ..Default::default()
        };
        let w = 3.7;
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let mut h = 0.0;
        let mut st = StepStats::default();
        rk.integrate(
            |_, y, dy| dy[0] = Complex64::new(0.0, -w) * y[0],
            &mut y,
            0.0,
            1.5,
            &mut h,
            &mut st,
        )
        .unwrap();
        let expect = Complex64::from_polar(1.0, -w * 1.5);
        assert!((y[0] - expect).norm() < 1e-9);
        assert!((y[0].norm() - 1.0).abs() < 1e-10);
    }
}
