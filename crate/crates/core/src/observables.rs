//! Per-mode observables: photon statistics, quadrature variances, Fano
//! factor, photon-number distributions, and the Schmidt number.

use num_complex::Complex64;

use crate::fock::FockSpace;
use crate::linalg::hermitian_eigen;
use crate::states::{DensityMatrix, PureState, StateLabel};
use crate::{Result, SimError};

/// Raw single-mode moments <b>, <b^2>, <n>, <n^2> and the photon-number
/// distribution P(n). Quadratures use x = (b + b+)/sqrt(2),
/// p = -i (b - b+)/sqrt(2).
#[derive(Debug, Clone)]
pub struct ModeMoments {
    pub b: Complex64,
    pub b2: Complex64,
    pub n: f64,
    pub n2: f64,
    pub pn: Vec<f64>,
}

impl ModeMoments {
    pub fn zero(pn_len: usize) -> Self {
        ModeMoments {
            b: Complex64::new(0.0, 0.0),
            b2: Complex64::new(0.0, 0.0),
            n: 0.0,
            n2: 0.0,
            pn: vec![0.0; pn_len],
        }
    }

    pub fn add_weighted(&mut self, other: &ModeMoments, w: f64) {
        self.b += w * other.b;
        self.b2 += w * other.b2;
        self.n += w * other.n;
        self.n2 += w * other.n2;
        for (a, b) in self.pn.iter_mut().zip(&other.pn) {
            *a += w * b;
        }
    }

    pub fn mean_n(&self) -> f64 {
        self.n
    }

    /// Var(x) = Re<b^2> + <n> + 1/2 - 2 (Re<b>)^2.
    pub fn var_x(&self) -> f64 {
        self.b2.re + self.n + 0.5 - 2.0 * self.b.re * self.b.re
    }

    /// Var(p) = -Re<b^2> + <n> + 1/2 - 2 (Im<b>)^2.
    pub fn var_p(&self) -> f64 {
        -self.b2.re + self.n + 0.5 - 2.0 * self.b.im * self.b.im
    }

    /// Fano factor Var(n)/<n>; NaN at <n> = 0 by convention.
    pub fn fano(&self) -> f64 {
        (self.n2 - self.n * self.n) / self.n
    }
}

const NO_INDEX: u32 = u32::MAX;

/// Precomputed index tables for O(dim) moment evaluation: per mode, the
/// occupation of each basis state and the indices of the once- and
/// twice-lowered tuples.
#[derive(Debug)]
pub struct MomentTables {
    occ: Vec<Vec<u32>>,
    low1: Vec<Vec<u32>>,
    low2: Vec<Vec<u32>>,
    pn_len: Vec<usize>,
}

impl MomentTables {
    pub fn new(space: &FockSpace) -> Self {
        let m = space.mode_count();
        let dim = space.dim();
        let mut occ = vec![vec![0u32; dim]; m];
        let mut low1 = vec![vec![NO_INDEX; dim]; m];
        let mut low2 = vec![vec![NO_INDEX; dim]; m];
        for mode in 0..m {
            for i in 0..dim {
                occ[mode][i] = space.tuple(i)[mode];
                if let Some(j) = space.lowered(i, mode) {
                    low1[mode][i] = j as u32;
                }
            }
            for i in 0..dim {
                let j = low1[mode][i];
                if j != NO_INDEX && low1[mode][j as usize] != NO_INDEX {
                    low2[mode][i] = low1[mode][j as usize];
                }
            }
        }
        let pn_len = space.max_occ().iter().map(|&c| c as usize + 1).collect();
        MomentTables {
            occ,
            low1,
            low2,
            pn_len,
        }
    }

    pub fn mode_count(&self) -> usize {
        self.occ.len()
    }

    pub fn pn_len(&self, mode: usize) -> usize {
        self.pn_len[mode]
    }

    /// Moments of one mode for a normalized amplitude vector.
    pub fn mode_moments(&self, mode: usize, amp: &[Complex64]) -> ModeMoments {
        let mut mm = ModeMoments::zero(self.pn_len[mode]);
        let occ = &self.occ[mode];
        let low1 = &self.low1[mode];
        let low2 = &self.low2[mode];
        for i in 0..amp.len() {
            let a = amp[i];
            let p = a.norm_sqr();
            let n = occ[i] as f64;
            mm.n += n * p;
            mm.n2 += n * n * p;
            mm.pn[occ[i] as usize] += p;
            let j = low1[i];
            if j != NO_INDEX {
                mm.b += n.sqrt() * amp[j as usize].conj() * a;
            }
            let k = low2[i];
            if k != NO_INDEX {
                mm.b2 += (n * (n - 1.0)).sqrt() * amp[k as usize].conj() * a;
            }
        }
        mm
    }
}

/// <n_mode> of a pure state.
pub fn mean_photon(psi: &PureState, mode: usize) -> Result<f64> {
    check_mode(psi.space(), mode)?;
    let amp = psi.amplitudes();
    Ok((0..amp.len())
        .map(|i| psi.space().tuple(i)[mode] as f64 * amp[i].norm_sqr())
        .sum())
}

/// P(n) for one mode of a pure state, length max_occ+1.
pub fn photon_distribution(psi: &PureState, mode: usize) -> Result<Vec<f64>> {
    check_mode(psi.space(), mode)?;
    let mut pn = vec![0.0; psi.space().max_occ()[mode] as usize + 1];
    for (i, a) in psi.amplitudes().iter().enumerate() {
        pn[psi.space().tuple(i)[mode] as usize] += a.norm_sqr();
    }
    Ok(pn)
}

/// Clamps tiny negative probabilities (>= -1e-12) to zero and renormalizes.
/// A more negative entry signals a solver failure and is an error.
pub fn clamp_probabilities(pn: &mut [f64]) -> Result<()> {
    for p in pn.iter_mut() {
        if *p < -1e-12 {
            return Err(SimError::Numerical(format!(
                "probability {p} below the -1e-12 clamp threshold"
            )));
        }
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pn.iter().sum();
    if total <= 0.0 {
        return Err(SimError::Numerical("zero total probability".into()));
    }
    for p in pn.iter_mut() {
        *p /= total;
    }
    Ok(())
}

/// P(n) for a single-mode reduced density matrix (diagonal, clamped).
pub fn photon_distribution_rho(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let mut pn: Vec<f64> = (0..rho.dim()).map(|n| rho.mat[(n, n)].re).collect();
    clamp_probabilities(&mut pn)?;
    Ok(pn)
}

/// Full moments of one mode of a pure state.
pub fn pure_mode_moments(psi: &PureState, mode: usize) -> Result<ModeMoments> {
    check_mode(psi.space(), mode)?;
    let tables = MomentTables::new(psi.space());
    Ok(tables.mode_moments(mode, psi.amplitudes()))
}

/// (Var x, Var p) of one mode of a pure state.
pub fn quadrature_variances(psi: &PureState, mode: usize) -> Result<(f64, f64)> {
    let mm = pure_mode_moments(psi, mode)?;
    Ok((mm.var_x(), mm.var_p()))
}

/// Fano factor Var(n)/<n> of one mode of a pure state. Undefined (an
/// error, not a NaN) when the mode is essentially in vacuum.
pub fn fano_factor(psi: &PureState, mode: usize) -> Result<f64> {
    let mm = pure_mode_moments(psi, mode)?;
    if mm.n <= 1e-12 {
        return Err(SimError::Numerical(
            "Fano factor undefined at <n> = 0".into(),
        ));
    }
    Ok(mm.fano())
}

/// Moments of a single-mode reduced density matrix (number basis).
pub fn rho_mode_moments(rho: &DensityMatrix) -> Result<ModeMoments> {
    match &rho.label {
        StateLabel::Modes { modes, .. } if modes.len() == 1 => {}
        _ => {
            return Err(SimError::InvalidConfig(
                "expected a single-mode reduced density matrix".into(),
            ))
        }
    }
    let d = rho.dim();
    let mut mm = ModeMoments::zero(d);
    for n in 0..d {
        let p = rho.mat[(n, n)].re;
        mm.pn[n] = p;
        mm.n += n as f64 * p;
        mm.n2 += (n as f64) * (n as f64) * p;
        // <b> = Tr(rho b) = sum_n sqrt(n) <n|rho|n-1>
        if n >= 1 {
            mm.b += (n as f64).sqrt() * rho.mat[(n, n - 1)];
        }
        if n >= 2 {
            mm.b2 += ((n * (n - 1)) as f64).sqrt() * rho.mat[(n, n - 2)];
        }
    }
    Ok(mm)
}

/// Schmidt number K = 1 / sum_k lambda_k^2 of a reduced density matrix,
/// i.e. 1/Tr[rho^2] expressed through its eigenvalues.
pub fn schmidt_number(rho: &DensityMatrix) -> Result<f64> {
    let (vals, _) = hermitian_eigen(&rho.mat);
    let s2: f64 = vals.iter().map(|&l| l * l).sum();
    if s2 <= 0.0 {
        return Err(SimError::Numerical("zero purity".into()));
    }
    Ok(1.0 / s2)
}

/// Schmidt number of a pure three-mode state across the {pumps | mode 3}
/// bipartition: K = 1/Tr[rho_3^2].
pub fn schmidt_number_pure(psi: &PureState) -> Result<f64> {
    let rho3 = crate::states::partial_trace_pure(psi, &[2])?;
    schmidt_number(&rho3)
}

fn check_mode(space: &FockSpace, mode: usize) -> Result<()> {
    if mode >= space.mode_count() {
        return Err(SimError::InvalidMode(mode));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::build_space;
    use crate::states::{coherent_product_state_with_loss, partial_trace_pure, to_density};

    fn coherent(alpha: Complex64, cap: u32) -> PureState {
        let space = build_space(&[cap], None).unwrap();
        coherent_product_state_with_loss(&space, &[alpha], 1e-9)
            .unwrap()
            .0
    }

    #[test]
    fn coherent_state_moments() {
        let alpha = Complex64::from_polar(1.3, 0.7);
        let psi = coherent(alpha, 25);
        let mm = pure_mode_moments(&psi, 0).unwrap();
        // <b> = alpha, <b^2> = alpha^2, Poisson n-statistics, Fano = 1
        assert!((mm.b - alpha).norm() < 1e-7);
        assert!((mm.b2 - alpha * alpha).norm() < 1e-7);
        assert!((mm.n - alpha.norm_sqr()).abs() < 1e-7);
        assert!((mm.fano() - 1.0).abs() < 1e-6);
        // minimum-uncertainty quadratures
        assert!((mm.var_x() - 0.5).abs() < 1e-6);
        assert!((mm.var_p() - 0.5).abs() < 1e-6);
        let pn = photon_distribution(&psi, 0).unwrap();
        assert!((pn.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((pn[0] - (-alpha.norm_sqr()).exp()).abs() < 1e-9);
    }

    #[test]
    fn fock_state_moments() {
        let space = build_space(&[5], None).unwrap();
        let mut amp = vec![Complex64::new(0.0, 0.0); 6];
        amp[space.index_of(&[3]).unwrap()] = Complex64::new(1.0, 0.0);
        let psi = PureState::from_amplitudes(space, amp).unwrap();
        let mm = pure_mode_moments(&psi, 0).unwrap();
        assert_eq!(mm.n, 3.0);
        assert!(mm.b.norm() < 1e-15);
        // Var x = Var p = n + 1/2, Fano = 0
        assert!((mm.var_x() - 3.5).abs() < 1e-12);
        assert!((mm.var_p() - 3.5).abs() < 1e-12);
        assert!((mm.n2 - 9.0).abs() < 1e-12);
        assert!(mm.fano().abs() < 1e-12);
    }

    #[test]
    fn rho_moments_match_pure_moments() {
        let space = build_space(&[6, 6], None).unwrap();
        let a = Complex64::from_polar(0.9, 0.4);
        let b = Complex64::from_polar(0.6, 1.9);
        let (psi, _) = coherent_product_state_with_loss(&space, &[a, b], 1e-4).unwrap();
        let rho1 = partial_trace_pure(&psi, &[1]).unwrap();
        let mm_rho = rho_mode_moments(&rho1).unwrap();
        let mm_pure = pure_mode_moments(&psi, 1).unwrap();
        assert!((mm_rho.b - mm_pure.b).norm() < 1e-10);
        assert!((mm_rho.b2 - mm_pure.b2).norm() < 1e-10);
        assert!((mm_rho.n - mm_pure.n).abs() < 1e-10);
        assert!((mm_rho.n2 - mm_pure.n2).abs() < 1e-10);
    }

    #[test]
    fn schmidt_number_limits() {
        let space = build_space(&[1, 1], None).unwrap();
        // product state: K = 1
        let mut amp = vec![Complex64::new(0.0, 0.0); 4];
        amp[space.index_of(&[1, 0]).unwrap()] = Complex64::new(1.0, 0.0);
        let psi = PureState::from_amplitudes(space.clone(), amp).unwrap();
        let k = schmidt_number(&partial_trace_pure(&psi, &[0]).unwrap()).unwrap();
        assert!((k - 1.0).abs() < 1e-10);
        // Bell-like state: K = 2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amp = vec![Complex64::new(0.0, 0.0); 4];
        amp[space.index_of(&[0, 0]).unwrap()] = Complex64::new(s, 0.0);
        amp[space.index_of(&[1, 1]).unwrap()] = Complex64::new(s, 0.0);
        let psi = PureState::from_amplitudes(space, amp).unwrap();
        let k = schmidt_number(&partial_trace_pure(&psi, &[0]).unwrap()).unwrap();
        assert!((k - 2.0).abs() < 1e-10);
        // K = 1/Tr[rho^2] for any state
        let rho = to_density(&psi);
        let k_full = schmidt_number(&rho).unwrap();
        assert!((k_full - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fano_undefined_in_vacuum() {
        let space = build_space(&[12, 12, 4], None).unwrap();
        let a = Complex64::from_polar(1.0, 0.3);
        let zero = Complex64::new(0.0, 0.0);
        let (psi, _) = coherent_product_state_with_loss(&space, &[a, a, zero], 1e-6).unwrap();
        assert!((fano_factor(&psi, 0).unwrap() - 1.0).abs() < 1e-5);
        assert!(fano_factor(&psi, 2).is_err());
    }

    #[test]
    fn probability_clamping() {
        let mut p = vec![0.6, -1e-13, 0.4];
        clamp_probabilities(&mut p).unwrap();
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let mut bad = vec![0.9, -1e-6];
        assert!(clamp_probabilities(&mut bad).is_err());
    }

    #[test]
    fn schmidt_pure_matches_both_partitions() {
        let space = build_space(&[3, 3, 4], Some(6)).unwrap();
        let amp: Vec<Complex64> = (0..space.dim())
            .map(|i| Complex64::new((i as f64 * 0.23).sin() + 0.2, (i as f64 * 0.71).cos()))
            .collect();
        let psi = PureState::from_amplitudes(space, amp).unwrap();
        let k = schmidt_number_pure(&psi).unwrap();
        assert!(k >= 1.0 - 1e-6);
        let rho12 = partial_trace_pure(&psi, &[0, 1]).unwrap();
        let k12 = schmidt_number(&rho12).unwrap();
        assert!((k - k12).abs() < 1e-6 * k);
    }

    #[test]
    fn tables_agree_with_direct() {
        let space = build_space(&[3, 2, 4], Some(5)).unwrap();
        let amp: Vec<Complex64> = (0..space.dim())
            .map(|i| Complex64::new((i as f64 * 0.31).sin(), (i as f64 * 0.57).cos()))
            .collect();
        let psi = PureState::from_amplitudes(space.clone(), amp).unwrap();
        let tables = MomentTables::new(&space);
        for mode in 0..3 {
            let mm = tables.mode_moments(mode, psi.amplitudes());
            assert!((mm.n - mean_photon(&psi, mode).unwrap()).abs() < 1e-12);
            let pn = photon_distribution(&psi, mode).unwrap();
            for (a, b) in mm.pn.iter().zip(&pn) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
