//! Pure states, density matrices, partial trace, purity, and fidelity.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::fock::FockSpace;
use crate::linalg::{matrix_sqrt_psd, max_hermiticity_violation};
use crate::{Result, SimError};

/// Default ceiling on coherent-state probability mass lost to truncation.
pub const DEFAULT_MAX_TRUNCATION_LOSS: f64 = 1e-4;

/// Normalized complex amplitude vector over a Fock basis.
#[derive(Debug, Clone)]
pub struct PureState {
    space: Arc<FockSpace>,
    amp: Vec<Complex64>,
}

impl PureState {
    pub fn from_amplitudes(space: Arc<FockSpace>, amp: Vec<Complex64>) -> Result<Self> {
        if amp.len() != space.dim() {
            return Err(SimError::DimensionMismatch {
                a: amp.len(),
                b: space.dim(),
            });
        }
        let mut s = PureState { space, amp };
        let n = s.norm();
        if n == 0.0 {
            return Err(SimError::Numerical("zero state vector".into()));
        }
        if (n - 1.0).abs() > 1e-8 {
            s.normalize();
        }
        Ok(s)
    }

    pub fn vacuum(space: Arc<FockSpace>) -> Self {
        let mut amp = vec![Complex64::new(0.0, 0.0); space.dim()];
        amp[0] = Complex64::new(1.0, 0.0);
        PureState { space, amp }
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amp
    }

    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            for a in &mut self.amp {
                *a *= inv;
            }
        }
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amp
            .iter()
            .zip(&other.amp)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Hermitian unit-trace matrix, either over the full Fock basis or over the
/// product basis of a kept subset of modes.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub mat: DMatrix<Complex64>,
    pub label: StateLabel,
}

#[derive(Debug, Clone)]
pub enum StateLabel {
    Full(Arc<FockSpace>),
    /// Reduced over `modes` (ascending); dims[k] = max_occ[modes[k]] + 1,
    /// basis is row-major mixed radix over the kept modes.
    Modes {
        modes: Vec<usize>,
        dims: Vec<usize>,
    },
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.diagonal().iter().sum()
    }

    /// Tr[rho^2]; for Hermitian rho this is the squared Frobenius norm.
    pub fn purity_value(&self) -> f64 {
        self.mat.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Hermiticity/trace sanity checks (PSD is checked separately, it costs
    /// an eigendecomposition).
    pub fn validate(&self) -> Result<()> {
        let herm = max_hermiticity_violation(&self.mat);
        if herm > 1e-10 {
            return Err(SimError::Numerical(format!(
                "density matrix hermiticity violation {herm:.3e}"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(SimError::Numerical(format!(
                "density matrix trace {tr} deviates from 1"
            )));
        }
        Ok(())
    }

    pub fn check_psd(&self, tol: f64) -> Result<()> {
        let min = crate::linalg::min_eigenvalue(&self.mat);
        if min < -tol {
            return Err(SimError::Numerical(format!(
                "density matrix has eigenvalue {min:.3e} below -{tol:.1e}"
            )));
        }
        Ok(())
    }
}

/// Product of truncated coherent states, one amplitude per mode (alpha = 0
/// gives the vacuum for that mode). Returns the renormalized state and the
/// probability mass lost to truncation.
pub fn coherent_product_state(
    space: &Arc<FockSpace>,
    alphas: &[Complex64],
) -> Result<(PureState, f64)> {
    coherent_product_state_with_loss(space, alphas, DEFAULT_MAX_TRUNCATION_LOSS)
}

pub fn coherent_product_state_with_loss(
    space: &Arc<FockSpace>,
    alphas: &[Complex64],
    max_loss: f64,
) -> Result<(PureState, f64)> {
    if alphas.len() != space.mode_count() {
        return Err(SimError::DimensionMismatch {
            a: alphas.len(),
            b: space.mode_count(),
        });
    }
    // per-mode coefficient tables c_n = e^{-|a|^2/2} a^n / sqrt(n!)
    let coeffs: Vec<Vec<Complex64>> = alphas
        .iter()
        .zip(space.max_occ())
        .map(|(&a, &cap)| {
            let mut v = Vec::with_capacity(cap as usize + 1);
            let mut c = Complex64::new((-a.norm_sqr() / 2.0).exp(), 0.0);
            v.push(c);
            for n in 1..=cap as usize {
                c *= a / (n as f64).sqrt();
                v.push(c);
            }
            v
        })
        .collect();
    let mut amp = Vec::with_capacity(space.dim());
    for i in 0..space.dim() {
        let t = space.tuple(i);
        let mut a = Complex64::new(1.0, 0.0);
        for (j, &n) in t.iter().enumerate() {
            a *= coeffs[j][n as usize];
        }
        amp.push(a);
    }
    let norm_sq: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
    let lost = 1.0 - norm_sq;
    if lost > max_loss {
        return Err(SimError::TruncationLoss {
            lost,
            max: max_loss,
        });
    }
    let inv = 1.0 / norm_sq.sqrt();
    for a in &mut amp {
        *a *= inv;
    }
    Ok((PureState { space: space.clone(), amp }, lost))
}

/// rho = |psi><psi| over the full basis.
pub fn to_density(psi: &PureState) -> DensityMatrix {
    let d = psi.amp.len();
    let v = nalgebra::DVector::from_column_slice(&psi.amp);
    let mat = &v * v.adjoint();
    let _ = d;
    DensityMatrix {
        mat,
        label: StateLabel::Full(psi.space.clone()),
    }
}

fn keep_layout(space: &FockSpace, keep: &[usize]) -> Result<(Vec<usize>, Vec<usize>, usize)> {
    if keep.is_empty() || keep.len() >= space.mode_count() {
        return Err(SimError::InvalidConfig(
            "keep must be a non-empty proper subset of modes".into(),
        ));
    }
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() || *sorted.last().unwrap() >= space.mode_count() {
        return Err(SimError::InvalidConfig("invalid mode subset".into()));
    }
    let dims: Vec<usize> = sorted.iter().map(|&m| space.max_occ()[m] as usize + 1).collect();
    let red_dim = dims.iter().product();
    Ok((sorted, dims, red_dim))
}

fn reduced_index(tuple: &[u32], keep: &[usize], dims: &[usize]) -> usize {
    let mut idx = 0;
    for (k, &m) in keep.iter().enumerate() {
        idx = idx * dims[k] + tuple[m] as usize;
    }
    idx
}

fn traced_key(tuple: &[u32], keep: &[usize], mode_count: usize) -> u64 {
    let mut key = 0u64;
    for m in 0..mode_count {
        if !keep.contains(&m) {
            key = key * 4096 + tuple[m] as u64;
        }
    }
    key
}

/// Groups basis indices by the traced-out configuration. Each group lists
/// (reduced index, basis index).
fn trace_groups(space: &FockSpace, keep: &[usize], dims: &[usize]) -> Vec<Vec<(usize, usize)>> {
    use std::collections::HashMap;
    let mut groups: HashMap<u64, Vec<(usize, usize)>> = HashMap::new();
    for i in 0..space.dim() {
        let t = space.tuple(i);
        let r = reduced_index(t, keep, dims);
        groups
            .entry(traced_key(t, keep, space.mode_count()))
            .or_default()
            .push((r, i));
    }
    let mut v: Vec<_> = groups.into_values().collect();
    // deterministic order (first basis index)
    v.sort_unstable_by_key(|g| g.iter().map(|&(_, i)| i).min().unwrap());
    v
}

/// Reduced density matrix of a global pure state over the kept modes.
pub fn partial_trace_pure(psi: &PureState, keep: &[usize]) -> Result<DensityMatrix> {
    let (keep, dims, red_dim) = keep_layout(&psi.space, keep)?;
    let mut mat = DMatrix::zeros(red_dim, red_dim);
    for group in trace_groups(&psi.space, &keep, &dims) {
        for &(r1, i1) in &group {
            let a1 = psi.amp[i1];
            if a1 == Complex64::new(0.0, 0.0) {
                continue;
            }
            for &(r2, i2) in &group {
                mat[(r1, r2)] += a1 * psi.amp[i2].conj();
            }
        }
    }
    Ok(DensityMatrix {
        mat,
        label: StateLabel::Modes { modes: keep, dims },
    })
}

/// Reduced density matrix of a full-basis density matrix.
pub fn partial_trace_rho(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let space = match &rho.label {
        StateLabel::Full(s) => s.clone(),
        StateLabel::Modes { .. } => {
            return Err(SimError::InvalidConfig(
                "partial trace input must be a full-basis density matrix".into(),
            ))
        }
    };
    let (keep, dims, red_dim) = keep_layout(&space, keep)?;
    let mut mat = DMatrix::zeros(red_dim, red_dim);
    for group in trace_groups(&space, &keep, &dims) {
        for &(r1, i1) in &group {
            for &(r2, i2) in &group {
                mat[(r1, r2)] += rho.mat[(i1, i2)];
            }
        }
    }
    Ok(DensityMatrix {
        mat,
        label: StateLabel::Modes { modes: keep, dims },
    })
}

/// Tr[rho^2].
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity_value()
}

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, computed via
/// Hermitian eigendecompositions with negative-eigenvalue clamping.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(SimError::DimensionMismatch {
            a: rho.dim(),
            b: sigma.dim(),
        });
    }
    // F = ||sqrt(rho) sqrt(sigma)||_1^2; the nuclear norm via SVD is
    // accurate at the singular-value scale, unlike eigenvalues of
    // sqrt(rho) sigma sqrt(rho), which carry noise at the squared scale
    let m = matrix_sqrt_psd(&rho.mat, 1e-10) * matrix_sqrt_psd(&sigma.mat, 1e-10);
    let tr: f64 = m.singular_values().iter().sum();
    Ok(tr * tr)
}

/// Fidelity <psi|sigma|psi> for a pure state against a density matrix.
pub fn fidelity_pure(psi: &[Complex64], sigma: &DensityMatrix) -> Result<f64> {
    if psi.len() != sigma.dim() {
        return Err(SimError::DimensionMismatch {
            a: psi.len(),
            b: sigma.dim(),
        });
    }
    let v = nalgebra::DVector::from_column_slice(psi);
    let f = (v.adjoint() * &sigma.mat * &v)[(0, 0)];
    Ok(f.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::build_space;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn coherent_vacuum_and_poisson() {
        let space = build_space(&[20], None).unwrap();
        let (vac, lost) = coherent_product_state(&space, &[c(0.0, 0.0)]).unwrap();
        assert_eq!(lost, 0.0);
        assert!((vac.amplitudes()[0].re - 1.0).abs() < 1e-15);
        // alpha = 3 e^{i pi/4}: P(9) = e^-9 9^9/9!
        let a = Complex64::from_polar(3.0, std::f64::consts::FRAC_PI_4);
        let (st, lost) = coherent_product_state_with_loss(&space, &[a], 1e-2).unwrap();
        assert!(lost < 1e-2);
        let p9 = st.amplitudes()[space.index_of(&[9]).unwrap()].norm_sqr();
        let expect = (-9.0_f64).exp() * 9.0_f64.powi(9) / (362880.0);
        assert!((p9 - expect).abs() < 1e-4, "p9={p9} expect={expect}");
        assert!((expect - 0.13176).abs() < 1e-5);
    }

    #[test]
    fn coherent_truncation_loss_rejected() {
        let space = build_space(&[3], None).unwrap();
        let a = Complex64::from_polar(1.0, 0.0);
        let err = coherent_product_state(&space, &[a]).unwrap_err();
        assert!(matches!(err, SimError::TruncationLoss { .. }));
    }

    #[test]
    fn paper_initial_state_mean_photons() {
        let space = build_space(&[27, 27, 38], Some(42)).unwrap();
        let a = Complex64::from_polar(3.0, std::f64::consts::FRAC_PI_4);
        let (st, lost) = coherent_product_state(&space, &[a, a, c(0.0, 0.0)]).unwrap();
        assert!(lost < 1e-4);
        for (mode, expect) in [(0usize, 9.0), (1, 9.0), (2, 0.0)] {
            let n: f64 = (0..space.dim())
                .map(|i| space.tuple(i)[mode] as f64 * st.amplitudes()[i].norm_sqr())
                .sum();
            assert!((n - expect).abs() < 1e-4, "mode {mode}: {n}");
        }
    }

    #[test]
    fn density_from_pure() {
        let space = build_space(&[2], None).unwrap();
        let amp = vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)];
        let psi = PureState::from_amplitudes(space, amp).unwrap();
        let rho = to_density(&psi);
        rho.validate().unwrap();
        assert!((purity(&rho) - 1.0).abs() < 1e-10);
        assert!((rho.mat[(0, 1)] - rho.mat[(1, 0)].conj()).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_product_and_bell() {
        let space = build_space(&[1, 1], None).unwrap();
        // product state |1>|0>
        let mut amp = vec![c(0.0, 0.0); 4];
        amp[space.index_of(&[1, 0]).unwrap()] = c(1.0, 0.0);
        let psi = PureState::from_amplitudes(space.clone(), amp).unwrap();
        let r0 = partial_trace_pure(&psi, &[0]).unwrap();
        assert!((r0.mat[(1, 1)].re - 1.0).abs() < 1e-12);
        assert!((r0.trace().re - 1.0).abs() < 1e-12);
        // Bell-like (|0,0> + |1,1>)/sqrt(2): reduced purity 1/2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amp = vec![c(0.0, 0.0); 4];
        amp[space.index_of(&[0, 0]).unwrap()] = c(s, 0.0);
        amp[space.index_of(&[1, 1]).unwrap()] = c(s, 0.0);
        let psi = PureState::from_amplitudes(space, amp).unwrap();
        let r = partial_trace_pure(&psi, &[1]).unwrap();
        assert!((purity(&r) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn purity_duality_for_global_pure() {
        // random-ish 3-mode pure state: purity of rho_12 equals purity of rho_3
        let space = build_space(&[2, 2, 3], Some(4)).unwrap();
        let amp: Vec<Complex64> = (0..space.dim())
            .map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 0.71).cos()))
            .collect();
        let psi = PureState::from_amplitudes(space, amp).unwrap();
        let p12 = purity(&partial_trace_pure(&psi, &[0, 1]).unwrap());
        let p3 = purity(&partial_trace_pure(&psi, &[2]).unwrap());
        assert!((p12 - p3).abs() < 1e-8);
    }

    #[test]
    fn fidelity_basics() {
        let space = build_space(&[25], None).unwrap();
        let a = Complex64::from_polar(0.8, 0.3);
        let b = Complex64::from_polar(0.5, 1.1);
        let (sa, _) = coherent_product_state(&space, &[a]).unwrap();
        let (sb, _) = coherent_product_state(&space, &[b]).unwrap();
        let ra = to_density(&sa);
        let rb = to_density(&sb);
        assert!((fidelity(&ra, &ra).unwrap() - 1.0).abs() < 1e-8);
        // coherent overlap: F = exp(-|a-b|^2)
        let f = fidelity(&ra, &rb).unwrap();
        let expect = (-(a - b).norm_sqr()).exp();
        assert!((f - expect).abs() < 1e-6, "f={f} expect={expect}");
        // symmetry
        let fr = fidelity(&rb, &ra).unwrap();
        assert!((f - fr).abs() < 1e-8);
        // orthogonal states
        let space2 = build_space(&[1], None).unwrap();
        let mut m0 = DMatrix::zeros(2, 2);
        m0[(0, 0)] = c(1.0, 0.0);
        let mut m1 = DMatrix::zeros(2, 2);
        m1[(1, 1)] = c(1.0, 0.0);
        let l = StateLabel::Modes { modes: vec![0], dims: vec![2] };
        let _ = space2;
        let r0 = DensityMatrix { mat: m0, label: l.clone() };
        let r1 = DensityMatrix { mat: m1, label: l };
        assert!(fidelity(&r0, &r1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fidelity_pure_agrees_with_general() {
        let space = build_space(&[4], None).unwrap();
        let (psi, _) = coherent_product_state_with_loss(
            &space,
            &[Complex64::from_polar(0.7, 0.2)],
            1e-2,
        )
        .unwrap();
        let rho = to_density(&psi);
        // sigma maximally mixed
        let d = space.dim();
        let sigma = DensityMatrix {
            mat: DMatrix::from_diagonal(&nalgebra::DVector::from_element(
                d,
                c(1.0 / d as f64, 0.0),
            )),
            label: StateLabel::Full(space.clone()),
        };
        let f_pure = fidelity_pure(psi.amplitudes(), &sigma).unwrap();
        assert!((f_pure - 1.0 / d as f64).abs() < 1e-12);
        let f_gen = fidelity(&rho, &sigma).unwrap();
        assert!((f_pure - f_gen).abs() < 1e-8);
        assert!((fidelity_pure(psi.amplitudes(), &rho).unwrap() - 1.0).abs() < 1e-10);
    }
}
