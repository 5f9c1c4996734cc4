//! Dense Lindblad master-equation integration (small spaces only).
//!
//! d rho / d tau = -i [H, rho] + sum_j C_j rho C_j+ - (1/2){C_j+ C_j, rho}
//!
//! As in the pure-state solver, the (stiff) diagonal D of H is removed
//! analytically: the equation is integrated for the rotated matrix
//! rho~ = e^{iD tau} rho e^{-iD tau}, in which every operator entry picks up
//! the phase e^{i (d_r - d_c) tau} and the commutator involves only the
//! off-diagonal part of H. The density matrix is flattened row-major and
//! integrated with the same adaptive Runge-Kutta scheme as the pure-state
//! solver. Intended as an independent cross-check for the trajectory
//! unravelling, so it shares no propagation machinery with it beyond the
//! generic integrator.

use num_complex::Complex64;

use crate::dynamics::rk45::{Rk45, StepStats};
use crate::dynamics::{validate_grid, EvolutionResult, SolverMeta, SolverTol};
use crate::sparse::SparseOperator;
use crate::states::DensityMatrix;
use crate::{Result, SimError};

/// Dense propagation refuses spaces above this dimension (memory is dim^2).
pub const DEFAULT_DENSE_LIMIT: usize = 512;

/// A sparse operator in the rotating frame of the Hamiltonian diagonal D:
/// entry (r, c, v) acts as v e^{i (d_r - d_c) t} at time t.
struct PhasedOp {
    entries: Vec<(u32, u32, Complex64, f64)>,
}

impl PhasedOp {
    fn new(a: &SparseOperator, diag: &[f64]) -> Self {
        let entries = a
            .entries()
            .map(|(r, c, v)| (r, c, v, diag[r as usize] - diag[c as usize]))
            .collect();
        PhasedOp { entries }
    }

    /// Same frame rotation applied to the adjoint operator.
    fn dagger(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, v, d)| (c, r, v.conj(), -d))
            .collect();
        PhasedOp { entries }
    }

    /// y += alpha * (A(t) x) where x, y are dim x dim row-major:
    /// left multiplication acts on whole rows.
    fn left_add(&self, t: f64, alpha: Complex64, x: &[Complex64], y: &mut [Complex64], dim: usize) {
        for &(r, c, v, d) in &self.entries {
            let w = alpha * v * Complex64::from_polar(1.0, d * t);
            let src = &x[c as usize * dim..(c as usize + 1) * dim];
            let dst = &mut y[r as usize * dim..(r as usize + 1) * dim];
            for i in 0..dim {
                dst[i] += w * src[i];
            }
        }
    }

    /// y += alpha * (x A(t)): right multiplication mixes columns.
    fn right_add(
        &self,
        t: f64,
        alpha: Complex64,
        x: &[Complex64],
        y: &mut [Complex64],
        dim: usize,
    ) {
        for &(r, c, v, d) in &self.entries {
            let w = alpha * v * Complex64::from_polar(1.0, d * t);
            for i in 0..dim {
                y[i * dim + c as usize] += w * x[i * dim + r as usize];
            }
        }
    }
}

/// Integrates the Lindblad equation for `rho0` (full-basis density matrix)
/// and returns trace-normalized, Hermitized snapshots at the grid points.
pub fn evolve_lindblad_dense(
    h: &SparseOperator,
    collapse: &[SparseOperator],
    rho0: &DensityMatrix,
    tau_grid: &[f64],
    tol: SolverTol,
) -> Result<EvolutionResult<DensityMatrix>> {
    evolve_lindblad_dense_with_limit(h, collapse, rho0, tau_grid, tol, DEFAULT_DENSE_LIMIT)
}

pub fn evolve_lindblad_dense_with_limit(
    h: &SparseOperator,
    collapse: &[SparseOperator],
    rho0: &DensityMatrix,
    tau_grid: &[f64],
    tol: SolverTol,
    dense_limit: usize,
) -> Result<EvolutionResult<DensityMatrix>> {
    validate_grid(tau_grid)?;
    let dim = rho0.dim();
    if dim > dense_limit {
        return Err(SimError::DenseLimit {
            dim,
            limit: dense_limit,
        });
    }
    if h.dim() != dim {
        return Err(SimError::DimensionMismatch { a: h.dim(), b: dim });
    }
    for c_op in collapse {
        if c_op.dim() != dim {
            return Err(SimError::DimensionMismatch {
                a: c_op.dim(),
                b: dim,
            });
        }
    }
    h.check_hermitian(1e-10 * h.max_abs().max(1.0))?;
    rho0.validate()?;

    // rotating frame of the Hamiltonian diagonal: only the off-diagonal
    // part of H enters the commutator, with oscillating entry phases
    let diag: Vec<f64> = h.diagonal().iter().map(|d| d.re).collect();
    let v_entries: Vec<(u32, u32, Complex64)> = h
        .entries()
        .filter(|&(r, c, _)| r != c)
        .collect();
    let v_op = SparseOperator::from_triplets(dim, v_entries.clone(), false);
    let v_ph = PhasedOp::new(&v_op, &diag);
    let c_phs: Vec<PhasedOp> = collapse.iter().map(|c| PhasedOp::new(c, &diag)).collect();
    let cdag_phs: Vec<PhasedOp> = c_phs.iter().map(PhasedOp::dagger).collect();
    // K = C+ C commutes with nothing special in general, so it is rotated too
    let k_phs: Vec<PhasedOp> = collapse
        .iter()
        .map(|c| PhasedOp::new(&c.dagger().matmul(c), &diag))
        .collect();

    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let minus_i = Complex64::new(0.0, -1.0);
    let plus_i = Complex64::new(0.0, 1.0);
    let half = Complex64::new(0.5, 0.0);

    let mut y: Vec<Complex64> = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        for c in 0..dim {
            y.push(rho0.mat[(r, c)]);
        }
    }

    let mut tmp = vec![zero; dim * dim];
    let mut rhs = move |t: f64, x: &[Complex64], dx: &mut [Complex64]| {
        for d in dx.iter_mut() {
            *d = zero;
        }
        // -i [V(t), x]
        v_ph.left_add(t, minus_i, x, dx, dim);
        v_ph.right_add(t, plus_i, x, dx, dim);
        for j in 0..c_phs.len() {
            // C(t) x C(t)+
            for w in tmp.iter_mut() {
                *w = zero;
            }
            c_phs[j].left_add(t, one, x, &mut tmp, dim);
            cdag_phs[j].right_add(t, one, &tmp, dx, dim);
            // -(1/2)(K(t) x + x K(t))
            k_phs[j].left_add(t, -half, x, dx, dim);
            k_phs[j].right_add(t, -half, x, dx, dim);
        }
    };

    let rk = Rk45 {
        rtol: tol.rtol,
        atol: tol.atol,
        ..Default::default()
    };
    let mut stats = StepStats::default();
    let mut meta = SolverMeta::default();
    let mut states = Vec::with_capacity(tau_grid.len());
    let mut hstep = 0.0;

    let diag_emit = diag.clone();
    let emit = |tau: f64, y: &[Complex64], meta: &mut SolverMeta, states: &mut Vec<DensityMatrix>| {
        // rotate back to the lab frame: rho = e^{-iD tau} rho~ e^{iD tau}
        let mut mat = nalgebra::DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                let ph = Complex64::from_polar(1.0, -(diag_emit[r] - diag_emit[c]) * tau);
                mat[(r, c)] = y[r * dim + c] * ph;
            }
        }
        // Hermitize and renormalize; record how far the raw trace drifted
        let mat = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
        let tr: Complex64 = mat.diagonal().iter().sum();
        meta.max_norm_drift = meta.max_norm_drift.max((tr.re - 1.0).abs().max(tr.im.abs()));
        states.push(DensityMatrix {
            mat: mat / tr,
            label: rho0.label.clone(),
        });
    };

    emit(tau_grid[0], &y, &mut meta, &mut states);
    for w in 1..tau_grid.len() {
        rk.integrate(&mut rhs, &mut y, tau_grid[w - 1], tau_grid[w], &mut hstep, &mut stats)?;
        emit(tau_grid[w], &y, &mut meta, &mut states);
    }
    meta.accepted_steps = stats.accepted;
    meta.rejected_steps = stats.rejected;
    Ok(EvolutionResult {
        tau_grid: tau_grid.to_vec(),
        states,
        meta,
    })
}
