//! Schroedinger propagation d psi / d tau = -i H psi on a time grid.
//!
//! The diagonal of H is removed analytically: with D = diag(H) the solver
//! integrates phi = e^{i D tau} psi, whose generator carries only the
//! off-diagonal part of H with oscillating phases e^{i (d_r - d_c) tau}.
//! For the decoupled Hamiltonian (zero diagonal after the transform the
//! phases all vanish) this makes the stiff diagonal exact and leaves a
//! bounded, slow right-hand side for the adaptive integrator.

use num_complex::Complex64;

use crate::dynamics::rk45::{Rk45, StepStats};
use crate::dynamics::{validate_grid, EvolutionResult, SolverMeta, SolverTol};
use crate::sparse::SparseOperator;
use crate::states::PureState;
use crate::{Result, SimError};

/// Propagates `psi0` under Hermitian `h` and returns normalized states at
/// every grid point. The grid must start at 0 and increase strictly.
pub fn evolve_unitary(
    h: &SparseOperator,
    psi0: &PureState,
    tau_grid: &[f64],
    tol: SolverTol,
) -> Result<EvolutionResult<PureState>> {
    let mut states = Vec::with_capacity(tau_grid.len());
    let meta = evolve_unitary_with(h, psi0, tau_grid, tol, |_, _, s| {
        states.push(s.clone());
    })?;
    Ok(EvolutionResult {
        tau_grid: tau_grid.to_vec(),
        states,
        meta,
    })
}

/// Streaming variant: `on(grid_index, tau, state)` is called once per grid
/// point with the normalized state; norm drift is recorded in the meta.
pub fn evolve_unitary_with<F>(
    h: &SparseOperator,
    psi0: &PureState,
    tau_grid: &[f64],
    tol: SolverTol,
    mut on: F,
) -> Result<SolverMeta>
where
    F: FnMut(usize, f64, &PureState),
{
    validate_grid(tau_grid)?;
    let dim = psi0.space().dim();
    if h.dim() != dim {
        return Err(SimError::DimensionMismatch { a: h.dim(), b: dim });
    }
    h.check_hermitian(1e-10 * h.max_abs().max(1.0))?;

    let diag: Vec<f64> = h.diagonal().iter().map(|d| d.re).collect();
    // flatten off-diagonal entries for the hot loop
    let mut rows: Vec<u32> = Vec::new();
    let mut cols: Vec<u32> = Vec::new();
    let mut vals: Vec<Complex64> = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    for (r, c, v) in h.entries() {
        if r != c {
            rows.push(r);
            cols.push(c);
            vals.push(v);
            deltas.push(diag[r as usize] - diag[c as usize]);
        }
    }
    let autonomous = deltas.iter().all(|d| d.abs() < 1e-12);

    let rk = Rk45 {
        rtol: tol.rtol,
        atol: tol.atol,
        ..Default::default()
    };
    let mut stats = StepStats::default();
    let mut meta = SolverMeta::default();
    let mut phi: Vec<Complex64> = psi0.amplitudes().to_vec();
    let mut hstep = 0.0;

    let mut rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        for d in dy.iter_mut() {
            *d = Complex64::new(0.0, 0.0);
        }
        let minus_i = Complex64::new(0.0, -1.0);
        if autonomous {
            for k in 0..vals.len() {
                dy[rows[k] as usize] += minus_i * vals[k] * y[cols[k] as usize];
            }
        } else {
            for k in 0..vals.len() {
                let phase = Complex64::from_polar(1.0, deltas[k] * t);
                dy[rows[k] as usize] += minus_i * phase * vals[k] * y[cols[k] as usize];
            }
        }
    };

    let emit = |w: usize,
                tau: f64,
                phi: &[Complex64],
                meta: &mut SolverMeta,
                on: &mut F|
     -> Result<()> {
        let amp: Vec<Complex64> = phi
            .iter()
            .enumerate()
            .map(|(i, &a)| a * Complex64::from_polar(1.0, -diag[i] * tau))
            .collect();
        let norm = amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        meta.max_norm_drift = meta.max_norm_drift.max((norm - 1.0).abs());
        let psi = PureState::from_amplitudes(psi0.space().clone(), amp)?;
        on(w, tau, &psi);
        Ok(())
    };

    emit(0, tau_grid[0], &phi, &mut meta, &mut on)?;
    for w in 1..tau_grid.len() {
        rk.integrate(&mut rhs, &mut phi, tau_grid[w - 1], tau_grid[w], &mut hstep, &mut stats)?;
        emit(w, tau_grid[w], &phi, &mut meta, &mut on)?;
    }
    meta.accepted_steps = stats.accepted;
    meta.rejected_steps = stats.rejected;
    Ok(meta)
}
