//! Time evolution: unitary Schroedinger propagation, dense Lindblad
//! integration, and quantum-trajectory unravelling.

pub mod lindblad;
pub mod rk45;
pub mod trajectories;
pub mod unitary;

use num_complex::Complex64;

use crate::fock::{build_omega_op, annihilation_op, creation_op, CouplingSet};
use crate::sparse::SparseOperator;
use crate::states::PureState;
use crate::{Result, SimError};

pub use lindblad::{evolve_lindblad_dense, DEFAULT_DENSE_LIMIT};
pub use rk45::{Rk45, StepStats};
pub use trajectories::{
    evolve_trajectories, trajectory_statistics, StatsOptions, TrajectoryEnsemble,
    TrajectorySettings, TrajectoryStats,
};
pub use unitary::evolve_unitary;

/// Integration tolerances for the adaptive solvers.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SolverTol {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for SolverTol {
    fn default() -> Self {
        SolverTol {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

/// Bookkeeping from a propagation run.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolverMeta {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// max over the grid of | ||psi|| - 1 | (unitary) or |Tr rho - 1| (Lindblad).
    pub max_norm_drift: f64,
}

/// States sampled on a time grid, plus solver bookkeeping.
#[derive(Debug, Clone)]
pub struct EvolutionResult<S> {
    pub tau_grid: Vec<f64>,
    pub states: Vec<S>,
    pub meta: SolverMeta,
}

pub(crate) fn validate_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.is_empty() {
        return Err(SimError::InvalidConfig("empty time grid".into()));
    }
    if tau_grid[0] != 0.0 {
        return Err(SimError::InvalidConfig("time grid must start at 0".into()));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::InvalidConfig(
            "time grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Multiplies each amplitude by exp(-i (g/2) N (N-1) tau), the global
/// sector-dependent phase that maps the decoupled-picture evolution back to
/// the interaction picture of the full Hamiltonian.
pub fn apply_number_phase(psi: &PureState, g: f64, tau: f64) -> PureState {
    let space = psi.space().clone();
    let amp: Vec<Complex64> = psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let n = space.total(i) as f64;
            a * Complex64::from_polar(1.0, -0.5 * g * n * (n - 1.0) * tau)
        })
        .collect();
    PureState::from_amplitudes(space, amp).expect("phase is norm preserving")
}

/// An extremum located on a sampled time series.
#[derive(Debug, Clone, Copy)]
pub struct Extremum {
    /// Quadratic-refined location.
    pub tau: f64,
    /// Grid index of the discrete extremum.
    pub grid_index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    FirstMax,
    FirstMin,
}

/// Finds the first interior extremum of a sampled series and refines its
/// position with a three-point quadratic fit. Requires a uniform grid.
pub fn find_extremal_time(series: &[(f64, f64)], kind: ExtremumKind) -> Result<Extremum> {
    if series.len() < 3 {
        return Err(SimError::NoExtremum(
            "need at least three samples".into(),
        ));
    }
    let dt = series[1].0 - series[0].0;
    for w in series.windows(2) {
        if ((w[1].0 - w[0].0) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(SimError::InvalidConfig(
                "extremum search needs a uniform time grid".into(),
            ));
        }
    }
    let sign = match kind {
        ExtremumKind::FirstMax => 1.0,
        ExtremumKind::FirstMin => -1.0,
    };
    let v: Vec<f64> = series.iter().map(|&(_, y)| sign * y).collect();
    for i in 1..v.len() - 1 {
        if v[i] >= v[i - 1] && v[i] > v[i + 1] {
            let denom = v[i - 1] - 2.0 * v[i] + v[i + 1];
            let offset = if denom.abs() > 0.0 {
                (0.5 * (v[i - 1] - v[i + 1]) / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            return Ok(Extremum {
                tau: series[i].0 + offset * dt,
                grid_index: i,
                value: series[i].1,
            });
        }
    }
    Err(SimError::NoExtremum(
        "series has no interior extremum of the requested kind".into(),
    ))
}

/// Checks the equation of motion for <a_mode> at a single state: compares a
/// central finite difference of <a_mode> under the given tau-generator `h`
/// (the Hamiltonian divided by g) against the analytic right-hand side
///
///   d<a1>/dtau = -i (<a2+ a3^2>        + <Omega_1 a1> / g)
///   d<a2>/dtau = -i (<a1+ a3^2>        + <Omega_2 a2> / g)
///   d<a3>/dtau = -i (2 <a1 a2 a3+>     + <Omega_3 a3> / g)
///
/// and returns |finite difference - analytic|.
pub fn ehrenfest_residual(
    h: &SparseOperator,
    psi: &PureState,
    couplings: &CouplingSet,
    mode: usize,
    dtau: f64,
) -> Result<f64> {
    if mode >= 3 {
        return Err(SimError::InvalidMode(mode));
    }
    if dtau <= 0.0 {
        return Err(SimError::InvalidConfig("dtau must be positive".into()));
    }
    let space = psi.space();
    let tol = SolverTol {
        rtol: 1e-12,
        atol: 1e-14,
    };
    let grid = vec![0.0, dtau];
    let fwd = evolve_unitary(h, psi, &grid, tol)?;
    let minus_h = h.scale(Complex64::new(-1.0, 0.0));
    let bwd = evolve_unitary(&minus_h, psi, &grid, tol)?;

    let a_op = annihilation_op(space, mode)?;
    let ev = |s: &PureState| a_op.expectation(s.amplitudes());
    let fd = (ev(&fwd.states[1]) - ev(&bwd.states[1])) / Complex64::new(2.0 * dtau, 0.0);

    let amps = psi.amplitudes();
    let dot = |x: &[Complex64], y: &[Complex64]| -> Complex64 {
        x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
    };
    let scale = if couplings.g != 0.0 {
        1.0 / couplings.g
    } else {
        1.0
    };
    let omega = build_omega_op(space, couplings, mode)?;
    let a_psi = a_op.apply_vec(amps);
    let omega_term = dot(amps, &omega.apply_vec(&a_psi));
    let a3 = annihilation_op(space, 2)?;
    let fwm_term = match mode {
        0 => {
            // <a2+ a3^2> = <a2 psi | a3 a3 psi>
            let a2_psi = annihilation_op(space, 1)?.apply_vec(amps);
            dot(&a2_psi, &a3.apply_vec(&a3.apply_vec(amps)))
        }
        1 => {
            let a1_psi = annihilation_op(space, 0)?.apply_vec(amps);
            dot(&a1_psi, &a3.apply_vec(&a3.apply_vec(amps)))
        }
        _ => {
            // 2 <a1 a2 a3+>
            let a3dag_psi = creation_op(space, 2)?.apply_vec(amps);
            let chain = annihilation_op(space, 0)?
                .apply_vec(&annihilation_op(space, 1)?.apply_vec(&a3dag_psi));
            Complex64::new(2.0, 0.0) * dot(amps, &chain)
        }
    };
    let rhs = Complex64::new(0.0, -1.0) * (fwm_term + omega_term * scale);
    Ok((fd - rhs).norm())
}
