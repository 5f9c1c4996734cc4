//! Quantum-trajectory (Monte Carlo wave function) unravelling.
//!
//! Between jumps the state evolves under H_eff = H - (i/2) sum_j C_j+ C_j;
//! a jump fires when the decaying squared norm crosses a uniform draw r,
//! the crossing time is bisected to a norm tolerance, the channel is chosen
//! proportionally to ||C_j psi||^2, and r is redrawn.
//!
//! Two no-jump propagators are available:
//!  * a spectral fast path when Gamma = sum C_j+ C_j is diagonal, commutes
//!    with H entrywise, and H's sparsity graph splits into small connected
//!    components (true for the conserved-charge structure of this model) -
//!    each component is eigendecomposed once and propagated exactly;
//!  * an adaptive Runge-Kutta fallback on H_eff otherwise.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::rk45::{Rk45, StepStats};
use crate::dynamics::{validate_grid, SolverTol};
use crate::fock::FockSpace;
use crate::linalg::hermitian_eigen;
use crate::observables::{ModeMoments, MomentTables};
use crate::sparse::SparseOperator;
use crate::states::{partial_trace_pure, to_density, DensityMatrix, PureState};
use crate::{Result, SimError};

/// Trajectories are processed in fixed-size batches and batch results are
/// combined in index order, so ensemble statistics do not depend on the
/// number of worker threads.
const BATCH_SIZE: usize = 25;

#[derive(Debug, Clone, Copy)]
pub struct TrajectorySettings {
    /// Tolerances for the Runge-Kutta fallback propagator.
    pub tol: SolverTol,
    /// Bisection tolerance on |  ||psi||^2 - r  | at a jump.
    pub norm_tol: f64,
    /// Largest connected component the spectral fast path will
    /// eigendecompose; larger blocks force the fallback propagator.
    pub max_block_dim: usize,
}

impl Default for TrajectorySettings {
    fn default() -> Self {
        TrajectorySettings {
            tol: SolverTol::default(),
            norm_tol: 1e-6,
            max_block_dim: 2048,
        }
    }
}

/// All states of every trajectory; memory scales as n_traj x grid x dim, so
/// this is for small problems. Use `trajectory_statistics` for large runs.
#[derive(Debug)]
pub struct TrajectoryEnsemble {
    pub tau_grid: Vec<f64>,
    /// states[k][w] = normalized state of trajectory k at grid point w.
    pub states: Vec<Vec<PureState>>,
    /// jumps[k] = (tau, channel index) of every jump of trajectory k.
    pub jumps: Vec<Vec<(f64, usize)>>,
}

/// What `trajectory_statistics` should retain beyond per-mode moments.
#[derive(Debug, Clone, Default)]
pub struct StatsOptions {
    /// Times (snapped to the nearest grid point) at which ensemble-averaged
    /// reduced density matrices are accumulated.
    pub snapshot_taus: Vec<f64>,
    /// Also accumulate the full-basis averaged density matrix at snapshots
    /// (only sensible on small spaces).
    pub full_rho_at_snapshots: bool,
}

/// Ensemble-averaged moments per grid point plus snapshot density matrices.
#[derive(Debug)]
pub struct TrajectoryStats {
    pub tau_grid: Vec<f64>,
    pub n_traj: usize,
    /// moments[w][mode] = ensemble average of the per-trajectory raw moments.
    pub moments: Vec<Vec<ModeMoments>>,
    pub snapshots: Vec<SnapshotStats>,
    /// Number of jumps of each trajectory.
    pub jumps_per_traj: Vec<u32>,
    /// Total jumps per collapse channel.
    pub channel_jumps: Vec<usize>,
}

#[derive(Debug)]
pub struct SnapshotStats {
    pub tau: f64,
    pub grid_index: usize,
    /// Ensemble-averaged reduced density matrix of each mode.
    pub rho_modes: Vec<DensityMatrix>,
    /// Full-basis averaged density matrix if requested.
    pub rho_full: Option<DensityMatrix>,
    /// per_traj_n[mode][k] = (<n>, <n^2>) of trajectory k at the snapshot,
    /// for ensemble standard errors.
    pub per_traj_n: Vec<Vec<(f64, f64)>>,
}

impl TrajectoryStats {
    pub fn total_jumps(&self) -> usize {
        self.jumps_per_traj.iter().map(|&j| j as usize).sum()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic per-trajectory seed derived from the master seed.
pub fn trajectory_seed(master_seed: u64, k: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(k as u64 + 1))
}

struct Block {
    idx: Vec<u32>,
    evals: Vec<f64>,
    evecs: DMatrix<Complex64>,
    /// Gamma is a multiple of the identity on each block.
    gamma: f64,
}

struct Spectral {
    blocks: Vec<Block>,
    /// Cached full-step propagators keyed by the bit pattern of the step,
    /// one matrix per block with the decay factor folded in.
    grid_cache: HashMap<u64, Vec<DMatrix<Complex64>>>,
    max_block: usize,
}

struct Engine<'a> {
    dim: usize,
    collapse: &'a [SparseOperator],
    spectral: Option<Spectral>,
    /// H - (i/2) Gamma for the fallback propagator.
    h_eff: SparseOperator,
    rk: Rk45,
    norm_tol: f64,
}

struct Scratch {
    xb: Vec<Complex64>,
    wb: Vec<Complex64>,
    saved: Vec<Complex64>,
    trial: Vec<Complex64>,
    normed: Vec<Complex64>,
    cpsi: Vec<Complex64>,
    hstep: f64,
    stats: StepStats,
}

impl Scratch {
    fn new(dim: usize, max_block: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Scratch {
            xb: vec![zero; max_block.max(1)],
            wb: vec![zero; max_block.max(1)],
            saved: vec![zero; dim],
            trial: vec![zero; dim],
            normed: vec![zero; dim],
            cpsi: vec![zero; dim],
            hstep: 0.0,
            stats: StepStats::default(),
        }
    }
}

fn union_find_components(dim: usize, h: &SparseOperator) -> Vec<Vec<u32>> {
    let mut parent: Vec<u32> = (0..dim as u32).collect();
    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            parent[i as usize] = parent[parent[i as usize] as usize];
            i = parent[i as usize];
        }
        i
    }
    for (r, c, _) in h.entries() {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            parent[a.max(b) as usize] = a.min(b);
        }
    }
    let mut groups: HashMap<u32, Vec<u32>> = HashMap::new();
    for i in 0..dim as u32 {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut comps: Vec<Vec<u32>> = groups.into_values().collect();
    comps.sort_unstable_by_key(|g| g[0]);
    comps
}

impl<'a> Engine<'a> {
    fn build(
        h: &SparseOperator,
        collapse: &'a [SparseOperator],
        tau_grid: &[f64],
        settings: &TrajectorySettings,
    ) -> Result<Engine<'a>> {
        let dim = h.dim();
        h.check_hermitian(1e-10 * h.max_abs().max(1.0))?;
        for c in collapse {
            if c.dim() != dim {
                return Err(SimError::DimensionMismatch { a: c.dim(), b: dim });
            }
        }
        // Gamma = sum C+ C
        let mut gamma_op = SparseOperator::zeros(dim);
        for c in collapse {
            gamma_op = gamma_op.add(&c.dagger().matmul(c));
        }
        let h_eff = h.linear_comb(
            Complex64::new(1.0, 0.0),
            &gamma_op,
            Complex64::new(0.0, -0.5),
        );

        let spectral = Self::try_spectral(h, &gamma_op, tau_grid, settings);
        Ok(Engine {
            dim,
            collapse,
            spectral,
            h_eff,
            rk: Rk45 {
                rtol: settings.tol.rtol,
                atol: settings.tol.atol,
                ..Default::default()
            },
            norm_tol: settings.norm_tol,
        })
    }

    fn try_spectral(
        h: &SparseOperator,
        gamma_op: &SparseOperator,
        tau_grid: &[f64],
        settings: &TrajectorySettings,
    ) -> Option<Spectral> {
        if !gamma_op.is_diagonal() {
            return None;
        }
        let gdiag: Vec<f64> = gamma_op.diagonal().iter().map(|v| v.re).collect();
        // [Gamma, H] entry (r,c) is (g_r - g_c) H_rc; require it to vanish
        let gscale = gdiag.iter().fold(0.0f64, |m, &g| m.max(g.abs())).max(1.0);
        for (r, c, v) in h.entries() {
            if r != c && (gdiag[r as usize] - gdiag[c as usize]).abs() * v.norm() > 1e-10 * gscale
            {
                return None;
            }
        }
        let dim = h.dim();
        let comps = union_find_components(dim, h);
        if comps.iter().any(|g| g.len() > settings.max_block_dim) {
            return None;
        }
        let max_block = comps.iter().map(|g| g.len()).max().unwrap_or(1);
        let mut comp_of = vec![0u32; dim];
        let mut pos_in = vec![0u32; dim];
        for (b, g) in comps.iter().enumerate() {
            for (p, &i) in g.iter().enumerate() {
                comp_of[i as usize] = b as u32;
                pos_in[i as usize] = p as u32;
            }
        }
        // dense block Hamiltonians
        let mut mats: Vec<DMatrix<Complex64>> = comps
            .iter()
            .map(|g| DMatrix::zeros(g.len(), g.len()))
            .collect();
        for (r, c, v) in h.entries() {
            let b = comp_of[r as usize] as usize;
            mats[b][(pos_in[r as usize] as usize, pos_in[c as usize] as usize)] = v;
        }
        let mut blocks = Vec::with_capacity(comps.len());
        for (g, m) in comps.into_iter().zip(mats) {
            let (evals, evecs) = hermitian_eigen(&m);
            let gamma = gdiag[g[0] as usize];
            blocks.push(Block {
                idx: g,
                evals,
                evecs,
                gamma,
            });
        }
        // cache full propagators for the grid steps (decay folded in)
        let mut grid_cache: HashMap<u64, Vec<DMatrix<Complex64>>> = HashMap::new();
        for w in tau_grid.windows(2) {
            let dt = w[1] - w[0];
            grid_cache.entry(dt.to_bits()).or_insert_with(|| {
                blocks
                    .iter()
                    .map(|b| {
                        let s = b.idx.len();
                        let mut phased = b.evecs.clone();
                        for k in 0..s {
                            let ph = Complex64::from_polar(
                                (-b.gamma * dt / 2.0).exp(),
                                -b.evals[k] * dt,
                            );
                            for i in 0..s {
                                phased[(i, k)] *= ph;
                            }
                        }
                        &phased * b.evecs.adjoint()
                    })
                    .collect()
            });
        }
        Some(Spectral {
            blocks,
            grid_cache,
            max_block,
        })
    }

    fn max_block(&self) -> usize {
        self.spectral.as_ref().map(|s| s.max_block).unwrap_or(1)
    }

    /// No-jump propagation of the unnormalized state by dt starting at t0.
    fn propagate(
        &self,
        psi: &mut Vec<Complex64>,
        t0: f64,
        dt: f64,
        sc: &mut Scratch,
    ) -> Result<()> {
        if dt <= 0.0 {
            return Ok(());
        }
        if let Some(sp) = &self.spectral {
            if let Some(props) = sp.grid_cache.get(&dt.to_bits()) {
                for (b, p) in sp.blocks.iter().zip(props) {
                    let s = b.idx.len();
                    for (q, &i) in b.idx.iter().enumerate() {
                        sc.xb[q] = psi[i as usize];
                    }
                    for q in 0..s {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for k in 0..s {
                            acc += p[(q, k)] * sc.xb[k];
                        }
                        sc.wb[q] = acc;
                    }
                    for (q, &i) in b.idx.iter().enumerate() {
                        psi[i as usize] = sc.wb[q];
                    }
                }
            } else {
                // arbitrary step: go through the eigenbasis
                for b in &sp.blocks {
                    let s = b.idx.len();
                    for (q, &i) in b.idx.iter().enumerate() {
                        sc.xb[q] = psi[i as usize];
                    }
                    // wb = V+ x
                    for k in 0..s {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for i in 0..s {
                            acc += b.evecs[(i, k)].conj() * sc.xb[i];
                        }
                        sc.wb[k] = acc * Complex64::from_polar(1.0, -b.evals[k] * dt);
                    }
                    let decay = (-b.gamma * dt / 2.0).exp();
                    for q in 0..s {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for k in 0..s {
                            acc += b.evecs[(q, k)] * sc.wb[k];
                        }
                        sc.xb[q] = acc * decay;
                    }
                    for (q, &i) in b.idx.iter().enumerate() {
                        psi[i as usize] = sc.xb[q];
                    }
                }
            }
            return Ok(());
        }
        let h_eff = &self.h_eff;
        let mut rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            for d in dy.iter_mut() {
                *d = Complex64::new(0.0, 0.0);
            }
            h_eff.apply_scaled_add(Complex64::new(0.0, -1.0), y, dy);
        };
        self.rk
            .integrate(&mut rhs, psi, t0, t0 + dt, &mut sc.hstep, &mut sc.stats)
    }
}

fn norm_sqr(psi: &[Complex64]) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum()
}

fn draw_threshold(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let r: f64 = rng.gen();
        if r > 1e-12 {
            return r;
        }
    }
}

/// One trajectory; `on(grid_index, tau, normalized_amplitudes)` fires at
/// every grid point. Returns the jump log.
fn run_one<F>(
    engine: &Engine,
    psi0: &[Complex64],
    tau_grid: &[f64],
    seed: u64,
    sc: &mut Scratch,
    on: &mut F,
) -> Result<Vec<(f64, usize)>>
where
    F: FnMut(usize, f64, &[Complex64]),
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi: Vec<Complex64> = psi0.to_vec();
    let mut jumps: Vec<(f64, usize)> = Vec::new();
    let mut r = draw_threshold(&mut rng);
    sc.hstep = 0.0;

    let emit = |w: usize, tau: f64, psi: &[Complex64], sc: &mut Scratch, on: &mut F| {
        let inv = 1.0 / norm_sqr(psi).sqrt();
        for (o, &a) in sc.normed.iter_mut().zip(psi) {
            *o = inv * a;
        }
        on(w, tau, &sc.normed);
    };

    emit(0, tau_grid[0], &psi, sc, on);
    for w in 1..tau_grid.len() {
        let t_end = tau_grid[w];
        let mut t = tau_grid[w - 1];
        loop {
            sc.saved.copy_from_slice(&psi);
            let n_before = norm_sqr(&psi);
            engine.propagate(&mut psi, t, t_end - t, sc)?;
            let n_after = norm_sqr(&psi);
            let margin = 1e-9_f64.max(100.0 * engine.rk.rtol);
            if n_after > n_before * (1.0 + margin) + 1e-12 {
                return Err(SimError::Numerical(format!(
                    "trajectory norm grew from {n_before:.6e} to {n_after:.6e}"
                )));
            }
            if n_after > r || engine.collapse.is_empty() {
                break;
            }
            // jump inside (t, t_end]: bisect on the crossing time
            let (tc, _) = bisect_jump(engine, &sc.saved.clone(), t, t_end, r, sc, &mut psi)?;
            // channel ~ ||C_j psi||^2
            let mut weights = Vec::with_capacity(engine.collapse.len());
            let mut total = 0.0;
            for c in engine.collapse {
                c.apply(&psi, &mut sc.cpsi);
                let wgt = norm_sqr(&sc.cpsi);
                total += wgt;
                weights.push(wgt);
            }
            if total <= 0.0 {
                return Err(SimError::Numerical(
                    "all collapse channels have zero weight at a jump".into(),
                ));
            }
            let u: f64 = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut channel = weights.len() - 1;
            for (j, wgt) in weights.iter().enumerate() {
                acc += wgt;
                if u < acc {
                    channel = j;
                    break;
                }
            }
            engine.collapse[channel].apply(&psi, &mut sc.cpsi);
            let inv = 1.0 / norm_sqr(&sc.cpsi).sqrt();
            for (p, &cv) in psi.iter_mut().zip(&sc.cpsi) {
                *p = inv * cv;
            }
            jumps.push((tc, channel));
            r = draw_threshold(&mut rng);
            t = tc;
            if t >= t_end - 1e-15 {
                break;
            }
        }
        emit(w, t_end, &psi, sc, on);
    }
    Ok(jumps)
}

/// Bisects the jump time in (t_lo, t_hi]; on return `psi` holds the
/// pre-jump state at the crossing.
fn bisect_jump(
    engine: &Engine,
    saved: &[Complex64],
    t_lo: f64,
    t_hi: f64,
    r: f64,
    sc: &mut Scratch,
    psi: &mut Vec<Complex64>,
) -> Result<(f64, f64)> {
    let mut lo = t_lo;
    let mut hi = t_hi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        sc.trial.copy_from_slice(saved);
        // own the trial buffer for propagate's &mut Vec signature
        let mut trial = std::mem::take(&mut sc.trial);
        let res = engine.propagate(&mut trial, t_lo, mid - t_lo, sc);
        sc.trial = trial;
        res?;
        let n2 = norm_sqr(&sc.trial);
        if (n2 - r).abs() <= engine.norm_tol || hi - lo < 1e-13 * hi.abs().max(1.0) {
            psi.copy_from_slice(&sc.trial);
            return Ok((mid, n2));
        }
        if n2 > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(SimError::Numerical(
        "jump-time bisection did not converge".into(),
    ))
}

fn batches(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..n)
        .step_by(BATCH_SIZE)
        .map(|s| s..(s + BATCH_SIZE).min(n))
        .collect()
}

fn map_batches<T, FB>(n_traj: usize, per_batch: FB) -> Result<Vec<T>>
where
    T: Send,
    FB: Fn(std::ops::Range<usize>) -> Result<T> + Sync + Send,
{
    let ranges = batches(n_traj);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ranges.into_par_iter().map(per_batch).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ranges.into_iter().map(per_batch).collect()
    }
}

/// Runs `n_traj` trajectories and keeps every state. Deterministic in
/// `master_seed` regardless of thread count.
pub fn evolve_trajectories(
    h: &SparseOperator,
    collapse: &[SparseOperator],
    psi0: &PureState,
    tau_grid: &[f64],
    n_traj: usize,
    master_seed: u64,
    settings: &TrajectorySettings,
) -> Result<TrajectoryEnsemble> {
    validate_grid(tau_grid)?;
    if n_traj == 0 {
        return Err(SimError::InvalidConfig("n_traj must be positive".into()));
    }
    let engine = Engine::build(h, collapse, tau_grid, settings)?;
    let space = psi0.space().clone();
    let results = map_batches(n_traj, |range| {
        let mut sc = Scratch::new(engine.dim, engine.max_block());
        let mut out = Vec::with_capacity(range.len());
        for k in range {
            let mut states: Vec<PureState> = Vec::with_capacity(tau_grid.len());
            let jumps = run_one(
                &engine,
                psi0.amplitudes(),
                tau_grid,
                trajectory_seed(master_seed, k),
                &mut sc,
                &mut |_, _, amp| {
                    states.push(
                        PureState::from_amplitudes(space.clone(), amp.to_vec())
                            .expect("normalized amplitudes"),
                    );
                },
            )?;
            out.push((states, jumps));
        }
        Ok(out)
    })?;
    let mut states = Vec::with_capacity(n_traj);
    let mut jumps = Vec::with_capacity(n_traj);
    for batch in results {
        for (s, j) in batch {
            states.push(s);
            jumps.push(j);
        }
    }
    Ok(TrajectoryEnsemble {
        tau_grid: tau_grid.to_vec(),
        states,
        jumps,
    })
}

/// Grid indices closest to the requested snapshot times.
fn snapshot_indices(tau_grid: &[f64], taus: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = taus
        .iter()
        .map(|&t| {
            tau_grid
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap()
                })
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

struct BatchAccum {
    moments: Vec<Vec<ModeMoments>>,
    snap_rho: Vec<Vec<DMatrix<Complex64>>>,
    snap_full: Vec<Option<DMatrix<Complex64>>>,
    /// [snap][mode] -> (traj index, n, n2)
    snap_per_traj: Vec<Vec<Vec<(usize, f64, f64)>>>,
    jumps_per_traj: Vec<(usize, u32)>,
    channel_jumps: Vec<usize>,
}

/// Runs trajectories and streams them into ensemble averages: raw per-mode
/// moments at every grid point and reduced density matrices at snapshots.
/// Memory stays O(grid x dim-independent) plus the snapshot matrices.
pub fn trajectory_statistics(
    h: &SparseOperator,
    collapse: &[SparseOperator],
    psi0: &PureState,
    tau_grid: &[f64],
    n_traj: usize,
    master_seed: u64,
    settings: &TrajectorySettings,
    opts: &StatsOptions,
) -> Result<TrajectoryStats> {
    validate_grid(tau_grid)?;
    if n_traj == 0 {
        return Err(SimError::InvalidConfig("n_traj must be positive".into()));
    }
    let engine = Engine::build(h, collapse, tau_grid, settings)?;
    let space: Arc<FockSpace> = psi0.space().clone();
    let tables = MomentTables::new(&space);
    let n_modes = space.mode_count();
    let snap_idx = snapshot_indices(tau_grid, &opts.snapshot_taus);
    let snap_of_grid: HashMap<usize, usize> = snap_idx
        .iter()
        .enumerate()
        .map(|(s, &w)| (w, s))
        .collect();
    let red_dims: Vec<usize> = (0..n_modes)
        .map(|m| space.max_occ()[m] as usize + 1)
        .collect();

    let zero_moments = || -> Vec<Vec<ModeMoments>> {
        (0..tau_grid.len())
            .map(|_| {
                (0..n_modes)
                    .map(|m| ModeMoments::zero(tables.pn_len(m)))
                    .collect()
            })
            .collect()
    };

    let results = map_batches(n_traj, |range| -> Result<BatchAccum> {
        let mut sc = Scratch::new(engine.dim, engine.max_block());
        let mut acc = BatchAccum {
            moments: zero_moments(),
            snap_rho: snap_idx
                .iter()
                .map(|_| red_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect())
                .collect(),
            snap_full: snap_idx
                .iter()
                .map(|_| {
                    if opts.full_rho_at_snapshots {
                        Some(DMatrix::zeros(engine.dim, engine.dim))
                    } else {
                        None
                    }
                })
                .collect(),
            snap_per_traj: snap_idx
                .iter()
                .map(|_| vec![Vec::with_capacity(range.len()); n_modes])
                .collect(),
            jumps_per_traj: Vec::with_capacity(range.len()),
            channel_jumps: vec![0; collapse.len()],
        };
        for k in range.clone() {
            let jumps = run_one(
                &engine,
                psi0.amplitudes(),
                tau_grid,
                trajectory_seed(master_seed, k),
                &mut sc,
                &mut |w, _tau, amp| {
                    for m in 0..n_modes {
                        let mm = tables.mode_moments(m, amp);
                        if let Some(&s) = snap_of_grid.get(&w) {
                            acc.snap_per_traj[s][m].push((k, mm.n, mm.n2));
                        }
                        acc.moments[w][m].add_weighted(&mm, 1.0);
                    }
                    if let Some(&s) = snap_of_grid.get(&w) {
                        let psi = PureState::from_amplitudes(space.clone(), amp.to_vec())
                            .expect("normalized amplitudes");
                        for m in 0..n_modes {
                            if n_modes == 1 {
                                acc.snap_rho[s][m] += to_density(&psi).mat;
                            } else {
                                let red = partial_trace_pure(&psi, &[m])
                                    .expect("valid single-mode trace");
                                acc.snap_rho[s][m] += red.mat;
                            }
                        }
                        if let Some(full) = acc.snap_full[s].as_mut() {
                            *full += to_density(&psi).mat;
                        }
                    }
                },
            )?;
            acc.jumps_per_traj.push((k, jumps.len() as u32));
            for &(_, ch) in &jumps {
                acc.channel_jumps[ch] += 1;
            }
        }
        Ok(acc)
    })?;

    // combine batches in index order
    let inv = 1.0 / n_traj as f64;
    let mut moments = zero_moments();
    let mut snap_rho: Vec<Vec<DMatrix<Complex64>>> = snap_idx
        .iter()
        .map(|_| red_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect())
        .collect();
    let mut snap_full: Vec<Option<DMatrix<Complex64>>> = snap_idx
        .iter()
        .map(|_| {
            if opts.full_rho_at_snapshots {
                Some(DMatrix::zeros(engine.dim, engine.dim))
            } else {
                None
            }
        })
        .collect();
    let mut snap_per_traj: Vec<Vec<Vec<(f64, f64)>>> = snap_idx
        .iter()
        .map(|_| vec![vec![(0.0, 0.0); n_traj]; n_modes])
        .collect();
    let mut jumps_per_traj = vec![0u32; n_traj];
    let mut channel_jumps = vec![0usize; collapse.len()];
    for acc in results {
        for (w, row) in acc.moments.into_iter().enumerate() {
            for (m, mm) in row.into_iter().enumerate() {
                moments[w][m].add_weighted(&mm, inv);
            }
        }
        for (s, rhos) in acc.snap_rho.into_iter().enumerate() {
            for (m, r) in rhos.into_iter().enumerate() {
                snap_rho[s][m] += r * Complex64::new(inv, 0.0);
            }
        }
        for (s, full) in acc.snap_full.into_iter().enumerate() {
            if let (Some(dst), Some(src)) = (snap_full[s].as_mut(), full) {
                *dst += src * Complex64::new(inv, 0.0);
            }
        }
        for (s, per_mode) in acc.snap_per_traj.into_iter().enumerate() {
            for (m, entries) in per_mode.into_iter().enumerate() {
                for (k, n, n2) in entries {
                    snap_per_traj[s][m][k] = (n, n2);
                }
            }
        }
        for (k, j) in acc.jumps_per_traj {
            jumps_per_traj[k] = j;
        }
        for (c, j) in acc.channel_jumps.into_iter().enumerate() {
            channel_jumps[c] += j;
        }
    }

    let snapshots = snap_idx
        .iter()
        .enumerate()
        .map(|(s, &w)| SnapshotStats {
            tau: tau_grid[w],
            grid_index: w,
            rho_modes: snap_rho[s]
                .iter()
                .enumerate()
                .map(|(m, mat)| DensityMatrix {
                    mat: mat.clone(),
                    label: crate::states::StateLabel::Modes {
                        modes: vec![m],
                        dims: vec![red_dims[m]],
                    },
                })
                .collect(),
            rho_full: snap_full[s].take().map(|mat| DensityMatrix {
                mat,
                label: crate::states::StateLabel::Full(space.clone()),
            }),
            per_traj_n: snap_per_traj[s].clone(),
        })
        .collect();

    Ok(TrajectoryStats {
        tau_grid: tau_grid.to_vec(),
        n_traj,
        moments,
        snapshots,
        jumps_per_traj,
        channel_jumps,
    })
}
