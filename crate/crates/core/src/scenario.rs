//! Scenario orchestration: configuration schema, solver dispatch, the
//! extremal-time search, artifact emission, and run comparison.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{
    apply_number_phase, evolve_lindblad_dense, evolve_unitary, find_extremal_time,
    trajectory_statistics, ExtremumKind, SolverTol, StatsOptions, TrajectorySettings,
};
use crate::fock::{
    build_h_int1, build_h_int2, build_space, collapse_ops, validate_decoupling, CouplingSet,
    Decoupling, FockSpace,
};
use crate::io::{self, fmt_g9, round_g9};
use crate::observables::{photon_distribution_rho, ModeMoments, MomentTables};
use crate::states::{
    coherent_product_state_with_loss, fidelity, partial_trace_pure, partial_trace_rho, purity,
    DensityMatrix, PureState,
};
use crate::wigner::{linspace, wigner_grid, WignerGrid};
use crate::{Result, SimError};

/// Complex number given as squared magnitude and phase (radians).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSpec {
    pub abs2: f64,
    pub phase: f64,
}

impl ComplexSpec {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.abs2.max(0.0).sqrt(), self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    Int1,
    Int2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Auto,
    Dense,
    Trajectories,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub max_occ: Vec<u32>,
    pub total_cap: Option<u32>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsSpec {
    pub timeseries: bool,
    pub wigner: bool,
    pub distributions: bool,
    pub marginals: bool,
    pub states: bool,
}

impl Default for OutputsSpec {
    fn default() -> Self {
        OutputsSpec {
            timeseries: true,
            wigner: true,
            distributions: true,
            marginals: true,
            states: true,
        }
    }
}

fn default_n_traj() -> usize {
    1000
}

fn default_snapshot_taus() -> Vec<f64> {
    vec![0.190]
}

fn default_wigner_window() -> [f64; 2] {
    [-8.0, 8.0]
}

fn default_wigner_points() -> usize {
    201
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub hamiltonian: HamiltonianKind,
    pub couplings: CouplingSet,
    pub alpha1: ComplexSpec,
    pub alpha2: ComplexSpec,
    pub truncation: Truncation,
    pub tau_max: f64,
    pub tau_step: f64,
    pub solver: SolverKind,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Times at which dissipative runs keep reduced density matrices
    /// (unitary runs can reconstruct any grid point from the stored states).
    #[serde(default = "default_snapshot_taus")]
    pub snapshot_taus: Vec<f64>,
    #[serde(default)]
    pub solver_tol: Option<SolverTol>,
    /// Symmetric Wigner window [min, max] applied to both x and p.
    #[serde(default = "default_wigner_window")]
    pub wigner_window: [f64; 2],
    #[serde(default = "default_wigner_points")]
    pub wigner_points: usize,
    #[serde(default)]
    pub outputs: OutputsSpec,
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<ScenarioConfig> {
        let cfg: ScenarioConfig = io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.couplings.validate()?;
        if self.tau_step <= 0.0 {
            return Err(SimError::InvalidConfig("tau_step must be > 0".into()));
        }
        if self.tau_max < self.tau_step {
            return Err(SimError::InvalidConfig(
                "tau_max must be at least tau_step".into(),
            ));
        }
        if self.truncation.max_occ.len() != 3 {
            return Err(SimError::InvalidConfig(
                "truncation.max_occ must list exactly 3 modes".into(),
            ));
        }
        if self.solver == SolverKind::Trajectories && self.n_traj == 0 {
            return Err(SimError::InvalidConfig(
                "n_traj must be >= 1 for the trajectory solver".into(),
            ));
        }
        if self.wigner_points < 2 || self.wigner_window[1] <= self.wigner_window[0] {
            return Err(SimError::InvalidConfig("bad Wigner window".into()));
        }
        Ok(())
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        let n = (self.tau_max / self.tau_step + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.tau_step).collect()
    }

    /// SHA-256 of the canonical JSON serialization; recorded in every
    /// output so artifacts cannot be mixed across configurations.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn solver_tol(&self) -> SolverTol {
        self.solver_tol.unwrap_or(SolverTol {
            rtol: 1e-10,
            atol: 1e-12,
        })
    }
}

/// One timeseries row; NaN marks quantities that are undefined or not
/// tracked at that grid point.
#[derive(Debug, Clone, Copy)]
pub struct StatisticsRecord {
    pub tau: f64,
    pub n: [f64; 3],
    pub var_x: [f64; 3],
    pub var_p: [f64; 3],
    pub ff: [f64; 3],
    pub k: f64,
    pub purity3: f64,
}

impl StatisticsRecord {
    fn row(&self) -> Vec<f64> {
        vec![
            self.tau,
            self.n[0],
            self.n[1],
            self.n[2],
            self.var_x[0],
            self.var_p[0],
            self.var_x[2],
            self.var_p[2],
            self.ff[0],
            self.ff[2],
            self.k,
            self.purity3,
        ]
    }
}

const TIMESERIES_COLUMNS: [&str; 12] = [
    "tau", "n1", "n2", "n3", "var_x1", "var_p1", "var_x3", "var_p3", "ff1", "ff3", "k",
    "purity3",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TauStarReport {
    pub n3_first_max: f64,
    pub n1_first_min: f64,
    pub grid_index: usize,
    pub grid_tau: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableBlock {
    pub tau: f64,
    pub n: [f64; 3],
    pub var_x: [f64; 3],
    pub var_p: [f64; 3],
    pub ff: [Option<f64>; 3],
    pub k: Option<f64>,
    pub purity3: f64,
    pub p3_odd_sum: f64,
    pub wigner_min_mode3: Option<f64>,
    pub negativity_volume_mode3: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConservationBlock {
    pub max_norm_drift: f64,
    pub max_total_number_drift: f64,
    pub max_n1_minus_n2_drift: f64,
    pub max_2n1_plus_n3_drift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryBlock {
    pub n_traj: usize,
    pub master_seed: u64,
    pub total_jumps: usize,
    pub mean_jumps_per_traj: f64,
    /// Standard errors of FF at tau*, from 20 trajectory groups.
    pub ff_standard_error: [Option<f64>; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryReport {
    pub config_hash: String,
    pub hamiltonian: HamiltonianKind,
    pub solver_used: String,
    pub decoupling: Decoupling,
    pub basis_dim: usize,
    pub truncation_loss: f64,
    pub tau_star: Option<TauStarReport>,
    pub at_tau_star: Option<ObservableBlock>,
    pub conservation: Option<ConservationBlock>,
    pub trajectories: Option<TrajectoryBlock>,
}

impl SummaryReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut value = serde_json::to_value(self)?;
        round_json_numbers(&mut value);
        io::write_json(path, &value)
    }

    pub fn load(path: &Path) -> Result<SummaryReport> {
        io::read_json(path)
    }
}

/// Rounds every number in a JSON tree to 9 significant digits so repeated
/// runs emit byte-identical documents.
fn round_json_numbers(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.as_i64().is_none() && n.as_u64().is_none() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_g9(f)) {
                        *n = rounded;
                    }
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_json_numbers),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_json_numbers),
        _ => {}
    }
}

fn nan_to_none(x: f64) -> Option<f64> {
    if x.is_finite() {
        Some(x)
    } else {
        None
    }
}

/// Everything a run produces in memory; file emission is separate so tests
/// can interrogate runs without touching the filesystem.
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub space: Arc<FockSpace>,
    pub tau_grid: Vec<f64>,
    pub records: Vec<StatisticsRecord>,
    pub summary: SummaryReport,
    /// Reduced per-mode density matrices at tau* (index = mode).
    pub rho_modes_at_star: Option<Vec<DensityMatrix>>,
    /// Snapshot reduced matrices of dissipative runs: (grid index, per-mode).
    pub snapshot_rhos: Vec<(usize, Vec<DensityMatrix>)>,
    /// Per-trajectory (n, n^2) at snapshots: (grid index, [mode][trajectory]).
    pub snapshot_per_traj: Vec<(usize, Vec<Vec<(f64, f64)>>)>,
    /// Full pure state at the tau* grid point (unitary runs only).
    pub state_at_star: Option<PureState>,
    /// Pure states at every grid point (unitary runs only).
    pub pure_states: Option<Vec<PureState>>,
}

fn build_hamiltonian(
    space: &FockSpace,
    cfg: &ScenarioConfig,
) -> Result<crate::sparse::SparseOperator> {
    // generators are divided by g: time is tau = g t
    let g = cfg.couplings.g;
    if g <= 0.0 {
        return Err(SimError::InvalidConfig(
            "g must be > 0 for dimensionless time".into(),
        ));
    }
    let h = match cfg.hamiltonian {
        HamiltonianKind::Int1 => build_h_int1(space, &cfg.couplings)?,
        HamiltonianKind::Int2 => build_h_int2(space, cfg.couplings.g)?,
    };
    Ok(h.scale(Complex64::new(1.0 / g, 0.0)))
}

fn record_from_moments(tau: f64, mms: &[ModeMoments], k: f64, purity3: f64) -> StatisticsRecord {
    let mut rec = StatisticsRecord {
        tau,
        n: [0.0; 3],
        var_x: [0.0; 3],
        var_p: [0.0; 3],
        ff: [f64::NAN; 3],
        k,
        purity3,
    };
    for (m, mm) in mms.iter().enumerate().take(3) {
        rec.n[m] = mm.n;
        rec.var_x[m] = mm.var_x();
        rec.var_p[m] = mm.var_p();
        rec.ff[m] = if mm.n > 1e-12 { mm.fano() } else { f64::NAN };
    }
    rec
}

fn odd_sum(pn: &[f64]) -> f64 {
    pn.iter().skip(1).step_by(2).sum()
}

/// FF and its standard error from per-trajectory (n, n2) pairs, using 20
/// equal groups (or fewer for tiny ensembles).
pub fn fano_with_standard_error(per_traj: &[(f64, f64)]) -> (f64, Option<f64>) {
    let n_traj = per_traj.len();
    let mean_n: f64 = per_traj.iter().map(|&(n, _)| n).sum::<f64>() / n_traj as f64;
    let mean_n2: f64 = per_traj.iter().map(|&(_, n2)| n2).sum::<f64>() / n_traj as f64;
    let ff = (mean_n2 - mean_n * mean_n) / mean_n;
    let groups = 20.min(n_traj);
    if groups < 2 {
        return (ff, None);
    }
    let per_group = n_traj / groups;
    if per_group == 0 {
        return (ff, None);
    }
    let mut ffs = Vec::with_capacity(groups);
    for gi in 0..groups {
        let lo = gi * per_group;
        let hi = if gi == groups - 1 {
            n_traj
        } else {
            lo + per_group
        };
        let m = (hi - lo) as f64;
        let gn: f64 = per_traj[lo..hi].iter().map(|&(n, _)| n).sum::<f64>() / m;
        let gn2: f64 = per_traj[lo..hi].iter().map(|&(_, n2)| n2).sum::<f64>() / m;
        ffs.push((gn2 - gn * gn) / gn);
    }
    let mean: f64 = ffs.iter().sum::<f64>() / groups as f64;
    let var: f64 =
        ffs.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (groups as f64 - 1.0);
    (ff, Some((var / groups as f64).sqrt()))
}

fn wigner_axes(cfg: &ScenarioConfig) -> Vec<f64> {
    linspace(cfg.wigner_window[0], cfg.wigner_window[1], cfg.wigner_points)
}

/// Runs a scenario entirely in memory.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    cfg.validate()?;
    let config_hash = cfg.hash();
    let space = build_space(&cfg.truncation.max_occ, cfg.truncation.total_cap)?;
    let alphas = [
        cfg.alpha1.value(),
        cfg.alpha2.value(),
        Complex64::new(0.0, 0.0),
    ];
    let (psi0, truncation_loss) = coherent_product_state_with_loss(&space, &alphas, 1e-3)?;
    let h = build_hamiltonian(&space, cfg)?;
    let collapse = collapse_ops(&space, &cfg.couplings)?;
    let tau_grid = cfg.tau_grid();
    let decoupling = validate_decoupling(&cfg.couplings);
    let tol = cfg.solver_tol();

    let dissipative = !collapse.is_empty();
    let solver = match cfg.solver {
        SolverKind::Auto => {
            if dissipative {
                "trajectories"
            } else {
                "unitary"
            }
        }
        SolverKind::Dense => "dense",
        SolverKind::Trajectories => {
            if dissipative {
                "trajectories"
            } else {
                // no collapse channels: trajectories degenerate to one
                // unitary run, so run that directly
                "unitary"
            }
        }
    };

    let mut records: Vec<StatisticsRecord> = Vec::with_capacity(tau_grid.len());
    let tables = MomentTables::new(&space);
    let mut conservation = None;
    let mut trajectories_block = None;
    let mut pure_states: Option<Vec<PureState>> = None;
    // snapshot machinery for dissipative paths
    let mut snapshot_rhos: Vec<(usize, Vec<DensityMatrix>)> = Vec::new();
    let mut snapshot_per_traj: Vec<(usize, Vec<Vec<(f64, f64)>>)> = Vec::new();

    match solver {
        "unitary" => {
            let res = evolve_unitary(&h, &psi0, &tau_grid, tol)?;
            let n_op = crate::fock::total_number_op(&space);
            let n1 = crate::fock::number_op(&space, 0)?;
            let n2 = crate::fock::number_op(&space, 1)?;
            let n3 = crate::fock::number_op(&space, 2)?;
            let mut drifts = [0.0f64; 3];
            let mut refs = None;
            for (w, s) in res.states.iter().enumerate() {
                let amp = s.amplitudes();
                let mms: Vec<ModeMoments> =
                    (0..3).map(|m| tables.mode_moments(m, amp)).collect();
                let rho3 = partial_trace_pure(s, &[2])?;
                let p3 = purity(&rho3);
                records.push(record_from_moments(tau_grid[w], &mms, 1.0 / p3, p3));
                let vals = [
                    n_op.expectation(amp).re,
                    n1.expectation(amp).re - n2.expectation(amp).re,
                    2.0 * n1.expectation(amp).re + n3.expectation(amp).re,
                ];
                let r = *refs.get_or_insert(vals);
                for i in 0..3 {
                    drifts[i] = drifts[i].max((vals[i] - r[i]).abs());
                }
            }
            conservation = Some(ConservationBlock {
                max_norm_drift: res.meta.max_norm_drift,
                max_total_number_drift: drifts[0],
                max_n1_minus_n2_drift: drifts[1],
                max_2n1_plus_n3_drift: drifts[2],
            });
            pure_states = Some(res.states);
        }
        "dense" => {
            let rho0 = crate::states::to_density(&psi0);
            let res = evolve_lindblad_dense(&h, &own_ops(&collapse), &rho0, &tau_grid, tol)?;
            for (w, rho) in res.states.iter().enumerate() {
                let mut mms = Vec::with_capacity(3);
                for m in 0..3 {
                    let red = partial_trace_rho(rho, &[m])?;
                    mms.push(crate::observables::rho_mode_moments(&red)?);
                }
                let rho3 = partial_trace_rho(rho, &[2])?;
                let p3 = purity(&rho3);
                records.push(record_from_moments(tau_grid[w], &mms, f64::NAN, p3));
            }
            // keep reduced matrices at every snapshot for artifact emission
            for &t in &cfg.snapshot_taus {
                let w = nearest_index(&tau_grid, t);
                let rho = &res.states[w];
                let reds: Result<Vec<DensityMatrix>> =
                    (0..3).map(|m| partial_trace_rho(rho, &[m])).collect();
                snapshot_rhos.push((w, reds?));
            }
        }
        _ => {
            let stats = trajectory_statistics(
                &h,
                &own_ops(&collapse),
                &psi0,
                &tau_grid,
                cfg.n_traj,
                cfg.master_seed,
                &TrajectorySettings {
                    tol,
                    ..Default::default()
                },
                &StatsOptions {
                    snapshot_taus: cfg.snapshot_taus.clone(),
                    full_rho_at_snapshots: false,
                },
            )?;
            for (w, mms) in stats.moments.iter().enumerate() {
                records.push(record_from_moments(tau_grid[w], mms, f64::NAN, f64::NAN));
            }
            for snap in &stats.snapshots {
                // purity of the ensemble-averaged rho3 at the snapshot
                let p3 = purity(&snap.rho_modes[2]);
                records[snap.grid_index].purity3 = p3;
                snapshot_rhos.push((snap.grid_index, snap.rho_modes.clone()));
                snapshot_per_traj.push((snap.grid_index, snap.per_traj_n.clone()));
            }
            let total = stats.total_jumps();
            trajectories_block = Some(TrajectoryBlock {
                n_traj: cfg.n_traj,
                master_seed: cfg.master_seed,
                total_jumps: total,
                mean_jumps_per_traj: total as f64 / cfg.n_traj as f64,
                ff_standard_error: [None, None, None],
            });
        }
    }

    // extremal time from the n3 (first max) and n1 (first min) series
    let n3_series: Vec<(f64, f64)> = records.iter().map(|r| (r.tau, r.n[2])).collect();
    let n1_series: Vec<(f64, f64)> = records.iter().map(|r| (r.tau, r.n[0])).collect();
    let tau_star = match (
        find_extremal_time(&n3_series, ExtremumKind::FirstMax),
        find_extremal_time(&n1_series, ExtremumKind::FirstMin),
    ) {
        (Ok(mx), Ok(mn)) => Some(TauStarReport {
            n3_first_max: mx.tau,
            n1_first_min: mn.tau,
            grid_index: mx.grid_index,
            grid_tau: tau_grid[mx.grid_index],
        }),
        _ => None,
    };

    // observables and reduced states at the tau* grid point; dissipative
    // runs only keep reduced matrices at snapshots, so the extremal point
    // is evaluated at the nearest snapshot when one is close enough (the
    // detected extremum of a stochastic series can wander a few steps)
    let mut at_tau_star = None;
    let mut rho_modes_at_star = None;
    let mut state_at_star = None;
    let eval_point = tau_star.as_ref().and_then(|star| {
        if pure_states.is_some() {
            Some(star.grid_index)
        } else {
            snapshot_rhos
                .iter()
                .map(|(i, _)| *i)
                .min_by_key(|i| i.abs_diff(star.grid_index))
                .filter(|i| i.abs_diff(star.grid_index) <= 5)
        }
    });
    if let Some(w) = eval_point {
        let rec = &records[w];
        let rhos: Vec<DensityMatrix> = if let Some(states) = &pure_states {
            state_at_star = Some(states[w].clone());
            (0..3)
                .map(|m| partial_trace_pure(&states[w], &[m]))
                .collect::<Result<_>>()?
        } else {
            snapshot_rhos
                .iter()
                .find(|(i, _)| *i == w)
                .map(|(_, rhos)| rhos.clone())
                .expect("eval point is a snapshot")
        };
        let pn3: Vec<f64> = (0..rhos[2].dim()).map(|n| rhos[2].mat[(n, n)].re).collect();
        let axes = wigner_axes(&cfg);
        let (wmin, wvol) = if cfg.outputs.wigner {
            let g = wigner_grid(&rhos[2], &axes, &axes)?;
            (Some(g.min().0), Some(g.negativity_volume()))
        } else {
            (None, None)
        };
        let mut ff_se = [None, None, None];
        if let Some((_, per_traj)) = snapshot_per_traj.iter().find(|(i, _)| *i == w) {
            for m in 0..3 {
                let (_, se) = fano_with_standard_error(&per_traj[m]);
                ff_se[m] = se;
            }
        }
        if let Some(tb) = trajectories_block.as_mut() {
            tb.ff_standard_error = ff_se;
        }
        at_tau_star = Some(ObservableBlock {
            tau: rec.tau,
            n: rec.n,
            var_x: rec.var_x,
            var_p: rec.var_p,
            ff: [
                nan_to_none(rec.ff[0]),
                nan_to_none(rec.ff[1]),
                nan_to_none(rec.ff[2]),
            ],
            k: nan_to_none(rec.k),
            purity3: rec.purity3,
            p3_odd_sum: odd_sum(&pn3),
            wigner_min_mode3: wmin,
            negativity_volume_mode3: wvol,
        });
        rho_modes_at_star = Some(rhos);
    }

    let summary = SummaryReport {
        config_hash: config_hash.clone(),
        hamiltonian: cfg.hamiltonian,
        solver_used: solver.to_string(),
        decoupling,
        basis_dim: space.dim(),
        truncation_loss,
        tau_star,
        at_tau_star,
        conservation,
        trajectories: trajectories_block,
    };

    Ok(ScenarioRun {
        config: cfg.clone(),
        config_hash,
        space,
        tau_grid,
        records,
        summary,
        rho_modes_at_star,
        snapshot_rhos,
        snapshot_per_traj,
        state_at_star,
        pure_states,
    })
}

fn own_ops(ops: &[(usize, crate::sparse::SparseOperator)]) -> Vec<crate::sparse::SparseOperator> {
    ops.iter().map(|(_, c)| c.clone()).collect()
}

fn nearest_index(grid: &[f64], t: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

/// Writes every requested artifact of a finished run into `out_dir`.
pub fn emit_artifacts(run: &ScenarioRun, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let meta = vec![
        format!("config_hash {}", run.config_hash),
        format!("solver {}", run.summary.solver_used),
    ];
    let cfg = &run.config;
    if cfg.outputs.timeseries {
        io::write_table(
            &out_dir.join("timeseries.dat"),
            &meta,
            &TIMESERIES_COLUMNS,
            run.records.iter().map(|r| r.row()),
        )?;
    }
    run.summary.save(&out_dir.join("summary.json"))?;

    let star_tau = match &run.summary.tau_star {
        Some(s) => s.grid_tau,
        None => return Ok(()),
    };
    let mut star_meta = meta.clone();
    star_meta.push(format!("tau_star {}", fmt_g9(star_tau)));

    if let Some(rhos) = &run.rho_modes_at_star {
        for (m, rho) in rhos.iter().enumerate() {
            io::save_density(
                &out_dir.join(format!("rho_mode{}_taustar.json", m + 1)),
                rho,
            )?;
            if cfg.outputs.distributions {
                let pn: Vec<Vec<f64>> = photon_distribution_rho(rho)?
                    .into_iter()
                    .enumerate()
                    .map(|(n, p)| vec![n as f64, p])
                    .collect();
                io::write_table(
                    &out_dir.join(format!("dist_mode{}_taustar.dat", m + 1)),
                    &star_meta,
                    &["n", "p"],
                    pn.into_iter(),
                )?;
            }
        }
        if cfg.outputs.wigner {
            let axes = wigner_axes(cfg);
            let g = wigner_grid(&rhos[2], &axes, &axes)?;
            io::write_wigner(&out_dir.join("wigner_mode3_taustar.dat"), &star_meta, &g)?;
            if cfg.outputs.marginals {
                emit_marginals(&g, &star_meta, out_dir, "mode3")?;
            }
            // for the decoupled picture also emit the number-phase-rotated
            // (physical-mode) Wigner function when the full state is pure
            if cfg.hamiltonian == HamiltonianKind::Int2 {
                if let Some(psi) = &run.state_at_star {
                    let rotated = apply_number_phase(psi, 1.0, star_tau);
                    let rho3 = partial_trace_pure(&rotated, &[2])?;
                    let g2 = wigner_grid(&rho3, &axes, &axes)?;
                    io::write_wigner(
                        &out_dir.join("wigner_mode3_taustar_apicture.dat"),
                        &star_meta,
                        &g2,
                    )?;
                }
            }
        }
    }
    if cfg.outputs.states {
        if let Some(psi) = &run.state_at_star {
            io::save_state(&out_dir.join("state_taustar.json"), psi)?;
        }
    }
    Ok(())
}

fn emit_marginals(
    g: &WignerGrid,
    meta: &[String],
    out_dir: &Path,
    label: &str,
) -> Result<()> {
    let mx = g.marginal_x();
    io::write_table(
        &out_dir.join(format!("marginal_x_{label}_taustar.dat")),
        meta,
        &["x", "p_of_x"],
        g.xs.iter().zip(&mx).map(|(&x, &v)| vec![x, v]),
    )?;
    let mp = g.marginal_p();
    io::write_table(
        &out_dir.join(format!("marginal_p_{label}_taustar.dat")),
        meta,
        &["p", "p_of_p"],
        g.ps.iter().zip(&mp).map(|(&p, &v)| vec![p, v]),
    )?;
    Ok(())
}

/// Extremal-time search without artifact bookkeeping: propagates the
/// scenario, returns (tau* from n3 max, tau* from n1 min).
pub fn scan_extremum(cfg: &ScenarioConfig) -> Result<TauStarReport> {
    let run = run_scenario(&ScenarioConfig {
        outputs: OutputsSpec {
            timeseries: false,
            wigner: false,
            distributions: false,
            marginals: false,
            states: false,
        },
        ..cfg.clone()
    })?;
    run.summary
        .tau_star
        .clone()
        .ok_or_else(|| SimError::NoExtremum("scenario has no interior extremum".into()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub tau_a: f64,
    pub tau_b: f64,
    /// Uhlmann fidelity per mode between the two runs' reduced states.
    pub fidelity: Vec<f64>,
}

/// Compares two run directories: mode-wise Uhlmann fidelities between the
/// reduced density matrices stored at tau*.
pub fn compare_runs(dir_a: &Path, dir_b: &Path) -> Result<CompareReport> {
    let sum_a = SummaryReport::load(&dir_a.join("summary.json"))?;
    let sum_b = SummaryReport::load(&dir_b.join("summary.json"))?;
    let tau_a = sum_a
        .tau_star
        .as_ref()
        .map(|s| s.grid_tau)
        .ok_or_else(|| SimError::InvalidConfig("run A has no tau*".into()))?;
    let tau_b = sum_b
        .tau_star
        .as_ref()
        .map(|s| s.grid_tau)
        .ok_or_else(|| SimError::InvalidConfig("run B has no tau*".into()))?;
    let mut fids = Vec::with_capacity(3);
    for m in 1..=3 {
        let ra = io::load_density(&dir_a.join(format!("rho_mode{m}_taustar.json")))?;
        let rb = io::load_density(&dir_b.join(format!("rho_mode{m}_taustar.json")))?;
        fids.push(fidelity(&ra, &rb)?);
    }
    Ok(CompareReport {
        tau_a,
        tau_b,
        fidelity: fids,
    })
}

/// The paper's three scenarios as ready-made configurations.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let base = ScenarioConfig {
        hamiltonian: HamiltonianKind::Int2,
        couplings: CouplingSet::decoupled(1.0),
        alpha1: ComplexSpec {
            abs2: 9.0,
            phase: std::f64::consts::FRAC_PI_4,
        },
        alpha2: ComplexSpec {
            abs2: 9.0,
            phase: std::f64::consts::FRAC_PI_4,
        },
        truncation: Truncation {
            max_occ: vec![27, 27, 38],
            total_cap: Some(42),
        },
        tau_max: 0.25,
        tau_step: 1e-3,
        solver: SolverKind::Auto,
        n_traj: 2000,
        master_seed: 20240207,
        snapshot_taus: vec![0.190],
        solver_tol: None,
        wigner_window: [-8.0, 8.0],
        wigner_points: 201,
        outputs: OutputsSpec::default(),
    };
    match name {
        "paper-s1" => Ok(base),
        "paper-s2" => Ok(ScenarioConfig {
            hamiltonian: HamiltonianKind::Int1,
            ..base
        }),
        "paper-s3" => Ok(ScenarioConfig {
            hamiltonian: HamiltonianKind::Int1,
            couplings: CouplingSet::decoupled(1.0).with_damping(0.2),
            ..base
        }),
        other => Err(SimError::InvalidConfig(format!(
            "unknown preset {other:?} (expected paper-s1, paper-s2 or paper-s3)"
        ))),
    }
}
