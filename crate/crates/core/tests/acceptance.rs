//! Acceptance suite: one test per acceptance criterion, evaluated on the
//! shipped preset scenarios at full scale. Shared scenario runs are cached
//! so the suite propagates each preset once.
//!
//! Reference values are quoted at tau = 0.190, the reported extremal time
//! of the source analysis. On this suite's finer 1e-3 grid the n3 peak
//! refines to tau = 0.1923; the peak is flat to ~4e-4 relative between the
//! two times, and at 5e-3 sampling the argmax is exactly 0.190 (see
//! criterion 1, which checks both statements).

use std::sync::Arc;

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ringcat_core::dynamics::{
    ehrenfest_residual, evolve_lindblad_dense, evolve_unitary, trajectory_statistics,
    SolverTol, StatsOptions, TrajectorySettings,
};
use ringcat_core::fock::{
    build_h_int1, build_space, collapse_ops, CouplingSet,
};
use ringcat_core::linalg::trace_distance;
use ringcat_core::observables::MomentTables;
use ringcat_core::scenario::{
    fano_with_standard_error, preset, run_scenario, ScenarioRun, Truncation,
};
use ringcat_core::states::{
    coherent_product_state_with_loss, fidelity, partial_trace_pure, to_density,
    DensityMatrix, PureState, StateLabel,
};
use ringcat_core::wigner::{linspace, wigner_grid};

/// Grid index of the reference extremal time tau = 0.190 (step 1e-3).
const STAR: usize = 190;

static S1: Lazy<ScenarioRun> =
    Lazy::new(|| run_scenario(&preset("paper-s1").unwrap()).expect("S1 run"));
static S2: Lazy<ScenarioRun> =
    Lazy::new(|| run_scenario(&preset("paper-s2").unwrap()).expect("S2 run"));
static S3: Lazy<ScenarioRun> =
    Lazy::new(|| run_scenario(&preset("paper-s3").unwrap()).expect("S3 run"));

fn raised(name: &str) -> ScenarioRun {
    let mut cfg = preset(name).unwrap();
    cfg.truncation = Truncation {
        max_occ: vec![31, 31, 42],
        total_cap: Some(46),
    };
    run_scenario(&cfg).expect("raised-truncation run")
}

static S1_HI: Lazy<ScenarioRun> = Lazy::new(|| raised("paper-s1"));
static S2_HI: Lazy<ScenarioRun> = Lazy::new(|| raised("paper-s2"));

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn pn_at(run: &ScenarioRun, idx: usize, mode: usize) -> Vec<f64> {
    let states = run.pure_states.as_ref().expect("pure run");
    MomentTables::new(&run.space)
        .mode_moments(mode, states[idx].amplitudes())
        .pn
}

fn rho3_at(run: &ScenarioRun, idx: usize) -> DensityMatrix {
    let states = run.pure_states.as_ref().expect("pure run");
    partial_trace_pure(&states[idx], &[2]).unwrap()
}

#[test]
fn criterion_01_extremal_time() {
    for (name, run) in [("S1", &*S1), ("S2", &*S2)] {
        let star = run.summary.tau_star.as_ref().expect("extremum found");
        // the two extremal-time definitions must coincide
        assert!(
            (star.n3_first_max - star.n1_first_min).abs() <= run.config.tau_step,
            "{name}: n3 max at {} vs n1 min at {}",
            star.n3_first_max,
            star.n1_first_min
        );
        // at the reporting resolution of the reference (5e-3 sampling) the
        // argmax of n3 is exactly 0.190
        let coarse: Vec<(f64, f64)> = run
            .records
            .iter()
            .step_by(5)
            .map(|r| (r.tau, r.n[2]))
            .collect();
        let coarse_star = coarse
            .iter()
            .cloned()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        assert!(
            (coarse_star - 0.190).abs() < 1e-12,
            "{name}: coarse argmax {coarse_star} != 0.190"
        );
        // the refined fine-grid peak sits within the measured flatness
        // scale of the reference time (the peak moves by <4e-4 in n3
        // between 0.190 and 0.1923)
        assert!(
            (star.n3_first_max - 0.190).abs() <= 2.5e-3,
            "{name}: refined tau* {} too far from 0.190",
            star.n3_first_max
        );
        println!(
            "criterion 1 [{name}]: PASS - argmax(n3)@5e-3 grid = {coarse_star:.3}, refined tau* = {:.6}",
            star.n3_first_max
        );
    }
}

#[test]
fn criterion_02_s1_observables() {
    let r = &S1.records[STAR];
    assert!(rel(r.var_x[0], 2.312092) < 0.01, "Var(x1) {}", r.var_x[0]);
    assert!(rel(r.var_p[0], 2.312092) < 0.01, "Var(p1) {}", r.var_p[0]);
    assert!(rel(r.var_x[2], 22.362901) < 0.01, "Var(x3) {}", r.var_x[2]);
    assert!(rel(r.var_p[2], 0.526722) < 0.01, "Var(p3) {}", r.var_p[2]);
    assert!((r.k - 2.0248).abs() < 0.01, "K {}", r.k);
    assert!(rel(r.ff[0], 3.5071) < 0.005, "FF1 {}", r.ff[0]);
    assert!(rel(r.ff[2], 3.6268) < 0.005, "FF3 {}", r.ff[2]);
    let pn3 = pn_at(&S1, STAR, 2);
    let max_odd = pn3
        .iter()
        .skip(1)
        .step_by(2)
        .cloned()
        .fold(0.0_f64, f64::max);
    assert!(max_odd < 1e-10, "odd P3 entry {max_odd}");
    println!(
        "criterion 2: PASS - Var(x1)={:.6} Var(x3)={:.6} Var(p3)={:.6} K={:.5} FF1={:.5} FF3={:.5} max odd P3={max_odd:.2e}",
        r.var_x[0], r.var_x[2], r.var_p[2], r.k, r.ff[0], r.ff[2]
    );
}

#[test]
fn criterion_03_s2_observables() {
    let r = &S2.records[STAR];
    assert!(rel(r.n[0], 3.527376) < 0.003, "n1 {}", r.n[0]);
    assert!(rel(r.n[2], 10.9452) < 0.003, "n3 {}", r.n[2]);
    assert!(rel(r.var_x[0], 3.232426) < 0.01, "Var(x1) {}", r.var_x[0]);
    assert!(rel(r.var_p[0], 2.864985) < 0.01, "Var(p1) {}", r.var_p[0]);
    assert!(rel(r.var_x[2], 14.199947) < 0.01, "Var(x3) {}", r.var_x[2]);
    assert!(rel(r.var_p[2], 8.689676) < 0.01, "Var(p3) {}", r.var_p[2]);
    assert!((r.k - 6.8582).abs() < 0.03, "K {}", r.k);
    assert!(rel(r.ff[0], 3.5072) < 0.005, "FF1 {}", r.ff[0]);
    assert!(rel(r.ff[2], 3.6269) < 0.005, "FF3 {}", r.ff[2]);
    println!(
        "criterion 3: PASS - n1={:.6} n3={:.5} Var(x1)={:.6} Var(p1)={:.6} Var(x3)={:.6} Var(p3)={:.6} K={:.5}",
        r.n[0], r.n[2], r.var_x[0], r.var_p[0], r.var_x[2], r.var_p[2], r.k
    );
}

#[test]
fn criterion_04_cross_picture_identity() {
    // the two Hamiltonians differ by a diagonal phase, so all Fock-basis
    // populations and number statistics must agree
    let mut max_pn = 0.0_f64;
    for mode in 0..3 {
        let a = pn_at(&S1, STAR, mode);
        let b = pn_at(&S2, STAR, mode);
        for (x, y) in a.iter().zip(&b) {
            max_pn = max_pn.max((x - y).abs());
        }
    }
    assert!(max_pn < 1e-6, "P_j mismatch {max_pn}");
    let mut max_rel = 0.0_f64;
    for mode in 0..3 {
        let ra = &S1.records[STAR];
        let rb = &S2.records[STAR];
        max_rel = max_rel.max(rel(ra.n[mode], rb.n[mode]));
        max_rel = max_rel.max(rel(ra.ff[mode], rb.ff[mode]));
    }
    assert!(max_rel < 1e-4, "n/FF mismatch {max_rel}");
    println!(
        "criterion 4: PASS - max |P_S1 - P_S2| = {max_pn:.2e}, max rel n/FF diff = {max_rel:.2e}"
    );
}

#[test]
fn criterion_05_dissipative_scenario() {
    let r = &S3.records[STAR];
    let snap = &S3
        .snapshot_rhos
        .iter()
        .find(|(i, _)| *i == STAR)
        .expect("S3 snapshot at tau = 0.190")
        .1;
    let per_traj = &S3
        .snapshot_per_traj
        .iter()
        .find(|(i, _)| *i == STAR)
        .expect("S3 per-trajectory moments at tau = 0.190")
        .1;
    let tb = S3.summary.trajectories.as_ref().unwrap();
    // Fano factors within max(0.1, 3 SE) of the references
    for (mode, target) in [(0usize, 3.3486_f64), (2usize, 3.5557_f64)] {
        let (ff, se) = fano_with_standard_error(&per_traj[mode]);
        let se = se.expect("grouped standard error");
        let tol = (3.0 * se).max(0.1);
        assert!(
            (ff - target).abs() < tol,
            "FF{} = {ff} vs {target} (tol {tol})",
            mode + 1
        );
        assert!((ff - r.ff[mode]).abs() < 1e-9, "timeseries FF consistency");
    }
    // Fidelity between the non-dissipative and dissipative signal states.
    // The 0.903425 target is not reachable at gamma = 0.2: the exact dense
    // master equation gives F = 0.856..0.859 across truncations, in agreement
    // with the trajectory ensemble here, and 0.903 appears only when the
    // damping rate is halved, which in turn breaks the FF1 check above.
    // The target is asserted as stated and the measured value is printed.
    let rho3_nd = rho3_at(&S2, STAR);
    let f = fidelity(&rho3_nd, &snap[2]).unwrap();
    let f_ok = (f - 0.903425).abs() < 0.015;
    // dissipation introduces odd photon numbers
    let odd: f64 = (0..snap[2].dim())
        .skip(1)
        .step_by(2)
        .map(|n| snap[2].mat[(n, n)].re)
        .sum();
    assert!(odd > 0.01, "odd-P3 mass {odd}");
    println!(
        "criterion 5: {} - FF1={:.4} FF3={:.4} F={f:.6} (target 0.903425 ± 0.015) odd P3 mass={odd:.4} ({} jumps over {} trajectories)",
        if f_ok { "PASS" } else { "FAIL" },
        r.ff[0],
        r.ff[2],
        tb.total_jumps,
        tb.n_traj
    );
    assert!(f_ok, "fidelity {f} outside 0.903425 ± 0.015");
}

#[test]
fn criterion_06_conservation() {
    for (name, run) in [("S1", &*S1), ("S2", &*S2)] {
        let c = run.summary.conservation.as_ref().unwrap();
        assert!(c.max_norm_drift < 1e-7, "{name} norm drift");
        assert!(c.max_total_number_drift < 1e-6, "{name} N drift");
        assert!(c.max_n1_minus_n2_drift < 1e-6, "{name} n1-n2 drift");
        assert!(c.max_2n1_plus_n3_drift < 1e-6, "{name} 2n1+n3 drift");
        // The truncated, renormalized |alpha|^2 = 9 pump marginal starts at
        // <n1> = 9 - 1.0599e-5 (the N <= 42 cap removes high-n1 weight), so
        // the absolute identity n1 = 9 - n3/2 carries that constant offset.
        // Check the dynamical content (offset-corrected identity) tightly
        // and the absolute identity against the offset-inflated bound.
        let n1_0 = run.records[0].n[0];
        assert!((9.0 - n1_0).abs() < 1.1e-5, "{name}: initial n1 deficit");
        let mut max_dev = 0.0_f64;
        let mut max_dev_dyn = 0.0_f64;
        for r in &run.records {
            max_dev = max_dev.max((r.n[0] - (9.0 - r.n[2] / 2.0)).abs());
            max_dev_dyn = max_dev_dyn.max((r.n[0] - (n1_0 - r.n[2] / 2.0)).abs());
        }
        assert!(
            max_dev_dyn < 1e-7,
            "{name}: n1 = n1(0) - n3/2 violated by {max_dev_dyn}"
        );
        assert!(max_dev < 1.5e-5, "{name}: n1 = 9 - n3/2 violated by {max_dev}");
        println!(
            "criterion 6 [{name}]: PASS - norm drift {:.2e}, N drift {:.2e}, n1=9-n3/2 within {max_dev:.2e} (dynamical part {max_dev_dyn:.2e})",
            c.max_norm_drift, c.max_total_number_drift
        );
    }
}

#[test]
fn criterion_07_solver_cross_validation() {
    let space = build_space(&[3, 3, 3], None).unwrap();
    assert!(space.dim() <= 64);
    let alpha = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    // |alpha|^2 = 1 on max_occ 3 deliberately loses ~2% mass; both solvers
    // start from the same renormalized truncated state
    let (psi0, _) = coherent_product_state_with_loss(
        &space,
        &[alpha, alpha, Complex64::new(0.0, 0.0)],
        0.05,
    )
    .unwrap();
    let couplings = CouplingSet::decoupled(1.0).with_damping(0.2);
    let h = build_h_int1(&space, &couplings).unwrap();
    let ops: Vec<_> = collapse_ops(&space, &couplings)
        .unwrap()
        .into_iter()
        .map(|(_, c)| c)
        .collect();
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    let tol = SolverTol {
        rtol: 1e-10,
        atol: 1e-12,
    };
    let rho0 = to_density(&psi0);
    let dense = evolve_lindblad_dense(&h, &ops, &rho0, &grid, tol).unwrap();

    let n_traj = 4000;
    let snapshot_taus: Vec<f64> = vec![0.25, 0.5, 0.75, 1.0];
    let stats = trajectory_statistics(
        &h,
        &ops,
        &psi0,
        &grid,
        n_traj,
        42,
        &TrajectorySettings {
            tol,
            ..Default::default()
        },
        &StatsOptions {
            snapshot_taus: snapshot_taus.clone(),
            full_rho_at_snapshots: true,
        },
    )
    .unwrap();
    let bound = 5.0 / (n_traj as f64).sqrt();
    let mut worst_td = 0.0_f64;
    for snap in &stats.snapshots {
        let td = trace_distance(
            &snap.rho_full.as_ref().unwrap().mat,
            &dense.states[snap.grid_index].mat,
        );
        worst_td = worst_td.max(td);
        assert!(td <= bound, "trace distance {td} at tau {}", snap.tau);
        // per-mode mean photon numbers within 3 standard errors
        for mode in 0..3 {
            let (mean_n, se_n) = {
                let xs = &snap.per_traj_n[mode];
                let m: f64 = xs.iter().map(|&(n, _)| n).sum::<f64>() / xs.len() as f64;
                let var: f64 = xs
                    .iter()
                    .map(|&(n, _)| (n - m) * (n - m))
                    .sum::<f64>()
                    / (xs.len() as f64 - 1.0);
                (m, (var / xs.len() as f64).sqrt())
            };
            let red = ringcat_core::states::partial_trace_rho(
                &dense.states[snap.grid_index],
                &[mode],
            )
            .unwrap();
            let n_dense: f64 = (0..red.dim()).map(|n| n as f64 * red.mat[(n, n)].re).sum();
            assert!(
                (mean_n - n_dense).abs() <= 3.0 * se_n + 1e-9,
                "mode {mode} tau {}: {mean_n} vs {n_dense} (se {se_n})",
                snap.tau
            );
        }
    }

    // gamma = 0: dense Lindblad must coincide with unitary propagation
    let h0 = build_h_int1(&space, &CouplingSet::decoupled(1.0)).unwrap();
    let dense0 = evolve_lindblad_dense(&h0, &[], &rho0, &grid, tol).unwrap();
    let unit = evolve_unitary(&h0, &psi0, &grid, tol).unwrap();
    let mut worst0 = 0.0_f64;
    for (w, psi) in unit.states.iter().enumerate() {
        let td = trace_distance(&to_density(psi).mat, &dense0.states[w].mat);
        worst0 = worst0.max(td);
    }
    assert!(worst0 <= 1e-6, "gamma=0 dense vs unitary {worst0}");
    println!(
        "criterion 7: PASS - max trajectory/dense trace distance {worst_td:.4} (bound {bound:.4}), gamma=0 dense/unitary {worst0:.2e}"
    );
}

/// Harmonic-oscillator eigenfunction psi_n(x) by the stable normalized
/// recurrence psi_n = sqrt(2/n) x psi_{n-1} - sqrt((n-1)/n) psi_{n-2}.
fn hermite_funcs(x: f64, nmax: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(psi0);
    if nmax >= 1 {
        out.push(2.0_f64.sqrt() * x * psi0);
    }
    for n in 2..=nmax {
        let nf = n as f64;
        let v = (2.0 / nf).sqrt() * x * out[n - 1] - ((nf - 1.0) / nf).sqrt() * out[n - 2];
        out.push(v);
    }
    out
}

/// Direct numerical Wigner transform W(x,p) =
/// (1/2pi) Integral dy <x - y/2| rho |x + y/2> e^{i p y}, by Simpson
/// quadrature — the oracle the Laguerre kernel is checked against.
fn wigner_direct(mat: &nalgebra::DMatrix<Complex64>, x: f64, p: f64) -> f64 {
    let d = mat.nrows();
    let (ymax, ny) = (20.0, 2001); // odd count for Simpson
    let hy = 2.0 * ymax / (ny - 1) as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for iy in 0..ny {
        let y = -ymax + iy as f64 * hy;
        let left = hermite_funcs(x - 0.5 * y, d - 1);
        let right = hermite_funcs(x + 0.5 * y, d - 1);
        let mut kernel = Complex64::new(0.0, 0.0);
        for m in 0..d {
            for n in 0..d {
                kernel += mat[(m, n)] * left[m] * right[n];
            }
        }
        let w = if iy == 0 || iy == ny - 1 {
            1.0
        } else if iy % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * kernel * Complex64::new(0.0, p * y).exp();
    }
    (acc * hy / 3.0).re / (2.0 * std::f64::consts::PI)
}

fn random_density(rng: &mut ChaCha8Rng, d: usize) -> DensityMatrix {
    // rho = A A^dagger / Tr, a Haar-ish random full-rank mixed state
    let a = nalgebra::DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let mut m = &a * a.adjoint();
    let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
    m /= Complex64::new(tr, 0.0);
    DensityMatrix {
        mat: m,
        label: StateLabel::Modes {
            modes: vec![0],
            dims: vec![d],
        },
    }
}

#[test]
fn criterion_08_wigner_suite() {
    // kernel vs direct transform on random mixed states
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let d = rng.gen_range(2..=10);
        let rho = random_density(&mut rng, d);
        for _ in 0..5 {
            let x = rng.gen_range(-3.0..3.0);
            let p = rng.gen_range(-3.0..3.0);
            let kernel = wigner_grid(&rho, &[x], &[p]).unwrap().value(0, 0);
            let direct = wigner_direct(&rho.mat, x, p);
            worst = worst.max((kernel - direct).abs());
        }
    }
    assert!(worst < 1e-6, "kernel vs direct transform: {worst}");

    // vacuum value
    let mut vac = nalgebra::DMatrix::zeros(3, 3);
    vac[(0, 0)] = Complex64::new(1.0, 0.0);
    let vac = DensityMatrix {
        mat: vac,
        label: StateLabel::Modes {
            modes: vec![0],
            dims: vec![3],
        },
    };
    let w00 = wigner_grid(&vac, &[0.0], &[0.0]).unwrap().value(0, 0);
    assert!((w00 - 1.0 / std::f64::consts::PI).abs() < 1e-6);

    // S1 signal mode at the extremal time: normalized grid, negative
    // minimum, and mirror symmetry W(x,p) = W(-x,-p) of the two-lobe state
    let rho3 = rho3_at(&S1, STAR);
    let axes = linspace(-8.0, 8.0, 201);
    let g = wigner_grid(&rho3, &axes, &axes).unwrap();
    assert!((g.integral() - 1.0).abs() < 2e-3, "norm {}", g.integral());
    let (min_w, _, _) = g.min();
    assert!(min_w < 0.0, "min W {min_w}");
    let n = axes.len();
    let mut asym = 0.0_f64;
    for ix in 0..n {
        for ip in 0..n {
            asym = asym.max((g.value(ix, ip) - g.value(n - 1 - ix, n - 1 - ip)).abs());
        }
    }
    assert!(asym < 1e-8, "mirror asymmetry {asym}");
    println!(
        "criterion 8: PASS - kernel vs integral {worst:.2e}, vacuum W(0,0) ok, S1 grid norm {:.6}, min W {min_w:.4}, mirror asym {asym:.2e}",
        g.integral()
    );
}

#[test]
fn criterion_09_ehrenfest() {
    let space = build_space(&[6, 6, 8], Some(10)).unwrap();
    let couplings = CouplingSet::decoupled(1.0);
    let h = build_h_int1(&space, &couplings).unwrap();

    // O(dtau^2) scaling on a random normalized state. The state is kept
    // away from the truncation boundary: on boundary basis states the
    // commutator of the truncated Hamiltonian differs from the analytic
    // right-hand side, which would add a dtau-independent floor.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let amp: Vec<Complex64> = (0..space.dim())
        .map(|k| {
            let t = space.tuple(k);
            if t[0] <= 3 && t[1] <= 3 && t[2] <= 5 && t.iter().sum::<u32>() <= 7 {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let psi = PureState::from_amplitudes(Arc::clone(&space), amp).unwrap();
    let r1 = ehrenfest_residual(&h, &psi, &couplings, 0, 2e-3).unwrap();
    let r2 = ehrenfest_residual(&h, &psi, &couplings, 0, 1e-3).unwrap();
    let order = (r1 / r2).log2();
    assert!(
        (order - 2.0).abs() < 0.35,
        "halving dtau gave order {order} (r1={r1:.3e}, r2={r2:.3e})"
    );

    // paper-style initial state: residual below 1e-6 at dtau = 1e-4
    let alpha = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    let (psi0, _) = coherent_product_state_with_loss(
        &space,
        &[alpha, alpha, Complex64::new(0.0, 0.0)],
        1e-3,
    )
    .unwrap();
    let mut worst = 0.0_f64;
    for mode in 0..3 {
        let r = ehrenfest_residual(&h, &psi0, &couplings, mode, 1e-4).unwrap();
        worst = worst.max(r);
    }
    assert!(worst < 1e-6, "residual {worst}");
    println!(
        "criterion 9: PASS - FD order {order:.3}, max residual {worst:.2e} at dtau=1e-4"
    );
}

#[test]
fn criterion_10_truncation_convergence() {
    let mut worst = 0.0_f64;
    for (name, lo, hi) in [("S1", &*S1, &*S1_HI), ("S2", &*S2, &*S2_HI)] {
        let a = &lo.records[STAR];
        let b = &hi.records[STAR];
        let mut check = |label: &str, x: f64, y: f64| {
            let r = rel(x, y);
            worst = worst.max(r);
            assert!(r < 1e-4, "{name} {label}: {x} vs {y} (rel {r:.2e})");
        };
        let sa = lo.summary.tau_star.as_ref().unwrap();
        let sb = hi.summary.tau_star.as_ref().unwrap();
        check("tau*", sa.n3_first_max, sb.n3_first_max);
        for m in [0usize, 2] {
            check("n", a.n[m], b.n[m]);
            check("var_x", a.var_x[m], b.var_x[m]);
            check("var_p", a.var_p[m], b.var_p[m]);
            check("ff", a.ff[m], b.ff[m]);
        }
        check("k", a.k, b.k);
    }
    println!("criterion 10: PASS - max relative shift under raised truncation {worst:.2e}");
}
