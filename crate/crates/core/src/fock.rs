//! Truncated multimode Fock basis and the model's sparse operators.
//!
//! Basis ordering is deterministic: ascending total photon number, then
//! lexicographic within each total-number sector, so sectors occupy
//! contiguous index ranges.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::sparse::SparseOperator;
use crate::{Result, SimError};

/// Default cap on basis size; `build_space` rejects larger spaces.
pub const DEFAULT_DIM_LIMIT: usize = 5_000_000;

/// Indexed basis of multimode occupation tuples with per-mode caps and an
/// optional total-photon-number cap.
#[derive(Debug)]
pub struct FockSpace {
    max_occ: Vec<u32>,
    total_cap: Option<u32>,
    /// Flat occupation tuples, stride = mode_count.
    tuples: Vec<u32>,
    index: HashMap<Vec<u32>, usize>,
    /// sector_starts[n] = first index of the total-number-n sector;
    /// has max_total + 2 entries so sector n is starts[n]..starts[n+1].
    sector_starts: Vec<usize>,
}

impl FockSpace {
    pub fn build(max_occ: &[u32], total_cap: Option<u32>) -> Result<Arc<FockSpace>> {
        Self::build_with_limit(max_occ, total_cap, DEFAULT_DIM_LIMIT)
    }

    pub fn build_with_limit(
        max_occ: &[u32],
        total_cap: Option<u32>,
        limit: usize,
    ) -> Result<Arc<FockSpace>> {
        if max_occ.is_empty() {
            return Err(SimError::InvalidConfig(
                "at least one mode is required".into(),
            ));
        }
        let m = max_occ.len();
        let sum_caps: u64 = max_occ.iter().map(|&c| c as u64).sum();
        let max_total = match total_cap {
            Some(c) => (c as u64).min(sum_caps) as u32,
            None => sum_caps as u32,
        };
        let mut tuples: Vec<u32> = Vec::new();
        let mut sector_starts = Vec::with_capacity(max_total as usize + 2);
        let mut scratch = vec![0u32; m];
        for n in 0..=max_total {
            sector_starts.push(tuples.len() / m);
            enumerate_sector(max_occ, n, 0, n, &mut scratch, &mut tuples, limit)?;
        }
        sector_starts.push(tuples.len() / m);
        let dim = tuples.len() / m;
        let mut index = HashMap::with_capacity(dim);
        for i in 0..dim {
            index.insert(tuples[i * m..(i + 1) * m].to_vec(), i);
        }
        Ok(Arc::new(FockSpace {
            max_occ: max_occ.to_vec(),
            total_cap,
            tuples,
            index,
            sector_starts,
        }))
    }

    pub fn mode_count(&self) -> usize {
        self.max_occ.len()
    }

    pub fn dim(&self) -> usize {
        self.tuples.len() / self.mode_count()
    }

    pub fn max_occ(&self) -> &[u32] {
        &self.max_occ
    }

    pub fn total_cap(&self) -> Option<u32> {
        self.total_cap
    }

    pub fn tuple(&self, i: usize) -> &[u32] {
        let m = self.mode_count();
        &self.tuples[i * m..(i + 1) * m]
    }

    pub fn index_of(&self, tuple: &[u32]) -> Option<usize> {
        self.index.get(tuple).copied()
    }

    /// Total photon number of basis state i.
    pub fn total(&self, i: usize) -> u32 {
        self.tuple(i).iter().sum()
    }

    pub fn max_total(&self) -> u32 {
        self.sector_starts.len() as u32 - 2
    }

    /// Contiguous index range of the total-number-n sector.
    pub fn sector_range(&self, n: u32) -> Range<usize> {
        let n = n as usize;
        if n + 1 >= self.sector_starts.len() {
            return self.dim()..self.dim();
        }
        self.sector_starts[n]..self.sector_starts[n + 1]
    }

    pub fn sectors(&self) -> impl Iterator<Item = (u32, Range<usize>)> + '_ {
        (0..=self.max_total()).map(|n| (n, self.sector_range(n)))
    }

    /// Index of the tuple with mode `mode` lowered by one, if admissible.
    pub fn lowered(&self, i: usize, mode: usize) -> Option<usize> {
        let t = self.tuple(i);
        if t[mode] == 0 {
            return None;
        }
        let mut s = t.to_vec();
        s[mode] -= 1;
        self.index_of(&s)
    }
}

fn enumerate_sector(
    max_occ: &[u32],
    _n: u32,
    mode: usize,
    remaining: u32,
    scratch: &mut Vec<u32>,
    out: &mut Vec<u32>,
    limit: usize,
) -> Result<()> {
    let m = max_occ.len();
    if mode == m - 1 {
        if remaining <= max_occ[mode] {
            scratch[mode] = remaining;
            if out.len() / m >= limit {
                return Err(SimError::DimensionLimit {
                    dim: out.len() / m + 1,
                    limit,
                });
            }
            out.extend_from_slice(scratch);
        }
        return Ok(());
    }
    let hi = remaining.min(max_occ[mode]);
    for v in 0..=hi {
        scratch[mode] = v;
        enumerate_sector(max_occ, _n, mode + 1, remaining - v, scratch, out, limit)?;
    }
    Ok(())
}

/// Builds the truncated basis; rejects spaces above the dimension limit.
pub fn build_space(max_occ: &[u32], total_cap: Option<u32>) -> Result<Arc<FockSpace>> {
    FockSpace::build(max_occ, total_cap)
}

/// All nonlinear couplings and damping rates of the three-mode model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CouplingSet {
    /// Four-wave-mixing strength (phase matched, time independent).
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g12: f64,
    pub g13: f64,
    pub g23: f64,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
    #[serde(default)]
    pub gamma3: f64,
}

impl CouplingSet {
    /// Couplings satisfying the exact decoupling conditions:
    /// g_j = g/2, g_ij = g, no damping.
    pub fn decoupled(g: f64) -> Self {
        CouplingSet {
            g,
            g1: g / 2.0,
            g2: g / 2.0,
            g3: g / 2.0,
            g12: g,
            g13: g,
            g23: g,
            gamma1: 0.0,
            gamma2: 0.0,
            gamma3: 0.0,
        }
    }

    pub fn with_damping(mut self, gamma: f64) -> Self {
        self.gamma1 = gamma;
        self.gamma2 = gamma;
        self.gamma3 = gamma;
        self
    }

    pub fn gammas(&self) -> [f64; 3] {
        [self.gamma1, self.gamma2, self.gamma3]
    }

    pub fn validate(&self) -> Result<()> {
        if self.g < 0.0 {
            return Err(SimError::InvalidConfig("g must be >= 0".into()));
        }
        if self.gammas().iter().any(|&g| g < 0.0) {
            return Err(SimError::InvalidConfig("damping rates must be >= 0".into()));
        }
        Ok(())
    }

    /// Symmetric frequency-shift matrix M (2 g_i on the diagonal, g_ij off it).
    pub fn shift_matrix(&self) -> [[f64; 3]; 3] {
        [
            [2.0 * self.g1, self.g12, self.g13],
            [self.g12, 2.0 * self.g2, self.g23],
            [self.g13, self.g23, 2.0 * self.g3],
        ]
    }
}

/// Outcome of checking the SPM/XPM decoupling conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoupling {
    /// g1 = g2 = g3 = g/2 and g12 = g13 = g23 = g.
    Exact,
    /// Only the three linear relations 2g1+g12 = 2g13 etc. hold.
    RelationsOnly,
    None,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Classifies a coupling set against the decoupling conditions.
pub fn validate_decoupling(c: &CouplingSet) -> Decoupling {
    let exact = close(c.g1, c.g / 2.0)
        && close(c.g2, c.g / 2.0)
        && close(c.g3, c.g / 2.0)
        && close(c.g12, c.g)
        && close(c.g13, c.g)
        && close(c.g23, c.g);
    if exact {
        return Decoupling::Exact;
    }
    let relations = close(2.0 * c.g1 + c.g12, 2.0 * c.g13)
        && close(2.0 * c.g2 + c.g12, 2.0 * c.g23)
        && close(c.g13 + c.g23, 4.0 * c.g3);
    if relations {
        Decoupling::RelationsOnly
    } else {
        Decoupling::None
    }
}

fn check_mode(space: &FockSpace, mode: usize) -> Result<()> {
    if mode >= space.mode_count() {
        return Err(SimError::InvalidMode(mode));
    }
    Ok(())
}

fn require_three_modes(space: &FockSpace) -> Result<()> {
    if space.mode_count() != 3 {
        return Err(SimError::InvalidConfig(format!(
            "this Hamiltonian needs exactly 3 modes, space has {}",
            space.mode_count()
        )));
    }
    Ok(())
}

/// Ladder lowering operator: <..,n-1,..|a|..,n,..> = sqrt(n).
/// Entries whose target tuple is outside the truncation are dropped.
pub fn annihilation_op(space: &FockSpace, mode: usize) -> Result<SparseOperator> {
    check_mode(space, mode)?;
    let mut t = Vec::new();
    for i in 0..space.dim() {
        let n = space.tuple(i)[mode];
        if n == 0 {
            continue;
        }
        if let Some(j) = space.lowered(i, mode) {
            t.push((j as u32, i as u32, Complex64::new((n as f64).sqrt(), 0.0)));
        }
    }
    Ok(SparseOperator::from_triplets(space.dim(), t, false))
}

pub fn creation_op(space: &FockSpace, mode: usize) -> Result<SparseOperator> {
    Ok(annihilation_op(space, mode)?.dagger())
}

/// Diagonal occupation operator of one mode.
pub fn number_op(space: &FockSpace, mode: usize) -> Result<SparseOperator> {
    check_mode(space, mode)?;
    let t = (0..space.dim())
        .map(|i| {
            (
                i as u32,
                i as u32,
                Complex64::new(space.tuple(i)[mode] as f64, 0.0),
            )
        })
        .collect();
    Ok(SparseOperator::from_triplets(space.dim(), t, true))
}

/// Diagonal total-photon-number operator.
pub fn total_number_op(space: &FockSpace) -> SparseOperator {
    let t = (0..space.dim())
        .map(|i| (i as u32, i as u32, Complex64::new(space.total(i) as f64, 0.0)))
        .collect();
    SparseOperator::from_triplets(space.dim(), t, true)
}

/// Four-wave-mixing Hamiltonian g (a1 a2 a3+^2 + h.c.), hbar = 1.
/// Connects (n1,n2,n3) <-> (n1-1,n2-1,n3+2) with amplitude
/// g sqrt(n1 n2 (n3+1)(n3+2)); hard truncation at the basis boundary.
pub fn build_h_fwm(space: &FockSpace, g: f64) -> Result<SparseOperator> {
    require_three_modes(space)?;
    let mut t = Vec::new();
    for i in 0..space.dim() {
        let tu = space.tuple(i);
        let (n1, n2, n3) = (tu[0], tu[1], tu[2]);
        if n1 == 0 || n2 == 0 {
            continue;
        }
        let target = [n1 - 1, n2 - 1, n3 + 2];
        if let Some(j) = space.index_of(&target) {
            let amp = g * ((n1 as f64) * (n2 as f64) * ((n3 + 1) as f64) * ((n3 + 2) as f64)).sqrt();
            t.push((j as u32, i as u32, Complex64::new(amp, 0.0)));
            t.push((i as u32, j as u32, Complex64::new(amp, 0.0)));
        }
    }
    Ok(SparseOperator::from_triplets(space.dim(), t, true))
}

/// Self-phase-modulation Hamiltonian: diagonal sum_j g_j n_j (n_j - 1).
pub fn build_h_spm(space: &FockSpace, g1: f64, g2: f64, g3: f64) -> Result<SparseOperator> {
    require_three_modes(space)?;
    let gs = [g1, g2, g3];
    let t = (0..space.dim())
        .map(|i| {
            let tu = space.tuple(i);
            let e: f64 = (0..3)
                .map(|j| gs[j] * tu[j] as f64 * (tu[j] as f64 - 1.0))
                .sum();
            (i as u32, i as u32, Complex64::new(e, 0.0))
        })
        .collect();
    Ok(SparseOperator::from_triplets(space.dim(), t, true))
}

/// Cross-phase-modulation Hamiltonian: diagonal sum_{i<j} g_ij n_i n_j.
pub fn build_h_xpm(space: &FockSpace, g12: f64, g13: f64, g23: f64) -> Result<SparseOperator> {
    require_three_modes(space)?;
    let t = (0..space.dim())
        .map(|i| {
            let tu = space.tuple(i);
            let (n1, n2, n3) = (tu[0] as f64, tu[1] as f64, tu[2] as f64);
            let e = g12 * n1 * n2 + g13 * n1 * n3 + g23 * n2 * n3;
            (i as u32, i as u32, Complex64::new(e, 0.0))
        })
        .collect();
    Ok(SparseOperator::from_triplets(space.dim(), t, true))
}

/// Full interaction Hamiltonian: FWM + SPM + XPM.
pub fn build_h_int1(space: &FockSpace, c: &CouplingSet) -> Result<SparseOperator> {
    c.validate()?;
    let mut h = build_h_fwm(space, c.g)?
        .add(&build_h_spm(space, c.g1, c.g2, c.g3)?)
        .add(&build_h_xpm(space, c.g12, c.g13, c.g23)?);
    h.set_hermitian_hint(true);
    Ok(h)
}

/// Decoupled Hamiltonian g (b1 b2 b3+ b3+ + h.c.); same matrix as
/// `build_h_fwm` in the b-mode representation.
pub fn build_h_int2(space: &FockSpace, g: f64) -> Result<SparseOperator> {
    build_h_fwm(space, g)
}

/// Nonlinear frequency-shift operator Omega_i = sum_j M_ij n_j (diagonal).
pub fn build_omega_op(space: &FockSpace, c: &CouplingSet, i: usize) -> Result<SparseOperator> {
    require_three_modes(space)?;
    check_mode(space, i)?;
    let m = c.shift_matrix();
    let t = (0..space.dim())
        .map(|k| {
            let tu = space.tuple(k);
            let e: f64 = (0..3).map(|j| m[i][j] * tu[j] as f64).sum();
            (k as u32, k as u32, Complex64::new(e, 0.0))
        })
        .collect();
    Ok(SparseOperator::from_triplets(space.dim(), t, true))
}

/// Collapse operators C_j = sqrt(gamma_j) a_j for every gamma_j > 0,
/// returned with their mode indices.
pub fn collapse_ops(space: &FockSpace, c: &CouplingSet) -> Result<Vec<(usize, SparseOperator)>> {
    require_three_modes(space)?;
    let mut out = Vec::new();
    for (j, &gamma) in c.gammas().iter().enumerate() {
        if gamma > 0.0 {
            let a = annihilation_op(space, j)?;
            out.push((j, a.scale(Complex64::new(gamma.sqrt(), 0.0))));
        }
    }
    Ok(out)
}
