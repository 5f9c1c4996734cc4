//! Complex sparse matrices in compressed-row form.

use num_complex::Complex64;

use crate::{Result, SimError};

/// Sparse complex operator over a Fock basis, stored as CSR.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<Complex64>,
    hermitian_hint: bool,
}

impl SparseOperator {
    /// Build from (row, col, value) triplets; duplicates are summed,
    /// exact zeros dropped.
    pub fn from_triplets(
        dim: usize,
        mut triplets: Vec<(u32, u32, Complex64)>,
        hermitian_hint: bool,
    ) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(u32, u32, Complex64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!((r as usize) < dim && (c as usize) < dim);
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        for (r, c, v) in merged {
            col_idx.push(c);
            values.push(v);
            row_ptr[r as usize + 1] = col_idx.len();
        }
        for i in 1..=dim {
            if row_ptr[i] < row_ptr[i - 1] {
                row_ptr[i] = row_ptr[i - 1];
            }
        }
        // drop exact zeros
        let mut op = SparseOperator {
            dim,
            row_ptr,
            col_idx,
            values,
            hermitian_hint,
        };
        op.prune();
        op
    }

    fn prune(&mut self) {
        let mut new_ptr = vec![0usize; self.dim + 1];
        let mut ci = Vec::with_capacity(self.col_idx.len());
        let mut va = Vec::with_capacity(self.values.len());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != Complex64::new(0.0, 0.0) {
                    ci.push(self.col_idx[k]);
                    va.push(self.values[k]);
                }
            }
            new_ptr[r + 1] = ci.len();
        }
        self.row_ptr = new_ptr;
        self.col_idx = ci;
        self.values = va;
    }

    pub fn zeros(dim: usize) -> Self {
        SparseOperator {
            dim,
            row_ptr: vec![0; dim + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
            hermitian_hint: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let t = (0..dim as u32)
            .map(|i| (i, i, Complex64::new(1.0, 0.0)))
            .collect();
        Self::from_triplets(dim, t, true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn set_hermitian_hint(&mut self, h: bool) {
        self.hermitian_hint = h;
    }

    /// Iterate over stored entries as (row, col, value).
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r as u32, self.col_idx[k], self.values[k]))
        })
    }

    /// y = A x
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[r] = acc;
        }
    }

    /// y += scale * A x
    pub fn apply_scaled_add(&self, scale: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[r] += scale * acc;
        }
    }

    /// Returns A x as a fresh vector.
    pub fn apply_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut y);
        y
    }

    /// <x| A |x>
    pub fn expectation(&self, x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.dim {
            let mut row = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.values[k] * x[self.col_idx[k] as usize];
            }
            acc += x[r].conj() * row;
        }
        acc
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); self.dim];
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] as usize == r {
                    d[r] += self.values[k];
                }
            }
        }
        d
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries().all(|(r, c, _)| r == c)
    }

    /// Copy without the diagonal entries.
    pub fn off_diagonal(&self) -> SparseOperator {
        let t = self
            .entries()
            .filter(|&(r, c, _)| r != c)
            .collect::<Vec<_>>();
        SparseOperator::from_triplets(self.dim, t, false)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> SparseOperator {
        let t = self
            .entries()
            .map(|(r, c, v)| (c, r, v.conj()))
            .collect::<Vec<_>>();
        SparseOperator::from_triplets(self.dim, t, self.hermitian_hint)
    }

    /// a*self + b*other
    pub fn linear_comb(&self, a: Complex64, other: &SparseOperator, b: Complex64) -> SparseOperator {
        assert_eq!(self.dim, other.dim);
        let mut t: Vec<(u32, u32, Complex64)> =
            self.entries().map(|(r, c, v)| (r, c, a * v)).collect();
        t.extend(other.entries().map(|(r, c, v)| (r, c, b * v)));
        SparseOperator::from_triplets(self.dim, t, false)
    }

    pub fn add(&self, other: &SparseOperator) -> SparseOperator {
        let one = Complex64::new(1.0, 0.0);
        let mut s = self.linear_comb(one, other, one);
        s.hermitian_hint = self.hermitian_hint && other.hermitian_hint;
        s
    }

    pub fn scale(&self, a: Complex64) -> SparseOperator {
        let t = self.entries().map(|(r, c, v)| (r, c, a * v)).collect();
        SparseOperator::from_triplets(self.dim, t, self.hermitian_hint && a.im == 0.0)
    }

    /// Sparse matrix product self * other.
    pub fn matmul(&self, other: &SparseOperator) -> SparseOperator {
        assert_eq!(self.dim, other.dim);
        let mut t = Vec::new();
        let mut acc: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); self.dim];
        let mut touched: Vec<u32> = Vec::new();
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                let m = self.col_idx[k] as usize;
                for k2 in other.row_ptr[m]..other.row_ptr[m + 1] {
                    let c = other.col_idx[k2];
                    if acc[c as usize] == Complex64::new(0.0, 0.0) {
                        touched.push(c);
                    }
                    acc[c as usize] += v * other.values[k2];
                }
            }
            for &c in &touched {
                let v = acc[c as usize];
                if v != Complex64::new(0.0, 0.0) {
                    t.push((r as u32, c, v));
                }
                acc[c as usize] = Complex64::new(0.0, 0.0);
            }
            touched.clear();
        }
        SparseOperator::from_triplets(self.dim, t, false)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// max |A - A^dagger| over entries; 0 for exactly Hermitian matrices.
    pub fn max_asymmetry(&self) -> f64 {
        let one = Complex64::new(1.0, 0.0);
        self.linear_comb(one, &self.dagger(), -one).max_abs()
    }

    /// Verifies the Hermitian hint within tolerance.
    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        let asym = self.max_asymmetry();
        if asym > tol {
            return Err(SimError::Numerical(format!(
                "operator asymmetry {asym:.3e} exceeds {tol:.3e}"
            )));
        }
        Ok(())
    }

    /// Maximum row count of off-diagonal entries.
    pub fn max_offdiag_per_row(&self) -> usize {
        (0..self.dim)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .filter(|&k| self.col_idx[k] as usize != r)
                    .count()
            })
            .max()
            .unwrap_or(0)
    }
}

/// max-entry magnitude of the commutator [a, b].
pub fn commutator_max_abs(a: &SparseOperator, b: &SparseOperator) -> f64 {
    let ab = a.matmul(b);
    let ba = b.matmul(a);
    let one = Complex64::new(1.0, 0.0);
    ab.linear_comb(one, &ba, -one).max_abs()
}
