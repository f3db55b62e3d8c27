//! Level-of-fill incomplete LU and the Jacobi diagonal preconditioner.
//!
//! ILU(k) runs in two phases. The symbolic phase assigns every candidate
//! entry a fill level — original entries level 0, fill through pivot k
//! level lev(i,k) + lev(k,j) + 1 — and keeps entries with level ≤ k. The
//! numeric phase then performs row-wise (IKJ) incomplete elimination on that
//! frozen pattern: updates whose target falls outside the pattern are
//! discarded. No diagonal shifts are applied — a vanishing pivot is reported
//! as an error naming the row so the caller can pick another preconditioner.
//!
//! The triangular applications are inherently sequential sweeps; that is the
//! scalability bottleneck of ILU preconditioning, accepted here by design.

use super::{Preconditioner, SolverError};
use crate::sparse::CsrMatrix;
use std::collections::BTreeSet;
use std::ops::Bound::{Excluded, Unbounded};

const INF: usize = usize::MAX;

/// Incomplete factors L (strict lower, unit diagonal implied) and U (upper,
/// diagonal first per row), both CSR with ascending columns.
pub struct IluPrecond {
    n: usize,
    l_row_ptr: Vec<usize>,
    l_cols: Vec<usize>,
    l_vals: Vec<f64>,
    u_row_ptr: Vec<usize>,
    u_cols: Vec<usize>,
    u_vals: Vec<f64>,
}

/// Computes ILU(k) of a square matrix.
pub fn ilu_factor(a: &CsrMatrix, fill_level: usize) -> Result<IluPrecond, SolverError> {
    assert_eq!(a.n_rows, a.n_cols, "ILU needs a square matrix");
    let n = a.n_rows;

    // Symbolic phase: per-row kept columns with their fill levels. The level
    // of (i, k) is final when pivot k is reached because only pivots < k can
    // lower it, so one ascending sweep per row suffices.
    let mut l_row_ptr = vec![0usize];
    let mut l_cols: Vec<usize> = Vec::new();
    let mut u_row_ptr = vec![0usize];
    let mut u_cols: Vec<usize> = Vec::new();
    let mut u_levs: Vec<usize> = Vec::new();
    let mut lev = vec![INF; n];
    let mut pattern: BTreeSet<usize> = BTreeSet::new();
    for i in 0..n {
        pattern.clear();
        for p in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.col_idx[p];
            lev[j] = 0;
            pattern.insert(j);
        }
        let mut cursor: Option<usize> = None;
        loop {
            let next = match cursor {
                None => pattern.range(..i).next().copied(),
                Some(c) => pattern.range((Excluded(c), Unbounded)).next().copied().filter(|&k| k < i),
            };
            let Some(k) = next else { break };
            cursor = Some(k);
            // Fill from pivot row k's U part (diagonal first, skip it).
            for p in u_row_ptr[k] + 1..u_row_ptr[k + 1] {
                let j = u_cols[p];
                let new_lev = lev[k] + u_levs[p] + 1;
                if lev[j] != INF {
                    lev[j] = lev[j].min(new_lev);
                } else if new_lev <= fill_level {
                    lev[j] = new_lev;
                    pattern.insert(j);
                }
            }
        }
        if lev[i] == INF {
            // Structurally empty diagonal even after fill.
            for &j in &pattern {
                lev[j] = INF;
            }
            return Err(SolverError::ZeroPivot { row: i });
        }
        for &j in &pattern {
            if j < i {
                l_cols.push(j);
            } else if j > i {
                u_cols.push(j);
                u_levs.push(lev[j]);
            }
            lev[j] = INF;
        }
        // Diagonal stored first in the U row.
        let u_start = u_row_ptr[i];
        u_cols.insert(u_start, i);
        u_levs.insert(u_start, 0);
        l_row_ptr.push(l_cols.len());
        u_row_ptr.push(u_cols.len());
    }

    // Numeric phase: incomplete elimination on the frozen pattern.
    let mut l_vals = vec![0.0; l_cols.len()];
    let mut u_vals = vec![0.0; u_cols.len()];
    let mut w = vec![0.0; n];
    let mut in_pattern = vec![false; n];
    for i in 0..n {
        for p in l_row_ptr[i]..l_row_ptr[i + 1] {
            in_pattern[l_cols[p]] = true;
        }
        for p in u_row_ptr[i]..u_row_ptr[i + 1] {
            in_pattern[u_cols[p]] = true;
        }
        for p in a.row_ptr[i]..a.row_ptr[i + 1] {
            w[a.col_idx[p]] = a.vals[p];
        }
        for p in l_row_ptr[i]..l_row_ptr[i + 1] {
            let k = l_cols[p];
            let lik = w[k] / u_vals[u_row_ptr[k]];
            w[k] = lik;
            if lik != 0.0 {
                for q in u_row_ptr[k] + 1..u_row_ptr[k + 1] {
                    let j = u_cols[q];
                    if in_pattern[j] {
                        w[j] -= lik * u_vals[q];
                    }
                }
            }
        }
        if w[i] == 0.0 {
            return Err(SolverError::ZeroPivot { row: i });
        }
        for p in l_row_ptr[i]..l_row_ptr[i + 1] {
            let j = l_cols[p];
            l_vals[p] = w[j];
            w[j] = 0.0;
            in_pattern[j] = false;
        }
        for p in u_row_ptr[i]..u_row_ptr[i + 1] {
            let j = u_cols[p];
            u_vals[p] = w[j];
            w[j] = 0.0;
            in_pattern[j] = false;
        }
    }

    Ok(IluPrecond { n, l_row_ptr, l_cols, l_vals, u_row_ptr, u_cols, u_vals })
}

impl IluPrecond {
    /// All stored positions (L strict-lower plus U upper), for pattern
    /// inspection; fill levels grow the pattern monotonically in k.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.l_cols.len() + self.u_cols.len());
        for i in 0..self.n {
            for p in self.l_row_ptr[i]..self.l_row_ptr[i + 1] {
                out.push((i, self.l_cols[p]));
            }
            for p in self.u_row_ptr[i]..self.u_row_ptr[i + 1] {
                out.push((i, self.u_cols[p]));
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.l_cols.len() + self.u_cols.len()
    }
}

impl Preconditioner for IluPrecond {
    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        let n = self.n;
        assert_eq!(r.len(), n);
        assert_eq!(z.len(), n);
        // Forward: L·y = r with unit diagonal.
        for i in 0..n {
            let mut acc = r[i];
            for p in self.l_row_ptr[i]..self.l_row_ptr[i + 1] {
                acc -= self.l_vals[p] * z[self.l_cols[p]];
            }
            z[i] = acc;
        }
        // Backward: U·z = y, diagonal first in each row.
        for i in (0..n).rev() {
            let d = self.u_row_ptr[i];
            let mut acc = z[i];
            for p in d + 1..self.u_row_ptr[i + 1] {
                acc -= self.u_vals[p] * z[self.u_cols[p]];
            }
            z[i] = acc / self.u_vals[d];
        }
    }
}

/// Diagonal (Jacobi) preconditioner: apply divides by the matrix diagonal.
pub struct JacobiPrecond {
    inv_diag: Vec<f64>,
}

pub fn jacobi_precond(a: &CsrMatrix) -> Result<JacobiPrecond, SolverError> {
    assert_eq!(a.n_rows, a.n_cols, "Jacobi needs a square matrix");
    let mut inv_diag = Vec::with_capacity(a.n_rows);
    for i in 0..a.n_rows {
        let d = a.get(i, i);
        if d == 0.0 {
            return Err(SolverError::ZeroDiagonal { row: i });
        }
        inv_diag.push(1.0 / d);
    }
    Ok(JacobiPrecond { inv_diag })
}

impl Preconditioner for JacobiPrecond {
    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        for i in 0..r.len() {
            z[i] = r[i] * self.inv_diag[i];
        }
    }
}
