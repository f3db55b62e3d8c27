//! Sparse LU factorization, left-looking over columns in natural order with
//! row partial pivoting (Gilbert-Peierls).
//!
//! Column j is produced by the sparse triangular solve L·x = A(:,j): a
//! depth-first search over the graph of the already-computed part of L finds
//! the nonzero pattern of x in topological order, then the numeric updates
//! run in that order, so the cost is proportional to the fill actually
//! produced. Columns are never permuted — elimination order is 0..n — which
//! keeps the factorization deterministic at the price of extra fill on wide
//! bandwidths.

use super::SolverError;
use crate::sparse::CsrMatrix;

const UNPIVOTED: usize = usize::MAX;

/// PA = LU with L unit-lower and U upper triangular, both in compressed
/// column form with rows numbered in pivot order.
pub struct LuFactors {
    n: usize,
    l_colptr: Vec<usize>,
    /// Row (pivot order) per L entry; the unit diagonal is stored explicitly
    /// as the first entry of each column.
    l_rows: Vec<usize>,
    l_vals: Vec<f64>,
    u_colptr: Vec<usize>,
    /// Row per U entry; the diagonal is the last entry of each column.
    u_rows: Vec<usize>,
    u_vals: Vec<f64>,
    /// pinv[original row] = pivot position.
    pinv: Vec<usize>,
}

impl LuFactors {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entries stored in L and U together (fill measure).
    pub fn nnz(&self) -> usize {
        self.l_rows.len() + self.u_rows.len()
    }

    /// Solves A·x = b through the two triangular sweeps.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        assert_eq!(x.len(), n);
        // y = L⁻¹·(P·b), overwriting x as workspace.
        for (i, &p) in self.pinv.iter().enumerate() {
            x[p] = b[i];
        }
        for j in 0..n {
            let yj = x[j];
            if yj != 0.0 {
                for p in self.l_colptr[j] + 1..self.l_colptr[j + 1] {
                    x[self.l_rows[p]] -= self.l_vals[p] * yj;
                }
            }
        }
        // x = U⁻¹·y, diagonal last in each column.
        for j in (0..n).rev() {
            let dp = self.u_colptr[j + 1] - 1;
            let xj = x[j] / self.u_vals[dp];
            x[j] = xj;
            if xj != 0.0 {
                for p in self.u_colptr[j]..dp {
                    x[self.u_rows[p]] -= self.u_vals[p] * xj;
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        x
    }
}

/// Depth-first search from `seed` through the column graph of L (edges
/// p → rows of L(:, pinv[p])), appending finished nodes to `topo` in
/// postorder. Nodes are original row indices.
#[allow(clippy::too_many_arguments)]
fn dfs_reach(
    seed: usize,
    l_colptr: &[usize],
    l_rows: &[usize],
    pinv: &[usize],
    marked: &mut [bool],
    node_stack: &mut Vec<usize>,
    pos_stack: &mut Vec<usize>,
    topo: &mut Vec<usize>,
) {
    if marked[seed] {
        return;
    }
    marked[seed] = true;
    node_stack.push(seed);
    pos_stack.push(if pinv[seed] == UNPIVOTED { 0 } else { l_colptr[pinv[seed]] });
    while let Some(&i) = node_stack.last() {
        let col = pinv[i];
        let mut advanced = false;
        if col != UNPIVOTED {
            let pos = pos_stack.last_mut().unwrap();
            while *pos < l_colptr[col + 1] {
                let r = l_rows[*pos];
                *pos += 1;
                if !marked[r] {
                    marked[r] = true;
                    node_stack.push(r);
                    pos_stack.push(if pinv[r] == UNPIVOTED { 0 } else { l_colptr[pinv[r]] });
                    advanced = true;
                    break;
                }
            }
        }
        if !advanced {
            node_stack.pop();
            pos_stack.pop();
            topo.push(i);
        }
    }
}

/// Factors a square matrix. Fails with [`SolverError::Singular`] when a
/// column has no nonzero candidate pivot left.
pub fn lu_factor(a: &CsrMatrix) -> Result<LuFactors, SolverError> {
    assert_eq!(a.n_rows, a.n_cols, "LU needs a square matrix");
    let n = a.n_rows;
    let csc = a.to_csc();

    let mut l_colptr = Vec::with_capacity(n + 1);
    let mut l_rows: Vec<usize> = Vec::new();
    let mut l_vals: Vec<f64> = Vec::new();
    let mut u_colptr = Vec::with_capacity(n + 1);
    let mut u_rows: Vec<usize> = Vec::new();
    let mut u_vals: Vec<f64> = Vec::new();
    l_colptr.push(0);
    u_colptr.push(0);

    let mut pinv = vec![UNPIVOTED; n];
    let mut x = vec![0.0; n];
    let mut marked = vec![false; n];
    let mut topo: Vec<usize> = Vec::new();
    let mut node_stack: Vec<usize> = Vec::new();
    let mut pos_stack: Vec<usize> = Vec::new();

    for j in 0..n {
        // Pattern of x = L⁻¹·A(:,j), topological via DFS.
        topo.clear();
        for p in csc.col_ptr[j]..csc.col_ptr[j + 1] {
            dfs_reach(
                csc.row_idx[p],
                &l_colptr,
                &l_rows,
                &pinv,
                &mut marked,
                &mut node_stack,
                &mut pos_stack,
                &mut topo,
            );
        }
        // Numeric sparse solve in reverse postorder.
        for p in csc.col_ptr[j]..csc.col_ptr[j + 1] {
            x[csc.row_idx[p]] = csc.vals[p];
        }
        for &i in topo.iter().rev() {
            let col = pinv[i];
            if col == UNPIVOTED {
                continue;
            }
            let xi = x[i];
            if xi != 0.0 {
                // Skip the stored unit diagonal (first entry).
                for p in l_colptr[col] + 1..l_colptr[col + 1] {
                    x[l_rows[p]] -= l_vals[p] * xi;
                }
            }
        }
        // Partial pivot: largest magnitude among not-yet-pivoted rows.
        let mut pivot_row = UNPIVOTED;
        let mut pivot_abs = 0.0;
        for &i in &topo {
            if pinv[i] == UNPIVOTED && x[i].abs() > pivot_abs {
                pivot_abs = x[i].abs();
                pivot_row = i;
            }
        }
        if pivot_row == UNPIVOTED || pivot_abs == 0.0 {
            return Err(SolverError::Singular { col: j });
        }
        let pivot = x[pivot_row];
        pinv[pivot_row] = j;
        // U(:,j): already-pivoted rows, diagonal last.
        for &i in &topo {
            if pinv[i] < j {
                u_rows.push(pinv[i]);
                u_vals.push(x[i]);
            }
        }
        u_rows.push(j);
        u_vals.push(pivot);
        u_colptr.push(u_rows.len());
        // L(:,j): unit diagonal first, then the remaining rows scaled.
        l_rows.push(pivot_row);
        l_vals.push(1.0);
        for &i in &topo {
            if pinv[i] == UNPIVOTED {
                l_rows.push(i);
                l_vals.push(x[i] / pivot);
            }
        }
        l_colptr.push(l_rows.len());
        for &i in &topo {
            x[i] = 0.0;
            marked[i] = false;
        }
    }
    // Renumber L rows into pivot order so both factors live in P·A space.
    for r in &mut l_rows {
        *r = pinv[*r];
    }
    Ok(LuFactors { n, l_colptr, l_rows, l_vals, u_colptr, u_rows, u_vals, pinv })
}

/// Factor-and-solve convenience for one right-hand side.
pub fn direct_lu(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, SolverError> {
    Ok(lu_factor(a)?.solve(b))
}
