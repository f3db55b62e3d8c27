//! Compressed sparse row matrices and Matrix Market IO.
//!
//! Assembly is two-pass: a [`PatternBuilder`] collects the index pairs once,
//! [`PatternBuilder::build`] freezes them into a zero-valued [`CsrMatrix`],
//! and repeated assemblies (Newton steps, time steps) refill the values in
//! place through [`CsrMatrix::add_entry`] without touching the symbolic
//! structure. Column indices are sorted within each row, so entry lookup is a
//! binary search and pattern comparison is slice equality.

use nalgebra::DMatrix;
use std::io::{BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Sparse matrix in compressed sparse row form; `col_idx` is ascending within
/// each row and duplicates are merged at build time.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Sparse matrix in compressed sparse column form (the layout column
/// elimination wants).
#[derive(Debug, Clone)]
pub struct CscMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

/// First assembly pass: records which (row, col) pairs can be nonzero.
pub struct PatternBuilder {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<usize>>,
}

impl PatternBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        PatternBuilder { n_rows, n_cols, rows: vec![Vec::new(); n_rows] }
    }

    /// Marks (i, j) as structurally nonzero; duplicate inserts are fine.
    pub fn insert(&mut self, i: usize, j: usize) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.rows[i].push(j);
    }

    /// Freezes the pattern into a zero-valued matrix.
    pub fn build(mut self) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in &mut self.rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, vals: vec![0.0; nnz] }
    }
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Zeroes the values, keeping the pattern, for the next assembly pass.
    pub fn reset_values(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    fn entry_index(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].binary_search(&j).ok().map(|p| lo + p)
    }

    /// Adds `v` to entry (i, j).
    ///
    /// # Panics
    /// Panics if (i, j) is not in the pattern — assembly must scatter into a
    /// pattern built from the same cell loop.
    pub fn add_entry(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .entry_index(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is outside the matrix pattern"));
        self.vals[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entry_index(i, j).map_or(0.0, |p| self.vals[p])
    }

    /// y = A·x.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.col_idx[p]];
            }
            y[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Aᵗ in CSR form (counting sort over columns; output rows are sorted).
    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut col_idx = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        let mut next = counts.clone();
        for i in 0..self.n_rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let q = next[j];
                next[j] += 1;
                col_idx[q] = i;
                vals[q] = self.vals[p];
            }
        }
        CsrMatrix { n_rows: self.n_cols, n_cols: self.n_rows, row_ptr: counts, col_idx, vals }
    }

    /// The same matrix in compressed sparse column form.
    pub fn to_csc(&self) -> CscMatrix {
        let t = self.transpose();
        CscMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            col_ptr: t.row_ptr,
            row_idx: t.col_idx,
            vals: t.vals,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[p])] = self.vals[p];
            }
        }
        m
    }

    /// Structural equality: same shape and the same index sets, values ignored.
    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// max_{ij} |a_ij − a_ji| over the union pattern (symmetry defect).
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut defect: f64 = 0.0;
        for i in 0..self.n_rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                defect = defect.max((self.vals[p] - t.get(i, j)).abs());
            }
            for p in t.row_ptr[i]..t.row_ptr[i + 1] {
                let j = t.col_idx[p];
                defect = defect.max((t.vals[p] - self.get(i, j)).abs());
            }
        }
        defect
    }
}

/// Writes a matrix in Matrix Market coordinate format (1-based, general).
pub fn write_matrix_market(m: &CsrMatrix, path: &Path) -> Result<(), SparseError> {
    let io_err = |source| SparseError::Io { path: path.display().to_string(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", m.n_rows, m.n_cols, m.nnz())?;
        for i in 0..m.n_rows {
            for p in m.row_ptr[i]..m.row_ptr[i + 1] {
                writeln!(w, "{} {} {:.17e}", i + 1, m.col_idx[p] + 1, m.vals[p])?;
            }
        }
        w.flush()
    })();
    res.map_err(io_err)
}

/// Writes a vector in Matrix Market array format (one column).
pub fn write_vector_market(v: &[f64], path: &Path) -> Result<(), SparseError> {
    let io_err = |source| SparseError::Io { path: path.display().to_string(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix array real general")?;
        writeln!(w, "{} 1", v.len())?;
        for x in v {
            writeln!(w, "{x:.17e}")?;
        }
        w.flush()
    })();
    res.map_err(io_err)
}

fn data_lines(path: &Path) -> Result<(String, Vec<String>), SparseError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| SparseError::Io { path: path.display().to_string(), source })?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SparseError::Format {
            path: path.display().to_string(),
            msg: "empty file".into(),
        })?
        .to_ascii_lowercase();
    let body = lines
        .filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty())
        .map(str::to_owned)
        .collect();
    Ok((header, body))
}

fn format_err(path: &Path, msg: impl Into<String>) -> SparseError {
    SparseError::Format { path: path.display().to_string(), msg: msg.into() }
}

fn parse_fields<const N: usize>(path: &Path, line: &str) -> Result<[f64; N], SparseError> {
    let mut out = [0.0; N];
    let mut it = line.split_whitespace();
    for slot in &mut out {
        let tok = it.next().ok_or_else(|| format_err(path, format!("short line: {line:?}")))?;
        *slot = tok
            .parse()
            .map_err(|_| format_err(path, format!("bad number {tok:?} in line {line:?}")))?;
    }
    Ok(out)
}

/// Reads a Matrix Market coordinate file (general or symmetric).
pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix, SparseError> {
    let (header, body) = data_lines(path)?;
    if !header.starts_with("%%matrixmarket matrix coordinate real") {
        return Err(format_err(path, format!("unsupported header {header:?}")));
    }
    let symmetric = header.contains("symmetric");
    let mut lines = body.iter();
    let size = lines.next().ok_or_else(|| format_err(path, "missing size line"))?;
    let [nr, nc, nnz] = parse_fields::<3>(path, size)?;
    let (n_rows, n_cols, nnz) = (nr as usize, nc as usize, nnz as usize);
    let mut triplets = Vec::with_capacity(nnz);
    for line in lines {
        let [i, j, v] = parse_fields::<3>(path, line)?;
        let (i, j) = (i as usize, j as usize);
        if i == 0 || j == 0 || i > n_rows || j > n_cols {
            return Err(format_err(path, format!("index out of range in line {line:?}")));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    if triplets.len() < nnz {
        return Err(format_err(path, format!("expected {nnz} entries, found {}", triplets.len())));
    }
    let mut builder = PatternBuilder::new(n_rows, n_cols);
    for &(i, j, _) in &triplets {
        builder.insert(i, j);
    }
    let mut m = builder.build();
    for (i, j, v) in triplets {
        m.add_entry(i, j, v);
    }
    Ok(m)
}

/// Reads a Matrix Market array file holding one column.
pub fn read_vector_market(path: &Path) -> Result<Vec<f64>, SparseError> {
    let (header, body) = data_lines(path)?;
    if !header.starts_with("%%matrixmarket matrix array real") {
        return Err(format_err(path, format!("unsupported header {header:?}")));
    }
    let mut lines = body.iter();
    let size = lines.next().ok_or_else(|| format_err(path, "missing size line"))?;
    let [n, one] = parse_fields::<2>(path, size)?;
    if one as usize != 1 {
        return Err(format_err(path, "expected a single-column array"));
    }
    let mut v = Vec::with_capacity(n as usize);
    for line in lines {
        let [x] = parse_fields::<1>(path, line)?;
        v.push(x);
    }
    if v.len() != n as usize {
        return Err(format_err(path, format!("expected {} values, found {}", n as usize, v.len())));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, fill: f64) -> CsrMatrix {
        let mut b = PatternBuilder::new(n, n);
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || rng.gen_bool(fill) {
                    b.insert(i, j);
                    entries.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let mut m = b.build();
        for (i, j, v) in entries {
            m.add_entry(i, j, v);
        }
        m
    }

    #[test]
    fn pattern_builder_sorts_and_merges() {
        let mut b = PatternBuilder::new(2, 3);
        b.insert(0, 2);
        b.insert(0, 0);
        b.insert(0, 2);
        b.insert(1, 1);
        let mut m = b.build();
        assert_eq!(m.row_ptr, vec![0, 2, 3]);
        assert_eq!(m.col_idx, vec![0, 2, 1]);
        assert_eq!(m.nnz(), 3);
        m.add_entry(0, 2, 5.0);
        m.add_entry(0, 2, 1.0);
        assert_eq!(m.get(0, 2), 6.0);
        assert_eq!(m.get(1, 0), 0.0);
        m.reset_values();
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    #[should_panic(expected = "outside the matrix pattern")]
    fn scatter_outside_pattern_panics() {
        let mut b = PatternBuilder::new(2, 2);
        b.insert(0, 0);
        b.build().add_entry(0, 1, 1.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng, 17, 0.2);
        let x: Vec<f64> = (0..17).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = m.matvec(&x);
        let dense = m.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..17 {
            assert!((y[i] - dense[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn transpose_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_matrix(&mut rng, 23, 0.15);
        let tt = m.transpose().transpose();
        assert!(m.same_pattern(&tt));
        assert_eq!(m.vals, tt.vals);
        assert_eq!(m.to_dense().transpose(), m.transpose().to_dense());

        let csc = m.to_csc();
        // CSC column j must list the same (row, value) pairs as dense column j.
        let dense = m.to_dense();
        for j in 0..m.n_cols {
            for p in csc.col_ptr[j]..csc.col_ptr[j + 1] {
                assert_eq!(csc.vals[p], dense[(csc.row_idx[p], j)]);
            }
        }
    }

    #[test]
    fn symmetry_defect_detects_asymmetry() {
        let mut b = PatternBuilder::new(2, 2);
        b.insert(0, 1);
        b.insert(1, 0);
        let mut m = b.build();
        m.add_entry(0, 1, 1.0);
        m.add_entry(1, 0, 1.0 + 3e-13);
        assert!((m.symmetry_defect() - 3e-13).abs() < 1e-15);
        // One-sided pattern still counts.
        let mut b = PatternBuilder::new(2, 2);
        b.insert(0, 1);
        let mut m = b.build();
        m.add_entry(0, 1, 2.0);
        assert_eq!(m.symmetry_defect(), 2.0);
    }

    #[test]
    fn matrix_market_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 9, 0.3);
        write_matrix_market(&m, &path).unwrap();
        let back = read_matrix_market(&path).unwrap();
        assert!(m.same_pattern(&back));
        for (a, b) in m.vals.iter().zip(&back.vals) {
            assert_eq!(a, b);
        }

        let vpath = dir.path().join("v.mtx");
        let v: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        write_vector_market(&v, &vpath).unwrap();
        assert_eq!(read_vector_market(&vpath).unwrap(), v);
    }

    #[test]
    fn matrix_market_reads_symmetric_storage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.mtx");
        std::fs::write(
            &path,
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 4.0\n2 1 -1.0\n",
        )
        .unwrap();
        let m = read_matrix_market(&path).unwrap();
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.symmetry_defect(), 0.0);
    }

    #[test]
    fn matrix_market_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mtx");
        std::fs::write(&path, "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n")
            .unwrap();
        let err = read_matrix_market(&path).unwrap_err();
        assert!(matches!(err, SparseError::Format { .. }), "{err}");
        std::fs::write(&path, "%%MatrixMarket matrix coordinate real general\n2 2 5\n1 1 1.0\n")
            .unwrap();
        assert!(read_matrix_market(&path).is_err());
        std::fs::write(&path, "not a header\n").unwrap();
        assert!(read_matrix_market(&path).is_err());
    }
}
