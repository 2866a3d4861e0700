//! Minimal sparse linear algebra kernel: CSR storage, LU factorization with
//! partial pivoting, numerical row rank, and Matrix Market I/O.
//!
//! The factorization is left-looking (column by column) with a depth-first
//! symbolic pass per column, so the cost is proportional to the arithmetic
//! actually performed. Factorizations are immutable once built; the time
//! integrators factorize their step matrix once and back-substitute once per
//! step.

use std::io::{self, BufRead, Write};

use thiserror::Error;

/// A pivot is declared numerically zero when its magnitude falls below this
/// fraction of the largest entry of the factorized matrix.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("matrix is not square ({nrows}x{ncols})")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("matrix is singular: no admissible pivot in column {col} (best |value| {best:.3e})")]
    Singular { col: usize, best: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix market parse error at line {line}: {reason}")]
    MatrixMarket { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Compressed sparse row matrix with 64-bit float entries.
///
/// Column indices are strictly increasing within each row and exact zeros are
/// dropped during construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from unordered (row, col, value) triplets; duplicate
    /// positions are summed, entries that sum to exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        for &(i, j, _) in entries {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of {nrows}x{ncols}");
        }
        let mut sorted: Vec<(usize, usize, f64)> = entries.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut k = 0;
        for i in 0..nrows {
            while k < sorted.len() && sorted[k].0 == i {
                let j = sorted[k].1;
                let mut v = 0.0;
                while k < sorted.len() && sorted[k].0 == i && sorted[k].1 == j {
                    v += sorted[k].2;
                    k += 1;
                }
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        let entries: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &entries)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let entries: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(diag.len(), diag.len(), &entries)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y += s * A x`.
    pub fn matvec_acc(&self, x: &[f64], s: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] += s * acc;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let entries: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, &entries)
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// `diag(w) * A` (each row i multiplied by `w[i]`).
    pub fn row_scaled(&self, w: &[f64]) -> CsrMatrix {
        assert_eq!(w.len(), self.nrows);
        let entries: Vec<_> = self.triplets().map(|(i, j, v)| (i, j, v * w[i])).collect();
        CsrMatrix::from_triplets(self.nrows, self.ncols, &entries)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }
}

/// Incremental triplet assembler for block-structured matrices.
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    /// Adds `scale * m` with its (0,0) entry at position (r0, c0).
    pub fn add_matrix(&mut self, r0: usize, c0: usize, m: &CsrMatrix, scale: f64) {
        for (i, j, v) in m.triplets() {
            self.push(r0 + i, c0 + j, scale * v);
        }
    }

    /// Adds `scale * (factors (x) m)`, the Kronecker product of a small dense
    /// matrix with a sparse one, at block offset (r0, c0).
    pub fn add_kron(&mut self, r0: usize, c0: usize, factors: &[Vec<f64>], m: &CsrMatrix, scale: f64) {
        for (bi, row) in factors.iter().enumerate() {
            for (bj, &f) in row.iter().enumerate() {
                if f != 0.0 {
                    self.add_matrix(r0 + bi * m.nrows(), c0 + bj * m.ncols(), m, scale * f);
                }
            }
        }
    }

    /// Adds `scale * m` at each of `count` consecutive diagonal blocks,
    /// i.e. the Kronecker product of an identity with `m`.
    pub fn add_block_diag(&mut self, r0: usize, c0: usize, count: usize, m: &CsrMatrix, scale: f64) {
        for b in 0..count {
            self.add_matrix(r0 + b * m.nrows(), c0 + b * m.ncols(), m, scale);
        }
    }

    pub fn add_identity(&mut self, r0: usize, c0: usize, n: usize, scale: f64) {
        for i in 0..n {
            self.push(r0 + i, c0 + i, scale);
        }
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

/// Sparse LU factors `P A = L U` with row partial pivoting.
///
/// `L` is unit lower triangular and `U` upper triangular, both stored
/// column-wise in pivot-position index space.
#[derive(Debug)]
pub struct LuFactorization {
    n: usize,
    /// perm[k] = original row placed at pivot position k.
    perm: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    rcond: f64,
}

/// LU-factorizes a square matrix with partial pivoting.
pub fn factorize(a: &CsrMatrix) -> Result<LuFactorization, SparseError> {
    if a.nrows() != a.ncols() {
        return Err(SparseError::NotSquare { nrows: a.nrows(), ncols: a.ncols() });
    }
    let n = a.nrows();
    let singular_tol = PIVOT_TOLERANCE * a.max_abs();

    // Column access to A.
    let at = a.transpose();

    const UNSET: usize = usize::MAX;
    let mut pinv = vec![UNSET; n]; // original row -> pivot position
    let mut perm = vec![UNSET; n]; // pivot position -> original row

    // L and U columns accumulated with original row ids (L) and pivot
    // positions (U); flattened after the loop.
    let mut l_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut u_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut u_diag = vec![0.0; n];

    let mut x = vec![0.0f64; n];
    let mut stamp = vec![0usize; n];
    let mut visited: Vec<usize> = Vec::new();
    let mut topo: Vec<usize> = Vec::new(); // pivot positions in DFS finish order
    // DFS stack entries: (original row, next child index into l_cols).
    let mut dfs: Vec<(usize, usize)> = Vec::new();

    for col in 0..n {
        let tag = col + 1;
        visited.clear();
        topo.clear();

        let (a_rows, a_vals) = at.row(col);

        // Symbolic pass: depth-first search through the columns of L reached
        // from the pattern of A(:, col); records pivotal nodes in topological
        // order and marks every row that can receive a value.
        for &seed in a_rows {
            if stamp[seed] == tag {
                continue;
            }
            stamp[seed] = tag;
            visited.push(seed);
            dfs.push((seed, 0));
            while let Some(&mut (node, ref mut child)) = dfs.last_mut() {
                let k = pinv[node];
                if k == UNSET {
                    dfs.pop();
                    continue;
                }
                let children = &l_cols[k];
                if *child < children.len() {
                    let next = children[*child].0;
                    *child += 1;
                    if stamp[next] != tag {
                        stamp[next] = tag;
                        visited.push(next);
                        dfs.push((next, 0));
                    }
                } else {
                    topo.push(k);
                    dfs.pop();
                }
            }
        }

        // Numeric pass in topological order (reverse DFS finish order).
        for &row in visited.iter() {
            x[row] = 0.0;
        }
        for (&row, &v) in a_rows.iter().zip(a_vals) {
            x[row] = v;
        }
        for &k in topo.iter().rev() {
            let xr = x[perm[k]];
            if xr != 0.0 {
                for &(row, lv) in &l_cols[k] {
                    x[row] -= lv * xr;
                }
            }
        }

        // Partial pivot: largest magnitude among not-yet-pivotal rows.
        let mut piv = UNSET;
        let mut best = 0.0f64;
        for &row in &visited {
            if pinv[row] == UNSET {
                let mag = x[row].abs();
                if mag > best || (mag == best && piv != UNSET && row < piv) {
                    best = mag;
                    piv = row;
                }
            }
        }
        if piv == UNSET || best <= singular_tol {
            return Err(SparseError::Singular { col, best });
        }
        perm[col] = piv;
        pinv[piv] = col;
        let pivot_value = x[piv];
        u_diag[col] = pivot_value;

        let mut ucol = Vec::new();
        let mut lcol = Vec::new();
        for &row in &visited {
            let v = x[row];
            if v == 0.0 || row == piv {
                continue;
            }
            let k = pinv[row];
            if k == UNSET {
                lcol.push((row, v / pivot_value));
            } else if k < col {
                ucol.push((k, v));
            }
        }
        l_cols.push(lcol);
        u_cols.push(ucol);
    }

    // Flatten; translate L's original row ids to pivot positions.
    let mut l_ptr = vec![0usize; n + 1];
    let mut u_ptr = vec![0usize; n + 1];
    for j in 0..n {
        l_ptr[j + 1] = l_ptr[j] + l_cols[j].len();
        u_ptr[j + 1] = u_ptr[j] + u_cols[j].len();
    }
    let mut l_idx = Vec::with_capacity(l_ptr[n]);
    let mut l_val = Vec::with_capacity(l_ptr[n]);
    let mut u_idx = Vec::with_capacity(u_ptr[n]);
    let mut u_val = Vec::with_capacity(u_ptr[n]);
    for j in 0..n {
        for &(row, v) in &l_cols[j] {
            l_idx.push(pinv[row]);
            l_val.push(v);
        }
        for &(k, v) in &u_cols[j] {
            u_idx.push(k);
            u_val.push(v);
        }
    }

    let dmax = u_diag.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let dmin = u_diag.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let rcond = if dmax > 0.0 { dmin / dmax } else { 0.0 };

    Ok(LuFactorization { n, perm, l_ptr, l_idx, l_val, u_ptr, u_idx, u_val, u_diag, rcond })
}

impl LuFactorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Reciprocal condition estimate from the U diagonal (min/max ratio);
    /// cheap and order-of-magnitude only.
    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side length mismatch");
        let mut z: Vec<f64> = self.perm.iter().map(|&r| b[r]).collect();
        // Forward substitution with unit lower triangular L (column access).
        for j in 0..self.n {
            let zj = z[j];
            if zj != 0.0 {
                for k in self.l_ptr[j]..self.l_ptr[j + 1] {
                    z[self.l_idx[k]] -= self.l_val[k] * zj;
                }
            }
        }
        // Back substitution with U (column access).
        for j in (0..self.n).rev() {
            let xj = z[j] / self.u_diag[j];
            z[j] = xj;
            if xj != 0.0 {
                for k in self.u_ptr[j]..self.u_ptr[j + 1] {
                    z[self.u_idx[k]] -= self.u_val[k] * xj;
                }
            }
        }
        z
    }
}

/// Numerical row rank by Householder QR with column pivoting on a dense copy
/// (the constraint matrices this is used for are small).
///
/// A diagonal entry of R below `tol * |R(0,0)|` terminates the count; `tol`
/// also acts as an absolute threshold when the matrix is zero.
pub fn row_rank(a: &CsrMatrix, tol: f64) -> usize {
    // Row rank equals column rank; factor the transpose when it is taller so
    // the pivoted QR runs on a matrix with at least as many rows as columns.
    let dense = if a.nrows() <= a.ncols() { a.transpose().to_dense() } else { a.to_dense() };
    qr_cp_rank(dense, tol)
}

fn qr_cp_rank(mut m: Vec<Vec<f64>>, tol: f64) -> usize {
    let nrows = m.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = m[0].len();
    let steps = nrows.min(ncols);
    let mut rdiag = Vec::with_capacity(steps);
    for k in 0..steps {
        // Column pivot: move the column with the largest remaining norm to k.
        let mut best = k;
        let mut best_norm = 0.0;
        for j in k..ncols {
            let norm: f64 = (k..nrows).map(|i| m[i][j] * m[i][j]).sum();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if best != k {
            for row in m.iter_mut() {
                row.swap(k, best);
            }
        }
        let alpha = best_norm.sqrt();
        rdiag.push(alpha);
        if alpha == 0.0 {
            break;
        }
        // Householder vector for column k; reflect the trailing block.
        let sign = if m[k][k] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = (k..nrows).map(|i| m[i][k]).collect();
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..ncols {
            let dot: f64 = (k..nrows).map(|i| m[i][j] * v[i - k]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..nrows {
                m[i][j] -= f * v[i - k];
            }
        }
    }
    let scale = rdiag.first().copied().unwrap_or(0.0);
    if scale == 0.0 {
        return 0;
    }
    rdiag.iter().take_while(|&&d| d > tol * scale).count()
}

/// Writes a matrix in Matrix Market coordinate format (general, real).
pub fn write_matrix_market<W: Write>(w: &mut W, m: &CsrMatrix) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads a matrix in Matrix Market coordinate format (general, real).
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix, SparseError> {
    let mut lines = r.lines().enumerate();
    let parse_err = |line: usize, reason: &str| SparseError::MatrixMarket { line: line + 1, reason: reason.to_string() };

    let (first_no, first) = lines.next().ok_or_else(|| parse_err(0, "empty file"))?;
    let first = first?;
    if !first.starts_with("%%MatrixMarket") || !first.contains("coordinate") || !first.contains("real") {
        return Err(parse_err(first_no, "expected '%%MatrixMarket matrix coordinate real' header"));
    }

    let mut shape: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (line_no, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match shape {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(line_no, "size line must have three fields"));
                }
                let dims: Result<Vec<usize>, _> = fields.iter().map(|f| f.parse()).collect();
                let dims = dims.map_err(|_| parse_err(line_no, "size line fields must be integers"))?;
                shape = Some((dims[0], dims[1], dims[2]));
                entries.reserve(dims[2]);
            }
            Some((nrows, ncols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(line_no, "entry line must have three fields"));
                }
                let i: usize = fields[0].parse().map_err(|_| parse_err(line_no, "bad row index"))?;
                let j: usize = fields[1].parse().map_err(|_| parse_err(line_no, "bad column index"))?;
                let v: f64 = fields[2].parse().map_err(|_| parse_err(line_no, "bad value"))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(parse_err(line_no, "index out of range"));
                }
                entries.push((i - 1, j - 1, v));
            }
        }
    }
    let (nrows, ncols, nnz) = shape.ok_or_else(|| parse_err(1, "missing size line"))?;
    if entries.len() != nnz {
        return Err(parse_err(0, "entry count does not match size line"));
    }
    Ok(CsrMatrix::from_triplets(nrows, ncols, &entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())?;
            if a[piv][k].abs() < 1e-300 {
                return None;
            }
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                if f != 0.0 {
                    for j in k..n {
                        a[i][j] -= f * a[k][j];
                    }
                    b[i] -= f * b[k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..n {
                acc -= a[k][j] * x[j];
            }
            x[k] = acc / a[k][k];
        }
        Some(x)
    }

    fn random_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64) -> CsrMatrix {
        let mut entries = Vec::new();
        for i in 0..n {
            // Guaranteed diagonal keeps the instances comfortably nonsingular.
            entries.push((i, i, 1.0 + rng.gen::<f64>()));
            for j in 0..n {
                if i != j && rng.gen::<f64>() < density {
                    entries.push((i, j, rng.gen::<f64>() * 2.0 - 1.0));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, &entries)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 5.0), (1, 1, -5.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.nnz(), 1, "exact cancellation must be dropped");
    }

    #[test]
    fn matvec_matches_dense() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -3.0)]);
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]), vec![7.0, -6.0]);
        let t = m.transpose();
        assert_eq!(t.matvec(&[1.0, 1.0]), vec![1.0, -3.0, 2.0]);
    }

    #[test]
    fn factorize_identity_returns_rhs() {
        let f = factorize(&CsrMatrix::identity(4)).unwrap();
        let b = vec![1.0, -2.0, 3.5, 0.0];
        assert_eq!(f.solve(&b), b);
        assert_eq!(f.rcond(), 1.0);
    }

    #[test]
    fn factorize_antidiagonal_pivots() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        let f = factorize(&a).unwrap();
        assert_eq!(f.solve(&[1.0, 2.0]), vec![2.0, 1.0]);
    }

    #[test]
    fn factorize_reports_singular() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        match factorize(&a) {
            Err(SparseError::Singular { col: 1, .. }) => {}
            other => panic!("expected singular at column 1, got {other:?}"),
        }
    }

    #[test]
    fn random_spd_solve_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        // A = G^T G + I is SPD.
        let g = random_sparse(&mut rng, n, 0.1);
        let mut entries = Vec::new();
        let gd = g.to_dense();
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += gd[k][i] * gd[k][j];
                }
                if i == j {
                    v += 1.0;
                }
                entries.push((i, j, v));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &entries);
        let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let x = factorize(&a).unwrap().solve(&b);
        let x_ref = dense_solve(a.to_dense(), b.clone()).unwrap();
        let resid: f64 = a
            .matvec(&x)
            .iter()
            .zip(&b)
            .map(|(ax, bi)| (ax - bi).abs())
            .fold(0.0, f64::max);
        assert!(resid < 1e-12, "residual {resid}");
        let diff: f64 = x.iter().zip(&x_ref).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "oracle mismatch {diff}");
    }

    #[test]
    fn random_unsymmetric_solves_up_to_n_100() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[3usize, 10, 37, 100] {
            let a = random_sparse(&mut rng, n, 0.08);
            let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let f = factorize(&a).unwrap();
            let x = f.solve(&b);
            let scale = a.max_abs() * x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
                + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let resid: f64 = a.matvec(&x).iter().zip(&b).map(|(ax, bi)| (ax - bi).abs()).fold(0.0, f64::max);
            assert!(resid <= 1e-10 * scale, "n={n}: residual {resid} vs scale {scale}");
            let x_ref = dense_solve(a.to_dense(), b).unwrap();
            let diff: f64 = x.iter().zip(&x_ref).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-9, "n={n}: dense-oracle difference {diff}");
        }
    }

    #[test]
    fn saddle_point_block_solved_despite_zero_diagonal_block() {
        // [[I, B^T], [B, 0]] with B = [1 1]: well-posed but indefinite.
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (1, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 1, 1.0)],
        );
        let f = factorize(&a).unwrap();
        let x = f.solve(&[0.0, 0.0, 2.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14 && (x[2] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn row_rank_examples() {
        assert_eq!(row_rank(&CsrMatrix::zeros(3, 5), 1e-12), 0);
        // Two selector rows out of 60 columns.
        let b = CsrMatrix::from_triplets(2, 60, &[(0, 0, 1.0), (1, 59, 1.0)]);
        assert_eq!(row_rank(&b, 1e-12), 2);
        // Stacking a copy of the first row must not raise the rank.
        let b3 = CsrMatrix::from_triplets(3, 60, &[(0, 0, 1.0), (1, 59, 1.0), (2, 0, 1.0)]);
        assert_eq!(row_rank(&b3, 1e-12), 2);
    }

    #[test]
    fn matrix_market_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_sparse(&mut rng, 12, 0.2);
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &m).unwrap();
        let back = read_matrix_market(&buf[..]).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn builder_kron_matches_manual_blocks() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0)]);
        let factors = vec![vec![1.0, 0.0], vec![-2.0, 4.0]];
        let mut tb = TripletBuilder::new(4, 4);
        tb.add_kron(0, 0, &factors, &m, 1.0);
        let k = tb.build();
        for i in 0..2 {
            for j in 0..2 {
                for bi in 0..2 {
                    for bj in 0..2 {
                        let expect = factors[bi][bj] * m.get(i, j);
                        assert_eq!(k.get(bi * 2 + i, bj * 2 + j), expect);
                    }
                }
            }
        }
    }
}
