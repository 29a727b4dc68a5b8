//! Dense matrix core: storage, products, SVD, and the rank measures the rest
//! of the crate is built on.
//!
//! Everything is row-major `f64`. Factorizations are hand-rolled Jacobi
//! iterations: a one-sided (Hestenes) sweep for the SVD and a classical
//! two-sided sweep for symmetric eigendecompositions. Jacobi is slower than
//! bidiagonalization but converges to high relative accuracy and is easy to
//! audit; at the dimensions this crate targets (a few thousand at most) that
//! trade is the right one.
//!
//! Rank conventions used everywhere:
//!
//! - singular values below `RANK_TOL` (10⁻¹⁰) relative to σ_max are zero;
//! - stable rank   r̃(A) = ‖A‖_F² / ‖A‖²;
//! - nuclear rank  ñr(A) = ‖A‖_* / ‖A‖, always ≥ r̃(A).

use crate::{Error, Result};

/// Relative cutoff below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Relative tolerance for Jacobi sweep convergence.
const JACOBI_TOL: f64 = 1e-12;

/// Hard cap on Jacobi sweeps; cyclic Jacobi at 10⁻¹² tolerance converges in
/// well under 20 sweeps on anything full-rank, the cap only guards cycling
/// on pathological ties.
const MAX_SWEEPS: usize = 64;

// ======================================================================
// Matrix
// ======================================================================

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix. Shapes with zero rows or columns are legal and show
    /// up naturally (empty bases, rank-0 factors).
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from a row-major buffer. Rejects length mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "buffer has {} entries, shape {}x{} needs {}",
                data.len(),
                rows,
                cols,
                rows * cols
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix);
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build by evaluating `f(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a contiguous slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` as an owned vector.
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        debug_assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self.set(i, j, x);
        }
    }

    /// Flat view of the underlying buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add shape");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub shape");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// In-place rank-one update `self += alpha · x xᵀ` (square only).
    pub fn add_outer(&mut self, alpha: f64, x: &[f64]) {
        debug_assert_eq!(self.rows, self.cols);
        debug_assert_eq!(x.len(), self.rows);
        for i in 0..self.rows {
            let xi = alpha * x[i];
            let row = self.row_mut(i);
            for (j, &xj) in x.iter().enumerate() {
                row[j] += xi * xj;
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    /// Columns of `self` followed by columns of `other`.
    pub fn hstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "hstack row count");
        let mut out = Matrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
            out.row_mut(i)[self.cols..].copy_from_slice(other.row(i));
        }
        out
    }
}

// ======================================================================
// products
// ======================================================================

/// C = A · B.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.rows, "matmul inner dimension");
    let mut c = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        // i-k-j order: both B's row k and C's row i are contiguous.
        let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = b.row(k);
            for (cj, &bkj) in crow.iter_mut().zip(brow) {
                *cj += aik * bkj;
            }
        }
    }
    c
}

/// C = Aᵀ · B without materializing the transpose.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.rows, b.rows, "matmul_tn row count");
    let mut c = Matrix::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let arow = a.row(k);
        let brow = b.row(k);
        for (i, &aki) in arow.iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
            for (cj, &bkj) in crow.iter_mut().zip(brow) {
                *cj += aki * bkj;
            }
        }
    }
    c
}

/// C = A · Bᵀ without materializing the transpose.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.cols, "matmul_nt column count");
    let mut c = Matrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..b.rows {
            let dot: f64 = arow.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
            c.data[i * b.rows + j] = dot;
        }
    }
    c
}

/// y = A · x for a vector x.
pub fn matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.cols, x.len(), "matvec length");
    (0..a.rows)
        .map(|i| a.row(i).iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

/// y = Aᵀ · x for a vector x.
pub fn matvec_t(a: &Matrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.rows, x.len(), "matvec_t length");
    let mut y = vec![0.0; a.cols];
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        for (yi, &aki) in y.iter_mut().zip(a.row(k)) {
            *yi += xk * aki;
        }
    }
    y
}

// ======================================================================
// SVD
// ======================================================================

/// Thin singular value decomposition A = U Σ Vᵀ, truncated at numerical
/// rank: `sigma` is strictly positive and non-increasing, `u` is rows × r,
/// `v` is cols × r.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactorization {
    /// Numerical rank, the number of retained singular values.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// U Σ Vᵀ.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for j in 0..self.sigma.len() {
            for i in 0..us.rows() {
                let v = us.get(i, j) * self.sigma[j];
                us.set(i, j, v);
            }
        }
        matmul_nt(&us, &self.v)
    }

    /// Pseudoinverse action A⁺ b = V Σ⁻¹ Uᵀ b for a matrix of right-hand
    /// sides; retained singular values are all above the rank cutoff, so the
    /// inversion is stable.
    pub fn pinv_apply(&self, b: &Matrix) -> Matrix {
        let mut utb = matmul_tn(&self.u, b);
        for (j, &s) in self.sigma.iter().enumerate() {
            let row = utb.row_mut(j);
            for x in row {
                *x /= s;
            }
        }
        matmul(&self.v, &utb)
    }
}

/// One-sided Jacobi SVD.
///
/// Rotates column pairs of a working copy until all columns are mutually
/// orthogonal to relative tolerance 10⁻¹², accumulating the rotations in V.
/// Column norms are then the singular values. For wide inputs the transpose
/// is factored and the roles of U and V swapped. Values below [`RANK_TOL`]
/// relative to σ_max are dropped, so rank-deficient inputs come back with
/// genuinely thin factors.
pub fn svd(a: &Matrix) -> Result<SvdFactorization> {
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix);
    }
    if a.rows < a.cols {
        let f = svd(&a.transpose())?;
        return Ok(SvdFactorization { u: f.v, sigma: f.sigma, v: f.u });
    }

    let n = a.rows;
    let d = a.cols;
    // Column-major working copy: rotations touch contiguous memory.
    let mut b: Vec<Vec<f64>> = (0..d).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            e
        })
        .collect();

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d.saturating_sub(1) {
            for q in (p + 1)..d {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    alpha += b[p][i] * b[p][i];
                    beta += b[q][i] * b[q][i];
                    gamma += b[p][i] * b[q][i];
                }
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let bp = b[p][i];
                    let bq = b[q][i];
                    b[p][i] = c * bp - s * bq;
                    b[q][i] = s * bp + c * bq;
                }
                for i in 0..d {
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    let norms: Vec<f64> = b.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let sigma_max = norms[order[0]];
    let rank = if sigma_max == 0.0 {
        0
    } else {
        order.iter().take_while(|&&j| norms[j] > RANK_TOL * sigma_max).count()
    };

    let mut u = Matrix::zeros(n, rank);
    let mut vm = Matrix::zeros(d, rank);
    let mut sigma = Vec::with_capacity(rank);
    for (k, &j) in order.iter().take(rank).enumerate() {
        sigma.push(norms[j]);
        for i in 0..n {
            u.set(i, k, b[j][i] / norms[j]);
        }
        for i in 0..d {
            vm.set(i, k, v[j][i]);
        }
    }
    Ok(SvdFactorization { u, sigma, v: vm })
}

// ======================================================================
// symmetric eigendecomposition
// ======================================================================

/// Eigendecomposition S = Q Λ Qᵀ of a symmetric matrix by classical cyclic
/// Jacobi. Eigenvalues come back in descending order (signed), Q's columns
/// aligned. Used by the barrier walk (wall inverses must see signed
/// spectra) and as an independent oracle for the SVD in tests.
pub fn sym_eigen(s: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if s.rows != s.cols {
        return Err(Error::ShapeMismatch(format!(
            "sym_eigen needs a square matrix, got {}x{}",
            s.rows, s.cols
        )));
    }
    if s.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix);
    }
    let n = s.rows;
    let mut a = s.clone();
    let mut q = Matrix::identity(n);
    let scale = s.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0_f64;
        for p in 0..n {
            for r in (p + 1)..n {
                off = off.max(a.get(p, r).abs());
            }
        }
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for r in (p + 1)..n {
                let apr = a.get(p, r);
                if apr.abs() <= JACOBI_TOL * scale * 1e-3 {
                    continue;
                }
                let tau = (a.get(r, r) - a.get(p, p)) / (2.0 * apr);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                // Two-sided rotation on rows/columns p and r.
                for j in 0..n {
                    let apj = a.get(p, j);
                    let arj = a.get(r, j);
                    a.set(p, j, c * apj - sn * arj);
                    a.set(r, j, sn * apj + c * arj);
                }
                for i in 0..n {
                    let aip = a.get(i, p);
                    let air = a.get(i, r);
                    a.set(i, p, c * aip - sn * air);
                    a.set(i, r, sn * aip + c * air);
                }
                for i in 0..n {
                    let qip = q.get(i, p);
                    let qir = q.get(i, r);
                    q.set(i, p, c * qip - sn * qir);
                    q.set(i, r, sn * qip + c * qir);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).unwrap().then(i.cmp(&j)));
    let lambda: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut qs = Matrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        for i in 0..n {
            qs.set(i, k, q.get(i, j));
        }
    }
    Ok((lambda, qs))
}

// ======================================================================
// norms and ranks
// ======================================================================

/// Spectral norm σ_max(A); 0 for the zero matrix.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    Ok(svd(a)?.sigma.first().copied().unwrap_or(0.0))
}

/// Power-iteration estimate of σ_max for inputs too large to factor.
///
/// Iterates v ← AᵀA v from the normalized all-ones vector until the estimate
/// moves by less than `tol` relatively, up to `max_iter` rounds. Falls back
/// to the SVD when the start vector is annihilated (possible when the
/// all-ones direction lies in the null space).
pub fn spectral_norm_power(a: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix);
    }
    if a.is_zero() {
        return Ok(0.0);
    }
    let d = a.cols;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut sigma = 0.0_f64;
    for _ in 0..max_iter {
        let w = matvec(a, &v);
        let mut u = matvec_t(a, &w);
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Start vector was orthogonal to every right singular vector.
            return spectral_norm(a);
        }
        for x in &mut u {
            *x /= norm;
        }
        let next = norm.sqrt();
        let done = (next - sigma).abs() <= tol * next;
        sigma = next;
        v = u;
        if done {
            break;
        }
    }
    Ok(sigma)
}

/// Stable rank r̃(A) = ‖A‖_F² / ‖A‖². Between 1 and rank(A).
pub fn stable_rank(a: &Matrix) -> Result<f64> {
    if a.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let spec = spectral_norm(a)?;
    let fro = a.frobenius_norm();
    Ok((fro / spec) * (fro / spec))
}

/// Nuclear rank ñr(A) = ‖A‖_* / ‖A‖. Always ≥ r̃(A).
pub fn nuclear_rank(a: &Matrix) -> Result<f64> {
    if a.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let f = svd(a)?;
    let nuclear: f64 = f.sigma.iter().sum();
    Ok(nuclear / f.sigma[0])
}

/// Split a factorization into (best rank-k part, remainder).
///
/// Head is U_k Σ_k V_kᵀ; tail is the reconstruction of the remaining
/// factors, so head + tail equals the full reconstruction exactly.
pub fn truncate(f: &SvdFactorization, k: usize) -> (Matrix, Matrix) {
    let r = f.rank();
    let k = k.min(r);
    let part = |range: std::ops::Range<usize>| -> Matrix {
        let mut acc = Matrix::zeros(f.u.rows(), f.v.rows());
        for j in range {
            let uj = f.u.col(j);
            let vj = f.v.col(j);
            for i in 0..acc.rows() {
                let ui = f.sigma[j] * uj[i];
                if ui == 0.0 {
                    continue;
                }
                let row = acc.row_mut(i);
                for (x, &vv) in row.iter_mut().zip(&vj) {
                    *x += ui * vv;
                }
            }
        }
        acc
    };
    (part(0..k), part(k..r))
}

/// Orthonormal basis for the column span, via the SVD's left factor.
/// Returns rows × rank; the zero matrix yields zero columns.
pub fn orthonormal_basis(cols: &Matrix) -> Result<Matrix> {
    Ok(svd(cols)?.u)
}

/// Largest entry of |UᵀU − I|, the orthonormality defect.
pub fn orthonormality_defect(u: &Matrix) -> f64 {
    let g = matmul_tn(u, u);
    let mut worst = 0.0_f64;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g.get(i, j) - target).abs());
        }
    }
    worst
}

/// Orthogonal projection U Uᵀ b onto the span of U's columns.
///
/// U must be orthonormal to 10⁻⁶ in the max-entry sense; anything looser and
/// the "projection" would silently rescale.
pub fn project(u: &Matrix, b: &Matrix) -> Result<Matrix> {
    if u.rows() != b.rows() {
        return Err(Error::ShapeMismatch(format!(
            "projection basis has {} rows, target has {}",
            u.rows(),
            b.rows()
        )));
    }
    let defect = orthonormality_defect(u);
    if defect > 1e-6 {
        return Err(Error::NotOrthonormal(defect));
    }
    Ok(matmul(u, &matmul_tn(u, b)))
}

// ======================================================================
// tests
// ======================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = rng::rng_from(seed);
        let mut buf = vec![0.0; rows * cols];
        rng::fill_normal(&mut r, &mut buf);
        Matrix::from_vec(rows, cols, buf).unwrap()
    }

    /// Independent spectral oracle: eigenvalues of AᵀA via the two-sided
    /// Jacobi path give singular values without touching the one-sided code.
    fn singular_values_via_gram(a: &Matrix) -> Vec<f64> {
        let gram = matmul_tn(a, a);
        let (lambda, _) = sym_eigen(&gram).unwrap();
        lambda.iter().map(|&l| l.max(0.0).sqrt()).collect()
    }

    #[test]
    fn from_vec_validates() {
        assert!(matches!(
            Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            Matrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(Error::InvalidMatrix)
        ));
    }

    #[test]
    fn products_agree_with_naive() {
        let a = random_matrix(7, 5, 1);
        let b = random_matrix(5, 6, 2);
        let c = matmul(&a, &b);
        for i in 0..7 {
            for j in 0..6 {
                let mut dot = 0.0;
                for k in 0..5 {
                    dot += a.get(i, k) * b.get(k, j);
                }
                assert!((c.get(i, j) - dot).abs() < 1e-12);
            }
        }
        let at_b = matmul_tn(&a, &random_matrix(7, 4, 3));
        assert_eq!((at_b.rows(), at_b.cols()), (5, 4));
        let a_bt = matmul_nt(&a, &random_matrix(9, 5, 4));
        assert_eq!((a_bt.rows(), a_bt.cols()), (7, 9));
    }

    #[test]
    fn svd_diagonal_known_values() {
        // Oracle by construction: diag(3, 2, 1) embedded in 4x3.
        let mut a = Matrix::zeros(4, 3);
        a.set(0, 0, 3.0);
        a.set(1, 1, -2.0);
        a.set(2, 2, 1.0);
        let f = svd(&a).unwrap();
        assert_eq!(f.rank(), 3);
        assert!((f.sigma[0] - 3.0).abs() < 1e-12);
        assert!((f.sigma[1] - 2.0).abs() < 1e-12);
        assert!((f.sigma[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_reconstructs_and_is_orthonormal() {
        for (n, d, seed) in [(8, 5, 10), (5, 8, 11), (12, 12, 12), (20, 3, 13)] {
            let a = random_matrix(n, d, seed);
            let f = svd(&a).unwrap();
            let err = f.reconstruct().sub(&a).frobenius_norm();
            assert!(err <= 1e-8 * a.frobenius_norm(), "reconstruction {err}");
            assert!(orthonormality_defect(&f.u) < 1e-8);
            assert!(orthonormality_defect(&f.v) < 1e-8);
            for w in f.sigma.windows(2) {
                assert!(w[0] >= w[1]);
            }
            assert!(f.sigma.iter().all(|&s| s > 0.0));
        }
    }

    #[test]
    fn svd_matches_gram_eigenvalues() {
        for (n, d, seed) in [(9, 6, 21), (6, 9, 22), (15, 15, 23)] {
            let a = random_matrix(n, d, seed);
            let f = svd(&a).unwrap();
            let oracle = singular_values_via_gram(&a);
            for (i, &s) in f.sigma.iter().enumerate() {
                assert!(
                    (s - oracle[i]).abs() < 1e-9 * oracle[0].max(1.0),
                    "sigma[{i}] = {s} vs oracle {}",
                    oracle[i]
                );
            }
        }
    }

    #[test]
    fn svd_handles_rank_deficiency() {
        // Rank 2 by construction: third column is a combination.
        let mut a = random_matrix(10, 3, 30);
        let combo: Vec<f64> = (0..10).map(|i| a.get(i, 0) * 2.0 - a.get(i, 1)).collect();
        a.set_col(2, &combo);
        let f = svd(&a).unwrap();
        assert_eq!(f.rank(), 2);
        let err = f.reconstruct().sub(&a).frobenius_norm();
        assert!(err <= 1e-8 * a.frobenius_norm());
    }

    #[test]
    fn svd_zero_matrix_is_rank_zero() {
        let f = svd(&Matrix::zeros(4, 3)).unwrap();
        assert_eq!(f.rank(), 0);
        assert_eq!(f.u.cols(), 0);
        assert_eq!(f.reconstruct(), Matrix::zeros(4, 3));
    }

    #[test]
    fn sym_eigen_known_values() {
        // [[2, 1], [1, 2]] has eigenvalues 3 and 1.
        let s = Matrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let (lambda, q) = sym_eigen(&s).unwrap();
        assert!((lambda[0] - 3.0).abs() < 1e-12);
        assert!((lambda[1] - 1.0).abs() < 1e-12);
        assert!(orthonormality_defect(&q) < 1e-12);
        // Reconstruction Q Λ Qᵀ.
        let mut ql = q.clone();
        for j in 0..2 {
            for i in 0..2 {
                let v = ql.get(i, j) * lambda[j];
                ql.set(i, j, v);
            }
        }
        let rec = matmul_nt(&ql, &q);
        assert!(rec.sub(&s).frobenius_norm() < 1e-12);
    }

    #[test]
    fn sym_eigen_signed_spectrum() {
        // diag(5, -1) rotated: eigenvalues keep their signs.
        let c = (0.3_f64).cos();
        let s = (0.3_f64).sin();
        let q = Matrix::from_vec(2, 2, vec![c, -s, s, c]).unwrap();
        let mut d = Matrix::zeros(2, 2);
        d.set(0, 0, 5.0);
        d.set(1, 1, -1.0);
        let m = matmul(&q, &matmul_nt(&d, &q));
        let (lambda, _) = sym_eigen(&m).unwrap();
        assert!((lambda[0] - 5.0).abs() < 1e-12);
        assert!((lambda[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_identity_scaling() {
        let a = Matrix::identity(6).scale(2.5);
        assert!((spectral_norm(&a).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn power_iteration_matches_svd() {
        for seed in [40, 41, 42] {
            let a = random_matrix(30, 12, seed);
            let exact = spectral_norm(&a).unwrap();
            let fast = spectral_norm_power(&a, 1e-10, 10_000).unwrap();
            assert!((exact - fast).abs() < 1e-6 * exact, "{exact} vs {fast}");
        }
    }

    #[test]
    fn power_iteration_survives_adversarial_start() {
        // Right singular vectors orthogonal to the all-ones start.
        let a = Matrix::from_vec(2, 2, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let exact = spectral_norm(&a).unwrap();
        let fast = spectral_norm_power(&a, 1e-10, 10_000).unwrap();
        assert!((exact - fast).abs() < 1e-8);
    }

    #[test]
    fn rank_measures_on_known_spectra() {
        // diag(2, 1, 1): r̃ = 6/4 = 1.5, ñr = 4/2 = 2.
        let mut a = Matrix::zeros(3, 3);
        a.set(0, 0, 2.0);
        a.set(1, 1, 1.0);
        a.set(2, 2, 1.0);
        assert!((stable_rank(&a).unwrap() - 1.5).abs() < 1e-12);
        assert!((nuclear_rank(&a).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(stable_rank(&Matrix::zeros(2, 2)), Err(Error::ZeroMatrix));
        assert_eq!(nuclear_rank(&Matrix::zeros(2, 2)), Err(Error::ZeroMatrix));
    }

    #[test]
    fn truncate_splits_exactly() {
        let a = random_matrix(9, 7, 50);
        let f = svd(&a).unwrap();
        let (head, tail) = truncate(&f, 3);
        assert!(head.add(&tail).sub(&a).frobenius_norm() < 1e-8 * a.frobenius_norm());
        assert!((spectral_norm(&tail).unwrap() - f.sigma[3]).abs() < 1e-9);
        // k beyond the rank: tail vanishes.
        let (full, rest) = truncate(&f, 100);
        assert!(full.sub(&a).frobenius_norm() < 1e-8 * a.frobenius_norm());
        assert_eq!(rest.max_abs(), 0.0);
    }

    #[test]
    fn basis_and_projection_roundtrip() {
        let a = random_matrix(10, 4, 60);
        let u = orthonormal_basis(&a).unwrap();
        assert!(orthonormality_defect(&u) < 1e-8);
        // Projecting A onto its own span is the identity.
        let p = project(&u, &a).unwrap();
        assert!(p.sub(&a).frobenius_norm() < 1e-8 * a.frobenius_norm());
        // A skewed basis is rejected.
        let skew = a.clone();
        assert!(matches!(project(&skew, &a), Err(Error::NotOrthonormal(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// 1 ≤ r̃(A) ≤ ñr(A) ≤ rank(A) on random inputs.
        #[test]
        fn rank_chain_holds(seed in 0u64..5000, n in 2usize..12, d in 2usize..12) {
            let a = random_matrix(n, d, seed);
            let f = svd(&a).unwrap();
            let sr = stable_rank(&a).unwrap();
            let nr = nuclear_rank(&a).unwrap();
            prop_assert!(sr >= 1.0 - 1e-12);
            prop_assert!(sr <= nr + 1e-9);
            prop_assert!(nr <= f.rank() as f64 + 1e-9);
        }

        /// ‖A‖ ≤ ‖A‖_F ≤ √rank · ‖A‖.
        #[test]
        fn norm_chain_holds(seed in 0u64..5000, n in 2usize..10, d in 2usize..10) {
            let a = random_matrix(n, d, seed);
            let spec = spectral_norm(&a).unwrap();
            let fro = a.frobenius_norm();
            let rank = svd(&a).unwrap().rank() as f64;
            prop_assert!(spec <= fro + 1e-12);
            prop_assert!(fro <= rank.sqrt() * spec + 1e-9);
        }
    }
}
