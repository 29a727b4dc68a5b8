//! Sketch-and-solve applications: generalized least squares, low-rank
//! approximation through a sketched row space, kernel ridge regression,
//! and synthetic-instance generators with controlled spectra.
//!
//! The common pattern: solve the compressed problem, lift the solution
//! back, and compare against the bound that the multiplication guarantee
//! buys. For regression with X̃ = (ΠA)⁺ΠB the target is
//!
//! ```text
//! ‖AX̃ − B‖² ≤ (1+ε)·‖P_A B − B‖² + (ε/k)·‖P_A B − B‖_F²
//! ```
//!
//! and for low-rank approximation with Ã = A·P_S, S = row space of ΠA,
//!
//! ```text
//! ‖A − Ã_k‖² ≤ (1+ε)·‖A − A_k‖² + (ε/k)·‖A − A_k‖_F²
//! ```
//!
//! Both right-hand sides degrade gracefully when the residual (or tail)
//! has small stable rank, which is exactly when sketch sizes keyed to k
//! rather than the ambient rank are enough.

use crate::matcore::{matmul, matmul_nt, matvec, spectral_norm, svd, sym_eigen, truncate, Matrix};
use crate::rng;
use crate::sketch::Sketch;
use crate::{Error, Result};

// ======================================================================
// reports and problem types
// ======================================================================

/// Outcome of a sketched regression solve, carrying both sides of the
/// target bound. `err_sq` and `opt_sq` are squared spectral norms;
/// `err_sq ≥ opt_sq` up to rounding since X* is the exact minimizer.
#[derive(Debug, Clone)]
pub struct RegressionReport {
    pub xtilde: Matrix,
    /// ‖AX̃ − B‖².
    pub err_sq: f64,
    /// ‖P_A B − B‖².
    pub opt_sq: f64,
    /// ‖P_A B − B‖_F².
    pub opt_frob_sq: f64,
    /// (1+ε)·opt_sq + (ε/k)·opt_frob_sq.
    pub bound: f64,
    pub pass: bool,
}

/// Outcome of a sketched low-rank approximation, same layout with the
/// best rank-k approximant A_k in the optimum's role.
#[derive(Debug, Clone)]
pub struct LowRankReport {
    pub approx: Matrix,
    /// ‖A − Ã_k‖².
    pub err_sq: f64,
    /// σ_{k+1}(A)².
    pub opt_sq: f64,
    /// Σ_{i>k} σᵢ(A)².
    pub opt_frob_sq: f64,
    pub bound: f64,
    pub pass: bool,
}

/// A kernel ridge regression instance: symmetric PSD kernel matrix K,
/// responses y, regularization λ ≥ 0.
#[derive(Debug, Clone)]
pub struct KrrProblem {
    pub kernel: Matrix,
    pub y: Vec<f64>,
    pub lambda: f64,
}

impl KrrProblem {
    /// Validates symmetry (to 10⁻¹⁰ relative to the largest entry) and
    /// positive semidefiniteness (λ_min ≥ −10⁻⁸·‖K‖).
    pub fn new(kernel: Matrix, y: Vec<f64>, lambda: f64) -> Result<KrrProblem> {
        if kernel.rows() != kernel.cols() {
            return Err(Error::ShapeMismatch(format!(
                "kernel must be square, got {}x{}",
                kernel.rows(),
                kernel.cols()
            )));
        }
        if y.len() != kernel.rows() {
            return Err(Error::ShapeMismatch(format!(
                "kernel is {0}x{0} but y has {1} entries",
                kernel.rows(),
                y.len()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParams(format!("lambda must be >= 0, got {lambda}")));
        }
        let scale = kernel.max_abs().max(1.0);
        let mut defect = 0.0_f64;
        for i in 0..kernel.rows() {
            for j in (i + 1)..kernel.cols() {
                defect = defect.max((kernel.get(i, j) - kernel.get(j, i)).abs());
            }
        }
        if defect > 1e-10 * scale {
            return Err(Error::InvalidMatrix);
        }
        if kernel.rows() > 0 && !kernel.is_zero() {
            let (lambda_spec, _) = sym_eigen(&kernel)?;
            let top = lambda_spec[0].abs().max(lambda_spec.last().unwrap().abs());
            if *lambda_spec.last().unwrap() < -1e-8 * top {
                return Err(Error::InvalidMatrix);
            }
        }
        Ok(KrrProblem { kernel, y, lambda })
    }
}

// ======================================================================
// regression
// ======================================================================

/// Exact generalized least squares: X* = A⁺B, the minimum-norm minimizer
/// of ‖AX − B‖. The residual AX* − B is orthogonal to the columns of A.
pub fn exact_regression(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(Error::ShapeMismatch(format!(
            "regression needs equal row counts, got {} and {}",
            a.rows(),
            b.rows()
        )));
    }
    let f = svd(a)?;
    Ok(f.pinv_apply(b))
}

/// Sketch-and-solve regression: X̃ = (ΠA)⁺ΠB.
///
/// Errors with `RankCollapse` when the sketch loses column rank
/// (rank(ΠA) < rank(A)); that signals m too small for the instance. The
/// report's `pass` compares ‖AX̃ − B‖² against
/// (1+ε)·‖P_A B − B‖² + (ε/k)·‖P_A B − B‖_F² for the given (k, ε).
pub fn sketched_regression(
    a: &Matrix,
    b: &Matrix,
    sk: &Sketch,
    k: usize,
    eps: f64,
) -> Result<RegressionReport> {
    if a.rows() != b.rows() {
        return Err(Error::ShapeMismatch(format!(
            "regression needs equal row counts, got {} and {}",
            a.rows(),
            b.rows()
        )));
    }
    if k < 1 {
        return Err(Error::InvalidParams("regression check needs k >= 1".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParams(format!("regression check needs eps > 0, got {eps}")));
    }
    let sa = sk.apply(a)?;
    let sb = sk.apply(b)?;
    let fa = svd(a)?;
    let fsa = svd(&sa)?;
    if fsa.rank() < fa.rank() {
        return Err(Error::RankCollapse { got: fsa.rank(), want: fa.rank() });
    }
    let xtilde = fsa.pinv_apply(&sb);

    let xstar = fa.pinv_apply(b);
    let resid_opt = matmul(a, &xstar).sub(b);
    let resid = matmul(a, &xtilde).sub(b);
    let opt = spectral_norm(&resid_opt)?;
    let err = spectral_norm(&resid)?;
    let opt_sq = opt * opt;
    let opt_frob_sq = resid_opt.frobenius_norm().powi(2);
    let bound = (1.0 + eps) * opt_sq + eps / k as f64 * opt_frob_sq;
    Ok(RegressionReport { xtilde, err_sq: err * err, opt_sq, opt_frob_sq, bound, pass: err * err <= bound })
}

// ======================================================================
// low-rank approximation
// ======================================================================

/// Sketched low-rank approximation: project A onto the row space of ΠA,
/// then keep the top k singular directions of the projection.
///
/// With V an orthonormal basis of that row space, Ã = (AV)Vᵀ, and since
/// right-multiplying by an isometry commutes with truncation, Ã_k is the
/// top-k part of AV carried back through Vᵀ.
pub fn sketched_lowrank(a: &Matrix, k: usize, sk: &Sketch, eps: f64) -> Result<LowRankReport> {
    if k < 1 {
        return Err(Error::InvalidParams("low-rank approximation needs k >= 1".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParams(format!("low-rank check needs eps > 0, got {eps}")));
    }
    let sa = sk.apply(a)?;
    let v = svd(&sa)?.v; // d × rank(ΠA), orthonormal columns
    let approx = if v.cols() == 0 {
        Matrix::zeros(a.rows(), a.cols())
    } else {
        let y = matmul(a, &v);
        let (head, _) = truncate(&svd(&y)?, k);
        matmul_nt(&head, &v)
    };

    let fa = svd(a)?;
    let opt_sq = fa.sigma.get(k).map_or(0.0, |s| s * s);
    let opt_frob_sq: f64 = fa.sigma.iter().skip(k).map(|s| s * s).sum();
    let err = spectral_norm(&a.sub(&approx))?;
    let bound = (1.0 + eps) * opt_sq + eps / k as f64 * opt_frob_sq;
    Ok(LowRankReport { approx, err_sq: err * err, opt_sq, opt_frob_sq, bound, pass: err * err <= bound })
}

// ======================================================================
// kernel ridge regression
// ======================================================================

/// Gaussian kernel matrix: K_ij = exp(−‖xᵢ − xⱼ‖² / (2·bandwidth²)) over
/// the rows of `points`. Symmetric with unit diagonal by construction.
pub fn gaussian_kernel(points: &Matrix, bandwidth: f64) -> Result<Matrix> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParams(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    let n = points.rows();
    let denom = 2.0 * bandwidth * bandwidth;
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k.set(i, i, 1.0);
        for j in (i + 1)..n {
            let d2: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            let v = libm::exp(-d2 / denom);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    Ok(k)
}

/// Builds the n×1 matrix view of a vector.
fn column(v: &[f64]) -> Matrix {
    Matrix::from_vec(v.len(), 1, v.to_vec()).expect("length matches by construction")
}

/// Exact kernel ridge regression weights:
/// α^LS = ((1/n)K² + 2λK)⁺ · (1/n)Ky.
///
/// At λ = 0 a rank-deficient K makes the system genuinely singular and
/// that surfaces as `SingularSystem`; for λ > 0 the system's kernel
/// equals the kernel of K and the pseudoinverse returns the minimum-norm
/// solution.
pub fn krr_exact(p: &KrrProblem) -> Result<Vec<f64>> {
    let n = p.kernel.rows();
    let nf = n as f64;
    let k2 = matmul(&p.kernel, &p.kernel);
    let system = k2.scale(1.0 / nf).add(&p.kernel.scale(2.0 * p.lambda));
    let f = svd(&system)?;
    if p.lambda == 0.0 && f.rank() < n {
        return Err(Error::SingularSystem);
    }
    let rhs = matvec(&p.kernel, &p.y).iter().map(|x| x / nf).collect::<Vec<_>>();
    let alpha = f.pinv_apply(&column(&rhs));
    Ok(alpha.as_slice().to_vec())
}

/// Sketched kernel ridge regression: solve the m-dimensional system
/// α̃^LS = ((1/n)ΠK²Πᵀ + 2λΠKΠᵀ)⁺ · (1/n)ΠKy, lift α = Πᵀα̃^LS, and
/// report the prediction gap √((1/n)·‖K(α − α^LS)‖²) against the exact
/// solve. ΠK²Πᵀ is assembled as (ΠK)(ΠK)ᵀ so K is sketched only once.
pub fn krr_sketched(p: &KrrProblem, sk: &Sketch) -> Result<(Vec<f64>, f64)> {
    let n = p.kernel.rows();
    let nf = n as f64;
    let sa = sk.apply(&p.kernel)?; // ΠK, m×n
    let m = sa.rows();
    let pk2pt = matmul_nt(&sa, &sa);
    let pkpt = sk.apply(&sa.transpose())?;
    let system = pk2pt.scale(1.0 / nf).add(&pkpt.scale(2.0 * p.lambda));
    let f = svd(&system)?;
    if p.lambda == 0.0 && f.rank() < m {
        return Err(Error::SingularSystem);
    }
    let ky = matvec(&p.kernel, &p.y);
    let rhs_vec = sk.apply(&column(&ky))?.as_slice().iter().map(|x| x / nf).collect::<Vec<_>>();
    let alpha_small = f.pinv_apply(&column(&rhs_vec));
    let alpha = sk.apply_transpose(&alpha_small)?.as_slice().to_vec();

    let exact = krr_exact(p)?;
    let diff: Vec<f64> = alpha.iter().zip(&exact).map(|(x, y)| x - y).collect();
    let kd = matvec(&p.kernel, &diff);
    let gap = (kd.iter().map(|x| x * x).sum::<f64>() / nf).sqrt();
    Ok((alpha, gap))
}

// ======================================================================
// instance generators
// ======================================================================

/// Random matrix with a prescribed spectrum: U·diag(spectrum)·Vᵀ with
/// orthonormal factors drawn from the seeded RNG (orthonormalized
/// Gaussian blocks, rotation-invariant). Singular values of the output
/// reproduce `spectrum` to 10⁻⁸.
pub fn gen_decay(n: usize, d: usize, spectrum: &[f64], seed: u64) -> Result<Matrix> {
    let r = spectrum.len();
    if r > n.min(d) {
        return Err(Error::InvalidParams(format!(
            "spectrum has {r} entries but the matrix is {n}x{d}"
        )));
    }
    if spectrum.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParams("spectrum entries must be positive".into()));
    }
    if spectrum.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidParams("spectrum must be non-increasing".into()));
    }
    if r == 0 {
        return Ok(Matrix::zeros(n, d));
    }
    let u = random_orthonormal(n, r, rng::derive_seed(seed, 0))?;
    let v = random_orthonormal(d, r, rng::derive_seed(seed, 1))?;
    let mut us = u;
    for j in 0..r {
        for i in 0..us.rows() {
            let x = us.get(i, j) * spectrum[j];
            us.set(i, j, x);
        }
    }
    Ok(matmul_nt(&us, &v))
}

/// Orthonormal n×r factor from a seeded Gaussian block.
fn random_orthonormal(n: usize, r: usize, seed: u64) -> Result<Matrix> {
    let mut rr = rng::rng_from(seed);
    let mut buf = vec![0.0; n * r];
    rng::fill_normal(&mut rr, &mut buf);
    let g = Matrix::from_vec(n, r, buf)?;
    let q = crate::matcore::orthonormal_basis(&g)?;
    if q.cols() < r {
        // A Gaussian block is full rank outside a measure-zero event.
        return Err(Error::InvalidMatrix);
    }
    Ok(q)
}

/// Rank-r signal with unit top singular value plus full-rank Gaussian
/// noise rescaled to spectral norm `noise_scale`: the regime where the
/// effective rank is r but the actual rank is full.
pub fn gen_lowrank_plus_noise(
    n: usize,
    d: usize,
    r: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<Matrix> {
    if r > n.min(d) {
        return Err(Error::InvalidParams(format!("rank {r} exceeds min({n},{d})")));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::InvalidParams(format!("noise scale must be >= 0, got {noise_scale}")));
    }
    let signal = if r > 0 {
        gen_decay(n, d, &vec![1.0; r], rng::derive_seed(seed, 0))?
    } else {
        Matrix::zeros(n, d)
    };
    if noise_scale == 0.0 {
        return Ok(signal);
    }
    let mut rr = rng::rng_from(rng::derive_seed(seed, 1));
    let mut buf = vec![0.0; n * d];
    rng::fill_normal(&mut rr, &mut buf);
    let raw = Matrix::from_vec(n, d, buf)?;
    let spec = spectral_norm(&raw)?;
    Ok(signal.add(&raw.scale(noise_scale / spec)))
}

// ======================================================================
// tests
// ======================================================================
