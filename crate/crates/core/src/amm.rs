//! The multiplication guarantee itself: error measurement, the stable-rank
//! bound, subspace-embedding distortion, Monte-Carlo estimators, and a
//! verifier for the deterministic sufficient conditions.
//!
//! The quantity everything revolves around is the (k, ε) bound
//!
//! ```text
//! bound(A, B, k, ε) = ε · √( (‖A‖² + ‖A‖_F²/k) · (‖B‖² + ‖B‖_F²/k) )
//! ```
//!
//! valid for any k ≥ 1. A sketch Π *passes* on a realization when
//! ‖(ΠA)ᵀ(ΠB) − AᵀB‖ stays below it. Two routes lead there: a random Π with
//! small subspace-embedding moments passes with high probability, and the
//! deterministic conditions checked by [`verify_deterministic_conditions`]
//! force a pass outright.

use crate::matcore::{
    matmul_tn, orthonormal_basis, orthonormality_defect, spectral_norm, svd, truncate, Matrix,
};
use crate::rng;
use crate::sketch::{build, Sketch, SketchSpec};
use crate::{Error, Result};
use rayon::prelude::*;

// ======================================================================
// reports
// ======================================================================

/// Outcome of one (k, ε) multiplication check.
#[derive(Debug, Clone)]
pub struct AmmReport {
    /// Measured ‖(ΠA)ᵀ(ΠB) − AᵀB‖.
    pub error: f64,
    /// Right side of the (k, ε) bound.
    pub bound: f64,
    pub k: usize,
    pub eps: f64,
    /// (‖A‖, ‖A‖_F, ‖B‖, ‖B‖_F).
    pub norms: (f64, f64, f64, f64),
    /// (r̃(A), r̃(B)); zero matrices report 0.
    pub stable_ranks: (f64, f64),
    /// error ≤ bound.
    pub pass: bool,
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// One grouped subspace-embedding check from the deterministic conditions.
#[derive(Debug, Clone)]
pub struct SubspaceCheck {
    /// Representative level i′ (largest level in the group).
    pub level: usize,
    /// Dimension s_{i′} of the spanned subspace.
    pub dimension: usize,
    /// Required accuracy ε_i = min{1/2, ε√(v_j/k)}.
    pub eps_level: f64,
    /// What the measured distortion is compared against, ε_i / C.
    pub threshold: f64,
    pub distortion: f64,
    pub pass: bool,
}

/// One sketched-tail norm check, ‖Π A_w̄‖ ≤ ε/C.
#[derive(Debug, Clone)]
pub struct TailCheck {
    /// Which input the tail came from, "a" or "b".
    pub matrix: &'static str,
    pub norm: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Full transcript of the deterministic sufficient conditions.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    /// Minimal truncation ranks with unsketched tails below ε/C′.
    pub w: usize,
    pub w_prime: usize,
    /// True when w + w′ ≤ k and a single combined check replaced the
    /// per-level ones.
    pub low_rank_branch: bool,
    pub subspace_checks: Vec<SubspaceCheck>,
    pub tail_checks: Vec<TailCheck>,
    /// Σᵢ sᵢ/2ⁱ, its limit 8k, and whether it holds.
    pub sum_bound: f64,
    pub sum_bound_limit: f64,
    pub sum_bound_pass: bool,
    pub all_pass: bool,
}

// ======================================================================
// bound and error
// ======================================================================

/// Right side of the (k, ε) multiplication bound. Monotone decreasing in k
/// with limit ε‖A‖‖B‖.
pub fn amm_bound(a: &Matrix, b: &Matrix, k: usize, eps: f64) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::ShapeMismatch(format!(
            "bound needs equal row counts, got {} and {}",
            a.rows(),
            b.rows()
        )));
    }
    if k < 1 {
        return Err(Error::InvalidParams("bound needs k >= 1".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParams(format!("bound needs eps > 0, got {eps}")));
    }
    let kf = k as f64;
    let sa = spectral_norm(a)?;
    let sb = spectral_norm(b)?;
    let fa = a.frobenius_norm();
    let fb = b.frobenius_norm();
    Ok(eps * ((sa * sa + fa * fa / kf) * (sb * sb + fb * fb / kf)).sqrt())
}

/// Measured spectral error ‖(ΠA)ᵀ(ΠB) − AᵀB‖ for one realized sketch.
pub fn amm_error(a: &Matrix, b: &Matrix, sk: &Sketch) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::ShapeMismatch(format!(
            "product needs equal row counts, got {} and {}",
            a.rows(),
            b.rows()
        )));
    }
    let sa = sk.apply(a)?;
    let sb = sk.apply(b)?;
    let diff = matmul_tn(&sa, &sb).sub(&matmul_tn(a, b));
    spectral_norm(&diff)
}

/// Run one full (k, ε) check and report both sides.
pub fn check_kamm(a: &Matrix, b: &Matrix, sk: &Sketch, k: usize, eps: f64) -> Result<AmmReport> {
    let bound = amm_bound(a, b, k, eps)?;
    let error = amm_error(a, b, sk)?;
    let sa = spectral_norm(a)?;
    let sb = spectral_norm(b)?;
    let fa = a.frobenius_norm();
    let fb = b.frobenius_norm();
    let sr = |spec: f64, fro: f64| if spec == 0.0 { 0.0 } else { (fro / spec) * (fro / spec) };
    Ok(AmmReport {
        error,
        bound,
        k,
        eps,
        norms: (sa, fa, sb, fb),
        stable_ranks: (sr(sa, fa), sr(sb, fb)),
        pass: error <= bound,
    })
}

/// Subspace-embedding distortion ‖(ΠU)ᵀ(ΠU) − I‖ for an orthonormal U.
/// An empty basis (zero columns) has distortion 0 by convention.
pub fn embed_distortion(sk: &Sketch, u: &Matrix) -> Result<f64> {
    let defect = orthonormality_defect(u);
    if defect > 1e-6 {
        return Err(Error::NotOrthonormal(defect));
    }
    if u.cols() == 0 {
        return Ok(0.0);
    }
    let su = sk.apply(u)?;
    let gram = matmul_tn(&su, &su).sub(&Matrix::identity(u.cols()));
    spectral_norm(&gram)
}

// ======================================================================
// Monte-Carlo estimators
// ======================================================================

/// Validate common estimator inputs.
fn check_trials(trials: usize) -> Result<()> {
    if trials < 1 {
        return Err(Error::InvalidParams("estimators need trials >= 1".into()));
    }
    Ok(())
}

/// Run `trials` independent evaluations, one sketch each, in trial order.
/// Trials execute in parallel but are collected by index and reduced
/// sequentially, so the result is independent of the thread count.
fn per_trial<F>(spec: &SketchSpec, trials: usize, seed: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Sketch) -> Result<f64> + Sync,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let sk = build(&spec.with_seed(rng::derive_seed(seed, t)))?;
            f(&sk)
        })
        .collect::<Result<Vec<f64>>>()
}

/// Monte-Carlo estimate of E‖(ΠU)ᵀ(ΠU) − I‖^ℓ over fresh sketches.
///
/// The moment hypothesis worth testing against is E distortion^ℓ < ε^ℓ · δ;
/// the standard error is the sample one (σ̂/√trials).
pub fn estimate_ose_moment(
    spec: &SketchSpec,
    u: &Matrix,
    ell: usize,
    trials: usize,
    seed: u64,
) -> Result<Estimate> {
    check_trials(trials)?;
    if ell < 1 {
        return Err(Error::InvalidParams("moment order ell must be >= 1".into()));
    }
    let defect = orthonormality_defect(u);
    if defect > 1e-6 {
        return Err(Error::NotOrthonormal(defect));
    }
    let samples = per_trial(spec, trials, seed, |sk| {
        Ok(embed_distortion(sk, u)?.powi(ell as i32))
    })?;
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let std_err = if trials > 1 {
        let var =
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(Estimate { value: mean, std_err, trials })
}

/// Fraction of trials on which the (k, ε) check fails, with binomial
/// standard error √(p̂(1−p̂)/trials).
pub fn estimate_failure_rate(
    spec: &SketchSpec,
    a: &Matrix,
    b: &Matrix,
    k: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<Estimate> {
    check_trials(trials)?;
    // Hoist the trial-invariant side out of the loop.
    let bound = amm_bound(a, b, k, eps)?;
    let exact = matmul_tn(a, b);
    let samples = per_trial(spec, trials, seed, |sk| {
        let sa = sk.apply(a)?;
        let sb = sk.apply(b)?;
        let err = spectral_norm(&matmul_tn(&sa, &sb).sub(&exact))?;
        Ok(if err <= bound { 0.0 } else { 1.0 })
    })?;
    let rate = samples.iter().sum::<f64>() / trials as f64;
    let std_err = (rate * (1.0 - rate) / trials as f64).sqrt();
    Ok(Estimate { value: rate, std_err, trials })
}

// ======================================================================
// deterministic sufficient conditions
// ======================================================================

/// Check the deterministic conditions under which a *fixed* sketch passes
/// the (k, ε) bound.
///
/// Inputs are first normalized so max{‖·‖², ‖·‖_F²/k} = 1. With tails cut
/// at ε/C′ (giving truncation ranks w, w′), the conditions are:
///
/// 1. per-level subspace embeddings: for levels 0 ≤ i ≤ log₂(1/ε²), the
///    span of the retained singular directions with squared singular value
///    ≥ 2⁻ⁱ — always including the top min{k,w} of each input — must be
///    embedded with distortion ≤ ε_i/C, where ε_i = min{1/2, ε√(v_j/k)}
///    and v_j is the group's power-of-two dimension bucket; levels sharing
///    a bucket are checked once, at the largest level in the group;
/// 2. sketched tails stay small: ‖ΠA_w̄‖, ‖ΠB_w̄′‖ ≤ ε/C.
///
/// When w + w′ ≤ k a single ε/C embedding of span(A_w, B_w′) replaces the
/// per-level checks. The dimension ledger Σᵢ sᵢ/2ⁱ ≤ 8k is reported
/// alongside; it holds unconditionally and `all_pass` requires it too.
///
/// Defaults elsewhere use C = C′ = 12: the error budget the proof spends
/// is (2√8 + 3)/C + 1/C² + 2/C′ + 1/C′² ≈ 0.902 ≤ 1 at 12, and no smaller
/// round value fits.
pub fn verify_deterministic_conditions(
    sk: &Sketch,
    a: &Matrix,
    b: &Matrix,
    k: usize,
    eps: f64,
    c_const: f64,
    cprime_const: f64,
) -> Result<ConditionReport> {
    if a.is_zero() || b.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    if k < 1 {
        return Err(Error::InvalidParams("conditions need k >= 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParams(format!("conditions need 0 < eps < 1, got {eps}")));
    }
    if c_const <= 0.0 || cprime_const <= 0.0 {
        return Err(Error::InvalidParams("constants C, C' must be positive".into()));
    }
    let kf = k as f64;

    // Normalize each input so max{‖X‖², ‖X‖_F²/k} = 1.
    let normalize = |x: &Matrix| -> Result<Matrix> {
        let spec = spectral_norm(x)?;
        let fro = x.frobenius_norm();
        let scale = (spec * spec).max(fro * fro / kf).sqrt();
        Ok(x.scale(1.0 / scale))
    };
    let na = normalize(a)?;
    let nb = normalize(b)?;

    let fa = svd(&na)?;
    let fb = svd(&nb)?;
    let tail_cut = eps / cprime_const;
    let w = fa.sigma.iter().take_while(|&&s| s > tail_cut).count();
    let w_prime = fb.sigma.iter().take_while(|&&s| s > tail_cut).count();

    let (_, a_tail) = truncate(&fa, w);
    let (_, b_tail) = truncate(&fb, w_prime);

    // Retained factors: the first w (respectively w′) singular directions.
    let ua = keep_cols(&fa.u, w);
    let ub = keep_cols(&fb.u, w_prime);

    // Levels 0 ≤ i ≤ log₂(1/ε²). The top min{k, w} directions of each
    // input belong to every level's set.
    let max_level = (1.0 / (eps * eps)).log2().floor().max(0.0) as usize;
    let top_a = k.min(w);
    let top_b = k.min(w_prime);

    let mut level_dims = Vec::with_capacity(max_level + 1);
    let mut level_sets: Vec<Matrix> = Vec::with_capacity(max_level + 1);
    for i in 0..=max_level {
        let thresh = 0.5_f64.powi(i as i32);
        let ca = (0..w).filter(|&j| fa.sigma[j] * fa.sigma[j] >= thresh).count().max(top_a);
        let cb = (0..w_prime)
            .filter(|&j| fb.sigma[j] * fb.sigma[j] >= thresh)
            .count()
            .max(top_b);
        // Singular values are sorted, so "σ² ≥ threshold or among the top
        // few" is a prefix of columns on each side.
        let stack = keep_cols(&ua, ca).hstack(&keep_cols(&ub, cb));
        let dim = svd(&stack)?.rank();
        level_dims.push(dim);
        level_sets.push(stack);
    }

    let sum_bound: f64 =
        level_dims.iter().enumerate().map(|(i, &s)| s as f64 / 2f64.powi(i as i32)).sum();
    let sum_bound_limit = 8.0 * kf;
    let sum_bound_pass = sum_bound <= sum_bound_limit;

    let low_rank_branch = w + w_prime <= k;
    let mut subspace_checks = Vec::new();
    if low_rank_branch {
        let basis = orthonormal_basis(&ua.hstack(&ub))?;
        let distortion = embed_distortion(sk, &basis)?;
        let threshold = eps / c_const;
        subspace_checks.push(SubspaceCheck {
            level: 0,
            dimension: basis.cols(),
            eps_level: eps,
            threshold,
            distortion,
            pass: distortion <= threshold,
        });
    } else {
        // Group levels by the power-of-two rounding of their dimension and
        // check each group once, at its largest level. Empty groups
        // (dimension 0) cannot occur here: w + w′ > k ≥ 1 keeps the top
        // directions nonempty at every level.
        let rounded: Vec<usize> =
            level_dims.iter().map(|&s| s.max(1).next_power_of_two()).collect();
        let mut start = 0;
        while start <= max_level {
            let mut end = start;
            while end + 1 <= max_level && rounded[end + 1] == rounded[start] {
                end += 1;
            }
            let v_j = rounded[start] as f64;
            let eps_level = (0.5_f64).min(eps * (v_j / kf).sqrt());
            let threshold = eps_level / c_const;
            let basis = orthonormal_basis(&level_sets[end])?;
            let distortion = embed_distortion(sk, &basis)?;
            subspace_checks.push(SubspaceCheck {
                level: end,
                dimension: level_dims[end],
                eps_level,
                threshold,
                distortion,
                pass: distortion <= threshold,
            });
            start = end + 1;
        }
    }

    let tail_threshold = eps / c_const;
    let mut tail_checks = Vec::with_capacity(2);
    for (label, tail) in [("a", &a_tail), ("b", &b_tail)] {
        let norm = spectral_norm(&sk.apply(tail)?)?;
        tail_checks.push(TailCheck {
            matrix: label,
            norm,
            threshold: tail_threshold,
            pass: norm <= tail_threshold,
        });
    }

    let all_pass = subspace_checks.iter().all(|c| c.pass)
        && tail_checks.iter().all(|c| c.pass)
        && sum_bound_pass;

    Ok(ConditionReport {
        w,
        w_prime,
        low_rank_branch,
        subspace_checks,
        tail_checks,
        sum_bound,
        sum_bound_limit,
        sum_bound_pass,
        all_pass,
    })
}

/// First `k` columns of a matrix.
fn keep_cols(m: &Matrix, k: usize) -> Matrix {
    let k = k.min(m.cols());
    let mut out = Matrix::zeros(m.rows(), k);
    for i in 0..m.rows() {
        out.row_mut(i).copy_from_slice(&m.row(i)[..k]);
    }
    out
}

// ======================================================================
// tests
// ======================================================================
