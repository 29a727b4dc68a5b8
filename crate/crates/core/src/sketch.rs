//! Sketching operators: planning, construction, application.
//!
//! A sketch Π is an m × n linear map applied to the left of tall matrices,
//! m ≪ n. Four production families are supported, one test hook, and
//! composition:
//!
//! | family            | realization                                   | apply cost  |
//! |-------------------|-----------------------------------------------|-------------|
//! | `Gaussian`        | i.i.d. N(0, 1/m) entries                      | O(mnd)      |
//! | `Sign`            | i.i.d. ±1/√m entries                          | O(mnd)      |
//! | `Srht`            | (1/√m) · S H D, rows sampled after a fast     | O(nd log n) |
//! |                   | Walsh-Hadamard transform with random signs    |             |
//! | `SparseEmbedding` | one ±1/√s entry per block per column,         | O(snd)      |
//! |                   | m rows split into s equal blocks              |             |
//! | `Identity`        | Π = I, for tests that need zero distortion    | O(nd)       |
//! | `Composed`        | product of stages, innermost applied first    | sum         |
//!
//! Construction is a pure function of the spec: entries for column j come
//! from the substream `derive_seed(seed, j)`, so builds are reproducible
//! and parallelizable without coordination (SRHT, being row-structured,
//! keys its sign and sampling streams as substreams 0 and 1).

use crate::matcore::{matmul, matmul_tn, Matrix};
use crate::rng;
use crate::{Error, Result};

// ======================================================================
// specs
// ======================================================================

/// Sketch family tag, used by the planner and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Sign,
    Srht,
    SparseEmbedding,
    Composed,
    Identity,
}

/// Everything needed to realize a sketch deterministically.
#[derive(Debug, Clone, PartialEq)]
pub enum SketchSpec {
    /// Dense i.i.d. N(0, 1/m) entries.
    Gaussian { m: usize, n: usize, seed: u64 },
    /// Dense i.i.d. ±1/√m entries.
    Sign { m: usize, n: usize, seed: u64 },
    /// Subsampled randomized Hadamard transform. The input is zero-padded
    /// to n′ = 2^⌈log₂ n⌉ internally; `m` rows of the transformed input are
    /// sampled i.i.d. uniformly with replacement and scaled by 1/√m.
    Srht { m: usize, n: usize, seed: u64 },
    /// Sparse embedding: rows split into `s` blocks of m/s; every input
    /// coordinate gets exactly one ±1/√s entry in each block, so each
    /// column of Π has norm exactly 1.
    SparseEmbedding { m: usize, n: usize, s: usize, seed: u64 },
    /// Product of stages, listed outermost first; the last stage touches
    /// the data first. Validated by [`compose`].
    Composed { stages: Vec<SketchSpec> },
    /// Π = I. A test hook: feeding it anywhere must reproduce exact
    /// arithmetic, which pins down scalings and orderings in the callers.
    Identity { n: usize },
}

impl SketchSpec {
    pub fn family(&self) -> Family {
        match self {
            SketchSpec::Gaussian { .. } => Family::Gaussian,
            SketchSpec::Sign { .. } => Family::Sign,
            SketchSpec::Srht { .. } => Family::Srht,
            SketchSpec::SparseEmbedding { .. } => Family::SparseEmbedding,
            SketchSpec::Composed { .. } => Family::Composed,
            SketchSpec::Identity { .. } => Family::Identity,
        }
    }

    /// Output dimension m.
    pub fn rows(&self) -> usize {
        match self {
            SketchSpec::Gaussian { m, .. }
            | SketchSpec::Sign { m, .. }
            | SketchSpec::Srht { m, .. }
            | SketchSpec::SparseEmbedding { m, .. } => *m,
            SketchSpec::Composed { stages } => stages[0].rows(),
            SketchSpec::Identity { n } => *n,
        }
    }

    /// Input dimension n.
    pub fn cols(&self) -> usize {
        match self {
            SketchSpec::Gaussian { n, .. }
            | SketchSpec::Sign { n, .. }
            | SketchSpec::Srht { n, .. }
            | SketchSpec::SparseEmbedding { n, .. } => *n,
            SketchSpec::Composed { stages } => stages.last().unwrap().cols(),
            SketchSpec::Identity { n } => *n,
        }
    }

    /// Same structure, fresh seed. Stage i of a composition is reseeded
    /// with `derive_seed(seed, i)`; the identity has no randomness.
    pub fn with_seed(&self, seed: u64) -> SketchSpec {
        match self {
            SketchSpec::Gaussian { m, n, .. } => SketchSpec::Gaussian { m: *m, n: *n, seed },
            SketchSpec::Sign { m, n, .. } => SketchSpec::Sign { m: *m, n: *n, seed },
            SketchSpec::Srht { m, n, .. } => SketchSpec::Srht { m: *m, n: *n, seed },
            SketchSpec::SparseEmbedding { m, n, s, .. } => {
                SketchSpec::SparseEmbedding { m: *m, n: *n, s: *s, seed }
            }
            SketchSpec::Composed { stages } => SketchSpec::Composed {
                stages: stages
                    .iter()
                    .enumerate()
                    .map(|(i, st)| st.with_seed(rng::derive_seed(seed, i as u64)))
                    .collect(),
            },
            SketchSpec::Identity { n } => SketchSpec::Identity { n: *n },
        }
    }

    /// Structural checks: positive dimensions for the base families,
    /// block counts that divide m for sparse embeddings, dimension
    /// chaining for compositions.
    pub fn validate(&self) -> Result<()> {
        match self {
            SketchSpec::Gaussian { m, n, .. }
            | SketchSpec::Sign { m, n, .. }
            | SketchSpec::Srht { m, n, .. } => check_dims(*m, *n),
            SketchSpec::SparseEmbedding { m, n, s, .. } => {
                check_dims(*m, *n)?;
                if *s == 0 || *s > *m {
                    return Err(Error::InvalidParams(format!(
                        "sparse embedding needs 1 <= s <= m, got s={s}, m={m}"
                    )));
                }
                if *m % *s != 0 {
                    return Err(Error::InvalidParams(format!(
                        "block count s={s} must divide m={m}"
                    )));
                }
                Ok(())
            }
            SketchSpec::Composed { stages } => {
                if stages.is_empty() {
                    return Err(Error::InvalidParams("empty composition".into()));
                }
                for st in stages {
                    st.validate()?;
                }
                for pair in stages.windows(2) {
                    if pair[0].cols() != pair[1].rows() {
                        return Err(Error::ShapeMismatch(format!(
                            "composition stage outputs {} rows, next stage consumes {}",
                            pair[1].rows(),
                            pair[0].cols()
                        )));
                    }
                }
                Ok(())
            }
            SketchSpec::Identity { n } => {
                if *n == 0 {
                    return Err(Error::InvalidParams("identity sketch needs n >= 1".into()));
                }
                Ok(())
            }
        }
    }
}

// Oversampling (m > n) is allowed: planner sizes routinely exceed short
// input dimensions and the operators stay well defined.
fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParams(format!("need m >= 1 and n >= 1, got m={m}, n={n}")));
    }
    Ok(())
}

/// Validate and wrap a chain of specs, outermost first. Each stage must
/// consume exactly what the next one produces. A single-element chain is
/// the identity composition: same behavior as the spec itself.
pub fn compose(specs: Vec<SketchSpec>) -> Result<SketchSpec> {
    let composed = SketchSpec::Composed { stages: specs };
    composed.validate()?;
    Ok(composed)
}

// ======================================================================
// planning
// ======================================================================

/// Sketch sizes meeting the (k, ε, δ) multiplication guarantee, as
/// (rows m, block count s); s = 0 for families without blocks.
///
/// - Gaussian, Sign:      m = ⌈c · (k + ln(1/δ)) / ε²⌉
/// - Srht:                m = ⌈c · (k + ln(1/(εδ)) · ln(k/δ)) / ε²⌉
/// - SparseEmbedding:     s = ⌈c · ln(k/δ) / ε⌉ and
///                        m = ⌈c · k · ln(k/δ) / ε²⌉ rounded up to a
///                        multiple of s
///
/// `c` is the calibration constant; c = 1 matches the formulas as stated
/// and the `calibrate` experiment finds the smallest empirically safe
/// value. Composed and identity sketches have no planner.
pub fn plan_rows(family: Family, k: usize, eps: f64, delta: f64, c: f64) -> Result<(usize, usize)> {
    if k < 1 {
        return Err(Error::InvalidParams("planner needs k >= 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParams(format!("planner needs 0 < eps < 1, got {eps}")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParams(format!("planner needs 0 < delta < 1/2, got {delta}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParams(format!("planner needs c > 0, got {c}")));
    }
    let kf = k as f64;
    match family {
        Family::Gaussian | Family::Sign => {
            let m = (c * (kf + (1.0 / delta).ln()) / (eps * eps)).ceil() as usize;
            Ok((m.max(1), 0))
        }
        Family::Srht => {
            let m = (c * (kf + (1.0 / (eps * delta)).ln() * (kf / delta).ln()) / (eps * eps))
                .ceil() as usize;
            Ok((m.max(1), 0))
        }
        Family::SparseEmbedding => {
            let s = (c * (kf / delta).ln() / eps).ceil() as usize;
            let s = s.max(1);
            let m0 = (c * kf * (kf / delta).ln() / (eps * eps)).ceil() as usize;
            let m = m0.div_ceil(s) * s;
            Ok((m.max(s), s))
        }
        Family::Composed | Family::Identity => Err(Error::InvalidParams(
            "no planner for composed or identity sketches".into(),
        )),
    }
}

// ======================================================================
// realization
// ======================================================================

#[derive(Debug, Clone)]
enum Realization {
    /// Explicit m × n entries (Gaussian, Sign).
    Dense(Matrix),
    /// SRHT pieces: per-coordinate signs (±1, length n′), sampled row
    /// indices into the transformed space (length m), padded length n′.
    Hadamard { signs: Vec<f64>, picks: Vec<usize>, padded: usize },
    /// Sparse embedding: column j owns entries [j·s, (j+1)·s); `targets`
    /// are absolute output rows, `values` are ±1/√s.
    Sparse { targets: Vec<usize>, values: Vec<f64>, s: usize },
    Stages(Vec<Sketch>),
    Identity,
}

/// A realized sketching operator. Holds the spec it was built from plus
/// whatever the family needs to apply itself; build it once and apply it to
/// any matrix with matching row count.
#[derive(Debug, Clone)]
pub struct Sketch {
    spec: SketchSpec,
    realization: Realization,
}

/// Realize a sketch from its spec. Deterministic: byte-identical output for
/// equal specs, on every platform.
pub fn build(spec: &SketchSpec) -> Result<Sketch> {
    spec.validate()?;
    let realization = match spec {
        SketchSpec::Gaussian { m, n, seed } => {
            let scale = 1.0 / (*m as f64).sqrt();
            let mut p = Matrix::zeros(*m, *n);
            let mut col = vec![0.0; *m];
            for j in 0..*n {
                let mut r = rng::rng_from(rng::derive_seed(*seed, j as u64));
                rng::fill_normal(&mut r, &mut col);
                for i in 0..*m {
                    p.set(i, j, scale * col[i]);
                }
            }
            Realization::Dense(p)
        }
        SketchSpec::Sign { m, n, seed } => {
            let scale = 1.0 / (*m as f64).sqrt();
            let mut p = Matrix::zeros(*m, *n);
            for j in 0..*n {
                let mut r = rng::rng_from(rng::derive_seed(*seed, j as u64));
                for i in 0..*m {
                    let sign = if rng::uniform(&mut r) < 0.5 { -1.0 } else { 1.0 };
                    p.set(i, j, scale * sign);
                }
            }
            Realization::Dense(p)
        }
        SketchSpec::Srht { m, n, seed } => {
            let padded = n.next_power_of_two();
            let mut sign_rng = rng::rng_from(rng::derive_seed(*seed, 0));
            let signs: Vec<f64> = (0..padded)
                .map(|_| if rng::uniform(&mut sign_rng) < 0.5 { -1.0 } else { 1.0 })
                .collect();
            let mut pick_rng = rng::rng_from(rng::derive_seed(*seed, 1));
            let picks: Vec<usize> =
                (0..*m).map(|_| rng::uniform_below(&mut pick_rng, padded)).collect();
            Realization::Hadamard { signs, picks, padded }
        }
        SketchSpec::SparseEmbedding { m, n, s, seed } => {
            let block = m / s;
            let value = 1.0 / (*s as f64).sqrt();
            let mut targets = Vec::with_capacity(n * s);
            let mut values = Vec::with_capacity(n * s);
            for j in 0..*n {
                let mut r = rng::rng_from(rng::derive_seed(*seed, j as u64));
                for b in 0..*s {
                    let offset = rng::uniform_below(&mut r, block);
                    let sign = if rng::uniform(&mut r) < 0.5 { -1.0 } else { 1.0 };
                    targets.push(b * block + offset);
                    values.push(sign * value);
                }
            }
            Realization::Sparse { targets, values, s: *s }
        }
        SketchSpec::Composed { stages } => {
            let built: Result<Vec<Sketch>> = stages.iter().map(build).collect();
            Realization::Stages(built?)
        }
        SketchSpec::Identity { .. } => Realization::Identity,
    };
    Ok(Sketch { spec: spec.clone(), realization })
}

impl Sketch {
    pub fn spec(&self) -> &SketchSpec {
        &self.spec
    }

    /// Output dimension m.
    pub fn rows(&self) -> usize {
        self.spec.rows()
    }

    /// Input dimension n.
    pub fn cols(&self) -> usize {
        self.spec.cols()
    }

    /// Π · A. The input must have exactly `cols()` rows.
    pub fn apply(&self, a: &Matrix) -> Result<Matrix> {
        if a.rows() != self.cols() {
            return Err(Error::ShapeMismatch(format!(
                "sketch consumes {} rows, input has {}",
                self.cols(),
                a.rows()
            )));
        }
        Ok(match &self.realization {
            Realization::Dense(p) => matmul(p, a),
            Realization::Hadamard { signs, picks, padded } => {
                let m = self.spec.rows();
                let scale = 1.0 / (m as f64).sqrt();
                let mut out = Matrix::zeros(m, a.cols());
                let mut buf = vec![0.0; *padded];
                for c in 0..a.cols() {
                    buf.iter_mut().for_each(|x| *x = 0.0);
                    for i in 0..a.rows() {
                        buf[i] = signs[i] * a.get(i, c);
                    }
                    fwht(&mut buf).expect("padded length is a power of two");
                    for (t, &row) in picks.iter().enumerate() {
                        out.set(t, c, scale * buf[row]);
                    }
                }
                out
            }
            Realization::Sparse { targets, values, s } => {
                let mut out = Matrix::zeros(self.spec.rows(), a.cols());
                for j in 0..a.rows() {
                    let arow = a.row(j).to_vec();
                    for e in j * s..(j + 1) * s {
                        let w = values[e];
                        let orow = out.row_mut(targets[e]);
                        for (o, &x) in orow.iter_mut().zip(&arow) {
                            *o += w * x;
                        }
                    }
                }
                out
            }
            Realization::Stages(stages) => {
                let mut cur = stages.last().unwrap().apply(a)?;
                for st in stages[..stages.len() - 1].iter().rev() {
                    cur = st.apply(&cur)?;
                }
                cur
            }
            Realization::Identity => a.clone(),
        })
    }

    /// Πᵀ · B, the adjoint action. Needed to lift sketched solutions back
    /// to the original coordinates (kernel regression does this).
    pub fn apply_transpose(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.rows() {
            return Err(Error::ShapeMismatch(format!(
                "sketch adjoint consumes {} rows, input has {}",
                self.rows(),
                b.rows()
            )));
        }
        Ok(match &self.realization {
            Realization::Dense(p) => matmul_tn(p, b),
            Realization::Hadamard { signs, picks, padded } => {
                // Πᵀ = (1/√m) · D H Sᵀ: scatter, transform (H is symmetric),
                // re-sign, drop the padding.
                let n = self.spec.cols();
                let scale = 1.0 / (self.spec.rows() as f64).sqrt();
                let mut out = Matrix::zeros(n, b.cols());
                let mut buf = vec![0.0; *padded];
                for c in 0..b.cols() {
                    buf.iter_mut().for_each(|x| *x = 0.0);
                    for (t, &row) in picks.iter().enumerate() {
                        buf[row] += b.get(t, c);
                    }
                    fwht(&mut buf).expect("padded length is a power of two");
                    for i in 0..n {
                        out.set(i, c, scale * signs[i] * buf[i]);
                    }
                }
                out
            }
            Realization::Sparse { targets, values, s } => {
                let mut out = Matrix::zeros(self.spec.cols(), b.cols());
                for j in 0..out.rows() {
                    for e in j * s..(j + 1) * s {
                        let w = values[e];
                        let brow = b.row(targets[e]).to_vec();
                        let orow = out.row_mut(j);
                        for (o, &x) in orow.iter_mut().zip(&brow) {
                            *o += w * x;
                        }
                    }
                }
                out
            }
            Realization::Stages(stages) => {
                // (S₀ S₁ ⋯)ᵀ = ⋯ S₁ᵀ S₀ᵀ: outermost adjoint first.
                let mut cur = stages[0].apply_transpose(b)?;
                for st in &stages[1..] {
                    cur = st.apply_transpose(&cur)?;
                }
                cur
            }
            Realization::Identity => b.clone(),
        })
    }

    /// Dense m × n representation, by applying to the identity. Meant for
    /// tests and small-instance oracles, not production paths.
    pub fn to_dense(&self) -> Matrix {
        self.apply(&Matrix::identity(self.cols())).expect("identity has matching rows")
    }
}

// ======================================================================
// fast Walsh-Hadamard transform
// ======================================================================

/// In-place Walsh-Hadamard transform: v ← H v with H_{i,j} = (−1)^⟨i,j⟩,
/// ⟨i,j⟩ the bitwise inner product. H is symmetric, unnormalized, and
/// satisfies H² = n·I. Length must be a power of two.
pub fn fwht(v: &mut [f64]) -> Result<()> {
    let n = v.len();
    if !n.is_power_of_two() {
        return Err(Error::InvalidLength(n));
    }
    let mut h = 1;
    while h < n {
        for chunk in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi) {
                let x = *a;
                let y = *b;
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

// ======================================================================
// tests
// ======================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore;
    use proptest::prelude::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = rng::rng_from(seed);
        let mut buf = vec![0.0; rows * cols];
        rng::fill_normal(&mut r, &mut buf);
        Matrix::from_vec(rows, cols, buf).unwrap()
    }

    // ----- planning -----

    #[test]
    fn planner_matches_worked_examples() {
        // (8 + ln 20) / 0.25² = 175.93…
        assert_eq!(plan_rows(Family::Gaussian, 8, 0.25, 0.05, 1.0).unwrap(), (176, 0));
        assert_eq!(plan_rows(Family::Sign, 8, 0.25, 0.05, 1.0).unwrap(), (176, 0));
        // ln(160)/0.5 = 10.15… → s = 11; m₀ = ⌈8·ln 160/0.25⌉ = 163 → 165.
        let (m, s) = plan_rows(Family::SparseEmbedding, 8, 0.5, 0.05, 1.0).unwrap();
        assert_eq!(s, 11);
        assert_eq!(m % s, 0);
        assert_eq!(m, 165);
        // (8 + ln 80 · ln 160) / 0.25² = 483.83…
        assert_eq!(plan_rows(Family::Srht, 8, 0.25, 0.05, 1.0).unwrap(), (484, 0));
    }

    #[test]
    fn planner_scales_with_c() {
        let (m1, _) = plan_rows(Family::Gaussian, 8, 0.25, 0.05, 1.0).unwrap();
        let (m2, _) = plan_rows(Family::Gaussian, 8, 0.25, 0.05, 2.0).unwrap();
        assert_eq!(m2, 2 * m1);
    }

    #[test]
    fn planner_rejects_bad_params() {
        assert!(plan_rows(Family::Gaussian, 0, 0.25, 0.05, 1.0).is_err());
        assert!(plan_rows(Family::Gaussian, 8, 1.0, 0.05, 1.0).is_err());
        assert!(plan_rows(Family::Gaussian, 8, 0.25, 0.5, 1.0).is_err());
        assert!(plan_rows(Family::Gaussian, 8, 0.25, 0.05, 0.0).is_err());
        assert!(plan_rows(Family::Composed, 8, 0.25, 0.05, 1.0).is_err());
        assert!(plan_rows(Family::Identity, 8, 0.25, 0.05, 1.0).is_err());
    }

    // ----- validation -----

    #[test]
    fn spec_validation() {
        assert!(SketchSpec::Gaussian { m: 0, n: 4, seed: 0 }.validate().is_err());
        assert!(SketchSpec::Gaussian { m: 4, n: 0, seed: 0 }.validate().is_err());
        assert!(SketchSpec::Gaussian { m: 5, n: 4, seed: 0 }.validate().is_ok());
        assert!(SketchSpec::SparseEmbedding { m: 6, n: 8, s: 4, seed: 0 }.validate().is_err());
        assert!(SketchSpec::SparseEmbedding { m: 6, n: 8, s: 3, seed: 0 }.validate().is_ok());
        assert!(compose(vec![]).is_err());
        let bad = compose(vec![
            SketchSpec::Gaussian { m: 3, n: 5, seed: 0 },
            SketchSpec::Gaussian { m: 6, n: 9, seed: 1 },
        ]);
        assert!(matches!(bad, Err(Error::ShapeMismatch(_))));
    }

    // ----- determinism -----

    #[test]
    fn build_is_deterministic() {
        let a = random_matrix(32, 5, 99);
        for spec in [
            SketchSpec::Gaussian { m: 8, n: 32, seed: 7 },
            SketchSpec::Sign { m: 8, n: 32, seed: 7 },
            SketchSpec::Srht { m: 8, n: 32, seed: 7 },
            SketchSpec::SparseEmbedding { m: 8, n: 32, s: 2, seed: 7 },
        ] {
            let x = build(&spec).unwrap().apply(&a).unwrap();
            let y = build(&spec).unwrap().apply(&a).unwrap();
            assert_eq!(x, y, "{:?}", spec.family());
            let z = build(&spec.with_seed(8)).unwrap().apply(&a).unwrap();
            assert_ne!(x, z, "{:?} ignored its seed", spec.family());
        }
    }

    // ----- structure of each family -----

    #[test]
    fn sign_entries_are_unit_scaled() {
        let sk = build(&SketchSpec::Sign { m: 16, n: 24, seed: 3 }).unwrap();
        let p = sk.to_dense();
        let want = 1.0 / 4.0;
        for i in 0..16 {
            for j in 0..24 {
                assert!((p.get(i, j).abs() - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gaussian_sign_isotropy() {
        // E[ΠᵀΠ] = I, checked entrywise on the Monte-Carlo mean.
        for base in [
            SketchSpec::Gaussian { m: 32, n: 12, seed: 0 },
            SketchSpec::Sign { m: 32, n: 12, seed: 0 },
        ] {
            let trials = 300;
            let mut mean = Matrix::zeros(12, 12);
            for t in 0..trials {
                let sk = build(&base.with_seed(rng::derive_seed(1000, t))).unwrap();
                let p = sk.to_dense();
                mean = mean.add(&matcore::matmul_tn(&p, &p));
            }
            mean = mean.scale(1.0 / trials as f64);
            let defect = mean.sub(&Matrix::identity(12)).max_abs();
            assert!(defect < 0.05, "{:?} isotropy defect {defect}", base.family());
        }
    }

    #[test]
    fn srht_matches_direct_formula() {
        // Independent oracle: Π[t][j] = sign_j · (−1)^popcount(pick_t & j) / √m.
        let spec = SketchSpec::Srht { m: 8, n: 13, seed: 5 };
        let sk = build(&spec).unwrap();
        let p = sk.to_dense();
        let padded = 16usize;
        let mut sign_rng = rng::rng_from(rng::derive_seed(5, 0));
        let signs: Vec<f64> = (0..padded)
            .map(|_| if rng::uniform(&mut sign_rng) < 0.5 { -1.0 } else { 1.0 })
            .collect();
        let mut pick_rng = rng::rng_from(rng::derive_seed(5, 1));
        let picks: Vec<usize> = (0..8).map(|_| rng::uniform_below(&mut pick_rng, padded)).collect();
        for (t, &row) in picks.iter().enumerate() {
            for j in 0..13 {
                let parity = if (row & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                let want = signs[j] * parity / (8.0_f64).sqrt();
                assert!((p.get(t, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn srht_is_isotropic_in_expectation() {
        // E[ΠᵀΠ] = I holds exactly per sampled row; the Monte-Carlo mean
        // over seeds should settle near I.
        let base = SketchSpec::Srht { m: 16, n: 8, seed: 0 };
        let trials = 300;
        let mut mean = Matrix::zeros(8, 8);
        for t in 0..trials {
            let p = build(&base.with_seed(rng::derive_seed(2000, t))).unwrap().to_dense();
            mean = mean.add(&matcore::matmul_tn(&p, &p));
        }
        mean = mean.scale(1.0 / trials as f64);
        assert!(mean.sub(&Matrix::identity(8)).max_abs() < 0.1);
    }

    #[test]
    fn sparse_columns_have_unit_norm_and_block_structure() {
        let spec = SketchSpec::SparseEmbedding { m: 12, n: 9, s: 3, seed: 2 };
        let p = build(&spec).unwrap().to_dense();
        for j in 0..9 {
            let col = p.col(j);
            let norm2: f64 = col.iter().map(|x| x * x).sum();
            assert!((norm2 - 1.0).abs() < 1e-12, "column {j} norm² = {norm2}");
            // Exactly one entry per block of 4 rows.
            for b in 0..3 {
                let nnz = (0..4).filter(|&r| col[b * 4 + r] != 0.0).count();
                assert_eq!(nnz, 1, "column {j}, block {b}");
            }
        }
    }

    // ----- fwht -----

    #[test]
    fn fwht_small_known_values() {
        let mut v = vec![1.0, 0.0];
        fwht(&mut v).unwrap();
        assert_eq!(v, vec![1.0, 1.0]);
        let mut v = vec![1.0, 2.0, 3.0, 4.0];
        fwht(&mut v).unwrap();
        // H₄ rows: ++++, +-+-, ++--, +--+ (bit-parity convention).
        assert_eq!(v, vec![10.0, -2.0, -4.0, 0.0]);
    }

    #[test]
    fn fwht_matches_parity_formula() {
        let n = 32usize;
        let mut r = rng::rng_from(77);
        let x: Vec<f64> = (0..n).map(|_| rng::uniform(&mut r) - 0.5).collect();
        let mut fast = x.clone();
        fwht(&mut fast).unwrap();
        for i in 0..n {
            let direct: f64 = (0..n)
                .map(|j| {
                    let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    sign * x[j]
                })
                .sum();
            assert!((fast[i] - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn fwht_rejects_bad_lengths() {
        assert!(matches!(fwht(&mut [1.0, 2.0, 3.0]), Err(Error::InvalidLength(3))));
        assert!(matches!(fwht(&mut []), Err(Error::InvalidLength(0))));
        assert!(fwht(&mut [5.0]).is_ok());
    }

    // ----- composition and adjoints -----

    #[test]
    fn composed_apply_matches_dense_product() {
        let inner = SketchSpec::SparseEmbedding { m: 16, n: 40, s: 2, seed: 11 };
        let outer = SketchSpec::Gaussian { m: 6, n: 16, seed: 12 };
        let spec = compose(vec![outer.clone(), inner.clone()]).unwrap();
        assert_eq!(spec.rows(), 6);
        assert_eq!(spec.cols(), 40);

        let sk = build(&spec).unwrap();
        let a = random_matrix(40, 3, 13);
        let got = sk.apply(&a).unwrap();

        // Oracle: dense stage product, innermost applied first.
        let pi = build(&inner).unwrap().to_dense();
        let po = build(&outer).unwrap().to_dense();
        let want = matmul(&po, &matmul(&pi, &a));
        assert!(got.sub(&want).frobenius_norm() < 1e-10);

        // Single-stage composition behaves like the stage itself.
        let single = compose(vec![inner.clone()]).unwrap();
        let direct = build(&inner).unwrap().apply(&a).unwrap();
        let via = build(&single).unwrap().apply(&a).unwrap();
        assert_eq!(direct, via);
    }

    #[test]
    fn adjoint_matches_dense_transpose() {
        let specs = [
            SketchSpec::Gaussian { m: 6, n: 20, seed: 1 },
            SketchSpec::Srht { m: 6, n: 20, seed: 2 },
            SketchSpec::SparseEmbedding { m: 6, n: 20, s: 2, seed: 3 },
            compose(vec![
                SketchSpec::Sign { m: 5, n: 10, seed: 4 },
                SketchSpec::Srht { m: 10, n: 20, seed: 5 },
            ])
            .unwrap(),
            SketchSpec::Identity { n: 20 },
        ];
        for spec in specs {
            let sk = build(&spec).unwrap();
            let b = random_matrix(sk.rows(), 4, 50);
            let got = sk.apply_transpose(&b).unwrap();
            let want = matmul_tn(&sk.to_dense(), &b);
            assert!(
                got.sub(&want).frobenius_norm() < 1e-10,
                "{:?} adjoint mismatch",
                spec.family()
            );
        }
    }

    #[test]
    fn identity_sketch_is_exact() {
        let a = random_matrix(10, 4, 1);
        let sk = build(&SketchSpec::Identity { n: 10 }).unwrap();
        assert_eq!(sk.apply(&a).unwrap(), a);
        assert_eq!(sk.rows(), 10);
    }

    #[test]
    fn apply_rejects_shape_mismatch() {
        let sk = build(&SketchSpec::Gaussian { m: 4, n: 8, seed: 0 }).unwrap();
        let a = random_matrix(9, 2, 1);
        assert!(matches!(sk.apply(&a), Err(Error::ShapeMismatch(_))));
        assert!(matches!(sk.apply_transpose(&a), Err(Error::ShapeMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Structured paths agree with their own dense reconstruction on
        /// arbitrary small shapes.
        #[test]
        fn apply_matches_dense(seed in 0u64..2000, m in 1usize..6, extra in 0usize..12, d in 1usize..5) {
            let n = m + extra;
            let specs = vec![
                SketchSpec::Srht { m, n, seed },
                SketchSpec::SparseEmbedding { m, n, s: 1, seed },
            ];
            let a = random_matrix(n, d, seed.wrapping_add(1));
            for spec in specs {
                let sk = build(&spec).unwrap();
                let got = sk.apply(&a).unwrap();
                let want = matmul(&sk.to_dense(), &a);
                prop_assert!(got.sub(&want).frobenius_norm() < 1e-10);
            }
        }

        /// fwht twice is multiplication by the length.
        #[test]
        fn fwht_involution(seed in 0u64..2000, logn in 0u32..7) {
            let n = 1usize << logn;
            let mut r = rng::rng_from(seed);
            let x: Vec<f64> = (0..n).map(|_| rng::uniform(&mut r) - 0.5).collect();
            let mut y = x.clone();
            fwht(&mut y).unwrap();
            fwht(&mut y).unwrap();
            for i in 0..n {
                prop_assert!((y[i] - n as f64 * x[i]).abs() < 1e-9);
            }
        }
    }
}
