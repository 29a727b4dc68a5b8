//! Subcommand implementations.
//!
//! Every command validates its whole configuration (unknown keys
//! included) before any computation starts, writes its report at the end,
//! and reports one of three outcomes: success, a failed acceptance
//! predicate (exit 1), or a usage/IO error (exit 2).

use crate::config::{Config, ConfigError};
use crate::files::{self, Csv};
use rayon::prelude::*;
use stablesketch::amm::{self, estimate_failure_rate, estimate_ose_moment};
use stablesketch::bss::bss_select;
use stablesketch::matcore::{matmul_tn, orthonormal_basis, spectral_norm, stable_rank};
use stablesketch::rng;
use stablesketch::sketch::{build, plan_rows, Family, SketchSpec};
use stablesketch::solvers::{
    gen_decay, gen_lowrank_plus_noise, krr_sketched, sketched_lowrank, sketched_regression,
    KrrProblem,
};
use stablesketch::{Error, Matrix};
use std::path::PathBuf;

/// What a finished command reports: all predicates met, or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    PredicateFailed,
}

/// Dispatch a subcommand. `threads` (any command) bounds the rayon pool;
/// without it the `RAYON_NUM_THREADS` environment variable applies.
pub fn run(command: &str, cfg: &Config) -> Result<Outcome, ConfigError> {
    if let Some(t) = cfg.parse_opt::<usize>("threads")? {
        if t < 1 {
            return Err(ConfigError("bad value for key 'threads': need >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().ok();
    }
    match command {
        "gen" => cmd_gen(cfg),
        "amm" => cmd_amm(cfg),
        "ose-moment" => cmd_ose_moment(cfg),
        "bss" => cmd_bss(cfg),
        "regress" => cmd_regress(cfg),
        "lowrank" => cmd_lowrank(cfg),
        "krr" => cmd_krr(cfg),
        "verify-conditions" => cmd_verify_conditions(cfg),
        "calibrate" => cmd_calibrate(cfg),
        other => Err(ConfigError(format!("unknown command '{other}'"))),
    }
}

fn core_err(e: Error) -> ConfigError {
    ConfigError(e.to_string())
}

fn fmt(x: f64) -> String {
    files::format_value(x)
}

fn flag(b: bool) -> String {
    if b { "1".into() } else { "0".into() }
}

fn out_path(cfg: &Config) -> Result<Option<PathBuf>, ConfigError> {
    Ok(cfg.raw("out").map(PathBuf::from))
}

// ======================================================================
// sketch construction from config
// ======================================================================

fn parse_family(name: &str) -> Result<Family, ConfigError> {
    match name {
        "gaussian" => Ok(Family::Gaussian),
        "sign" => Ok(Family::Sign),
        "srht" => Ok(Family::Srht),
        "sparse" => Ok(Family::SparseEmbedding),
        other => Err(ConfigError(format!(
            "bad value for key 'family': '{other}' (want gaussian|sign|srht|sparse|identity)"
        ))),
    }
}

/// Build the sketch spec of a command: `family` plus either an explicit
/// `m` (and `s` for sparse) or the planner inputs `k, eps, delta, c`.
/// `family=identity` is the exactness hook and takes neither.
fn sketch_spec(cfg: &Config, n: usize) -> Result<SketchSpec, ConfigError> {
    let family = cfg.require("family")?.to_string();
    // Touch every sizing key up front so mixed configurations are fully
    // validated rather than reported as unknown keys.
    let m_explicit = cfg.parse_opt::<usize>("m")?;
    let s_explicit = cfg.parse_opt::<usize>("s")?;
    let c = cfg.parse_or::<f64>("c", 1.0)?;
    if family == "identity" {
        return Ok(SketchSpec::Identity { n });
    }
    let fam = parse_family(&family)?;
    let (m, s) = match m_explicit {
        Some(m) => (m, s_explicit.unwrap_or(1)),
        None => {
            let k = cfg.parse::<usize>("k")?;
            let eps = cfg.parse::<f64>("eps")?;
            let delta = cfg.parse::<f64>("delta")?;
            plan_rows(fam, k, eps, delta, c).map_err(core_err)?
        }
    };
    let spec = match fam {
        Family::Gaussian => SketchSpec::Gaussian { m, n, seed: 0 },
        Family::Sign => SketchSpec::Sign { m, n, seed: 0 },
        Family::Srht => SketchSpec::Srht { m, n, seed: 0 },
        Family::SparseEmbedding => SketchSpec::SparseEmbedding { m, n, s, seed: 0 },
        Family::Composed | Family::Identity => unreachable!("not planner families"),
    };
    spec.validate().map_err(core_err)?;
    Ok(spec)
}

// ======================================================================
// gen
// ======================================================================

/// Spectrum descriptors: `ones`, `geom:Q` (σᵢ = Qⁱ), `poly:P`
/// (σᵢ = (i+1)⁻ᴾ), or `lowrank:R:NOISE` (rank-R signal plus noise).
fn cmd_gen(cfg: &Config) -> Result<Outcome, ConfigError> {
    let n = cfg.parse::<usize>("n")?;
    let d = cfg.parse::<usize>("d")?;
    let seed = cfg.parse_or::<u64>("seed", 0)?;
    let descriptor = cfg.parse_or::<String>("spectrum", "ones".into())?;
    let rank = cfg.parse_or::<usize>("rank", n.min(d))?;
    let out = PathBuf::from(cfg.require("out")?);
    cfg.reject_unknown()?;

    let bad = |detail: &str| {
        ConfigError(format!("bad value for key 'spectrum': '{descriptor}' ({detail})"))
    };
    let matrix = if let Some(rest) = descriptor.strip_prefix("lowrank:") {
        let (r, noise) = rest.split_once(':').ok_or_else(|| bad("want lowrank:R:NOISE"))?;
        let r: usize = r.parse().map_err(|_| bad("bad rank"))?;
        let noise: f64 = noise.parse().map_err(|_| bad("bad noise scale"))?;
        gen_lowrank_plus_noise(n, d, r, noise, seed).map_err(core_err)?
    } else {
        let spectrum: Vec<f64> = if descriptor == "ones" {
            vec![1.0; rank]
        } else if let Some(q) = descriptor.strip_prefix("geom:") {
            let q: f64 = q.parse().map_err(|_| bad("bad ratio"))?;
            if !(q > 0.0 && q <= 1.0) {
                return Err(bad("ratio must be in (0, 1]"));
            }
            (0..rank).map(|i| q.powi(i as i32)).collect()
        } else if let Some(p) = descriptor.strip_prefix("poly:") {
            let p: f64 = p.parse().map_err(|_| bad("bad power"))?;
            if !(p >= 0.0 && p.is_finite()) {
                return Err(bad("power must be >= 0"));
            }
            (0..rank).map(|i| ((i + 1) as f64).powf(-p)).collect()
        } else {
            return Err(bad("want ones, geom:Q, poly:P, or lowrank:R:NOISE"));
        };
        gen_decay(n, d, &spectrum, seed).map_err(core_err)?
    };
    files::write_matrix(&out, &matrix)?;
    Ok(Outcome::Pass)
}

// ======================================================================
// amm
// ======================================================================

/// Failure-rate experiment: fresh sketch per trial, per-trial error vs
/// the (k, ε) bound, summary failure fraction against `max_fail`
/// (default 2·delta when the planner is in use, else no predicate).
fn cmd_amm(cfg: &Config) -> Result<Outcome, ConfigError> {
    let a_path = PathBuf::from(cfg.require("a")?);
    let b_path = PathBuf::from(cfg.require("b")?);
    let k = cfg.parse::<usize>("k")?;
    let eps = cfg.parse::<f64>("eps")?;
    let delta = cfg.parse_opt::<f64>("delta")?;
    let trials = cfg.parse_or::<usize>("trials", 100)?;
    let seed = cfg.parse_or::<u64>("seed", 0)?;
    let max_fail = cfg.parse_opt::<f64>("max_fail")?.or(delta.map(|d| 2.0 * d)).unwrap_or(1.0);
    let out = out_path(cfg)?;
    let a = files::read_matrix(&a_path)?;
    let b = files::read_matrix(&b_path)?;
    let spec = sketch_spec(cfg, a.rows())?;
    cfg.reject_unknown()?;
    if trials < 1 {
        return Err(ConfigError("bad value for key 'trials': need >= 1".into()));
    }

    let bound = amm::amm_bound(&a, &b, k, eps).map_err(core_err)?;
    let rows: Vec<(f64, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<(f64, bool), Error> {
            let sk = build(&spec.with_seed(rng::derive_seed(seed, t)))?;
            let err = amm::amm_error(&a, &b, &sk)?;
            Ok((err, err <= bound))
        })
        .collect::<Result<_, _>>()
        .map_err(core_err)?;

    let mut csv = Csv::new(&["trial", "error", "bound", "pass"]);
    for (t, (err, pass)) in rows.iter().enumerate() {
        csv.row(&[t.to_string(), fmt(*err), fmt(bound), flag(*pass)]);
    }
    let mean = rows.iter().map(|(e, _)| e).sum::<f64>() / trials as f64;
    let fail = rows.iter().filter(|(_, p)| !p).count() as f64 / trials as f64;
    let ok = fail <= max_fail;
    csv.row(&["summary".into(), fmt(mean), fmt(fail), flag(ok)]);
    csv.finish(out.as_deref())?;
    Ok(if ok { Outcome::Pass } else { Outcome::PredicateFailed })
}

// ======================================================================
// ose-moment
// ======================================================================

/// Estimate E‖(ΠU)ᵀΠU − I‖^ℓ for a random d-dimensional subspace of Rⁿ.
/// With planner inputs present the moment hypothesis ε^ℓ·δ becomes the
/// predicate threshold; `max` overrides it.
fn cmd_ose_moment(cfg: &Config) -> Result<Outcome, ConfigError> {
    let n = cfg.parse::<usize>("n")?;
    let d = cfg.parse::<usize>("d")?;
    let ell = cfg.parse_or::<usize>("ell", 2)?;
    let trials = cfg.parse_or::<usize>("trials", 100)?;
    let seed = cfg.parse_or::<u64>("seed", 0)?;
    let eps = cfg.parse_opt::<f64>("eps")?;
    let delta = cfg.parse_opt::<f64>("delta")?;
    let max = cfg.parse_opt::<f64>("max")?;
    let out = out_path(cfg)?;
    let spec = sketch_spec(cfg, n)?;
    cfg.reject_unknown()?;

    let mut r = rng::rng_from(rng::derive_seed(seed, u64::MAX));
    let mut buf = vec![0.0; n * d];
    rng::fill_normal(&mut r, &mut buf);
    let g = Matrix::from_vec(n, d, buf).map_err(core_err)?;
    let u = orthonormal_basis(&g).map_err(core_err)?;

    let est = estimate_ose_moment(&spec, &u, ell, trials, seed).map_err(core_err)?;
    let threshold = max.or(match (eps, delta) {
        (Some(e), Some(dl)) => Some(e.powi(ell as i32) * dl),
        _ => None,
    });
    let ok = threshold.map_or(true, |t| est.value < t);

    let mut csv = Csv::new(&["statistic", "value"]);
    csv.row(&["moment".into(), fmt(est.value)]);
    csv.row(&["std_err".into(), fmt(est.std_err)]);
    csv.row(&["trials".into(), est.trials.to_string()]);
    csv.row(&["threshold".into(), fmt(threshold.unwrap_or(f64::NAN))]);
    csv.row(&["summary".into(), flag(ok)]);
    csv.finish(out.as_deref())?;
    Ok(if ok { Outcome::Pass } else { Outcome::PredicateFailed })
}

// ======================================================================
// bss
// ======================================================================

/// Deterministic row selection; writes the selection file and prints one
/// verification line. The guarantee is a theorem, so a violation is a
/// failed predicate worth a nonzero exit.
fn cmd_bss(cfg: &Config) -> Result<Outcome, ConfigError> {
    let a_path = PathBuf::from(cfg.require("a")?);
    let k = cfg.parse::<f64>("k")?;
    let eps = cfg.parse::<f64>("eps")?;
    let out = PathBuf::from(cfg.require("out")?);
    cfg.reject_unknown()?;
    let a = files::read_matrix(&a_path)?;

    let sel = bss_select(&a, k, eps).map_err(core_err)?;
    files::write_selection(&out, &sel)?;

    let sa = sel.apply(&a);
    let gram_gap = matmul_tn(&sa, &sa).sub(&matmul_tn(&a, &a));
    let error = spectral_norm(&gram_gap).map_err(core_err)?;
    let cap = (9.0 * k / (eps * eps)).ceil() as usize;
    let ok = error <= eps && sel.nnz <= cap;
    println!(
        "nnz={} cap={} error={} eps={} pass={}",
        sel.nnz,
        cap,
        fmt(error),
        fmt(eps),
        if ok { "true" } else { "false" }
    );
    Ok(if ok { Outcome::Pass } else { Outcome::PredicateFailed })
}

// ======================================================================
// regress / lowrank
// ======================================================================

/// Shared driver for the two sketch-and-solve reports: per-seed rows of
/// (err_sq, bound, pass) and a pass-fraction predicate (`min_pass`,
/// default 0.9).
fn solver_rows<F>(
    cfg: &Config,
    trials: usize,
    seed: u64,
    spec: &SketchSpec,
    per_seed: F,
) -> Result<(Csv, Outcome), ConfigError>
where
    F: Fn(&SketchSpec) -> Result<(f64, f64, bool), Error> + Sync,
{
    let min_pass = cfg.parse_or::<f64>("min_pass", 0.9)?;
    if trials < 1 {
        return Err(ConfigError("bad value for key 'trials': need >= 1".into()));
    }
    let rows: Vec<(f64, f64, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| per_seed(&spec.with_seed(rng::derive_seed(seed, t))))
        .collect::<Result<_, _>>()
        .map_err(core_err)?;

    let mut csv = Csv::new(&["trial", "err_sq", "bound", "pass"]);
    for (t, (err_sq, bound, pass)) in rows.iter().enumerate() {
        csv.row(&[t.to_string(), fmt(*err_sq), fmt(*bound), flag(*pass)]);
    }
    let finite: Vec<f64> = rows.iter().map(|r| r.0).filter(|x| x.is_finite()).collect();
    let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    let frac = rows.iter().filter(|r| r.2).count() as f64 / trials as f64;
    let ok = frac >= min_pass;
    csv.row(&["summary".into(), fmt(mean), fmt(frac), flag(ok)]);
    Ok((csv, if ok { Outcome::Pass } else { Outcome::PredicateFailed }))
}

/// Sketched least squares over fresh sketch seeds. A trial whose sketch
/// collapses the design's rank records a failed row rather than aborting
/// the experiment.
fn cmd_regress(cfg: &Config) -> Result<Outcome, ConfigError> {
    let a_path = PathBuf::from(cfg.require("a")?);
    let b_path = PathBuf::from(cfg.require("b")?);
    let k = cfg.parse::<usize>("k")?;
    let eps = cfg.parse::<f64>("eps")?;
    let trials = cfg.parse_or::<usize>("trials", 20)?;
    let seed = cfg.parse_or::<u64>("seed", 0)?;
    let out = out_path(cfg)?;
    let a = files::read_matrix(&a_path)?;
    let b = files::read_matrix(&b_path)?;
    let spec = sketch_spec(cfg, a.rows())?;
    let (csv, outcome) = solver_rows(cfg, trials, seed, &spec, |sp| {
        let sk = build(sp)?;
        match sketched_regression(&a, &b, &sk, k, eps) {
            Ok(rep) => Ok((rep.err_sq, rep.bound, rep.pass)),
            Err(Error::RankCollapse { .. }) => Ok((f64::NAN, f64::NAN, false)),
            Err(e) => Err(e),
        }
    })?;
    cfg.reject_unknown()?;
    csv.finish(out.as_deref())?;
    Ok(outcome)
}

/// Sketched low-rank approximation over fresh sketch seeds.
fn cmd_lowrank(cfg: &Config) -> Result<Outcome, ConfigError> {
    let a_path = PathBuf::from(cfg.require("a")?);
    let k = cfg.parse::<usize>("k")?;
    let eps = cfg.parse::<f64>("eps")?;
    let trials = cfg.parse_or::<usize>("trials", 20)?;
    let seed = cfg.parse_or::<u64>("seed", 0)?;
    let out = out_path(cfg)?;
    let a = files::read_matrix(&a_path)?;
    let spec = sketch_spec(cfg, a.rows())?;
    let (csv, outcome) = solver_rows(cfg, trials, seed, &spec, |sp| {
        let sk = build(sp)?;
        let rep = sketched_lowrank(&a, k, &sk, eps)?;
        Ok((rep.err_sq, rep.bound, rep.pass))
    })?;
    cfg.reject_unknown()?;
    csv.finish(out.as_deref())?;
    Ok(outcome)
}

// ======================================================================
// krr
// ======================================================================

/// Sketched kernel ridge regression: per-seed prediction gap against the
/// exact solve. The kernel comes from `kernel=` directly or from
/// `points=` plus `bandwidth=`; the predicate is `max_gap` when given.
fn cmd_krr(cfg: &Config) -> Result<Outcome, ConfigError> {
    let kernel_path = cfg.raw("kernel").map(PathBuf::from);
    let points_path = cfg.raw("points").map(PathBuf::from);
    let bandwidth = cfg.parse_opt::<f64>("bandwidth")?;
    let y_path = PathBuf::from(cfg.require("y")?);
    let lambda = cfg.parse::<f64>("lambda")?;
    let trials = cfg.parse_or::<usize>("trials", 20)?;
    let seed = cfg.parse_or::<u64>("seed", 0)?;
    let max_gap = cfg.parse_opt::<f64>("max_gap")?;
    let min_pass = cfg.parse_or::<f64>("min_pass", 0.9)?;
    let out = out_path(cfg)?;

    let kernel = match (kernel_path, points_path) {
        (Some(kp), None) => files::read_matrix(&kp)?,
        (None, Some(pp)) => {
            let bw = bandwidth
                .ok_or_else(|| ConfigError("missing required key 'bandwidth'".into()))?;
            let pts = files::read_matrix(&pp)?;
            stablesketch::solvers::gaussian_kernel(&pts, bw).map_err(core_err)?
        }
        _ => {
            return Err(ConfigError(
                "need exactly one of key 'kernel' or key 'points' (with 'bandwidth')".into(),
            ))
        }
    };
    let y_mat = files::read_matrix(&y_path)?;
    if y_mat.cols() != 1 {
        return Err(ConfigError(format!(
            "bad value for key 'y': want an n x 1 matrix, got {}x{}",
            y_mat.rows(),
            y_mat.cols()
        )));
    }
    let y = y_mat.as_slice().to_vec();
    let spec = sketch_spec(cfg, kernel.rows())?;
    cfg.reject_unknown()?;
    if trials < 1 {
        return Err(ConfigError("bad value for key 'trials': need >= 1".into()));
    }
    let problem = KrrProblem::new(kernel, y, lambda).map_err(core_err)?;

    let gaps: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<f64, Error> {
            let sk = build(&spec.with_seed(rng::derive_seed(seed, t)))?;
            let (_, gap) = krr_sketched(&problem, &sk)?;
            Ok(gap)
        })
        .collect::<Result<_, _>>()
        .map_err(core_err)?;

    let mut csv = Csv::new(&["trial", "gap", "max_gap", "pass"]);
    let limit = max_gap.unwrap_or(f64::NAN);
    let mut passes = 0;
    for (t, gap) in gaps.iter().enumerate() {
        let pass = max_gap.map_or(true, |m| *gap <= m);
        passes += pass as usize;
        csv.row(&[t.to_string(), fmt(*gap), fmt(limit), flag(pass)]);
    }
    let mean = gaps.iter().sum::<f64>() / trials as f64;
    let frac = passes as f64 / trials as f64;
    let ok = frac >= min_pass;
    csv.row(&["summary".into(), fmt(mean), fmt(frac), flag(ok)]);
    csv.finish(out.as_deref())?;
    Ok(if ok { Outcome::Pass } else { Outcome::PredicateFailed })
}

// ======================================================================
// verify-conditions
// ======================================================================

/// Evaluate the deterministic sufficient conditions for one realized
/// sketch; exit 1 unless every check passes.
fn cmd_verify_conditions(cfg: &Config) -> Result<Outcome, ConfigError> {
    let a_path = PathBuf::from(cfg.require("a")?);
    let b_path = PathBuf::from(cfg.require("b")?);
    let k = cfg.parse::<usize>("k")?;
    let eps = cfg.parse::<f64>("eps")?;
    let seed = cfg.parse_or::<u64>("seed", 0)?;
    let big_c = cfg.parse_or::<f64>("big_c", 12.0)?;
    let big_cprime = cfg.parse_or::<f64>("big_cprime", 12.0)?;
    let out = out_path(cfg)?;
    let a = files::read_matrix(&a_path)?;
    let b = files::read_matrix(&b_path)?;
    let spec = sketch_spec(cfg, a.rows())?.with_seed(seed);
    cfg.reject_unknown()?;

    let sk = build(&spec).map_err(core_err)?;
    let rep =
        amm::verify_deterministic_conditions(&sk, &a, &b, k, eps, big_c, big_cprime)
            .map_err(core_err)?;

    let mut csv = Csv::new(&["kind", "level", "dimension", "value", "threshold", "pass"]);
    for c in &rep.subspace_checks {
        csv.row(&[
            "subspace".into(),
            c.level.to_string(),
            c.dimension.to_string(),
            fmt(c.distortion),
            fmt(c.threshold),
            flag(c.pass),
        ]);
    }
    for t in &rep.tail_checks {
        csv.row(&[
            format!("tail_{}", t.matrix),
            "0".into(),
            "0".into(),
            fmt(t.norm),
            fmt(t.threshold),
            flag(t.pass),
        ]);
    }
    csv.row(&[
        "sum".into(),
        "0".into(),
        "0".into(),
        fmt(rep.sum_bound),
        fmt(rep.sum_bound_limit),
        flag(rep.sum_bound_pass),
    ]);
    let checks = rep.subspace_checks.len() + rep.tail_checks.len() + 1;
    let passed = rep.subspace_checks.iter().filter(|c| c.pass).count()
        + rep.tail_checks.iter().filter(|c| c.pass).count()
        + rep.sum_bound_pass as usize;
    csv.row(&[
        "summary".into(),
        "0".into(),
        checks.to_string(),
        fmt(passed as f64 / checks as f64),
        fmt(1.0),
        flag(rep.all_pass),
    ]);
    csv.finish(out.as_deref())?;
    Ok(if rep.all_pass { Outcome::Pass } else { Outcome::PredicateFailed })
}

// ======================================================================
// calibrate
// ======================================================================

/// Smallest planner constant c whose failure rate meets `delta` on the
/// given workload: double c from 0.25 until a batch passes, then six
/// bisection steps, keeping the passing end. A batch passes only when
/// its estimated rate plus one standard error is at or below `delta`,
/// so the returned constant carries margin instead of sitting on the
/// acceptance boundary.
pub fn calibrate_planner(
    family: Family,
    a: &Matrix,
    b: &Matrix,
    k: usize,
    eps: f64,
    delta: f64,
    batch: usize,
    seed: u64,
) -> Result<Option<f64>, Error> {
    let mut batch_index = 0u64;
    let mut rate_at = |c: f64| -> Result<f64, Error> {
        let (m, s) = plan_rows(family, k, eps, delta, c)?;
        let spec = match family {
            Family::Gaussian => SketchSpec::Gaussian { m, n: a.rows(), seed: 0 },
            Family::Sign => SketchSpec::Sign { m, n: a.rows(), seed: 0 },
            Family::Srht => SketchSpec::Srht { m, n: a.rows(), seed: 0 },
            Family::SparseEmbedding => SketchSpec::SparseEmbedding { m, n: a.rows(), s, seed: 0 },
            Family::Composed | Family::Identity => {
                return Err(Error::InvalidParams("no planner for this family".into()))
            }
        };
        let est =
            estimate_failure_rate(&spec, a, b, k, eps, batch, rng::derive_seed(seed, batch_index))?;
        batch_index += 1;
        Ok(est.value + est.std_err)
    };

    let mut hi = 0.25;
    let mut lo = 0.0;
    loop {
        if rate_at(hi)? <= delta {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 16.0 {
            return Ok(None);
        }
    }
    for _ in 0..6 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

fn cmd_calibrate(cfg: &Config) -> Result<Outcome, ConfigError> {
    let a_path = PathBuf::from(cfg.require("a")?);
    let b_path = PathBuf::from(cfg.require("b")?);
    let family = parse_family(cfg.require("family")?)?;
    let k = cfg.parse::<usize>("k")?;
    let eps = cfg.parse::<f64>("eps")?;
    let delta = cfg.parse::<f64>("delta")?;
    let batch = cfg.parse_or::<usize>("trials", 200)?;
    let seed = cfg.parse_or::<u64>("seed", 0)?;
    cfg.reject_unknown()?;
    let a = files::read_matrix(&a_path)?;
    let b = files::read_matrix(&b_path)?;
    if batch < 1 {
        return Err(ConfigError("bad value for key 'trials': need >= 1".into()));
    }

    match calibrate_planner(family, &a, &b, k, eps, delta, batch, seed).map_err(core_err)? {
        Some(c) => {
            println!("c={c}");
            Ok(Outcome::Pass)
        }
        None => {
            println!("calibration did not converge");
            Ok(Outcome::PredicateFailed)
        }
    }
}

// ======================================================================
// shared instance helpers (also used by the acceptance suite)
// ======================================================================

/// The decay pair at the heart of the failure-rate experiments:
/// σᵢ = 2^{−i/2}, full-rank but stable rank ≈ 2.
pub fn decay_pair(n: usize, d: usize, seed: u64) -> (Matrix, Matrix) {
    let spectrum: Vec<f64> = (0..d).map(|i| 2f64.powf(-(i as f64) / 2.0)).collect();
    let a = gen_decay(n, d, &spectrum, rng::derive_seed(seed, 1)).expect("valid spectrum");
    let b = gen_decay(n, d, &spectrum, rng::derive_seed(seed, 2)).expect("valid spectrum");
    (a, b)
}

/// Measured stable rank, for assertions on generated instances.
pub fn measured_stable_rank(a: &Matrix) -> f64 {
    stable_rank(a).expect("nonzero instance")
}
