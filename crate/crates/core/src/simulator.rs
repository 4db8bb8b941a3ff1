//! Monte Carlo harness for the ε-test.
//!
//! Trial `t` of an experiment seeds a ChaCha8 generator with
//! `base_seed + t`; the null instance is simulated on stream 0 and the
//! alternative on stream 1. Trials run on the rayon pool and are merged in
//! trial order, so results do not depend on the number of workers.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversarial::{build_hard_pair, build_mixture_family};
use crate::bounds::{p_error_attr, p_error_lemma, p_error_weighted};
use crate::cvar_test::{classify_region, Decision, PreparedTest, Region, TestConfig};
use crate::domain::{FairnessInstance, GroupWeights, MetricKind};
use crate::error::{Error, Result};
use crate::metrics::{cvar_fairness, CvarMode};
use crate::sampling::{PlanParams, PlanSpec, StrategyRegistry};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FAIRAUDIT_THREADS";

/// Builds the global rayon pool with at most `FAIRAUDIT_THREADS` workers
/// when the variable is set. Calling it again is harmless.
pub fn init_thread_pool_from_env() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::ConfigError(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Monte Carlo estimate of the averaged error probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    /// `(false_alarm + miss) / 2`
    pub p_err_hat: f64,
    /// `sqrt(p̂ (1 − p̂) / trials)`
    pub stderr: f64,
    pub n_trials: u64,
    /// Fraction of `H1` decisions on the null instance.
    pub false_alarm: f64,
    /// Fraction of `H0` decisions on the alternative instance.
    pub miss: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub plan: PlanSpec,
}

fn trial_rng(base_seed: u64, t: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(t));
    rng.set_stream(stream);
    rng
}

/// Runs `trials` tests on each instance and averages the two error rates.
/// Both instances must lie in their claimed regions.
pub fn estimate_error(
    h0: &FairnessInstance,
    h1: &FairnessInstance,
    cfg: &TestConfig,
    trials: u64,
    base_seed: u64,
) -> Result<ErrorEstimate> {
    if trials == 0 {
        return Err(Error::ConfigError("trials must be at least 1".into()));
    }
    let r0 = classify_region(h0, cfg.alpha, cfg.epsilon)?;
    if r0 != Region::P0 {
        return Err(Error::ConfigError(format!("null instance lies in {r0:?}, expected P0")));
    }
    let r1 = classify_region(h1, cfg.alpha, cfg.epsilon)?;
    if r1 != Region::P1 {
        return Err(Error::ConfigError(format!("alternative instance lies in {r1:?}, expected P1")));
    }
    let test = PreparedTest::new(cfg.clone())?;
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let a = test.run(h0, &mut trial_rng(base_seed, t, 0))?;
            let b = test.run(h1, &mut trial_rng(base_seed, t, 1))?;
            Ok((a.decision == Decision::H1, b.decision == Decision::H0))
        })
        .collect::<Result<_>>()?;
    let false_alarms = outcomes.iter().filter(|o| o.0).count() as f64;
    let misses = outcomes.iter().filter(|o| o.1).count() as f64;
    let tf = trials as f64;
    let p = (false_alarms + misses) / (2.0 * tf);
    Ok(ErrorEstimate {
        p_err_hat: p,
        stderr: (p * (1.0 - p) / tf).sqrt(),
        n_trials: trials,
        false_alarm: false_alarms / tf,
        miss: misses / tf,
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        plan: cfg.plan.spec(),
    })
}

/// Where the null/alternative instance pair comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSource {
    /// Fixed instances; the group count comes from `weights`.
    Explicit { weights: GroupWeights, mu_h0: Vec<f64>, mu_h1: Vec<f64> },
    /// Uniform weights, all means 1/2, one group lifted to max-gap ε.
    HardPair,
    /// All means 1/2 versus a random sign-perturbed mixture member.
    MixtureMember { member_seed: u64 },
    /// Random simplex weights; the alternative lifts the group whose
    /// perturbation moves CVaR fastest, just far enough to reach ε.
    RandomSimplex { instance_seed: u64 },
}

/// `α`, either fixed or tied to the group count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSpec {
    Value(f64),
    /// `α = 1 − 1/K`: the tail budget is exactly one group of uniform mass.
    OneGroup,
}

impl AlphaSpec {
    pub fn resolve(self, k: usize) -> f64 {
        match self {
            AlphaSpec::Value(a) => a,
            AlphaSpec::OneGroup => 1.0 - 1.0 / k as f64,
        }
    }
}

/// One configuration of the test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPoint {
    pub k: usize,
    pub n: u64,
    pub epsilon: f64,
    pub alpha: AlphaSpec,
    /// Registered strategy name.
    pub plan: String,
    pub eta: Option<f64>,
    /// `None` means `γ = n/2`.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    K,
    Epsilon,
    Alpha,
    Eta,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::K => "k",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Eta => "eta",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n" => Ok(SweepAxis::N),
            "k" => Ok(SweepAxis::K),
            "epsilon" | "eps" => Ok(SweepAxis::Epsilon),
            "alpha" => Ok(SweepAxis::Alpha),
            "eta" => Ok(SweepAxis::Eta),
            other => Err(Error::ConfigError(format!("unknown sweep axis `{other}`"))),
        }
    }
}

pub const DEFAULT_TARGET: f64 = 0.1;

/// A sweep of one axis around a base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub source: InstanceSource,
    pub point: ExperimentPoint,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: u64,
    pub base_seed: u64,
    /// Error level defining `n̂` on `n` sweeps.
    pub target: f64,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::ConfigError("trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::ConfigError("sweep grid is empty".into()));
        }
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::ConfigError(format!("target must lie in (0, 1), got {}", self.target)));
        }
        if matches!(self.source, InstanceSource::Explicit { .. }) && self.axis == SweepAxis::K {
            return Err(Error::ConfigError("explicit instances cannot be swept over K".into()));
        }
        for &v in &self.values {
            if matches!(self.axis, SweepAxis::N | SweepAxis::K) && (v < 0.0 || v.fract() != 0.0) {
                return Err(Error::ConfigError(format!("{} values must be non-negative integers, got {v}", self.axis.name())));
            }
        }
        Ok(())
    }

    /// The base point with the swept coordinate set to `value`.
    pub fn point_at(&self, value: f64) -> ExperimentPoint {
        let mut p = self.point.clone();
        match self.axis {
            SweepAxis::N => p.n = value as u64,
            SweepAxis::K => p.k = value as usize,
            SweepAxis::Epsilon => p.epsilon = value,
            SweepAxis::Alpha => p.alpha = AlphaSpec::Value(value),
            SweepAxis::Eta => p.eta = Some(value),
        }
        p
    }
}

/// Null and alternative instances for a point.
pub fn instance_pair(source: &InstanceSource, point: &ExperimentPoint) -> Result<(FairnessInstance, FairnessInstance)> {
    match source {
        InstanceSource::Explicit { weights, mu_h0, mu_h1 } => Ok((
            FairnessInstance::new(weights.clone(), mu_h0.clone())?,
            FairnessInstance::new(weights.clone(), mu_h1.clone())?,
        )),
        InstanceSource::HardPair => {
            let hp = build_hard_pair(point.k, point.epsilon)?;
            Ok((hp.p0, hp.p1))
        }
        InstanceSource::MixtureMember { member_seed } => {
            let w = GroupWeights::uniform(point.k)?;
            let f = build_mixture_family(&w, point.alpha.resolve(point.k), point.epsilon)?;
            let (_, m) = f.random_member(&mut ChaCha8Rng::seed_from_u64(*member_seed))?;
            Ok((f.p0, m))
        }
        InstanceSource::RandomSimplex { instance_seed } => random_simplex_pair(point, *instance_seed),
    }
}

fn random_simplex_pair(point: &ExperimentPoint, seed: u64) -> Result<(FairnessInstance, FairnessInstance)> {
    if point.k < 2 {
        return Err(Error::ConfigError("random simplex instances need at least 2 groups".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..point.k).map(|_| Exp1.sample(&mut rng)).collect();
    let w = GroupWeights::from_masses(&raw)?;
    let alpha = point.alpha.resolve(point.k);
    let base = vec![0.5; point.k];
    // Gaps are linear in the lift, so CVaR at a probe lift gives the rate.
    const PROBE: f64 = 0.25;
    let mut best = (0, 0.0);
    for g in 0..point.k {
        let mut mu = base.clone();
        mu[g] += PROBE;
        let rate = cvar_fairness(&FairnessInstance::new(w.clone(), mu)?, alpha, CvarMode::Fractional)? / PROBE;
        if rate > best.1 {
            best = (g, rate);
        }
    }
    let lift = point.epsilon / best.1;
    if 0.5 + lift > 1.0 {
        return Err(Error::ConfigError(format!(
            "random simplex instance needs a lift of {lift} to reach epsilon = {}",
            point.epsilon
        )));
    }
    let mut mu = base.clone();
    mu[best.0] += lift;
    let h1 = FairnessInstance::new(w.clone(), mu)?;
    Ok((FairnessInstance::new(w, base)?, h1))
}

/// Test configuration for a point on the given weights.
pub fn point_config(point: &ExperimentPoint, w: &GroupWeights, registry: &StrategyRegistry) -> Result<TestConfig> {
    let params = PlanParams { budget: point.n, eta: point.eta, gamma: point.gamma };
    let plan = registry.build(&point.plan, w, &params)?;
    TestConfig::new(point.alpha.resolve(w.len()), point.epsilon, plan, MetricKind::StatisticalParity)
}

/// The analytic bound matching the plan: the weighted formula for weighted
/// plans, `256/((1−α)²ε⁴n)` for attribute-specific plans with `γ = n/2`, and
/// the inclusion-probability form otherwise.
pub fn analytic_bound(cfg: &TestConfig, w: &GroupWeights) -> Result<f64> {
    let spec = cfg.plan.spec();
    let n = cfg.plan.budget();
    match spec.strategy.as_str() {
        "weighted" => {
            let Some(v) = cfg.plan.marginal_distribution() else { return exact_bound(cfg, w) };
            Ok(p_error_weighted(w, v, n, cfg.alpha, cfg.epsilon)?.value)
        }
        "attr" if spec.gamma == Some(n as f64 / 2.0) => Ok(p_error_attr(n, cfg.alpha, cfg.epsilon).value),
        _ => exact_bound(cfg, w),
    }
}

/// `Σ 64 w²/(c P[M≥2]) + Σ 128 w²/(c P[M≥1])` with the plan's exact
/// inclusion probabilities.
pub fn exact_bound(cfg: &TestConfig, w: &GroupWeights) -> Result<f64> {
    Ok(p_error_lemma(w, &cfg.plan.inclusion_probabilities()?, cfg.alpha, cfg.epsilon)?.value)
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub k: usize,
    pub n: u64,
    pub alpha: f64,
    pub epsilon: f64,
    pub plan: String,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub trials: u64,
    pub p_err_hat: f64,
    pub stderr: f64,
    pub false_alarm: f64,
    pub miss: f64,
    pub bound: f64,
    pub bound_exact: f64,
    pub n_hat: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Smallest swept `n` with `p̂ ≤ target` (sweeps over `n` only).
    pub n_hat: Option<u64>,
}

pub fn threshold_sweep(exp: &Experiment) -> Result<SweepTable> {
    threshold_sweep_with(exp, &StrategyRegistry::with_builtins())
}

pub fn threshold_sweep_with(exp: &Experiment, registry: &StrategyRegistry) -> Result<SweepTable> {
    exp.validate()?;
    let mut rows = Vec::with_capacity(exp.values.len());
    for &value in &exp.values {
        let point = exp.point_at(value);
        let (h0, h1) = instance_pair(&exp.source, &point)?;
        let cfg = point_config(&point, h0.weights(), registry)?;
        let est = estimate_error(&h0, &h1, &cfg, exp.trials, exp.base_seed)?;
        let spec = cfg.plan.spec();
        rows.push(SweepRow {
            axis: exp.axis.name().into(),
            value,
            k: h0.num_groups(),
            n: point.n,
            alpha: cfg.alpha,
            epsilon: cfg.epsilon,
            plan: spec.strategy.clone(),
            eta: spec.eta,
            gamma: spec.gamma,
            trials: exp.trials,
            p_err_hat: est.p_err_hat,
            stderr: est.stderr,
            false_alarm: est.false_alarm,
            miss: est.miss,
            bound: analytic_bound(&cfg, h0.weights())?,
            bound_exact: exact_bound(&cfg, h0.weights())?,
            n_hat: None,
        });
    }
    let n_hat = (exp.axis == SweepAxis::N)
        .then(|| rows.iter().filter(|r| r.p_err_hat <= exp.target).map(|r| r.n).min())
        .flatten();
    for r in &mut rows {
        r.n_hat = n_hat;
    }
    Ok(SweepTable { rows, n_hat })
}

pub fn write_csv<W: Write>(table: &SweepTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &table.rows {
        w.serialize(r).map_err(|e| Error::ConfigError(format!("csv output: {e}")))?;
    }
    w.flush().map_err(|e| Error::ConfigError(format!("csv output: {e}")))?;
    Ok(())
}

/// SHA-256 of `"blob <len>\0" ‖ bytes`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Everything needed to reproduce a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub base_seed: u64,
    pub trials: u64,
    pub axis: String,
    pub grid: Vec<f64>,
    pub target: f64,
    pub n_hat: Option<u64>,
    pub config_hash: String,
    pub experiment: Experiment,
}

impl RunManifest {
    /// `config_text` is the canonical text the hash is taken over.
    pub fn new(exp: &Experiment, table: &SweepTable, config_text: &str) -> Self {
        Self {
            base_seed: exp.base_seed,
            trials: exp.trials,
            axis: exp.axis.name().into(),
            grid: exp.values.clone(),
            target: exp.target,
            n_hat: table.n_hat,
            config_hash: content_hash(config_text.as_bytes()),
            experiment: exp.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SamplingPlan;

    fn point(k: usize, n: u64, plan: &str) -> ExperimentPoint {
        ExperimentPoint { k, n, epsilon: 0.3, alpha: AlphaSpec::OneGroup, plan: plan.into(), eta: None, gamma: None }
    }

    fn cfg_for(p: &ExperimentPoint, w: &GroupWeights) -> TestConfig {
        point_config(p, w, &StrategyRegistry::with_builtins()).unwrap()
    }

    #[test]
    fn zero_null_never_alarms() {
        let w = GroupWeights::uniform(4).unwrap();
        let h0 = FairnessInstance::new(w.clone(), vec![0.0; 4]).unwrap();
        let h1 = FairnessInstance::new(w.clone(), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let c = TestConfig::new(0.75, 0.5, SamplingPlan::weighted(&w, 1.0, 50).unwrap(), MetricKind::StatisticalParity).unwrap();
        let e = estimate_error(&h0, &h1, &c, 200, 1).unwrap();
        assert_eq!(e.false_alarm, 0.0);
    }

    #[test]
    fn deterministic_instances_have_zero_error() {
        let w = GroupWeights::uniform(2).unwrap();
        let h0 = FairnessInstance::new(w.clone(), vec![1.0, 1.0]).unwrap();
        let h1 = FairnessInstance::new(w.clone(), vec![0.0, 1.0]).unwrap();
        let plan = SamplingPlan::attribute_specific(&w, 2.0, 4).unwrap();
        let c = TestConfig::new(0.5, 0.5, plan, MetricKind::StatisticalParity).unwrap();
        let e = estimate_error(&h0, &h1, &c, 300, 9).unwrap();
        assert_eq!((e.p_err_hat, e.stderr), (0.0, 0.0));
    }

    #[test]
    fn region_mismatch_is_config_error() {
        let hp = build_hard_pair(8, 0.3).unwrap();
        let c = cfg_for(&point(8, 100, "attr"), hp.p0.weights());
        assert!(matches!(estimate_error(&hp.p1, &hp.p1, &c, 10, 0), Err(Error::ConfigError(_))));
        assert!(matches!(estimate_error(&hp.p0, &hp.p0, &c, 10, 0), Err(Error::ConfigError(_))));
        assert!(matches!(estimate_error(&hp.p0, &hp.p1, &c, 0, 0), Err(Error::ConfigError(_))));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let hp = build_hard_pair(16, 0.3).unwrap();
        let c = cfg_for(&point(16, 4000, "weighted"), hp.p0.weights());
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| estimate_error(&hp.p0, &hp.p1, &c, 500, 77)).unwrap();
        let b = four.install(|| estimate_error(&hp.p0, &hp.p1, &c, 500, 77)).unwrap();
        assert_eq!(a, b);
    }

    fn n_sweep(source: InstanceSource, k: usize, plan: &str, values: Vec<f64>, trials: u64) -> Experiment {
        Experiment {
            source,
            point: point(k, 0, plan),
            axis: SweepAxis::N,
            values,
            trials,
            base_seed: 2024,
            target: DEFAULT_TARGET,
        }
    }

    #[test]
    fn sweep_is_reproducible_and_monotone() {
        let values: Vec<f64> = (6..14).map(|i| (1u64 << i) as f64).collect();
        let exp = n_sweep(InstanceSource::HardPair, 16, "weighted", values, 400);
        let a = threshold_sweep(&exp).unwrap();
        let b = threshold_sweep(&exp).unwrap();
        assert_eq!(a, b);
        for w in a.rows.windows(2) {
            let noise = 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            assert!(w[1].p_err_hat <= w[0].p_err_hat + noise + 1e-12, "{} -> {}", w[0].p_err_hat, w[1].p_err_hat);
        }
        assert!(a.n_hat.is_some());
        assert!(a.rows.iter().all(|r| r.n_hat == a.n_hat));
        let mut csv1 = Vec::new();
        let mut csv2 = Vec::new();
        write_csv(&a, &mut csv1).unwrap();
        write_csv(&b, &mut csv2).unwrap();
        assert_eq!(csv1, csv2);
        assert_eq!(String::from_utf8(csv1).unwrap().lines().count(), 9);
    }

    #[test]
    fn estimates_respect_bounds() {
        // p̂ ≤ min(1, bound) + 3 se for several sources and both plans, and
        // the null side alone respects the exact-inclusion form.
        let sources = [
            (InstanceSource::HardPair, 32usize),
            (InstanceSource::MixtureMember { member_seed: 3 }, 64),
            (InstanceSource::RandomSimplex { instance_seed: 11 }, 16),
        ];
        for (source, k) in sources {
            for plan in ["weighted", "attr"] {
                let values: Vec<f64> = [1u64 << 8, 1 << 12, 1 << 16, 1 << 20].iter().map(|&n| n as f64).collect();
                let mut exp = n_sweep(source.clone(), k, plan, values, 300);
                if matches!(source, InstanceSource::MixtureMember { .. }) {
                    exp.point.alpha = AlphaSpec::Value(0.5);
                    exp.point.epsilon = 0.1;
                }
                let t = threshold_sweep(&exp).unwrap();
                for r in &t.rows {
                    assert!(r.p_err_hat <= r.bound.min(1.0) + 3.0 * r.stderr + 1e-12, "{source:?} {plan} n={}", r.n);
                    assert!(r.p_err_hat <= r.bound_exact.min(1.0) + 3.0 * r.stderr + 1e-12);
                    let se0 = (r.false_alarm * (1.0 - r.false_alarm) / r.trials as f64).sqrt();
                    if r.bound_exact <= 1.0 {
                        assert!(r.false_alarm <= r.bound_exact + 3.0 * se0 + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn experiment_validation() {
        let mut exp = n_sweep(InstanceSource::HardPair, 8, "attr", vec![16.0], 0);
        assert!(threshold_sweep(&exp).is_err());
        exp.trials = 5;
        exp.values.clear();
        assert!(threshold_sweep(&exp).is_err());
        exp.values = vec![16.5];
        assert!(threshold_sweep(&exp).is_err());
        exp.values = vec![16.0];
        exp.point.plan = "bogus".into();
        assert!(matches!(threshold_sweep(&exp), Err(Error::UnknownStrategy(_))));
    }

    #[test]
    fn random_simplex_pair_regions() {
        for seed in 0..20 {
            let p = ExperimentPoint { k: 6, n: 10, epsilon: 0.1, alpha: AlphaSpec::Value(0.5), plan: "attr".into(), eta: None, gamma: None };
            let (h0, h1) = instance_pair(&InstanceSource::RandomSimplex { instance_seed: seed }, &p).unwrap();
            assert_eq!(classify_region(&h0, 0.5, 0.1).unwrap(), Region::P0);
            assert_eq!(classify_region(&h1, 0.5, 0.1).unwrap(), Region::P1);
        }
    }

    #[test]
    fn git_style_hash() {
        // `printf 'hello\n' | git hash-object --stdin` uses SHA-1; this is the
        // SHA-256 object format over the same header.
        let h = content_hash(b"hello\n");
        let mut s = Sha256::new();
        s.update(b"blob 6\0hello\n");
        assert_eq!(h, hex::encode(s.finalize()));
        assert_eq!(h.len(), 64);
    }
}
