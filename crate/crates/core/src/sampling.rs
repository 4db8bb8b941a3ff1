//! Data collection under a budget `n`.
//!
//! Two strategies are provided behind the [`SamplingStrategy`] trait:
//! weighted i.i.d. sampling from a power-tilted marginal `v ∝ w^η`, and
//! attribute-specific sampling that draws a fixed block of `n/γ` samples from
//! group `g` with probability `min(γ w_g, 1)`. Strategies are registered by
//! name in a [`StrategyRegistry`] so the CLI and the simulator can pick one at
//! runtime.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use rand::distr::{Bernoulli, Distribution};
use rand::RngCore;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use crate::domain::GroupWeights;
use crate::error::{Error, Result};

/// `P[M_g ≥ 1]` and `P[M_g ≥ 2]` for one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub at_least_one: f64,
    pub at_least_two: f64,
}

/// Number of samples collected from each group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupCounts(pub Vec<u64>);

impl GroupCounts {
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

/// Serializable description of a plan, used in reports and manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSpec {
    pub strategy: String,
    pub budget: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

/// A data-collection strategy with a fixed budget and group weights.
pub trait SamplingStrategy: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    /// The data budget `n`.
    fn budget(&self) -> u64;

    fn num_groups(&self) -> usize;

    fn draw_counts(&self, rng: &mut dyn RngCore) -> GroupCounts;

    fn inclusion_probabilities(&self) -> Result<Vec<Inclusion>>;

    /// `E[M_g]` per group.
    fn expected_counts(&self) -> Vec<f64>;

    /// Rejects count vectors that have probability zero under the plan.
    fn check_counts(&self, counts: &GroupCounts) -> Result<()>;

    /// Every count vector with positive probability, with its probability.
    fn count_distribution(&self) -> Vec<(Vec<u64>, f64)>;

    fn spec(&self) -> PlanSpec;

    /// Per-draw group distribution, for plans that draw i.i.d. groups.
    fn marginal_distribution(&self) -> Option<&GroupWeights> {
        None
    }
}

/// Normalized power tilt `v_g = w_g^η / Σ w^η`; zero-weight groups keep zero
/// mass for every `η`, so `η = 0` is uniform over the support of `w`.
pub fn weighted_marginal(w: &GroupWeights, eta: f64) -> Result<GroupWeights> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidPlan(format!("eta must be a finite number >= 0, got {eta}")));
    }
    let tilted: Vec<f64> = w.iter().map(|x| if x > 0.0 { x.powf(eta) } else { 0.0 }).collect();
    GroupWeights::from_masses(&tilted)
}

/// `P[Bin(n, v) ≥ 1]` and `P[Bin(n, v) ≥ 2]`.
pub fn binomial_inclusion(n: u64, v: f64) -> Inclusion {
    if n == 0 || v <= 0.0 {
        return Inclusion { at_least_one: 0.0, at_least_two: 0.0 };
    }
    if v >= 1.0 {
        return Inclusion { at_least_one: 1.0, at_least_two: if n >= 2 { 1.0 } else { 0.0 } };
    }
    let nf = n as f64;
    let log_q = (-v).ln_1p();
    let at_least_one = -(nf * log_q).exp_m1();
    if n == 1 {
        return Inclusion { at_least_one, at_least_two: 0.0 };
    }
    let at_least_two = if nf * v <= 4.0 {
        binomial_upper_tail_from_two(n, v)
    } else {
        let q0 = (nf * log_q).exp();
        let q1 = nf * v * ((nf - 1.0) * log_q).exp();
        (1.0 - q0 - q1).max(0.0)
    };
    Inclusion { at_least_one, at_least_two: at_least_two.min(at_least_one) }
}

/// `Σ_{k≥2} P[Bin(n, v) = k]` summed term by term; accurate when `n v` is small.
fn binomial_upper_tail_from_two(n: u64, v: f64) -> f64 {
    let nf = n as f64;
    let log_q = (-v).ln_1p();
    let ratio = v / (1.0 - v);
    let mut term = (nf * (nf - 1.0) / 2.0).ln() + 2.0 * v.ln() + (nf - 2.0) * log_q;
    term = term.exp();
    let mut sum = 0.0;
    let mut k = 2u64;
    loop {
        sum += term;
        if k == n || term <= sum * 1e-18 {
            break;
        }
        term *= (n - k) as f64 / (k + 1) as f64 * ratio;
        k += 1;
    }
    sum.min(1.0)
}

/// Per-group outcome of the small-rate binomial tail check: when `n v_g ≤ 1`
/// and `n ≥ 2`, `P[M_g≥1] ≥ n v_g/e` and `P[M_g≥2] ≥ n² v_g²/(4e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailLemmaCheck {
    pub group: usize,
    /// False when the hypotheses fail; the two flags are then vacuously true.
    pub applicable: bool,
    pub first_order: bool,
    pub second_order: bool,
}

impl TailLemmaCheck {
    pub fn holds(&self) -> bool {
        self.first_order && self.second_order
    }
}

/// Weighted i.i.d. sampling: `n` group labels drawn from `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSampling {
    v: GroupWeights,
    eta: f64,
    n: u64,
}

impl WeightedSampling {
    pub fn new(w: &GroupWeights, eta: f64, n: u64) -> Result<Self> {
        Ok(Self { v: weighted_marginal(w, eta)?, eta, n })
    }

    /// Weighted sampling from an explicitly given marginal.
    pub fn with_marginal(v: GroupWeights, n: u64) -> Self {
        Self { v, eta: f64::NAN, n }
    }

    pub fn marginal(&self) -> &GroupWeights {
        &self.v
    }

    pub fn tail_lemma_report(&self) -> Vec<TailLemmaCheck> {
        let nf = self.n as f64;
        self.v
            .iter()
            .enumerate()
            .map(|(group, v)| {
                if self.n < 2 || nf * v > 1.0 {
                    return TailLemmaCheck { group, applicable: false, first_order: true, second_order: true };
                }
                let inc = binomial_inclusion(self.n, v);
                let e = std::f64::consts::E;
                TailLemmaCheck {
                    group,
                    applicable: true,
                    first_order: inc.at_least_one >= nf * v / e,
                    second_order: inc.at_least_two >= nf * nf * v * v / (4.0 * e),
                }
            })
            .collect()
    }
}

impl SamplingStrategy for WeightedSampling {
    fn name(&self) -> &'static str {
        "weighted"
    }

    fn budget(&self) -> u64 {
        self.n
    }

    fn num_groups(&self) -> usize {
        self.v.len()
    }

    /// Multinomial counts drawn as a chain of conditional binomials; the last
    /// supported group receives whatever remains.
    fn draw_counts(&self, rng: &mut dyn RngCore) -> GroupCounts {
        let v = self.v.as_slice();
        let mut m = vec![0u64; v.len()];
        let Some(last) = v.iter().rposition(|&x| x > 0.0) else {
            return GroupCounts(m);
        };
        let mut left = self.n;
        let mut mass = 1.0;
        for g in 0..last {
            if left == 0 {
                break;
            }
            if v[g] <= 0.0 {
                continue;
            }
            let p = (v[g] / mass).clamp(0.0, 1.0);
            let k = Binomial::new(left, p).expect("probability clamped to [0, 1]").sample(rng);
            m[g] = k;
            left -= k;
            mass -= v[g];
        }
        m[last] += left;
        GroupCounts(m)
    }

    fn inclusion_probabilities(&self) -> Result<Vec<Inclusion>> {
        Ok(self.v.iter().map(|v| binomial_inclusion(self.n, v)).collect())
    }

    fn expected_counts(&self) -> Vec<f64> {
        self.v.iter().map(|v| v * self.n as f64).collect()
    }

    fn check_counts(&self, counts: &GroupCounts) -> Result<()> {
        check_len(counts, self.v.len())?;
        if counts.total() != self.n {
            return Err(Error::PlanMismatch(format!(
                "weighted plan with budget {} but {} samples observed",
                self.n,
                counts.total()
            )));
        }
        if let Some(g) = (0..counts.0.len()).find(|&g| counts.0[g] > 0 && self.v.get(g) <= 0.0) {
            return Err(Error::PlanMismatch(format!("group {g} has samples but zero sampling mass")));
        }
        Ok(())
    }

    fn count_distribution(&self) -> Vec<(Vec<u64>, f64)> {
        let v = self.v.as_slice();
        let mut out = Vec::new();
        let mut cur = vec![0u64; v.len()];
        compositions(v, 0, self.n, 0.0, &mut cur, &mut out, ln_factorial(self.n));
        out
    }

    fn marginal_distribution(&self) -> Option<&GroupWeights> {
        Some(&self.v)
    }

    fn spec(&self) -> PlanSpec {
        PlanSpec {
            strategy: self.name().into(),
            budget: self.n,
            eta: self.eta.is_finite().then_some(self.eta),
            gamma: None,
        }
    }
}

fn ln_factorial(n: u64) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn compositions(
    v: &[f64],
    g: usize,
    left: u64,
    log_p: f64,
    cur: &mut Vec<u64>,
    out: &mut Vec<(Vec<u64>, f64)>,
    log_nfact: f64,
) {
    if g + 1 == v.len() {
        if left > 0 && v[g] <= 0.0 {
            return;
        }
        cur[g] = left;
        let lp = log_p + term_log(v[g], left);
        out.push((cur.clone(), (log_nfact + lp).exp()));
        return;
    }
    let top = if v[g] > 0.0 { left } else { 0 };
    for k in 0..=top {
        cur[g] = k;
        compositions(v, g + 1, left - k, log_p + term_log(v[g], k), cur, out, log_nfact);
    }
}

/// `k ln v − ln k!`, with `0 ln 0 = 0`.
fn term_log(v: f64, k: u64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * v.ln() - ln_factorial(k)
    }
}

/// Attribute-specific sampling: group `g` contributes a block of `n/γ`
/// samples with probability `min(γ w_g, 1)` and nothing otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSpecificSampling {
    w: GroupWeights,
    gamma: f64,
    n: u64,
    block: u64,
}

const BLOCK_TOL: f64 = 1e-9;

impl AttributeSpecificSampling {
    pub fn new(w: &GroupWeights, gamma: f64, n: u64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidPlan(format!("gamma must be positive, got {gamma}")));
        }
        let ratio = n as f64 / gamma;
        let block = ratio.round();
        if block < 1.0 || (ratio - block).abs() > BLOCK_TOL * ratio.max(1.0) {
            return Err(Error::InvalidPlan(format!(
                "n/gamma = {ratio} must be a positive integer (n = {n}, gamma = {gamma})"
            )));
        }
        Ok(Self { w: w.clone(), gamma, n, block: block as u64 })
    }

    /// The default `γ = n/2`, i.e. blocks of two samples.
    pub fn with_default_gamma(w: &GroupWeights, n: u64) -> Result<Self> {
        Self::new(w, n as f64 / 2.0, n)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Samples per selected group, `n/γ`.
    pub fn block(&self) -> u64 {
        self.block
    }

    pub fn selection_probability(&self, g: usize) -> f64 {
        (self.gamma * self.w.get(g)).min(1.0)
    }
}

impl SamplingStrategy for AttributeSpecificSampling {
    fn name(&self) -> &'static str {
        "attr"
    }

    fn budget(&self) -> u64 {
        self.n
    }

    fn num_groups(&self) -> usize {
        self.w.len()
    }

    fn draw_counts(&self, rng: &mut dyn RngCore) -> GroupCounts {
        GroupCounts(
            (0..self.w.len())
                .map(|g| {
                    let p = self.selection_probability(g);
                    let hit = Bernoulli::new(p).expect("probability in [0, 1]").sample(rng);
                    if hit {
                        self.block
                    } else {
                        0
                    }
                })
                .collect(),
        )
    }

    fn inclusion_probabilities(&self) -> Result<Vec<Inclusion>> {
        if self.block < 2 {
            return Err(Error::EstimatorUndefined(format!(
                "attribute-specific blocks of {} sample(s) never yield a second-order term",
                self.block
            )));
        }
        Ok((0..self.w.len())
            .map(|g| {
                let p = self.selection_probability(g);
                Inclusion { at_least_one: p, at_least_two: p }
            })
            .collect())
    }

    fn expected_counts(&self) -> Vec<f64> {
        (0..self.w.len()).map(|g| self.selection_probability(g) * self.block as f64).collect()
    }

    fn check_counts(&self, counts: &GroupCounts) -> Result<()> {
        check_len(counts, self.w.len())?;
        for (g, &m) in counts.0.iter().enumerate() {
            let p = self.selection_probability(g);
            let possible = (m == 0 && p < 1.0) || (m == self.block && p > 0.0);
            if !possible {
                return Err(Error::PlanMismatch(format!(
                    "group {g} has {m} samples; the attribute-specific plan yields 0 or {} with selection probability {p}",
                    self.block
                )));
            }
        }
        Ok(())
    }

    fn count_distribution(&self) -> Vec<(Vec<u64>, f64)> {
        let mut out = vec![(Vec::new(), 1.0)];
        for g in 0..self.w.len() {
            let p = self.selection_probability(g);
            let mut next = Vec::with_capacity(out.len() * 2);
            for (m, q) in out {
                for (c, pc) in [(0, 1.0 - p), (self.block, p)] {
                    if pc > 0.0 {
                        let mut m2 = m.clone();
                        m2.push(c);
                        next.push((m2, q * pc));
                    }
                }
            }
            out = next;
        }
        out
    }

    fn spec(&self) -> PlanSpec {
        PlanSpec { strategy: self.name().into(), budget: self.n, eta: None, gamma: Some(self.gamma) }
    }
}

fn check_len(counts: &GroupCounts, k: usize) -> Result<()> {
    if counts.0.len() != k {
        return Err(Error::PlanMismatch(format!("{} count entries for {k} groups", counts.0.len())));
    }
    Ok(())
}

/// A shareable handle to any sampling strategy.
#[derive(Debug, Clone)]
pub struct SamplingPlan(Arc<dyn SamplingStrategy>);

impl SamplingPlan {
    pub fn new(strategy: impl SamplingStrategy + 'static) -> Self {
        Self(Arc::new(strategy))
    }

    pub fn weighted(w: &GroupWeights, eta: f64, n: u64) -> Result<Self> {
        Ok(Self::new(WeightedSampling::new(w, eta, n)?))
    }

    pub fn attribute_specific(w: &GroupWeights, gamma: f64, n: u64) -> Result<Self> {
        Ok(Self::new(AttributeSpecificSampling::new(w, gamma, n)?))
    }

    pub fn strategy(&self) -> &dyn SamplingStrategy {
        self.0.as_ref()
    }
}

impl std::ops::Deref for SamplingPlan {
    type Target = dyn SamplingStrategy;

    fn deref(&self) -> &Self::Target {
        self.0.as_ref()
    }
}

/// Parameters handed to a registered strategy factory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanParams {
    pub budget: u64,
    /// Tilt exponent for weighted sampling; defaults to `2/3`.
    pub eta: Option<f64>,
    /// Attribute-specific `γ`; defaults to `n/2`.
    pub gamma: Option<f64>,
}

pub const DEFAULT_ETA: f64 = 2.0 / 3.0;

type Factory = Box<dyn Fn(&GroupWeights, &PlanParams) -> Result<SamplingPlan> + Send + Sync>;

/// Name-keyed factories for sampling strategies.
pub struct StrategyRegistry {
    factories: BTreeMap<String, Factory>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    /// Registry holding `weighted` and `attr`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("weighted", |w, p| SamplingPlan::weighted(w, p.eta.unwrap_or(DEFAULT_ETA), p.budget));
        r.register("attr", |w, p| {
            let gamma = p.gamma.unwrap_or(p.budget as f64 / 2.0);
            SamplingPlan::attribute_specific(w, gamma, p.budget)
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&GroupWeights, &PlanParams) -> Result<SamplingPlan> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, w: &GroupWeights, params: &PlanParams) -> Result<SamplingPlan> {
        let f = self.factories.get(name).ok_or_else(|| Error::UnknownStrategy(name.to_string()))?;
        f(w, params)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl Debug for StrategyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}
