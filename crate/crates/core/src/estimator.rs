//! The debiased statistic `F̂ = F̂₁ − F̂₂²` built from per-group sample
//! counts and successes, normalized by the plan's inclusion probabilities,
//! and an exhaustive-enumeration oracle for its moments on small instances.

use serde::{Deserialize, Serialize};

use crate::domain::{AuditSample, FairnessInstance, GroupWeights};
use crate::error::{Error, Result};
use crate::sampling::{GroupCounts, Inclusion, SamplingPlan};

/// Largest group count accepted by [`exact_distribution`].
pub const EXACT_MAX_GROUPS: usize = 4;
/// Largest budget accepted by [`exact_distribution`].
pub const EXACT_MAX_BUDGET: u64 = 8;

/// Sufficient statistics of one group's loss bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupTally {
    /// `M_g`
    pub count: u64,
    /// `S_g`, the number of losses equal to one.
    pub successes: u64,
}

/// Loss observations grouped by group id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedLosses {
    tallies: Vec<GroupTally>,
}

impl GroupedLosses {
    pub fn from_bits(bits: &[Vec<bool>]) -> Self {
        Self {
            tallies: bits
                .iter()
                .map(|b| GroupTally { count: b.len() as u64, successes: b.iter().filter(|x| **x).count() as u64 })
                .collect(),
        }
    }

    pub fn from_tallies(tallies: Vec<GroupTally>) -> Result<Self> {
        if let Some((g, t)) = tallies.iter().enumerate().find(|(_, t)| t.successes > t.count) {
            return Err(Error::InvalidSample(format!(
                "group {g} has {} successes out of {} samples",
                t.successes, t.count
            )));
        }
        Ok(Self { tallies })
    }

    pub fn from_samples(samples: &[AuditSample], k: usize) -> Result<Self> {
        let mut tallies = vec![GroupTally::default(); k];
        for s in samples {
            let t = tallies
                .get_mut(s.group)
                .ok_or_else(|| Error::InvalidSample(format!("group {} out of range for {k} groups", s.group)))?;
            t.count += 1;
            t.successes += u64::from(s.loss);
        }
        Ok(Self { tallies })
    }

    pub fn tallies(&self) -> &[GroupTally] {
        &self.tallies
    }

    pub fn num_groups(&self) -> usize {
        self.tallies.len()
    }

    pub fn counts(&self) -> GroupCounts {
        GroupCounts(self.tallies.iter().map(|t| t.count).collect())
    }
}

/// `F̂₁`, `F̂₂` and `F̂ = F̂₁ − F̂₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorValue {
    pub f1: f64,
    pub f2: f64,
    pub f: f64,
}

/// `1{M ≥ 1} S/M`
fn first_order(t: GroupTally) -> f64 {
    if t.count == 0 {
        0.0
    } else {
        t.successes as f64 / t.count as f64
    }
}

/// `1{M ≥ 2} S(S−1)/(M(M−1))`, with the products formed in integers.
fn second_order(t: GroupTally) -> f64 {
    if t.count < 2 {
        return 0.0;
    }
    let num = u128::from(t.successes) * u128::from(t.successes.saturating_sub(1));
    let den = u128::from(t.count) * u128::from(t.count - 1);
    num as f64 / den as f64
}

/// Evaluates the statistic. Zero-weight groups are skipped.
pub fn estimate(data: &GroupedLosses, w: &GroupWeights, incl: &[Inclusion]) -> Result<EstimatorValue> {
    let k = w.len();
    if data.num_groups() != k || incl.len() != k {
        return Err(Error::InvalidParameter(format!(
            "{} groups of data and {} inclusion entries for {k} weights",
            data.num_groups(),
            incl.len()
        )));
    }
    let (mut f1, mut f2) = (0.0, 0.0);
    for g in 0..k {
        let wg = w.get(g);
        if wg == 0.0 {
            continue;
        }
        let p = incl[g];
        if !(p.at_least_two > 0.0) || !(p.at_least_one > 0.0) {
            return Err(Error::ZeroInclusionProbability(g));
        }
        let t = data.tallies[g];
        f1 += wg / p.at_least_two * second_order(t);
        f2 += wg / p.at_least_one * first_order(t);
    }
    Ok(EstimatorValue { f1, f2, f: f1 - f2 * f2 })
}

/// One outcome of the sampling experiment with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub tallies: Vec<GroupTally>,
    pub probability: f64,
    pub value: EstimatorValue,
}

/// Every (counts, successes) outcome of `plan` on `inst` with positive
/// probability, and the statistic it produces.
pub fn exact_distribution(inst: &FairnessInstance, plan: &SamplingPlan) -> Result<Vec<Outcome>> {
    let k = inst.num_groups();
    if k > EXACT_MAX_GROUPS || plan.budget() > EXACT_MAX_BUDGET {
        return Err(Error::InstanceTooLarge(format!(
            "exact enumeration supports K <= {EXACT_MAX_GROUPS} and n <= {EXACT_MAX_BUDGET} (got K = {k}, n = {})",
            plan.budget()
        )));
    }
    if plan.num_groups() != k {
        return Err(Error::InvalidParameter(format!("plan has {} groups, instance {k}", plan.num_groups())));
    }
    let incl = plan.inclusion_probabilities()?;
    let mut out = Vec::new();
    for (counts, pc) in plan.count_distribution() {
        let mut partial: Vec<(Vec<GroupTally>, f64)> = vec![(Vec::with_capacity(k), pc)];
        for (g, &m) in counts.iter().enumerate() {
            let mu = inst.mu()[g];
            let mut next = Vec::new();
            for (ts, p) in &partial {
                for s in 0..=m {
                    let ps = binomial_pmf(m, s, mu);
                    if ps > 0.0 {
                        let mut t2 = ts.clone();
                        t2.push(GroupTally { count: m, successes: s });
                        next.push((t2, p * ps));
                    }
                }
            }
            partial = next;
        }
        for (tallies, probability) in partial {
            let value = estimate(&GroupedLosses { tallies: tallies.clone() }, inst.weights(), &incl)?;
            out.push(Outcome { tallies, probability, value });
        }
    }
    Ok(out)
}

fn binomial_pmf(m: u64, s: u64, p: f64) -> f64 {
    let mut c = 1.0f64;
    for i in 0..s {
        c = c * (m - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(s as i32) * (1.0 - p).powi((m - s) as i32)
}

/// Exact moments of one group's normalized terms `1{M≥1} S/M` and
/// `1{M≥2} S(S−1)/(M(M−1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMoments {
    pub mean_first: f64,
    pub var_first: f64,
    pub mean_second: f64,
    pub var_second: f64,
    pub inclusion: Inclusion,
}

/// Exact first and second moments of the statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub mean_f1: f64,
    pub mean_f2: f64,
    pub mean_f: f64,
    pub var_f2: f64,
    pub total_probability: f64,
    pub groups: Vec<GroupMoments>,
}

impl ExactMoments {
    /// Largest violation of `E[F̂₂] = L̄` and `E[F̂₁] = Σ w μ²`.
    pub fn bias(&self, inst: &FairnessInstance) -> (f64, f64) {
        let lbar: f64 = inst.weights().iter().zip(inst.mu()).map(|(w, m)| w * m).sum();
        let second: f64 = inst.weights().iter().zip(inst.mu()).map(|(w, m)| w * m * m).sum();
        ((self.mean_f1 - second).abs(), (self.mean_f2 - lbar).abs())
    }
}

pub fn exact_moments(inst: &FairnessInstance, plan: &SamplingPlan) -> Result<ExactMoments> {
    let outcomes = exact_distribution(inst, plan)?;
    let incl = plan.inclusion_probabilities()?;
    let k = inst.num_groups();
    let (mut m1, mut m2, mut mf, mut m2sq, mut total) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut sums = vec![[0.0f64; 4]; k];
    for o in &outcomes {
        let p = o.probability;
        total += p;
        m1 += p * o.value.f1;
        m2 += p * o.value.f2;
        mf += p * o.value.f;
        m2sq += p * o.value.f2 * o.value.f2;
        for (g, t) in o.tallies.iter().enumerate() {
            let (a, b) = (first_order(*t), second_order(*t));
            sums[g][0] += p * a;
            sums[g][1] += p * a * a;
            sums[g][2] += p * b;
            sums[g][3] += p * b * b;
        }
    }
    let groups = sums
        .iter()
        .zip(&incl)
        .map(|(s, inc)| GroupMoments {
            mean_first: s[0],
            var_first: s[1] - s[0] * s[0],
            mean_second: s[2],
            var_second: s[3] - s[2] * s[2],
            inclusion: *inc,
        })
        .collect();
    Ok(ExactMoments { mean_f1: m1, mean_f2: m2, mean_f: mf, var_f2: m2sq - m2 * m2, total_probability: total, groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::separation_statistic;
    use crate::sampling::{binomial_inclusion, WeightedSampling};
    use proptest::prelude::*;

    const SURE: Inclusion = Inclusion { at_least_one: 1.0, at_least_two: 1.0 };

    fn inst(w: Vec<f64>, mu: Vec<f64>) -> FairnessInstance {
        FairnessInstance::new(GroupWeights::new(w).unwrap(), mu).unwrap()
    }

    #[test]
    fn single_group_arithmetic() {
        let data = GroupedLosses::from_bits(&[vec![true, true, false]]);
        let v = estimate(&data, &GroupWeights::new(vec![1.0]).unwrap(), &[SURE]).unwrap();
        assert!((v.f1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((v.f2 - 2.0 / 3.0).abs() < 1e-15);
        assert!((v.f - (-1.0 / 9.0)).abs() < 1e-15);
        assert_eq!(v.f, v.f1 - v.f2 * v.f2);
    }

    #[test]
    fn single_sample_group_is_zero_in_f1() {
        let data = GroupedLosses::from_bits(&[vec![true], vec![true, true]]);
        let w = GroupWeights::uniform(2).unwrap();
        let v = estimate(&data, &w, &[SURE, SURE]).unwrap();
        assert!((v.f1 - 0.5).abs() < 1e-15);
        assert!((v.f2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_two_groups() {
        let data = GroupedLosses::from_bits(&[vec![false, false], vec![true, true]]);
        let w = GroupWeights::uniform(2).unwrap();
        let v = estimate(&data, &w, &[SURE, SURE]).unwrap();
        assert_eq!((v.f1, v.f2, v.f), (0.5, 0.5, 0.25));
        let d = separation_statistic(&inst(vec![0.5, 0.5], vec![0.0, 1.0]));
        assert!((v.f - d).abs() < 1e-15);
    }

    #[test]
    fn zero_inclusion_is_an_error() {
        let data = GroupedLosses::from_bits(&[vec![], vec![true, true]]);
        let w = GroupWeights::uniform(2).unwrap();
        let half = Inclusion { at_least_one: 0.5, at_least_two: 0.0 };
        assert_eq!(estimate(&data, &w, &[half, SURE]), Err(Error::ZeroInclusionProbability(0)));
        let w0 = GroupWeights::new(vec![0.0, 1.0]).unwrap();
        let zero = Inclusion { at_least_one: 0.0, at_least_two: 0.0 };
        assert!(estimate(&data, &w0, &[zero, SURE]).is_ok());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let data = GroupedLosses::from_bits(&[vec![true]]);
        assert!(estimate(&data, &GroupWeights::uniform(2).unwrap(), &[SURE, SURE]).is_err());
    }

    #[test]
    fn tallies_validate() {
        assert!(GroupedLosses::from_tallies(vec![GroupTally { count: 1, successes: 2 }]).is_err());
        let s = [AuditSample { group: 3, loss: true }];
        assert!(GroupedLosses::from_samples(&s, 2).is_err());
    }

    #[test]
    fn huge_counts_do_not_overflow() {
        let t = GroupTally { count: u64::MAX / 2, successes: u64::MAX / 4 };
        let v = second_order(t);
        assert!((v - 0.25).abs() < 1e-9);
    }

    #[test]
    fn moments_one_group() {
        let i = inst(vec![1.0], vec![0.5]);
        let plan = SamplingPlan::new(WeightedSampling::with_marginal(GroupWeights::new(vec![1.0]).unwrap(), 3));
        let m = exact_moments(&i, &plan).unwrap();
        assert!((m.mean_f2 - 0.5).abs() < 1e-12);
        assert!((m.mean_f1 - 0.25).abs() < 1e-12);
        // Oracle: average over the 2^3 loss patterns directly.
        let (mut a, mut b) = (0.0, 0.0);
        for mask in 0u32..8 {
            let s = mask.count_ones() as f64;
            a += s / 3.0 / 8.0;
            b += s * (s - 1.0) / 6.0 / 8.0;
        }
        assert!((m.mean_f2 - a).abs() < 1e-12 && (m.mean_f1 - b).abs() < 1e-12);
    }

    #[test]
    fn moments_two_groups_deterministic_losses() {
        let i = inst(vec![0.5, 0.5], vec![0.0, 1.0]);
        let plan = SamplingPlan::weighted(i.weights(), 1.0, 4).unwrap();
        let m = exact_moments(&i, &plan).unwrap();
        assert!((m.mean_f1 - 0.5).abs() < 1e-12);
        // Oracle: over the 16 label sequences, group 1's term is
        // 0.5 / P2 · 1{M_1 ≥ 2}.
        let p2 = binomial_inclusion(4, 0.5).at_least_two;
        let mut direct = 0.0;
        for mask in 0u32..16 {
            if mask.count_ones() >= 2 {
                direct += 0.5 / p2 / 16.0;
            }
        }
        assert!((m.mean_f1 - direct).abs() < 1e-12);
    }

    #[test]
    fn deterministic_losses_with_sure_inclusion_have_no_second_order_variance() {
        let w = GroupWeights::uniform(3).unwrap();
        for mu in [[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0]] {
            let i = FairnessInstance::new(w.clone(), mu.to_vec()).unwrap();
            let plan = SamplingPlan::attribute_specific(&w, 3.0, 6).unwrap();
            let m = exact_moments(&i, &plan).unwrap();
            for g in &m.groups {
                assert_eq!(g.inclusion.at_least_two, 1.0);
                assert!(g.var_second.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_limits() {
        let w = GroupWeights::uniform(5).unwrap();
        let i = FairnessInstance::new(w.clone(), vec![0.5; 5]).unwrap();
        let plan = SamplingPlan::weighted(&w, 1.0, 4).unwrap();
        assert!(matches!(exact_moments(&i, &plan), Err(Error::InstanceTooLarge(_))));
        let w = GroupWeights::uniform(2).unwrap();
        let i = FairnessInstance::new(w.clone(), vec![0.5; 2]).unwrap();
        let plan = SamplingPlan::weighted(&w, 1.0, 9).unwrap();
        assert!(matches!(exact_moments(&i, &plan), Err(Error::InstanceTooLarge(_))));
    }

    fn grid_instance() -> impl Strategy<Value = (FairnessInstance, u64, bool, f64)> {
        let mu_grid = prop::sample::select(vec![0.0, 1.0 / 3.0, 0.5, 1.0]);
        (1usize..=3)
            .prop_flat_map(move |k| {
                (
                    prop::collection::vec(0.05f64..1.0, k),
                    prop::collection::vec(mu_grid.clone(), k),
                    2u64..=6,
                    any::<bool>(),
                    prop::sample::select(vec![0.0, 2.0 / 3.0, 1.0]),
                )
            })
            .prop_map(|(raw, mu, n, attr, eta)| {
                (FairnessInstance::new(GroupWeights::from_masses(&raw).unwrap(), mu).unwrap(), n, attr, eta)
            })
    }

    fn plan_for(i: &FairnessInstance, n: u64, attr: bool, eta: f64) -> SamplingPlan {
        if attr {
            SamplingPlan::attribute_specific(i.weights(), n as f64 / 2.0, n).unwrap()
        } else {
            SamplingPlan::weighted(i.weights(), eta, n).unwrap()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn unbiased_and_below_separation((i, n, attr, eta) in grid_instance()) {
            let plan = plan_for(&i, n, attr, eta);
            let m = exact_moments(&i, &plan).unwrap();
            prop_assert!((m.total_probability - 1.0).abs() < 1e-12);
            let (b1, b2) = m.bias(&i);
            prop_assert!(b1 <= 1e-10 && b2 <= 1e-10, "{b1} {b2}");
            prop_assert!(m.mean_f <= separation_statistic(&i) + 1e-10);
            let lbar: f64 = i.weights().iter().zip(i.mu()).map(|(w, x)| w * x).sum();
            let e1: f64 = i.weights().iter().zip(i.mu()).map(|(w, x)| w * x * x).sum();
            prop_assert!((m.mean_f - (e1 - lbar * lbar - m.var_f2)).abs() <= 1e-10);
            for (g, gm) in m.groups.iter().enumerate() {
                let mu = i.mu()[g];
                prop_assert!((gm.mean_first - mu * gm.inclusion.at_least_one).abs() <= 1e-10);
                prop_assert!((gm.mean_second - mu * mu * gm.inclusion.at_least_two).abs() <= 1e-10);
                prop_assert!(gm.var_first <= 2.0 * gm.inclusion.at_least_one + 1e-10);
                prop_assert!(gm.var_second <= 2.0 * gm.inclusion.at_least_two + 1e-10);
            }
        }

        #[test]
        fn estimate_is_permutation_equivariant(
            rows in prop::collection::vec((0u64..6, 0u64..6, 0.05f64..1.0, 0.1f64..1.0), 1..6),
            rot in 0usize..6,
        ) {
            let k = rows.len();
            let tallies: Vec<GroupTally> = rows.iter().map(|&(m, s, _, _)| GroupTally { count: m, successes: s.min(m) }).collect();
            let raw: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let incl: Vec<Inclusion> = rows.iter().map(|r| Inclusion { at_least_one: r.3, at_least_two: r.3 * 0.9 }).collect();
            let w = GroupWeights::from_masses(&raw).unwrap();
            let a = estimate(&GroupedLosses::from_tallies(tallies.clone()).unwrap(), &w, &incl).unwrap();
            let perm: Vec<usize> = (0..k).map(|g| (g + rot) % k).collect();
            let pw = GroupWeights::new(perm.iter().map(|&p| w.get(p)).collect()).unwrap();
            let pt = perm.iter().map(|&p| tallies[p]).collect();
            let pi: Vec<Inclusion> = perm.iter().map(|&p| incl[p]).collect();
            let b = estimate(&GroupedLosses::from_tallies(pt).unwrap(), &pw, &pi).unwrap();
            prop_assert!((a.f1 - b.f1).abs() <= 1e-12 && (a.f2 - b.f2).abs() <= 1e-12);
        }
    }
}
