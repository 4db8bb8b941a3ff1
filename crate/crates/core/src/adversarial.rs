//! Worst-case instance pairs and mixtures behind the converse bounds, with
//! the divergences used to compare them.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::domain::{FairnessInstance, GroupWeights};
use crate::error::{Error, Result};

/// Largest group count for the direct χ² enumeration.
pub const EXACT_CHI_MAX_GROUPS: usize = 4;
/// Largest sample count for the direct χ² enumeration.
pub const EXACT_CHI_MAX_N: u32 = 6;
/// Largest `|Q|` for which the pairwise χ² sum is evaluated exactly.
pub const PAIRWISE_MAX_Q: usize = 12;

/// A fair instance and one with a single group lifted far enough to have
/// max-gap `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardPair {
    pub p0: FairnessInstance,
    pub p1: FairnessInstance,
    pub epsilon: f64,
    pub perturbed_group: usize,
}

/// Uniform weights over `k` groups, all means `1/2` in `p0`; in `p1` group 0
/// has mean `1/2 + εK/(K−1)`.
pub fn build_hard_pair(k: usize, epsilon: f64) -> Result<HardPair> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("hard pair needs at least 2 groups, got {k}")));
    }
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::InvalidEpsilon(format!("epsilon must lie in (0, 0.5], got {epsilon}")));
    }
    let lifted = 0.5 + epsilon * k as f64 / (k as f64 - 1.0);
    if lifted > 1.0 {
        return Err(Error::InvalidEpsilon(format!("lifted mean {lifted} exceeds 1 for K = {k}, epsilon = {epsilon}")));
    }
    let w = GroupWeights::uniform(k)?;
    let mut mu = vec![0.5; k];
    let p0 = FairnessInstance::new(w.clone(), mu.clone())?;
    mu[0] = lifted;
    let p1 = FairnessInstance::new(w, mu)?;
    Ok(HardPair { p0, p1, epsilon, perturbed_group: 0 })
}

/// Squared Hellinger distance between the joint laws of `(ŷ, g)` of two
/// instances sharing the same group weights.
pub fn hellinger_sq(a: &FairnessInstance, b: &FairnessInstance) -> Result<f64> {
    if a.weights() != b.weights() {
        return Err(Error::WeightMismatch);
    }
    Ok(a.weights()
        .iter()
        .zip(a.mu().iter().zip(b.mu()))
        .map(|(w, (&x, &y))| {
            let hi = x.sqrt() - y.sqrt();
            let lo = (1.0 - x).sqrt() - (1.0 - y).sqrt();
            w * (hi * hi + lo * lo)
        })
        .sum())
}

/// A base instance with all means `1/2` and the family of sign-perturbed
/// instances `P_u`, `u ∈ {−1, +1}^{|Q|}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFamily {
    pub p0: FairnessInstance,
    pub alpha: f64,
    pub epsilon: f64,
    /// The perturbed groups.
    pub q: Vec<usize>,
    /// `(1−α)/α`
    pub tau: f64,
    /// `ε_g = ε w_g^{2/3} / Σ_{Q} w^{2/3}`, aligned with `q`.
    pub eps_g: Vec<f64>,
}

impl MixtureFamily {
    /// Mean shift magnitude `τ ε_g / w_g` of each perturbed group.
    pub fn shifts(&self) -> Vec<f64> {
        self.q
            .iter()
            .zip(&self.eps_g)
            .map(|(&g, e)| self.tau * e / self.p0.weights().get(g))
            .collect()
    }

    /// The member for signs `u` (each entry `+1` or `−1`).
    pub fn member(&self, u: &[i8]) -> Result<FairnessInstance> {
        if u.len() != self.q.len() || u.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidParameter(format!(
                "expected {} signs in {{-1, +1}}, got {u:?}",
                self.q.len()
            )));
        }
        let mut mu = self.p0.mu().to_vec();
        for ((&g, d), &s) in self.q.iter().zip(self.shifts()).zip(u) {
            mu[g] = 0.5 + d * f64::from(s);
        }
        FairnessInstance::new(self.p0.weights().clone(), mu)
    }

    /// A member with independent uniform signs.
    pub fn random_member(&self, rng: &mut dyn RngCore) -> Result<(Vec<i8>, FairnessInstance)> {
        let u: Vec<i8> = (0..self.q.len()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let m = self.member(&u)?;
        Ok((u, m))
    }
}

/// Builds the mixture family for uniform weights, `α ∈ (0, 1)` and
/// `ε ∈ (0, α K^{1/3} / 4]`. The first `⌊(1−α)K⌋` groups are perturbed.
///
/// The perturbed means must stay inside `[0, 1]`; parameters for which the
/// shift `τ ε_g / w_g` exceeds `1/2` are rejected with `EpsilonOutOfRange`.
pub fn build_mixture_family(w: &GroupWeights, alpha: f64, epsilon: f64) -> Result<MixtureFamily> {
    if !w.is_uniform() {
        return Err(Error::NonUniformWeights);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let k = w.len();
    let cap = alpha * (k as f64).cbrt() / 4.0;
    if !(epsilon > 0.0 && epsilon <= cap * (1.0 + 1e-12)) {
        return Err(Error::EpsilonOutOfRange(format!(
            "epsilon = {epsilon} must lie in (0, alpha*K^(1/3)/4] = (0, {cap}]"
        )));
    }
    let size = ((1.0 - alpha) * k as f64 + 1e-9).floor() as usize;
    if size == 0 {
        return Err(Error::InvalidParameter(format!("(1-alpha)*K = {} leaves no group to perturb", (1.0 - alpha) * k as f64)));
    }
    let q: Vec<usize> = (0..size).collect();
    let norm: f64 = q.iter().map(|&g| w.get(g).powf(2.0 / 3.0)).sum();
    let eps_g: Vec<f64> = q.iter().map(|&g| epsilon * w.get(g).powf(2.0 / 3.0) / norm).collect();
    let family = MixtureFamily {
        p0: FairnessInstance::new(w.clone(), vec![0.5; k])?,
        alpha,
        epsilon,
        q,
        tau: (1.0 - alpha) / alpha,
        eps_g,
    };
    if let Some(d) = family.shifts().into_iter().find(|d| *d > 0.5) {
        return Err(Error::EpsilonOutOfRange(format!(
            "mean shift {d} exceeds 1/2 (K = {k}, alpha = {alpha}, epsilon = {epsilon})"
        )));
    }
    Ok(family)
}

/// Closed-form upper bounds on `χ²(E_u[P_uⁿ] ‖ P_0ⁿ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSqBound {
    /// `exp(128 (1−α) n² ε⁴ / (α⁴ K)) − 1`
    pub statement: f64,
    /// The same with constant 1024.
    pub proof_chain: f64,
}

pub fn chi_sq_mixture_bound(k: usize, alpha: f64, epsilon: f64, n: u64) -> ChiSqBound {
    let base = (1.0 - alpha) * (n as f64).powi(2) * epsilon.powi(4) / (alpha.powi(4) * k as f64);
    ChiSqBound { statement: (128.0 * base).exp_m1(), proof_chain: (1024.0 * base).exp_m1() }
}

fn all_signs(len: usize) -> Vec<Vec<i8>> {
    (0u64..1 << len)
        .map(|mask| (0..len).map(|j| if mask >> j & 1 == 1 { 1 } else { -1 }).collect())
        .collect()
}

/// `χ²` of the uniform mixture of `P_uⁿ` against `P_0ⁿ`, summed directly
/// over every sequence of `n` observations `(ŷ, g)`.
pub fn exact_chi_sq_small(family: &MixtureFamily, n: u32) -> Result<f64> {
    let k = family.p0.num_groups();
    if k > EXACT_CHI_MAX_GROUPS || n > EXACT_CHI_MAX_N {
        return Err(Error::InstanceTooLarge(format!(
            "direct chi-square enumeration supports K <= {EXACT_CHI_MAX_GROUPS} and n <= {EXACT_CHI_MAX_N}"
        )));
    }
    let w = family.p0.weights();
    let members: Vec<FairnessInstance> =
        all_signs(family.q.len()).iter().map(|u| family.member(u)).collect::<Result<_>>()?;
    // Single-observation probabilities, indexed by 2g + ŷ.
    let atoms = 2 * k;
    let cell = |inst: &FairnessInstance, x: usize| {
        let (g, y) = (x / 2, x % 2);
        let m = inst.mu()[g];
        w.get(g) * if y == 1 { m } else { 1.0 - m }
    };
    let base: Vec<f64> = (0..atoms).map(|x| cell(&family.p0, x)).collect();
    let per_member: Vec<Vec<f64>> = members.iter().map(|m| (0..atoms).map(|x| cell(m, x)).collect()).collect();
    let weight = 1.0 / members.len() as f64;

    let mut total = 0.0;
    let mut seq = vec![0usize; n as usize];
    loop {
        let p0: f64 = seq.iter().map(|&x| base[x]).product();
        if p0 > 0.0 {
            let mix: f64 = per_member.iter().map(|pm| seq.iter().map(|&x| pm[x]).product::<f64>()).sum::<f64>() * weight;
            total += mix * mix / p0;
        }
        // Advance the odometer.
        let mut i = 0;
        while i < seq.len() {
            seq[i] += 1;
            if seq[i] < atoms {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
        if i == seq.len() {
            break;
        }
    }
    Ok(total - 1.0)
}

/// The same `χ²` through the pairwise identity
/// `E_{u,u'}[(1 + Σ_Q 4 τ² ε_g² u_g u'_g / w_g)ⁿ] − 1`.
pub fn ingster_suslina_chi_sq(family: &MixtureFamily, n: u32) -> Result<f64> {
    if family.q.len() > PAIRWISE_MAX_Q {
        return Err(Error::InstanceTooLarge(format!("pairwise sum supports |Q| <= {PAIRWISE_MAX_Q}")));
    }
    let w = family.p0.weights();
    let coef: Vec<f64> = family
        .q
        .iter()
        .zip(&family.eps_g)
        .map(|(&g, e)| 4.0 * family.tau * family.tau * e * e / w.get(g))
        .collect();
    let signs = all_signs(family.q.len());
    let mut acc = 0.0;
    for u in &signs {
        for v in &signs {
            let inner: f64 = coef.iter().zip(u.iter().zip(v)).map(|(c, (a, b))| c * f64::from(a * b)).sum();
            acc += (1.0 + inner).powi(n as i32);
        }
    }
    Ok(acc / (signs.len() * signs.len()) as f64 - 1.0)
}
