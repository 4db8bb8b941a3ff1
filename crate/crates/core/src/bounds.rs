//! Closed-form bound calculators: Rényi entropy, error-probability upper
//! bounds for both sampling strategies, sample sizes that achieve a target
//! error, and the converse floors.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::domain::GroupWeights;
use crate::error::{Error, Result};
use crate::sampling::{weighted_marginal, Inclusion};

/// `H_ρ(w) = log₂(Σ w_g^ρ) / (1 − ρ)` in bits.
pub fn renyi_entropy(w: &GroupWeights, rho: f64) -> Result<f64> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be a finite number >= 0, got {rho}")));
    }
    if rho == 1.0 {
        return Err(Error::InvalidParameter("rho = 1 is the Shannon limit; use shannon_entropy".into()));
    }
    let s: f64 = w.iter().filter(|x| *x > 0.0).map(|x| x.powf(rho)).sum();
    Ok(s.log2() / (1.0 - rho))
}

/// Shannon entropy in bits.
pub fn shannon_entropy(w: &GroupWeights) -> f64 {
    -w.iter().filter(|x| *x > 0.0).map(|x| x * x.log2()).sum::<f64>()
}

/// An error-probability upper bound. Values above one are returned as is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub value: f64,
    pub vacuous: bool,
}

impl ErrorBound {
    fn new(value: f64) -> Self {
        Self { value, vacuous: !(value <= 1.0) }
    }

    /// `min(1, value)`
    pub fn clamped(&self) -> f64 {
        self.value.min(1.0)
    }
}

fn scale(alpha: f64, epsilon: f64) -> f64 {
    (1.0 - alpha).powi(2) * epsilon.powi(4)
}

/// Weighted-sampling bound
/// `64e Σ w²/v² / (c n²) + 128e Σ w²/v / (c n)` with `c = (1−α)²ε⁴`.
/// A group with `w_g > 0` and `v_g = 0` makes the bound infinite.
pub fn p_error_weighted(w: &GroupWeights, v: &GroupWeights, n: u64, alpha: f64, epsilon: f64) -> Result<ErrorBound> {
    if w.len() != v.len() {
        return Err(Error::InvalidParameter(format!("{} weights but {} marginal entries", w.len(), v.len())));
    }
    let c = scale(alpha, epsilon);
    let nf = n as f64;
    let (mut quad, mut lin) = (0.0, 0.0);
    for (wg, vg) in w.iter().zip(v.iter()) {
        if wg == 0.0 {
            continue;
        }
        quad += wg * wg / (vg * vg);
        lin += wg * wg / vg;
    }
    Ok(ErrorBound::new(64.0 * E * quad / (c * nf * nf) + 128.0 * E * lin / (c * nf)))
}

/// Attribute-specific bound with `γ = n/2`: `256 / ((1−α)² ε⁴ n)`.
pub fn p_error_attr(n: u64, alpha: f64, epsilon: f64) -> ErrorBound {
    ErrorBound::new(256.0 / (scale(alpha, epsilon) * n as f64))
}

/// The inclusion-probability form that both strategy bounds specialize:
/// `Σ 64 w²/(c P[M≥2]) + Σ 128 w²/(c P[M≥1])`.
pub fn p_error_lemma(w: &GroupWeights, incl: &[Inclusion], alpha: f64, epsilon: f64) -> Result<ErrorBound> {
    if w.len() != incl.len() {
        return Err(Error::InvalidParameter(format!("{} weights but {} inclusion entries", w.len(), incl.len())));
    }
    let c = scale(alpha, epsilon);
    let total: f64 = w
        .iter()
        .zip(incl)
        .filter(|(wg, _)| *wg > 0.0)
        .map(|(wg, p)| 64.0 * wg * wg / (c * p.at_least_two) + 128.0 * wg * wg / (c * p.at_least_one))
        .sum();
    Ok(ErrorBound::new(total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NRequiredKind {
    /// Weighted sampling with `v ∝ w^{2/3}`.
    WeightedOpt,
    /// Attribute-specific sampling with `γ = n/2`.
    Attr,
    /// Max-gap converse, `K/ε²`.
    ConverseMaxGap,
    /// CVaR converse, `α²√K / ((1−α)^{1/2} ε²)`.
    ConverseCvar,
}

impl NRequiredKind {
    pub const ALL: [NRequiredKind; 4] =
        [NRequiredKind::WeightedOpt, NRequiredKind::Attr, NRequiredKind::ConverseMaxGap, NRequiredKind::ConverseCvar];
}

/// Inputs shared by the sample-size formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub weights: GroupWeights,
    pub alpha: f64,
    pub epsilon: f64,
    /// Target error probability.
    pub delta: f64,
}

impl BoundParams {
    pub fn new(weights: GroupWeights, alpha: f64, epsilon: f64, delta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1), got {alpha}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { weights, alpha, epsilon, delta })
    }
}

/// A sample size. Order-only values carry unit constants and only describe
/// scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    pub value: f64,
    pub order_only: bool,
}

/// Terms of the weighted-sampling sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSize {
    /// Positive root of `δ c n² − 128e S n − 64e S³ = 0`, `S = Σ w^{2/3}`.
    pub value: f64,
    /// `sqrt(64e S³ / (δ c))`
    pub leading: f64,
    /// `128e S / (δ c)`
    pub second: f64,
}

/// Smallest `n` for which the weighted bound with `v ∝ w^{2/3}` is at most
/// `δ`, using `Σ w²/v² = S³` and `Σ w²/v = S Σ w^{4/3} ≤ S`.
pub fn n_weighted_opt(p: &BoundParams) -> WeightedSize {
    let s: f64 = p.weights.iter().filter(|x| *x > 0.0).map(|x| x.powf(2.0 / 3.0)).sum();
    let dc = p.delta * scale(p.alpha, p.epsilon);
    let b = 128.0 * E * s;
    let a0 = 64.0 * E * s.powi(3);
    WeightedSize {
        value: (b + (b * b + 4.0 * dc * a0).sqrt()) / (2.0 * dc),
        leading: (a0 / dc).sqrt(),
        second: b / dc,
    }
}

pub fn n_required(kind: NRequiredKind, p: &BoundParams) -> SampleSize {
    let k = p.weights.len() as f64;
    let eps2 = p.epsilon * p.epsilon;
    match kind {
        NRequiredKind::WeightedOpt => SampleSize { value: n_weighted_opt(p).value, order_only: false },
        NRequiredKind::Attr => SampleSize { value: 256.0 / (scale(p.alpha, p.epsilon) * p.delta), order_only: false },
        NRequiredKind::ConverseMaxGap => SampleSize { value: k / eps2, order_only: true },
        NRequiredKind::ConverseCvar => SampleSize {
            value: p.alpha * p.alpha * k.sqrt() / ((1.0 - p.alpha).sqrt() * eps2),
            order_only: true,
        },
    }
}

/// `max(0, (1 − sqrt(2(1 − (1 − 2ε²/K)ⁿ))) / 2)`, a floor on the best
/// achievable max-gap error probability.
pub fn le_cam_error_floor(k: usize, epsilon: f64, n: u64) -> f64 {
    (le_cam_two_point(k, epsilon, n) / 2.0).max(0.0)
}

/// `1 − sqrt(2(1 − (1 − 2ε²/K)ⁿ))`, the lower bound on twice the error.
pub fn le_cam_two_point(k: usize, epsilon: f64, n: u64) -> f64 {
    let x = 2.0 * epsilon * epsilon / k as f64;
    let gap = -(n as f64 * (-x).ln_1p()).exp_m1();
    1.0 - (2.0 * gap).sqrt()
}

/// Bound values at one budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub n: u64,
    pub p_err_weighted: ErrorBound,
    pub p_err_attr: ErrorBound,
    pub le_cam_floor: f64,
}

/// All closed-form quantities for one `(w, α, ε, δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// `H_{2/3}(w)` in bits.
    pub renyi_23: f64,
    pub shannon: f64,
    /// `2^{H_{2/3}/2}`, at most `√K`.
    pub renyi_sqrt_term: f64,
    pub n_weighted: WeightedSize,
    pub n_attr: SampleSize,
    pub n_converse_maxgap: SampleSize,
    pub n_converse_cvar: SampleSize,
    pub curve: Vec<BoundPoint>,
}

impl BoundReport {
    pub fn new(p: &BoundParams) -> Result<Self> {
        let renyi_23 = renyi_entropy(&p.weights, 2.0 / 3.0)?;
        Ok(Self {
            k: p.weights.len(),
            alpha: p.alpha,
            epsilon: p.epsilon,
            delta: p.delta,
            renyi_23,
            shannon: shannon_entropy(&p.weights),
            renyi_sqrt_term: (renyi_23 / 2.0).exp2(),
            n_weighted: n_weighted_opt(p),
            n_attr: n_required(NRequiredKind::Attr, p),
            n_converse_maxgap: n_required(NRequiredKind::ConverseMaxGap, p),
            n_converse_cvar: n_required(NRequiredKind::ConverseCvar, p),
            curve: Vec::new(),
        })
    }

    /// Adds bound values at each budget in `ns`.
    pub fn at(mut self, p: &BoundParams, ns: &[u64]) -> Result<Self> {
        let v = weighted_marginal(&p.weights, 2.0 / 3.0)?;
        for &n in ns {
            self.curve.push(BoundPoint {
                n,
                p_err_weighted: p_error_weighted(&p.weights, &v, n, p.alpha, p.epsilon)?,
                p_err_attr: p_error_attr(n, p.alpha, p.epsilon),
                le_cam_floor: le_cam_error_floor(self.k, p.epsilon, n),
            });
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::binomial_inclusion;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    fn uniform(k: usize) -> GroupWeights {
        GroupWeights::uniform(k).unwrap()
    }

    fn random_simplex(k: usize, rng: &mut ChaCha8Rng) -> GroupWeights {
        let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
        GroupWeights::from_masses(&raw).unwrap()
    }

    #[test]
    fn renyi_examples() {
        let h = renyi_entropy(&uniform(16), 2.0 / 3.0).unwrap();
        assert!((h - 4.0).abs() < 1e-12);
        assert!(((h / 2.0).exp2() - 4.0).abs() < 1e-12);
        let point = GroupWeights::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(renyi_entropy(&point, 2.0 / 3.0).unwrap(), 0.0);
        assert_eq!(renyi_entropy(&point, 0.0).unwrap(), 0.0);
        let w = GroupWeights::new(vec![0.8, 0.2]).unwrap();
        let h = renyi_entropy(&w, 2.0 / 3.0).unwrap();
        let s = 0.8f64.powf(2.0 / 3.0) + 0.2f64.powf(2.0 / 3.0);
        assert!((h - 3.0 * s.log2()).abs() < 1e-12);
        assert!((h - 0.802_676).abs() < 1e-6);
        assert!((h.exp2() - s.powi(3)).abs() < 1e-12);
        assert!(renyi_entropy(&w, 1.0).is_err());
        assert!((shannon_entropy(&uniform(8)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn renyi_uniform_is_log_k() {
        for k in [2usize, 3, 7, 16, 100, 4096] {
            for rho in [0.0, 2.0 / 3.0, 2.0] {
                let h = renyi_entropy(&uniform(k), rho).unwrap();
                assert!((h - (k as f64).log2()).abs() < 1e-12, "K={k} rho={rho}");
            }
        }
    }

    #[test]
    fn renyi_sqrt_term_at_most_sqrt_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..10_000 {
            let k = 2 + i % 50;
            let w = random_simplex(k, &mut rng);
            let t = (renyi_entropy(&w, 2.0 / 3.0).unwrap() / 2.0).exp2();
            assert!(t <= (k as f64).sqrt() + 1e-9);
        }
    }

    #[test]
    fn weighted_bound_examples() {
        let w = uniform(64);
        let b = p_error_weighted(&w, &w, 10_000, 0.0, 0.5).unwrap();
        // Independent evaluation: Σ w²/v² = K and Σ w²/v = 1 for w = v uniform.
        let c = 0.0625;
        let direct = 64.0 * E * 64.0 / (c * 1e8) + 128.0 * E / (c * 1e4);
        assert!((b.value - direct).abs() < 1e-12);
        assert!(!b.vacuous);
        let b2 = p_error_weighted(&w, &w, 10_000, 0.0, 0.25).unwrap();
        assert!((b2.value / b.value - 16.0).abs() < 1e-9);
        let small = p_error_weighted(&w, &w, 10, 0.0, 0.5).unwrap();
        assert!(small.vacuous && small.value > 1.0);
        let mut last = f64::INFINITY;
        for n in [1u64, 10, 100, 1000, 10_000, 1_000_000, 10_000_000] {
            let v = p_error_weighted(&w, &w, n, 0.2, 0.3).unwrap().value;
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-2);
    }

    #[test]
    fn attr_bound_examples() {
        let b = p_error_attr(25_600, 0.0, 1.0);
        assert!((b.value - 0.01).abs() < 1e-15);
        assert!((p_error_attr(2000, 0.3, 0.4).value / p_error_attr(4000, 0.3, 0.4).value - 2.0).abs() < 1e-12);
        assert!(p_error_attr(2, 0.0, 0.5).vacuous);
    }

    #[test]
    fn lemma_form_under_half_budget_blocks() {
        // With γ = n/2 and γ w_g ≤ 1, P[M≥1] = P[M≥2] = n w_g / 2, so the
        // lemma form is Σ (128 + 256) w_g / (c n) = 384 / (c n).
        let w = uniform(1024);
        for n in [128u64, 1024, 2048] {
            let incl: Vec<Inclusion> = w
                .iter()
                .map(|x| {
                    let p = (n as f64 / 2.0 * x).min(1.0);
                    Inclusion { at_least_one: p, at_least_two: p }
                })
                .collect();
            let lemma = p_error_lemma(&w, &incl, 0.1, 0.5).unwrap().value;
            let c = 0.81 * 0.0625;
            let expected = 384.0 / (c * n as f64);
            assert!((lemma - expected).abs() < 1e-9 * expected, "n={n}");
            assert!((lemma / p_error_attr(n, 0.1, 0.5).value - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn lemma_form_with_tail_bounds() {
        // Substituting P[M≥1] ≥ n v/e and P[M≥2] ≥ n² v²/(4e) (valid when n v ≤ 1)
        // gives 256e Σ w²/v² / (c n²) + 128e Σ w²/v / (c n), which dominates
        // the exact lemma value.
        let w = GroupWeights::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let v = weighted_marginal(&w, 2.0 / 3.0).unwrap();
        let n = 2u64;
        let nf = n as f64;
        let subst: Vec<Inclusion> = v
            .iter()
            .map(|x| Inclusion { at_least_one: nf * x / E, at_least_two: (nf * x).powi(2) / (4.0 * E) })
            .collect();
        let via_lemma = p_error_lemma(&w, &subst, 0.5, 0.5).unwrap().value;
        let c = 0.25 * 0.0625;
        let (q, l): (f64, f64) = w.iter().zip(v.iter()).fold((0.0, 0.0), |(q, l), (a, b)| (q + a * a / (b * b), l + a * a / b));
        let direct = 256.0 * E * q / (c * nf * nf) + 128.0 * E * l / (c * nf);
        assert!((via_lemma - direct).abs() < 1e-9 * direct);
        let exact: Vec<Inclusion> = v.iter().map(|x| binomial_inclusion(n, x)).collect();
        assert!(p_error_lemma(&w, &exact, 0.5, 0.5).unwrap().value <= via_lemma);
    }

    #[test]
    fn n_required_examples() {
        let p = BoundParams::new(uniform(4), 0.0, 0.5, 0.01).unwrap();
        let attr = n_required(NRequiredKind::Attr, &p);
        assert!((attr.value - 409_600.0).abs() < 1e-6);
        assert!(!attr.order_only);

        let lead = |k| n_weighted_opt(&BoundParams::new(uniform(k), 0.2, 0.3, 0.01).unwrap()).leading;
        assert!((lead(128) / lead(64) - 2f64.sqrt()).abs() < 1e-9);

        let p = BoundParams::new(uniform(256), 0.5, 0.1, 0.01).unwrap();
        let cv = n_required(NRequiredKind::ConverseCvar, &p);
        assert!(cv.order_only);
        assert!((cv.value - 0.25 * 16.0 / (0.5f64.sqrt() * 0.01)).abs() < 1e-9);
        let mg = n_required(NRequiredKind::ConverseMaxGap, &p);
        assert!(mg.order_only && (mg.value - 25_600.0).abs() < 1e-9);
    }

    #[test]
    fn weighted_size_meets_delta() {
        for k in [4usize, 64, 1024] {
            let p = BoundParams::new(uniform(k), 0.25, 0.3, 0.05).unwrap();
            let size = n_weighted_opt(&p);
            let n = size.value.ceil() as u64;
            let v = weighted_marginal(&p.weights, 2.0 / 3.0).unwrap();
            let b = p_error_weighted(&p.weights, &v, n, p.alpha, p.epsilon).unwrap();
            assert!(b.value <= p.delta + 1e-12);
            // The relaxed form (Σ w^{4/3} replaced by 1) equals δ at the root.
            let s: f64 = p.weights.iter().map(|x| x.powf(2.0 / 3.0)).sum();
            let c = scale(p.alpha, p.epsilon);
            let relaxed = 64.0 * E * s.powi(3) / (c * size.value.powi(2)) + 128.0 * E * s / (c * size.value);
            assert!((relaxed - p.delta).abs() < 1e-9 * p.delta);
            assert!(size.value >= size.leading && size.value >= size.second);
            assert!(size.value <= size.leading + size.second);
        }
    }

    #[test]
    fn weighted_overtakes_attr_as_k_grows() {
        let diff = |k| {
            let p = BoundParams::new(uniform(k), 0.0, 0.3, 0.01).unwrap();
            n_required(NRequiredKind::WeightedOpt, &p).value - n_required(NRequiredKind::Attr, &p).value
        };
        let ks: Vec<usize> = (0..24).map(|i| 1usize << i).collect();
        let d: Vec<f64> = ks.iter().map(|&k| diff(k)).collect();
        // 128e > 256, so the weighted size is already larger at K = 1.
        assert!(d[0] > 0.0);
        assert!(d.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn le_cam_examples() {
        assert_eq!(le_cam_error_floor(64, 0.25, 0), 0.5);
        let direct = (1.0 - (2.0 * (1.0 - (1.0 - 2.0 * 0.0625 / 64.0f64).powi(64))).sqrt()) / 2.0;
        assert!((le_cam_error_floor(64, 0.25, 64) - direct).abs() < 1e-12);
        let mut last = 0.5;
        for n in (0..5000).step_by(50) {
            let f = le_cam_error_floor(64, 0.25, n);
            assert!(f <= last + 1e-15 && f >= 0.0);
            last = f;
        }
        assert_eq!(le_cam_error_floor(4, 0.5, 1_000_000), 0.0);
    }

    #[test]
    fn le_cam_floor_above_quarter_below_k_over_16_eps2() {
        // (1 − x)ⁿ ≥ 1 − n x gives (1 − 2ε²/K)ⁿ ≥ 7/8 for n ≤ K/(16 ε²),
        // hence a floor of at least (1 − sqrt(1/4)) / 2 = 1/4.
        for k in [2usize, 8, 64, 512, 4096] {
            for eps in [0.05, 0.1, 0.25, 0.5] {
                let top = (k as f64 / (16.0 * eps * eps)).floor() as u64;
                for n in [1, top / 2, top].into_iter().filter(|&n| n >= 1 && n <= top) {
                    assert!(le_cam_error_floor(k, eps, n) >= 0.25 - 1e-12, "K={k} eps={eps} n={n}");
                }
            }
        }
    }

    #[test]
    fn report_builds() {
        let p = BoundParams::new(uniform(16), 0.5, 0.3, 0.01).unwrap();
        let r = BoundReport::new(&p).unwrap().at(&p, &[100, 10_000]).unwrap();
        assert!((r.renyi_23 - 4.0).abs() < 1e-12);
        assert_eq!(r.curve.len(), 2);
        assert!(r.n_converse_cvar.order_only && !r.n_attr.order_only);
        let r2 = BoundReport::new(&BoundParams::new(uniform(1024), 0.5, 0.3, 0.01).unwrap()).unwrap();
        assert_eq!(r.n_attr, r2.n_attr);
    }

    proptest! {
        #[test]
        fn report_entries_finite(raw in prop::collection::vec(0.01f64..1.0, 1..20), alpha in 0.0f64..0.99, eps in 0.01f64..1.0, delta in 0.001f64..0.5) {
            let p = BoundParams::new(GroupWeights::from_masses(&raw).unwrap(), alpha, eps, delta).unwrap();
            let r = BoundReport::new(&p).unwrap().at(&p, &[1, 100, 1 << 20]).unwrap();
            for x in [r.renyi_23, r.n_weighted.value, r.n_attr.value, r.n_converse_maxgap.value, r.n_converse_cvar.value] {
                prop_assert!(x.is_finite() && x >= 0.0);
            }
            prop_assert!(r.renyi_sqrt_term <= (r.k as f64).sqrt() * (1.0 + 1e-12));
        }
    }
}
