//! Domain types shared by every module: group weights, population instances,
//! audit samples and the metric that turns raw records into loss bits.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the weight sum that is accepted as-is.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Largest deviation of the weight sum that is silently renormalized.
pub const WEIGHT_RENORM_TOL: f64 = 1e-9;

/// A probability vector over groups `0..K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GroupWeights {
    w: Vec<f64>,
}

impl GroupWeights {
    /// Validates `w`. Sums off by at most `1e-9` are renormalized; anything
    /// further from one is rejected.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidWeights("at least one group is required".into()));
        }
        if let Some((g, x)) = w.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidWeights(format!("weight of group {g} is {x}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_RENORM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        let w = if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            w.into_iter().map(|x| x / sum).collect()
        } else {
            w
        };
        Ok(Self { w })
    }

    /// Uniform weights `1/K` over `k` groups.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidWeights("at least one group is required".into()));
        }
        Ok(Self { w: vec![1.0 / k as f64; k] })
    }

    /// Normalizes arbitrary non-negative masses (for example group counts).
    pub fn from_masses(m: &[f64]) -> Result<Self> {
        let total: f64 = m.iter().sum();
        if !(total > 0.0) || m.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidWeights("masses must be non-negative with a positive total".into()));
        }
        Self::new(m.iter().map(|x| x / total).collect())
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn get(&self, g: usize) -> f64 {
        self.w[g]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.w.iter().copied()
    }

    /// True when every group carries the same mass (to within `1e-12`).
    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.w.len() as f64;
        self.w.iter().all(|x| (x - u).abs() <= WEIGHT_SUM_TOL)
    }
}

impl TryFrom<Vec<f64>> for GroupWeights {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<GroupWeights> for Vec<f64> {
    fn from(w: GroupWeights) -> Self {
        w.w
    }
}

/// Ground truth of a population: group weights and per-group Bernoulli
/// means of the binary loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessInstance {
    weights: GroupWeights,
    mu: Vec<f64>,
}

impl FairnessInstance {
    pub fn new(weights: GroupWeights, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != weights.len() {
            return Err(Error::InvalidInstance(format!(
                "{} means for {} groups",
                mu.len(),
                weights.len()
            )));
        }
        if let Some((g, m)) = mu.iter().enumerate().find(|(_, m)| !(0.0..=1.0).contains(*m)) {
            return Err(Error::InvalidInstance(format!("mean of group {g} is {m}, outside [0, 1]")));
        }
        Ok(Self { weights, mu })
    }

    pub fn weights(&self) -> &GroupWeights {
        &self.weights
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn num_groups(&self) -> usize {
        self.mu.len()
    }
}

/// One audited observation: the group and its loss bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuditSample {
    pub group: usize,
    pub loss: bool,
}

/// Which conditional distribution the loss `1{ŷ = 1}` is evaluated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Rows with `y = 0` only.
    EqualOpportunity,
    /// All rows.
    StatisticalParity,
}

impl MetricKind {
    pub fn short_name(self) -> &'static str {
        match self {
            MetricKind::EqualOpportunity => "eo",
            MetricKind::StatisticalParity => "sp",
        }
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eo" | "equal_opportunity" => Ok(MetricKind::EqualOpportunity),
            "sp" | "statistical_parity" => Ok(MetricKind::StatisticalParity),
            other => Err(Error::ConfigError(format!("unknown metric `{other}` (expected eo or sp)"))),
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

/// A raw labelled prediction. `features` is carried along untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub group: usize,
    pub label: bool,
    pub prediction: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<String>,
}

impl RawRecord {
    pub fn new(group: usize, label: bool, prediction: bool) -> Self {
        Self { group, label, prediction, features: None }
    }
}

/// Applies the metric's conditioning and maps every kept row to `loss = ŷ`.
pub fn records_to_samples(records: &[RawRecord], kind: MetricKind) -> Result<Vec<AuditSample>> {
    let out: Vec<AuditSample> = records
        .iter()
        .filter(|r| match kind {
            MetricKind::EqualOpportunity => !r.label,
            MetricKind::StatisticalParity => true,
        })
        .map(|r| AuditSample { group: r.group, loss: r.prediction })
        .collect();
    if out.is_empty() {
        return Err(Error::EmptyAfterConditioning);
    }
    Ok(out)
}

/// Plug-in instance: per-group sample means under the given weights.
pub fn empirical_instance(samples: &[AuditSample], weights: &GroupWeights) -> Result<FairnessInstance> {
    let k = weights.len();
    let mut count = vec![0u64; k];
    let mut ones = vec![0u64; k];
    for s in samples {
        if s.group >= k {
            return Err(Error::InvalidSample(format!("group {} out of range for {k} groups", s.group)));
        }
        count[s.group] += 1;
        ones[s.group] += u64::from(s.loss);
    }
    let missing: Vec<usize> = (0..k).filter(|&g| weights.get(g) > 0.0 && count[g] == 0).collect();
    if !missing.is_empty() {
        return Err(Error::MissingGroup(missing));
    }
    let mu = count
        .iter()
        .zip(&ones)
        .map(|(&c, &o)| if c == 0 { 0.0 } else { o as f64 / c as f64 })
        .collect();
    FairnessInstance::new(weights.clone(), mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(group: usize, loss: bool) -> AuditSample {
        AuditSample { group, loss }
    }

    #[test]
    fn weights_validation() {
        assert!(GroupWeights::new(vec![]).is_err());
        assert!(GroupWeights::new(vec![0.5, -0.1, 0.6]).is_err());
        assert!(GroupWeights::new(vec![0.5, 0.6]).is_err());
        let w = GroupWeights::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        let w = GroupWeights::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(w.as_slice(), &[0.3, 0.7]);
        assert!(GroupWeights::uniform(4).unwrap().is_uniform());
        assert!(!w.is_uniform());
    }

    #[test]
    fn weights_serde_validates() {
        let w: GroupWeights = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(w.as_slice(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<GroupWeights>("[0.25,0.25]").is_err());
    }

    #[test]
    fn instance_validation() {
        let w = GroupWeights::uniform(2).unwrap();
        assert!(FairnessInstance::new(w.clone(), vec![0.5]).is_err());
        assert!(FairnessInstance::new(w.clone(), vec![0.5, 1.5]).is_err());
        assert!(FairnessInstance::new(w, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn eo_keeps_negatives_only() {
        let recs = [RawRecord::new(0, false, true), RawRecord::new(0, true, true)];
        assert_eq!(records_to_samples(&recs, MetricKind::EqualOpportunity).unwrap(), vec![s(0, true)]);
    }

    #[test]
    fn sp_keeps_everything() {
        let recs = [RawRecord::new(1, true, false)];
        assert_eq!(records_to_samples(&recs, MetricKind::StatisticalParity).unwrap(), vec![s(1, false)]);
    }

    #[test]
    fn eo_with_no_negatives_is_empty() {
        let recs = [RawRecord::new(0, true, true)];
        assert_eq!(
            records_to_samples(&recs, MetricKind::EqualOpportunity),
            Err(Error::EmptyAfterConditioning)
        );
    }

    #[test]
    fn empirical_means() {
        let w = GroupWeights::new(vec![1.0]).unwrap();
        let inst = empirical_instance(&[s(0, true), s(0, true), s(0, false)], &w).unwrap();
        assert!((inst.mu()[0] - 2.0 / 3.0).abs() < 1e-15);

        let w = GroupWeights::uniform(2).unwrap();
        let inst = empirical_instance(&[s(0, false), s(1, true)], &w).unwrap();
        assert_eq!(inst.mu(), &[0.0, 1.0]);

        assert_eq!(empirical_instance(&[s(0, true)], &w), Err(Error::MissingGroup(vec![1])));
    }

    #[test]
    fn empirical_skips_zero_weight_groups() {
        let w = GroupWeights::new(vec![1.0, 0.0]).unwrap();
        let inst = empirical_instance(&[s(0, true)], &w).unwrap();
        assert_eq!(inst.mu(), &[1.0, 0.0]);
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("EO".parse::<MetricKind>().unwrap(), MetricKind::EqualOpportunity);
        assert_eq!("sp".parse::<MetricKind>().unwrap(), MetricKind::StatisticalParity);
        assert!("xx".parse::<MetricKind>().is_err());
    }

    proptest! {
        #[test]
        fn conditioning_preserves_counts(rows in prop::collection::vec((0usize..4, any::<bool>(), any::<bool>()), 1..60)) {
            let recs: Vec<RawRecord> = rows.iter().map(|&(g, y, p)| RawRecord::new(g, y, p)).collect();
            let sp = records_to_samples(&recs, MetricKind::StatisticalParity).unwrap();
            prop_assert_eq!(sp.len(), recs.len());
            let negatives = recs.iter().filter(|r| !r.label).count();
            match records_to_samples(&recs, MetricKind::EqualOpportunity) {
                Ok(eo) => prop_assert_eq!(eo.len(), negatives),
                Err(e) => {
                    prop_assert_eq!(negatives, 0);
                    prop_assert_eq!(e, Error::EmptyAfterConditioning);
                }
            }
        }

        #[test]
        fn normalized_weights_sum_to_one(raw in prop::collection::vec(0.0f64..10.0, 1..12)) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let w = GroupWeights::from_masses(&raw).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(w.iter().all(|x| x >= 0.0));
        }
    }
}
