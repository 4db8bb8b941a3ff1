//! Exact fairness metrics of a known instance: average quality of service,
//! per-group gaps, max-gap, CVaR fairness, the recovery level `α*` and the
//! separation statistic that the test thresholds.

use std::cmp::Ordering;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::FairnessInstance;
use crate::error::{Error, Result};

/// Largest instance the exact subset search accepts.
pub const EXACT_SUBSET_MAX_GROUPS: usize = 25;
/// Slack on the mass budget when deciding whether a subset fits.
const BUDGET_SLACK: f64 = 1e-12;
/// Gaps closer than this are treated as tied in `alpha_star`.
const TIE_TOL: f64 = 1e-12;

/// How the tail maximization treats the boundary group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvarMode {
    /// Continuous relaxation: the last group may be taken fractionally.
    #[default]
    Fractional,
    /// Maximization over whole subsets only (small `K`).
    ExactSubset,
}

impl FromStr for CvarMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fractional" => Ok(CvarMode::Fractional),
            "exact" | "exact_subset" => Ok(CvarMode::ExactSubset),
            other => Err(Error::ConfigError(format!("unknown cvar mode `{other}`"))),
        }
    }
}

/// Per-group gaps `Δ(g) = |μ_g − L̄|` together with `L̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapVector {
    pub delta: Vec<f64>,
    pub lbar: f64,
}

/// `L̄ = Σ_g w_g μ_g`.
pub fn average_quality(inst: &FairnessInstance) -> f64 {
    inst.weights().iter().zip(inst.mu()).map(|(w, m)| w * m).sum()
}

pub fn gap_vector(inst: &FairnessInstance) -> GapVector {
    let lbar = average_quality(inst);
    GapVector { delta: inst.mu().iter().map(|m| (m - lbar).abs()).collect(), lbar }
}

pub fn max_gap(inst: &FairnessInstance) -> f64 {
    gap_vector(inst).delta.into_iter().fold(0.0, f64::max)
}

/// CVaR fairness at tail level `alpha ∈ [0, 1)`.
pub fn cvar_fairness(inst: &FairnessInstance, alpha: f64, mode: CvarMode) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let budget = 1.0 - alpha;
    let gaps = gap_vector(inst);
    let w = inst.weights().as_slice();
    let mass = match mode {
        CvarMode::Fractional => fractional_tail(w, &gaps.delta, budget),
        CvarMode::ExactSubset => exact_subset_tail(w, &gaps.delta, budget)?,
    };
    Ok(mass / budget)
}

/// Group indices ordered by gap, largest first; ties keep index order.
fn by_gap_desc(delta: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..delta.len()).collect();
    order.sort_by(|&a, &b| delta[b].partial_cmp(&delta[a]).unwrap_or(Ordering::Equal));
    order
}

/// Greedy fractional knapsack where each group's value density is its gap.
fn fractional_tail(w: &[f64], delta: &[f64], budget: f64) -> f64 {
    let mut left = budget;
    let mut total = 0.0;
    for g in by_gap_desc(delta) {
        if left <= 0.0 {
            break;
        }
        let take = w[g].min(left);
        total += take * delta[g];
        left -= take;
    }
    total
}

/// Best `Σ_Q w_g Δ(g)` over subsets with `Σ_Q w_g ≤ budget`, by depth-first
/// search pruned with the fractional relaxation.
fn exact_subset_tail(w: &[f64], delta: &[f64], budget: f64) -> Result<f64> {
    if w.len() > EXACT_SUBSET_MAX_GROUPS {
        return Err(Error::InstanceTooLarge(format!(
            "exact subset CVaR supports at most {EXACT_SUBSET_MAX_GROUPS} groups, got {}",
            w.len()
        )));
    }
    let items: Vec<(f64, f64)> = by_gap_desc(delta)
        .into_iter()
        .filter(|&g| w[g] > 0.0 && delta[g] > 0.0)
        .map(|g| (w[g], delta[g]))
        .collect();

    struct Search<'a> {
        items: &'a [(f64, f64)],
        cap: f64,
        best: f64,
    }

    impl Search<'_> {
        fn relaxed(&self, from: usize, mut left: f64) -> f64 {
            let mut v = 0.0;
            for &(w, d) in &self.items[from..] {
                if left <= 0.0 {
                    break;
                }
                let take = w.min(left);
                v += take * d;
                left -= take;
            }
            v
        }

        fn go(&mut self, i: usize, used: f64, value: f64) {
            if value > self.best {
                self.best = value;
            }
            if i == self.items.len() || value + self.relaxed(i, self.cap - used) <= self.best {
                return;
            }
            let (w, d) = self.items[i];
            if used + w <= self.cap {
                self.go(i + 1, used + w, value + w * d);
            }
            self.go(i + 1, used, value);
        }
    }

    let mut s = Search { items: &items, cap: budget + BUDGET_SLACK, best: 0.0 };
    s.go(0, 0.0, 0.0);
    Ok(s.best)
}

/// `α* = 1 − w_{g*}` for a supported group `g*` of largest gap; among tied
/// groups the lightest one is chosen.
pub fn alpha_star(inst: &FairnessInstance) -> f64 {
    let gaps = gap_vector(inst);
    let w = inst.weights().as_slice();
    let top = (0..w.len())
        .filter(|&g| w[g] > 0.0)
        .map(|g| gaps.delta[g])
        .fold(f64::NEG_INFINITY, f64::max);
    let lightest = (0..w.len())
        .filter(|&g| w[g] > 0.0 && gaps.delta[g] >= top - TIE_TOL)
        .map(|g| w[g])
        .fold(f64::INFINITY, f64::min);
    1.0 - lightest
}

/// `D = Σ_g w_g μ_g² − L̄²`, evaluated as the equivalent `Σ_g w_g Δ(g)²`
/// so that it is never negative.
pub fn separation_statistic(inst: &FairnessInstance) -> f64 {
    let gaps = gap_vector(inst);
    inst.weights().iter().zip(&gaps.delta).map(|(w, d)| w * d * d).sum()
}
