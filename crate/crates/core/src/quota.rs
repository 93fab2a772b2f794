//! Linearized view of the ratio problem.
//!
//! With rewards `r_i = -ln p_i` the failure probability of a batch is
//! `d(r(B)) = 1 - exp(-r(B))`, so the ratio `c(B) / (1 - P(B))` can be
//! approximated by solving a covering problem "cheapest set with reward at
//! least `Q`" on a geometric grid of quotas.

use crate::cmp::improves;
use crate::error::{Result, SstError};
use crate::instance::Instance;
use crate::set::{SubsetIndex, TestSet};
use serde::Serialize;

/// Slack allowed when checking a solver's reward guarantee.
const REWARD_SLACK: f64 = 1e-12;

/// `d(x) = 1 - e^{-x}`.
pub fn d(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// `r_i = -ln p_i`, computed from `q_i` so that tiny failure probabilities keep their precision.
pub fn rewards(instance: &Instance) -> Vec<f64> {
    instance.fail_probs().iter().map(|q| -(-q).ln_1p()).collect()
}

pub fn reward_of(rewards: &[f64], set: &TestSet) -> f64 {
    set.iter().map(|i| rewards[i]).sum()
}

/// `c(B) / d(r(B))`.
pub fn ratio_value(instance: &Instance, batch: &TestSet, cost: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(SstError::input("ratio of an empty batch is undefined"));
    }
    let r = -instance.log_pass_prob(batch)?;
    Ok(cost / d(r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotaAnswer {
    pub set: TestSet,
    /// Certified upper bound on the cost of `set`.
    pub cost_bound: f64,
}

/// An `(alpha, beta)`-bicriteria quota solver bound to one ground set:
/// the answer costs at most `alpha` times the cheapest set meeting the quota,
/// and earns at least `quota / beta`.
pub trait BicriteriaSolver {
    fn alpha(&self) -> f64;

    fn beta(&self) -> f64;

    fn ground(&self) -> &TestSet;

    /// `Ok(None)` when no subset of the ground set reaches the quota.
    fn solve(&self, quota: f64) -> Result<Option<QuotaAnswer>>;
}

/// Exhaustive quota solver over a precomputed cost table (`alpha = beta = 1`).
pub struct ExactQuotaSolver {
    ground: TestSet,
    /// (reward, cost, mask) sorted by reward.
    by_reward: Vec<(f64, f64, u32)>,
    /// suffix_best[i]: index into by_reward of the cheapest entry at position >= i.
    suffix_best: Vec<usize>,
    idx: SubsetIndex,
}

impl ExactQuotaSolver {
    pub fn new(ground: &TestSet, rewards: &[f64], cost: impl Fn(&TestSet) -> f64) -> Result<Self> {
        let table = crate::exact::cost_table(ground, cost)?;
        Self::from_table(ground, rewards, table)
    }

    /// `table` is indexed by local mask over `ground`.
    pub fn from_table(ground: &TestSet, rewards: &[f64], table: Vec<f64>) -> Result<Self> {
        let idx = SubsetIndex::new(ground);
        crate::costs::check_exact_width(idx.width())?;
        if ground.max_id().is_some_and(|m| m >= rewards.len()) {
            return Err(SstError::input("reward vector shorter than the ground set"));
        }
        let mut reward = vec![0.0; table.len()];
        for m in 1..table.len() {
            let low = m.trailing_zeros() as usize;
            reward[m] = reward[m & (m - 1)] + rewards[idx.id(low)];
        }
        let mut by_reward: Vec<(f64, f64, u32)> = (0..table.len())
            .map(|m| (reward[m], table[m], m as u32))
            .collect();
        by_reward.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut suffix_best = vec![0; by_reward.len()];
        for i in (0..by_reward.len()).rev() {
            suffix_best[i] = if i + 1 < by_reward.len() {
                let j = suffix_best[i + 1];
                let (ci, cj) = (by_reward[i].1, by_reward[j].1);
                if ci < cj || (ci == cj && by_reward[i].2 < by_reward[j].2) {
                    i
                } else {
                    j
                }
            } else {
                i
            };
        }
        Ok(Self {
            ground: ground.clone(),
            by_reward,
            suffix_best,
            idx,
        })
    }
}

impl BicriteriaSolver for ExactQuotaSolver {
    fn alpha(&self) -> f64 {
        1.0
    }

    fn beta(&self) -> f64 {
        1.0
    }

    fn ground(&self) -> &TestSet {
        &self.ground
    }

    fn solve(&self, quota: f64) -> Result<Option<QuotaAnswer>> {
        let start = self.by_reward.partition_point(|e| e.0 < quota);
        if start == self.by_reward.len() {
            return Ok(None);
        }
        let (_, cost, mask) = self.by_reward[self.suffix_best[start]];
        Ok(Some(QuotaAnswer {
            set: self.idx.to_set(mask),
            cost_bound: cost,
        }))
    }
}

/// Quotas `r_min (1 + eps)^i` for `i = 0..=L`, where `L` is the first
/// exponent reaching `r_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotaGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub quotas: Vec<f64>,
}

impl QuotaGrid {
    pub fn new(instance: &Instance, ground: &TestSet, eps: f64) -> Result<Self> {
        crate::costs::check_epsilon(eps)?;
        if ground.is_empty() {
            return Err(SstError::input("quota grid needs a nonempty ground set"));
        }
        crate::costs::check_ids(ground, instance.n())?;
        let q = instance.fail_probs();
        let r = rewards(instance);
        let r_min = ground.iter().map(|i| q[i]).fold(f64::INFINITY, f64::min);
        let r_max = reward_of(&r, ground);
        let steps = ((r_max / r_min).ln() / eps.ln_1p()).ceil().max(0.0) as usize;
        let mut quotas = Vec::with_capacity(steps + 1);
        let mut qv = r_min;
        for _ in 0..=steps {
            quotas.push(qv);
            qv *= 1.0 + eps;
        }
        Ok(Self {
            r_min,
            r_max,
            quotas,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotaRatio {
    pub batch: TestSet,
    /// `cost_bound / (1 - P(batch))`.
    pub ratio: f64,
    pub cost_bound: f64,
}

/// Ratio oracle assembled from a bicriteria quota solver: solve at every
/// grid quota and keep the candidate with the smallest ratio.
///
/// Every answer is audited: it must lie in `residual`, be nonempty, and earn
/// at least `quota / beta`.
pub fn ratio_from_quota(
    instance: &Instance,
    residual: &TestSet,
    solver: &impl BicriteriaSolver,
    eps: f64,
) -> Result<QuotaRatio> {
    let grid = QuotaGrid::new(instance, residual, eps)?;
    if !solver.ground().is_subset(residual) || !residual.is_subset(solver.ground()) {
        return Err(SstError::input("quota solver is bound to a different ground set"));
    }
    let r = rewards(instance);
    let beta = solver.beta();
    let mut best: Option<QuotaRatio> = None;
    for &quota in &grid.quotas {
        let Some(ans) = solver.solve(quota)? else {
            continue;
        };
        if !ans.set.is_subset(residual) {
            return Err(SstError::contract(format!(
                "quota solver returned {} outside {residual}",
                ans.set
            )));
        }
        let earned = reward_of(&r, &ans.set);
        if earned < quota / beta * (1.0 - REWARD_SLACK) || ans.set.is_empty() {
            return Err(SstError::contract(format!(
                "quota solver earned {earned} at quota {quota} with beta = {beta}"
            )));
        }
        if !(ans.cost_bound.is_finite() && ans.cost_bound >= 0.0) {
            return Err(SstError::contract(format!(
                "quota solver returned cost bound {}",
                ans.cost_bound
            )));
        }
        let ratio = ratio_value(instance, &ans.set, ans.cost_bound)?;
        if best.as_ref().map_or(true, |b| improves(ratio, b.ratio)) {
            best = Some(QuotaRatio {
                batch: ans.set,
                ratio,
                cost_bound: ans.cost_bound,
            });
        }
    }
    best.ok_or_else(|| SstError::contract("quota solver was infeasible at every grid quota"))
}
