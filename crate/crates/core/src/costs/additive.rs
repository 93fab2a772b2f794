use super::{
    check_costs, check_epsilon, check_ids, split_epsilon, CostModel, Cover, OracleGuarantee,
    RatioChoice, RatioOracle, ValueOracle,
};
use crate::cmp::improves;
use crate::error::{Result, SstError};
use crate::exact::{ExactSolveResult, ResidualCosts};
use crate::instance::{BatchSequence, Instance};
use crate::quota::{ratio_from_quota, rewards, BicriteriaSolver, QuotaAnswer};
use crate::set::TestSet;

/// `c(S) = sum_{i in S} c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveCost {
    costs: Vec<f64>,
}

impl AdditiveCost {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        check_costs(&costs, "costs")?;
        if costs.is_empty() {
            return Err(SstError::input("additive model needs at least one test"));
        }
        Ok(Self { costs })
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn cost(&self, set: &TestSet) -> f64 {
        set.iter().map(|i| self.costs[i]).sum()
    }
}

impl ValueOracle for AdditiveCost {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        check_ids(set, self.costs.len())?;
        Ok(Cover::single(set.clone(), self.cost(set)))
    }
}

impl RatioOracle for AdditiveCost {
    /// The best singleton is optimal: `1 - P(B) <= sum q_i`, and a sum of
    /// ratios is never below its smallest term.
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        check_ids(residual, self.costs.len())?;
        let q = instance.fail_probs();
        let mut best: Option<(usize, f64)> = None;
        for i in residual {
            let ratio = self.costs[i] / q[i];
            if best.map_or(true, |(_, b)| improves(ratio, b)) {
                best = Some((i, ratio));
            }
        }
        let (i, _) = best.ok_or_else(|| SstError::input("empty residual"))?;
        Ok(RatioChoice {
            batch: TestSet::singleton(i),
            cost_bound: self.costs[i],
        })
    }
}

impl CostModel for AdditiveCost {
    fn name(&self) -> &'static str {
        "additive"
    }

    fn num_tests(&self) -> usize {
        self.costs.len()
    }

    fn guarantee(&self) -> OracleGuarantee {
        OracleGuarantee::EXACT
    }

    fn exact_cost(&self, set: &TestSet) -> Result<f64> {
        check_ids(set, self.costs.len())?;
        Ok(self.cost(set))
    }

    /// Singletons in increasing `c_i / q_i` order are optimal at any size.
    fn exact_optimum(&self, instance: &Instance) -> Result<ExactSolveResult> {
        let q = instance.fail_probs();
        let p = instance.pass_probs();
        let mut order: Vec<usize> = (0..instance.n()).collect();
        order.sort_by(|&a, &b| {
            (self.costs[a] / q[a])
                .total_cmp(&(self.costs[b] / q[b]))
                .then(a.cmp(&b))
        });
        let mut suffix = vec![0.0; order.len() + 1];
        for k in (0..order.len()).rev() {
            let i = order[k];
            suffix[k] = self.costs[i] + p[i] * suffix[k + 1];
        }
        let residual_costs = (0..=order.len())
            .map(|k| (order[k..].iter().copied().collect(), suffix[k]))
            .collect();
        Ok(ExactSolveResult {
            opt_cost: suffix[0],
            opt_sequence: BatchSequence::new(order.iter().map(|&i| TestSet::singleton(i)).collect()),
            residual_costs: ResidualCosts::Sparse(residual_costs),
        })
    }
}

/// `c(S) = setup + sum_{i in S} c_i` for nonempty `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSetupCost {
    setup: f64,
    items: AdditiveCost,
    eps: f64,
}

impl BatchSetupCost {
    pub fn new(setup: f64, costs: Vec<f64>, eps: f64) -> Result<Self> {
        check_costs(&[setup], "setup")?;
        check_epsilon(eps)?;
        Ok(Self {
            setup,
            items: AdditiveCost::new(costs)?,
            eps,
        })
    }

    pub fn setup(&self) -> f64 {
        self.setup
    }

    pub fn costs(&self) -> &[f64] {
        self.items.costs()
    }

    pub fn cost(&self, set: &TestSet) -> f64 {
        if set.is_empty() {
            0.0
        } else {
            self.setup + self.items.cost(set)
        }
    }

    /// Grid and rounding each get one multiplicative share of `1 + eps`.
    fn shares(&self) -> (f64, f64) {
        let grid = split_epsilon(self.eps, 2);
        (grid, 1.0 - 1.0 / (1.0 + grid))
    }
}

impl ValueOracle for BatchSetupCost {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        check_ids(set, self.items.costs.len())?;
        Ok(Cover::single(set.clone(), self.cost(set)))
    }
}

impl RatioOracle for BatchSetupCost {
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        check_ids(residual, self.items.costs.len())?;
        let (grid_eps, round_eps) = self.shares();
        let solver = KnapsackQuotaSolver::new(
            residual,
            &rewards(instance),
            self.items.costs(),
            self.setup,
            round_eps,
        )?;
        let r = ratio_from_quota(instance, residual, &solver, grid_eps)?;
        Ok(RatioChoice {
            batch: r.batch,
            cost_bound: r.cost_bound,
        })
    }
}

impl CostModel for BatchSetupCost {
    fn name(&self) -> &'static str {
        "batch_setup"
    }

    fn num_tests(&self) -> usize {
        self.items.costs.len()
    }

    fn guarantee(&self) -> OracleGuarantee {
        OracleGuarantee {
            gamma: 1.0,
            rho: 1.0 + self.eps,
        }
    }

    fn exact_cost(&self, set: &TestSet) -> Result<f64> {
        check_ids(set, self.items.costs.len())?;
        Ok(self.cost(set))
    }
}

/// Quota solver for `setup + sum c_i` by rounding rewards down to multiples
/// of `eps Q / m` and running a min-cost knapsack DP over the units.
///
/// Never more expensive than the cheapest set meeting the quota
/// (`alpha = 1`), and earns at least `(1 - eps) Q` (`beta = 1 / (1 - eps)`).
pub struct KnapsackQuotaSolver {
    ground: TestSet,
    rewards: Vec<f64>,
    costs: Vec<f64>,
    setup: f64,
    eps: f64,
}

impl KnapsackQuotaSolver {
    pub fn new(
        ground: &TestSet,
        rewards: &[f64],
        costs: &[f64],
        setup: f64,
        eps: f64,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(SstError::input(format!("rounding epsilon {eps} must lie in (0, 1)")));
        }
        check_ids(ground, rewards.len().min(costs.len()))?;
        Ok(Self {
            ground: ground.clone(),
            rewards: ground.iter().map(|i| rewards[i]).collect(),
            costs: ground.iter().map(|i| costs[i]).collect(),
            setup,
            eps,
        })
    }
}

impl BicriteriaSolver for KnapsackQuotaSolver {
    fn alpha(&self) -> f64 {
        1.0
    }

    fn beta(&self) -> f64 {
        1.0 / (1.0 - self.eps)
    }

    fn ground(&self) -> &TestSet {
        &self.ground
    }

    fn solve(&self, quota: f64) -> Result<Option<QuotaAnswer>> {
        let m = self.ground.len();
        if quota <= 0.0 {
            return Ok(Some(QuotaAnswer {
                set: TestSet::new(),
                cost_bound: 0.0,
            }));
        }
        if self.rewards.iter().sum::<f64>() < quota {
            return Ok(None);
        }
        let unit = self.eps * quota / m as f64;
        let target = ((quota / unit).ceil() as usize).saturating_sub(m).max(1);
        let units: Vec<usize> = self
            .rewards
            .iter()
            .map(|r| ((r / unit).floor() as usize).min(target))
            .collect();
        // best[k][u]: min cost using items < k reaching min(u, target) units
        let inf = f64::INFINITY;
        let mut best = vec![vec![inf; target + 1]; m + 1];
        best[0][0] = 0.0;
        for k in 0..m {
            for u in 0..=target {
                let skip = best[k][u];
                if skip < best[k + 1][u] {
                    best[k + 1][u] = skip;
                }
                if skip < inf {
                    let to = (u + units[k]).min(target);
                    let take = skip + self.costs[k];
                    if take < best[k + 1][to] {
                        best[k + 1][to] = take;
                    }
                }
            }
        }
        if best[m][target] == inf {
            return Ok(None);
        }
        let mut picked = Vec::new();
        let mut u = target;
        for k in (0..m).rev() {
            if best[k][u] == best[k + 1][u] {
                continue;
            }
            let prev = (0..=u).find(|&v| {
                best[k][v] < inf
                    && (v + units[k]).min(target) == u
                    && best[k][v] + self.costs[k] == best[k + 1][u]
            });
            match prev {
                Some(v) => {
                    picked.push(k);
                    u = v;
                }
                None => return Err(SstError::contract("knapsack backtrack failed")),
            }
        }
        let cost_bound = if picked.is_empty() {
            0.0
        } else {
            self.setup + picked.iter().map(|&k| self.costs[k]).sum::<f64>()
        };
        let set = picked.iter().map(|&k| self.ground.as_slice()[k]).collect();
        Ok(Some(QuotaAnswer { set, cost_bound }))
    }
}
