//! Cost models. Each one packages a value oracle and a ratio oracle together
//! with the approximation factors it can vouch for.

mod additive;
mod concave;
mod machines;
mod routing;
mod spec;
mod tree;

pub use additive::{AdditiveCost, BatchSetupCost, KnapsackQuotaSolver};
pub use concave::ConcaveCardinalityCost;
pub use machines::{exact_set_cover, greedy_set_cover, Machine, MachineActivationCost};
pub use routing::{double_mst_tour, held_karp_tours, RoutingCost, RoutingQuotaSolver};
pub use spec::CostModelSpec;
pub use tree::{CapacitatedTreeCost, TreeCost, TreeNodeSpec, TreeQuotaSolver};

use crate::error::{Result, SstError};
use crate::exact::{self, ExactSolveResult};
use crate::instance::{BatchFamily, Instance};
use crate::set::{SubsetIndex, TestSet};
use serde::Serialize;

/// Output of a value oracle: family batches covering the request, and their total cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cover {
    pub bound: f64,
    pub batches: Vec<TestSet>,
}

impl Cover {
    pub fn empty() -> Self {
        Self {
            bound: 0.0,
            batches: Vec::new(),
        }
    }

    pub fn single(set: TestSet, cost: f64) -> Self {
        if set.is_empty() {
            return Self::empty();
        }
        Self {
            bound: cost,
            batches: vec![set],
        }
    }

    pub fn covers(&self, set: &TestSet) -> bool {
        set.iter().all(|t| self.batches.iter().any(|b| b.contains(t)))
    }

    /// Splits the covered set into disjoint pieces, each a subset of one cover batch.
    pub fn disjoint_pieces(&self, set: &TestSet) -> Vec<TestSet> {
        let mut left = set.clone();
        let mut pieces = Vec::new();
        for b in &self.batches {
            let piece = left.intersection(b);
            if !piece.is_empty() {
                left = left.difference(&piece);
                pieces.push(piece);
            }
        }
        pieces
    }
}

/// Output of a ratio oracle: a batch and a certified upper bound on its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioChoice {
    pub batch: TestSet,
    pub cost_bound: f64,
}

/// Covers any test subset by allowed batches, within factor gamma of `c(S)`.
pub trait ValueOracle {
    fn cover(&self, set: &TestSet) -> Result<Cover>;
}

/// Finds a batch inside `residual` whose cost-to-failure-probability ratio is
/// within factor rho of the minimum.
pub trait RatioOracle {
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice>;
}

/// Declared oracle factors. `f64::INFINITY` marks a factor with no audited guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleGuarantee {
    pub gamma: f64,
    pub rho: f64,
}

impl OracleGuarantee {
    pub const EXACT: Self = Self {
        gamma: 1.0,
        rho: 1.0,
    };

    /// `4 rho + gamma`.
    pub fn implied_bound(&self) -> f64 {
        4.0 * self.rho + self.gamma
    }
}

pub trait CostModel: ValueOracle + RatioOracle + Send + Sync {
    fn name(&self) -> &'static str;

    fn num_tests(&self) -> usize;

    fn guarantee(&self) -> OracleGuarantee;

    fn family(&self) -> BatchFamily {
        BatchFamily::All
    }

    /// The true cover cost `c(S)`; may refuse with a capacity error.
    fn exact_cost(&self, set: &TestSet) -> Result<f64>;

    /// `c` on every subset of `ground`, indexed by local mask.
    fn cost_table(&self, ground: &TestSet) -> Result<Vec<f64>> {
        let idx = SubsetIndex::new(ground);
        check_exact_width(idx.width())?;
        (0..=idx.full_mask())
            .map(|m| self.exact_cost(&idx.to_set(m)))
            .collect()
    }

    fn exact_optimum(&self, instance: &Instance) -> Result<ExactSolveResult> {
        let table = self.cost_table(&instance.all_tests())?;
        let family = effective_family(self.family(), instance);
        exact::exact_sst_table(instance, &table, |m| {
            family.admits_size(m.count_ones() as usize)
        })
    }
}

/// The model's own family when it has one, otherwise the instance's.
pub fn effective_family(model: BatchFamily, instance: &Instance) -> BatchFamily {
    match model {
        BatchFamily::All => instance.family(),
        own => own,
    }
}

pub(crate) fn check_exact_width(width: usize) -> Result<()> {
    if width > exact::EXACT_LIMIT {
        return Err(SstError::capacity(
            "ground set size for exhaustive enumeration",
            exact::EXACT_LIMIT,
            width,
        ));
    }
    Ok(())
}

pub(crate) fn check_ids(set: &TestSet, n: usize) -> Result<()> {
    match set.max_id() {
        Some(id) if id >= n => Err(SstError::input(format!(
            "test id {id} out of range for n = {n}"
        ))),
        _ => Ok(()),
    }
}

/// Splits a net approximation factor `1 + eps` into `parts` equal multiplicative shares.
pub fn split_epsilon(eps: f64, parts: u32) -> f64 {
    (1.0 + eps).powf(1.0 / parts as f64) - 1.0
}

pub(crate) fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SstError::input(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

pub(crate) fn check_costs(costs: &[f64], what: &str) -> Result<()> {
    match costs.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
        Some(i) => Err(SstError::input(format!(
            "{what}[{i}] = {} must be finite and nonnegative",
            costs[i]
        ))),
        None => Ok(()),
    }
}

impl<T: ValueOracle + ?Sized> ValueOracle for &T {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        (**self).cover(set)
    }
}

impl<T: RatioOracle + ?Sized> RatioOracle for &T {
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        (**self).min_ratio(instance, residual)
    }
}

impl<T: ValueOracle + ?Sized> ValueOracle for Box<T> {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        (**self).cover(set)
    }
}

impl<T: RatioOracle + ?Sized> RatioOracle for Box<T> {
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        (**self).min_ratio(instance, residual)
    }
}
