//! Minimum sum set cover: the greedy engine, its price accounting, and the
//! outcome-vector construction that turns a testing instance into MSSC.

use crate::cmp::improves;
use crate::error::{Result, SstError};
use crate::instance::Instance;
use crate::set::{SubsetIndex, TestSet};
use serde::{Deserialize, Serialize};

pub const MSSC_FROM_SST_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsscSet {
    pub members: Vec<usize>,
    pub cost: f64,
}

impl MsscSet {
    pub fn new(mut members: Vec<usize>, cost: f64) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { members, cost }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsscInstance {
    pub weights: Vec<f64>,
    pub sets: Vec<MsscSet>,
}

impl MsscInstance {
    pub fn new(weights: Vec<f64>, sets: Vec<MsscSet>) -> Result<Self> {
        let inst = Self { weights, sets };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        crate::costs::check_costs(&self.weights, "weights")?;
        for (i, s) in self.sets.iter().enumerate() {
            if !(s.cost.is_finite() && s.cost >= 0.0) {
                return Err(SstError::input(format!(
                    "sets[{i}].cost = {} must be finite and nonnegative",
                    s.cost
                )));
            }
            if let Some(&e) = s.members.iter().find(|&&e| e >= self.weights.len()) {
                return Err(SstError::input(format!(
                    "sets[{i}] contains unknown element {e}"
                )));
            }
        }
        self.check_coverable()
    }

    pub fn check_coverable(&self) -> Result<()> {
        let mut covered = vec![false; self.weights.len()];
        for s in &self.sets {
            for &e in &s.members {
                if let Some(c) = covered.get_mut(e) {
                    *c = true;
                }
            }
        }
        match covered.iter().position(|c| !c) {
            Some(e) => Err(SstError::input(format!("element {e} belongs to no set"))),
            None => Ok(()),
        }
    }

    pub fn num_elements(&self) -> usize {
        self.weights.len()
    }

    fn marginal(&self, set: usize, uncovered: &[bool]) -> f64 {
        self.sets[set]
            .members
            .iter()
            .filter(|&&e| uncovered[e])
            .map(|&e| self.weights[e])
            .sum()
    }

    /// Objective of an arbitrary set order; elements it never covers must have zero weight.
    pub fn objective(&self, order: &[usize]) -> Result<f64> {
        let sol = MsscSolution::evaluate(self, order.to_vec())?;
        Ok(sol.objective)
    }
}

/// Chooses the next set given which elements are still uncovered.
pub trait GreedyChoice {
    fn choose(&self, instance: &MsscInstance, uncovered: &[bool]) -> Option<usize>;
}

/// Exact minimum of `c_i / w(S_i ∩ R)`, ties to the lowest index.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactChoice;

impl GreedyChoice for ExactChoice {
    fn choose(&self, instance: &MsscInstance, uncovered: &[bool]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..instance.sets.len() {
            let w = instance.marginal(i, uncovered);
            if w <= 0.0 {
                continue;
            }
            let ratio = instance.sets[i].cost / w;
            if best.map_or(true, |(_, b)| improves(ratio, b)) {
                best = Some((i, ratio));
            }
        }
        best.map(|b| b.0)
    }
}

/// Adversarial choice: the worst set whose ratio is within `rho` of the best.
#[derive(Debug, Clone, Copy)]
pub struct DegradedChoice {
    pub rho: f64,
}

impl GreedyChoice for DegradedChoice {
    fn choose(&self, instance: &MsscInstance, uncovered: &[bool]) -> Option<usize> {
        let best = ExactChoice.choose(instance, uncovered)?;
        let best_ratio = instance.sets[best].cost / instance.marginal(best, uncovered);
        let mut pick = (best, best_ratio);
        for i in 0..instance.sets.len() {
            let w = instance.marginal(i, uncovered);
            if w <= 0.0 {
                continue;
            }
            let ratio = instance.sets[i].cost / w;
            if ratio <= self.rho * best_ratio && ratio > pick.1 {
                pick = (i, ratio);
            }
        }
        Some(pick.0)
    }
}

impl<F: Fn(&MsscInstance, &[bool]) -> Option<usize>> GreedyChoice for F {
    fn choose(&self, instance: &MsscInstance, uncovered: &[bool]) -> Option<usize> {
        self(instance, uncovered)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsscSolution {
    pub order: Vec<usize>,
    /// Prefix cost at first coverage; `None` for elements never covered.
    pub cover_times: Vec<Option<f64>>,
    pub objective: f64,
}

impl MsscSolution {
    /// Replays `order`; every positive-weight element must end up covered.
    pub fn evaluate(instance: &MsscInstance, order: Vec<usize>) -> Result<Self> {
        let mut cover_times = vec![None; instance.num_elements()];
        let mut prefix = 0.0;
        for &i in &order {
            let set = instance
                .sets
                .get(i)
                .ok_or_else(|| SstError::input(format!("set index {i} out of range")))?;
            prefix += set.cost;
            for &e in &set.members {
                cover_times[e].get_or_insert(prefix);
            }
        }
        let mut objective = 0.0;
        for (e, (&w, t)) in instance.weights.iter().zip(&cover_times).enumerate() {
            match t {
                Some(t) => objective += w * t,
                None if w > 0.0 => {
                    return Err(SstError::input(format!(
                        "element {e} with weight {w} is never covered"
                    )))
                }
                None => {}
            }
        }
        Ok(Self {
            order,
            cover_times,
            objective,
        })
    }

    pub fn cover_time(&self, element: usize) -> Result<f64> {
        self.cover_times
            .get(element)
            .copied()
            .flatten()
            .ok_or_else(|| SstError::input(format!("element {element} is not covered")))
    }
}

/// Greedy MSSC: repeatedly take the set picked by `choice` until every
/// positive-weight element is covered.
pub fn mssc_greedy(instance: &MsscInstance, choice: &impl GreedyChoice) -> Result<MsscSolution> {
    instance.validate()?;
    let mut uncovered: Vec<bool> = instance.weights.iter().map(|&w| w > 0.0).collect();
    let mut remaining = uncovered.iter().filter(|&&u| u).count();
    let mut order = Vec::new();
    while remaining > 0 {
        let i = choice
            .choose(instance, &uncovered)
            .ok_or_else(|| SstError::contract("choice returned no set while elements remain"))?;
        if i >= instance.sets.len() {
            return Err(SstError::contract(format!("choice returned unknown set {i}")));
        }
        if instance.marginal(i, &uncovered) <= 0.0 {
            return Err(SstError::contract(format!(
                "choice returned set {i} with zero marginal weight"
            )));
        }
        for &e in &instance.sets[i].members {
            if uncovered[e] {
                uncovered[e] = false;
                remaining -= 1;
            }
        }
        order.push(i);
    }
    MsscSolution::evaluate(instance, order)
}

/// MSSC instance over test outcomes, with the batch behind each set.
#[derive(Debug, Clone, PartialEq)]
pub struct SstAsMssc {
    pub mssc: MsscInstance,
    /// `batch_of_set[i]` is the batch `B` whose set is `S_B`.
    pub batch_of_set: Vec<TestSet>,
}

impl SstAsMssc {
    pub fn set_of_batch(&self, batch: &TestSet) -> Option<usize> {
        self.batch_of_set.iter().position(|b| b == batch)
    }
}

/// Elements are the nonzero outcome vectors `x` (element `mask - 1` for bit
/// pattern `mask`, bit `i` set when test `i` fails), weighted by their
/// probability. Set `S_B` holds every outcome with a failure inside `B`.
pub fn build_mssc_from_sst(
    instance: &Instance,
    cost: impl Fn(&TestSet) -> f64,
) -> Result<SstAsMssc> {
    let n = instance.n();
    if n > MSSC_FROM_SST_LIMIT {
        return Err(SstError::capacity(
            "number of tests for the outcome-vector construction",
            MSSC_FROM_SST_LIMIT,
            n,
        ));
    }
    let idx = SubsetIndex::new(&instance.all_tests());
    let full = idx.full_mask();
    let (p, q) = (instance.pass_probs(), instance.fail_probs());
    let weights: Vec<f64> = (1..=full)
        .map(|x| {
            (0..n)
                .map(|i| if x >> i & 1 == 1 { q[i] } else { p[i] })
                .product()
        })
        .collect();
    let family = instance.family();
    let mut sets = Vec::new();
    let mut batch_of_set = Vec::new();
    for b in 1..=full {
        if !family.admits_size(b.count_ones() as usize) {
            continue;
        }
        let batch = idx.to_set(b);
        let members = (1..=full)
            .filter(|x| x & b != 0)
            .map(|x| x as usize - 1)
            .collect();
        sets.push(MsscSet::new(members, cost(&batch)));
        batch_of_set.push(batch);
    }
    Ok(SstAsMssc {
        mssc: MsscInstance::new(weights, sets)?,
        batch_of_set,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceRow {
    pub set: usize,
    /// Uncovered weight before the step, `w(R_i)`.
    pub residual_weight: f64,
    /// Weight newly covered, `w(X_i)`.
    pub covered_weight: f64,
    pub newly_covered: Vec<usize>,
    pub price: f64,
}

/// Per-step prices `c_i w(R_i) / w(X_i)`; `sum w(X_i) P_i` is the objective.
pub fn price_audit(instance: &MsscInstance, solution: &MsscSolution) -> Result<Vec<PriceRow>> {
    let mut uncovered: Vec<bool> = instance.weights.iter().map(|&w| w > 0.0).collect();
    let mut rows = Vec::new();
    for &i in &solution.order {
        let set = instance
            .sets
            .get(i)
            .ok_or_else(|| SstError::input(format!("set index {i} out of range")))?;
        let residual_weight: f64 = instance
            .weights
            .iter()
            .zip(&uncovered)
            .filter(|(_, &u)| u)
            .map(|(w, _)| w)
            .sum();
        let newly_covered: Vec<usize> = set.members.iter().copied().filter(|&e| uncovered[e]).collect();
        let covered_weight: f64 = newly_covered.iter().map(|&e| instance.weights[e]).sum();
        for &e in &newly_covered {
            uncovered[e] = false;
        }
        let price = if covered_weight > 0.0 {
            set.cost * residual_weight / covered_weight
        } else {
            0.0
        };
        rows.push(PriceRow {
            set: i,
            residual_weight,
            covered_weight,
            newly_covered,
            price,
        });
    }
    Ok(rows)
}
