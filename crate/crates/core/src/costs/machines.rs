use super::{
    check_costs, check_exact_width, check_ids, CostModel, Cover, OracleGuarantee, RatioChoice,
    RatioOracle, ValueOracle,
};
use crate::cmp::improves;
use crate::error::{Result, SstError};
use crate::instance::Instance;
use crate::set::{SubsetIndex, TestSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub cost: f64,
    pub tests: TestSet,
}

/// A batch costs the cheapest set of machines that together can run all its tests.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineActivationCost {
    n: usize,
    machines: Vec<Machine>,
}

impl MachineActivationCost {
    pub fn new(n: usize, machines: Vec<Machine>) -> Result<Self> {
        if n == 0 {
            return Err(SstError::input("machine model needs at least one test"));
        }
        let costs: Vec<f64> = machines.iter().map(|m| m.cost).collect();
        check_costs(&costs, "machines.cost")?;
        for (j, m) in machines.iter().enumerate() {
            check_ids(&m.tests, n)
                .map_err(|e| SstError::input(format!("machines[{j}]: {e}")))?;
        }
        let model = Self { n, machines };
        model.check_coverable(&TestSet::full(n))?;
        Ok(model)
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    fn check_coverable(&self, set: &TestSet) -> Result<()> {
        match set
            .iter()
            .find(|&t| !self.machines.iter().any(|m| m.tests.contains(t)))
        {
            Some(t) => Err(SstError::input(format!("test {t} is run by no machine"))),
            None => Ok(()),
        }
    }
}

/// Greedy weighted set cover: repeatedly activate the machine with the least
/// cost per newly covered test. Returns the total cost and machine indices.
pub fn greedy_set_cover(set: &TestSet, machines: &[Machine]) -> Result<(f64, Vec<usize>)> {
    let mut left = set.clone();
    let mut total = 0.0;
    let mut picked = Vec::new();
    while !left.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for (j, m) in machines.iter().enumerate() {
            let gain = m.tests.intersection(&left).len();
            if gain == 0 {
                continue;
            }
            let price = m.cost / gain as f64;
            if best.map_or(true, |(_, b)| improves(price, b)) {
                best = Some((j, price));
            }
        }
        let (j, _) = best.ok_or_else(|| {
            SstError::input(format!("tests {left} are run by no machine"))
        })?;
        left = left.difference(&machines[j].tests);
        total += machines[j].cost;
        picked.push(j);
    }
    Ok((total, picked))
}

/// Minimum-cost set cover by DP over subsets of `set`; `None` if uncoverable.
pub fn exact_set_cover(set: &TestSet, machines: &[Machine]) -> Result<Option<(f64, Vec<usize>)>> {
    let idx = SubsetIndex::new(set);
    check_exact_width(idx.width())?;
    let full = idx.full_mask() as usize;
    let masks: Vec<usize> = machines
        .iter()
        .map(|m| idx.mask_of(&m.tests) as usize)
        .collect();
    let mut best = vec![f64::INFINITY; full + 1];
    let mut via = vec![usize::MAX; full + 1];
    best[0] = 0.0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        for (j, &mj) in masks.iter().enumerate() {
            if mj & low == 0 {
                continue;
            }
            let val = machines[j].cost + best[mask & !mj];
            if val < best[mask] {
                best[mask] = val;
                via[mask] = j;
            }
        }
    }
    if best[full].is_infinite() {
        return Ok(None);
    }
    let mut picked = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let j = via[mask];
        picked.push(j);
        mask &= !masks[j];
    }
    Ok(Some((best[full], picked)))
}

impl ValueOracle for MachineActivationCost {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        check_ids(set, self.n)?;
        let (bound, picked) = greedy_set_cover(set, &self.machines)?;
        Ok(Cover {
            bound,
            batches: picked
                .iter()
                .map(|&j| self.machines[j].tests.intersection(set))
                .collect(),
        })
    }
}

impl RatioOracle for MachineActivationCost {
    /// Some single machine's share of the residual is an optimal batch: a
    /// batch needing machines `J` has ratio at least the best `c_j / (1 - P(T_j ∩ U))`.
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        check_ids(residual, self.n)?;
        let mut best: Option<(usize, TestSet, f64)> = None;
        for (j, m) in self.machines.iter().enumerate() {
            let part = m.tests.intersection(residual);
            if part.is_empty() {
                continue;
            }
            let ratio = m.cost / instance.fail_prob(&part)?;
            if best.as_ref().map_or(true, |b| improves(ratio, b.2)) {
                best = Some((j, part, ratio));
            }
        }
        let (j, batch, _) = best.ok_or_else(|| {
            SstError::input(format!("no machine runs any test of {residual}"))
        })?;
        Ok(RatioChoice {
            batch,
            cost_bound: self.machines[j].cost,
        })
    }
}

impl CostModel for MachineActivationCost {
    fn name(&self) -> &'static str {
        "machines"
    }

    fn num_tests(&self) -> usize {
        self.n
    }

    /// Greedy set cover is within the harmonic number `H_n` of optimal.
    fn guarantee(&self) -> OracleGuarantee {
        OracleGuarantee {
            gamma: (1..=self.n).map(|k| 1.0 / k as f64).sum(),
            rho: 1.0,
        }
    }

    fn exact_cost(&self, set: &TestSet) -> Result<f64> {
        check_ids(set, self.n)?;
        match exact_set_cover(set, &self.machines)? {
            Some((c, _)) => Ok(c),
            None => Err(SstError::input(format!("tests {set} cannot be covered"))),
        }
    }

    fn cost_table(&self, ground: &TestSet) -> Result<Vec<f64>> {
        let idx = SubsetIndex::new(ground);
        check_exact_width(idx.width())?;
        self.check_coverable(ground)?;
        let full = idx.full_mask() as usize;
        let masks: Vec<usize> = self
            .machines
            .iter()
            .map(|m| idx.mask_of(&m.tests) as usize)
            .collect();
        let mut best = vec![f64::INFINITY; full + 1];
        best[0] = 0.0;
        for mask in 1..=full {
            let low = mask & mask.wrapping_neg();
            for (j, &mj) in masks.iter().enumerate() {
                if mj & low != 0 {
                    best[mask] = best[mask].min(self.machines[j].cost + best[mask & !mj]);
                }
            }
        }
        Ok(best)
    }
}
