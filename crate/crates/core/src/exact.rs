//! Exhaustive ground-truth solvers used to audit every approximation.
//!
//! Subsets of a ground set are machine words (bit `j` is the `j`-th smallest
//! id), so the exact paths stop at [`EXACT_LIMIT`] tests. Ties always go to
//! the numerically smallest bitmask.

use crate::cmp::improves;
use crate::costs::{Cover, RatioChoice, RatioOracle, ValueOracle};
use crate::error::{Result, SstError};
use crate::instance::{BatchFamily, BatchSequence, Instance};
use crate::mssc::MsscInstance;
use crate::set::{submasks_ascending, SubsetIndex, TestSet};

pub const EXACT_LIMIT: usize = 20;
pub const EXACT_MSSC_SET_LIMIT: usize = 8;

/// Optimal residual costs recorded by an exact solve.
#[derive(Debug, Clone, PartialEq)]
pub enum ResidualCosts {
    /// One entry per subset of `{0..n-1}`, indexed by bitmask.
    Dense(Vec<f64>),
    /// Only the sets the solver actually visited.
    Sparse(Vec<(TestSet, f64)>),
}

impl ResidualCosts {
    pub fn get(&self, set: &TestSet) -> Option<f64> {
        match self {
            Self::Dense(table) => {
                let mask = set.iter().try_fold(0usize, |m, id| {
                    (id < usize::BITS as usize - 1).then_some(m | 1 << id)
                })?;
                table.get(mask).copied()
            }
            Self::Sparse(entries) => entries.iter().find(|(s, _)| s == set).map(|e| e.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolveResult {
    pub opt_cost: f64,
    pub opt_sequence: BatchSequence,
    pub residual_costs: ResidualCosts,
}

fn check_width(width: usize) -> Result<()> {
    if width > EXACT_LIMIT {
        return Err(SstError::capacity(
            "number of tests for an exact solve",
            EXACT_LIMIT,
            width,
        ));
    }
    Ok(())
}

/// Evaluates `cost` on every subset of `ground`, indexed by local mask.
pub fn cost_table(ground: &TestSet, cost: impl Fn(&TestSet) -> f64) -> Result<Vec<f64>> {
    let idx = SubsetIndex::new(ground);
    check_width(idx.width())?;
    Ok((0..=idx.full_mask()).map(|m| cost(&idx.to_set(m))).collect())
}

/// Pass and failure probabilities for every subset of `ground`.
fn probability_tables(instance: &Instance, idx: &SubsetIndex) -> (Vec<f64>, Vec<f64>) {
    let size = idx.full_mask() as usize + 1;
    let mut pass = vec![1.0; size];
    let mut log_pass = vec![0.0; size];
    for m in 1..size {
        let low = m.trailing_zeros() as usize;
        let rest = m & (m - 1);
        let id = idx.id(low);
        pass[m] = pass[rest] * instance.pass_probs()[id];
        log_pass[m] = log_pass[rest] + (-instance.fail_probs()[id]).ln_1p();
    }
    let fail = log_pass.iter().map(|l| -l.exp_m1()).collect();
    (pass, fail)
}

/// Exact SST optimum for an arbitrary cost function on `{0..n-1}`.
pub fn exact_sst(
    instance: &Instance,
    cost: impl Fn(&TestSet) -> f64,
    family: &BatchFamily,
) -> Result<ExactSolveResult> {
    let table = cost_table(&instance.all_tests(), cost)?;
    exact_sst_table(instance, &table, |m| family.admits_size(m.count_ones() as usize))
}

/// Subset DP `OPT(U) = min_{B ⊆ U allowed} c(B) + P(B) OPT(U \ B)` over a
/// precomputed cost table indexed by bitmask over `{0..n-1}`.
pub fn exact_sst_table(
    instance: &Instance,
    costs: &[f64],
    allowed: impl Fn(u32) -> bool,
) -> Result<ExactSolveResult> {
    let n = instance.n();
    check_width(n)?;
    let idx = SubsetIndex::new(&instance.all_tests());
    let full = idx.full_mask();
    if costs.len() != full as usize + 1 {
        return Err(SstError::input(format!(
            "cost table has {} entries, expected {}",
            costs.len(),
            full as usize + 1
        )));
    }
    let (pass, _) = probability_tables(instance, &idx);
    let mut opt = vec![f64::INFINITY; full as usize + 1];
    let mut choice = vec![0u32; full as usize + 1];
    opt[0] = 0.0;
    for u in 1..=full {
        let (mut best, mut best_b) = (f64::INFINITY, 0u32);
        for b in submasks_ascending(u).filter(|&b| allowed(b)) {
            let rest = opt[(u ^ b) as usize];
            let val = costs[b as usize] + pass[b as usize] * rest;
            if improves(val, best) {
                best = val;
                best_b = b;
            }
        }
        if best_b == 0 {
            return Err(SstError::input(format!(
                "no allowed batch can start on residual {}",
                idx.to_set(u)
            )));
        }
        opt[u as usize] = best;
        choice[u as usize] = best_b;
    }
    let mut batches = Vec::new();
    let mut u = full;
    while u != 0 {
        let b = choice[u as usize];
        batches.push(idx.to_set(b));
        u ^= b;
    }
    Ok(ExactSolveResult {
        opt_cost: opt[full as usize],
        opt_sequence: BatchSequence::new(batches),
        residual_costs: ResidualCosts::Dense(opt),
    })
}

/// Minimum of `cost(B) / (1 - P(B))` over nonempty allowed `B ⊆ residual`.
pub fn exact_ratio(
    instance: &Instance,
    residual: &TestSet,
    cost: impl Fn(&TestSet) -> f64,
    family: &BatchFamily,
) -> Result<(TestSet, f64)> {
    if residual.is_empty() {
        return Err(SstError::input("ratio problem needs a nonempty residual"));
    }
    crate::costs::check_ids(residual, instance.n())?;
    let idx = SubsetIndex::new(residual);
    check_width(idx.width())?;
    let (_, fail) = probability_tables(instance, &idx);
    let (mut best, mut best_b) = (f64::INFINITY, 0u32);
    for b in submasks_ascending(idx.full_mask()) {
        if !family.admits_size(b.count_ones() as usize) {
            continue;
        }
        let val = cost(&idx.to_set(b)) / fail[b as usize];
        if improves(val, best) {
            best = val;
            best_b = b;
        }
    }
    if best_b == 0 {
        return Err(SstError::input("no allowed batch inside the residual"));
    }
    Ok((idx.to_set(best_b), best))
}

/// Minimum-cost subset of `ground` whose reward reaches `quota`, or `None`
/// when even the whole ground set falls short. Rewards are indexed by test id.
pub fn exact_qp(
    ground: &TestSet,
    rewards: &[f64],
    cost: impl Fn(&TestSet) -> f64,
    quota: f64,
) -> Result<Option<(TestSet, f64)>> {
    let idx = SubsetIndex::new(ground);
    check_width(idx.width())?;
    if ground.max_id().is_some_and(|id| id >= rewards.len()) {
        return Err(SstError::input("reward vector shorter than the ground set"));
    }
    let mut best: Option<(u32, f64)> = None;
    for m in 0..=idx.full_mask() {
        let reward: f64 = (0..idx.width())
            .filter(|b| m >> b & 1 == 1)
            .map(|b| rewards[idx.id(b)])
            .sum();
        if reward < quota {
            continue;
        }
        let c = cost(&idx.to_set(m));
        if best.map_or(true, |(_, bc)| improves(c, bc)) {
            best = Some((m, c));
        }
    }
    Ok(best.map(|(m, c)| (idx.to_set(m), c)))
}

/// Table-backed exact value and ratio oracles over `{0..n-1}`.
pub struct ExactOracles {
    idx: SubsetIndex,
    costs: Vec<f64>,
    fail: Vec<f64>,
    family: BatchFamily,
}

impl ExactOracles {
    pub fn new(instance: &Instance, costs: Vec<f64>) -> Result<Self> {
        let idx = SubsetIndex::new(&instance.all_tests());
        check_width(idx.width())?;
        if costs.len() != idx.full_mask() as usize + 1 {
            return Err(SstError::input("cost table does not match the instance size"));
        }
        let (_, fail) = probability_tables(instance, &idx);
        Ok(Self {
            idx,
            costs,
            fail,
            family: instance.family(),
        })
    }

    pub fn from_fn(instance: &Instance, cost: impl Fn(&TestSet) -> f64) -> Result<Self> {
        Self::new(instance, cost_table(&instance.all_tests(), cost)?)
    }

    pub fn cost(&self, set: &TestSet) -> f64 {
        self.costs[self.idx.mask_of(set) as usize]
    }

    pub fn table(&self) -> &[f64] {
        &self.costs
    }
}

impl ValueOracle for ExactOracles {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        crate::costs::check_ids(set, self.idx.width())?;
        Ok(Cover::single(set.clone(), self.cost(set)))
    }
}

impl RatioOracle for ExactOracles {
    fn min_ratio(&self, _instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        crate::costs::check_ids(residual, self.idx.width())?;
        let u = self.idx.mask_of(residual);
        let (mut best, mut best_b) = (f64::INFINITY, 0u32);
        for b in submasks_ascending(u) {
            if !self.family.admits_size(b.count_ones() as usize) {
                continue;
            }
            let val = self.costs[b as usize] / self.fail[b as usize];
            if improves(val, best) {
                best = val;
                best_b = b;
            }
        }
        if best_b == 0 {
            return Err(SstError::input("no allowed batch inside the residual"));
        }
        Ok(RatioChoice {
            batch: self.idx.to_set(best_b),
            cost_bound: self.costs[best_b as usize],
        })
    }
}

/// Checks that `g(0..=n)` is nondecreasing and concave.
pub fn check_concave_table(g: &[f64], n: usize) -> Result<()> {
    if g.len() != n + 1 {
        return Err(SstError::input(format!(
            "g must list g(0)..g({n}), got {} values",
            g.len()
        )));
    }
    crate::costs::check_costs(g, "g")?;
    for k in 1..g.len() {
        if g[k] < g[k - 1] {
            return Err(SstError::input(format!("g is not monotone at {k}")));
        }
        if k >= 2 {
            let (prev, cur) = (g[k - 1] - g[k - 2], g[k] - g[k - 1]);
            if cur > prev + 1e-12 * g[k].abs().max(1.0) {
                return Err(SstError::input(format!("g is not concave at {k}")));
            }
        }
    }
    Ok(())
}

/// Tests ordered by increasing pass probability, ties by id.
pub fn order_by_pass_prob(instance: &Instance, tests: &TestSet) -> Vec<usize> {
    let q = instance.fail_probs();
    let mut order: Vec<usize> = tests.iter().collect();
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    order
}

/// Exact SST for costs `c(S) = g(|S|)`: the optimum splits the tests, sorted
/// by increasing pass probability, into consecutive blocks.
pub fn exact_concave_cardinality_sst(instance: &Instance, g: &[f64]) -> Result<ExactSolveResult> {
    let n = instance.n();
    check_concave_table(g, n)?;
    let order = order_by_pass_prob(instance, &instance.all_tests());
    let p = instance.pass_probs();
    // best[i]: optimal cost of testing order[i..]
    let mut best = vec![0.0; n + 1];
    let mut cut = vec![n; n + 1];
    for i in (0..n).rev() {
        let mut pass = 1.0;
        best[i] = f64::INFINITY;
        for j in i + 1..=n {
            pass *= p[order[j - 1]];
            let val = g[j - i] + pass * best[j];
            if improves(val, best[i]) {
                best[i] = val;
                cut[i] = j;
            }
        }
    }
    let mut batches = Vec::new();
    let mut i = 0;
    while i < n {
        batches.push(order[i..cut[i]].iter().copied().collect());
        i = cut[i];
    }
    let residuals = (0..=n)
        .map(|i| (order[i..].iter().copied().collect(), best[i]))
        .collect();
    Ok(ExactSolveResult {
        opt_cost: best[0],
        opt_sequence: BatchSequence::new(batches),
        residual_costs: ResidualCosts::Sparse(residuals),
    })
}

/// Optimal MSSC sequence by exhaustive search over set orders.
///
/// Only orders where every set covers a new positive-weight element are
/// explored. Returns the set order and its objective.
pub fn exact_mssc(instance: &MsscInstance) -> Result<(Vec<usize>, f64)> {
    let m = instance.sets.len();
    if m > EXACT_MSSC_SET_LIMIT {
        return Err(SstError::capacity(
            "number of MSSC sets for exhaustive search",
            EXACT_MSSC_SET_LIMIT,
            m,
        ));
    }
    instance.check_coverable()?;
    let weights = &instance.weights;
    let uncovered: Vec<bool> = weights.iter().map(|&w| w > 0.0).collect();
    let remaining = uncovered.iter().filter(|&&u| u).count();

    struct Search<'a> {
        inst: &'a MsscInstance,
        best: f64,
        best_order: Vec<usize>,
        order: Vec<usize>,
    }

    impl Search<'_> {
        fn dfs(&mut self, uncovered: &mut Vec<bool>, remaining: usize, acc: f64) {
            if remaining == 0 {
                if improves(acc, self.best) {
                    self.best = acc;
                    self.best_order = self.order.clone();
                }
                return;
            }
            if acc >= self.best {
                return;
            }
            let open: f64 = self
                .inst
                .weights
                .iter()
                .zip(uncovered.iter())
                .filter(|(_, &u)| u)
                .map(|(w, _)| w)
                .sum();
            for i in 0..self.inst.sets.len() {
                if self.order.contains(&i) {
                    continue;
                }
                let newly: Vec<usize> = self.inst.sets[i]
                    .members
                    .iter()
                    .copied()
                    .filter(|&e| uncovered[e])
                    .collect();
                if newly.is_empty() {
                    continue;
                }
                for &e in &newly {
                    uncovered[e] = false;
                }
                self.order.push(i);
                let step = self.inst.sets[i].cost * open;
                self.dfs(uncovered, remaining - newly.len(), acc + step);
                self.order.pop();
                for &e in &newly {
                    uncovered[e] = true;
                }
            }
        }
    }

    let mut search = Search {
        inst: instance,
        best: f64::INFINITY,
        best_order: Vec::new(),
        order: Vec::new(),
    };
    let mut state = uncovered;
    search.dfs(&mut state, remaining, 0.0);
    Ok((search.best_order, search.best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::expected_cost;
    use crate::mssc::MsscSet;

    fn unit(s: &TestSet) -> f64 {
        s.len() as f64
    }

    fn bad4() -> Instance {
        Instance::from_fail_probs(vec![0.25, 0.125, 0.0625, 0.03125]).unwrap()
    }

    #[test]
    fn exact_sst_small_cases() {
        let one = Instance::from_pass_probs(vec![0.3]).unwrap();
        let r = exact_sst(&one, |s| 2.5 * s.len() as f64, &BatchFamily::All).unwrap();
        assert_eq!(r.opt_cost, 2.5);
        assert_eq!(r.opt_sequence, BatchSequence::single(TestSet::from([0])));

        let two = Instance::from_pass_probs(vec![0.5, 0.5]).unwrap();
        let r = exact_sst(&two, unit, &BatchFamily::All).unwrap();
        assert_eq!(r.opt_cost, 1.5);
        assert_eq!(r.residual_costs.get(&TestSet::new()), Some(0.0));
        let e = expected_cost(&two, &r.opt_sequence, unit).unwrap();
        assert_eq!(e, r.opt_cost);
    }

    #[test]
    fn exact_sst_bad_instance_is_at_most_single_batch() {
        let inst = bad4();
        let c = |s: &TestSet| s.len().min(2) as f64;
        let r = exact_sst(&inst, c, &BatchFamily::All).unwrap();
        assert!(r.opt_cost <= 2.0 + 1e-12);
        let e = expected_cost(&inst, &r.opt_sequence, c).unwrap();
        assert!((e - r.opt_cost).abs() < 1e-12);
    }

    #[test]
    fn exact_sst_respects_capacity() {
        let inst = Instance::from_pass_probs(vec![0.5; 21]).unwrap();
        assert!(matches!(
            exact_sst(&inst, unit, &BatchFamily::All),
            Err(SstError::Capacity { .. })
        ));
    }

    #[test]
    fn exact_ratio_examples() {
        let inst = Instance::from_pass_probs(vec![0.5, 0.9]).unwrap();
        let (b, r) = exact_ratio(&inst, &inst.all_tests(), unit, &BatchFamily::All).unwrap();
        assert_eq!(b, TestSet::from([0]));
        assert!((r - 2.0).abs() < 1e-12);

        let (b, r) = exact_ratio(&inst, &TestSet::from([1]), unit, &BatchFamily::All).unwrap();
        assert_eq!(b, TestSet::from([1]));
        assert!((r - 1.0 / 0.1).abs() < 1e-9);

        let bad = bad4();
        let (b, r) = exact_ratio(
            &bad,
            &bad.all_tests(),
            |s| s.len().min(2) as f64,
            &BatchFamily::All,
        )
        .unwrap();
        assert_eq!(b, TestSet::from([0]));
        assert!((r - 4.0).abs() < 1e-12);

        assert!(exact_ratio(&inst, &TestSet::new(), unit, &BatchFamily::All).is_err());
    }

    #[test]
    fn exact_qp_examples() {
        let ground = TestSet::from([0, 1]);
        let rewards = [1.0, 2.0];
        let (s, c) = exact_qp(&ground, &rewards, unit, 0.0).unwrap().unwrap();
        assert!(s.is_empty());
        assert_eq!(c, 0.0);
        assert_eq!(exact_qp(&ground, &rewards, unit, 3.5).unwrap(), None);
        let (s, c) = exact_qp(&ground, &rewards, unit, 2.0).unwrap().unwrap();
        assert_eq!(s, TestSet::from([1]));
        assert_eq!(c, 1.0);
    }

    #[test]
    fn exact_oracles_match_free_functions() {
        let inst = Instance::from_pass_probs(vec![0.5, 0.9, 0.7]).unwrap();
        let cost = |s: &TestSet| (s.len() as f64).sqrt();
        let o = ExactOracles::from_fn(&inst, cost).unwrap();
        let choice = o.min_ratio(&inst, &inst.all_tests()).unwrap();
        let (b, r) = exact_ratio(&inst, &inst.all_tests(), cost, &BatchFamily::All).unwrap();
        assert_eq!(choice.batch, b);
        let fail = inst.fail_prob(&b).unwrap();
        assert!((choice.cost_bound / fail - r).abs() < 1e-12);
    }

    #[test]
    fn concave_dp_examples() {
        let one = Instance::from_pass_probs(vec![0.4]).unwrap();
        let r = exact_concave_cardinality_sst(&one, &[0.0, 3.0]).unwrap();
        assert_eq!(r.opt_cost, 3.0);

        let bad = bad4();
        let g = [0.0, 1.0, 2.0, 2.0, 2.0];
        let dp = exact_concave_cardinality_sst(&bad, &g).unwrap();
        let brute = exact_sst(&bad, |s| g[s.len()], &BatchFamily::All).unwrap();
        assert!((dp.opt_cost - brute.opt_cost).abs() < 1e-12);
        assert_eq!(dp.residual_costs.get(&TestSet::new()), Some(0.0));

        assert!(exact_concave_cardinality_sst(&bad, &[0.0, 1.0, 3.0, 3.5, 4.0]).is_err());
        assert!(exact_concave_cardinality_sst(&bad, &[0.0, 1.0, 0.5, 0.5, 0.5]).is_err());
        assert!(exact_concave_cardinality_sst(&bad, &[0.0, 1.0]).is_err());
    }

    fn ab_instance() -> MsscInstance {
        MsscInstance::new(
            vec![1.0, 2.0],
            vec![
                MsscSet::new(vec![0], 1.0),
                MsscSet::new(vec![1], 1.0),
                MsscSet::new(vec![0, 1], 1.5),
            ],
        )
        .unwrap()
    }

    #[test]
    fn exact_mssc_examples() {
        let (order, obj) = exact_mssc(&ab_instance()).unwrap();
        assert_eq!(order, vec![1, 0]);
        assert!((obj - 4.0).abs() < 1e-12);

        let single = MsscInstance::new(vec![0.5, 1.5], vec![MsscSet::new(vec![0, 1], 2.0)]).unwrap();
        let (order, obj) = exact_mssc(&single).unwrap();
        assert_eq!(order, vec![0]);
        assert_eq!(obj, 4.0);

        let mut dup = ab_instance();
        dup.sets.push(dup.sets[0].clone());
        assert_eq!(exact_mssc(&dup).unwrap().1, 4.0);
    }

    #[test]
    fn exact_mssc_rejects_uncoverable() {
        let bad = MsscInstance {
            weights: vec![1.0, 1.0],
            sets: vec![MsscSet::new(vec![0], 1.0)],
        };
        assert!(matches!(exact_mssc(&bad), Err(SstError::Input(_))));
    }
}
