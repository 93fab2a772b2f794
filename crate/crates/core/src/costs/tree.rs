//! Tree activation costs.
//!
//! Each test sits at a node of a rooted tree with node weights; a batch costs
//! the total weight of the subtree spanned by the root and the batch's nodes.
//! The ratio oracle solves "most reward within a budget" by a DP over the
//! tree in edge form (edge into `v` weighs `w_v`, a zero-weight super-root on
//! top), with every internal node padded to at most two children and edge
//! weights rounded down to multiples of `mu = eps L / E`.

use super::{
    check_exact_width, check_ids, split_epsilon, CostModel, Cover, OracleGuarantee, RatioChoice,
    RatioOracle, ValueOracle,
};
use crate::error::{Result, SstError};
use crate::instance::{BatchFamily, Instance};
use crate::quota::{ratio_from_quota, reward_of, rewards, BicriteriaSolver, QuotaAnswer};
use crate::set::{submasks_ascending, SubsetIndex, TestSet};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Sets up to this size get an exact capacitated grouping.
pub const GROUPING_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNodeSpec {
    pub id: usize,
    pub weight: f64,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeCost {
    root: usize,
    weight: Vec<f64>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    tests_at: Vec<Vec<usize>>,
    test_node: Vec<usize>,
    /// Position of each test in a depth-first walk.
    dfs_rank: Vec<usize>,
    eps: f64,
}

impl TreeCost {
    /// `leaf_of_test[i]` is the node id hosting test `i`.
    pub fn new(nodes: Vec<TreeNodeSpec>, leaf_of_test: Vec<usize>, eps: f64) -> Result<Self> {
        super::check_epsilon(eps)?;
        if leaf_of_test.is_empty() {
            return Err(SstError::input("tree model needs at least one test"));
        }
        let mut index = HashMap::new();
        for (k, node) in nodes.iter().enumerate() {
            if index.insert(node.id, k).is_some() {
                return Err(SstError::input(format!("duplicate node id {}", node.id)));
            }
            if !(node.weight.is_finite() && node.weight >= 0.0) {
                return Err(SstError::input(format!(
                    "node {} weight {} must be finite and nonnegative",
                    node.id, node.weight
                )));
            }
        }
        let mut parent = Vec::with_capacity(nodes.len());
        for node in &nodes {
            parent.push(match node.parent {
                None => None,
                Some(p) => Some(*index.get(&p).ok_or_else(|| {
                    SstError::input(format!("node {} has unknown parent {p}", node.id))
                })?),
            });
        }
        let roots: Vec<usize> = (0..nodes.len()).filter(|&k| parent[k].is_none()).collect();
        if roots.len() != 1 {
            return Err(SstError::input(format!(
                "tree needs exactly one root, found {}",
                roots.len()
            )));
        }
        let mut children = vec![Vec::new(); nodes.len()];
        for (k, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(k);
            }
        }
        // every node must be reachable from the root, which also rules out cycles
        let mut order = vec![roots[0]];
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            order.extend(children[v].iter().copied());
        }
        if order.len() != nodes.len() {
            return Err(SstError::input("tree has a cycle or a detached node"));
        }
        let mut tests_at = vec![Vec::new(); nodes.len()];
        let mut test_node = Vec::with_capacity(leaf_of_test.len());
        for (t, id) in leaf_of_test.iter().enumerate() {
            let v = *index
                .get(id)
                .ok_or_else(|| SstError::input(format!("test {t} maps to unknown node {id}")))?;
            tests_at[v].push(t);
            test_node.push(v);
        }
        let mut dfs_rank = vec![0; test_node.len()];
        let mut stack = vec![roots[0]];
        let mut next = 0;
        while let Some(v) = stack.pop() {
            for &t in &tests_at[v] {
                dfs_rank[t] = next;
                next += 1;
            }
            stack.extend(children[v].iter().rev());
        }
        Ok(Self {
            root: roots[0],
            weight: nodes.iter().map(|n| n.weight).collect(),
            parent,
            children,
            tests_at,
            test_node,
            dfs_rank,
            eps,
        })
    }

    pub fn num_tests(&self) -> usize {
        self.test_node.len()
    }

    /// Weight of the subtree spanned by the root and the nodes of `set`; 0 for the empty set.
    pub fn value(&self, set: &TestSet) -> f64 {
        let mut seen = vec![false; self.weight.len()];
        let mut total = 0.0;
        for t in set {
            let mut v = self.test_node[t];
            while !seen[v] {
                seen[v] = true;
                total += self.weight[v];
                match self.parent[v] {
                    Some(p) => v = p,
                    None => break,
                }
            }
        }
        total
    }

    pub fn path_cost(&self, test: usize) -> f64 {
        self.value(&TestSet::singleton(test))
    }

    fn shares(&self) -> (f64, f64) {
        let grid = split_epsilon(self.eps, 2);
        (grid, grid)
    }

    fn ratio_with_capacity(
        &self,
        instance: &Instance,
        residual: &TestSet,
        capacity: Option<usize>,
    ) -> Result<RatioChoice> {
        check_ids(residual, self.num_tests())?;
        let (grid, round) = self.shares();
        let solver = TreeQuotaSolver::new(self, residual, &rewards(instance), round, capacity)?;
        let r = ratio_from_quota(instance, residual, &solver, grid)?;
        Ok(RatioChoice {
            batch: r.batch,
            cost_bound: r.cost_bound,
        })
    }
}

impl ValueOracle for TreeCost {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        check_ids(set, self.num_tests())?;
        Ok(Cover::single(set.clone(), self.value(set)))
    }
}

impl RatioOracle for TreeCost {
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        self.ratio_with_capacity(instance, residual, None)
    }
}

impl CostModel for TreeCost {
    fn name(&self) -> &'static str {
        "tree"
    }

    fn num_tests(&self) -> usize {
        self.test_node.len()
    }

    fn guarantee(&self) -> OracleGuarantee {
        OracleGuarantee {
            gamma: 1.0,
            rho: 1.0 + self.eps,
        }
    }

    fn exact_cost(&self, set: &TestSet) -> Result<f64> {
        check_ids(set, self.num_tests())?;
        Ok(self.value(set))
    }
}

/// Tree costs where one batch holds at most `k` tests; a larger set is
/// covered by several trips.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitatedTreeCost {
    tree: TreeCost,
    k: usize,
}

impl CapacitatedTreeCost {
    pub fn new(tree: TreeCost, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(SstError::input("capacity k must be at least 1"));
        }
        Ok(Self { tree, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tree(&self) -> &TreeCost {
        &self.tree
    }

    /// Cheapest split of `set` into groups of at most `k`, by DP over its subsets.
    pub fn exact_grouping(&self, set: &TestSet) -> Result<(f64, Vec<TestSet>)> {
        if set.len() > GROUPING_LIMIT {
            return Err(SstError::capacity(
                "tests in an exact capacitated grouping",
                GROUPING_LIMIT,
                set.len(),
            ));
        }
        let idx = SubsetIndex::new(set);
        let (best, via) = self.grouping_table(&idx);
        let mut groups = Vec::new();
        let mut mask = idx.full_mask();
        while mask != 0 {
            groups.push(idx.to_set(via[mask as usize]));
            mask ^= via[mask as usize];
        }
        Ok((best[idx.full_mask() as usize], groups))
    }

    fn grouping_table(&self, idx: &SubsetIndex) -> (Vec<f64>, Vec<u32>) {
        let full = idx.full_mask();
        let size = full as usize + 1;
        let single: Vec<f64> = (0..=full).map(|m| self.tree.value(&idx.to_set(m))).collect();
        let mut best = vec![f64::INFINITY; size];
        let mut via = vec![0u32; size];
        best[0] = 0.0;
        for mask in 1..=full {
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            // groups containing the lowest member: low plus any submask of the rest
            let mut consider = |g: u32| {
                if g.count_ones() as usize <= self.k {
                    let val = single[g as usize] + best[(mask ^ g) as usize];
                    if val < best[mask as usize] {
                        best[mask as usize] = val;
                        via[mask as usize] = g;
                    }
                }
            };
            consider(low);
            for sub in submasks_ascending(rest) {
                consider(low | sub);
            }
        }
        (best, via)
    }

    /// Consecutive groups of `k` in depth-first order.
    fn chunked_grouping(&self, set: &TestSet) -> (f64, Vec<TestSet>) {
        let mut order: Vec<usize> = set.iter().collect();
        order.sort_by_key(|&t| self.tree.dfs_rank[t]);
        let groups: Vec<TestSet> = order
            .chunks(self.k)
            .map(|c| c.iter().copied().collect())
            .collect();
        (groups.iter().map(|g| self.tree.value(g)).sum(), groups)
    }
}

impl ValueOracle for CapacitatedTreeCost {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        check_ids(set, self.tree.num_tests())?;
        if set.is_empty() {
            return Ok(Cover::empty());
        }
        let (bound, batches) = if set.len() <= self.k {
            (self.tree.value(set), vec![set.clone()])
        } else if set.len() <= GROUPING_LIMIT {
            self.exact_grouping(set)?
        } else {
            self.chunked_grouping(set)
        };
        Ok(Cover { bound, batches })
    }
}

impl RatioOracle for CapacitatedTreeCost {
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        self.tree
            .ratio_with_capacity(instance, residual, Some(self.k))
    }
}

impl CostModel for CapacitatedTreeCost {
    fn name(&self) -> &'static str {
        "tree_capacitated"
    }

    fn num_tests(&self) -> usize {
        self.tree.num_tests()
    }

    /// Exact grouping keeps `gamma = 1` while every requested set fits the
    /// exact regime; the depth-first chunking beyond it carries no audited bound.
    fn guarantee(&self) -> OracleGuarantee {
        OracleGuarantee {
            gamma: if self.num_tests() <= GROUPING_LIMIT {
                1.0
            } else {
                f64::INFINITY
            },
            rho: 1.0 + self.tree.eps,
        }
    }

    fn family(&self) -> BatchFamily {
        BatchFamily::MaxSize { k: self.k }
    }

    fn exact_cost(&self, set: &TestSet) -> Result<f64> {
        check_ids(set, self.tree.num_tests())?;
        if set.len() <= self.k {
            return Ok(self.tree.value(set));
        }
        Ok(self.exact_grouping(set)?.0)
    }

    fn cost_table(&self, ground: &TestSet) -> Result<Vec<f64>> {
        if ground.len() > GROUPING_LIMIT {
            return Err(SstError::capacity(
                "tests in an exact capacitated grouping",
                GROUPING_LIMIT,
                ground.len(),
            ));
        }
        check_exact_width(ground.len())?;
        Ok(self.grouping_table(&SubsetIndex::new(ground)).0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    units: u64,
    count: u32,
    reward: f64,
    trace: u32,
}

const NO_TRACE: u32 = u32::MAX;

enum Trace {
    Test(usize),
    Join(u32, u32),
}

enum DpKind {
    Test(usize),
    Inner(Vec<usize>),
}

/// The residual's part of the tree in edge form, padded to binary.
/// Parents precede their children.
struct DpTree {
    edge: Vec<f64>,
    kind: Vec<DpKind>,
}

enum Spec {
    Node(usize),
    Test(usize),
    Pad(Vec<Spec>),
}

impl DpTree {
    fn build(tree: &TreeCost, residual: &TestSet) -> Self {
        let mut relevant = vec![false; tree.weight.len()];
        for t in residual {
            let mut v = tree.test_node[t];
            while !relevant[v] {
                relevant[v] = true;
                match tree.parent[v] {
                    Some(p) => v = p,
                    None => break,
                }
            }
        }
        let child_specs = |v: usize| -> Vec<Spec> {
            let mut specs: Vec<Spec> = tree.children[v]
                .iter()
                .filter(|&&c| relevant[c])
                .map(|&c| Spec::Node(c))
                .collect();
            specs.extend(
                tree.tests_at[v]
                    .iter()
                    .filter(|&&t| residual.contains(t))
                    .map(|&t| Spec::Test(t)),
            );
            specs
        };
        let mut dp = DpTree {
            edge: vec![0.0],
            kind: vec![DpKind::Inner(Vec::new())],
        };
        let mut work: Vec<(usize, Vec<Spec>)> = Vec::new();
        if !residual.is_empty() {
            work.push((0, vec![Spec::Node(tree.root)]));
        }
        while let Some((at, mut specs)) = work.pop() {
            if specs.len() > 2 {
                let rest = specs.split_off(1);
                specs.push(Spec::Pad(rest));
            }
            let mut kids = Vec::with_capacity(specs.len());
            for spec in specs {
                let id = dp.edge.len();
                kids.push(id);
                match spec {
                    Spec::Test(t) => {
                        dp.edge.push(0.0);
                        dp.kind.push(DpKind::Test(t));
                    }
                    Spec::Node(v) => {
                        dp.edge.push(tree.weight[v]);
                        dp.kind.push(DpKind::Inner(Vec::new()));
                        work.push((id, child_specs(v)));
                    }
                    Spec::Pad(list) => {
                        dp.edge.push(0.0);
                        dp.kind.push(DpKind::Inner(Vec::new()));
                        work.push((id, list));
                    }
                }
            }
            dp.kind[at] = DpKind::Inner(kids);
        }
        dp
    }

    fn positive_edges(&self) -> usize {
        self.edge.iter().filter(|&&w| w > 0.0).count()
    }

    /// Pareto frontier at the super-root: for each reachable rounded cost
    /// (and test count, when capped) the largest reward.
    fn frontier(
        &self,
        rewards: &[f64],
        mu: f64,
        cap_units: u64,
        capacity: Option<usize>,
        arena: &mut Vec<Trace>,
    ) -> Vec<Entry> {
        let max_count = capacity.map_or(u32::MAX, |k| k as u32);
        let units: Vec<u64> = self.edge.iter().map(|w| (w / mu).floor() as u64).collect();
        let mut front: Vec<Vec<Entry>> = (0..self.edge.len()).map(|_| Vec::new()).collect();
        for v in (0..self.edge.len()).rev() {
            front[v] = match &self.kind[v] {
                DpKind::Test(t) => {
                    arena.push(Trace::Test(*t));
                    vec![Entry {
                        units: 0,
                        count: u32::from(capacity.is_some()),
                        reward: rewards[*t],
                        trace: (arena.len() - 1) as u32,
                    }]
                }
                DpKind::Inner(kids) => {
                    let lifted: Vec<Vec<Entry>> = kids
                        .iter()
                        .map(|&c| lift(&front[c], units[c], cap_units))
                        .collect();
                    match lifted.len() {
                        0 => vec![empty_entry()],
                        1 => lifted.into_iter().next().unwrap_or_default(),
                        _ => merge(&lifted[0], &lifted[1], cap_units, max_count, arena),
                    }
                }
            };
            if let DpKind::Inner(kids) = &self.kind[v] {
                for &c in kids {
                    front[c] = Vec::new();
                }
            }
        }
        std::mem::take(&mut front[0])
    }
}

fn empty_entry() -> Entry {
    Entry {
        units: 0,
        count: 0,
        reward: 0.0,
        trace: NO_TRACE,
    }
}

/// Entering the child costs its edge; skipping it costs nothing.
fn lift(child: &[Entry], edge_units: u64, cap: u64) -> Vec<Entry> {
    let mut out = vec![empty_entry()];
    out.extend(
        child
            .iter()
            .filter(|e| e.trace != NO_TRACE && e.units + edge_units <= cap)
            .map(|e| Entry {
                units: e.units + edge_units,
                ..*e
            }),
    );
    out
}

fn merge(a: &[Entry], b: &[Entry], cap: u64, max_count: u32, arena: &mut Vec<Trace>) -> Vec<Entry> {
    let mut cand: Vec<(Entry, u32, u32)> = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let units = x.units + y.units;
            let count = x.count + y.count;
            if units > cap || count > max_count {
                continue;
            }
            cand.push((
                Entry {
                    units,
                    count,
                    reward: x.reward + y.reward,
                    trace: NO_TRACE,
                },
                x.trace,
                y.trace,
            ));
        }
    }
    cand.sort_by(|p, q| {
        p.0.count
            .cmp(&q.0.count)
            .then(p.0.units.cmp(&q.0.units))
            .then(q.0.reward.total_cmp(&p.0.reward))
    });
    let mut out = Vec::new();
    let mut group = u32::MAX;
    let mut best = f64::NEG_INFINITY;
    for (mut e, xt, yt) in cand {
        if e.count != group {
            group = e.count;
            best = f64::NEG_INFINITY;
        }
        if e.reward <= best {
            continue;
        }
        best = e.reward;
        e.trace = match (xt, yt) {
            (NO_TRACE, t) | (t, NO_TRACE) => t,
            (x, y) => {
                arena.push(Trace::Join(x, y));
                (arena.len() - 1) as u32
            }
        };
        out.push(e);
    }
    out
}

fn collect_tests(arena: &[Trace], root: u32) -> TestSet {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(t) = stack.pop() {
        if t == NO_TRACE {
            continue;
        }
        match arena[t as usize] {
            Trace::Test(id) => out.push(id),
            Trace::Join(a, b) => {
                stack.push(a);
                stack.push(b);
            }
        }
    }
    TestSet::from(out)
}

/// Budgeted tree DP turned into a quota solver.
///
/// Budgets are covered by doubling bands `[L, 2L)` starting at the cheapest
/// single-test path. In each band edge weights are rounded down to multiples
/// of `eps L / E` (`E` = edges of positive weight), so rounding loses at most
/// `eps L`. Every frontier set across all bands, plus the free set of tests
/// reachable at zero cost, is priced exactly; a quota is answered by the
/// cheapest priced set meeting it. Hence `alpha = 1 + eps`, `beta = 1`.
pub struct TreeQuotaSolver {
    ground: TestSet,
    eps: f64,
    /// (exact cost, reward, set), cost ascending and reward strictly ascending.
    candidates: Vec<(f64, f64, TestSet)>,
}

impl TreeQuotaSolver {
    pub fn new(
        tree: &TreeCost,
        ground: &TestSet,
        rewards: &[f64],
        eps: f64,
        capacity: Option<usize>,
    ) -> Result<Self> {
        super::check_epsilon(eps)?;
        check_ids(ground, tree.num_tests().min(rewards.len()))?;
        let dp = DpTree::build(tree, ground);
        let mut raw: Vec<(f64, f64, TestSet)> = Vec::new();
        let free: TestSet = ground.iter().filter(|&t| tree.path_cost(t) == 0.0).collect();
        if !free.is_empty() {
            let free = match capacity {
                Some(k) => best_rewards(&free, rewards, k),
                None => free,
            };
            raw.push((0.0, reward_of(rewards, &free), free));
        }
        let b_lo = ground
            .iter()
            .map(|t| tree.path_cost(t))
            .filter(|&c| c > 0.0)
            .fold(f64::INFINITY, f64::min);
        let b_hi = tree.value(ground);
        let edges = dp.positive_edges().max(1) as f64;
        let mut arena = Vec::new();
        let mut band = b_lo;
        while band.is_finite() && band <= b_hi {
            let mu = eps * band / edges;
            let cap = (2.0 * band / mu).floor() as u64;
            arena.clear();
            for e in dp.frontier(rewards, mu, cap, capacity, &mut arena) {
                if e.trace == NO_TRACE {
                    continue;
                }
                let set = collect_tests(&arena, e.trace);
                raw.push((tree.value(&set), e.reward, set));
            }
            band *= 2.0;
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
        let mut candidates: Vec<(f64, f64, TestSet)> = Vec::new();
        for c in raw {
            if candidates.last().map_or(true, |last| c.1 > last.1) {
                candidates.push(c);
            }
        }
        Ok(Self {
            ground: ground.clone(),
            eps,
            candidates,
        })
    }
}

/// The `k` highest-reward tests of `set`, ties to lower ids.
fn best_rewards(set: &TestSet, rewards: &[f64], k: usize) -> TestSet {
    let mut v: Vec<usize> = set.iter().collect();
    v.sort_by(|&a, &b| rewards[b].total_cmp(&rewards[a]).then(a.cmp(&b)));
    v.truncate(k);
    v.into_iter().collect()
}

impl BicriteriaSolver for TreeQuotaSolver {
    fn alpha(&self) -> f64 {
        1.0 + self.eps
    }

    fn beta(&self) -> f64 {
        1.0
    }

    fn ground(&self) -> &TestSet {
        &self.ground
    }

    fn solve(&self, quota: f64) -> Result<Option<QuotaAnswer>> {
        if quota <= 0.0 {
            return Ok(Some(QuotaAnswer {
                set: TestSet::new(),
                cost_bound: 0.0,
            }));
        }
        let at = self.candidates.partition_point(|c| c.1 < quota);
        Ok(self.candidates.get(at).map(|c| QuotaAnswer {
            set: c.2.clone(),
            cost_bound: c.0,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_qp, exact_ratio};

    fn node(id: usize, weight: f64, parent: Option<usize>) -> TreeNodeSpec {
        TreeNodeSpec { id, weight, parent }
    }

    /// root(0) - a(1) - {leaf1(2), leaf2(3)}
    fn small() -> TreeCost {
        TreeCost::new(
            vec![
                node(0, 0.0, None),
                node(1, 1.0, Some(0)),
                node(2, 2.0, Some(1)),
                node(3, 3.0, Some(1)),
            ],
            vec![2, 3],
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn tree_values() {
        let t = small();
        assert_eq!(t.value(&TestSet::from([0])), 3.0);
        assert_eq!(t.value(&TestSet::from([0, 1])), 6.0);
        assert_eq!(t.value(&TestSet::new()), 0.0);
    }

    #[test]
    fn rejects_malformed_trees() {
        assert!(TreeCost::new(vec![node(0, 1.0, None), node(1, 1.0, None)], vec![0], 0.1).is_err());
        assert!(TreeCost::new(vec![node(0, 1.0, Some(0))], vec![0], 0.1).is_err());
        assert!(TreeCost::new(vec![node(0, -1.0, None)], vec![0], 0.1).is_err());
        assert!(TreeCost::new(vec![node(0, 1.0, None)], vec![4], 0.1).is_err());
        assert!(TreeCost::new(
            vec![node(0, 1.0, None), node(1, 1.0, Some(2)), node(2, 1.0, Some(1))],
            vec![0],
            0.1
        )
        .is_err());
    }

    #[test]
    fn single_leaf_ratio() {
        let t = TreeCost::new(vec![node(7, 1.5, None), node(8, 2.0, Some(7))], vec![8], 0.1).unwrap();
        let inst = Instance::from_pass_probs(vec![0.5]).unwrap();
        let c = t.min_ratio(&inst, &inst.all_tests()).unwrap();
        assert_eq!(c.batch, TestSet::from([0]));
        assert_eq!(c.cost_bound, 3.5);
    }

    fn star(n: usize, w: &[f64]) -> TreeCost {
        let mut nodes = vec![node(0, 0.0, None)];
        nodes.extend((1..=n).map(|i| node(i, w[i - 1], Some(0))));
        TreeCost::new(nodes, (1..=n).collect(), 0.1).unwrap()
    }

    #[test]
    fn quota_solver_on_a_star() {
        let t = star(5, &[1.0; 5]);
        let ground = TestSet::full(5);
        let r = [1.0; 5];
        let s = TreeQuotaSolver::new(&t, &ground, &r, 0.05, None).unwrap();
        for q in [0.5, 1.0, 2.5, 5.0] {
            let ans = s.solve(q).unwrap().unwrap();
            let brute = exact_qp(&ground, &r, |x| t.value(x), q).unwrap().unwrap();
            assert_eq!(ans.cost_bound, brute.1);
        }
        assert!(s.solve(5.5).unwrap().is_none());
    }

    #[test]
    fn quota_solver_respects_capacity() {
        let t = star(4, &[1.0, 2.0, 3.0, 4.0]);
        let ground = TestSet::full(4);
        let r = [1.0, 1.0, 1.0, 1.0];
        let s = TreeQuotaSolver::new(&t, &ground, &r, 0.05, Some(2)).unwrap();
        assert!(s.solve(2.5).unwrap().is_none());
        assert_eq!(s.solve(2.0).unwrap().unwrap().set, TestSet::from([0, 1]));
    }

    #[test]
    fn tree_ratio_close_to_exact() {
        let t = TreeCost::new(
            vec![
                node(0, 0.5, None),
                node(1, 1.0, Some(0)),
                node(2, 2.0, Some(1)),
                node(3, 0.3, Some(1)),
                node(4, 4.0, Some(0)),
                node(5, 0.7, Some(4)),
            ],
            vec![2, 3, 5, 4, 1],
            0.1,
        )
        .unwrap();
        let inst = Instance::from_pass_probs(vec![0.6, 0.9, 0.4, 0.8, 0.95]).unwrap();
        let all = inst.all_tests();
        let c = t.min_ratio(&inst, &all).unwrap();
        let got = c.cost_bound / inst.fail_prob(&c.batch).unwrap();
        let (_, opt) = exact_ratio(&inst, &all, |s| t.value(s), &BatchFamily::All).unwrap();
        assert!(got <= 1.1 * opt + 1e-12, "{got} vs {opt}");
        assert!((c.cost_bound - t.value(&c.batch)).abs() < 1e-12);
    }

    #[test]
    fn capacitated_grouping() {
        // path tree r - a - b - c - d with one test per node
        let nodes = vec![
            node(0, 0.0, None),
            node(1, 1.0, Some(0)),
            node(2, 1.0, Some(1)),
            node(3, 1.0, Some(2)),
            node(4, 1.0, Some(3)),
        ];
        let tree = TreeCost::new(nodes, vec![1, 2, 3, 4], 0.1).unwrap();
        let full = CapacitatedTreeCost::new(tree.clone(), 4).unwrap();
        let s = TestSet::full(4);
        assert_eq!(full.cover(&s).unwrap().bound, tree.value(&s));
        let single = CapacitatedTreeCost::new(tree.clone(), 1).unwrap();
        assert_eq!(single.cover(&s).unwrap().bound, 1.0 + 2.0 + 3.0 + 4.0);
        let pairs = CapacitatedTreeCost::new(tree.clone(), 2).unwrap();
        let (cost, groups) = pairs.exact_grouping(&s).unwrap();
        assert_eq!(cost, 6.0);
        assert!(groups.iter().all(|g| g.len() <= 2));
        assert!(CapacitatedTreeCost::new(tree, 0).is_err());
    }
}
