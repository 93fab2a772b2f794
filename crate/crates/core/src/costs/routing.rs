use super::{
    check_epsilon, check_ids, split_epsilon, CostModel, Cover, OracleGuarantee, RatioChoice,
    RatioOracle, ValueOracle,
};
use crate::cmp::improves;
use crate::error::{Result, SstError};
use crate::instance::Instance;
use crate::quota::{ratio_from_quota, rewards, BicriteriaSolver, QuotaAnswer};
use crate::set::{SubsetIndex, TestSet};

/// Largest vertex set toured exactly.
pub const HELD_KARP_LIMIT: usize = 14;

const METRIC_TOL: f64 = 1e-9;

/// A batch costs the shortest closed tour from the root through its tests.
///
/// Vertex `root` of the distance matrix is the depot; the remaining vertices,
/// in index order, are tests `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingCost {
    root: usize,
    dist: Vec<Vec<f64>>,
    vertex_of_test: Vec<usize>,
    eps: f64,
}

impl RoutingCost {
    pub fn new(root: usize, dist: Vec<Vec<f64>>, eps: f64) -> Result<Self> {
        check_epsilon(eps)?;
        let v = dist.len();
        if v < 2 {
            return Err(SstError::input("routing metric needs the root and at least one test"));
        }
        if root >= v {
            return Err(SstError::input(format!("root {root} out of range for {v} vertices")));
        }
        for (i, row) in dist.iter().enumerate() {
            if row.len() != v {
                return Err(SstError::input(format!("dist[{i}] has {} entries, expected {v}", row.len())));
            }
            if let Some(j) = row.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
                return Err(SstError::input(format!("dist[{i}][{j}] must be finite and nonnegative")));
            }
        }
        let scale = dist.iter().flatten().fold(0.0f64, |a, &b| a.max(b)).max(1.0);
        let tol = METRIC_TOL * scale;
        for i in 0..v {
            if dist[i][i] != 0.0 {
                return Err(SstError::input(format!("dist[{i}][{i}] must be 0")));
            }
            for j in 0..v {
                if (dist[i][j] - dist[j][i]).abs() > tol {
                    return Err(SstError::input(format!("dist is not symmetric at ({i}, {j})")));
                }
                for k in 0..v {
                    if dist[i][k] > dist[i][j] + dist[j][k] + tol {
                        return Err(SstError::input(format!(
                            "triangle inequality fails for ({i}, {j}, {k})"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            root,
            vertex_of_test: (0..v).filter(|&u| u != root).collect(),
            dist,
            eps,
        })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn dist(&self) -> &[Vec<f64>] {
        &self.dist
    }

    fn vertices(&self, set: &TestSet) -> Vec<usize> {
        set.iter().map(|t| self.vertex_of_test[t]).collect()
    }

    fn exact_regime(&self, width: usize) -> bool {
        width <= HELD_KARP_LIMIT
    }

    fn tour_exact(&self, set: &TestSet) -> Result<f64> {
        let tours = held_karp_tours(&self.dist, self.root, &self.vertices(set))?;
        Ok(*tours.last().unwrap_or(&0.0))
    }

    /// Closes the nearest-neighbor walk from the root through `set` after
    /// every prefix; returns the visiting order and each prefix tour length.
    fn nearest_neighbor_prefixes(&self, set: &TestSet) -> (Vec<usize>, Vec<f64>) {
        let mut left: Vec<usize> = set.iter().collect();
        let mut order = Vec::new();
        let mut tours = Vec::new();
        let mut at = self.root;
        let mut walked = 0.0;
        while !left.is_empty() {
            let (k, _) = left
                .iter()
                .enumerate()
                .map(|(k, &t)| (k, self.dist[at][self.vertex_of_test[t]]))
                .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
            let t = left.remove(k);
            let v = self.vertex_of_test[t];
            walked += self.dist[at][v];
            at = v;
            order.push(t);
            tours.push(walked + self.dist[at][self.root]);
        }
        (order, tours)
    }

    fn shares(&self) -> (f64, f64) {
        let grid = split_epsilon(self.eps, 2);
        (grid, 1.0 - 1.0 / (1.0 + grid))
    }
}

/// Shortest closed tour from `root` through every subset of `vertices`,
/// indexed by bitmask over `vertices`.
pub fn held_karp_tours(dist: &[Vec<f64>], root: usize, vertices: &[usize]) -> Result<Vec<f64>> {
    let m = vertices.len();
    if m > HELD_KARP_LIMIT {
        return Err(SstError::capacity("vertices in an exact tour", HELD_KARP_LIMIT, m));
    }
    let size = 1usize << m;
    // path[mask * m + last]: shortest root -> .. -> last path visiting exactly mask
    let mut path = vec![f64::INFINITY; size * m];
    for (b, &v) in vertices.iter().enumerate() {
        path[(1 << b) * m + b] = dist[root][v];
    }
    for mask in 1..size {
        for last in 0..m {
            let here = path[mask * m + last];
            if mask >> last & 1 == 0 || here.is_infinite() {
                continue;
            }
            for next in 0..m {
                if mask >> next & 1 == 1 {
                    continue;
                }
                let to = (mask | 1 << next) * m + next;
                let val = here + dist[vertices[last]][vertices[next]];
                if val < path[to] {
                    path[to] = val;
                }
            }
        }
    }
    let mut tours = vec![0.0; size];
    for (mask, tour) in tours.iter_mut().enumerate().skip(1) {
        *tour = (0..m)
            .filter(|&b| mask >> b & 1 == 1)
            .map(|b| path[mask * m + b] + dist[vertices[b]][root])
            .fold(f64::INFINITY, f64::min);
    }
    Ok(tours)
}

/// Tour from `root` through `vertices` by shortcutting a preorder walk of
/// the minimum spanning tree; at most twice the optimal tour in a metric.
pub fn double_mst_tour(dist: &[Vec<f64>], root: usize, vertices: &[usize]) -> (f64, Vec<usize>) {
    let mut nodes = vec![root];
    nodes.extend(vertices.iter().copied().filter(|&v| v != root));
    let k = nodes.len();
    let mut in_tree = vec![false; k];
    let mut parent = vec![0usize; k];
    let mut key = vec![f64::INFINITY; k];
    key[0] = 0.0;
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); k];
    for _ in 0..k {
        let u = (0..k)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)))
            .unwrap_or(0);
        in_tree[u] = true;
        if u != 0 {
            children[parent[u]].push(u);
        }
        for w in 0..k {
            let d = dist[nodes[u]][nodes[w]];
            if !in_tree[w] && d < key[w] {
                key[w] = d;
                parent[w] = u;
            }
        }
    }
    let mut order = Vec::with_capacity(k);
    let mut stack = vec![0usize];
    while let Some(u) = stack.pop() {
        order.push(nodes[u]);
        stack.extend(children[u].iter().rev());
    }
    let mut cost = 0.0;
    for w in order.windows(2) {
        cost += dist[w[0]][w[1]];
    }
    cost += dist[*order.last().unwrap_or(&root)][root];
    (cost, order[1..].to_vec())
}

impl ValueOracle for RoutingCost {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        check_ids(set, self.vertex_of_test.len())?;
        let bound = if self.exact_regime(set.len()) {
            self.tour_exact(set)?
        } else {
            double_mst_tour(&self.dist, self.root, &self.vertices(set)).0
        };
        Ok(Cover::single(set.clone(), bound))
    }
}

impl RatioOracle for RoutingCost {
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        check_ids(residual, self.vertex_of_test.len())?;
        if self.exact_regime(residual.len()) {
            let (grid, round) = self.shares();
            let solver = RoutingQuotaSolver::new(self, residual, &rewards(instance), round)?;
            let r = ratio_from_quota(instance, residual, &solver, grid)?;
            return Ok(RatioChoice {
                batch: r.batch,
                cost_bound: r.cost_bound,
            });
        }
        let (order, tours) = self.nearest_neighbor_prefixes(residual);
        let q = instance.fail_probs();
        let mut log_pass = 0.0;
        let mut best: Option<(usize, f64)> = None;
        for (k, &t) in order.iter().enumerate() {
            log_pass += (-q[t]).ln_1p();
            let ratio = tours[k] / -log_pass.exp_m1();
            if best.map_or(true, |(_, b)| improves(ratio, b)) {
                best = Some((k, ratio));
            }
        }
        let (k, _) = best.ok_or_else(|| SstError::input("empty residual"))?;
        Ok(RatioChoice {
            batch: order[..=k].iter().copied().collect(),
            cost_bound: tours[k],
        })
    }
}

impl CostModel for RoutingCost {
    fn name(&self) -> &'static str {
        "routing"
    }

    fn num_tests(&self) -> usize {
        self.vertex_of_test.len()
    }

    /// Exact tours and the k-TSP scan up to the exact limit; double-MST tours
    /// and an unaudited nearest-neighbor ratio heuristic beyond it.
    fn guarantee(&self) -> OracleGuarantee {
        if self.exact_regime(self.num_tests()) {
            OracleGuarantee {
                gamma: 1.0,
                rho: 1.0 + self.eps,
            }
        } else {
            OracleGuarantee {
                gamma: 2.0,
                rho: f64::INFINITY,
            }
        }
    }

    fn exact_cost(&self, set: &TestSet) -> Result<f64> {
        check_ids(set, self.vertex_of_test.len())?;
        self.tour_exact(set)
    }

    fn cost_table(&self, ground: &TestSet) -> Result<Vec<f64>> {
        check_ids(ground, self.vertex_of_test.len())?;
        held_karp_tours(&self.dist, self.root, &self.vertices(ground))
    }
}

/// Quota solver for tours: rewards are rounded down to multiples of
/// `r0 = min(Q / m^2, eps Q / m)`, and the cheapest tour reaching the
/// rounded target is found by scanning every subset of the ground set.
pub struct RoutingQuotaSolver {
    ground: TestSet,
    rewards: Vec<f64>,
    tours: Vec<f64>,
    idx: SubsetIndex,
    eps: f64,
}

impl RoutingQuotaSolver {
    pub fn new(model: &RoutingCost, ground: &TestSet, rewards: &[f64], eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(SstError::input(format!("rounding epsilon {eps} must lie in (0, 1)")));
        }
        check_ids(ground, rewards.len().min(model.num_tests()))?;
        Ok(Self {
            ground: ground.clone(),
            rewards: ground.iter().map(|i| rewards[i]).collect(),
            tours: held_karp_tours(&model.dist, model.root, &model.vertices(ground))?,
            idx: SubsetIndex::new(ground),
            eps,
        })
    }
}

impl BicriteriaSolver for RoutingQuotaSolver {
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
        if quota <= 0.0 {
            return Ok(Some(QuotaAnswer {
                set: TestSet::new(),
                cost_bound: 0.0,
            }));
        }
        if self.rewards.iter().sum::<f64>() < quota {
            return Ok(None);
        }
        let m = self.rewards.len() as f64;
        let r0 = (quota / (m * m)).min(self.eps * quota / m);
        // copies of each test in the co-located expansion
        let copies: Vec<u64> = self.rewards.iter().map(|r| (r / r0).floor() as u64).collect();
        let target = ((quota / r0).ceil() - m).max(1.0) as u64;
        let mut best: Option<(u32, f64)> = None;
        for mask in 1..=self.idx.full_mask() {
            let units: u64 = (0..self.rewards.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| copies[b])
                .sum();
            if units < target {
                continue;
            }
            let c = self.tours[mask as usize];
            if best.map_or(true, |(_, b)| c < b) {
                best = Some((mask, c));
            }
        }
        Ok(best.map(|(mask, c)| QuotaAnswer {
            set: self.idx.to_set(mask),
            cost_bound: c,
        }))
    }
}
