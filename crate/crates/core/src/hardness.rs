//! Densest-r-edges (DrE) embedded in testing: one test per edge, each
//! needing both endpoint machines, all failing with probability
//! `ln|E| / r`. A cheap testing sequence yields a small vertex set with many
//! induced edges, and a bicriteria DrE solver can be amplified to a full one.

use crate::cmp::improves;
use crate::costs::{
    check_ids, CostModel, Cover, OracleGuarantee, RatioChoice, RatioOracle, ValueOracle,
};
use crate::error::{Result, SstError};
use crate::exact::{self, EXACT_LIMIT};
use crate::instance::{expected_cost, BatchSequence, Instance};
use crate::set::{submasks_ascending, TestSet};
use serde::{Deserialize, Serialize};

/// Largest vertex count for brute-force DrE.
pub const DRE_VERTEX_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DreInstance {
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
    pub r: usize,
}

impl DreInstance {
    pub fn new(vertices: usize, edges: Vec<[usize; 2]>, r: usize) -> Result<Self> {
        let dre = Self { vertices, edges, r };
        dre.validate()?;
        Ok(dre)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, &[u, v]) in self.edges.iter().enumerate() {
            if u == v {
                return Err(SstError::input(format!("edge {i} is a self-loop at {u}")));
            }
            if u >= self.vertices || v >= self.vertices {
                return Err(SstError::input(format!(
                    "edge {i} = ({u}, {v}) has an endpoint outside 0..{}",
                    self.vertices
                )));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(SstError::input(format!("edge ({u}, {v}) is repeated")));
            }
        }
        if self.r < 1 || self.r > self.edges.len() {
            return Err(SstError::input(format!(
                "r = {} must lie in 1..={} (the number of edges)",
                self.r,
                self.edges.len()
            )));
        }
        Ok(())
    }

    /// Number of edges with both endpoints in `set`.
    pub fn induced_edges(&self, set: &[usize]) -> usize {
        let mut inside = vec![false; self.vertices];
        for &v in set {
            inside[v] = true;
        }
        self.edges
            .iter()
            .filter(|[u, v]| inside[*u] && inside[*v])
            .count()
    }
}

/// `c(B) = |union of M_i over i in B|`, a coverage function.
#[derive(Debug, Clone, PartialEq)]
pub struct AndCoverageCost {
    machine_sets: Vec<TestSet>,
}

impl AndCoverageCost {
    pub fn new(machine_sets: Vec<Vec<usize>>) -> Result<Self> {
        if machine_sets.is_empty() {
            return Err(SstError::input("coverage model needs at least one test"));
        }
        Ok(Self {
            machine_sets: machine_sets.into_iter().map(TestSet::from).collect(),
        })
    }

    pub fn machine_sets(&self) -> &[TestSet] {
        &self.machine_sets
    }

    pub fn cost(&self, batch: &TestSet) -> f64 {
        batch
            .iter()
            .fold(TestSet::new(), |acc, i| acc.union(&self.machine_sets[i]))
            .len() as f64
    }

    fn machines_of(&self, batch: &TestSet) -> TestSet {
        batch
            .iter()
            .fold(TestSet::new(), |acc, i| acc.union(&self.machine_sets[i]))
    }
}

impl ValueOracle for AndCoverageCost {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        check_ids(set, self.machine_sets.len())?;
        Ok(Cover::single(set.clone(), self.cost(set)))
    }
}

impl RatioOracle for AndCoverageCost {
    /// Exhaustive up to the exact limit. Beyond it only singletons and the
    /// tests whose machines all lie within one test's machines plus one more
    /// machine are tried, without an audited factor.
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        check_ids(residual, self.machine_sets.len())?;
        if residual.len() <= EXACT_LIMIT.min(16) {
            let (batch, _) = exact::exact_ratio(
                instance,
                residual,
                |b| self.cost(b),
                &crate::instance::BatchFamily::All,
            )?;
            let cost_bound = self.cost(&batch);
            return Ok(RatioChoice { batch, cost_bound });
        }
        let mut best: Option<(TestSet, f64)> = None;
        let machines: TestSet = self.machines_of(residual);
        for m in machines.iter() {
            // everything in the residual that needs only machines {m} plus one neighbour
            let star: TestSet = residual
                .iter()
                .filter(|&i| self.machine_sets[i].contains(m))
                .collect();
            let mut candidates: Vec<TestSet> = star.iter().map(TestSet::singleton).collect();
            candidates.push(star);
            for c in candidates {
                if c.is_empty() {
                    continue;
                }
                let ratio = self.cost(&c) / instance.fail_prob(&c)?;
                if best.as_ref().map_or(true, |b| improves(ratio, b.1)) {
                    best = Some((c, ratio));
                }
            }
        }
        let (batch, _) = best.ok_or_else(|| SstError::input("empty residual"))?;
        let cost_bound = self.cost(&batch);
        Ok(RatioChoice { batch, cost_bound })
    }
}

impl CostModel for AndCoverageCost {
    fn name(&self) -> &'static str {
        "and_coverage"
    }

    fn num_tests(&self) -> usize {
        self.machine_sets.len()
    }

    fn guarantee(&self) -> OracleGuarantee {
        OracleGuarantee {
            gamma: 1.0,
            rho: if self.machine_sets.len() <= 16 {
                1.0
            } else {
                f64::INFINITY
            },
        }
    }

    fn exact_cost(&self, set: &TestSet) -> Result<f64> {
        check_ids(set, self.machine_sets.len())?;
        Ok(self.cost(set))
    }
}

/// The testing instance for a DrE instance: one test per edge with failure
/// probability `ln|E| / r`, needing both endpoint machines.
pub fn dre_to_sst(dre: &DreInstance) -> Result<(Instance, AndCoverageCost)> {
    dre.validate()?;
    let m = dre.edges.len();
    if m <= 1 {
        return Err(SstError::input(
            "the reduction needs at least two edges (with one edge ln|E| = 0 and no test can fail)",
        ));
    }
    let ln_e = (m as f64).ln();
    if dre.r as f64 <= ln_e {
        return Err(SstError::input(format!(
            "the reduction requires r > ln|E| = {ln_e:.4}, got r = {}; below that threshold \
             DrE is easy to approximate within a log factor directly",
            dre.r
        )));
    }
    let q = ln_e / dre.r as f64;
    let instance = Instance::from_fail_probs(vec![q; m])?;
    let cost = AndCoverageCost::new(dre.edges.iter().map(|e| e.to_vec()).collect())?;
    Ok((instance, cost))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovery {
    /// Number of leading batches kept.
    pub j: usize,
    pub vertices: Vec<usize>,
    pub induced_edges: usize,
    pub sequence_cost: f64,
    /// `|S| <= 2 * cost`.
    pub size_ok: bool,
    /// `E(S) >= r ln 2 / ln|E|`. Not implied in general: it needs
    /// `(1 - q)^k >= e^(-qk)`, which points the wrong way.
    pub edges_ok: bool,
    pub edge_target: f64,
    /// `E(S) >= ln 2 / -ln(1 - q)`, which does follow from `(1 - q)^k < 1/2`.
    pub log_edges_ok: bool,
    pub log_edge_target: f64,
}

/// Keeps the batches up to the last one still reached with probability at
/// least 1/2, i.e. the largest `j` with `P(B_1) .. P(B_{j-1}) >= 1/2`, and
/// returns the endpoints of their edges.
pub fn recover_dre(dre: &DreInstance, seq: &BatchSequence) -> Result<Recovery> {
    let (instance, cost) = dre_to_sst(dre)?;
    let sequence_cost = expected_cost(&instance, seq, |b| cost.cost(b))?;
    let mut reach = 1.0;
    let mut j = 0;
    for (idx, b) in seq.iter().enumerate() {
        if reach >= 0.5 {
            j = idx + 1;
        }
        reach *= instance.pass_prob(b)?;
    }
    let kept = seq.batches[..j]
        .iter()
        .fold(TestSet::new(), |acc, b| acc.union(b));
    let vertices: Vec<usize> = cost.machines_of(&kept).iter().collect();
    let induced_edges = dre.induced_edges(&vertices);
    let edge_target = dre.r as f64 * 2f64.ln() / (dre.edges.len() as f64).ln();
    let log_edge_target = 2f64.ln() / -(-instance.fail_probs()[0]).ln_1p();
    Ok(Recovery {
        log_edges_ok: induced_edges as f64 >= log_edge_target * (1.0 - 1e-12),
        log_edge_target,
        j,
        size_ok: vertices.len() as f64 <= 2.0 * sequence_cost * (1.0 + 1e-12),
        edges_ok: induced_edges as f64 >= edge_target * (1.0 - 1e-12),
        vertices,
        induced_edges,
        sequence_cost,
        edge_target,
    })
}

/// Smallest vertex set inducing at least `target` of `edges`, by enumeration.
pub fn brute_force_dense(
    vertices: usize,
    edges: &[[usize; 2]],
    target: usize,
) -> Result<Option<Vec<usize>>> {
    if vertices > DRE_VERTEX_LIMIT {
        return Err(SstError::capacity(
            "vertices for brute-force DrE",
            DRE_VERTEX_LIMIT,
            vertices,
        ));
    }
    if target == 0 {
        return Ok(Some(Vec::new()));
    }
    let masks: Vec<u32> = edges.iter().map(|[u, v]| 1 << u | 1 << v).collect();
    let mut best: Option<u32> = None;
    let full = if vertices == 0 { 0 } else { u32::MAX >> (32 - vertices) };
    for s in submasks_ascending(full) {
        let size = s.count_ones();
        if best.is_some_and(|b| b.count_ones() <= size) {
            continue;
        }
        if masks.iter().filter(|&&e| e & s == e).count() >= target {
            best = Some(s);
        }
    }
    Ok(best.map(|s| (0..vertices).filter(|v| s >> v & 1 == 1).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundAudit {
    pub sst_opt: f64,
    pub dre_opt: usize,
    /// `sst_opt <= 2 * dre_opt`.
    pub holds: bool,
}

/// Compares the testing optimum of the reduced instance with twice the DrE optimum.
pub fn lb_dre_audit(dre: &DreInstance) -> Result<LowerBoundAudit> {
    const EDGE_LIMIT: usize = 12;
    if dre.edges.len() > EDGE_LIMIT {
        return Err(SstError::capacity("edges for the exact audit", EDGE_LIMIT, dre.edges.len()));
    }
    let (instance, cost) = dre_to_sst(dre)?;
    let sst_opt = cost.exact_optimum(&instance)?.opt_cost;
    let dre_opt = brute_force_dense(dre.vertices, &dre.edges, dre.r)?
        .ok_or_else(|| SstError::input("r exceeds the number of edges"))?
        .len();
    Ok(LowerBoundAudit {
        sst_opt,
        dre_opt,
        holds: sst_opt <= 2.0 * dre_opt as f64 * (1.0 + 1e-12),
    })
}

/// An `(alpha, beta)`-bicriteria DrE solver: at most `alpha` times the
/// optimal number of vertices, inducing at least `target / beta` edges.
pub trait DreBicriteria {
    fn alpha(&self) -> f64;

    fn beta(&self) -> f64;

    fn solve(&self, vertices: usize, edges: &[[usize; 2]], target: usize) -> Result<Vec<usize>>;
}

/// Brute force for `ceil(target / beta)` edges; `beta = 1` is an exact solver.
#[derive(Debug, Clone, Copy)]
pub struct BruteForceFraction {
    pub beta: usize,
}

impl DreBicriteria for BruteForceFraction {
    fn alpha(&self) -> f64 {
        1.0
    }

    fn beta(&self) -> f64 {
        self.beta as f64
    }

    fn solve(&self, vertices: usize, edges: &[[usize; 2]], target: usize) -> Result<Vec<usize>> {
        let want = target.div_ceil(self.beta.max(1));
        brute_force_dense(vertices, edges, want)?
            .ok_or_else(|| SstError::input("target exceeds the available edges"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Amplified {
    pub vertices: Vec<usize>,
    pub induced_edges: usize,
    pub iterations: usize,
}

/// Calls the solver on the edges not yet induced, with the remaining target,
/// until `r` edges are induced.
pub fn amplify_bicriteria(dre: &DreInstance, solver: &impl DreBicriteria) -> Result<Amplified> {
    dre.validate()?;
    let mut chosen = vec![false; dre.vertices];
    let mut induced = 0;
    let mut iterations = 0;
    while induced < dre.r {
        let residual: Vec<[usize; 2]> = dre
            .edges
            .iter()
            .copied()
            .filter(|[u, v]| !(chosen[*u] && chosen[*v]))
            .collect();
        let target = (dre.r - induced).min(residual.len());
        let picked = solver.solve(dre.vertices, &residual, target)?;
        iterations += 1;
        for &v in &picked {
            if v >= dre.vertices {
                return Err(SstError::contract(format!("solver returned unknown vertex {v}")));
            }
            chosen[v] = true;
        }
        let set: Vec<usize> = (0..dre.vertices).filter(|&v| chosen[v]).collect();
        let now = dre.induced_edges(&set);
        if now <= induced {
            return Err(SstError::contract("DrE solver added no induced edges"));
        }
        induced = now;
    }
    let vertices: Vec<usize> = (0..dre.vertices).filter(|&v| chosen[v]).collect();
    Ok(Amplified {
        induced_edges: dre.induced_edges(&vertices),
        vertices,
        iterations,
    })
}
