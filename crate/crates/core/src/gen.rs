//! Instance generators. Everything is deterministic in the seed.

use crate::costs::{CostModelSpec, Machine, TreeNodeSpec};
use crate::error::{Result, SstError};
use crate::io::{InstanceFile, Probability};
use crate::set::TestSet;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    BadGreedy,
    RandomAdditive,
    RandomTree,
    RandomMachines,
    RandomMetric,
}

impl std::str::FromStr for GenKind {
    type Err = SstError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bad_greedy" => Self::BadGreedy,
            "random_additive" => Self::RandomAdditive,
            "random_tree" => Self::RandomTree,
            "random_machines" => Self::RandomMachines,
            "random_metric" => Self::RandomMetric,
            _ => {
                return Err(SstError::input(format!(
                    "unknown generator `{s}` (expected bad_greedy, random_additive, \
                     random_tree, random_machines or random_metric)"
                )))
            }
        })
    }
}

pub fn generate(kind: GenKind, n: usize, seed: u64) -> Result<InstanceFile> {
    if n == 0 {
        return Err(SstError::input("n must be at least 1"));
    }
    match kind {
        GenKind::BadGreedy => bad_greedy(n),
        GenKind::RandomAdditive => Ok(random_additive(n, seed)),
        GenKind::RandomTree => Ok(random_tree(n, seed)),
        GenKind::RandomMachines => Ok(random_machines(n, seed)),
        GenKind::RandomMetric => Ok(random_metric(n, seed)),
    }
}

/// `1 - 2^-k` as an exact decimal string.
pub fn one_minus_pow2(k: u32) -> String {
    let ten_k = BigUint::from(10u32).pow(k);
    let digits = (&ten_k - BigUint::from(5u32).pow(k)).to_string();
    format!("0.{digits:0>width$}", width = k as usize)
}

/// `q_i = 2^-(i+1)` for tests `i = 1..n` and cost `min(|S|, sqrt n)`.
pub fn bad_greedy(n: usize) -> Result<InstanceFile> {
    let root = (n as f64).sqrt().round() as usize;
    if root * root != n {
        return Err(SstError::input(format!("bad_greedy needs a perfect square n, got {n}")));
    }
    let pass_probs = (1..=n)
        .map(|i| Probability::Text(one_minus_pow2(i as u32 + 1)))
        .collect();
    let g = (0..=n).map(|k| k.min(root) as f64).collect();
    Ok(InstanceFile {
        n,
        pass_probs,
        cost_model: CostModelSpec::ConcaveCardinality { g },
        batch_family: None,
    })
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pass probability with two decimals in `[0.05, 0.95]`.
fn random_prob(rng: &mut ChaCha8Rng) -> Probability {
    let hundredths: u32 = rng.gen_range(5..=95);
    Probability::Text(format!("0.{hundredths:02}"))
}

/// Cost with two decimals in `[1, 10]`.
fn random_cost(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(100..=1000) as f64 / 100.0
}

pub fn random_additive(n: usize, seed: u64) -> InstanceFile {
    let mut rng = rng(seed);
    let pass_probs = (0..n).map(|_| random_prob(&mut rng)).collect();
    let costs = (0..n).map(|_| random_cost(&mut rng)).collect();
    InstanceFile {
        n,
        pass_probs,
        cost_model: CostModelSpec::Additive { costs },
        batch_family: None,
    }
}

/// A random rooted tree with a zero-weight root, `max(1, n/2)` internal
/// nodes and one leaf per test.
pub fn random_tree(n: usize, seed: u64) -> InstanceFile {
    let mut rng = rng(seed);
    let pass_probs = (0..n).map(|_| random_prob(&mut rng)).collect();
    let internal = (n / 2).max(1);
    let mut nodes = vec![TreeNodeSpec {
        id: 0,
        weight: 0.0,
        parent: None,
    }];
    for id in 1..=internal {
        nodes.push(TreeNodeSpec {
            id,
            weight: random_cost(&mut rng),
            parent: Some(rng.gen_range(0..id)),
        });
    }
    let mut leaf_of_test = Vec::with_capacity(n);
    for t in 0..n {
        let id = internal + 1 + t;
        nodes.push(TreeNodeSpec {
            id,
            weight: random_cost(&mut rng),
            parent: Some(rng.gen_range(0..=internal)),
        });
        leaf_of_test.push(id);
    }
    InstanceFile {
        n,
        pass_probs,
        cost_model: CostModelSpec::Tree {
            nodes,
            leaf_of_test,
        },
        batch_family: None,
    }
}

/// `n/2 + 1` machines, each running every test with probability 0.4;
/// uncovered tests go to a random machine.
pub fn random_machines(n: usize, seed: u64) -> InstanceFile {
    let mut rng = rng(seed);
    let pass_probs = (0..n).map(|_| random_prob(&mut rng)).collect();
    let count = n / 2 + 1;
    let mut sets: Vec<Vec<usize>> = (0..count)
        .map(|_| (0..n).filter(|_| rng.gen_bool(0.4)).collect())
        .collect();
    for t in 0..n {
        if !sets.iter().any(|s| s.contains(&t)) {
            let j = rng.gen_range(0..count);
            sets[j].push(t);
        }
    }
    let machines = sets
        .into_iter()
        .map(|tests| Machine {
            cost: random_cost(&mut rng),
            tests: TestSet::from(tests),
        })
        .collect();
    InstanceFile {
        n,
        pass_probs,
        cost_model: CostModelSpec::Machines { machines },
        batch_family: None,
    }
}

/// Euclidean distances between integer points in `[0, 100]^2`; vertex 0 is the root.
pub fn random_metric(n: usize, seed: u64) -> InstanceFile {
    let mut rng = rng(seed);
    let pass_probs = (0..n).map(|_| random_prob(&mut rng)).collect();
    let points: Vec<(f64, f64)> = (0..=n)
        .map(|_| (rng.gen_range(0..=100) as f64, rng.gen_range(0..=100) as f64))
        .collect();
    let dist = points
        .iter()
        .map(|a| {
            points
                .iter()
                .map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
                .collect()
        })
        .collect();
    InstanceFile {
        n,
        pass_probs,
        cost_model: CostModelSpec::Routing { root: 0, dist },
        batch_family: None,
    }
}
