#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sst_core::costs::{CostModel, CostModelSpec};
use sst_core::gen;
use sst_core::io::{InstanceFile, Probability};
use sst_core::{Instance, TestSet};

pub const MODELS: [&str; 8] = [
    "additive",
    "batch_setup",
    "concave_cardinality",
    "tree",
    "tree_capacitated",
    "machines",
    "routing",
    "and_coverage",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random instance file of the given model type with `n` tests.
pub fn random_file(model: &str, n: usize, rng: &mut ChaCha8Rng) -> InstanceFile {
    let seed: u64 = rng.gen();
    let mut file = match model {
        "additive" => gen::random_additive(n, seed),
        "tree" => gen::random_tree(n, seed),
        "machines" => gen::random_machines(n, seed),
        "routing" => gen::random_metric(n, seed),
        "tree_capacitated" => {
            let mut f = gen::random_tree(n, seed);
            if let CostModelSpec::Tree { nodes, leaf_of_test } = f.cost_model {
                f.cost_model = CostModelSpec::TreeCapacitated {
                    nodes,
                    leaf_of_test,
                    k: rng.gen_range(1..=3),
                };
            }
            f
        }
        "batch_setup" => {
            let mut f = gen::random_additive(n, seed);
            if let CostModelSpec::Additive { costs } = f.cost_model {
                f.cost_model = CostModelSpec::BatchSetup {
                    setup: rng.gen_range(0.0..20.0),
                    costs,
                };
            }
            f
        }
        "concave_cardinality" => {
            let mut inc: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
            inc.sort_by(|a, b| b.total_cmp(a));
            let mut g = vec![0.0];
            for d in inc {
                g.push(g.last().unwrap() + d);
            }
            InstanceFile {
                n,
                pass_probs: random_probs(n, rng),
                cost_model: CostModelSpec::ConcaveCardinality { g },
                batch_family: None,
            }
        }
        "and_coverage" => {
            let m = n / 2 + 2;
            let machine_sets = (0..n)
                .map(|_| {
                    let k = rng.gen_range(1..=3.min(m));
                    (0..k).map(|_| rng.gen_range(0..m)).collect()
                })
                .collect();
            InstanceFile {
                n,
                pass_probs: random_probs(n, rng),
                cost_model: CostModelSpec::AndCoverage { machine_sets },
                batch_family: None,
            }
        }
        other => panic!("unknown model {other}"),
    };
    // wider spread of probabilities than the generators use
    file.pass_probs = random_probs(n, rng);
    file
}

pub fn random_probs(n: usize, rng: &mut ChaCha8Rng) -> Vec<Probability> {
    (0..n)
        .map(|_| Probability::Text(format!("0.{:03}", rng.gen_range(10..=990))))
        .collect()
}

pub fn random_case(
    model: &str,
    n: usize,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> (Instance, Box<dyn CostModel>) {
    let loaded = random_file(model, n, rng).load(eps).unwrap();
    (loaded.instance, loaded.model)
}

/// A uniformly random nonempty subset of `0..n`.
pub fn random_subset(n: usize, rng: &mut ChaCha8Rng) -> TestSet {
    loop {
        let s: TestSet = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}
