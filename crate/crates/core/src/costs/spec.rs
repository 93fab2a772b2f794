use super::{
    AdditiveCost, BatchSetupCost, CapacitatedTreeCost, ConcaveCardinalityCost, CostModel, Machine,
    MachineActivationCost, RoutingCost, TreeCost, TreeNodeSpec,
};
use crate::error::{Result, SstError};
use crate::hardness::AndCoverageCost;
use crate::instance::BatchFamily;
use serde::{Deserialize, Serialize};

/// Serialized form of a cost model, tagged by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostModelSpec {
    Additive {
        costs: Vec<f64>,
    },
    BatchSetup {
        setup: f64,
        costs: Vec<f64>,
    },
    ConcaveCardinality {
        g: Vec<f64>,
    },
    Tree {
        nodes: Vec<TreeNodeSpec>,
        leaf_of_test: Vec<usize>,
    },
    TreeCapacitated {
        nodes: Vec<TreeNodeSpec>,
        leaf_of_test: Vec<usize>,
        k: usize,
    },
    Machines {
        machines: Vec<Machine>,
    },
    Routing {
        root: usize,
        dist: Vec<Vec<f64>>,
    },
    AndCoverage {
        machine_sets: Vec<Vec<usize>>,
    },
}

impl CostModelSpec {
    pub fn type_name(&self) -> &'static str {
        match self {
            Self::Additive { .. } => "additive",
            Self::BatchSetup { .. } => "batch_setup",
            Self::ConcaveCardinality { .. } => "concave_cardinality",
            Self::Tree { .. } => "tree",
            Self::TreeCapacitated { .. } => "tree_capacitated",
            Self::Machines { .. } => "machines",
            Self::Routing { .. } => "routing",
            Self::AndCoverage { .. } => "and_coverage",
        }
    }

    /// The batch family the model imposes, if any.
    pub fn family(&self) -> BatchFamily {
        match self {
            Self::TreeCapacitated { k, .. } => BatchFamily::MaxSize { k: *k },
            _ => BatchFamily::All,
        }
    }

    /// Builds the model for an instance with `n` tests; `eps` tunes the
    /// approximate ratio oracles.
    pub fn build(&self, n: usize, eps: f64) -> Result<Box<dyn CostModel>> {
        let model: Box<dyn CostModel> = match self {
            Self::Additive { costs } => Box::new(AdditiveCost::new(costs.clone())?),
            Self::BatchSetup { setup, costs } => {
                Box::new(BatchSetupCost::new(*setup, costs.clone(), eps)?)
            }
            Self::ConcaveCardinality { g } => Box::new(ConcaveCardinalityCost::new(g.clone())?),
            Self::Tree {
                nodes,
                leaf_of_test,
            } => Box::new(TreeCost::new(nodes.clone(), leaf_of_test.clone(), eps)?),
            Self::TreeCapacitated {
                nodes,
                leaf_of_test,
                k,
            } => Box::new(CapacitatedTreeCost::new(
                TreeCost::new(nodes.clone(), leaf_of_test.clone(), eps)?,
                *k,
            )?),
            Self::Machines { machines } => {
                Box::new(MachineActivationCost::new(n, machines.clone())?)
            }
            Self::Routing { root, dist } => Box::new(RoutingCost::new(*root, dist.clone(), eps)?),
            Self::AndCoverage { machine_sets } => {
                Box::new(AndCoverageCost::new(machine_sets.clone())?)
            }
        };
        if model.num_tests() != n {
            return Err(SstError::input(format!(
                "cost_model ({}) describes {} tests but the instance has {n}",
                self.type_name(),
                model.num_tests()
            )));
        }
        Ok(model)
    }
}
