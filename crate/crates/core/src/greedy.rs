//! Min-ratio greedy and the truncation step that makes it robust to
//! subadditive costs.
//!
//! Plain greedy repeatedly asks the ratio oracle for a batch inside the
//! residual. The modified algorithm then looks at every prefix of that trace,
//! finishes it with a single value-oracle cover of whatever is left, and keeps
//! the prefix whose cost upper bound `G_k` is smallest.

use crate::cmp::improves;
use crate::costs::{CostModel, Cover, RatioOracle, ValueOracle};
use crate::error::{Result, SstError};
use crate::instance::{expected_cost, BatchSequence, CostedSequence, Instance};
use crate::set::TestSet;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyTrace {
    pub batches: Vec<TestSet>,
    pub cost_bounds: Vec<f64>,
    /// `residuals[j]` is the residual before step `j`; the last entry is empty.
    pub residuals: Vec<TestSet>,
    /// Ratio `C_j / (1 - P(B_j))` at each step.
    pub ratios: Vec<f64>,
}

impl GreedyTrace {
    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn sequence(&self) -> BatchSequence {
        BatchSequence::new(self.batches.clone())
    }

    pub fn costed(&self) -> CostedSequence {
        CostedSequence {
            sequence: self.sequence(),
            batch_cost_bounds: self.cost_bounds.clone(),
        }
    }
}

pub fn plain_greedy(instance: &Instance, ratio: &impl RatioOracle) -> Result<GreedyTrace> {
    let mut residual = instance.all_tests();
    let mut trace = GreedyTrace {
        batches: Vec::new(),
        cost_bounds: Vec::new(),
        residuals: vec![residual.clone()],
        ratios: Vec::new(),
    };
    while !residual.is_empty() {
        let choice = ratio.min_ratio(instance, &residual)?;
        let batch = choice.batch.intersection(&residual);
        if batch.is_empty() {
            return Err(SstError::contract(format!(
                "ratio oracle returned {} outside residual {residual}",
                choice.batch
            )));
        }
        if !(choice.cost_bound.is_finite() && choice.cost_bound >= 0.0) {
            return Err(SstError::contract(format!(
                "ratio oracle returned cost bound {}",
                choice.cost_bound
            )));
        }
        let fail = instance.fail_prob(&batch)?;
        if fail <= 0.0 {
            return Err(SstError::contract(format!(
                "batch {batch} passes with probability 1, no progress possible"
            )));
        }
        residual = residual.difference(&batch);
        trace.ratios.push(choice.cost_bound / fail);
        trace.batches.push(batch);
        trace.cost_bounds.push(choice.cost_bound);
        trace.residuals.push(residual.clone());
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedSolution {
    pub k: usize,
    /// `B_1..B_k` followed by the residual as one batch (omitted when empty).
    pub sequence: BatchSequence,
    pub final_cover: Cover,
    pub final_bound: f64,
    pub upper_bound: f64,
    /// Per-batch bounds `C_1..C_k, D_k` matching `sequence`.
    pub batch_cost_bounds: Vec<f64>,
}

impl TruncatedSolution {
    /// The sequence with the final residual split into disjoint pieces of
    /// its cover, so every batch is in the family. Bounds stay dominated
    /// because each piece costs at most the cover batch it came from.
    pub fn executable_sequence(&self) -> CostedSequence {
        let k = self.k;
        let mut batches = self.sequence.batches[..k].to_vec();
        let mut bounds = self.batch_cost_bounds[..k].to_vec();
        if let Some(residual) = self.sequence.batches.get(k) {
            if self.final_cover.batches.len() <= 1 {
                batches.push(residual.clone());
                bounds.push(self.final_bound);
            } else {
                let pieces = self.final_cover.disjoint_pieces(residual);
                let share = self.final_bound;
                for (i, p) in pieces.into_iter().enumerate() {
                    batches.push(p);
                    // the whole cover bound is charged to the first piece
                    bounds.push(if i == 0 { share } else { 0.0 });
                }
            }
        }
        CostedSequence {
            sequence: BatchSequence::new(batches),
            batch_cost_bounds: bounds,
        }
    }
}

/// All `ℓ + 1` truncations of `trace`, in order of `k`.
pub fn enumerate_truncations(
    instance: &Instance,
    trace: &GreedyTrace,
    value: &impl ValueOracle,
) -> Result<Vec<TruncatedSolution>> {
    let ell = trace.len();
    let mut out = Vec::with_capacity(ell + 1);
    // reach = P(B_1 ∪ .. ∪ B_k), prefix = sum_{j<=k} P(∪_{h<j} B_h) C_j
    let mut reach = 1.0;
    let mut prefix = 0.0;
    for k in 0..=ell {
        if k > 0 {
            prefix += reach * trace.cost_bounds[k - 1];
            reach *= instance.pass_prob(&trace.batches[k - 1])?;
        }
        let residual = &trace.residuals[k];
        let cover = if residual.is_empty() {
            Cover::empty()
        } else {
            let cover = value.cover(residual)?;
            if !cover.covers(residual) {
                return Err(SstError::contract(format!(
                    "value oracle cover misses part of {residual}"
                )));
            }
            if !(cover.bound.is_finite() && cover.bound >= 0.0) {
                return Err(SstError::contract(format!(
                    "value oracle returned bound {}",
                    cover.bound
                )));
            }
            cover
        };
        let mut batches = trace.batches[..k].to_vec();
        let mut bounds = trace.cost_bounds[..k].to_vec();
        if !residual.is_empty() {
            batches.push(residual.clone());
            bounds.push(cover.bound);
        }
        out.push(TruncatedSolution {
            k,
            sequence: BatchSequence::new(batches),
            final_bound: cover.bound,
            upper_bound: prefix + reach * cover.bound,
            final_cover: cover,
            batch_cost_bounds: bounds,
        });
    }
    Ok(out)
}

/// Selects the truncation with least `G_k`, ties to the smallest `k`.
pub fn select_truncation(candidates: Vec<TruncatedSolution>) -> Result<TruncatedSolution> {
    let mut best: Option<TruncatedSolution> = None;
    for c in candidates {
        if best
            .as_ref()
            .map_or(true, |b| improves(c.upper_bound, b.upper_bound))
        {
            best = Some(c);
        }
    }
    best.ok_or_else(|| SstError::input("no truncations to choose from"))
}

pub fn modified_greedy(
    instance: &Instance,
    ratio: &impl RatioOracle,
    value: &impl ValueOracle,
) -> Result<(TruncatedSolution, GreedyTrace)> {
    let trace = plain_greedy(instance, ratio)?;
    let chosen = select_truncation(enumerate_truncations(instance, &trace, value)?)?;
    Ok((chosen, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub plain_cost: f64,
    pub modified_cost: f64,
    pub modified_bound: f64,
    /// `None` when the instance is beyond exhaustive reach.
    pub exact_opt: Option<f64>,
}

/// Plain greedy, modified greedy and (when small enough) the optimum, all
/// measured with the model's true cost.
pub fn gap_report(instance: &Instance, model: &dyn CostModel) -> Result<GapReport> {
    let (chosen, trace) = modified_greedy(instance, &model, &model)?;
    let cost = |s: &TestSet| model.exact_cost(s);
    let plain_cost = true_cost(instance, &trace.sequence(), cost)?;
    let modified_cost = true_cost(
        instance,
        &chosen.executable_sequence().sequence,
        cost,
    )?;
    let exact_opt = match model.exact_optimum(instance) {
        Ok(r) => Some(r.opt_cost),
        Err(SstError::Capacity { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(GapReport {
        plain_cost,
        modified_cost,
        modified_bound: chosen.upper_bound,
        exact_opt,
    })
}

/// Expected cost under a fallible cost function.
pub fn true_cost(
    instance: &Instance,
    seq: &BatchSequence,
    cost: impl Fn(&TestSet) -> Result<f64>,
) -> Result<f64> {
    let costs = seq.iter().map(&cost).collect::<Result<Vec<f64>>>()?;
    let position = |b: &TestSet| seq.iter().position(|x| x == b).map_or(0.0, |j| costs[j]);
    expected_cost(instance, seq, position)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::RatioChoice;
    use crate::exact::ExactOracles;

    fn bad4() -> Instance {
        Instance::from_fail_probs(vec![0.25, 0.125, 0.0625, 0.03125]).unwrap()
    }

    fn capped(s: &TestSet) -> f64 {
        s.len().min(2) as f64
    }

    #[test]
    fn single_test_instance() {
        let inst = Instance::from_pass_probs(vec![0.4]).unwrap();
        let o = ExactOracles::from_fn(&inst, |s| s.len() as f64).unwrap();
        let (sol, trace) = modified_greedy(&inst, &o, &o).unwrap();
        assert_eq!(trace.batches, vec![TestSet::from([0])]);
        assert_eq!(sol.sequence, BatchSequence::single(TestSet::from([0])));
    }

    #[test]
    fn additive_trace_picks_singletons() {
        let inst = Instance::from_pass_probs(vec![0.5, 0.9]).unwrap();
        let o = ExactOracles::from_fn(&inst, |s| s.len() as f64).unwrap();
        let trace = plain_greedy(&inst, &o).unwrap();
        assert_eq!(trace.batches, vec![TestSet::from([0]), TestSet::from([1])]);
        assert_eq!(trace.residuals.last().unwrap(), &TestSet::new());
    }

    #[test]
    fn bad_instance_truncations() {
        let inst = bad4();
        let o = ExactOracles::from_fn(&inst, capped).unwrap();
        let trace = plain_greedy(&inst, &o).unwrap();
        assert_eq!(trace.len(), 4);
        assert!(trace.batches.iter().all(|b| b.len() == 1));
        let all = enumerate_truncations(&inst, &trace, &o).unwrap();
        assert_eq!(all.len(), 5);
        assert_eq!(all[0].upper_bound, 2.0);
        assert_eq!(all[0].sequence, BatchSequence::single(inst.all_tests()));
        assert!((all[4].upper_bound - 3.021484375).abs() < 1e-12);
        assert_eq!(all[4].final_bound, 0.0);
        let best = select_truncation(all).unwrap();
        assert_eq!(best.k, 0);
        assert_eq!(best.upper_bound, 2.0);
    }

    #[test]
    fn bounds_dominate_true_costs() {
        let inst = bad4();
        let o = ExactOracles::from_fn(&inst, capped).unwrap();
        let trace = plain_greedy(&inst, &o).unwrap();
        for t in enumerate_truncations(&inst, &trace, &o).unwrap() {
            let e = expected_cost(&inst, &t.sequence, capped).unwrap();
            assert!(t.upper_bound >= e - 1e-12);
        }
    }

    struct Outside;

    impl RatioOracle for Outside {
        fn min_ratio(&self, _: &Instance, _: &TestSet) -> Result<RatioChoice> {
            Ok(RatioChoice {
                batch: TestSet::from([99]),
                cost_bound: 1.0,
            })
        }
    }

    struct Partial;

    impl ValueOracle for Partial {
        fn cover(&self, _: &TestSet) -> Result<Cover> {
            Ok(Cover::single(TestSet::from([0]), 1.0))
        }
    }

    #[test]
    fn oracle_violations_are_reported() {
        let inst = Instance::from_pass_probs(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            plain_greedy(&inst, &Outside),
            Err(SstError::Contract(_))
        ));
        let o = ExactOracles::from_fn(&inst, |s| s.len() as f64).unwrap();
        let trace = plain_greedy(&inst, &o).unwrap();
        assert!(matches!(
            enumerate_truncations(&inst, &trace, &Partial),
            Err(SstError::Contract(_))
        ));
    }

    #[test]
    fn executable_sequence_splits_multi_batch_covers() {
        let sol = TruncatedSolution {
            k: 0,
            sequence: BatchSequence::single(TestSet::from([0, 1, 2])),
            final_cover: Cover {
                bound: 5.0,
                batches: vec![TestSet::from([0, 1]), TestSet::from([1, 2])],
            },
            final_bound: 5.0,
            upper_bound: 5.0,
            batch_cost_bounds: vec![5.0],
        };
        let ex = sol.executable_sequence();
        assert_eq!(
            ex.sequence.batches,
            vec![TestSet::from([0, 1]), TestSet::from([2])]
        );
        assert_eq!(ex.batch_cost_bounds, vec![5.0, 0.0]);
    }
}
