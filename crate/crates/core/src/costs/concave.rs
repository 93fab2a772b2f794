use super::{check_ids, CostModel, Cover, OracleGuarantee, RatioChoice, RatioOracle, ValueOracle};
use crate::cmp::improves;
use crate::error::{Result, SstError};
use crate::exact::{check_concave_table, exact_concave_cardinality_sst, order_by_pass_prob, ExactSolveResult};
use crate::instance::Instance;
use crate::set::TestSet;

/// `c(S) = g(|S|)` for a nondecreasing concave `g` with `g(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveCardinalityCost {
    g: Vec<f64>,
}

impl ConcaveCardinalityCost {
    /// `g` lists `g(0)..=g(n)`.
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if g.len() < 2 {
            return Err(SstError::input("g must list at least g(0) and g(1)"));
        }
        if g[0] != 0.0 {
            return Err(SstError::input(format!("g(0) must be 0, got {}", g[0])));
        }
        check_concave_table(&g, g.len() - 1)?;
        Ok(Self { g })
    }

    /// `g(k) = min(k, cap)` on `0..=n`.
    pub fn capped(n: usize, cap: f64) -> Result<Self> {
        Self::new((0..=n).map(|k| (k as f64).min(cap)).collect())
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn cost(&self, set: &TestSet) -> f64 {
        self.g[set.len()]
    }
}

impl ValueOracle for ConcaveCardinalityCost {
    fn cover(&self, set: &TestSet) -> Result<Cover> {
        check_ids(set, self.num_tests())?;
        Ok(Cover::single(set.clone(), self.cost(set)))
    }
}

impl RatioOracle for ConcaveCardinalityCost {
    /// For each size the best batch is the tests most likely to fail, so
    /// only prefixes of the residual sorted by increasing `p` compete.
    fn min_ratio(&self, instance: &Instance, residual: &TestSet) -> Result<RatioChoice> {
        check_ids(residual, self.num_tests())?;
        let order = order_by_pass_prob(instance, residual);
        let family = super::effective_family(self.family(), instance);
        let q = instance.fail_probs();
        let mut log_pass = 0.0;
        let mut best: Option<(usize, f64)> = None;
        for (k, &i) in order.iter().enumerate() {
            log_pass += (-q[i]).ln_1p();
            if !family.admits_size(k + 1) {
                break;
            }
            let ratio = self.g[k + 1] / -f64::exp_m1(log_pass);
            if best.map_or(true, |(_, b)| improves(ratio, b)) {
                best = Some((k + 1, ratio));
            }
        }
        let (len, _) = best.ok_or_else(|| SstError::input("empty residual"))?;
        Ok(RatioChoice {
            batch: order[..len].iter().copied().collect(),
            cost_bound: self.g[len],
        })
    }
}

impl CostModel for ConcaveCardinalityCost {
    fn name(&self) -> &'static str {
        "concave_cardinality"
    }

    fn num_tests(&self) -> usize {
        self.g.len() - 1
    }

    fn guarantee(&self) -> OracleGuarantee {
        OracleGuarantee::EXACT
    }

    fn exact_cost(&self, set: &TestSet) -> Result<f64> {
        check_ids(set, self.num_tests())?;
        Ok(self.cost(set))
    }

    fn exact_optimum(&self, instance: &Instance) -> Result<ExactSolveResult> {
        if instance.family() != crate::instance::BatchFamily::All {
            let table = self.cost_table(&instance.all_tests())?;
            let family = instance.family();
            return crate::exact::exact_sst_table(instance, &table, |m| {
                family.admits_size(m.count_ones() as usize)
            });
        }
        exact_concave_cardinality_sst(instance, &self.g)
    }
}
