//! Problem instances, batch sequences and evaluation of the expected testing cost.
//!
//! Failure probabilities `q_i` are the primary representation. Pass
//! probabilities `p_i = 1 - q_i` are kept alongside, but anything that needs
//! `1 - P(B)` goes through `q` in log space so that tiny failure
//! probabilities (down to `2^-257` and below) survive.

use crate::error::{Result, SstError};
use crate::set::TestSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Batches with more tests than this have their pass probability computed in log space.
pub const DIRECT_PRODUCT_LIMIT: usize = 32;

/// Which test sets may be run together as one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BatchFamily {
    #[default]
    All,
    MaxSize { k: usize },
    /// Membership is enforced by the cost model.
    ModelDefined,
}

impl BatchFamily {
    /// Membership test for the families core can check on its own.
    pub fn admits(&self, batch: &TestSet) -> bool {
        match self {
            Self::MaxSize { k } => batch.len() <= *k,
            Self::All | Self::ModelDefined => true,
        }
    }

    pub fn admits_size(&self, size: usize) -> bool {
        match self {
            Self::MaxSize { k } => size <= *k,
            Self::All | Self::ModelDefined => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pass: Vec<f64>,
    fail: Vec<f64>,
    family: BatchFamily,
}

impl Instance {
    /// Builds an instance from failure probabilities `q_i`, each in `(0, 1)`.
    pub fn from_fail_probs(fail: Vec<f64>) -> Result<Self> {
        let pass = fail.iter().map(|q| 1.0 - q).collect();
        Self::from_parts(pass, fail)
    }

    /// Builds an instance from pass probabilities `p_i`, each in `(0, 1)`.
    pub fn from_pass_probs(pass: Vec<f64>) -> Result<Self> {
        let fail = pass.iter().map(|p| 1.0 - p).collect();
        Self::from_parts(pass, fail)
    }

    /// Parses decimal pass probabilities such as `"0.96875"`.
    ///
    /// For plain decimals the failure probability is the exact decimal
    /// complement, so strings like `0.999...9` keep their tiny `q`.
    pub fn from_decimal_strings<S: AsRef<str>>(probs: &[S]) -> Result<Self> {
        let mut pass = Vec::with_capacity(probs.len());
        let mut fail = Vec::with_capacity(probs.len());
        for (i, s) in probs.iter().enumerate() {
            let (p, q) = parse_probability(s.as_ref())
                .map_err(|e| SstError::input(format!("pass_probs[{i}]: {e}")))?;
            pass.push(p);
            fail.push(q);
        }
        Self::from_parts(pass, fail)
    }

    fn from_parts(pass: Vec<f64>, fail: Vec<f64>) -> Result<Self> {
        if pass.is_empty() {
            return Err(SstError::input("instance needs at least one test"));
        }
        for (i, (&p, &q)) in pass.iter().zip(&fail).enumerate() {
            if !(p.is_finite() && q.is_finite()) || q <= 0.0 || q >= 1.0 || p <= 0.0 {
                let hint = if q <= 0.0 {
                    " (a test that never fails carries no information; drop it)"
                } else {
                    ""
                };
                return Err(SstError::input(format!(
                    "pass_probs[{i}] = {p} must lie strictly inside (0, 1){hint}"
                )));
            }
        }
        Ok(Self {
            pass,
            fail,
            family: BatchFamily::All,
        })
    }

    pub fn with_family(mut self, family: BatchFamily) -> Result<Self> {
        if let BatchFamily::MaxSize { k } = family {
            if k == 0 {
                return Err(SstError::input("batch_family.k must be at least 1"));
            }
        }
        self.family = family;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.pass.len()
    }

    pub fn pass_probs(&self) -> &[f64] {
        &self.pass
    }

    pub fn fail_probs(&self) -> &[f64] {
        &self.fail
    }

    pub fn family(&self) -> BatchFamily {
        self.family
    }

    pub fn all_tests(&self) -> TestSet {
        TestSet::full(self.n())
    }

    fn check_ids(&self, batch: &TestSet) -> Result<()> {
        match batch.max_id() {
            Some(id) if id >= self.n() => Err(SstError::input(format!(
                "test id {id} out of range for n = {}",
                self.n()
            ))),
            _ => Ok(()),
        }
    }

    /// `ln P(B) = sum ln(1 - q_i)`.
    pub fn log_pass_prob(&self, batch: &TestSet) -> Result<f64> {
        self.check_ids(batch)?;
        Ok(batch.iter().map(|i| (-self.fail[i]).ln_1p()).sum())
    }

    /// `P(B)`, the probability that every test in `batch` passes.
    pub fn pass_prob(&self, batch: &TestSet) -> Result<f64> {
        self.check_ids(batch)?;
        if batch.len() <= DIRECT_PRODUCT_LIMIT {
            Ok(batch.iter().map(|i| self.pass[i]).product())
        } else {
            Ok(self.log_pass_prob(batch)?.exp())
        }
    }

    /// `1 - P(B)`, accurate even when every `q_i` in the batch is tiny.
    pub fn fail_prob(&self, batch: &TestSet) -> Result<f64> {
        Ok(-self.log_pass_prob(batch)?.exp_m1())
    }
}

/// Parses a probability string, returning `(p, 1 - p)`.
pub fn parse_probability(text: &str) -> std::result::Result<(f64, f64), String> {
    let s = text.trim();
    let p: f64 = s
        .parse()
        .map_err(|_| format!("`{text}` is not a decimal number"))?;
    let q = match decimal_complement(s) {
        Some(c) => c.parse().map_err(|_| format!("`{text}` is not a decimal number"))?,
        None => 1.0 - p,
    };
    Ok((p, q))
}

/// Exact decimal `1 - x` for strings of the form `0.ddd`, `.ddd`, `0` or `1[.000]`.
fn decimal_complement(s: &str) -> Option<String> {
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    match int {
        "1" if frac.bytes().all(|b| b == b'0') => Some("0".to_string()),
        "" | "0" => {
            let digits = frac.as_bytes();
            let Some(last) = digits.iter().rposition(|&b| b != b'0') else {
                return Some("1".to_string());
            };
            let mut out = String::with_capacity(last + 3);
            out.push_str("0.");
            for &d in &digits[..last] {
                out.push((b'9' - d + b'0') as char);
            }
            out.push((b'9' - digits[last] + b'1') as char);
            Some(out)
        }
        _ => None,
    }
}

/// An ordered list of batches; a solution when the batches partition the tests.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BatchSequence {
    pub batches: Vec<TestSet>,
}

impl BatchSequence {
    pub fn new(batches: Vec<TestSet>) -> Self {
        Self { batches }
    }

    pub fn single(all: TestSet) -> Self {
        Self { batches: vec![all] }
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TestSet> {
        self.batches.iter()
    }
}

impl From<Vec<TestSet>> for BatchSequence {
    fn from(batches: Vec<TestSet>) -> Self {
        Self { batches }
    }
}

/// A batch sequence together with per-batch cost upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostedSequence {
    pub sequence: BatchSequence,
    pub batch_cost_bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionViolation {
    EmptyBatch { batch: usize },
    UnknownTest { batch: usize, test: usize },
    Overlap { test: usize, first: usize, second: usize },
    Missing { test: usize },
    NotInFamily { batch: usize, size: usize },
}

impl fmt::Display for PartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyBatch { batch } => write!(f, "batch {batch} is empty"),
            Self::UnknownTest { batch, test } => {
                write!(f, "batch {batch} contains unknown test {test}")
            }
            Self::Overlap {
                test,
                first,
                second,
            } => write!(f, "test {test} appears in batches {first} and {second}"),
            Self::Missing { test } => write!(f, "test {test} is not covered by any batch"),
            Self::NotInFamily { batch, size } => {
                write!(f, "batch {batch} of size {size} is not an allowed batch")
            }
        }
    }
}

fn check_partition(
    instance: &Instance,
    seq: &BatchSequence,
) -> std::result::Result<(), PartitionViolation> {
    let mut owner: Vec<Option<usize>> = vec![None; instance.n()];
    for (j, batch) in seq.iter().enumerate() {
        if batch.is_empty() {
            return Err(PartitionViolation::EmptyBatch { batch: j });
        }
        for test in batch {
            let slot = owner
                .get_mut(test)
                .ok_or(PartitionViolation::UnknownTest { batch: j, test })?;
            if let Some(first) = *slot {
                return Err(PartitionViolation::Overlap {
                    test,
                    first,
                    second: j,
                });
            }
            *slot = Some(j);
        }
    }
    match owner.iter().position(Option::is_none) {
        Some(test) => Err(PartitionViolation::Missing { test }),
        None => Ok(()),
    }
}

/// Checks disjointness, coverage of every test, and membership in the
/// instance's batch family (`ModelDefined` families are the model's job).
pub fn validate_partition(
    instance: &Instance,
    seq: &BatchSequence,
) -> std::result::Result<(), PartitionViolation> {
    check_partition(instance, seq)?;
    for (j, batch) in seq.iter().enumerate() {
        if !instance.family().admits(batch) {
            return Err(PartitionViolation::NotInFamily {
                batch: j,
                size: batch.len(),
            });
        }
    }
    Ok(())
}

/// `sum_j prod_{l<j} P(B_l) * weight_j`.
fn discounted_sum(
    instance: &Instance,
    seq: &BatchSequence,
    weights: impl IntoIterator<Item = f64>,
) -> Result<f64> {
    let mut reach = 1.0;
    let mut total = 0.0;
    for (batch, w) in seq.iter().zip(weights) {
        total += reach * w;
        reach *= instance.pass_prob(batch)?;
    }
    Ok(total)
}

/// Expected cost of running `seq` until the first batch containing a failure.
///
/// The sequence must partition the tests. Family membership is not checked
/// here: `cost` is the cover cost `c(S)`, defined for every subset.
pub fn expected_cost(
    instance: &Instance,
    seq: &BatchSequence,
    cost: impl Fn(&TestSet) -> f64,
) -> Result<f64> {
    check_partition(instance, seq).map_err(|v| SstError::input(v.to_string()))?;
    discounted_sum(instance, seq, seq.iter().map(cost))
}

/// Same sum as [`expected_cost`] with the recorded bounds in place of true costs.
pub fn expected_cost_upper(instance: &Instance, cs: &CostedSequence) -> Result<f64> {
    check_partition(instance, &cs.sequence).map_err(|v| SstError::input(v.to_string()))?;
    if cs.batch_cost_bounds.len() != cs.sequence.len() {
        return Err(SstError::input(format!(
            "{} cost bounds for {} batches",
            cs.batch_cost_bounds.len(),
            cs.sequence.len()
        )));
    }
    if let Some(b) = cs.batch_cost_bounds.iter().find(|b| !(**b >= 0.0)) {
        return Err(SstError::input(format!("negative or NaN cost bound {b}")));
    }
    discounted_sum(instance, &cs.sequence, cs.batch_cost_bounds.iter().copied())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Simulates test outcomes and averages the incurred cost.
///
/// Deterministic for a fixed seed.
pub fn monte_carlo_cost(
    instance: &Instance,
    seq: &BatchSequence,
    cost: impl Fn(&TestSet) -> f64,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(SstError::input("trials must be at least 1"));
    }
    check_partition(instance, seq).map_err(|v| SstError::input(v.to_string()))?;
    let costs: Vec<f64> = seq.iter().map(cost).collect();
    let fail = instance.fail_probs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean, mut m2) = (0.0, 0.0);
    for t in 0..trials {
        let mut incurred = 0.0;
        for (batch, c) in seq.iter().zip(&costs) {
            incurred += c;
            // every test in the batch runs, so draw all of them
            let mut failed = false;
            for i in batch {
                failed |= rng.gen::<f64>() < fail[i];
            }
            if failed {
                break;
            }
        }
        let delta = incurred - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (incurred - mean);
    }
    let stderr = if trials > 1 {
        (m2 / (trials - 1) as f64 / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate { mean, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(set: &TestSet) -> f64 {
        set.len() as f64
    }

    fn bad4() -> Instance {
        Instance::from_pass_probs(vec![0.75, 0.875, 0.9375, 0.96875]).unwrap()
    }

    #[test]
    fn pass_prob_examples() {
        let inst = Instance::from_pass_probs(vec![0.5, 0.25]).unwrap();
        assert_eq!(inst.pass_prob(&TestSet::new()).unwrap(), 1.0);
        assert_eq!(inst.pass_prob(&TestSet::from([0, 1])).unwrap(), 0.125);
        assert_eq!(bad4().pass_prob(&TestSet::from([0, 1])).unwrap(), 0.65625);
        assert!(matches!(
            inst.pass_prob(&TestSet::from([2])),
            Err(SstError::Input(_))
        ));
    }

    #[test]
    fn log_space_for_wide_batches() {
        let inst = Instance::from_fail_probs(vec![1e-3; 40]).unwrap();
        let all = inst.all_tests();
        let direct: f64 = (0..40).map(|_| 1.0 - 1e-3).product();
        let p = inst.pass_prob(&all).unwrap();
        assert!((p - direct).abs() < 1e-13);
        assert!((inst.fail_prob(&all).unwrap() - (1.0 - direct)).abs() < 1e-13);
    }

    #[test]
    fn tiny_failure_probabilities_survive() {
        let q = 2f64.powi(-200);
        let inst = Instance::from_fail_probs(vec![q]).unwrap();
        assert_eq!(inst.pass_probs()[0], 1.0);
        let f = inst.fail_prob(&TestSet::singleton(0)).unwrap();
        assert!((f / q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_probabilities() {
        assert!(Instance::from_pass_probs(vec![1.0]).is_err());
        assert!(Instance::from_pass_probs(vec![0.0]).is_err());
        assert!(Instance::from_pass_probs(vec![]).is_err());
        assert!(Instance::from_pass_probs(vec![f64::NAN]).is_err());
        assert!(Instance::from_decimal_strings(&["1.000"]).is_err());
    }

    #[test]
    fn decimal_parsing_keeps_the_complement_exact() {
        assert_eq!(parse_probability("0.96875").unwrap(), (0.96875, 0.03125));
        assert_eq!(parse_probability(".75").unwrap(), (0.75, 0.25));
        let long = format!("0.{}1", "9".repeat(70));
        let (p, q) = parse_probability(&long).unwrap();
        assert_eq!(p, 1.0);
        assert!((q / 9e-71 - 1.0).abs() < 1e-12);
        assert!(parse_probability("abc").is_err());
        assert_eq!(decimal_complement("0.5000"), Some("0.5".into()));
        assert_eq!(decimal_complement("1e-3"), None);
    }

    #[test]
    fn expected_cost_examples() {
        let inst = Instance::from_pass_probs(vec![0.5, 0.5]).unwrap();
        let seq = BatchSequence::new(vec![TestSet::from([0]), TestSet::from([1])]);
        assert_eq!(expected_cost(&inst, &seq, unit).unwrap(), 1.5);
        let one = BatchSequence::single(inst.all_tests());
        assert_eq!(expected_cost(&inst, &one, unit).unwrap(), 2.0);

        let bad = bad4();
        let singles = BatchSequence::new((0..4).map(TestSet::singleton).collect());
        let c = expected_cost(&bad, &singles, |s| s.len().min(2) as f64).unwrap();
        assert!((c - 3.021484375).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_uses_recorded_costs() {
        let inst = Instance::from_pass_probs(vec![0.5, 0.5]).unwrap();
        let seq = BatchSequence::new(vec![TestSet::from([0]), TestSet::from([1])]);
        let cs = CostedSequence {
            sequence: seq.clone(),
            batch_cost_bounds: vec![1.0, 1.0],
        };
        assert_eq!(
            expected_cost_upper(&inst, &cs).unwrap(),
            expected_cost(&inst, &seq, unit).unwrap()
        );
        let single = CostedSequence {
            sequence: BatchSequence::single(inst.all_tests()),
            batch_cost_bounds: vec![7.5],
        };
        assert_eq!(expected_cost_upper(&inst, &single).unwrap(), 7.5);
        let short = CostedSequence {
            sequence: seq,
            batch_cost_bounds: vec![1.0],
        };
        assert!(expected_cost_upper(&inst, &short).is_err());
    }

    #[test]
    fn partition_violations() {
        let inst = Instance::from_pass_probs(vec![0.5, 0.5]).unwrap();
        let ok = BatchSequence::new(vec![TestSet::from([0]), TestSet::from([1])]);
        assert_eq!(validate_partition(&inst, &ok), Ok(()));
        let overlap = BatchSequence::new(vec![TestSet::from([0]), TestSet::from([0, 1])]);
        assert_eq!(
            validate_partition(&inst, &overlap),
            Err(PartitionViolation::Overlap {
                test: 0,
                first: 0,
                second: 1
            })
        );
        let missing = BatchSequence::new(vec![TestSet::from([0])]);
        assert_eq!(
            validate_partition(&inst, &missing),
            Err(PartitionViolation::Missing { test: 1 })
        );
        let capped = inst
            .clone()
            .with_family(BatchFamily::MaxSize { k: 1 })
            .unwrap();
        assert_eq!(
            validate_partition(&capped, &BatchSequence::single(capped.all_tests())),
            Err(PartitionViolation::NotInFamily { batch: 0, size: 2 })
        );
        assert!(expected_cost(&inst, &missing, unit).is_err());
    }

    #[test]
    fn monte_carlo_single_batch_is_exact() {
        let inst = Instance::from_pass_probs(vec![0.3, 0.6, 0.9]).unwrap();
        let seq = BatchSequence::single(inst.all_tests());
        let est = monte_carlo_cost(&inst, &seq, |s| s.len() as f64 * 1.5, 1000, 7).unwrap();
        assert_eq!(est.mean, 4.5);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_converges() {
        let inst = Instance::from_pass_probs(vec![0.5, 0.5]).unwrap();
        let seq = BatchSequence::new(vec![TestSet::from([0]), TestSet::from([1])]);
        let a = monte_carlo_cost(&inst, &seq, unit, 1, 99).unwrap();
        let b = monte_carlo_cost(&inst, &seq, unit, 1, 99).unwrap();
        assert_eq!(a, b);
        let big = monte_carlo_cost(&inst, &seq, unit, 1_000_000, 3).unwrap();
        assert!((big.mean - 1.5).abs() < 0.01);
        assert!(monte_carlo_cost(&inst, &seq, unit, 0, 3).is_err());
    }
}
