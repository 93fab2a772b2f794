//! Deterministic argmin helpers.

/// Relative slack under which two objective values count as tied.
pub const TIE_REL: f64 = 1e-12;

/// True when `candidate` beats `incumbent` by more than the tie slack.
///
/// Scanning candidates in a fixed order and replacing only on `improves`
/// keeps the first of any near-tied group, so two routes that compute the
/// same ratio with different rounding still agree on the winner.
pub fn improves(candidate: f64, incumbent: f64) -> bool {
    if incumbent.is_infinite() {
        return candidate < incumbent;
    }
    candidate < incumbent - TIE_REL * incumbent.abs()
}
