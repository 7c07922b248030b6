//! The true/false decision rule shared by every strength-producing method.

/// Claims whose strength is strictly above this value are labelled true.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// `strength > 0.5`, compared exactly. A neutral 0.5 is false.
pub fn decide(strength: f64) -> bool {
    strength > DECISION_THRESHOLD
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_strict() {
        assert!(!decide(0.5));
        assert!(decide(0.500_000_000_000_1));
        assert!(!decide(0.499_999_999_999_9));
        assert!(!decide(0.0));
        assert!(decide(1.0));
    }
}
