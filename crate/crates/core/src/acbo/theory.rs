use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundBound {
    pub t_star: usize,
    /// `1 - n * eta^t_star`, clamped below at 0.
    pub success_floor: f64,
}

/// Rounds after which the truth is identified with high probability:
/// the smallest `T >= 1` with `((1 - eta) / eta)^T >= n`.
pub fn theoretical_rounds(n: usize, eta: f64) -> Result<RoundBound> {
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 hypotheses, got {n}")));
    }
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::Input(format!("eta must lie in [0, 0.5), got {eta}")));
    }
    if eta == 0.0 {
        return Ok(RoundBound {
            t_star: 1,
            success_floor: 1.0,
        });
    }
    let ratio = (n as f64).ln() / ((1.0 - eta) / eta).ln();
    let t_star = ((ratio - 1e-12).ceil() as usize).max(1);
    Ok(RoundBound {
        t_star,
        success_floor: (1.0 - n as f64 * eta.powi(t_star as i32)).max(0.0),
    })
}

/// Expected change of `ln(π_true / π_other)` per correctly modelled
/// discriminating query, in nats.
pub fn expected_log_ratio_drift(eta: f64) -> f64 {
    (1.0 - 2.0 * eta) * ((1.0 - eta) / eta).ln()
}

/// Best possible identification probability after `t` binary queries with
/// the truth uniform over `n` hypotheses: `min(1, 2^t / n)`.
pub fn query_capacity_ceiling(n: usize, t: usize) -> f64 {
    (2f64.powi(t as i32) / n as f64).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_bounds() {
        let b = theoretical_rounds(16, 0.1).unwrap();
        assert_eq!(b.t_star, 2);
        assert!((b.success_floor - 0.84).abs() < 1e-12);
        assert_eq!(theoretical_rounds(2, 1e-9).unwrap().t_star, 1);
        let b = theoretical_rounds(8, 0.1).unwrap();
        assert_eq!(b.t_star, 1);
        assert!((b.success_floor - 0.2).abs() < 1e-12);
        assert_eq!(theoretical_rounds(32, 0.1).unwrap().t_star, 2);
        assert_eq!(theoretical_rounds(8, 0.2).unwrap().t_star, 2);
        assert!(theoretical_rounds(8, 0.5).is_err());
        // exact power: 9^1 = 9
        assert_eq!(theoretical_rounds(9, 0.1).unwrap().t_star, 1);
    }

    #[test]
    fn drift_at_point_one() {
        assert!((expected_log_ratio_drift(0.1) - 1.7578).abs() < 1e-4);
    }

    #[test]
    fn two_queries_cannot_single_out_one_of_sixteen() {
        assert_eq!(query_capacity_ceiling(16, 2), 0.25);
        assert_eq!(query_capacity_ceiling(2, 3), 1.0);
    }
}
