//! Numerical margins shared across the analyses.
//!
//! Every strict inequality is evaluated against a margin; values that land
//! inside the margin are reported as indeterminate rather than being forced
//! to one side.

use serde::{Deserialize, Serialize};

/// Margin for strict inequalities (`> 0`, `< 1`, sign of `det θ`, ...).
pub const EPS_STRICT: f64 = 1e-12;

/// Eigenvalue moduli within this distance of 1 are non-hyperbolic.
pub const EPS_HYP: f64 = 1e-9;

/// Infinity-norm radius of the neighbourhoods around the axial fixed points
/// used by the heteroclinic detector.
pub const EPS_Q: f64 = 0.05;

/// `V = x1 x2 x3` must fall below this for a cycle to be declared.
pub const V_TOL: f64 = 1e-10;

/// Minimum average growth ratio of successive dwell times at the same saddle.
pub const RATIO_MIN: f64 = 1.2;

/// Number of full cycles the detector needs to see.
pub const MIN_CYCLES: usize = 3;

/// Values of `V` below this clamp to zero.
pub const V_UNDERFLOW: f64 = 1e-300;

/// Points with `‖x‖∞` below this are treated as the origin.
pub const ORIGIN_SKIP: f64 = 1e-9;

/// Duplicate fixed points are merged at this infinity-norm distance.
pub const DEDUP_TOL: f64 = 1e-8;

/// Forward iteration stops once `‖x_{n+1} − x_n‖∞` stays below this ...
pub const CONVERGENCE_STEP: f64 = 1e-12;
/// ... for this many consecutive steps.
pub const CONVERGENCE_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eps_strict: f64,
    pub eps_hyp: f64,
    pub eps_q: f64,
    pub v_tol: f64,
    pub ratio_min: f64,
    pub min_cycles: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_strict: EPS_STRICT,
            eps_hyp: EPS_HYP,
            eps_q: EPS_Q,
            v_tol: V_TOL,
            ratio_min: RATIO_MIN,
            min_cycles: MIN_CYCLES,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("eps_strict", self.eps_strict),
            ("eps_hyp", self.eps_hyp),
            ("eps_q", self.eps_q),
            ("v_tol", self.v_tol),
            ("ratio_min", self.ratio_min),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("tolerance {name} must be positive, got {v}"));
            }
        }
        if self.min_cycles == 0 {
            return Err("min_cycles must be at least 1".into());
        }
        Ok(())
    }
}

/// Outcome of a strict inequality evaluated with a margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strict {
    Holds,
    Fails,
    Indeterminate,
}

impl Strict {
    /// `value > 0` with margin `eps`.
    pub fn positive(value: f64, eps: f64) -> Self {
        if value.is_nan() {
            Strict::Indeterminate
        } else if value > eps {
            Strict::Holds
        } else if value < -eps {
            Strict::Fails
        } else {
            Strict::Indeterminate
        }
    }

    /// `value < 0` with margin `eps`.
    pub fn negative(value: f64, eps: f64) -> Self {
        Self::positive(-value, eps)
    }

    /// `a < b` with margin `eps`.
    pub fn less(a: f64, b: f64, eps: f64) -> Self {
        Self::positive(b - a, eps)
    }

    pub fn holds(self) -> bool {
        self == Strict::Holds
    }

    /// Conjunction: any failure wins, then any indeterminate.
    pub fn and(self, other: Strict) -> Strict {
        match (self, other) {
            (Strict::Fails, _) | (_, Strict::Fails) => Strict::Fails,
            (Strict::Indeterminate, _) | (_, Strict::Indeterminate) => Strict::Indeterminate,
            _ => Strict::Holds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_band() {
        assert_eq!(Strict::positive(1e-11, EPS_STRICT), Strict::Holds);
        assert_eq!(Strict::positive(1e-13, EPS_STRICT), Strict::Indeterminate);
        assert_eq!(Strict::positive(-1e-13, EPS_STRICT), Strict::Indeterminate);
        assert_eq!(Strict::positive(-1.0, EPS_STRICT), Strict::Fails);
        assert_eq!(Strict::positive(f64::NAN, EPS_STRICT), Strict::Indeterminate);
        assert_eq!(Strict::less(0.5, 1.0, EPS_STRICT), Strict::Holds);
    }

    #[test]
    fn conjunction() {
        assert_eq!(Strict::Holds.and(Strict::Indeterminate), Strict::Indeterminate);
        assert_eq!(Strict::Indeterminate.and(Strict::Fails), Strict::Fails);
        assert_eq!(Strict::Holds.and(Strict::Holds), Strict::Holds);
    }

    #[test]
    fn default_tolerances_are_valid() {
        assert!(Tolerances::default().validate().is_ok());
        let bad = Tolerances { v_tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
