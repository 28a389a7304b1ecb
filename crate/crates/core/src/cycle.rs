//! Boundary heteroclinic cycle through the three axial saddles.
//!
//! Direction comes from the signs of `ln f_i` at the axial points, the local
//! criterion from `det θ` with `θ_ij = ln f_i(Q_j)`. Global verdicts need the
//! status of the interior fixed point, which this module takes as an input
//! rather than computing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_points::{FixedPointKind, FixedPointRecord};
use crate::linalg::{self, Mat3};
use crate::model::{KolmogorovModel, StateVector};
use crate::tolerances::Strict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleDirection {
    /// `Q1 → Q2 → Q3 → Q1`.
    Forward,
    /// `Q1 → Q3 → Q2 → Q1`.
    Backward,
    NotACycle,
}

impl CycleDirection {
    /// Index of the saddle visited after `k`.
    pub fn next(self, k: usize) -> Option<usize> {
        match self {
            CycleDirection::Forward => Some((k + 1) % 3),
            CycleDirection::Backward => Some((k + 2) % 3),
            CycleDirection::NotACycle => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalVerdict {
    LocallyAttracting,
    LocallyRepelling,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Proven,
    Numerical,
}

/// What is known about the interior fixed point `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum InteriorStatus {
    /// Hyperbolic with a one-dimensional stable manifold and globally
    /// repelling on the simplex.
    RepellingOnSimplex { evidence: Evidence },
    /// Globally attracting in the open cone.
    GloballyAttracting { evidence: Evidence },
    /// Neither property holds or could be established.
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleHypotheses {
    pub simplex_certified: bool,
    pub interior: Option<InteriorStatus>,
}

/// Hypothesis that kept the global verdict undetermined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unverified {
    SimplexNotCertified,
    NoCycleDirection,
    AxialSelfLimitation,
    InteriorStatusNotSupplied,
    InteriorStatusInconclusive,
    NumericalEvidenceOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum GlobalVerdict {
    GloballyAttracting,
    GloballyRepellingOnSimplex,
    Undetermined { reasons: Vec<Unverified> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleVerdict {
    pub direction: CycleDirection,
    /// Tri-state outcome of the forward and backward sign patterns.
    pub forward_pattern: Strict,
    pub backward_pattern: Strict,
    pub theta: Mat3,
    pub det_theta: f64,
    pub local_verdict: LocalVerdict,
    pub condition_c: bool,
    pub global_verdict: GlobalVerdict,
}

/// `θ_ij = ln f_i(Q_j)`.
pub fn theta_matrix(model: &KolmogorovModel, axial: &[StateVector; 3]) -> Mat3 {
    let mut theta = [[0.0; 3]; 3];
    for (j, q) in axial.iter().enumerate() {
        let g = model.log_growth(q);
        for i in 0..3 {
            theta[i][j] = g[i];
        }
    }
    theta
}

pub fn local_verdict(det_theta: f64, eps: f64) -> LocalVerdict {
    match Strict::negative(det_theta, eps) {
        Strict::Holds => LocalVerdict::LocallyAttracting,
        Strict::Fails => LocalVerdict::LocallyRepelling,
        Strict::Indeterminate => LocalVerdict::Degenerate,
    }
}

/// `f_i(Q_{i+1}) < 1 < f_{i+2}(Q_{i+1})` for every `i`.
fn forward_pattern(theta: &Mat3, eps: f64) -> Strict {
    (0..3).fold(Strict::Holds, |acc, i| {
        let q = (i + 1) % 3;
        acc.and(Strict::negative(theta[i][q], eps))
            .and(Strict::positive(theta[(i + 2) % 3][q], eps))
    })
}

/// `f_{i+1}(Q_i) < 1 < f_{i+2}(Q_i)` for every `i`.
fn backward_pattern(theta: &Mat3, eps: f64) -> Strict {
    (0..3).fold(Strict::Holds, |acc, i| {
        acc.and(Strict::negative(theta[(i + 1) % 3][i], eps))
            .and(Strict::positive(theta[(i + 2) % 3][i], eps))
    })
}

fn axial_locations(fps: &[FixedPointRecord]) -> Result<[StateVector; 3]> {
    let planar = fps
        .iter()
        .filter(|r| matches!(r.kind, FixedPointKind::Planar { .. }))
        .count();
    if planar > 0 {
        return Err(Error::ExtraBoundaryFixedPoints { count: planar });
    }
    let mut out = [None; 3];
    for r in fps {
        if let FixedPointKind::Axial { axis } = r.kind {
            out[axis] = Some(r.location);
        }
    }
    let missing: Vec<usize> = (0..3).filter(|&i| out[i].is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingAxialFixedPoints { axes: missing });
    }
    Ok(out.map(|q| q.unwrap()))
}

fn global_verdict(
    direction: CycleDirection,
    condition_c: bool,
    hyp: Option<&CycleHypotheses>,
) -> GlobalVerdict {
    let mut reasons = Vec::new();
    if direction == CycleDirection::NotACycle {
        reasons.push(Unverified::NoCycleDirection);
    }
    if !condition_c {
        reasons.push(Unverified::AxialSelfLimitation);
    }
    let simplex = hyp.is_some_and(|h| h.simplex_certified);
    if !simplex {
        reasons.push(Unverified::SimplexNotCertified);
    }
    let (candidate, evidence) = match hyp.and_then(|h| h.interior) {
        None => {
            reasons.push(Unverified::InteriorStatusNotSupplied);
            (None, None)
        }
        Some(InteriorStatus::Neither) => {
            reasons.push(Unverified::InteriorStatusInconclusive);
            (None, None)
        }
        Some(InteriorStatus::RepellingOnSimplex { evidence }) => {
            (Some(GlobalVerdict::GloballyAttracting), Some(evidence))
        }
        Some(InteriorStatus::GloballyAttracting { evidence }) => {
            (Some(GlobalVerdict::GloballyRepellingOnSimplex), Some(evidence))
        }
    };
    if evidence == Some(Evidence::Numerical) {
        reasons.push(Unverified::NumericalEvidenceOnly);
    }
    match candidate {
        Some(v) if reasons.is_empty() => v,
        _ => GlobalVerdict::Undetermined { reasons },
    }
}

/// Classifies the boundary cycle from the axial records in `fps`.
///
/// `hyp` carries the simplex certificate and the interior-point status; with
/// `None` the global verdict is always undetermined.
pub fn classify_boundary_cycle(
    model: &KolmogorovModel,
    fps: &[FixedPointRecord],
    hyp: Option<&CycleHypotheses>,
    eps_strict: f64,
) -> Result<CycleVerdict> {
    let axial = axial_locations(fps)?;
    let theta = theta_matrix(model, &axial);
    if !linalg::is_finite(&theta) {
        return Err(Error::NonFiniteMatrix);
    }
    let det_theta = linalg::det3(&theta);
    let forward = forward_pattern(&theta, eps_strict);
    let backward = backward_pattern(&theta, eps_strict);
    let direction = if forward.holds() {
        CycleDirection::Forward
    } else if backward.holds() {
        CycleDirection::Backward
    } else {
        CycleDirection::NotACycle
    };

    let mut condition_c = true;
    for (i, q) in axial.iter().enumerate() {
        let df = model.growth_jacobian(q)?;
        condition_c &= Strict::negative(df[i][i], eps_strict).holds();
    }

    Ok(CycleVerdict {
        direction,
        forward_pattern: forward,
        backward_pattern: backward,
        theta,
        det_theta,
        local_verdict: local_verdict(det_theta, eps_strict),
        condition_c,
        global_verdict: global_verdict(direction, condition_c, hyp),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_points::{find_all_fixed_points, FixedPointOptions};
    use crate::tolerances::EPS_STRICT;
    use approx::assert_relative_eq;

    fn classify(model: &KolmogorovModel, hyp: Option<&CycleHypotheses>) -> CycleVerdict {
        let set = find_all_fixed_points(model, &FixedPointOptions::default()).unwrap();
        classify_boundary_cycle(model, &set.records, hyp, EPS_STRICT).unwrap()
    }

    fn proven(interior: InteriorStatus) -> CycleHypotheses {
        CycleHypotheses { simplex_certified: true, interior: Some(interior) }
    }

    #[test]
    fn ricker_forward() {
        let m = KolmogorovModel::ricker3(0.3, 2.5).unwrap();
        let v = classify(&m, None);
        assert_eq!(v.direction, CycleDirection::Forward);
        assert_eq!(v.backward_pattern, Strict::Fails);
        assert_relative_eq!(v.theta[0][1], -0.45, epsilon = 1e-15);
        assert_relative_eq!(v.theta[1][0], 0.3, epsilon = 1e-15);
        assert!(v.condition_c);
        assert_eq!(
            v.global_verdict,
            GlobalVerdict::Undetermined {
                reasons: vec![Unverified::SimplexNotCertified, Unverified::InteriorStatusNotSupplied]
            }
        );
    }

    #[test]
    fn det_theta_repelling_and_degenerate() {
        let v = classify(&KolmogorovModel::ricker3(0.2, 1.5).unwrap(), None);
        assert_relative_eq!(v.det_theta, 0.007, epsilon = 1e-15);
        assert_eq!(v.local_verdict, LocalVerdict::LocallyRepelling);
        let v = classify(&KolmogorovModel::ricker3(0.2, 2.0).unwrap(), None);
        assert!(v.det_theta.abs() < EPS_STRICT);
        assert_eq!(v.local_verdict, LocalVerdict::Degenerate);
        let v = classify(&KolmogorovModel::ricker3(0.2, 3.0).unwrap(), None);
        assert_eq!(v.local_verdict, LocalVerdict::LocallyAttracting);
    }

    #[test]
    fn backward_direction_for_transposed_interaction() {
        let a = [[1.0, 0.0, 2.5], [2.5, 1.0, 0.0], [0.0, 2.5, 1.0]];
        let m = KolmogorovModel::general_exp([0.2; 3], a).unwrap();
        let v = classify(&m, None);
        assert_eq!(v.direction, CycleDirection::Backward);
        assert_eq!(v.forward_pattern, Strict::Fails);
    }

    #[test]
    fn global_verdicts_follow_interior_status() {
        let m = KolmogorovModel::ricker3(0.25, 2.5).unwrap();
        let hyp = proven(InteriorStatus::RepellingOnSimplex { evidence: Evidence::Proven });
        assert_eq!(classify(&m, Some(&hyp)).global_verdict, GlobalVerdict::GloballyAttracting);

        let hyp = proven(InteriorStatus::GloballyAttracting { evidence: Evidence::Proven });
        assert_eq!(
            classify(&m, Some(&hyp)).global_verdict,
            GlobalVerdict::GloballyRepellingOnSimplex
        );

        let hyp = proven(InteriorStatus::RepellingOnSimplex { evidence: Evidence::Numerical });
        assert_eq!(
            classify(&m, Some(&hyp)).global_verdict,
            GlobalVerdict::Undetermined { reasons: vec![Unverified::NumericalEvidenceOnly] }
        );

        let hyp = CycleHypotheses { simplex_certified: true, interior: Some(InteriorStatus::Neither) };
        assert_eq!(
            classify(&m, Some(&hyp)).global_verdict,
            GlobalVerdict::Undetermined { reasons: vec![Unverified::InteriorStatusInconclusive] }
        );
    }

    #[test]
    fn no_cycle_when_axial_points_do_not_chain() {
        // Species 0 resists both invaders.
        let a = [[1.0, 0.5, 0.5], [1.5, 1.0, 2.5], [1.5, 0.5, 1.0]];
        let m = KolmogorovModel::general_exp([0.2; 3], a).unwrap();
        let v = classify(&m, Some(&proven(InteriorStatus::RepellingOnSimplex {
            evidence: Evidence::Proven,
        })));
        assert_eq!(v.direction, CycleDirection::NotACycle);
        assert_eq!(
            v.global_verdict,
            GlobalVerdict::Undetermined { reasons: vec![Unverified::NoCycleDirection] }
        );
    }

    #[test]
    fn planar_points_are_rejected() {
        let a = [[1.0, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 1.0]];
        let m = KolmogorovModel::general_exp([0.2; 3], a).unwrap();
        let set = find_all_fixed_points(&m, &FixedPointOptions::default()).unwrap();
        let err = classify_boundary_cycle(&m, &set.records, None, EPS_STRICT).unwrap_err();
        assert_eq!(err, Error::ExtraBoundaryFixedPoints { count: 3 });
    }

    #[test]
    fn missing_axial_records() {
        let m = KolmogorovModel::ricker3(0.3, 2.5).unwrap();
        let set = find_all_fixed_points(&m, &FixedPointOptions::default()).unwrap();
        let partial: Vec<_> = set
            .records
            .into_iter()
            .filter(|r| r.kind != FixedPointKind::Axial { axis: 1 })
            .collect();
        let err = classify_boundary_cycle(&m, &partial, None, EPS_STRICT).unwrap_err();
        assert_eq!(err, Error::MissingAxialFixedPoints { axes: vec![1] });
    }

    #[test]
    fn direction_successor() {
        assert_eq!(CycleDirection::Forward.next(2), Some(0));
        assert_eq!(CycleDirection::Backward.next(0), Some(2));
        assert_eq!(CycleDirection::NotACycle.next(0), None);
    }
}
