//! Kolmogorov maps `T_i(x) = x_i f_i(x)` on the nonnegative cone of ℝ³.
//!
//! Only the exponential family ships: `f_i(x) = exp(u_i (1 − Σ_j A_ij x_j))`.
//! The three-species cyclic Ricker competition model is the member with
//! `u_i = u` and `A = I + α P`, where `P` is the cyclic shift
//! (`x_{i+1}` competes with `x_i`, indices mod 3).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};
use crate::tolerances::Strict;

/// A point of the cone `C = [0, ∞)³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct StateVector([f64; 3]);

impl StateVector {
    pub const ORIGIN: StateVector = StateVector([0.0; 3]);

    pub fn new(x: [f64; 3]) -> Result<Self> {
        for (component, &value) in x.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { what: "state", component });
            }
            if value < 0.0 {
                return Err(Error::OutsideCone { component, value });
            }
        }
        // Normalise -0.0 so faces compare bitwise.
        Ok(StateVector(x.map(|v| if v == 0.0 { 0.0 } else { v })))
    }

    pub fn axis(i: usize, value: f64) -> Result<Self> {
        let mut x = [0.0; 3];
        x[i] = value;
        Self::new(x)
    }

    pub fn splat(value: f64) -> Result<Self> {
        Self::new([value; 3])
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    /// `I(x) = { i : x_i ≠ 0 }`.
    pub fn support(&self) -> Vec<usize> {
        (0..3).filter(|&i| self.0[i] != 0.0).collect()
    }

    /// Membership in the face `π_i = { x : x_i = 0 }`.
    pub fn on_face(&self, i: usize) -> bool {
        self.0[i] == 0.0
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn product(&self) -> f64 {
        self.0.iter().product()
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dist_inf(&self, other: &StateVector) -> f64 {
        (0..3).fold(0.0, |m, i| m.max((self.0[i] - other.0[i]).abs()))
    }

    /// `x ≤ r` componentwise.
    pub fn le(&self, r: &StateVector) -> bool {
        (0..3).all(|i| self.0[i] <= r.0[i])
    }
}

impl std::ops::Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<[f64; 3]> for StateVector {
    type Error = Error;
    fn try_from(x: [f64; 3]) -> Result<Self> {
        Self::new(x)
    }
}

impl From<StateVector> for [f64; 3] {
    fn from(x: StateVector) -> Self {
        x.0
    }
}

impl std::fmt::Display for StateVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Ricker3 { u: f64, alpha: f64 },
    GeneralExp { rates: Vec3, interaction: Mat3 },
}

/// Default box corner for the Ricker model: `q = (1, 1, 1)` scaled by this.
pub const RICKER_BOX_SCALE: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovModel {
    pub kind: ModelKind,
    pub box_r: StateVector,
}

impl KolmogorovModel {
    /// The cyclic Ricker model. Any finite `(u, α)` is accepted so that
    /// parameter pairs outside the admissible region can still be analysed;
    /// see [`KolmogorovModel::ricker_admissible`].
    pub fn ricker3(u: f64, alpha: f64) -> Result<Self> {
        if !u.is_finite() || !alpha.is_finite() {
            return Err(Error::InvalidModel(format!(
                "ricker3 parameters must be finite (u = {u}, alpha = {alpha})"
            )));
        }
        Ok(Self {
            kind: ModelKind::Ricker3 { u, alpha },
            box_r: StateVector::splat(RICKER_BOX_SCALE)?,
        })
    }

    /// General exponential model. The default box corner is
    /// `r_i = 1.5 / A_ii`, which needs a positive diagonal; otherwise pass a
    /// box explicitly with [`KolmogorovModel::with_box`].
    pub fn general_exp(rates: Vec3, interaction: Mat3) -> Result<Self> {
        if !rates.iter().all(|v| v.is_finite()) || !linalg::is_finite(&interaction) {
            return Err(Error::InvalidModel("coefficients must be finite".into()));
        }
        let mut r = [0.0; 3];
        for i in 0..3 {
            let a = interaction[i][i];
            if a <= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "A[{i}][{i}] = {a} is not positive; give the box corner explicitly"
                )));
            }
            r[i] = RICKER_BOX_SCALE / a;
        }
        Ok(Self {
            kind: ModelKind::GeneralExp { rates, interaction },
            box_r: StateVector::new(r)?,
        })
    }

    /// General exponential model with an explicit box corner; no sign
    /// requirement on the diagonal.
    pub fn general_exp_with_box(rates: Vec3, interaction: Mat3, box_r: StateVector) -> Result<Self> {
        if !rates.iter().all(|v| v.is_finite()) || !linalg::is_finite(&interaction) {
            return Err(Error::InvalidModel("coefficients must be finite".into()));
        }
        Self { kind: ModelKind::GeneralExp { rates, interaction }, box_r }.with_box(box_r)
    }

    pub fn with_box(mut self, box_r: StateVector) -> Result<Self> {
        if !box_r.is_interior() {
            return Err(Error::InvalidModel(format!(
                "box corner must be strictly positive, got {box_r}"
            )));
        }
        self.box_r = box_r;
        Ok(self)
    }

    pub fn ricker_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            ModelKind::Ricker3 { u, alpha } => Some((u, alpha)),
            ModelKind::GeneralExp { .. } => None,
        }
    }

    /// `α > 1` and `0 < u < 1/(1+α)`. `None` for non-Ricker models.
    pub fn ricker_admissible(&self) -> Option<bool> {
        self.ricker_params()
            .map(|(u, alpha)| alpha > 1.0 && u > 0.0 && u < 1.0 / (1.0 + alpha))
    }

    /// Rates `u_i` and interaction matrix `A`.
    pub fn coefficients(&self) -> (Vec3, Mat3) {
        match self.kind {
            ModelKind::Ricker3 { u, alpha } => {
                let mut a = linalg::IDENTITY;
                for (i, row) in a.iter_mut().enumerate() {
                    row[(i + 1) % 3] = alpha;
                }
                ([u; 3], a)
            }
            ModelKind::GeneralExp { rates, interaction } => (rates, interaction),
        }
    }

    /// `ln f_i(x)` for arbitrary (possibly negative) `x`.
    pub fn log_growth_raw(&self, x: &Vec3) -> Vec3 {
        let (rates, a) = self.coefficients();
        let ax = linalg::mat_vec(&a, x);
        [0, 1, 2].map(|i| rates[i] * (1.0 - ax[i]))
    }

    pub fn log_growth(&self, x: &StateVector) -> Vec3 {
        self.log_growth_raw(&x.0)
    }

    pub fn growth_raw(&self, x: &Vec3) -> Result<Vec3> {
        let g = self.log_growth_raw(x).map(f64::exp);
        finite(g, "f")
    }

    /// `f(x)`.
    pub fn growth(&self, x: &StateVector) -> Result<Vec3> {
        self.growth_raw(&x.0)
    }

    /// `T(x)` without the cone check, for use inside solvers.
    pub fn eval_map_raw(&self, x: &Vec3) -> Result<Vec3> {
        let f = self.growth_raw(x)?;
        finite([0, 1, 2].map(|i| x[i] * f[i]), "T")
    }

    /// `T(x)`. Faces are forward invariant: `x_i = 0` gives `T_i(x) = 0`
    /// exactly.
    pub fn eval_map(&self, x: &StateVector) -> Result<StateVector> {
        StateVector::new(self.eval_map_raw(&x.0)?)
    }

    /// `Df(x)` from the closed form `∂f_i/∂x_j = −u_i A_ij f_i(x)`.
    /// Entries with `u_i A_ij = 0` are exact zeros.
    pub fn growth_jacobian_raw(&self, f: &Vec3) -> Mat3 {
        let (rates, a) = self.coefficients();
        let mut df = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let c = rates[i] * a[i][j];
                df[i][j] = if c == 0.0 { 0.0 } else { -c * f[i] };
            }
        }
        df
    }

    pub fn growth_jacobian(&self, x: &StateVector) -> Result<Mat3> {
        Ok(self.growth_jacobian_raw(&self.growth(x)?))
    }

    pub fn eval_jacobians(&self, x: &StateVector) -> Result<JacobianBundle> {
        JacobianBundle::at(self, &x.0)
    }

    /// Row sums `f_i + x_i Σ_j ∂f_i/∂x_j`; all positive implies `ρ(M(x)) < 1`.
    pub fn row_sums_m(&self, x: &StateVector) -> Result<Vec3> {
        let f = self.growth(x)?;
        let df = self.growth_jacobian_raw(&f);
        Ok([0, 1, 2].map(|i| f[i] + x[i] * df[i].iter().sum::<f64>()))
    }

    /// Row sums `f_i + Σ_j x_j ∂f_i/∂x_j`; all positive implies `ρ(M̃(x)) < 1`.
    pub fn row_sums_m_tilde(&self, x: &StateVector) -> Result<Vec3> {
        let f = self.growth(x)?;
        let df = self.growth_jacobian_raw(&f);
        Ok([0, 1, 2].map(|i| f[i] + (0..3).map(|j| x[j] * df[i][j]).sum::<f64>()))
    }

    pub fn row_condition_m(&self, x: &StateVector, eps: f64) -> Result<Strict> {
        Ok(all_positive(&self.row_sums_m(x)?, eps))
    }

    pub fn row_condition_m_tilde(&self, x: &StateVector, eps: f64) -> Result<Strict> {
        Ok(all_positive(&self.row_sums_m_tilde(x)?, eps))
    }
}

fn all_positive(v: &Vec3, eps: f64) -> Strict {
    v.iter()
        .map(|&s| Strict::positive(s, eps))
        .fold(Strict::Holds, Strict::and)
}

fn finite(v: Vec3, what: &'static str) -> Result<Vec3> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(component) => Err(Error::NonFinite { what, component }),
        None => Ok(v),
    }
}

/// Derivatives of the map at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianBundle {
    pub f_vals: Vec3,
    pub df: Mat3,
    /// `DT`, assembled directly by the product rule.
    pub dt: Mat3,
    /// `M_ij = −(x_i / f_i) ∂f_i/∂x_j`.
    pub m: Mat3,
    /// `M̃_ij = −(x_j / f_i) ∂f_i/∂x_j`.
    pub m_tilde: Mat3,
}

impl JacobianBundle {
    pub fn at(model: &KolmogorovModel, x: &Vec3) -> Result<Self> {
        let f = model.growth_raw(x)?;
        let df = model.growth_jacobian_raw(&f);
        let mut dt = [[0.0; 3]; 3];
        let mut m = [[0.0; 3]; 3];
        let mut m_tilde = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                dt[i][j] = x[i] * df[i][j] + if i == j { f[i] } else { 0.0 };
                m[i][j] = -(x[i] / f[i]) * df[i][j];
                m_tilde[i][j] = -(x[j] / f[i]) * df[i][j];
            }
        }
        if !linalg::is_finite(&dt) || !linalg::is_finite(&m) || !linalg::is_finite(&m_tilde) {
            return Err(Error::NonFinite { what: "Jacobian", component: 0 });
        }
        Ok(Self { f_vals: f, df, dt, m, m_tilde })
    }

    /// `‖DT − diag(f)(I − M)‖∞`.
    pub fn factorization_residual(&self) -> f64 {
        let rebuilt = linalg::mat_mul(
            &linalg::diag(self.f_vals),
            &linalg::mat_sub(&linalg::IDENTITY, &self.m),
        );
        linalg::inf_norm(&linalg::mat_sub(&self.dt, &rebuilt))
    }

    pub fn spectral_radius_m(&self) -> Result<f64> {
        linalg::spectral_radius_3x3(&self.m)
    }

    pub fn spectral_radius_m_tilde(&self) -> Result<f64> {
        linalg::spectral_radius_3x3(&self.m_tilde)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sv(x: [f64; 3]) -> StateVector {
        StateVector::new(x).unwrap()
    }

    #[test]
    fn state_rejects_negative_and_nan() {
        assert!(matches!(
            StateVector::new([0.1, -0.2, 0.0]),
            Err(Error::OutsideCone { component: 1, .. })
        ));
        assert!(StateVector::new([f64::NAN, 0.0, 0.0]).is_err());
        let x = sv([0.0, 0.5, 0.0]);
        assert_eq!(x.support(), vec![1]);
        assert!(x.on_face(0) && x.on_face(2) && !x.on_face(1));
    }

    #[test]
    fn negative_zero_is_normalised() {
        let x = sv([-0.0, 1.0, 1.0]);
        assert_eq!(x[0].to_bits(), 0.0_f64.to_bits());
    }

    #[test]
    fn ricker_fixed_points_map_to_themselves() {
        let m = KolmogorovModel::ricker3(0.3, 2.0).unwrap();
        assert_eq!(m.eval_map(&StateVector::ORIGIN).unwrap(), StateVector::ORIGIN);
        assert_eq!(m.eval_map(&sv([1.0, 0.0, 0.0])).unwrap(), sv([1.0, 0.0, 0.0]));
        let third = 1.0 / 3.0;
        let p = m.eval_map(&sv([third; 3])).unwrap();
        for i in 0..3 {
            assert_relative_eq!(p[i], third, epsilon = 1e-15);
        }
    }

    #[test]
    fn overflow_names_component() {
        let m = KolmogorovModel::general_exp(
            [800.0, 0.1, 0.1],
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        )
        .unwrap();
        let err = m.eval_map(&sv([0.0, 0.5, 0.5])).unwrap_err();
        assert_eq!(err, Error::NonFinite { what: "f", component: 0 });
    }

    #[test]
    fn ricker_jacobian_closed_form() {
        let (u, alpha) = (0.2, 1.5);
        let m = KolmogorovModel::ricker3(u, alpha).unwrap();
        let x = sv([0.2, 0.3, 0.1]);
        let j = m.eval_jacobians(&x).unwrap();
        let f = j.f_vals;
        assert_eq!(j.df[0][1], -u * alpha * f[0]);
        assert_eq!(j.df[0][0], -u * f[0]);
        assert_eq!(j.df[0][2], 0.0);
        assert_eq!(j.df[1][0], 0.0);
        assert_eq!(j.df[2][1], 0.0);
        assert_eq!(j.df[2][0], -u * alpha * f[2]);
    }

    #[test]
    fn jacobians_at_origin() {
        let m = KolmogorovModel::ricker3(0.3, 2.0).unwrap();
        let j = m.eval_jacobians(&StateVector::ORIGIN).unwrap();
        assert_eq!(j.m, [[0.0; 3]; 3]);
        assert_eq!(j.dt, linalg::diag(j.f_vals));
        assert_relative_eq!(j.f_vals[0], 0.3_f64.exp());
    }

    #[test]
    fn row_condition_examples() {
        let m = KolmogorovModel::ricker3(0.3, 2.0).unwrap();
        assert!(m.row_condition_m(&StateVector::ORIGIN, 1e-12).unwrap().holds());
        // 1 − 1·0.3·3 = 0.1 > 0 in every row.
        let ones = sv([1.0; 3]);
        assert!(m.row_condition_m(&ones, 1e-12).unwrap().holds());
        let sums = m.row_sums_m(&ones).unwrap();
        let f = m.growth(&ones).unwrap();
        for i in 0..3 {
            assert_relative_eq!(sums[i], f[i] * 0.1, max_relative = 1e-12);
        }
        let bad = KolmogorovModel::ricker3(0.5, 2.0).unwrap();
        assert_eq!(bad.row_condition_m(&ones, 1e-12).unwrap(), Strict::Fails);
        assert_eq!(bad.row_condition_m_tilde(&ones, 1e-12).unwrap(), Strict::Fails);
    }

    #[test]
    fn admissibility() {
        assert_eq!(KolmogorovModel::ricker3(0.3, 2.0).unwrap().ricker_admissible(), Some(true));
        assert_eq!(KolmogorovModel::ricker3(0.5, 2.0).unwrap().ricker_admissible(), Some(false));
        assert_eq!(KolmogorovModel::ricker3(0.3, 1.0).unwrap().ricker_admissible(), Some(false));
        assert!(KolmogorovModel::ricker3(f64::INFINITY, 2.0).is_err());
    }

    #[test]
    fn general_exp_needs_positive_diagonal_for_default_box() {
        let a = [[0.0, 0.5, 0.0], [0.0, 1.0, 0.5], [0.5, 0.0, 1.0]];
        assert!(KolmogorovModel::general_exp([0.2; 3], a).is_err());
        let ok = KolmogorovModel::general_exp([0.2; 3], [[2.0, 0.1, 0.1]; 3]).unwrap();
        assert_relative_eq!(ok.box_r[0], 0.75);
    }

    #[test]
    fn serde_roundtrip() {
        let m = KolmogorovModel::ricker3(0.3, 2.0).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: KolmogorovModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        assert!(serde_json::from_str::<StateVector>("[0.1,-1.0,0.0]").is_err());
    }
}
