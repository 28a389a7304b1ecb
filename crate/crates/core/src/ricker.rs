//! Parameter regimes of the cyclic Ricker model
//! `T_i(x) = x_i exp(u(1 − x_i − α x_{i+1}))`.
//!
//! Everything here is closed form except the slice oracle, which maximises
//! the comparison function `H` on a barycentric grid.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycle::{theta_matrix, Evidence, InteriorStatus};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{KolmogorovModel, StateVector};
use crate::tolerances::EPS_STRICT;

/// `g(α) = α³ + α² − 4α − 1`.
pub fn alpha0_polynomial(alpha: f64) -> f64 {
    ((alpha + 1.0) * alpha - 4.0) * alpha - 1.0
}

fn solve_alpha0() -> f64 {
    let (mut lo, mut hi) = (1.0_f64, 2.0_f64);
    while hi - lo >= 1e-12 {
        let mid = 0.5 * (lo + hi);
        if alpha0_polynomial(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut a = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = (3.0 * a + 2.0) * a - 4.0;
        a -= alpha0_polynomial(a) / d;
    }
    a
}

/// The root of `g` in `(1, 2)`, computed once.
pub fn compute_alpha0() -> f64 {
    static ALPHA0: OnceLock<f64> = OnceLock::new();
    *ALPHA0.get_or_init(|| {
        let a = solve_alpha0();
        assert!(alpha0_polynomial(a).abs() < 1e-10, "alpha0 residual too large");
        a
    })
}

/// `F(α) = 1/(1+α) − (2+α−α²)/(1−α+α²)`; negative below `α₀`, positive above.
pub fn eval_f(alpha: f64) -> f64 {
    1.0 / (1.0 + alpha) - lambda_threshold(alpha)
}

/// `|λ_{2,3}| > 1` exactly when `u` exceeds this.
pub fn lambda_threshold(alpha: f64) -> f64 {
    (2.0 + alpha - alpha * alpha) / (1.0 - alpha + alpha * alpha)
}

/// Closed-form eigenvalues of `DT(p)`, ordered like [`linalg::sort_eigenvalues`].
pub fn interior_eigenvalues(u: f64, alpha: f64) -> [Complex64; 3] {
    let re = 1.0 + u * (alpha - 2.0) / (2.0 * (1.0 + alpha));
    let im = 3f64.sqrt() * u * alpha / (2.0 * (1.0 + alpha));
    let mut ev = [
        Complex64::new(1.0 - u, 0.0),
        Complex64::new(re, im),
        Complex64::new(re, -im),
    ];
    linalg::sort_eigenvalues(&mut ev);
    ev
}

/// `|λ_{2,3}|` at the interior fixed point.
pub fn lambda_modulus(u: f64, alpha: f64) -> f64 {
    interior_eigenvalues(u, alpha)
        .iter()
        .filter(|z| z.im != 0.0)
        .map(|z| z.norm())
        .next()
        .unwrap_or_else(|| 1.0 + u * (alpha - 2.0) / (2.0 * (1.0 + alpha)))
}

/// `u³((1−α)³ + 1)`.
pub fn det_theta_closed_form(u: f64, alpha: f64) -> f64 {
    u.powi(3) * ((1.0 - alpha).powi(3) + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// `|λ_{2,3}| > 1`: `p` repels on the simplex.
    ARepellor,
    /// `|λ_{2,3}| < 1`: `p` is asymptotically stable.
    AStable,
    /// `α ≥ 2`: `p` is a global repellor on the simplex.
    B,
    /// `p` is globally asymptotically stable in the open cone.
    C,
    /// The boundary cycle is globally attracting.
    D,
    /// The boundary cycle is globally repelling on the simplex.
    E,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum RegimeVerdict {
    GloballyAttractingCycle,
    GloballyRepellingCycleOnSimplex,
    InteriorGloballyStable,
    LocalOnly { detail: String },
    OutsideTheorem,
}

impl RegimeVerdict {
    pub fn label(&self) -> String {
        match self {
            RegimeVerdict::GloballyAttractingCycle => "GloballyAttractingCycle".into(),
            RegimeVerdict::GloballyRepellingCycleOnSimplex => "GloballyRepellingCycleOnSimplex".into(),
            RegimeVerdict::InteriorGloballyStable => "InteriorGloballyStable".into(),
            RegimeVerdict::LocalOnly { detail } => format!("LocalOnly({detail})"),
            RegimeVerdict::OutsideTheorem => "OutsideTheorem".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeClassification {
    pub alpha: f64,
    pub u: f64,
    pub admissible: bool,
    pub alpha0: f64,
    pub f_alpha: f64,
    pub lambda_modulus: f64,
    /// Numeric `det θ` of the model at these parameters.
    pub det_theta: f64,
    pub clauses: Vec<Clause>,
    /// Set alongside the repelling-cycle verdict when `p` is also globally stable.
    pub interior_globally_stable: bool,
    /// Some parameter lies within `eps` of a threshold.
    pub on_boundary: bool,
    pub verdict: RegimeVerdict,
}

impl RegimeClassification {
    pub fn has(&self, clause: Clause) -> bool {
        self.clauses.contains(&clause)
    }

    /// Interior-point status as proven by the regime clauses.
    pub fn interior_status(&self) -> Option<InteriorStatus> {
        if self.on_boundary {
            return None;
        }
        if self.has(Clause::B) && self.has(Clause::ARepellor) {
            Some(InteriorStatus::RepellingOnSimplex { evidence: Evidence::Proven })
        } else if self.has(Clause::C) {
            Some(InteriorStatus::GloballyAttracting { evidence: Evidence::Proven })
        } else {
            None
        }
    }
}

/// Tracks whether any compared quantity sat inside the margin.
struct Band {
    eps: f64,
    hit: bool,
}

impl Band {
    /// `a < b`, flagging `|a − b| < eps`.
    fn lt(&mut self, a: f64, b: f64) -> bool {
        self.hit |= (a - b).abs() < self.eps;
        a < b
    }

    /// `a ≥ b` with equality allowed; only the failing side is banded.
    fn ge(&mut self, a: f64, b: f64) -> bool {
        self.hit |= a < b && b - a < self.eps;
        a >= b
    }
}

pub fn classify_regime(alpha: f64, u: f64) -> Result<RegimeClassification> {
    classify_regime_with(alpha, u, EPS_STRICT)
}

pub fn classify_regime_with(alpha: f64, u: f64, eps: f64) -> Result<RegimeClassification> {
    if !(alpha.is_finite() && u.is_finite()) {
        return Err(Error::InvalidModel(format!("non-finite parameters alpha={alpha}, u={u}")));
    }
    let alpha0 = compute_alpha0();
    let model = KolmogorovModel::ricker3(u, alpha)?;
    let axial = [0, 1, 2].map(|i| StateVector::axis(i, 1.0).expect("unit axis"));
    let det_theta = linalg::det3(&theta_matrix(&model, &axial));
    let mut out = RegimeClassification {
        alpha,
        u,
        admissible: alpha > 1.0 && u > 0.0 && u < 1.0 / (1.0 + alpha),
        alpha0,
        f_alpha: eval_f(alpha),
        lambda_modulus: lambda_modulus(u, alpha),
        det_theta,
        clauses: Vec::new(),
        interior_globally_stable: false,
        on_boundary: false,
        verdict: RegimeVerdict::OutsideTheorem,
    };

    let mut band = Band { eps, hit: false };
    let admissible = band.lt(1.0, alpha) & band.lt(0.0, u) & band.lt(u, 1.0 / (1.0 + alpha));
    if !admissible {
        out.on_boundary = band.hit;
        return Ok(out);
    }

    let poly = 1.0 - alpha + alpha * alpha;
    let below_alpha0 = band.lt(alpha, alpha0);
    let above_alpha0 = band.lt(alpha0, alpha);
    let u_above_thr = band.lt(lambda_threshold(alpha), u);
    let u_below_thr = band.lt(u, lambda_threshold(alpha));
    let alpha_ge_2 = band.ge(alpha, 2.0);
    let stability_bound = band.lt(3.0 * u * poly, 2.0 + alpha - alpha * alpha);
    let e_bound = (1.0 / (1.0 + alpha)).min((2.0 + alpha - alpha * alpha) / (3.0 * poly));
    let u_below_e = band.lt(u, e_bound);

    let mut clauses = Vec::new();
    if above_alpha0 && u_above_thr {
        clauses.push(Clause::ARepellor);
    }
    if below_alpha0 && u_below_thr {
        clauses.push(Clause::AStable);
    }
    if alpha_ge_2 {
        clauses.push(Clause::B);
    }
    if below_alpha0 && stability_bound {
        clauses.push(Clause::C);
    }
    if alpha_ge_2 {
        clauses.push(Clause::D);
    }
    if below_alpha0 && u_below_e {
        clauses.push(Clause::E);
    }
    out.clauses = clauses;
    out.on_boundary = band.hit;
    out.interior_globally_stable = out.has(Clause::C);
    out.verdict = if band.hit {
        RegimeVerdict::LocalOnly { detail: "boundary".into() }
    } else if out.has(Clause::D) {
        RegimeVerdict::GloballyAttractingCycle
    } else if out.has(Clause::E) {
        RegimeVerdict::GloballyRepellingCycleOnSimplex
    } else if out.has(Clause::C) {
        RegimeVerdict::InteriorGloballyStable
    } else if out.has(Clause::ARepellor) {
        RegimeVerdict::LocalOnly { detail: "interior_repellor_on_simplex".into() }
    } else if out.has(Clause::AStable) {
        RegimeVerdict::LocalOnly { detail: "interior_locally_stable".into() }
    } else {
        RegimeVerdict::OutsideTheorem
    };
    Ok(out)
}

/// `H(x) = Σ x_i / (1 − u(1 − x_i − α x_{i+1}))`.
pub fn comparison_h(alpha: f64, u: f64, x: &[f64; 3]) -> f64 {
    (0..3)
        .map(|i| x[i] / (1.0 - u * (1.0 - x[i] - alpha * x[(i + 1) % 3])))
        .sum()
}

/// `c(θ) = 1 − u + u(1+α)θ`.
pub fn c_theta(alpha: f64, u: f64, theta: f64) -> f64 {
    1.0 - u + u * (1.0 + alpha) * theta
}

/// `H(θ, θ, θ) = 3θ / c(θ)`.
pub fn h_at_p0(alpha: f64, u: f64, theta: f64) -> f64 {
    3.0 * theta / c_theta(alpha, u, theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub alpha: f64,
    pub u: f64,
    pub theta: f64,
    pub grid_n: usize,
    pub max_h: f64,
    pub argmax: [f64; 3],
    /// Integer composition `(i, j, k)`, `i + j + k = grid_n`, of the maximiser.
    pub argmax_index: [usize; 3],
    pub h_p0: f64,
    pub c_theta: f64,
    /// `max H − H(p₀)`; non-positive up to rounding when the bound holds.
    pub excess: f64,
    /// `‖argmax − p₀‖∞`.
    pub argmax_distance: f64,
    /// Grid spacing `3θ / grid_n`.
    pub cell: f64,
    pub argmax_within_cell: bool,
    /// `H(3θ, 0, 0)`.
    pub h_vertex: f64,
    pub edge_bound_lhs: f64,
    pub edge_bound_rhs: f64,
    pub edge_bound_holds: bool,
    pub coeff_a: f64,
    pub coeff_b: f64,
    pub coeff_c: f64,
    /// `(A² − BC)(A² − BC − 4c(θ)(A − c(θ)))`; negative means the edge bound holds.
    pub discriminant_factor: f64,
}

/// Maximises `H` over the slice `W(x) = 3θ` on a barycentric grid with
/// `grid_n` intervals per edge.
pub fn slice_oracle_h(alpha: f64, u: f64, theta: f64, grid_n: usize) -> Result<SliceReport> {
    if !(alpha.is_finite() && alpha >= 0.0 && u > 0.0 && u < 1.0) {
        return Err(Error::Precondition(format!(
            "need alpha >= 0 and 0 < u < 1, got alpha={alpha}, u={u}"
        )));
    }
    let theta_max = 1.0 / (1.0 + alpha);
    if !(theta > 0.0 && theta <= theta_max * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "theta must lie in (0, {theta_max}], got {theta}"
        )));
    }
    let poly = 1.0 - alpha + alpha * alpha;
    if !(3.0 * u * poly < 2.0 + alpha - alpha * alpha) {
        return Err(Error::Precondition(format!(
            "stability inequality 3u(1-a+a^2) < 2+a-a^2 fails at alpha={alpha}, u={u}"
        )));
    }
    if grid_n == 0 {
        return Err(Error::Precondition("grid_n must be positive".into()));
    }

    let n = grid_n;
    let scale = 3.0 * theta / n as f64;
    // Best per first index, then an in-order reduction: first maximum wins.
    let rows: Vec<(f64, [usize; 3])> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::NEG_INFINITY, [i, 0, n - i]);
            for j in 0..=(n - i) {
                let k = n - i - j;
                let x = [i as f64 * scale, j as f64 * scale, k as f64 * scale];
                let h = comparison_h(alpha, u, &x);
                if h > best.0 {
                    best = (h, [i, j, k]);
                }
            }
            best
        })
        .collect();
    let (max_h, idx) = rows
        .into_iter()
        .fold((f64::NEG_INFINITY, [0; 3]), |acc, r| if r.0 > acc.0 { r } else { acc });
    let argmax = idx.map(|c| c as f64 * scale);
    let argmax_distance = argmax.iter().fold(0.0_f64, |m, &v| m.max((v - theta).abs()));

    let c = c_theta(alpha, u, theta);
    let h_p0 = h_at_p0(alpha, u, theta);
    let a = 1.0 - u + 3.0 * u * theta;
    let b = 1.0 - u + 3.0 * u * theta * alpha;
    let cc = 1.0 - u;
    let edge_bound_lhs = u * theta * (2.0 * alpha - 1.0).powi(2);
    let edge_bound_rhs = (2.0 - alpha) * (1.0 - u);
    Ok(SliceReport {
        alpha,
        u,
        theta,
        grid_n,
        max_h,
        argmax,
        argmax_index: idx,
        h_p0,
        c_theta: c,
        excess: max_h - h_p0,
        argmax_distance,
        cell: scale,
        argmax_within_cell: argmax_distance <= scale * (1.0 + 1e-9),
        h_vertex: comparison_h(alpha, u, &[3.0 * theta, 0.0, 0.0]),
        edge_bound_lhs,
        edge_bound_rhs,
        edge_bound_holds: edge_bound_lhs < edge_bound_rhs,
        coeff_a: a,
        coeff_b: b,
        coeff_c: cc,
        discriminant_factor: (a * a - b * cc) * (a * a - b * cc - 4.0 * c * (a - c)),
    })
}
