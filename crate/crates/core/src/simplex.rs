//! Grid certification of the hypotheses that guarantee a (modified) carrying
//! simplex:
//!
//! - an axial fixed point `q_i e_i`, `q_i > 0`, on every axis, with `q ≪ r`;
//! - `∂f_i/∂x_j ≤ 0` on `[0, r]` and `f_i` strictly decreasing in `x_i`;
//! - `ρ(M(x)) < 1` or `ρ(M̃(x)) < 1` on `[0, q] \ {0}`.
//!
//! The classical carrying-simplex theorem additionally needs every entry of
//! `Df` strictly negative and specifically `ρ(M) < 1`; the report tracks both
//! so the two certificates can be told apart.
//!
//! Results hold at the sampled grid only. Cells are evaluated in parallel and
//! reduced in grid-index order, so the report does not depend on the number
//! of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{KolmogorovModel, StateVector};
use crate::tolerances::{Strict, EPS_STRICT, ORIGIN_SKIP};

/// At most this many witnesses of each kind are kept in a report.
pub const MAX_WITNESSES: usize = 32;

const AXIAL_RESIDUAL: f64 = 1e-12;

/// Solves `f_i(q_i e_i) = 1` on `(0, r_i]` for each axis by bisection,
/// polished with Newton.
pub fn find_axial_fixed_points(model: &KolmogorovModel) -> Result<[f64; 3]> {
    Ok(axial_roots(model)?.map(|(q, _)| q))
}

fn axial_roots(model: &KolmogorovModel) -> Result<[(f64, f64); 3]> {
    Ok([axial_root(model, 0)?, axial_root(model, 1)?, axial_root(model, 2)?])
}

fn axial_log_growth(model: &KolmogorovModel, axis: usize, s: f64) -> f64 {
    let mut x = [0.0; 3];
    x[axis] = s;
    model.log_growth_raw(&x)[axis]
}

/// Returns `(q_i, |f_i(q_i e_i) − 1|)`.
fn axial_root(model: &KolmogorovModel, axis: usize) -> Result<(f64, f64)> {
    let r = model.box_r[axis];
    let g = |s: f64| axial_log_growth(model, axis, s);
    if !(g(0.0) > 0.0) {
        return Err(Error::NoAxialFixedPoint { axis });
    }
    let g_r = g(r);
    if g_r >= 0.0 {
        // Look further out to tell "box too small" from "no root at all".
        let mut lo = r;
        let mut hi = 2.0 * r;
        for _ in 0..60 {
            if g(hi) < 0.0 {
                let q = bisect(&g, lo, hi);
                return Err(Error::BoxTooSmall { axis, q, r });
            }
            if g_r == 0.0 {
                return Err(Error::BoxTooSmall { axis, q: r, r });
            }
            lo = hi;
            hi *= 2.0;
        }
        return Err(Error::NoAxialFixedPoint { axis });
    }
    let mut s = bisect(&g, 0.0, r);
    // Newton on ln f_i, derivative (∂f_i/∂x_i)/f_i.
    for _ in 0..5 {
        let mut x = [0.0; 3];
        x[axis] = s;
        let f = model.growth_raw(&x)?;
        let df = model.growth_jacobian_raw(&f);
        let slope = df[axis][axis] / f[axis];
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = s - g(s) / slope;
        if !(next > 0.0 && next <= r) || g(next).abs() >= g(s).abs() {
            break;
        }
        s = next;
    }
    let mut x = [0.0; 3];
    x[axis] = s;
    let residual = (model.growth_raw(&x)?[axis] - 1.0).abs();
    if residual >= AXIAL_RESIDUAL {
        return Err(Error::Precondition(format!(
            "axial fixed point on axis {axis} did not converge (residual {residual:e})"
        )));
    }
    if s >= r {
        return Err(Error::BoxTooSmall { axis, q: s, r });
    }
    Ok((s, residual))
}

/// Root of `g` on `[lo, hi]` with `g(lo) > 0 > g(hi)`.
fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > 1e-15 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridDomain {
    /// `[0, r]`, used for the sign conditions.
    Box,
    /// `[0, q] \ {0}`, used for the spectral condition.
    AxialBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum ConditionKind {
    /// `∂f_i/∂x_j ≤ 0` for `i ≠ j`.
    OffDiagonalSign { i: usize, j: usize },
    /// `∂f_i/∂x_i < 0`.
    DiagonalDecrease { i: usize },
    /// `min(ρ(M), ρ(M̃)) < 1`.
    SpectralRadius,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub domain: GridDomain,
    pub grid_index: [usize; 3],
    pub point: StateVector,
    #[serde(flatten)]
    pub condition: ConditionKind,
    /// The offending quantity: the derivative for sign conditions, the
    /// smaller spectral radius for the spectral condition. Absent when the
    /// evaluation itself failed.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "witness", rename_all = "snake_case")]
pub enum Verdict {
    ModifiedSimplexCertified,
    ClassicalSimplexCertified,
    Violated(Witness),
    Indeterminate,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignConditionReport {
    pub points_checked: usize,
    pub violations: usize,
    pub indeterminate: usize,
    /// Every `Df` entry was below `−ε_strict` at every point.
    pub all_entries_strictly_negative: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralConditionReport {
    pub points_checked: usize,
    pub origin_skipped: usize,
    /// Points settled by the row-sum condition for `M`.
    pub fast_path_m: usize,
    /// Points settled by the row-sum condition for `M̃`.
    pub fast_path_m_tilde: usize,
    /// Points that needed eigenvalues.
    pub eigen_fallbacks: usize,
    pub violations: usize,
    pub indeterminate: usize,
    /// `ρ(M) < 1` held at every point.
    pub m_everywhere: bool,
    /// With `force_eigen`: points where a row-sum condition held but the
    /// corresponding spectral radius was not below 1.
    pub fast_path_mismatches: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub grid_n: usize,
    pub total_points: usize,
    pub axial_fixed_points: [f64; 3],
    pub axial_residuals: [f64; 3],
    pub sign_condition: SignConditionReport,
    pub spectral_condition: SpectralConditionReport,
    /// All `Df` entries strictly negative on the grid; required by the
    /// classical theorem and not by the modified one.
    pub classical_strictness: bool,
    /// `T(x) ≤ r` at every box grid point (informational).
    pub box_invariant_on_grid: bool,
    pub violation_count: usize,
    /// Violations in grid-index order (box grid first), truncated.
    pub witnesses: Vec<Witness>,
    /// The violation with the largest margin.
    pub worst_witness: Option<Witness>,
    pub indeterminate_witnesses: Vec<Witness>,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn is_certified(&self) -> bool {
        matches!(
            self.verdict,
            Verdict::ModifiedSimplexCertified | Verdict::ClassicalSimplexCertified
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub grid_n: usize,
    pub eps_strict: f64,
    /// Evaluate spectral radii at every point and cross-check the row-sum
    /// fast paths against them.
    pub force_eigen: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { grid_n: 21, eps_strict: EPS_STRICT, force_eigen: false }
    }
}

impl VerifyOptions {
    pub fn with_grid(grid_n: usize) -> Self {
        Self { grid_n, ..Default::default() }
    }
}

/// Per-cell outcome, reduced in index order.
#[derive(Default)]
struct CellOutcome {
    violations: Vec<Witness>,
    indeterminate: Vec<Witness>,
    strictly_negative: bool,
    box_invariant: bool,
    skipped: bool,
    fast_m: bool,
    fast_m_tilde: bool,
    eigen: bool,
    m_ok: bool,
    mismatch: usize,
}

fn grid_point(corner: &[f64; 3], n: usize, idx: [usize; 3]) -> Result<StateVector> {
    let denom = (n - 1) as f64;
    StateVector::new([0, 1, 2].map(|k| {
        if idx[k] == n - 1 {
            corner[k]
        } else {
            corner[k] * idx[k] as f64 / denom
        }
    }))
}

fn unflatten(flat: usize, n: usize) -> [usize; 3] {
    [flat / (n * n), (flat / n) % n, flat % n]
}

fn box_cell(model: &KolmogorovModel, idx: [usize; 3], n: usize, eps: f64) -> CellOutcome {
    let mut out = CellOutcome { strictly_negative: true, box_invariant: true, ..Default::default() };
    let x = match grid_point(&model.box_r.components(), n, idx) {
        Ok(x) => x,
        Err(_) => return out,
    };
    let witness = |condition, value: f64| Witness {
        domain: GridDomain::Box,
        grid_index: idx,
        point: x,
        condition,
        value: (!value.is_nan()).then_some(value),
    };
    let df = match model.growth_jacobian(&x) {
        Ok(df) => df,
        Err(_) => {
            out.indeterminate.push(witness(ConditionKind::NonFinite, f64::NAN));
            out.strictly_negative = false;
            return out;
        }
    };
    for i in 0..3 {
        for j in 0..3 {
            let v = df[i][j];
            if v >= -eps {
                out.strictly_negative = false;
            }
            if i == j {
                match Strict::negative(v, eps) {
                    Strict::Holds => {}
                    Strict::Fails => out.violations.push(witness(ConditionKind::DiagonalDecrease { i }, v)),
                    Strict::Indeterminate => {
                        out.indeterminate.push(witness(ConditionKind::DiagonalDecrease { i }, v))
                    }
                }
            } else if v > eps {
                out.violations.push(witness(ConditionKind::OffDiagonalSign { i, j }, v));
            } else if v > 0.0 {
                out.indeterminate.push(witness(ConditionKind::OffDiagonalSign { i, j }, v));
            }
        }
    }
    out.box_invariant = match model.eval_map(&x) {
        Ok(tx) => tx.le(&model.box_r),
        Err(_) => false,
    };
    out
}

fn spectral_cell(
    model: &KolmogorovModel,
    q: &[f64; 3],
    idx: [usize; 3],
    n: usize,
    opts: &VerifyOptions,
) -> CellOutcome {
    let eps = opts.eps_strict;
    let mut out = CellOutcome::default();
    let x = match grid_point(q, n, idx) {
        Ok(x) => x,
        Err(_) => return out,
    };
    if x.inf_norm() < ORIGIN_SKIP {
        out.skipped = true;
        out.m_ok = true;
        return out;
    }
    let witness = |condition, value: f64| Witness {
        domain: GridDomain::AxialBox,
        grid_index: idx,
        point: x,
        condition,
        value: (!value.is_nan()).then_some(value),
    };
    let evaluated = (|| -> Result<()> {
        let fast_m = model.row_condition_m(&x, eps)?;
        let fast_m_tilde = model.row_condition_m_tilde(&x, eps)?;
        let needs_radii = opts.force_eigen || !fast_m.holds();
        let radii = if needs_radii {
            let j = model.eval_jacobians(&x)?;
            Some((j.spectral_radius_m()?, j.spectral_radius_m_tilde()?))
        } else {
            None
        };
        if let (true, Some((rm, rmt))) = (opts.force_eigen, radii) {
            out.mismatch += usize::from(fast_m.holds() && rm >= 1.0);
            out.mismatch += usize::from(fast_m_tilde.holds() && rmt >= 1.0);
        }
        if fast_m.holds() {
            out.fast_m = true;
            out.m_ok = true;
            return Ok(());
        }
        let (rm, rmt) = radii.expect("radii computed when the M fast path fails");
        out.m_ok = Strict::less(rm, 1.0, eps).holds();
        if fast_m_tilde.holds() {
            out.fast_m_tilde = true;
            return Ok(());
        }
        out.eigen = true;
        let best = rm.min(rmt);
        match Strict::less(best, 1.0, eps) {
            Strict::Holds => {}
            Strict::Fails => out.violations.push(witness(ConditionKind::SpectralRadius, best)),
            Strict::Indeterminate => out.indeterminate.push(witness(ConditionKind::SpectralRadius, best)),
        }
        Ok(())
    })();
    if evaluated.is_err() {
        out.m_ok = false;
        out.indeterminate.push(witness(ConditionKind::NonFinite, f64::NAN));
    }
    out
}

/// How far past its threshold a violation is, for picking the worst one.
fn violation_margin(w: &Witness) -> f64 {
    let v = w.value.unwrap_or(f64::NEG_INFINITY);
    match w.condition {
        ConditionKind::SpectralRadius => v - 1.0,
        _ => v,
    }
}

/// Checks the simplex-existence conditions on an `n³` grid of `[0, r]` and of `[0, q]`.
pub fn verify_simplex_conditions(
    model: &KolmogorovModel,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let n = opts.grid_n;
    if n < 2 {
        return Err(Error::Precondition(format!("grid_n must be at least 2, got {n}")));
    }
    let roots = axial_roots(model)?;
    let q = roots.map(|(q, _)| q);
    let axial_residuals = roots.map(|(_, res)| res);
    let cells = n * n * n;

    let box_cells: Vec<CellOutcome> = (0..cells)
        .into_par_iter()
        .map(|flat| box_cell(model, unflatten(flat, n), n, opts.eps_strict))
        .collect();
    let spectral_cells: Vec<CellOutcome> = (0..cells)
        .into_par_iter()
        .map(|flat| spectral_cell(model, &q, unflatten(flat, n), n, opts))
        .collect();

    let mut sign = SignConditionReport {
        points_checked: cells,
        all_entries_strictly_negative: true,
        ..Default::default()
    };
    let mut box_invariant = true;
    let mut violations = Vec::new();
    let mut indeterminate = Vec::new();
    for c in &box_cells {
        sign.violations += c.violations.len();
        sign.indeterminate += c.indeterminate.len();
        sign.all_entries_strictly_negative &= c.strictly_negative;
        box_invariant &= c.box_invariant;
        violations.extend_from_slice(&c.violations);
        indeterminate.extend_from_slice(&c.indeterminate);
    }

    let mut spectral = SpectralConditionReport {
        m_everywhere: true,
        fast_path_mismatches: opts.force_eigen.then_some(0),
        ..Default::default()
    };
    for c in &spectral_cells {
        if c.skipped {
            spectral.origin_skipped += 1;
            continue;
        }
        spectral.points_checked += 1;
        spectral.fast_path_m += usize::from(c.fast_m);
        spectral.fast_path_m_tilde += usize::from(c.fast_m_tilde);
        spectral.eigen_fallbacks += usize::from(c.eigen);
        spectral.violations += c.violations.len();
        spectral.indeterminate += c.indeterminate.len();
        spectral.m_everywhere &= c.m_ok;
        if let Some(m) = spectral.fast_path_mismatches.as_mut() {
            *m += c.mismatch;
        }
        violations.extend_from_slice(&c.violations);
        indeterminate.extend_from_slice(&c.indeterminate);
    }

    let violation_count = violations.len();
    let worst_witness = violations
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            violation_margin(a)
                .total_cmp(&violation_margin(b))
                .then(ib.cmp(ia))
        })
        .map(|(_, w)| *w);
    let classical_strictness = sign.all_entries_strictly_negative;
    let verdict = if let Some(first) = violations.first() {
        Verdict::Violated(*first)
    } else if !indeterminate.is_empty() {
        Verdict::Indeterminate
    } else if classical_strictness && spectral.m_everywhere {
        Verdict::ClassicalSimplexCertified
    } else {
        Verdict::ModifiedSimplexCertified
    };
    violations.truncate(MAX_WITNESSES);
    indeterminate.truncate(MAX_WITNESSES);

    Ok(VerificationReport {
        grid_n: n,
        total_points: 2 * cells,
        axial_fixed_points: q,
        axial_residuals,
        sign_condition: sign,
        spectral_condition: spectral,
        classical_strictness,
        box_invariant_on_grid: box_invariant,
        violation_count,
        witnesses: violations,
        worst_witness,
        indeterminate_witnesses: indeterminate,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn general(a: [[f64; 3]; 3], u: f64) -> KolmogorovModel {
        KolmogorovModel::general_exp([u; 3], a).unwrap()
    }

    #[test]
    fn ricker_axial_points_are_ones() {
        let m = KolmogorovModel::ricker3(0.3, 2.0).unwrap();
        let q = find_axial_fixed_points(&m).unwrap();
        for v in q {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn diagonal_two_gives_half() {
        let a = [[2.0, 0.3, 0.1], [0.2, 2.0, 0.4], [0.1, 0.1, 2.0]];
        let m = KolmogorovModel::general_exp([0.1, 0.25, 0.4], a).unwrap();
        for v in find_axial_fixed_points(&m).unwrap() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_general_model_axial_points() {
        let a = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.5], [0.5, 0.0, 1.0]];
        for v in find_axial_fixed_points(&general(a, 0.2)).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn box_too_small() {
        let m = KolmogorovModel::ricker3(0.3, 2.0)
            .unwrap()
            .with_box(StateVector::new([1.5, 0.8, 1.5]).unwrap())
            .unwrap();
        match find_axial_fixed_points(&m) {
            Err(Error::BoxTooSmall { axis: 1, q, r }) => {
                assert!((q - 1.0).abs() < 1e-9);
                assert_eq!(r, 0.8);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_axial_fixed_point() {
        // Negative rate on axis 2: f_2(0) < 1.
        let a = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = KolmogorovModel::general_exp([0.2, 0.2, -0.2], a).unwrap();
        assert_eq!(find_axial_fixed_points(&m), Err(Error::NoAxialFixedPoint { axis: 2 }));
        // Self-facilitation: f_0 grows along its axis, no root anywhere.
        let a = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = KolmogorovModel::general_exp_with_box([0.2; 3], a, StateVector::splat(1.5).unwrap())
            .unwrap();
        assert_eq!(find_axial_fixed_points(&m), Err(Error::NoAxialFixedPoint { axis: 0 }));
    }

    #[test]
    fn ricker_is_modified_not_classical() {
        let m = KolmogorovModel::ricker3(0.3, 2.0).unwrap();
        let rep = verify_simplex_conditions(&m, &VerifyOptions::with_grid(21)).unwrap();
        assert_eq!(rep.verdict, Verdict::ModifiedSimplexCertified);
        assert!(!rep.classical_strictness);
        assert_eq!(rep.violation_count, 0);
        assert!(rep.witnesses.is_empty());
        assert_eq!(rep.spectral_condition.origin_skipped, 1);
        // Every point is settled by the M row-sum condition.
        assert_eq!(rep.spectral_condition.fast_path_m, 21 * 21 * 21 - 1);
        assert_eq!(rep.spectral_condition.eigen_fallbacks, 0);
        assert!(rep.box_invariant_on_grid);
    }

    #[test]
    fn positive_interactions_are_classical() {
        let a = [[1.0, 0.2, 0.3], [0.25, 1.0, 0.2], [0.2, 0.3, 1.0]];
        let rep = verify_simplex_conditions(&general(a, 0.2), &VerifyOptions::with_grid(11)).unwrap();
        assert!(rep.classical_strictness);
        assert_eq!(rep.verdict, Verdict::ClassicalSimplexCertified);
    }

    #[test]
    fn large_rate_violates_spectral_condition() {
        let m = KolmogorovModel::ricker3(0.5, 2.0).unwrap();
        let rep = verify_simplex_conditions(&m, &VerifyOptions::with_grid(21)).unwrap();
        let Verdict::Violated(first) = rep.verdict else {
            panic!("expected violation, got {:?}", rep.verdict);
        };
        assert_eq!(first.condition, ConditionKind::SpectralRadius);
        assert!(rep.violation_count > 0 && !rep.witnesses.is_empty());
        let worst = rep.worst_witness.unwrap();
        assert_eq!(worst.point.components(), [1.0, 1.0, 1.0]);
        // ρ(M(1,1,1)) = u(1 + α) = 1.5.
        let value = worst.value.unwrap();
        assert!((value - 1.5).abs() < 1e-10, "{value}");
        // First witness is the lexicographically smallest violating index.
        for w in &rep.witnesses {
            assert!(w.grid_index >= first.grid_index);
        }
    }

    #[test]
    fn forced_eigen_path_has_no_mismatches() {
        let m = KolmogorovModel::ricker3(0.3, 2.0).unwrap();
        let opts = VerifyOptions { grid_n: 9, force_eigen: true, ..Default::default() };
        let rep = verify_simplex_conditions(&m, &opts).unwrap();
        assert_eq!(rep.spectral_condition.fast_path_mismatches, Some(0));
        assert_eq!(rep.verdict, Verdict::ModifiedSimplexCertified);
    }

    #[test]
    fn positive_off_diagonal_is_a_sign_violation() {
        let a = [[1.0, -0.3, 0.0], [0.0, 1.0, 0.5], [0.5, 0.0, 1.0]];
        let rep = verify_simplex_conditions(&general(a, 0.2), &VerifyOptions::with_grid(5)).unwrap();
        let Verdict::Violated(w) = rep.verdict else { panic!() };
        assert_eq!(w.domain, GridDomain::Box);
        assert_eq!(w.condition, ConditionKind::OffDiagonalSign { i: 0, j: 1 });
        assert_eq!(w.grid_index, [0, 0, 0]);
    }

    #[test]
    fn grid_too_coarse_is_rejected() {
        let m = KolmogorovModel::ricker3(0.3, 2.0).unwrap();
        assert!(matches!(
            verify_simplex_conditions(&m, &VerifyOptions::with_grid(1)),
            Err(Error::Precondition(_))
        ));
    }
}
