//! Fixed points of the map on `[0, r]` and their local stability.
//!
//! For the exponential family `f_i = 1` is linear in `x` (the exponent
//! vanishes), so each face and the interior reduce to a 2×2 or 3×3 linear
//! solve whose answer is exact: a nonsingular system with no positive
//! solution proves absence. Singular systems, and runs with
//! `force_newton`, fall back to multistart Newton, which can only ever report
//! "none found".

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};
use crate::model::{KolmogorovModel, StateVector};
use crate::simplex::find_axial_fixed_points;
use crate::tolerances::{DEDUP_TOL, EPS_HYP};

/// Largest `‖T(x) − x‖∞` accepted by [`eigen_at`].
pub const EIGEN_RESIDUAL: f64 = 1e-8;

/// Largest residual allowed in a returned record.
pub const RECORD_RESIDUAL: f64 = 1e-10;

const NEWTON_MAX_ITER: usize = 60;
const NEWTON_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixedPointKind {
    Origin,
    Axial { axis: usize },
    /// On the face `x_face = 0` with the other two coordinates positive.
    Planar { face: usize },
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Stability {
    Repellor,
    Saddle { stable_dim: usize },
    Attractor,
    NonHyperbolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRecord {
    pub location: StateVector,
    #[serde(flatten)]
    pub kind: FixedPointKind,
    /// Eigenvalues of `DT`, by modulus (descending) then argument.
    pub eigenvalues: [Complex64; 3],
    pub stability: Stability,
    /// `‖T(x) − x‖∞`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found { count: usize },
    /// The exact linear solve shows there is none.
    ProvenAbsent,
    /// Newton found nothing; absence is not claimed.
    NoneFoundNumerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub records: Vec<FixedPointRecord>,
    /// Search outcome on each face `x_k = 0` (planar points only).
    pub faces: [SearchOutcome; 3],
    pub interior: SearchOutcome,
}

impl FixedPointSet {
    pub fn axial(&self, axis: usize) -> Option<&FixedPointRecord> {
        self.records
            .iter()
            .find(|r| r.kind == FixedPointKind::Axial { axis })
    }

    pub fn axial_points(&self) -> Option<[StateVector; 3]> {
        Some([
            self.axial(0)?.location,
            self.axial(1)?.location,
            self.axial(2)?.location,
        ])
    }

    pub fn planar(&self) -> impl Iterator<Item = &FixedPointRecord> {
        self.records
            .iter()
            .filter(|r| matches!(r.kind, FixedPointKind::Planar { .. }))
    }

    pub fn interior(&self) -> impl Iterator<Item = &FixedPointRecord> {
        self.records
            .iter()
            .filter(|r| r.kind == FixedPointKind::Interior)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub eps_hyp: f64,
    /// Skip the exact linear solves and use multistart Newton everywhere.
    pub force_newton: bool,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { eps_hyp: EPS_HYP, force_newton: false }
    }
}

/// Classifies by eigenvalue moduli against 1 with margin `eps_hyp`.
pub fn classify_stability(eigenvalues: &[Complex64; 3], eps_hyp: f64) -> Stability {
    let mut stable = 0;
    let mut unstable = 0;
    for ev in eigenvalues {
        let m = ev.norm();
        if m < 1.0 - eps_hyp {
            stable += 1;
        } else if m > 1.0 + eps_hyp {
            unstable += 1;
        } else {
            return Stability::NonHyperbolic;
        }
    }
    match (stable, unstable) {
        (3, _) => Stability::Attractor,
        (0, _) => Stability::Repellor,
        (s, _) => Stability::Saddle { stable_dim: s },
    }
}

fn residual(model: &KolmogorovModel, x: &StateVector) -> Result<f64> {
    Ok(model.eval_map(x)?.dist_inf(x))
}

/// Eigenvalues of `DT(x)` at a fixed point `x`.
pub fn eigen_at(model: &KolmogorovModel, x: &StateVector) -> Result<[Complex64; 3]> {
    let res = residual(model, x)?;
    if !(res < EIGEN_RESIDUAL) {
        return Err(Error::NotAFixedPoint { residual: res });
    }
    linalg::eigenvalues_3x3(&model.eval_jacobians(x)?.dt)
}

fn record(
    model: &KolmogorovModel,
    location: StateVector,
    kind: FixedPointKind,
    eps_hyp: f64,
) -> Result<FixedPointRecord> {
    let eigenvalues = eigen_at(model, &location)?;
    Ok(FixedPointRecord {
        location,
        kind,
        stability: classify_stability(&eigenvalues, eps_hyp),
        eigenvalues,
        residual: residual(model, &location)?,
    })
}

/// Indices that stay free on the face `x_face = 0`.
fn face_indices(face: usize) -> [usize; 2] {
    match face {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

fn accept(model: &KolmogorovModel, x: &Vec3, free: &[usize]) -> Option<StateVector> {
    let r = model.box_r;
    let inside = free
        .iter()
        .all(|&i| x[i] > DEDUP_TOL && x[i] <= r[i] * (1.0 + 1e-12));
    if !inside {
        return None;
    }
    let sv = StateVector::new(*x).ok()?;
    let res = residual(model, &sv).ok()?;
    (res < RECORD_RESIDUAL).then_some(sv)
}

/// Solves `Σ_{j∈free} A_ij x_j = 1` for `i ∈ free`. `None` when the rates
/// vanish or the system is singular.
fn linear_solve(model: &KolmogorovModel, free: &[usize]) -> Option<Vec3> {
    let (rates, a) = model.coefficients();
    if free.iter().any(|&i| rates[i] == 0.0) {
        return None;
    }
    let mut x = [0.0; 3];
    match free {
        [i, j] => {
            let sol = linalg::solve2(&[[a[*i][*i], a[*i][*j]], [a[*j][*i], a[*j][*j]]], &[1.0, 1.0])?;
            x[*i] = sol[0];
            x[*j] = sol[1];
        }
        [_, _, _] => x = linalg::solve3(&a, &[1.0; 3])?,
        _ => return None,
    }
    // One refinement step against rounding in the solve.
    let ln_f = model.log_growth_raw(&x);
    let mut dx = [0.0; 3];
    if let [i, j] = free {
        let m = [[a[*i][*i], a[*i][*j]], [a[*j][*i], a[*j][*j]]];
        let rhs = [ln_f[*i] / rates[*i], ln_f[*j] / rates[*j]];
        if let Some(d) = linalg::solve2(&m, &rhs) {
            dx[*i] = d[0];
            dx[*j] = d[1];
        }
    } else {
        let rhs = [0, 1, 2].map(|k| ln_f[k] / rates[k]);
        dx = linalg::solve3(&a, &rhs).unwrap_or([0.0; 3]);
    }
    for &k in free {
        x[k] += dx[k];
    }
    Some(x)
}

/// Newton on `ln f_i(x) = 0` for `i ∈ free`, other coordinates zero.
fn newton(model: &KolmogorovModel, free: &[usize], seed: Vec3) -> Option<Vec3> {
    let mut x = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let g = model.log_growth_raw(&x);
        let err = free.iter().fold(0.0_f64, |m, &i| m.max(g[i].abs()));
        if err < NEWTON_TOL {
            return Some(x);
        }
        let f = model.growth_raw(&x).ok()?;
        let df = model.growth_jacobian_raw(&f);
        // Jacobian of ln f restricted to the free block; identity elsewhere.
        let mut jac = linalg::IDENTITY;
        let mut rhs = [0.0; 3];
        for &i in free {
            for &j in free {
                jac[i][j] = df[i][j] / f[i];
            }
            rhs[i] = -g[i];
        }
        let step = linalg::solve3(&jac, &rhs)?;
        let mut next = x;
        for &i in free {
            next[i] += step[i];
        }
        if !next.iter().all(|v| v.is_finite()) {
            return None;
        }
        x = next;
    }
    let g = model.log_growth_raw(&x);
    free.iter().all(|&i| g[i].abs() < 1e-12).then_some(x)
}

/// Deterministic seeds: `q/2` on the free coordinates, then the lattice
/// `{¼, ¾}^k · r`.
fn seeds(q: &Vec3, r: &StateVector, free: &[usize]) -> Vec<Vec3> {
    let mut out = Vec::new();
    let mut half = [0.0; 3];
    for &i in free {
        half[i] = 0.5 * q[i];
    }
    out.push(half);
    let k = free.len();
    for mask in 0..(1usize << k) {
        let mut s = [0.0; 3];
        for (bit, &i) in free.iter().enumerate() {
            let frac = if mask >> bit & 1 == 1 { 0.75 } else { 0.25 };
            s[i] = frac * r[i];
        }
        out.push(s);
    }
    out
}

fn search(
    model: &KolmogorovModel,
    q: &Vec3,
    free: &[usize],
    force_newton: bool,
) -> (Vec<StateVector>, SearchOutcome) {
    if !force_newton {
        if let Some(x) = linear_solve(model, free) {
            return match accept(model, &x, free) {
                Some(sv) => (vec![sv], SearchOutcome::Found { count: 1 }),
                None => (Vec::new(), SearchOutcome::ProvenAbsent),
            };
        }
    }
    let mut found: Vec<StateVector> = Vec::new();
    for seed in seeds(q, &model.box_r, free) {
        if let Some(sv) = newton(model, free, seed).and_then(|x| accept(model, &x, free)) {
            if found.iter().all(|f| f.dist_inf(&sv) > DEDUP_TOL) {
                found.push(sv);
            }
        }
    }
    let outcome = if found.is_empty() {
        SearchOutcome::NoneFoundNumerical
    } else {
        SearchOutcome::Found { count: found.len() }
    };
    (found, outcome)
}

/// Origin, axial, planar and interior fixed points in that order.
pub fn find_all_fixed_points(
    model: &KolmogorovModel,
    opts: &FixedPointOptions,
) -> Result<FixedPointSet> {
    let q = find_axial_fixed_points(model)?;
    let mut records = vec![record(model, StateVector::ORIGIN, FixedPointKind::Origin, opts.eps_hyp)?];
    for (axis, &qi) in q.iter().enumerate() {
        records.push(record(
            model,
            StateVector::axis(axis, qi)?,
            FixedPointKind::Axial { axis },
            opts.eps_hyp,
        )?);
    }
    let mut faces = [SearchOutcome::ProvenAbsent; 3];
    for (face, slot) in faces.iter_mut().enumerate() {
        let (found, outcome) = search(model, &q, &face_indices(face), opts.force_newton);
        *slot = outcome;
        for sv in found {
            records.push(record(model, sv, FixedPointKind::Planar { face }, opts.eps_hyp)?);
        }
    }
    let (found, interior) = search(model, &q, &[0, 1, 2], opts.force_newton);
    for sv in found {
        records.push(record(model, sv, FixedPointKind::Interior, opts.eps_hyp)?);
    }
    Ok(FixedPointSet { records, faces, interior })
}
