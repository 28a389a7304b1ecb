//! Small dense 3×3 (and 2×2) linear algebra.
//!
//! Eigenvalues come from the characteristic cubic of the trace-shifted,
//! norm-scaled matrix. Shifting first keeps clustered eigenvalues (the common
//! case for near-identity Jacobians) accurate to a few ulps of their spread.

use num_complex::Complex64;
use std::cmp::Ordering;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn diag(d: Vec3) -> Mat3 {
    [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn mat_sub(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][j] - b[i][j];
        }
    }
    c
}

pub fn mat_vec(a: &Mat3, x: &Vec3) -> Vec3 {
    [
        a[0][0] * x[0] + a[0][1] * x[1] + a[0][2] * x[2],
        a[1][0] * x[0] + a[1][1] * x[1] + a[1][2] * x[2],
        a[2][0] * x[0] + a[2][1] * x[1] + a[2][2] * x[2],
    ]
}

/// Maximum absolute row sum.
pub fn inf_norm(a: &Mat3) -> f64 {
    a.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &Mat3) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn trace(a: &Mat3) -> f64 {
    a[0][0] + a[1][1] + a[2][2]
}

pub fn det3(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Sum of the principal 2×2 minors (second invariant).
pub fn principal_minor_sum(a: &Mat3) -> f64 {
    (a[0][0] * a[1][1] - a[0][1] * a[1][0])
        + (a[0][0] * a[2][2] - a[0][2] * a[2][0])
        + (a[1][1] * a[2][2] - a[1][2] * a[2][1])
}

pub fn is_finite(a: &Mat3) -> bool {
    a.iter().flatten().all(|v| v.is_finite())
}

/// Gaussian elimination with partial pivoting. `None` if singular to working
/// precision.
pub fn solve3(a: &Mat3, b: &Vec3) -> Option<Vec3> {
    let mut m = *a;
    let mut rhs = *b;
    let scale = max_abs(a);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col].abs() <= scale * 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(x)
}

/// Cramer's rule for 2×2 systems.
pub fn solve2(a: &[[f64; 2]; 2], b: &[f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || det.abs() <= 1e-14 * scale * scale {
        return None;
    }
    Some([
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - b[0] * a[1][0]) / det,
    ])
}

/// Eigenvalues of a real 3×3 matrix, sorted by modulus (descending) and then
/// argument (ascending). Complex pairs are returned as exact conjugates.
pub fn eigenvalues_3x3(a: &Mat3) -> Result<[Complex64; 3]> {
    if !is_finite(a) {
        return Err(Error::NonFiniteMatrix);
    }
    let shift = trace(a) / 3.0;
    let mut b = *a;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= shift;
    }
    let scale = max_abs(&b);
    if scale == 0.0 {
        let l = Complex64::new(shift, 0.0);
        return Ok([l; 3]);
    }
    for v in b.iter_mut().flatten() {
        *v /= scale;
    }
    // b is traceless: t^3 + p t + q = 0.
    let p = principal_minor_sum(&b);
    let q = -det3(&b);
    let roots = depressed_cubic_roots(p, q);
    let mut out = roots.map(|t| Complex64::new(shift, 0.0) + t * scale);
    sort_eigenvalues(&mut out);
    Ok(out)
}

pub fn sort_eigenvalues(vals: &mut [Complex64; 3]) {
    vals.sort_by(|x, y| match y.norm().total_cmp(&x.norm()) {
        Ordering::Equal => x.arg().total_cmp(&y.arg()),
        other => other,
    });
}

/// Maximum eigenvalue modulus.
pub fn spectral_radius_3x3(a: &Mat3) -> Result<f64> {
    Ok(eigenvalues_3x3(a)?[0].norm())
}

fn polish_cubic(p: f64, q: f64, mut t: f64) -> f64 {
    for _ in 0..3 {
        let f = (t * t + p) * t + q;
        let df = 3.0 * t * t + p;
        if df == 0.0 {
            break;
        }
        let next = t - f / df;
        if !next.is_finite() || ((next * next + p) * next + q).abs() >= f.abs() {
            break;
        }
        t = next;
    }
    t
}

/// Roots of `t^3 + p t + q`.
fn depressed_cubic_roots(p: f64, q: f64) -> [Complex64; 3] {
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    // Discriminant in the form (q/2)^2 + (p/3)^3; the sign decides one vs
    // three real roots.
    let disc = half_q * half_q + third_p * third_p * third_p;

    let big = if disc > 0.0 {
        // One real root. Pick the sign that avoids cancellation.
        let s = disc.sqrt();
        let w = (-half_q - half_q.signum() * s).cbrt();
        if w == 0.0 {
            0.0
        } else {
            w - third_p / w
        }
    } else {
        // Three real roots (p <= 0). Take the largest in magnitude.
        let m = 2.0 * (-third_p).sqrt();
        if m == 0.0 {
            0.0
        } else {
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            let cands = [
                m * phi.cos(),
                m * (phi - 2.0 * PI / 3.0).cos(),
                m * (phi - 4.0 * PI / 3.0).cos(),
            ];
            cands
                .into_iter()
                .max_by(|x, y| x.abs().total_cmp(&y.abs()))
                .unwrap()
        }
    };
    let r = polish_cubic(p, q, big);

    // Deflate: t^3 + p t + q = (t - r)(t^2 + r t + s).
    let s = if r != 0.0 { -q / r } else { p };
    let half_r = 0.5 * r;
    let d = half_r * half_r - s;
    let (t1, t2) = if d >= 0.0 {
        let root = d.sqrt();
        let t1 = if half_r >= 0.0 { -half_r - root } else { -half_r + root };
        let t2 = if t1 != 0.0 { s / t1 } else { 0.0 };
        (Complex64::new(t1, 0.0), Complex64::new(t2, 0.0))
    } else {
        let im = (-d).sqrt();
        (Complex64::new(-half_r, im), Complex64::new(-half_r, -im))
    };
    [Complex64::new(r, 0.0), t1, t2]
}
