//! Eigenvalues of 3x3 matrices by closed-form cubic resolution, with a
//! companion-matrix cross-check.
//!
//! The reduced averaged system is exactly 3x3, so the characteristic
//! polynomial is a cubic solved in closed form (trigonometric branch for
//! three real roots, Cardano otherwise), followed by a couple of Newton
//! polishing steps. The Schur-based eigenvalues of the companion matrix act
//! as an independent route for the same roots.

use nalgebra::{Complex, Matrix3};
use thiserror::Error;

pub type Complex64 = Complex<f64>;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error(
        "cubic and companion eigenvalue routes disagree: |{cubic} - {companion}| = {diff:.3e} \
         (tolerance {tol:.1e})"
    )]
    RouteMismatch {
        cubic: Complex64,
        companion: Complex64,
        diff: f64,
        tol: f64,
    },
}

/// Monic characteristic polynomial coefficients of a 3x3 matrix:
/// lambda^3 + c2 lambda^2 + c1 lambda + c0.
pub fn characteristic_cubic(m: &[[f64; 3]; 3]) -> (f64, f64, f64) {
    let trace = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        + m[0][0] * m[2][2]
        - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    (-trace, minors, -det)
}

/// Roots of lambda^3 + c2 lambda^2 + c1 lambda + c0 in closed form.
pub fn cubic_roots(c2: f64, c1: f64, c0: f64) -> [Complex64; 3] {
    if c0 == 0.0 {
        // Exact zero root (a vanishing Jacobian row reaches here); the rest
        // is a quadratic.
        let [r1, r2] = quadratic_roots(c2, c1);
        return [Complex64::new(0.0, 0.0), r1, r2];
    }
    // Depressed cubic t^3 + p t + q with lambda = t - c2/3.
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2.powi(3) / 27.0 - c2 * c1 / 3.0 + c0;
    let discriminant = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    let mut roots = if discriminant > 0.0 {
        // One real root, one conjugate pair.
        let s = discriminant.sqrt();
        let u = cbrt(-q / 2.0 + s);
        let v = cbrt(-q / 2.0 - s);
        let real = u + v;
        let re = -real / 2.0;
        let im = (u - v) * 3.0_f64.sqrt() / 2.0;
        [
            Complex64::new(real, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    } else {
        // Three real roots: trigonometric form.
        let r = (-p / 3.0).sqrt();
        if r == 0.0 {
            [Complex64::new(0.0, 0.0); 3]
        } else {
            let cos_arg = (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0);
            let theta = cos_arg.acos();
            let mut out = [Complex64::new(0.0, 0.0); 3];
            for (k, slot) in out.iter_mut().enumerate() {
                let t = 2.0 * r * ((theta - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
                *slot = Complex64::new(t, 0.0);
            }
            out
        }
    };
    for root in &mut roots {
        *root -= Complex64::new(shift, 0.0);
        *root = polish(*root, c2, c1, c0);
    }
    roots
}

fn cbrt(x: f64) -> f64 {
    x.signum() * x.abs().powf(1.0 / 3.0)
}

// Roots of lambda^2 + b lambda + c, with the stable sign arrangement.
fn quadratic_roots(b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let sgn = if b >= 0.0 { 1.0 } else { -1.0 };
        let q = -0.5 * (b + sgn * s);
        let r1 = q;
        let r2 = if q != 0.0 { c / q } else { 0.0 };
        [Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]
    } else {
        let im = (-disc).sqrt() / 2.0;
        [
            Complex64::new(-b / 2.0, im),
            Complex64::new(-b / 2.0, -im),
        ]
    }
}

// A few complex Newton steps on the monic cubic tighten the closed-form
// roots to the residual the cross-check demands.
fn polish(z0: f64_complex_alias::C, c2: f64, c1: f64, c0: f64) -> Complex64 {
    let mut z = z0;
    for _ in 0..3 {
        let f = ((z + c2) * z + c1) * z + c0;
        let df = (3.0 * z + 2.0 * c2) * z + c1;
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        z -= step;
        if step.norm() <= 1e-16 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

mod f64_complex_alias {
    pub type C = super::Complex64;
}

/// Roots of the same cubic via Schur decomposition of its companion matrix.
pub fn companion_roots(c2: f64, c1: f64, c0: f64) -> [Complex64; 3] {
    let companion = Matrix3::new(0.0, 0.0, -c0, 1.0, 0.0, -c1, 0.0, 1.0, -c2);
    let eig = companion.complex_eigenvalues();
    [eig[0], eig[1], eig[2]]
}

/// Eigenvalues of a 3x3 matrix: closed-form cubic with matrix scaling,
/// cross-checked against the companion route to `tol` relative.
pub fn eigenvalues3(m: &[[f64; 3]; 3], tol: f64) -> Result<[Complex64; 3], EigenError> {
    // Scale the matrix so the cubic coefficients stay near unity.
    let scale = m
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    let scaled: [[f64; 3]; 3] =
        std::array::from_fn(|i| std::array::from_fn(|j| m[i][j] / scale));
    let (c2, c1, c0) = characteristic_cubic(&scaled);
    let cubic = cubic_roots(c2, c1, c0);
    let companion = companion_roots(c2, c1, c0);
    let matched = match_roots(&cubic, &companion);
    for (a, b) in cubic.iter().zip(&matched) {
        let diff = (a - b).norm();
        if diff > tol * a.norm().max(1.0) {
            return Err(EigenError::RouteMismatch {
                cubic: a * scale,
                companion: b * scale,
                diff: diff * scale,
                tol,
            });
        }
    }
    Ok(std::array::from_fn(|i| cubic[i] * scale))
}

/// Permutes `b` into the order minimizing total distance to `a`.
pub fn match_roots(a: &[Complex64; 3], b: &[Complex64; 3]) -> [Complex64; 3] {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best = PERMS[0];
    let mut best_cost = f64::INFINITY;
    for perm in PERMS {
        let cost: f64 = (0..3).map(|i| (a[i] - b[perm[i]]).norm()).sum();
        if cost < best_cost {
            best_cost = cost;
            best = perm;
        }
    }
    std::array::from_fn(|i| b[best[i]])
}
