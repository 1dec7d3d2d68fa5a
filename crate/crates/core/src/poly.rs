//! Polynomial helpers: a cubic solver and Horner evaluation.

use crate::linalg::{C64, ZERO};

/// Evaluates a polynomial given by coefficients in descending degree order.
pub fn horner(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().fold(ZERO, |acc, &c| acc * z + c)
}

fn horner_derivative(coeffs: &[C64], z: C64) -> C64 {
    let deg = coeffs.len().saturating_sub(1);
    coeffs
        .iter()
        .take(deg)
        .enumerate()
        .fold(ZERO, |acc, (i, &c)| acc * z + c * (deg - i) as f64)
}

/// Roots of `a z^3 + b z^2 + c z + d` with `a != 0`.
///
/// Cardano on the depressed cubic, choosing the branch of the square root
/// that avoids cancellation, then two Newton steps per root against the
/// original polynomial.
pub fn solve_cubic(a: C64, b: C64, c: C64, d: C64) -> [C64; 3] {
    assert!(a.norm() > 0.0, "leading coefficient must be non-zero");
    let (b, c, d) = (b / a, c / a, d / a);
    // z = w - b/3  ->  w^3 + p w + q = 0
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;

    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let cand1 = -q / 2.0 + disc;
    let cand2 = -q / 2.0 - disc;
    let inner = if cand1.norm() >= cand2.norm() { cand1 } else { cand2 };

    let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let mut roots = [ZERO; 3];
    if inner.norm() == 0.0 {
        // p = q = 0: triple root.
        roots = [-shift; 3];
    } else {
        let u0 = inner.powf(1.0 / 3.0);
        let mut u = u0;
        for root in roots.iter_mut() {
            *root = u - p / (3.0 * u) - shift;
            u *= omega;
        }
    }

    let coeffs = [C64::new(1.0, 0.0), b, c, d];
    for root in roots.iter_mut() {
        for _ in 0..2 {
            let f = horner(&coeffs, *root);
            let df = horner_derivative(&coeffs, *root);
            if df.norm() > 1e-8 * (1.0 + root.norm()).powi(2) {
                let next = *root - f / df;
                if horner(&coeffs, next).norm() < f.norm() {
                    *root = next;
                }
            }
        }
    }
    roots
}

/// Matches two multisets of complex numbers greedily by nearest distance and
/// returns the largest pairing distance, or `None` when the sizes differ.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for &x in a {
        let (j, dist) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))?;
        used[j] = true;
        worst = worst.max(dist);
    }
    Some(worst)
}
