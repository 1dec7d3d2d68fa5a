//! Momentum-space operator of the band walk and its spectral structure.
//!
//! A band vector is laid out in blocks of four components, one block per
//! transverse offset in the order `t, t-1, ..., s`. Block row `v` of the
//! operator at momentum `k` is
//!
//! ```text
//! (e^{-ik} PP̄ + e^{ik} QQ̄) φ(v) + PQ̄ φ(v-1) + QP̄ φ(v+1)
//! ```
//!
//! which is the Fourier transform (`Σ_u e^{iku}`) of one real-space step.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::Serialize;

use crate::coin::{mat4_to_cmatrix, Coin, LL, RR};
use crate::eigen::{self, eigenspace_basis, Eigensystem};
use crate::error::{Error, Result};
use crate::linalg::{c, fix_phase, inner, normalize, re, CMatrix, C64, ONE, ZERO};
use crate::poly::solve_cubic;
use crate::walker::Stripe;

/// Largest `δ` for which the second-order expansions are used.
pub const EXPANSION_MAX_DELTA: f64 = 0.3;

/// Tie tolerance when matching computed eigenvalues to predictions.
pub const MATCH_TIE_TOL: f64 = 1e-6;

/// The operator at one momentum.
#[derive(Debug, Clone)]
pub struct WOperator {
    pub coin: Coin,
    pub stripe: Stripe,
    pub k: f64,
    matrix: CMatrix,
}

impl WOperator {
    pub fn new(coin: &Coin, stripe: Stripe, k: f64) -> Self {
        let blocks = coin.blocks();
        let m = stripe.width();
        let diag = mat4_to_cmatrix(&blocks.diagonal_symbol(k));
        let from_lower = mat4_to_cmatrix(&blocks.pq);
        let from_upper = mat4_to_cmatrix(&blocks.qp);
        let mut matrix = CMatrix::zeros(4 * m, 4 * m);
        for i in 0..m {
            matrix.set_block(4 * i, 4 * i, &diag);
            // Block i + 1 holds offset v - 1.
            if i + 1 < m {
                matrix.set_block(4 * i, 4 * (i + 1), &from_lower);
            }
            if i > 0 {
                matrix.set_block(4 * i, 4 * (i - 1), &from_upper);
            }
        }
        WOperator {
            coin: *coin,
            stripe,
            k,
            matrix,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        eigen::eigenvalues(&self.matrix)
    }

    pub fn eig(&self) -> Result<Eigensystem> {
        eigen::eig(&self.matrix)
    }

    pub fn eig_with_limit(&self, limit: usize) -> Result<Eigensystem> {
        eigen::eig_with_limit(&self.matrix, limit)
    }

    pub fn spectral_norm(&self) -> Result<f64> {
        self.matrix.spectral_norm()
    }

    /// Index of the first component of the block at offset `v`.
    pub fn block_start(&self, v: i64) -> usize {
        4 * (self.stripe.t() - v) as usize
    }
}

pub fn build_w(coin: &Coin, stripe: Stripe, k: f64) -> WOperator {
    WOperator::new(coin, stripe, k)
}

/// `d/dk` of the operator, block diagonal with `-i PP̄ + i QQ̄`.
pub fn momentum_derivative(coin: &Coin, stripe: Stripe) -> CMatrix {
    let block = mat4_to_cmatrix(&coin.blocks().diagonal_symbol_derivative());
    let m = stripe.width();
    let mut out = CMatrix::zeros(4 * m, 4 * m);
    for i in 0..m {
        out.set_block(4 * i, 4 * i, &block);
    }
    out
}

/// `δ = √(2(1 - cos k))`, i.e. `2 sin(k/2)` on `[0, π]`.
pub fn delta_from_momentum(k: f64) -> f64 {
    2.0 * (k / 2.0).sin().abs()
}

/// Inverse of [`delta_from_momentum`] on `[0, 2]`.
pub fn momentum_from_delta(delta: f64) -> f64 {
    2.0 * (delta / 2.0).asin()
}

/// Predicted eigenvalues near 1 for the width-2 Hadamard band:
/// `[1 - δ²/4, 1 + iδ/√3 - 2δ²/9, 1 - iδ/√3 - 2δ²/9]`.
pub fn dominant_expansion(delta: f64) -> [C64; 3] {
    let d2 = delta * delta;
    let side = delta / 3f64.sqrt();
    [
        re(1.0 - d2 / 4.0),
        c(1.0 - 2.0 * d2 / 9.0, side),
        c(1.0 - 2.0 * d2 / 9.0, -side),
    ]
}

pub fn central_expansion(k: f64) -> C64 {
    dominant_expansion(delta_from_momentum(k))[0]
}

pub fn ballistic_expansion(k: f64) -> [C64; 2] {
    let e = dominant_expansion(delta_from_momentum(k));
    [e[1], e[2]]
}

/// Roots of `2λ³ + (1 - 2cos k)λ² - 1` and `2λ³ - (1 + 2cos k)λ² + 1`,
/// which together with a double zero make up the width-2 Hadamard spectrum.
pub fn cubic_spectrum_m2(k: f64) -> ([C64; 3], [C64; 3]) {
    let ck = k.cos();
    let first = solve_cubic(re(2.0), re(1.0 - 2.0 * ck), ZERO, re(-1.0));
    let second = solve_cubic(re(2.0), re(-(1.0 + 2.0 * ck)), ZERO, re(1.0));
    (first, second)
}

pub fn cubic_residuals_m2(k: f64, roots: &([C64; 3], [C64; 3])) -> [f64; 6] {
    let ck = k.cos();
    let f = |l: C64| 2.0 * l * l * l + (1.0 - 2.0 * ck) * l * l - 1.0;
    let g = |l: C64| 2.0 * l * l * l - (1.0 + 2.0 * ck) * l * l + 1.0;
    let (a, b) = roots;
    [
        f(a[0]).norm(),
        f(a[1]).norm(),
        f(a[2]).norm(),
        g(b[0]).norm(),
        g(b[1]).norm(),
        g(b[2]).norm(),
    ]
}

/// Closed-form radicals for the two cubics on branch `j` of the cube root.
/// Branch 0 uses the real cube root. The second radical cancels badly as
/// `2cos k + 1` approaches zero.
pub fn cardano_branch_m2(k: f64, j: u32) -> (C64, C64) {
    let r = k.cos();
    let eta = 53.0 + 6.0 * r - 12.0 * r * r
        + 8.0 * r.powi(3)
        + 6.0 * 6f64.sqrt() * (13.0 + 3.0 * r - 6.0 * r * r + 4.0 * r.powi(3)).max(0.0).sqrt();
    let zeta = -53.0
        + 6.0 * r
        + 12.0 * r * r
        + 8.0 * r.powi(3)
        + 6.0 * 6f64.sqrt() * (13.0 - 3.0 * r - 6.0 * r * r - 4.0 * r.powi(3)).max(0.0).sqrt();
    let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / 3.0);
    let root = |p: f64, x: f64| {
        let cube = re(x.cbrt()) * omega;
        (re(p) + p * p / cube + cube) / 6.0
    };
    (root(2.0 * r - 1.0, eta), root(2.0 * r + 1.0, zeta))
}

/// Evaluates a product of polynomial factors at a square matrix. Each factor
/// lists coefficients in descending degree order.
pub fn matrix_polynomial_product(a: &CMatrix, factors: &[&[f64]]) -> CMatrix {
    let n = a.rows();
    let mut acc = CMatrix::identity(n);
    for coeffs in factors {
        let mut value = CMatrix::zeros(n, n);
        for &coef in coeffs.iter() {
            value = &(&value * a) + &CMatrix::identity(n).scale(re(coef));
        }
        acc = &acc * &value;
    }
    acc
}

/// Frobenius norms of three polynomials evaluated at the width-2 operator at
/// `k = 0`: the minimal polynomial `λ(λ-1)(2λ²+λ+1)(2λ+1)`, the
/// characteristic polynomial `λ²(λ-1)³(2λ²+λ+1)(2λ+1)`, and the minimal
/// polynomial with `(2λ+1)` removed.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolynomialResiduals {
    pub minimal: f64,
    pub characteristic: f64,
    pub without_last_factor: f64,
}

const LINEAR: &[f64] = &[1.0, 0.0];
const SHIFTED: &[f64] = &[1.0, -1.0];
const QUADRATIC: &[f64] = &[2.0, 1.0, 1.0];
const HALF: &[f64] = &[2.0, 1.0];

pub fn minimal_poly_residual(coin: &Coin, stripe: Stripe) -> f64 {
    let w = build_w(coin, stripe, 0.0);
    matrix_polynomial_product(w.matrix(), &[LINEAR, SHIFTED, QUADRATIC, HALF]).frobenius_norm()
}

pub fn polynomial_residuals(coin: &Coin, stripe: Stripe) -> PolynomialResiduals {
    let w = build_w(coin, stripe, 0.0);
    let a = w.matrix();
    PolynomialResiduals {
        minimal: matrix_polynomial_product(a, &[LINEAR, SHIFTED, QUADRATIC, HALF]).frobenius_norm(),
        characteristic: matrix_polynomial_product(a, &[LINEAR, LINEAR, SHIFTED, SHIFTED, SHIFTED, QUADRATIC, HALF])
            .frobenius_norm(),
        without_last_factor: matrix_polynomial_product(a, &[LINEAR, SHIFTED, QUADRATIC]).frobenius_norm(),
    }
}

/// Data of the first-order reduction at the eigenvalue 1 of the operator at
/// `k = 0`.
#[derive(Debug, Clone)]
pub struct KatoReduction {
    /// Eigenprojection onto the eigenvalue-1 eigenspace.
    pub projection: CMatrix,
    /// `d/dk` of the operator at `k = 0`.
    pub derivative: CMatrix,
    /// `projection · derivative · projection`.
    pub reduced: CMatrix,
    /// Orthonormal basis of the range of `projection`.
    pub basis: Vec<Vec<C64>>,
    /// Eigenvalues of `reduced` on the range of `projection`.
    pub values: Vec<C64>,
    /// Matching unit eigenvectors.
    pub vectors: Vec<Vec<C64>>,
}

fn sqrt3() -> f64 {
    3f64.sqrt()
}

/// Orthonormal basis of the eigenvalue-1 eigenspace for the width-2
/// Hadamard band.
pub fn hadamard_unit_eigenbasis() -> [[f64; 8]; 3] {
    let h = FRAC_1_SQRT_2;
    let a = 1.0 / (2.0 * sqrt3());
    let b = 1.0 / sqrt3();
    [
        [0.0, 0.0, 0.0, 0.0, h, 0.0, 0.0, h],
        [a, 0.0, b, -a, a, b, 0.0, -a],
        [h, 0.0, 0.0, h, 0.0, 0.0, 0.0, 0.0],
    ]
}

/// Unit eigenvectors of the reduced operator for the width-2 Hadamard band,
/// belonging to `0`, `i/√3` and `-i/√3`.
pub fn hadamard_reduced_eigenvectors() -> [[f64; 8]; 3] {
    let r3 = sqrt3();
    let n2 = 1.0 / (2f64.sqrt() * (3.0 - r3));
    let n3 = 1.0 / (2f64.sqrt() * (3.0 + r3));
    let v2 = [2.0 - r3, 0.0, 1.0 - r3, 1.0, 2.0 - r3, 1.0 - r3, 0.0, 1.0];
    let v3 = [2.0 + r3, 0.0, 1.0 + r3, 1.0, 2.0 + r3, 1.0 + r3, 0.0, 1.0];
    [
        [0.5, 0.0, 0.0, 0.5, -0.5, 0.0, 0.0, -0.5],
        v2.map(|x| x * n2),
        v3.map(|x| x * n3),
    ]
}

fn to_complex(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| re(x)).collect()
}

fn column_matrix(columns: &[Vec<C64>]) -> CMatrix {
    let rows = columns.first().map_or(0, Vec::len);
    CMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i])
}

impl KatoReduction {
    /// Closed-form objects for the Hadamard coin on the band `(-1, 0)`.
    pub fn hadamard_band2() -> Self {
        let coin = Coin::hadamard();
        let stripe = Stripe::new(-1, 0).expect("valid stripe");
        let basis: Vec<Vec<C64>> = hadamard_unit_eigenbasis().iter().map(|v| to_complex(v)).collect();
        let mut projection = CMatrix::zeros(8, 8);
        for v in &basis {
            projection = &projection + &CMatrix::outer(v, v);
        }
        let derivative = momentum_derivative(&coin, stripe);
        let reduced = &(&projection * &derivative) * &projection;
        let s = 1.0 / sqrt3();
        KatoReduction {
            projection,
            derivative,
            reduced,
            basis,
            values: vec![ZERO, c(0.0, s), c(0.0, -s)],
            vectors: hadamard_reduced_eigenvectors().iter().map(|v| to_complex(v)).collect(),
        }
    }

    /// Numerical reduction for any coin and band: eigenprojection built from
    /// right and left eigenvectors, reduced eigenpairs from the compressed
    /// `m x m` problem.
    pub fn compute(coin: &Coin, stripe: Stripe) -> Result<Self> {
        let w = build_w(coin, stripe, 0.0);
        let a = w.matrix();
        let es = w.eig()?;
        let cluster = es
            .clusters
            .iter()
            .find(|cl| (cl.center - ONE).norm() < 1e-6)
            .ok_or_else(|| Error::InvalidArgument("1 is not an eigenvalue of the operator at k = 0".into()))?;
        let count = cluster.algebraic_multiplicity();
        let scale = a.frobenius_norm().max(1.0);
        let right = eigenspace_basis(a, ONE, count, scale)?;
        let left = eigenspace_basis(&a.adjoint(), ONE, count, scale)?;
        if right.len() != count || left.len() != count {
            return Err(Error::InvalidArgument(format!(
                "eigenvalue 1 is not semisimple: multiplicity {count}, {} eigenvectors",
                right.len()
            )));
        }
        let r = column_matrix(&right);
        let l = column_matrix(&left);
        let gram_inv = (&l.adjoint() * &r).inverse()?;
        let projection = &(&r * &gram_inv) * &l.adjoint();
        let derivative = momentum_derivative(coin, stripe);
        let reduced = &(&projection * &derivative) * &projection;

        let small = &(&gram_inv * &l.adjoint()) * &(&derivative * &r);
        let small_es = eigen::eig(&small)?;
        let mut pairs: Vec<(C64, Vec<C64>)> = small_es
            .values
            .iter()
            .zip(&small_es.vectors)
            .map(|(&value, y)| {
                let mut v = r.mul_vec(y);
                normalize(&mut v);
                fix_phase(&mut v, 1e-8);
                (value, v)
            })
            .collect();
        // Order by imaginary part: 0, +, - when the spectrum is {0, ±iσ}.
        pairs.sort_by(|x, y| {
            let key = |z: C64| {
                if z.im.abs() < 1e-9 {
                    (0, 0.0)
                } else if z.im > 0.0 {
                    (1, -z.im)
                } else {
                    (2, z.im)
                }
            };
            let (kx, ky) = (key(x.0), key(y.0));
            kx.0.cmp(&ky.0).then(kx.1.total_cmp(&ky.1))
        });
        let (values, vectors) = pairs.into_iter().unzip();
        Ok(KatoReduction {
            projection,
            derivative,
            reduced,
            basis: right,
            values,
            vectors,
        })
    }

    /// `‖R* + R‖_max` of the reduced operator.
    pub fn skew_hermitian_residual(&self) -> f64 {
        (&self.reduced.adjoint() + &self.reduced).max_abs()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Largest `‖R v - λ v‖` over the reduced eigenpairs.
    pub fn eigenpair_residual(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(&l, v)| {
                let rv = self.reduced.mul_vec(v);
                rv.iter()
                    .zip(v)
                    .map(|(a, b)| (a - l * b).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Rank-one projections `v v*` of the reduced eigenvectors.
    pub fn mode_projections(&self) -> Vec<CMatrix> {
        self.vectors.iter().map(|v| CMatrix::outer(v, v)).collect()
    }
}

/// Eigenvalues of the operator at `k(δ)` matched to the second-order
/// predictions, with the distance of each spectral projection from the
/// limiting rank-one projection.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbedProjections {
    pub delta: f64,
    pub momentum: f64,
    pub predicted: [C64; 3],
    pub eigenvalues: [C64; 3],
    pub eigenvalue_errors: [f64; 3],
    /// Frobenius norm of `Π_j(δ) - v_j v_j*`.
    pub projection_residuals: [f64; 3],
}

/// Nearest entry of `candidates` to `target`. Fails when the runner-up is
/// within [`MATCH_TIE_TOL`] of the same distance.
pub fn match_eigenvalue(candidates: &[C64], target: C64) -> Result<usize> {
    let mut order: Vec<(usize, f64)> = candidates
        .iter()
        .enumerate()
        .map(|(i, z)| (i, (z - target).norm()))
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    match order.as_slice() {
        [] => Err(Error::InvalidArgument("no eigenvalues to match".into())),
        [(i, _)] => Ok(*i),
        [(i, d0), (j, d1), ..] => {
            if d1 - d0 < MATCH_TIE_TOL {
                Err(Error::AmbiguousMatch {
                    target: format!("{target}"),
                    first: format!("{}", candidates[*i]),
                    second: format!("{}", candidates[*j]),
                })
            } else {
                Ok(*i)
            }
        }
    }
}

/// Compares spectral projections of the width-2 Hadamard operator at `k(δ)`
/// with the rank-one limits. At `δ = 0` the comparison is made on the reduced
/// operator itself.
pub fn perturbed_projection_check(delta: f64) -> Result<PerturbedProjections> {
    if !(0.0..=EXPANSION_MAX_DELTA).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "delta {delta} outside [0, {EXPANSION_MAX_DELTA}]"
        )));
    }
    let limits = KatoReduction::hadamard_band2().mode_projections();
    let predicted = dominant_expansion(delta);
    let momentum = momentum_from_delta(delta);
    let mut eigenvalues = [ZERO; 3];
    let mut projection_residuals = [0.0; 3];

    if delta == 0.0 {
        let reduced = KatoReduction::compute(&Coin::hadamard(), Stripe::new(-1, 0)?)?;
        let targets = [ZERO, c(0.0, 1.0 / sqrt3()), c(0.0, -1.0 / sqrt3())];
        for (j, target) in targets.into_iter().enumerate() {
            let idx = match_eigenvalue(&reduced.values, target)?;
            eigenvalues[j] = ONE;
            let v = &reduced.vectors[idx];
            projection_residuals[j] = (&CMatrix::outer(v, v) - &limits[j]).frobenius_norm();
        }
    } else {
        let w = build_w(&Coin::hadamard(), Stripe::new(-1, 0)?, momentum);
        let values = w.eigenvalues()?;
        for j in 0..3 {
            let idx = match_eigenvalue(&values, predicted[j])?;
            // Polish the eigenvalue and take the oblique projection.
            let proj = eigen::spectral_projection(w.matrix(), values[idx])?;
            eigenvalues[j] = values[idx];
            projection_residuals[j] = (&proj - &limits[j]).frobenius_norm();
        }
    }
    let eigenvalue_errors = [0, 1, 2].map(|j| (eigenvalues[j] - predicted[j]).norm());
    Ok(PerturbedProjections {
        delta,
        momentum,
        predicted,
        eigenvalues,
        eigenvalue_errors,
        projection_residuals,
    })
}

/// `⟨q0, W(k)^n φ0⟩` where `q0` is `LL + RR` on the `v = 0` block and
/// `φ0` a flat band vector in block order.
pub fn characteristic_function(coin: &Coin, stripe: Stripe, initial: &[C64], n: u32, k: f64) -> Result<C64> {
    let w = build_w(coin, stripe, k);
    if initial.len() != w.dim() {
        return Err(Error::BandLengthMismatch {
            expected: w.dim(),
            got: initial.len(),
        });
    }
    let evolved = w.matrix().pow(n).mul_vec(initial);
    let start = w.block_start(0);
    Ok(evolved[start + LL] + evolved[start + RR])
}

/// Flat band vector for the product start `(Hg) ⊗ conj(Hg)` on the `v = 0`
/// block.
pub fn product_band_vector(coin: &Coin, g: [C64; 2], stripe: Stripe) -> Vec<C64> {
    let h = coin.apply(g);
    let cell = crate::coin::spinor_tensor_conj(h, h);
    let mut out = vec![ZERO; 4 * stripe.width()];
    let start = 4 * (stripe.t() as usize);
    out[start..start + 4].copy_from_slice(&cell);
    out
}

/// Central difference `(W(h) - W(-h)) / 2h`.
pub fn central_difference(coin: &Coin, stripe: Stripe, h: f64) -> CMatrix {
    let plus = build_w(coin, stripe, h);
    let minus = build_w(coin, stripe, -h);
    (plus.matrix() - minus.matrix()).scale(re(0.5 / h))
}

/// Overlaps of `vector` with the reduced eigenvectors.
pub fn overlaps(reduction: &KatoReduction, vector: &[C64]) -> Vec<C64> {
    reduction.vectors.iter().map(|v| inner(v, vector)).collect()
}

/// Overlaps of `vector` with the orthonormal eigenbasis.
pub fn basis_overlaps(reduction: &KatoReduction, vector: &[C64]) -> Vec<C64> {
    reduction.basis.iter().map(|v| inner(v, vector)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::multiset_distance;

    fn band2() -> Stripe {
        Stripe::new(-1, 0).unwrap()
    }

    #[test]
    fn width_two_matrix_matches_explicit_form() {
        let rows: [[f64; 8]; 8] = [
            [1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, -1.0, 0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        ];
        let w = build_w(&Coin::hadamard(), band2(), 0.0);
        for i in 0..8 {
            for j in 0..8 {
                assert!((w.matrix()[(i, j)] - re(0.5 * rows[i][j])).norm() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn single_row_is_diagonal_symbol() {
        let coin = Coin::hadamard();
        let w = build_w(&coin, Stripe::new(0, 0).unwrap(), 0.7);
        let v = mat4_to_cmatrix(&coin.blocks().diagonal_symbol(0.7));
        assert_eq!(w.matrix().max_abs_diff(&v), 0.0);
        // λ² - cos k · λ on the LL/RR components, two more zeros from LR/RL.
        // The zero is defective, so compare the clustered values.
        let got = w.eig().unwrap().values;
        let want = [ZERO, ZERO, ZERO, re(0.7f64.cos())];
        assert!(multiset_distance(&got, &want).unwrap() < 1e-10);
    }

    #[test]
    fn operator_is_a_contraction() {
        let coin = Coin::hadamard();
        for m in 1..=5 {
            for k in [0.0, 0.4, 1.3, 3.0, 5.5] {
                let n = build_w(&coin, Stripe::centered(m).unwrap(), k).spectral_norm().unwrap();
                assert!(n <= 1.0 + 1e-12, "M={m} k={k} norm={n}");
            }
        }
    }

    #[test]
    fn eig_residuals_are_small() {
        let coin = Coin::hadamard();
        for m in 1..=6 {
            for k in [0.0, 0.01, 0.9, 2.5] {
                let w = build_w(&coin, Stripe::centered(m).unwrap(), k);
                let es = w.eig().unwrap();
                let norm = w.spectral_norm().unwrap();
                assert!(es.max_residual(w.matrix()) <= 1e-10 * norm, "M={m} k={k}");
            }
        }
    }

    #[test]
    fn size_limit_is_enforced() {
        let w = build_w(&Coin::hadamard(), Stripe::centered(3).unwrap(), 0.0);
        assert!(matches!(
            w.eig_with_limit(8),
            Err(Error::MatrixTooLarge { dim: 12, limit: 8 })
        ));
    }

    #[test]
    fn cubics_at_zero_momentum() {
        let (first, second) = cubic_spectrum_m2(0.0);
        let r7 = 7f64.sqrt();
        assert!(multiset_distance(&first, &[ONE, c(-0.25, r7 / 4.0), c(-0.25, -r7 / 4.0)]).unwrap() < 1e-10);
        assert!(multiset_distance(&second, &[ONE, ONE, re(-0.5)]).unwrap() < 1e-7);
    }

    #[test]
    fn cubics_and_zeros_give_full_spectrum() {
        for k in [0.0, 0.05, 0.5, 1.7, 3.1, 4.4] {
            let roots = cubic_spectrum_m2(k);
            assert!(cubic_residuals_m2(k, &roots).iter().all(|&r| r <= 1e-10));
            let mut union: Vec<C64> = roots.0.iter().chain(roots.1.iter()).copied().collect();
            union.extend([ZERO, ZERO]);
            let spec = build_w(&Coin::hadamard(), band2(), k).eigenvalues().unwrap();
            assert!(multiset_distance(&union, &spec).unwrap() < 1e-7, "k={k}");
        }
    }

    #[test]
    fn cardano_branches_agree_with_solver() {
        for k in [0.1, 0.8, 1.2, 3.0] {
            let (first, second) = cubic_spectrum_m2(k);
            let branches: Vec<(C64, C64)> = (0..3).map(|j| cardano_branch_m2(k, j)).collect();
            let a: Vec<C64> = branches.iter().map(|b| b.0).collect();
            let b: Vec<C64> = branches.iter().map(|b| b.1).collect();
            assert!(multiset_distance(&a, &first).unwrap() < 1e-9, "k={k}");
            assert!(multiset_distance(&b, &second).unwrap() < 1e-9, "k={k}");
        }
        // Branch 0 of the first cubic is the dominant central root.
        let (central, _) = cardano_branch_m2(0.0, 0);
        assert!((central - ONE).norm() < 1e-12);
    }

    #[test]
    fn expansion_at_zero_is_one() {
        assert_eq!(dominant_expansion(0.0), [ONE, ONE, ONE]);
        assert!((momentum_from_delta(delta_from_momentum(0.2)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn polynomial_identities() {
        let r = polynomial_residuals(&Coin::hadamard(), band2());
        assert!(r.minimal < 1e-12);
        assert!(r.characteristic < 1e-12);
        assert!(r.without_last_factor >= 0.1);
        assert_eq!(minimal_poly_residual(&Coin::hadamard(), band2()), r.minimal);
    }

    #[test]
    fn closed_form_projection_entries() {
        let want: [[f64; 8]; 8] = [
            [7.0, 0.0, 2.0, 5.0, 1.0, 2.0, 0.0, -1.0],
            [0.0; 8],
            [2.0, 0.0, 4.0, -2.0, 2.0, 4.0, 0.0, -2.0],
            [5.0, 0.0, -2.0, 7.0, -1.0, -2.0, 0.0, 1.0],
            [1.0, 0.0, 2.0, -1.0, 7.0, 2.0, 0.0, 5.0],
            [2.0, 0.0, 4.0, -2.0, 2.0, 4.0, 0.0, -2.0],
            [0.0; 8],
            [-1.0, 0.0, -2.0, 1.0, 5.0, -2.0, 0.0, 7.0],
        ];
        let kr = KatoReduction::hadamard_band2();
        for i in 0..8 {
            for j in 0..8 {
                assert!((kr.projection[(i, j)] - re(want[i][j] / 12.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn closed_form_reduced_operator_entries() {
        let pattern: [[f64; 8]; 8] = [
            [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            [0.0; 8],
            [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, -1.0, 0.0, 1.0, 0.0, -1.0],
            [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
            [0.0; 8],
            [0.0, 0.0, 1.0, -1.0, 0.0, 1.0, 0.0, -1.0],
        ];
        let kr = KatoReduction::hadamard_band2();
        for i in 0..8 {
            for j in 0..8 {
                let want = c(0.0, -1.0 / 6.0) * pattern[i][j];
                assert!((kr.reduced[(i, j)] - want).norm() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn numerical_reduction_matches_closed_form() {
        let closed = KatoReduction::hadamard_band2();
        let numeric = KatoReduction::compute(&Coin::hadamard(), band2()).unwrap();
        assert_eq!(numeric.rank(), 3);
        assert!(numeric.projection.max_abs_diff(&closed.projection) < 1e-10);
        assert!(numeric.reduced.max_abs_diff(&closed.reduced) < 1e-10);
        assert!(multiset_distance(&numeric.values, &closed.values).unwrap() < 1e-10);
        for (a, b) in numeric.mode_projections().iter().zip(closed.mode_projections()) {
            assert!(a.max_abs_diff(&b) < 1e-9);
        }
    }

    #[test]
    fn reduced_eigenpairs_are_consistent() {
        let kr = KatoReduction::hadamard_band2();
        assert!(kr.eigenpair_residual() < 1e-14);
        assert!(kr.skew_hermitian_residual() < 1e-15);
        for (i, a) in kr.vectors.iter().enumerate() {
            for (j, b) in kr.vectors.iter().enumerate() {
                let want = if i == j { ONE } else { ZERO };
                assert!((inner(a, b) - want).norm() < 1e-14);
            }
            let pa = kr.projection.mul_vec(a);
            assert!(pa.iter().zip(a).all(|(x, y)| (x - y).norm() < 1e-14));
        }
    }

    #[test]
    fn second_vector_normalizations_agree() {
        let r3 = sqrt3();
        let a = 1.0 / (12.0 * (2.0 - r3)).sqrt();
        let b = 1.0 / (2f64.sqrt() * (3.0 - r3));
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let coin = Coin::hadamard();
        let exact = momentum_derivative(&coin, band2());
        let e3 = central_difference(&coin, band2(), 1e-3).max_abs_diff(&exact);
        let e4 = central_difference(&coin, band2(), 1e-4).max_abs_diff(&exact);
        assert!(e3 < 1e-6 && e4 < 1e-8, "{e3} {e4}");
        assert!(e4 < e3);
    }

    #[test]
    fn projection_check_at_zero_is_exact() {
        let r = perturbed_projection_check(0.0).unwrap();
        assert!(
            r.projection_residuals.iter().all(|&x| x < 1e-12),
            "{:?}",
            r.projection_residuals
        );
        assert!(perturbed_projection_check(0.5).is_err());
    }

    #[test]
    fn matching_reports_ties() {
        let vals = [re(1.0), re(-1.0)];
        assert!(matches!(
            match_eigenvalue(&vals, ZERO),
            Err(Error::AmbiguousMatch { .. })
        ));
        assert_eq!(match_eigenvalue(&vals, re(0.9)).unwrap(), 0);
    }

    #[test]
    fn characteristic_function_at_zero_steps_is_one() {
        let coin = Coin::hadamard();
        let stripe = Stripe::centered(3).unwrap();
        let g = [re(1.0), ZERO];
        let phi = product_band_vector(&coin, g, stripe);
        let z = characteristic_function(&coin, stripe, &phi, 0, 1.1).unwrap();
        assert!((z - ONE).norm() < 1e-15);
    }
}
