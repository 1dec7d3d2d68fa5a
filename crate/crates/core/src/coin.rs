//! Coin matrices and the 2x2 / 4x4 blocks derived from them.
//!
//! Spinor basis is `(L, R)`. The doubled space uses `LL, LR, RL, RR`, so
//! index `2 * i1 + i2` addresses `|i1⟩ ⊗ |i2⟩`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, C64, ZERO};

pub const UNITARITY_TOL: f64 = 1e-10;

pub type Mat2 = [[C64; 2]; 2];
pub type Mat4 = [[C64; 4]; 4];

pub const LL: usize = 0;
pub const LR: usize = 1;
pub const RL: usize = 2;
pub const RR: usize = 3;

/// A 2x2 unitary `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coin {
    a: C64,
    b: C64,
    c: C64,
    d: C64,
}

impl Coin {
    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Coin {
            a: c(h, 0.0),
            b: c(h, 0.0),
            c: c(h, 0.0),
            d: c(-h, 0.0),
        }
    }

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Result<Self> {
        Self::with_tolerance(a, b, c, d, UNITARITY_TOL)
    }

    pub fn with_tolerance(a: C64, b: C64, c: C64, d: C64, tolerance: f64) -> Result<Self> {
        let coin = Coin { a, b, c, d };
        let residual = coin.unitarity_residual();
        if !(residual <= tolerance) {
            return Err(Error::NonUnitaryCoin { residual, tolerance });
        }
        Ok(coin)
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn b(&self) -> C64 {
        self.b
    }

    pub fn c(&self) -> C64 {
        self.c
    }

    pub fn d(&self) -> C64 {
        self.d
    }

    pub fn entries(&self) -> [C64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn matrix(&self) -> Mat2 {
        [[self.a, self.b], [self.c, self.d]]
    }

    /// Spectral norm of `H* H - I`.
    pub fn unitarity_residual(&self) -> f64 {
        let h = self.matrix();
        let mut e = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                e[i][j] = h[0][i].conj() * h[0][j] + h[1][i].conj() * h[1][j];
            }
            e[i][i] -= 1.0;
        }
        // e is Hermitian: eigenvalues are mean ± radius.
        let mean = 0.5 * (e[0][0].re + e[1][1].re);
        let half_gap = 0.5 * (e[0][0].re - e[1][1].re);
        let radius = half_gap.hypot(e[0][1].norm());
        mean.abs() + radius
    }

    /// All four entries non-zero.
    pub fn is_generic(&self) -> bool {
        (self.a * self.b * self.c * self.d).norm() > 1e-24
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    pub fn blocks(&self) -> CoinBlocks {
        CoinBlocks::new(self)
    }
}

/// The splittings of a coin and their tensor products with conjugates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinBlocks {
    /// Coin acting after projecting on `L`.
    pub p: Mat2,
    /// Coin acting after projecting on `R`.
    pub q: Mat2,
    /// Projection on `L` after the coin.
    pub p_prime: Mat2,
    /// Projection on `R` after the coin.
    pub q_prime: Mat2,
    pub pp: Mat4,
    pub qq: Mat4,
    pub pq: Mat4,
    pub qp: Mat4,
}

impl CoinBlocks {
    pub fn new(coin: &Coin) -> Self {
        let (a, b, c, d) = (coin.a, coin.b, coin.c, coin.d);
        let p = [[a, ZERO], [c, ZERO]];
        let q = [[ZERO, b], [ZERO, d]];
        let p_prime = [[a, b], [ZERO, ZERO]];
        let q_prime = [[ZERO, ZERO], [c, d]];
        CoinBlocks {
            pp: tensor_conj(&p, &p),
            qq: tensor_conj(&q, &q),
            pq: tensor_conj(&p, &q),
            qp: tensor_conj(&q, &p),
            p,
            q,
            p_prime,
            q_prime,
        }
    }

    /// `e^{-ik} PP̄ + e^{ik} QQ̄`.
    pub fn diagonal_symbol(&self, k: f64) -> Mat4 {
        let em = C64::from_polar(1.0, -k);
        let ep = C64::from_polar(1.0, k);
        let mut out = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = em * self.pp[i][j] + ep * self.qq[i][j];
            }
        }
        out
    }

    /// `d/dk` of [`diagonal_symbol`](Self::diagonal_symbol) at `k = 0`.
    pub fn diagonal_symbol_derivative(&self) -> Mat4 {
        let i = c(0.0, 1.0);
        let mut out = [[ZERO; 4]; 4];
        for r in 0..4 {
            for s in 0..4 {
                out[r][s] = -i * self.pp[r][s] + i * self.qq[r][s];
            }
        }
        out
    }
}

/// `(A ⊗ B̄)[(i1 i2), (j1 j2)] = A[i1][j1] · conj(B[i2][j2])`.
pub fn tensor_conj(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i1 in 0..2 {
        for i2 in 0..2 {
            for j1 in 0..2 {
                for j2 in 0..2 {
                    out[2 * i1 + i2][2 * j1 + j2] = a[i1][j1] * b[i2][j2].conj();
                }
            }
        }
    }
    out
}

/// `x ⊗ ȳ` in the `LL, LR, RL, RR` order.
pub fn spinor_tensor_conj(x: [C64; 2], y: [C64; 2]) -> [C64; 4] {
    [
        x[0] * y[0].conj(),
        x[0] * y[1].conj(),
        x[1] * y[0].conj(),
        x[1] * y[1].conj(),
    ]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

pub fn mat4_apply(m: &Mat4, v: &[C64; 4]) -> [C64; 4] {
    let mut out = [ZERO; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

pub fn mat4_to_cmatrix(m: &Mat4) -> CMatrix {
    CMatrix::from_fn(4, 4, |i, j| m[i][j])
}
