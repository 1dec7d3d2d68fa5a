//! Real-space evolution of the stripe-cut walk and the two reference walks.
//!
//! The doubled walker lives on rotated coordinates: `u` is the position along
//! the diagonal and `v` the transverse offset, confined to `s..=t`. A cell
//! `(u, v)` corresponds to the pair of positions `(x, y) = (u - v, u + v)`,
//! so the diagonal measure is read from the `v = 0` row.
//!
//! One step maps
//!
//! ```text
//! ψ'(u, v) = PP̄ ψ(u+1, v) + QQ̄ ψ(u-1, v) + PQ̄ ψ(u, v-1) + QP̄ ψ(u, v+1)
//! ```
//!
//! with out-of-band rows read as zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coin::{mat4_apply, spinor_tensor_conj, Coin, CoinBlocks, Mat4, LL, LR, RL, RR};
use crate::error::{Error, Result};
use crate::linalg::{c, C64, ZERO};

/// Tolerance on `‖g‖ = 1` for initial spinors.
pub const SPINOR_NORM_TOL: f64 = 1e-10;

/// Cells per parallel work item. Below one chunk the step runs inline.
const PAR_CHUNK: usize = 2048;

/// Transverse extent `s..=t` of the band, with `s <= 0 <= t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stripe {
    s: i64,
    t: i64,
}

impl Stripe {
    pub fn new(s: i64, t: i64) -> Result<Self> {
        if s > 0 || t < 0 {
            return Err(Error::InvalidStripe { s, t });
        }
        Ok(Stripe { s, t })
    }

    /// Width-`m` band placed as `(-(m-1)/2, (m-1)/2)` for odd `m` and
    /// `(-m/2, m/2 - 1)` for even `m`.
    pub fn centered(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("stripe width must be at least 1".into()));
        }
        let m = m as i64;
        if m % 2 == 1 {
            Stripe::new(-(m - 1) / 2, (m - 1) / 2)
        } else {
            Stripe::new(-m / 2, m / 2 - 1)
        }
    }

    pub fn s(&self) -> i64 {
        self.s
    }

    pub fn t(&self) -> i64 {
        self.t
    }

    pub fn width(&self) -> usize {
        (self.t - self.s + 1) as usize
    }

    pub fn contains(&self, v: i64) -> bool {
        self.s <= v && v <= self.t
    }

    /// Transverse offsets in block order `t, t-1, ..., s`.
    pub fn offsets_descending(&self) -> impl Iterator<Item = i64> {
        (self.s..=self.t).rev()
    }

    /// Bands at least this wide are never cut within `n` steps.
    pub fn untruncated_width(n: usize) -> usize {
        2 * n + 1
    }
}

/// Selects the arithmetic used by [`BandState::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Kernel {
    /// Full 4x4 products with each block.
    Dense,
    /// Uses that every block has exactly one non-zero column.
    #[default]
    Column,
}

#[derive(Debug, Clone, Copy)]
struct Columns {
    pp: [C64; 4],
    qq: [C64; 4],
    pq: [C64; 4],
    qp: [C64; 4],
}

impl Columns {
    fn new(b: &CoinBlocks) -> Self {
        let col = |m: &Mat4, j: usize| [m[0][j], m[1][j], m[2][j], m[3][j]];
        Columns {
            pp: col(&b.pp, LL),
            qq: col(&b.qq, RR),
            pq: col(&b.pq, LR),
            qp: col(&b.qp, RL),
        }
    }
}

/// Amplitude field of the doubled walker on the band.
#[derive(Debug, Clone)]
pub struct BandState {
    coin: Coin,
    blocks: CoinBlocks,
    columns: Columns,
    kernel: Kernel,
    stripe: Stripe,
    horizon: usize,
    n: usize,
    // Row r holds v = s + r; within a row, index u + horizon.
    cur: Vec<[C64; 4]>,
    next: Vec<[C64; 4]>,
}

impl BandState {
    fn empty(coin: &Coin, stripe: Stripe, horizon: usize) -> Self {
        let blocks = coin.blocks();
        let cells = stripe.width() * (2 * horizon + 1);
        BandState {
            coin: *coin,
            columns: Columns::new(&blocks),
            blocks,
            kernel: Kernel::default(),
            stripe,
            horizon,
            n: 0,
            cur: vec![[ZERO; 4]; cells],
            next: vec![[ZERO; 4]; cells],
        }
    }

    /// Starts from `(Hg) ⊗ conj(Hg)` at the origin.
    pub fn init_product(coin: &Coin, g: [C64; 2], stripe: Stripe, horizon: usize) -> Result<Self> {
        let norm = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt();
        if !((norm - 1.0).abs() <= SPINOR_NORM_TOL) {
            return Err(Error::NonUnitSpinor { norm });
        }
        let h = coin.apply(g);
        let mut state = Self::empty(coin, stripe, horizon);
        let idx = state.index(0, 0);
        state.cur[idx] = spinor_tensor_conj(h, h);
        Ok(state)
    }

    /// Places one 4-vector per transverse offset at `u = 0`. `data[i]` belongs
    /// to `v = t - i`.
    pub fn init_band_vector(coin: &Coin, data: &[[C64; 4]], stripe: Stripe, horizon: usize) -> Result<Self> {
        if data.len() != stripe.width() {
            return Err(Error::BandLengthMismatch {
                expected: stripe.width(),
                got: data.len(),
            });
        }
        let mut state = Self::empty(coin, stripe, horizon);
        for (cell, v) in data.iter().zip(stripe.offsets_descending()) {
            let idx = state.index(0, v);
            state.cur[idx] = *cell;
        }
        Ok(state)
    }

    /// Same as [`init_band_vector`](Self::init_band_vector) from a flat
    /// `4M` vector in block order.
    pub fn init_flat_vector(coin: &Coin, data: &[C64], stripe: Stripe, horizon: usize) -> Result<Self> {
        if data.len() != 4 * stripe.width() {
            return Err(Error::BandLengthMismatch {
                expected: 4 * stripe.width(),
                got: data.len(),
            });
        }
        let cells: Vec<[C64; 4]> = data.chunks_exact(4).map(|q| [q[0], q[1], q[2], q[3]]).collect();
        Self::init_band_vector(coin, &cells, stripe, horizon)
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn coin(&self) -> &Coin {
        &self.coin
    }

    pub fn blocks(&self) -> &CoinBlocks {
        &self.blocks
    }

    pub fn stripe(&self) -> Stripe {
        self.stripe
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn time(&self) -> usize {
        self.n
    }

    fn row_len(&self) -> usize {
        2 * self.horizon + 1
    }

    fn index(&self, u: i64, v: i64) -> usize {
        let row = (v - self.stripe.s) as usize;
        row * self.row_len() + (u + self.horizon as i64) as usize
    }

    /// Amplitude at `(u, v)`, zero outside the band or the horizon.
    pub fn amplitude(&self, u: i64, v: i64) -> [C64; 4] {
        if !self.stripe.contains(v) || u.unsigned_abs() as usize > self.horizon {
            return [ZERO; 4];
        }
        self.cur[self.index(u, v)]
    }

    pub fn field_norm(&self) -> f64 {
        self.cur
            .iter()
            .flat_map(|cell| cell.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest component modulus on the rows `v = s` and `v = t`.
    pub fn boundary_max_abs(&self) -> f64 {
        let w = self.row_len();
        let last = self.stripe.width() - 1;
        [0, last]
            .iter()
            .flat_map(|&r| self.cur[r * w..(r + 1) * w].iter())
            .flat_map(|cell| cell.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn step(&mut self) -> Result<()> {
        if self.n >= self.horizon {
            return Err(Error::HorizonExhausted {
                n: self.n,
                horizon: self.horizon,
            });
        }
        let reach = (self.n + 1) as i64;
        let h = self.horizon as i64;
        let w = self.row_len();
        let width = self.stripe.width();
        let s = self.stripe.s;
        let lo = (h - reach) as usize;
        let hi = (h + reach) as usize;
        let cur = &self.cur;
        let kernel = self.kernel;
        let cols = self.columns;
        let blocks = &self.blocks;

        let update = |row: usize, pos: usize| -> [C64; 4] {
            let at = |r: usize, p: usize| cur[r * w + p];
            let right = if pos + 1 < w { Some(at(row, pos + 1)) } else { None };
            let left = if pos > 0 { Some(at(row, pos - 1)) } else { None };
            let below = if row > 0 { Some(at(row - 1, pos)) } else { None };
            let above = if row + 1 < width { Some(at(row + 1, pos)) } else { None };
            match kernel {
                Kernel::Column => {
                    let mut out = [ZERO; 4];
                    let mut add = |col: &[C64; 4], x: C64| {
                        if x != ZERO {
                            for (o, cj) in out.iter_mut().zip(col) {
                                *o += cj * x;
                            }
                        }
                    };
                    if let Some(cell) = right {
                        add(&cols.pp, cell[LL]);
                    }
                    if let Some(cell) = left {
                        add(&cols.qq, cell[RR]);
                    }
                    if let Some(cell) = below {
                        add(&cols.pq, cell[LR]);
                    }
                    if let Some(cell) = above {
                        add(&cols.qp, cell[RL]);
                    }
                    out
                }
                Kernel::Dense => {
                    let mut out = [ZERO; 4];
                    for (m, cell) in [
                        (&blocks.pp, right),
                        (&blocks.qq, left),
                        (&blocks.pq, below),
                        (&blocks.qp, above),
                    ] {
                        if let Some(cell) = cell {
                            let y = mat4_apply(m, &cell);
                            for (o, yj) in out.iter_mut().zip(y) {
                                *o += yj;
                            }
                        }
                    }
                    out
                }
            }
        };

        let active_rows: Vec<usize> = (0..width).filter(|&r| (s + r as i64).abs() <= reach).collect();
        let active_cells = active_rows.len() * (hi - lo + 1);
        let rows: Vec<(usize, &mut [[C64; 4]])> = self
            .next
            .chunks_mut(w)
            .enumerate()
            .filter(|(r, _)| active_rows.contains(r))
            .collect();
        if active_cells < PAR_CHUNK {
            for (row, line) in rows {
                for (pos, out) in line.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    *out = update(row, pos);
                }
            }
        } else {
            rows.into_par_iter().for_each(|(row, line)| {
                line[lo..=hi]
                    .par_chunks_mut(PAR_CHUNK)
                    .enumerate()
                    .for_each(|(chunk, cells)| {
                        let base = lo + chunk * PAR_CHUNK;
                        for (i, out) in cells.iter_mut().enumerate() {
                            *out = update(row, base + i);
                        }
                    });
            });
        }
        // Rows outside the light cone stay zero in both buffers.
        std::mem::swap(&mut self.cur, &mut self.next);
        self.n += 1;
        Ok(())
    }

    pub fn evolve(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// `LL + RR` components on the `v = 0` row, for `x` in `-n..=n`.
    pub fn measure(&self) -> ComplexMeasure {
        let n = self.n as i64;
        let values = (-n..=n)
            .map(|u| {
                let cell = self.amplitude(u, 0);
                cell[LL] + cell[RR]
            })
            .collect();
        ComplexMeasure {
            n: self.n,
            stripe: Some(self.stripe),
            offset: -n,
            values,
        }
    }

    /// `LL + RR` components over the whole band.
    pub fn band_field(&self) -> BandField {
        let n = self.n as i64;
        let rows = self
            .stripe
            .offsets_descending()
            .map(|v| {
                let values = (-n..=n)
                    .map(|u| {
                        let cell = self.amplitude(u, v);
                        cell[LL] + cell[RR]
                    })
                    .collect();
                (v, values)
            })
            .collect();
        BandField {
            n: self.n,
            stripe: self.stripe,
            rows,
        }
    }
}

/// Complex measure on the integers, stored densely from `offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMeasure {
    pub n: usize,
    /// `None` for measures coming from the reference walks.
    pub stripe: Option<Stripe>,
    pub offset: i64,
    pub values: Vec<C64>,
}

impl ComplexMeasure {
    pub fn from_real(n: usize, offset: i64, values: &[f64]) -> Self {
        ComplexMeasure {
            n,
            stripe: None,
            offset,
            values: values.iter().map(|&x| c(x, 0.0)).collect(),
        }
    }

    /// Value at `x`, zero outside the stored range.
    pub fn get(&self, x: i64) -> C64 {
        let i = x - self.offset;
        if i < 0 || i as usize >= self.values.len() {
            ZERO
        } else {
            self.values[i as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &z)| (self.offset + i as i64, z))
    }

    pub fn min_x(&self) -> i64 {
        self.offset
    }

    pub fn max_x(&self) -> i64 {
        self.offset + self.values.len() as i64 - 1
    }

    pub fn total(&self) -> C64 {
        self.values.iter().sum()
    }

    pub fn max_imag_abs(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }

    pub fn max_real_abs(&self) -> f64 {
        self.values.iter().map(|z| z.re.abs()).fold(0.0, f64::max)
    }

    /// Sum of `Re μ(x)` over `lo..=hi`.
    pub fn real_mass(&self, lo: i64, hi: i64) -> f64 {
        (lo.max(self.min_x())..=hi.min(self.max_x()))
            .map(|x| self.get(x).re)
            .sum()
    }

    /// `Σ μ(x) e^{ikx}`.
    pub fn fourier(&self, k: f64) -> C64 {
        self.iter().map(|(x, z)| z * C64::from_polar(1.0, k * x as f64)).sum()
    }

    /// Plot columns `(x / n, n · Re μ(x))`; `n = 0` maps to `(x, Re μ(x))`.
    pub fn normalized_profile(&self) -> Vec<(f64, f64)> {
        let scale = self.n.max(1) as f64;
        self.iter().map(|(x, z)| (x as f64 / scale, scale * z.re)).collect()
    }
}

/// `LL + RR` components over the whole band, one row per transverse offset.
#[derive(Debug, Clone)]
pub struct BandField {
    pub n: usize,
    pub stripe: Stripe,
    /// `(v, values)` in order `t, ..., s`; `values[i]` sits at `u = i - n`.
    pub rows: Vec<(i64, Vec<C64>)>,
}

impl BandField {
    /// Value at the position pair `(x, y)`; zero off the band.
    pub fn get(&self, x: i64, y: i64) -> C64 {
        if (x + y).rem_euclid(2) != 0 {
            return ZERO;
        }
        let u = (x + y) / 2;
        let v = (y - x) / 2;
        if !self.stripe.contains(v) {
            return ZERO;
        }
        let row = &self.rows[(self.stripe.t() - v) as usize].1;
        let i = u + self.n as i64;
        if i < 0 || i as usize >= row.len() {
            ZERO
        } else {
            row[i as usize]
        }
    }

    /// `(x, y, value)` triples over the stored cells.
    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, C64)> + '_ {
        let n = self.n as i64;
        self.rows.iter().flat_map(move |(v, values)| {
            values.iter().enumerate().map(move |(i, &z)| {
                let u = i as i64 - n;
                (u - v, u + v, z)
            })
        })
    }

    pub fn diagonal(&self) -> ComplexMeasure {
        let n = self.n as i64;
        ComplexMeasure {
            n: self.n,
            stripe: Some(self.stripe),
            offset: -n,
            values: (-n..=n).map(|x| self.get(x, x)).collect(),
        }
    }

    /// Largest modulus on the rows `v = s` and `v = t`.
    pub fn boundary_max_abs(&self) -> f64 {
        let first = self.rows.first().map(|r| &r.1);
        let last = self.rows.last().map(|r| &r.1);
        first
            .into_iter()
            .chain(last)
            .flat_map(|r| r.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Anything that advances one step at a time and exposes a measure.
pub trait Walk {
    fn step(&mut self) -> Result<()>;
    fn time(&self) -> usize;
    fn measure(&self) -> ComplexMeasure;
}

impl Walk for BandState {
    fn step(&mut self) -> Result<()> {
        BandState::step(self)
    }

    fn time(&self) -> usize {
        self.n
    }

    fn measure(&self) -> ComplexMeasure {
        BandState::measure(self)
    }
}

/// The unitary one-dimensional walk `ψ'(x) = P'ψ(x+1) + Q'ψ(x-1)`.
#[derive(Debug, Clone)]
pub struct Qw1d {
    p_prime: [[C64; 2]; 2],
    q_prime: [[C64; 2]; 2],
    n: usize,
    horizon: usize,
    psi: Vec<[C64; 2]>,
    next: Vec<[C64; 2]>,
}

impl Qw1d {
    pub fn new(coin: &Coin, phi0: [C64; 2], horizon: usize) -> Result<Self> {
        let norm = (phi0[0].norm_sqr() + phi0[1].norm_sqr()).sqrt();
        if !((norm - 1.0).abs() <= SPINOR_NORM_TOL) {
            return Err(Error::NonUnitSpinor { norm });
        }
        let b = coin.blocks();
        let mut psi = vec![[ZERO; 2]; 2 * horizon + 3];
        psi[horizon + 1] = phi0;
        Ok(Qw1d {
            p_prime: b.p_prime,
            q_prime: b.q_prime,
            n: 0,
            horizon,
            next: psi.clone(),
            psi,
        })
    }

    pub fn amplitude(&self, x: i64) -> [C64; 2] {
        let i = x + self.horizon as i64 + 1;
        if i < 0 || i as usize >= self.psi.len() {
            [ZERO; 2]
        } else {
            self.psi[i as usize]
        }
    }
}

fn apply2(m: &[[C64; 2]; 2], v: [C64; 2]) -> [C64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

impl Walk for Qw1d {
    fn step(&mut self) -> Result<()> {
        if self.n >= self.horizon {
            return Err(Error::HorizonExhausted {
                n: self.n,
                horizon: self.horizon,
            });
        }
        let reach = self.n + 1;
        let center = self.horizon + 1;
        for i in center - reach..=center + reach {
            let a = apply2(&self.p_prime, self.psi[i + 1]);
            let b = apply2(&self.q_prime, self.psi[i - 1]);
            self.next[i] = [a[0] + b[0], a[1] + b[1]];
        }
        std::mem::swap(&mut self.psi, &mut self.next);
        self.n += 1;
        Ok(())
    }

    fn time(&self) -> usize {
        self.n
    }

    fn measure(&self) -> ComplexMeasure {
        let n = self.n as i64;
        let values: Vec<f64> = (-n..=n)
            .map(|x| {
                let a = self.amplitude(x);
                a[0].norm_sqr() + a[1].norm_sqr()
            })
            .collect();
        ComplexMeasure::from_real(self.n, -n, &values)
    }
}

/// The correlated random walk obtained from the fully cut band:
/// `p'(x) = [[|a|², 0], [|c|², 0]] p(x+1) + [[0, |b|²], [0, |d|²]] p(x-1)`.
#[derive(Debug, Clone)]
pub struct Oqrw {
    left: [f64; 2],
    right: [f64; 2],
    n: usize,
    horizon: usize,
    p: Vec<[f64; 2]>,
    next: Vec<[f64; 2]>,
}

impl Oqrw {
    /// Starts from `p(0) = (|(Hg)_L|², |(Hg)_R|²)`.
    pub fn new(coin: &Coin, g: [C64; 2], horizon: usize) -> Result<Self> {
        let norm = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt();
        if !((norm - 1.0).abs() <= SPINOR_NORM_TOL) {
            return Err(Error::NonUnitSpinor { norm });
        }
        let h = coin.apply(g);
        let mut p = vec![[0.0; 2]; 2 * horizon + 3];
        p[horizon + 1] = [h[0].norm_sqr(), h[1].norm_sqr()];
        Ok(Oqrw {
            left: [coin.a().norm_sqr(), coin.c().norm_sqr()],
            right: [coin.b().norm_sqr(), coin.d().norm_sqr()],
            n: 0,
            horizon,
            next: p.clone(),
            p,
        })
    }

    /// The two recursion matrices `(from x+1, from x-1)`.
    pub fn recursion_matrices(&self) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
        (
            [[self.left[0], 0.0], [self.left[1], 0.0]],
            [[0.0, self.right[0]], [0.0, self.right[1]]],
        )
    }
}

impl Walk for Oqrw {
    fn step(&mut self) -> Result<()> {
        if self.n >= self.horizon {
            return Err(Error::HorizonExhausted {
                n: self.n,
                horizon: self.horizon,
            });
        }
        let reach = self.n + 1;
        let center = self.horizon + 1;
        for i in center - reach..=center + reach {
            let from_right = self.p[i + 1][0];
            let from_left = self.p[i - 1][1];
            self.next[i] = [
                self.left[0] * from_right + self.right[0] * from_left,
                self.left[1] * from_right + self.right[1] * from_left,
            ];
        }
        std::mem::swap(&mut self.p, &mut self.next);
        self.n += 1;
        Ok(())
    }

    fn time(&self) -> usize {
        self.n
    }

    fn measure(&self) -> ComplexMeasure {
        let n = self.n as i64;
        let center = (self.horizon + 1) as i64;
        let values: Vec<f64> = (-n..=n)
            .map(|x| {
                let q = self.p[(center + x) as usize];
                q[0] + q[1]
            })
            .collect();
        ComplexMeasure::from_real(self.n, -n, &values)
    }
}

/// Distribution of the unitary walk after `n` steps from `phi0`.
pub fn qw1d_reference(coin: &Coin, phi0: [C64; 2], n: usize) -> Result<ComplexMeasure> {
    let mut walk = Qw1d::new(coin, phi0, n)?;
    for _ in 0..n {
        walk.step()?;
    }
    Ok(walk.measure())
}

/// Distribution of the correlated random walk after `n` steps.
pub fn oqrw_reference(coin: &Coin, g: [C64; 2], n: usize) -> Result<ComplexMeasure> {
    let mut walk = Oqrw::new(coin, g, n)?;
    for _ in 0..n {
        walk.step()?;
    }
    Ok(walk.measure())
}
