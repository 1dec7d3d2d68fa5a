//! Limit laws of the walks and finite-time diagnostics against them.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::coin::Coin;
use crate::error::{Error, Result};
use crate::linalg::{re, C64};
use crate::walker::ComplexMeasure;

/// Default half-width coefficient `w` of the windows `c·n ± w√n`.
pub const DEFAULT_WINDOW: f64 = 4.0;

/// Speed of the two ballistic modes of the width-2 Hadamard band.
pub fn ballistic_speed() -> f64 {
    1.0 / 3f64.sqrt()
}

/// Weights of the left-moving, central and right-moving modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCoefficients {
    pub minus: C64,
    pub zero: f64,
    pub plus: C64,
}

impl LimitCoefficients {
    pub fn total(&self) -> C64 {
        self.minus + self.plus + self.zero
    }

    /// Both side weights real to within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.minus.im.abs() <= tol && self.plus.im.abs() <= tol
    }
}

/// Mode weights for the start `(Hg) ⊗ conj(Hg)` on the width-2 Hadamard band.
pub fn limit_coefficients(g: [C64; 2]) -> LimitCoefficients {
    let r3 = 3f64.sqrt();
    let g1sq = g[0].norm_sqr();
    let g2sq = g[1].norm_sqr();
    let cross = g[0].conj() * g[1];
    let side =
        |sign: f64| (re((2.0 - sign * r3) * g1sq) + (1.0 - sign * r3) * cross + g2sq) / (2.0 * (3.0 - sign * r3));
    LimitCoefficients {
        minus: side(-1.0),
        zero: 0.5,
        plus: side(1.0),
    }
}

/// Weak-limit density of `x/n` for the Hadamard walk from a symmetric start.
pub fn weak_limit_density(x: f64) -> f64 {
    if x.abs() >= FRAC_1_SQRT_2 {
        return 0.0;
    }
    1.0 / (PI * (1.0 - x * x) * (1.0 - 2.0 * x * x).sqrt())
}

/// Distribution function of [`weak_limit_density`].
pub fn weak_limit_cdf(x: f64) -> f64 {
    if x <= -FRAC_1_SQRT_2 {
        0.0
    } else if x >= FRAC_1_SQRT_2 {
        1.0
    } else {
        0.5 + (x / (1.0 - 2.0 * x * x).sqrt()).atan() / PI
    }
}

/// Weak-limit density for a general coin, supported on `|x| < |a|`.
pub fn weak_limit_density_for(coin: &Coin, x: f64) -> f64 {
    let a = coin.a().norm();
    let b = coin.b().norm();
    if x.abs() >= a {
        return 0.0;
    }
    b / (PI * (1.0 - x * x) * (a * a - x * x).sqrt())
}

pub fn weak_limit_cdf_for(coin: &Coin, x: f64) -> f64 {
    let a = coin.a().norm();
    let b = coin.b().norm();
    if x <= -a {
        0.0
    } else if x >= a {
        1.0
    } else {
        0.5 + (b * x / (a * a - x * x).sqrt()).atan() / PI
    }
}

/// Start-dependent weak limit `(1 - λx)·K(x)` of the line walk from `φ0`,
/// returned as `λ`.
pub fn weak_limit_bias(coin: &Coin, phi0: [C64; 2]) -> f64 {
    let (a, b) = (coin.a(), coin.b());
    let (alpha, beta) = (phi0[0], phi0[1]);
    let cross = a * alpha * (b * beta).conj();
    alpha.norm_sqr() - beta.norm_sqr() + 2.0 * cross.re / a.norm_sqr()
}

/// Distribution function of `(1 - λx)·K(x)` for a general coin.
pub fn biased_weak_limit_cdf(coin: &Coin, lambda: f64, x: f64) -> f64 {
    let a = coin.a().norm();
    let b = coin.b().norm();
    if x <= -a {
        0.0
    } else if x >= a {
        1.0
    } else {
        weak_limit_cdf_for(coin, x) + lambda * ((a * a - x * x).sqrt() / b).atan() / PI
    }
}

/// Diffusion constant `|a|² / (1 - |a|²)` of the correlated random walk.
pub fn oqrw_variance(coin: &Coin) -> Result<f64> {
    let r = coin.a().norm_sqr();
    if r >= 1.0 - 1e-12 {
        return Err(Error::DegenerateCoin(format!(
            "|a|^2 = {r}: the correlated walk is ballistic"
        )));
    }
    Ok(r / (1.0 - r))
}

pub fn normal_cdf(x: f64, variance: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / (2.0 * variance).sqrt()))
}

/// `E[e^{ikY}]` for `Y ~ N(0, variance)`.
pub fn gaussian_characteristic(variance: f64, k: f64) -> f64 {
    (-0.5 * variance * k * k).exp()
}

/// Variance of the diffusive spread around a mode whose eigenvalue expands
/// as `1 + first·k + second·k² + O(k³)`.
pub fn diffusive_variance(first: C64, second: C64) -> f64 {
    -2.0 * (second - first * first / 2.0).re
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Left,
    Center,
    Right,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Left, Mode::Center, Mode::Right];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Left => "left",
            Mode::Center => "center",
            Mode::Right => "right",
        }
    }
}

/// One Gaussian mode: weight, drift speed and variance in `y = (x - speed·n)/√n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitProfile {
    pub mode: Mode,
    pub weight: f64,
    pub speed: f64,
    pub variance: f64,
}

impl LimitProfile {
    /// Modes with the published variances (`1/2` center, `4/9` sides).
    pub fn stated(g: [C64; 2]) -> [LimitProfile; 3] {
        Self::with_variances(g, 0.5, 4.0 / 9.0)
    }

    /// Modes with variances derived from the second-order eigenvalue
    /// expansions, which give `1/9` on the sides.
    pub fn from_expansion(g: [C64; 2]) -> [LimitProfile; 3] {
        let v = ballistic_speed();
        let center = diffusive_variance(C64::new(0.0, 0.0), re(-0.25));
        let side = diffusive_variance(C64::new(0.0, v), re(-2.0 / 9.0));
        Self::with_variances(g, center, side)
    }

    fn with_variances(g: [C64; 2], center: f64, side: f64) -> [LimitProfile; 3] {
        let c = limit_coefficients(g);
        let v = ballistic_speed();
        [
            LimitProfile {
                mode: Mode::Left,
                weight: c.minus.re,
                speed: -v,
                variance: side,
            },
            LimitProfile {
                mode: Mode::Center,
                weight: c.zero,
                speed: 0.0,
                variance: center,
            },
            LimitProfile {
                mode: Mode::Right,
                weight: c.plus.re,
                speed: v,
                variance: side,
            },
        ]
    }

    /// Single diffusive mode centered at the origin.
    pub fn centered(variance: f64) -> LimitProfile {
        LimitProfile {
            mode: Mode::Center,
            weight: 1.0,
            speed: 0.0,
            variance,
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        normal_cdf(y, self.variance)
    }
}

/// Integer window `[lo, hi]` around `center` of half-width `w√n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn around(center: f64, n: usize, w: f64) -> Window {
        let half = w * (n as f64).sqrt();
        Window {
            lo: (center - half).ceil() as i64,
            hi: (center + half).floor() as i64,
        }
    }

    pub fn for_mode(speed: f64, n: usize, w: f64) -> Window {
        Self::around(speed * n as f64, n, w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMasses {
    pub left: f64,
    pub center: f64,
    pub right: f64,
    pub windows: [Window; 3],
}

impl ModeMasses {
    pub fn total(&self) -> f64 {
        self.left + self.center + self.right
    }

    pub fn get(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Left => self.left,
            Mode::Center => self.center,
            Mode::Right => self.right,
        }
    }
}

/// The side windows `±n/√3 ± w√n` clear the central one iff `n > 12 w²`.
pub fn windows_disjoint(n: usize, w: f64) -> bool {
    n as f64 > 12.0 * w * w
}

/// `Σ Re μ` over the three mode windows at the measure's time.
pub fn mode_masses(measure: &ComplexMeasure, w: f64) -> Result<ModeMasses> {
    let n = measure.n;
    if n == 0 {
        let origin = Window { lo: 0, hi: 0 };
        return Ok(ModeMasses {
            left: 0.0,
            center: measure.real_mass(0, 0),
            right: 0.0,
            windows: [origin; 3],
        });
    }
    if !windows_disjoint(n, w) {
        return Err(Error::OverlappingWindows { n, w });
    }
    let v = ballistic_speed();
    let windows = [
        Window::for_mode(-v, n, w),
        Window::for_mode(0.0, n, w),
        Window::for_mode(v, n, w),
    ];
    let mass = |win: &Window| measure.real_mass(win.lo, win.hi);
    Ok(ModeMasses {
        left: mass(&windows[0]),
        center: mass(&windows[1]),
        right: mass(&windows[2]),
        windows,
    })
}

/// Result of comparing one window of a measure against a Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfComparison {
    pub mode: Mode,
    pub variance: f64,
    pub window: Window,
    pub window_mass: f64,
    /// Largest `|Im μ|` inside the window; not used in the distance.
    pub max_imag: f64,
    pub distance: f64,
}

/// Kolmogorov distance between a lattice distribution and a continuous CDF,
/// evaluated on both sides of every jump. `points` are `(position, mass)`
/// pairs sorted by position with masses summing to one.
pub fn kolmogorov_at_jumps(points: &[(f64, f64)], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut below = 0.0;
    let mut worst: f64 = 0.0;
    for &(y, mass) in points {
        let f = cdf(y);
        let above = below + mass;
        worst = worst.max((below - f).abs()).max((above - f).abs());
        below = above;
    }
    worst
}

/// Sup-distance between the window's normalized `Re μ` distribution in
/// `y = (x - speed·n)/√n` and the profile's Gaussian.
pub fn scaled_cdf_distance(measure: &ComplexMeasure, profile: &LimitProfile, w: f64) -> Result<CdfComparison> {
    let n = measure.n;
    if n == 0 {
        return Err(Error::EmptyWindow("no spread at n = 0".into()));
    }
    let window = Window::for_mode(profile.speed, n, w);
    comparison_over(measure, profile, window)
}

/// Same as [`scaled_cdf_distance`] over the whole support of the measure.
pub fn full_cdf_distance(measure: &ComplexMeasure, profile: &LimitProfile) -> Result<CdfComparison> {
    let window = Window {
        lo: measure.min_x(),
        hi: measure.max_x(),
    };
    if measure.n == 0 {
        return Err(Error::EmptyWindow("no spread at n = 0".into()));
    }
    comparison_over(measure, profile, window)
}

fn comparison_over(measure: &ComplexMeasure, profile: &LimitProfile, window: Window) -> Result<CdfComparison> {
    let n = measure.n as f64;
    let lo = window.lo.max(measure.min_x());
    let hi = window.hi.min(measure.max_x());
    if lo > hi {
        return Err(Error::EmptyWindow(format!("[{}, {}]", window.lo, window.hi)));
    }
    let mass = measure.real_mass(lo, hi);
    if !(mass > 0.0) {
        return Err(Error::EmptyWindow(format!("window [{lo}, {hi}] carries mass {mass}")));
    }
    let center = profile.speed * n;
    let scale = n.sqrt();
    let points: Vec<(f64, f64)> = (lo..=hi)
        .map(|x| ((x as f64 - center) / scale, measure.get(x).re / mass))
        .collect();
    let max_imag = (lo..=hi).map(|x| measure.get(x).im.abs()).fold(0.0, f64::max);
    Ok(CdfComparison {
        mode: profile.mode,
        variance: profile.variance,
        window,
        window_mass: mass,
        max_imag,
        distance: kolmogorov_at_jumps(&points, |y| profile.cdf(y)),
    })
}

/// Kolmogorov distance between the law of `x/n` and the Hadamard weak limit.
pub fn weak_limit_cdf_distance(measure: &ComplexMeasure) -> Result<f64> {
    weak_limit_cdf_distance_with(measure, weak_limit_cdf)
}

pub fn weak_limit_cdf_distance_with(measure: &ComplexMeasure, cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if measure.n == 0 {
        return Err(Error::EmptyWindow("no spread at n = 0".into()));
    }
    let total = measure.real_mass(measure.min_x(), measure.max_x());
    let n = measure.n as f64;
    let points: Vec<(f64, f64)> = measure.iter().map(|(x, z)| (x as f64 / n, z.re / total)).collect();
    Ok(kolmogorov_at_jumps(&points, cdf))
}
