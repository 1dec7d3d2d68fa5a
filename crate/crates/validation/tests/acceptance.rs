//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::process::ExitCode;
use std::time::Duration;

use stripewalk_core::characteristics::{
    decay_exponent, n_crit, peak_position, tail_exponent, Location, RunSeries, SeriesOptions, DEFAULT_NCRIT_TOL,
};
use stripewalk_core::limits::{
    full_cdf_distance, limit_coefficients, mode_masses, oqrw_variance, scaled_cdf_distance, LimitProfile,
    DEFAULT_WINDOW,
};
use stripewalk_core::linalg::{c, re};
use stripewalk_core::poly::multiset_distance;
use stripewalk_core::spectral::{
    build_w, characteristic_function, hadamard_reduced_eigenvectors, perturbed_projection_check, polynomial_residuals,
    product_band_vector, KatoReduction,
};
use stripewalk_core::{BandState, Coin, ComplexMeasure, Oqrw, Qw1d, Stripe, Walk, C64};
use stripewalk_validation::{run, Criterion};

fn g10() -> [C64; 2] {
    [re(1.0), re(0.0)]
}

fn gdiag() -> [C64; 2] {
    [re(FRAC_1_SQRT_2), re(FRAC_1_SQRT_2)]
}

fn pointwise(a: &ComplexMeasure, b: &ComplexMeasure) -> f64 {
    let lo = a.min_x().min(b.min_x());
    let hi = a.max_x().max(b.max_x());
    (lo..=hi).map(|x| (a.get(x) - b.get(x)).norm()).fold(0.0, f64::max)
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn unitary_oracle() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let n_max = 50;
    let stripe = Stripe::centered(2 * n_max + 1).map_err(e)?;
    let mut worst: f64 = 0.0;
    for g in [g10(), gdiag()] {
        let mut band = BandState::init_product(&coin, g, stripe, n_max).map_err(e)?;
        let mut line = Qw1d::new(&coin, g, n_max).map_err(e)?;
        for _ in 0..=n_max {
            worst = worst.max(pointwise(&band.measure(), &line.measure()));
            if band.time() < n_max {
                band.step().map_err(e)?;
                line.step().map_err(e)?;
            }
        }
    }
    Ok((
        worst <= 1e-12,
        format!("max |mu_band - mu_1d| = {worst:.2e} over n <= {n_max}"),
    ))
}

fn classical_oracle() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let n_max = 500;
    let stripe = Stripe::centered(1).map_err(e)?;
    let (mut worst, mut imag, mut neg, mut drift) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for g in [g10(), gdiag()] {
        let mut band = BandState::init_product(&coin, g, stripe, n_max).map_err(e)?;
        let mut walk = Oqrw::new(&coin, g, n_max).map_err(e)?;
        for _ in 0..=n_max {
            let mu = band.measure();
            worst = worst.max(pointwise(&mu, &walk.measure()));
            imag = imag.max(mu.max_imag_abs());
            neg = neg.min(mu.min_real());
            drift = drift.max((mu.total() - re(1.0)).norm());
            if band.time() < n_max {
                band.step().map_err(e)?;
                walk.step().map_err(e)?;
            }
        }
    }
    let pass = worst <= 1e-12 && imag <= 1e-12 && neg >= 0.0 && drift <= 1e-12;
    Ok((
        pass,
        format!("max diff {worst:.2e}, max |Im| {imag:.2e}, min Re {neg:.2e}, sum drift {drift:.2e}"),
    ))
}

fn conservation() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let n_max = 2000;
    let mut drift: f64 = 0.0;
    for m in [1, 2, 3, 5, 10] {
        let stripe = Stripe::centered(m).map_err(e)?;
        for g in [g10(), gdiag()] {
            let mut band = BandState::init_product(&coin, g, stripe, n_max).map_err(e)?;
            loop {
                drift = drift.max((band.measure().total() - re(1.0)).norm());
                if band.time() == n_max {
                    break;
                }
                band.step().map_err(e)?;
            }
        }
    }
    Ok((drift <= 1e-10, format!("max |sum mu - 1| = {drift:.2e}")))
}

const W0_WIDTH_2: [[f64; 8]; 8] = [
    [1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, -1.0, 0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
];

const PROJECTION_WIDTH_2_TIMES_12: [[f64; 8]; 8] = [
    [7.0, 0.0, 2.0, 5.0, 1.0, 2.0, 0.0, -1.0],
    [0.0; 8],
    [2.0, 0.0, 4.0, -2.0, 2.0, 4.0, 0.0, -2.0],
    [5.0, 0.0, -2.0, 7.0, -1.0, -2.0, 0.0, 1.0],
    [1.0, 0.0, 2.0, -1.0, 7.0, 2.0, 0.0, 5.0],
    [2.0, 0.0, 4.0, -2.0, 2.0, 4.0, 0.0, -2.0],
    [0.0; 8],
    [-1.0, 0.0, -2.0, 1.0, 5.0, -2.0, 0.0, 7.0],
];

fn width_two_algebra() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let stripe = Stripe::new(-1, 0).map_err(e)?;
    let w = build_w(&coin, stripe, 0.0);
    let mut matrix_diff: f64 = 0.0;
    for (i, row) in W0_WIDTH_2.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            matrix_diff = matrix_diff.max((w.matrix()[(i, j)] - re(0.5 * v)).norm());
        }
    }
    let values = w.eig().map_err(e)?.values;
    let listed = [
        re(0.0),
        re(0.0),
        re(1.0),
        re(1.0),
        re(1.0),
        re(-0.5),
        c(-0.25, 0.25),
        c(-0.25, -0.25),
    ];
    let r7 = 7f64.sqrt() / 4.0;
    let factored = [
        re(0.0),
        re(0.0),
        re(1.0),
        re(1.0),
        re(1.0),
        re(-0.5),
        c(-0.25, r7),
        c(-0.25, -r7),
    ];
    let listed_dist = multiset_distance(&values, &listed).unwrap_or(f64::INFINITY);
    let factored_dist = multiset_distance(&values, &factored).unwrap_or(f64::INFINITY);

    let poly = polynomial_residuals(&coin, stripe);
    let kr = KatoReduction::compute(&coin, stripe).map_err(e)?;
    let mut proj_diff: f64 = 0.0;
    for (i, row) in PROJECTION_WIDTH_2_TIMES_12.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            proj_diff = proj_diff.max((kr.projection[(i, j)] - re(v / 12.0)).norm());
        }
    }
    let s = 1.0 / 3f64.sqrt();
    let reduced_want = [re(0.0), c(0.0, s), c(0.0, -s)];
    let reduced_dist = multiset_distance(&kr.values, &reduced_want).unwrap_or(f64::INFINITY);
    let min_gap = (0..3)
        .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
        .map(|(i, j)| (kr.values[i] - kr.values[j]).norm())
        .fold(f64::INFINITY, f64::min);
    let skew = kr.skew_hermitian_residual();

    let checks = [
        matrix_diff <= 1e-15,
        listed_dist <= 1e-10,
        poly.minimal < 1e-12,
        poly.without_last_factor >= 0.1,
        proj_diff <= 1e-12,
        skew <= 1e-12,
        reduced_dist <= 1e-12,
        min_gap > 0.1,
    ];
    Ok((
        checks.iter().all(|&b| b),
        format!(
            "matrix diff {matrix_diff:.1e}; eigenvalues vs listed set {listed_dist:.3e} \
             (vs factored set with (-1±i√7)/4: {factored_dist:.1e}); minimal poly {:.1e}, witness {:.3}; \
             projection diff {proj_diff:.1e}; skew residual {skew:.1e}; reduced eigenvalues {reduced_dist:.1e}, gap {min_gap:.3}",
            poly.minimal, poly.without_last_factor
        ),
    ))
}

fn perturbation() -> Result<(bool, String), String> {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut last_residuals = [f64::INFINITY; 3];
    for delta in [1e-1, 1e-2, 1e-3] {
        let full = perturbed_projection_check(delta).map_err(e)?;
        let half = perturbed_projection_check(delta / 2.0).map_err(e)?;
        let ratios = [0, 1, 2].map(|j| full.eigenvalue_errors[j] / half.eigenvalue_errors[j]);
        pass &= ratios.iter().all(|&r| r >= 6.0);
        pass &= (0..3).all(|j| full.projection_residuals[j] < last_residuals[j]);
        if delta == 1e-2 {
            pass &= full.projection_residuals.iter().all(|&r| r < 5e-2);
        }
        last_residuals = full.projection_residuals;
        parts.push(format!(
            "δ={delta:.0e}: errors [{:.1e}, {:.1e}, {:.1e}] halving ratios [{:.1}, {:.1}, {:.1}] projection residuals [{:.1e}, {:.1e}, {:.1e}]",
            full.eigenvalue_errors[0],
            full.eigenvalue_errors[1],
            full.eigenvalue_errors[2],
            ratios[0],
            ratios[1],
            ratios[2],
            full.projection_residuals[0],
            full.projection_residuals[1],
            full.projection_residuals[2],
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn three_modes() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let n = 2000;
    let g = gdiag();
    let mut band = BandState::init_product(&coin, g, Stripe::new(-1, 0).map_err(e)?, n).map_err(e)?;
    band.evolve(n).map_err(e)?;
    let mu = band.measure();
    let masses = mode_masses(&mu, DEFAULT_WINDOW).map_err(e)?;
    let r3 = 3f64.sqrt();
    let want = [(3.0 + r3) / 12.0, 0.5, (3.0 - r3) / 12.0];
    let coeffs = limit_coefficients(g);
    let mass_err = [masses.left - want[0], masses.center - want[1], masses.right - want[2]]
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()));
    let stated = LimitProfile::stated(g);
    let derived = LimitProfile::from_expansion(g);
    let dist = |p: &LimitProfile| scaled_cdf_distance(&mu, p, DEFAULT_WINDOW).map(|c| c.distance);
    let stated_d = [
        dist(&stated[0]).map_err(e)?,
        dist(&stated[1]).map_err(e)?,
        dist(&stated[2]).map_err(e)?,
    ];
    let derived_side = [dist(&derived[0]).map_err(e)?, dist(&derived[2]).map_err(e)?];
    let pass = mass_err <= 0.02 && stated_d[1] < 0.05 && stated_d[0] < 0.07 && stated_d[2] < 0.07;
    Ok((
        pass,
        format!(
            "masses ({:.4}, {:.4}, {:.4}) vs ({:.4}, 0.5, {:.4}), max err {mass_err:.4}; \
             center vs N(0,1/2) {:.4}; sides vs N(0,4/9) {:.4} / {:.4}; \
             sides vs N(0,1/9) from the eigenvalue expansion {:.4} / {:.4}",
            masses.left,
            masses.center,
            masses.right,
            coeffs.minus.re,
            coeffs.plus.re,
            stated_d[1],
            stated_d[0],
            stated_d[2],
            derived_side[0],
            derived_side[1]
        ),
    ))
}

fn oqrw_clt() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let n = 2000;
    let profile = LimitProfile::centered(oqrw_variance(&coin).map_err(e)?);
    let mut worst: f64 = 0.0;
    for g in [g10(), gdiag()] {
        let mut band = BandState::init_product(&coin, g, Stripe::centered(1).map_err(e)?, n).map_err(e)?;
        band.evolve(n).map_err(e)?;
        worst = worst.max(full_cdf_distance(&band.measure(), &profile).map_err(e)?.distance);
    }
    Ok((worst < 0.05, format!("Kolmogorov distance to N(0,1): {worst:.4}")))
}

fn n_crit_rule() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let n_max = 200;
    let mut got = Vec::new();
    let mut pass = true;
    for m in 1..=20usize {
        let value = n_crit(&coin, g10(), Stripe::centered(m).map_err(e)?, n_max, DEFAULT_NCRIT_TOL).map_err(e)?;
        let ok = match m {
            1 => value == n_max,
            _ if m % 2 == 0 => value.abs_diff(3 * m) <= 2,
            _ => value.abs_diff(2 * m) <= 2,
        };
        pass &= ok;
        got.push(format!("{m}:{value}{}", if ok { "" } else { "*" }));
    }
    Ok((pass, format!("n_crit (M:value, * = off rule) {}", got.join(" "))))
}

fn peak_positions() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let n = 2000;
    let mut band = BandState::init_product(&coin, g10(), Stripe::new(-1, 0).map_err(e)?, n).map_err(e)?;
    band.evolve(n).map_err(e)?;
    let band_peak = peak_position(&band.measure(), 0.3).map_err(e)?;
    let mut line = Qw1d::new(&coin, g10(), n).map_err(e)?;
    for _ in 0..n {
        line.step().map_err(e)?;
    }
    let line_peak = peak_position(&line.measure(), 0.3).map_err(e)?;
    let target = 1.0 / 3f64.sqrt();
    let pass = (band_peak - target).abs() < 0.01 && (0.68..=0.72).contains(&line_peak);
    Ok((
        pass,
        format!("M=2 peak {band_peak:.4} (1/√3 = {target:.4}); untruncated peak {line_peak:.4}"),
    ))
}

fn exponents() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let (lo, hi) = (1000, 2000);
    let options = SeriesOptions {
        detail_from: lo,
        ..SeriesOptions::default()
    };
    let band = RunSeries::band(&coin, g10(), Stripe::new(-1, 0).map_err(e)?, hi, options).map_err(e)?;
    let gamma = tail_exponent(&band, lo, hi).map_err(e)?.slope;
    let r_center = decay_exponent(&band, Location::Center, lo, hi).map_err(e)?.slope;
    let r_side = decay_exponent(&band, Location::Side, lo, hi).map_err(e)?.slope;
    let mut walk = Qw1d::new(&coin, g10(), hi).map_err(e)?;
    let line = RunSeries::record(&mut walk, hi, None, coin, "g=(1,0)", options).map_err(e)?;
    let line_gamma = tail_exponent(&line, lo, hi).map_err(e)?.slope;
    let line_side = decay_exponent(&line, Location::Side, lo, hi).map_err(e)?.slope;
    let pass = (gamma - 0.5).abs() <= 0.07
        && (r_center + 0.5).abs() <= 0.03
        && (r_side + 0.5).abs() <= 0.03
        && (line_gamma - 1.0 / 3.0).abs() <= 0.07
        && (line_side + 2.0 / 3.0).abs() <= 0.05;
    Ok((
        pass,
        format!(
            "M=2: gamma {gamma:.4}, r_center {r_center:.4}, r_side {r_side:.4}; untruncated: gamma {line_gamma:.4}, r_side {line_side:.4}"
        ),
    ))
}

fn spectral_consistency() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let mut worst: f64 = 0.0;
    for m in 1..=4usize {
        let stripe = Stripe::centered(m).map_err(e)?;
        for g in [g10(), gdiag(), [re(FRAC_1_SQRT_2), c(0.0, FRAC_1_SQRT_2)]] {
            let initial = product_band_vector(&coin, g, stripe);
            let mut band = BandState::init_product(&coin, g, stripe, 60).map_err(e)?;
            for n in 0..=60u32 {
                if n % 6 == 0 || n == 1 {
                    let mu = band.measure();
                    for j in 0..64 {
                        let k = 2.0 * PI * j as f64 / 64.0;
                        let from_matrix = characteristic_function(&coin, stripe, &initial, n, k).map_err(e)?;
                        worst = worst.max((from_matrix - mu.fourier(k)).norm());
                    }
                }
                if n < 60 {
                    band.step().map_err(e)?;
                }
            }
        }
    }
    Ok((
        worst <= 1e-9,
        format!("max |W^n(k) overlap - Fourier sum| = {worst:.2e}"),
    ))
}

fn eigenvector_runs() -> Result<(bool, String), String> {
    let coin = Coin::hadamard();
    let stripe = Stripe::new(-1, 0).map_err(e)?;
    let n = 200;
    let vectors = hadamard_reduced_eigenvectors();
    let speed = 1.0 / 3f64.sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, idx, sign) in [("v2", 1usize, 1.0), ("v3", 2, -1.0)] {
        let flat: Vec<C64> = vectors[idx].iter().map(|&x| re(x)).collect();
        let mut band = BandState::init_flat_vector(&coin, &flat, stripe, n).map_err(e)?;
        band.evolve(n).map_err(e)?;
        let mu = band.measure();
        let m = mode_masses(&mu, DEFAULT_WINDOW).map_err(e)?;
        let (moving, win, others) = if sign > 0.0 {
            (m.right, m.windows[2], [m.center, m.left])
        } else {
            (m.left, m.windows[0], [m.center, m.right])
        };
        let first_moment: f64 = (win.lo..=win.hi).map(|x| x as f64 * mu.get(x).re).sum::<f64>() / moving;
        let observed = first_moment / n as f64;
        let ok =
            moving > 0.0 && others.iter().all(|o| o.abs() < 1e-2) && (observed - sign * speed).abs() <= 0.02 * speed;
        pass &= ok;
        parts.push(format!(
            "{label}: moving mass {moving:.4} at speed {observed:.4}, other regions {:.1e} / {:.1e}",
            others[0], others[1]
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "unitary-limit oracle",
            budget: Duration::from_secs(1),
            check: unitary_oracle,
        },
        Criterion {
            id: 2,
            name: "classical-limit oracle",
            budget: Duration::from_secs(1),
            check: classical_oracle,
        },
        Criterion {
            id: 3,
            name: "measure-sum conservation",
            budget: Duration::from_secs(60),
            check: conservation,
        },
        Criterion {
            id: 4,
            name: "width-2 operator algebra",
            budget: Duration::from_secs(1),
            check: width_two_algebra,
        },
        Criterion {
            id: 5,
            name: "perturbation expansions",
            budget: Duration::from_secs(5),
            check: perturbation,
        },
        Criterion {
            id: 6,
            name: "three-mode limit",
            budget: Duration::from_secs(120),
            check: three_modes,
        },
        Criterion {
            id: 7,
            name: "classical central limit",
            budget: Duration::from_secs(5),
            check: oqrw_clt,
        },
        Criterion {
            id: 8,
            name: "n_crit rule",
            budget: Duration::from_secs(60),
            check: n_crit_rule,
        },
        Criterion {
            id: 9,
            name: "peak position",
            budget: Duration::from_secs(120),
            check: peak_positions,
        },
        Criterion {
            id: 10,
            name: "exponent fits",
            budget: Duration::from_secs(600),
            check: exponents,
        },
        Criterion {
            id: 11,
            name: "spectral-simulation consistency",
            budget: Duration::from_secs(10),
            check: spectral_consistency,
        },
        Criterion {
            id: 12,
            name: "eigenvector runs",
            budget: Duration::from_secs(5),
            check: eigenvector_runs,
        },
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    run(&criteria, &args)
}
