//! One driver per subcommand. Each writes its files through [`OutputDir`]
//! and returns the checks it evaluated.

use std::f64::consts::PI;

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use stripewalk_core::characteristics::{
    characteristics_row, peak_position, CharacteristicsRow, RunSeries, SeriesOptions,
};
use stripewalk_core::limits::{
    biased_weak_limit_cdf, full_cdf_distance, limit_coefficients, mode_masses, oqrw_variance, scaled_cdf_distance,
    weak_limit_bias, weak_limit_cdf_distance_with, CdfComparison, LimitProfile,
};
use stripewalk_core::spectral::{
    build_w, characteristic_function, perturbed_projection_check, KatoReduction, PerturbedProjections,
};
use stripewalk_core::{BandState, Coin, ComplexMeasure, Oqrw, Qw1d, Stripe, Walk, C64};

use crate::config::{CoinSpec, RunConfig};
use crate::output::{fmt_f64, Checks, OutputDir};

/// Largest allowed `|Σμ_n - Σμ_0|` over a run.
pub const CONSERVATION_TOL: f64 = 1e-10;
/// Agreement required between the band and an oracle walk.
pub const ORACLE_TOL: f64 = 1e-12;
/// Slack for round-off in norm and modulus bounds.
pub const ROUNDOFF_TOL: f64 = 1e-12;
pub const MASS_TOL: f64 = 0.02;
pub const CENTER_CDF_TOL: f64 = 0.05;
pub const SIDE_CDF_TOL: f64 = 0.07;
pub const DIFFUSIVE_CDF_TOL: f64 = 0.05;
pub const WEAK_LIMIT_CDF_TOL: f64 = 0.08;
pub const NCRIT_RULE_TOL: usize = 2;

pub struct Outcome {
    pub checks: Checks,
    pub run: Value,
}

fn measure_rows(mu: &ComplexMeasure) -> impl Iterator<Item = Vec<String>> + '_ {
    mu.iter()
        .map(move |(x, z)| vec![mu.n.to_string(), x.to_string(), fmt_f64(z.re), fmt_f64(z.im)])
}

fn write_measure(out: &mut OutputDir, name: &str, mu: &ComplexMeasure) -> Result<()> {
    let mut csv = out.csv(name, &["n", "x", "re_mu", "im_mu"])?;
    for row in measure_rows(mu) {
        csv.row(&row)?;
    }
    csv.finish()
}

fn write_profile(out: &mut OutputDir, name: &str, mu: &ComplexMeasure) -> Result<()> {
    let mut csv = out.csv(name, &["xbar", "n_times_mu"])?;
    for (xbar, value) in mu.normalized_profile() {
        csv.row(&[fmt_f64(xbar), fmt_f64(value)])?;
    }
    csv.finish()
}

fn require_product(cfg: &RunConfig, command: &str) -> Result<[C64; 2]> {
    cfg.spinor()
        .ok_or_else(|| anyhow!("{command} needs a product start (g = ...), not a band vector"))
}

fn is_hadamard(cfg: &RunConfig) -> bool {
    matches!(cfg.coin, CoinSpec::Hadamard)
}

#[derive(Serialize)]
struct SnapshotSummary {
    n: usize,
    total: C64,
    min_real: f64,
    max_imag: f64,
    field_norm: f64,
    peak_position: Option<f64>,
}

pub fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let stripe = cfg.stripe()?;
    let mut state = cfg.initial_state(stripe, cfg.steps)?;
    let snapshots = cfg.snapshot_steps();
    let start_total = state.measure().total();
    let mut norm_trace = Vec::with_capacity(cfg.steps + 1);
    let (mut drift, mut max_imag, mut norm_growth) = (0.0f64, 0.0f64, 0.0f64);
    let mut summaries = Vec::new();
    loop {
        let n = state.time();
        let mu = state.measure();
        let norm = state.field_norm();
        if let Some(&last) = norm_trace.last() {
            norm_growth = norm_growth.max(norm - last);
        }
        norm_trace.push(norm);
        drift = drift.max((mu.total() - start_total).norm());
        max_imag = max_imag.max(mu.max_imag_abs());
        if snapshots.contains(&n) {
            write_measure(out, &format!("measure_n{n}.csv"), &mu)?;
            if n > 0 {
                write_profile(out, &format!("profile_n{n}.csv"), &mu)?;
            }
            if cfg.band_field {
                let field = state.band_field();
                let mut csv = out.csv(&format!("field_n{n}.csv"), &["n", "x", "y", "re", "im"])?;
                for (x, y, z) in field.entries() {
                    csv.row(&[
                        n.to_string(),
                        x.to_string(),
                        y.to_string(),
                        fmt_f64(z.re),
                        fmt_f64(z.im),
                    ])?;
                }
                csv.finish()?;
            }
            summaries.push(SnapshotSummary {
                n,
                total: mu.total(),
                min_real: mu.min_real(),
                max_imag: mu.max_imag_abs(),
                field_norm: norm,
                peak_position: if n > 0 {
                    peak_position(&mu, cfg.delta).ok()
                } else {
                    None
                },
            });
        }
        if n == cfg.steps {
            break;
        }
        state.step()?;
    }
    let mut checks = Checks::default();
    checks.at_most("sum_drift", drift, CONSERVATION_TOL);
    checks.at_most("norm_growth", norm_growth, ROUNDOFF_TOL);
    out.json("simulate.json", &json!({ "snapshots": summaries, "checks": checks.0 }))?;
    Ok(Outcome {
        run: json!({
            "width": stripe.width(),
            "stripe": [stripe.s(), stripe.t()],
            "max_abs_imag_mu": max_imag,
            "max_sum_drift": drift,
            "norm_trace": norm_trace,
        }),
        checks,
    })
}

fn sorted_eigenvalues(coin: &Coin, stripe: Stripe, k: f64) -> Result<Vec<C64>> {
    let mut values = build_w(coin, stripe, k).eigenvalues()?;
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(values)
}

#[derive(Serialize)]
struct SpectrumSummary {
    m: usize,
    max_modulus: f64,
    unit_eigenvalues_at_zero: usize,
    max_conjugation_residual: f64,
}

pub fn spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let coin = cfg.coin()?;
    let grid = cfg.k_grid;
    let ks: Vec<f64> = (0..grid).map(|j| 2.0 * PI * j as f64 / grid as f64).collect();
    let per_width: Vec<(usize, Vec<Vec<C64>>, f64)> = cfg
        .widths
        .par_iter()
        .map(|&m| -> Result<_> {
            let stripe = cfg.stripe_with_width(Some(m))?;
            let values = ks
                .iter()
                .map(|&k| sorted_eigenvalues(&coin, stripe, k))
                .collect::<Result<Vec<_>>>()?;
            let conj = ks
                .iter()
                .map(|&k| {
                    let w = build_w(&coin, stripe, k);
                    let mirror = build_w(&coin, stripe, 2.0 * PI - k);
                    w.matrix().max_abs_diff(&mirror.matrix().conj())
                })
                .fold(0.0, f64::max);
            Ok((m, values, conj))
        })
        .collect::<Result<_>>()?;

    let mut csv = out.csv("spectrum.csv", &["M", "k", "re_lambda", "im_lambda", "abs_lambda"])?;
    let mut summaries = Vec::new();
    let mut checks = Checks::default();
    for (m, values, conj) in &per_width {
        for (k, vals) in ks.iter().zip(values) {
            for z in vals {
                csv.row(&[
                    m.to_string(),
                    fmt_f64(*k),
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    fmt_f64(z.norm()),
                ])?;
            }
        }
        let max_modulus = values.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        let unit = values[0]
            .iter()
            .filter(|z| (*z - C64::new(1.0, 0.0)).norm() < 1e-6)
            .count();
        checks.at_most(format!("M={m} max |lambda| - 1"), max_modulus - 1.0, ROUNDOFF_TOL);
        checks.at_most(format!("M={m} W(2pi-k) - conj W(k)"), *conj, ROUNDOFF_TOL);
        summaries.push(SpectrumSummary {
            m: *m,
            max_modulus,
            unit_eigenvalues_at_zero: unit,
            max_conjugation_residual: *conj,
        });
    }
    csv.finish()?;
    out.json(
        "spectrum.json",
        &json!({ "k_grid": grid, "widths": summaries, "checks": checks.0 }),
    )?;
    Ok(Outcome {
        run: json!({ "k_grid": grid, "widths": cfg.widths }),
        checks,
    })
}

#[derive(Serialize)]
struct ProjectionHalving {
    delta: f64,
    full: PerturbedProjections,
    half: PerturbedProjections,
    error_ratios: [f64; 3],
}

pub fn kato(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let coin = cfg.coin()?;
    let stripe = cfg.stripe()?;
    let kr = KatoReduction::compute(&coin, stripe)?;
    let mut checks = Checks::default();
    checks.at_most("skew-hermitian residual", kr.skew_hermitian_residual(), ROUNDOFF_TOL);
    checks.at_most("reduced eigenpair residual", kr.eigenpair_residual(), 1e-10);
    let idempotence = (&(&kr.projection * &kr.projection) - &kr.projection).max_abs();
    checks.at_most("projection idempotence", idempotence, ROUNDOFF_TOL);

    let closed_form = is_hadamard(cfg) && stripe.s() == -1 && stripe.t() == 0;
    let mut halvings = Vec::new();
    let mut projection_diff = None;
    if closed_form {
        let exact = KatoReduction::hadamard_band2();
        let diff = kr.projection.max_abs_diff(&exact.projection);
        checks.at_most("projection vs closed form", diff, ROUNDOFF_TOL);
        projection_diff = Some(diff);
        for &delta in &cfg.kato_deltas {
            let full = perturbed_projection_check(delta)?;
            let half = perturbed_projection_check(delta / 2.0)?;
            let error_ratios = [0, 1, 2].map(|j| full.eigenvalue_errors[j] / half.eigenvalue_errors[j]);
            checks.at_least(
                format!("delta={delta} min error halving ratio"),
                error_ratios.iter().copied().fold(f64::INFINITY, f64::min),
                6.0,
            );
            halvings.push(ProjectionHalving {
                delta,
                full,
                half,
                error_ratios,
            });
        }
    }
    out.json(
        "kato.json",
        &json!({
            "rank": kr.rank(),
            "projection": kr.projection.to_rows(),
            "derivative": kr.derivative.to_rows(),
            "reduced": kr.reduced.to_rows(),
            "reduced_eigenvalues": kr.values,
            "reduced_eigenvectors": kr.vectors,
            "projection_vs_closed_form": projection_diff,
            "perturbation": halvings,
            "checks": checks.0,
        }),
    )?;
    Ok(Outcome {
        run: json!({ "rank": kr.rank(), "closed_form_comparison": closed_form }),
        checks,
    })
}

pub fn limits(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let coin = cfg.coin()?;
    let g = require_product(cfg, "limits")?;
    let stripe = cfg.stripe()?;
    let n = cfg.steps;
    if n == 0 {
        bail!("limits needs steps > 0");
    }
    let mut state = BandState::init_product(&coin, g, stripe, n)?;
    state.evolve(n)?;
    let mu = state.measure();
    write_profile(out, &format!("profile_n{n}.csv"), &mu)?;
    let mut checks = Checks::default();
    let report = if stripe.width() >= Stripe::untruncated_width(n) {
        let lambda = weak_limit_bias(&coin, g);
        let d = weak_limit_cdf_distance_with(&mu, |x| biased_weak_limit_cdf(&coin, lambda, x))?;
        checks.at_most("weak limit CDF distance", d, WEAK_LIMIT_CDF_TOL);
        json!({ "regime": "untruncated", "bias": lambda, "cdf_distance": d })
    } else if stripe.width() == 1 {
        let variance = oqrw_variance(&coin)?;
        let cmp = full_cdf_distance(&mu, &LimitProfile::centered(variance))?;
        checks.at_most("diffusive CDF distance", cmp.distance, DIFFUSIVE_CDF_TOL);
        json!({ "regime": "single_row", "variance": variance, "comparison": cmp })
    } else if stripe.width() == 2 && is_hadamard(cfg) {
        let coefficients = limit_coefficients(g);
        let masses = mode_masses(&mu, cfg.window)?;
        checks.at_most("left mass", (masses.left - coefficients.minus.re).abs(), MASS_TOL);
        checks.at_most("center mass", (masses.center - coefficients.zero).abs(), MASS_TOL);
        checks.at_most("right mass", (masses.right - coefficients.plus.re).abs(), MASS_TOL);
        let compare = |profiles: [LimitProfile; 3]| -> Result<Vec<CdfComparison>> {
            profiles
                .iter()
                .map(|p| Ok(scaled_cdf_distance(&mu, p, cfg.window)?))
                .collect()
        };
        let expansion = compare(LimitProfile::from_expansion(g))?;
        let stated = compare(LimitProfile::stated(g))?;
        checks.at_most("center CDF distance", expansion[1].distance, CENTER_CDF_TOL);
        checks.at_most(
            "left CDF distance (expansion variance)",
            expansion[0].distance,
            SIDE_CDF_TOL,
        );
        checks.at_most(
            "right CDF distance (expansion variance)",
            expansion[2].distance,
            SIDE_CDF_TOL,
        );
        json!({
            "regime": "three_modes",
            "window": cfg.window,
            "coefficients": coefficients,
            "masses": masses,
            "distances_expansion_variance": expansion,
            "distances_stated_variance": stated,
        })
    } else {
        bail!("limits covers the single row, the width-2 Hadamard band and bands wider than 2n");
    };
    out.json("limits.json", &json!({ "n": n, "report": report, "checks": checks.0 }))?;
    Ok(Outcome {
        run: json!({ "n": n, "width": stripe.width(), "max_abs_imag_mu": mu.max_imag_abs() }),
        checks,
    })
}

fn ncrit_rule(m: usize) -> usize {
    if m % 2 == 0 {
        3 * m
    } else {
        2 * m
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), fmt_f64)
}

pub fn characteristics(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let coin = cfg.coin()?;
    let g = require_product(cfg, "characteristics")?;
    let (lo, hi) = cfg.fit_window();
    let options = SeriesOptions {
        delta: cfg.delta,
        support_threshold: cfg.tol_support,
        detail_from: lo,
    };
    let rows: Vec<CharacteristicsRow> = cfg
        .widths
        .par_iter()
        .map(|&m| -> Result<_> {
            let series = RunSeries::band(&coin, g, cfg.stripe_with_width(Some(m))?, cfg.steps, options)?;
            Ok(characteristics_row(&series, lo, hi, cfg.tol_ncrit)?)
        })
        .collect::<Result<_>>()?;

    let mut checks = Checks::default();
    let mut csv = out.csv(
        "characteristics.csv",
        &["M", "n_crit", "xmax", "ratio", "gamma", "r_center", "r_side"],
    )?;
    for (m, row) in cfg.widths.iter().zip(&rows) {
        csv.row(&[
            m.to_string(),
            row.n_crit.to_string(),
            fmt_f64(row.xmax),
            fmt_f64(row.ratio),
            opt(row.gamma.as_ref().map(|f| f.slope)),
            opt(row.r_center.as_ref().map(|f| f.slope)),
            opt(row.r_side.as_ref().map(|f| f.slope)),
        ])?;
        if cfg.check_ncrit_rule && *m >= 2 {
            checks.at_most(
                format!("M={m} |n_crit - rule|"),
                row.n_crit.abs_diff(ncrit_rule(*m)) as f64,
                NCRIT_RULE_TOL as f64,
            );
        }
    }
    csv.finish()?;
    out.json(
        "characteristics.json",
        &json!({ "fit_window": [lo, hi], "options": options, "rows": rows, "checks": checks.0 }),
    )?;
    Ok(Outcome {
        run: json!({ "n_max": cfg.steps, "fit_window": [lo, hi], "widths": cfg.widths }),
        checks,
    })
}

fn max_pointwise(a: &ComplexMeasure, b: &ComplexMeasure) -> f64 {
    let lo = a.min_x().min(b.min_x());
    let hi = a.max_x().max(b.max_x());
    (lo..=hi).map(|x| (a.get(x) - b.get(x)).norm()).fold(0.0, f64::max)
}

/// Runs `band` and `oracle` in lockstep and returns the largest pointwise gap.
fn lockstep(
    band: &mut BandState,
    oracle: &mut impl Walk,
    n: usize,
    mut each: impl FnMut(&ComplexMeasure),
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    loop {
        let mu = band.measure();
        each(&mu);
        worst = worst.max(max_pointwise(&mu, &oracle.measure()));
        if band.time() == n {
            return Ok(worst);
        }
        band.step()?;
        oracle.step()?;
    }
}

pub fn oracle_check(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let coin = cfg.coin()?;
    let n = cfg.steps;
    let mut spinors = vec![
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
    ];
    if let Some(g) = cfg.spinor() {
        spinors.push(g);
    }
    let (mut line_gap, mut row_gap, mut imag, mut drift) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut min_real = f64::INFINITY;
    for &g in &spinors {
        let wide = Stripe::centered(Stripe::untruncated_width(n))?;
        let mut band = BandState::init_product(&coin, g, wide, n)?;
        line_gap = line_gap.max(lockstep(&mut band, &mut Qw1d::new(&coin, g, n)?, n, |_| {})?);

        let mut band = BandState::init_product(&coin, g, Stripe::centered(1)?, n)?;
        row_gap = row_gap.max(lockstep(&mut band, &mut Oqrw::new(&coin, g, n)?, n, |mu| {
            imag = imag.max(mu.max_imag_abs());
            min_real = min_real.min(mu.min_real());
            drift = drift.max((mu.total() - 1.0).norm());
        })?);
    }

    // The characteristic function from the operator power against the simulated measure.
    let stripe = cfg.stripe()?;
    let fourier_n = n.min(40);
    let mut fourier_gap: f64 = 0.0;
    for &g in &spinors {
        let mut band = BandState::init_product(&coin, g, stripe, fourier_n)?;
        band.evolve(fourier_n)?;
        let mu = band.measure();
        let initial = stripewalk_core::spectral::product_band_vector(&coin, g, stripe);
        for j in 0..8 {
            let k = 2.0 * PI * j as f64 / 8.0 + 0.1;
            let from_power = characteristic_function(&coin, stripe, &initial, fourier_n as u32, k)?;
            fourier_gap = fourier_gap.max((from_power - mu.fourier(k)).norm());
        }
    }

    let mut checks = Checks::default();
    checks.at_most("untruncated band vs line walk", line_gap, ORACLE_TOL);
    checks.at_most("single row vs correlated walk", row_gap, ORACLE_TOL);
    checks.at_most("single row max |Im mu|", imag, ORACLE_TOL);
    checks.at_least("single row min Re mu", min_real, 0.0);
    checks.at_most("single row sum drift", drift, ORACLE_TOL);
    checks.at_most("characteristic function vs operator power", fourier_gap, 1e-10);
    out.json(
        "oracle.json",
        &json!({ "steps": n, "spinors": spinors, "fourier_steps": fourier_n, "checks": checks.0 }),
    )?;
    Ok(Outcome {
        run: json!({ "steps": n, "spinor_count": spinors.len() }),
        checks,
    })
}

#[derive(Serialize)]
struct SweepRow {
    m: usize,
    sum_drift: f64,
    max_imag: f64,
    min_real: f64,
    n_crit: usize,
    xmax: Option<f64>,
}

pub fn sweep(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let coin = cfg.coin()?;
    let g = require_product(cfg, "sweep")?;
    let n = cfg.steps;
    let options = SeriesOptions {
        delta: cfg.delta,
        support_threshold: cfg.tol_support,
        detail_from: n,
    };
    let rows: Vec<SweepRow> = cfg
        .widths
        .par_iter()
        .map(|&m| -> Result<_> {
            let series = RunSeries::band(&coin, g, cfg.stripe_with_width(Some(m))?, n, options)?;
            let last = series.records.last().expect("at least one record");
            Ok(SweepRow {
                m,
                sum_drift: series
                    .records
                    .iter()
                    .map(|r| (r.total - 1.0).norm())
                    .fold(0.0, f64::max),
                max_imag: series.records.iter().map(|r| r.max_imag).fold(0.0, f64::max),
                min_real: last.min_real,
                n_crit: series.n_crit(cfg.tol_ncrit),
                xmax: last.peak_position(),
            })
        })
        .collect::<Result<_>>()?;
    let mut checks = Checks::default();
    let mut csv = out.csv(
        "sweep.csv",
        &["M", "n", "sum_drift", "max_imag", "min_real", "n_crit", "xmax"],
    )?;
    for r in &rows {
        csv.row(&[
            r.m.to_string(),
            n.to_string(),
            fmt_f64(r.sum_drift),
            fmt_f64(r.max_imag),
            fmt_f64(r.min_real),
            r.n_crit.to_string(),
            opt(r.xmax),
        ])?;
        checks.at_most(format!("M={} sum drift", r.m), r.sum_drift, CONSERVATION_TOL);
    }
    csv.finish()?;
    out.json("sweep.json", &json!({ "steps": n, "rows": rows, "checks": checks.0 }))?;
    Ok(Outcome {
        run: json!({ "steps": n, "widths": cfg.widths }),
        checks,
    })
}
