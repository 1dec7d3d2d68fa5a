//! Per-step observables of long runs: onset of negative values, the
//! off-diagonal peak, support edges, and log-log exponent fits.

use serde::{Deserialize, Serialize};

use crate::coin::Coin;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::walker::{BandState, ComplexMeasure, Stripe, Walk};

pub const DEFAULT_DELTA: f64 = 0.3;
pub const DEFAULT_NCRIT_TOL: f64 = 1e-12;
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-12;
/// Alternative thresholds whose support edges are recorded for sensitivity reports.
pub const SENSITIVITY_THRESHOLDS: [f64; 2] = [1e-10, 1e-14];
pub const MIN_FIT_POINTS: usize = 10;
/// Largest allowed spread of local slopes before a sub-window is selected.
pub const SLOPE_VARIATION_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub delta: f64,
    pub support_threshold: f64,
    /// Steps before this are recorded without peak or support data.
    pub detail_from: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            delta: DEFAULT_DELTA,
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
            detail_from: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub x: i64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    /// `Re μ_n(0)`.
    pub origin: f64,
    pub min_real: f64,
    pub total: C64,
    pub max_imag: f64,
    pub peak: Option<Peak>,
    /// Support edge at the primary threshold.
    pub edge: Option<i64>,
    /// Support edges at [`SENSITIVITY_THRESHOLDS`].
    pub edge_sensitivity: [Option<i64>; 2],
}

impl StepRecord {
    pub fn peak_position(&self) -> Option<f64> {
        self.peak.map(|p| p.x as f64 / self.n as f64)
    }

    /// `d_n = a_n - x_peak` in lattice units.
    pub fn tail_width(&self) -> Option<i64> {
        Some(self.edge? - self.peak?.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    /// Stripe width, `None` for the untruncated walk.
    pub m: Option<usize>,
    pub coin: Coin,
    pub initial: String,
    pub options: SeriesOptions,
    pub records: Vec<StepRecord>,
}

impl RunSeries {
    /// Steps `walk` until time `n_max`, recording every step including the current one.
    pub fn record<W: Walk>(
        walk: &mut W,
        n_max: usize,
        m: Option<usize>,
        coin: Coin,
        initial: impl Into<String>,
        options: SeriesOptions,
    ) -> Result<Self> {
        Self::record_with(walk, n_max, m, coin, initial, options, |_| {})
    }

    /// As [`RunSeries::record`], handing every measure to `snapshot` as well.
    pub fn record_with<W: Walk>(
        walk: &mut W,
        n_max: usize,
        m: Option<usize>,
        coin: Coin,
        initial: impl Into<String>,
        options: SeriesOptions,
        mut snapshot: impl FnMut(&ComplexMeasure),
    ) -> Result<Self> {
        if !(options.delta > 0.0 && options.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta = {} not in (0, 1)",
                options.delta
            )));
        }
        let mut records = Vec::with_capacity(n_max + 1);
        loop {
            let mu = walk.measure();
            snapshot(&mu);
            records.push(step_record(&mu, &options));
            if walk.time() >= n_max {
                break;
            }
            walk.step()?;
        }
        Ok(RunSeries {
            m,
            coin,
            initial: initial.into(),
            options,
            records,
        })
    }

    /// Band run from the product start `(Hg) ⊗ conj(Hg)`.
    pub fn band(coin: &Coin, g: [C64; 2], stripe: Stripe, n_max: usize, options: SeriesOptions) -> Result<Self> {
        let mut state = BandState::init_product(coin, g, stripe, n_max)?;
        Self::record(
            &mut state,
            n_max,
            Some(stripe.width()),
            *coin,
            format!("product g=({},{})", g[0], g[1]),
            options,
        )
    }

    pub fn get(&self, n: usize) -> Option<&StepRecord> {
        let first = self.records.first()?.n;
        self.records.get(n.checked_sub(first)?)
    }

    pub fn n_max(&self) -> usize {
        self.records.last().map_or(0, |r| r.n)
    }

    fn range(&self, n_lo: usize, n_hi: usize) -> Result<&[StepRecord]> {
        let first = self.records.first().map_or(0, |r| r.n);
        if n_lo > n_hi || n_lo < first || n_hi > self.n_max() {
            return Err(Error::InvalidArgument(format!(
                "window [{n_lo}, {n_hi}] outside the recorded steps [{first}, {}]",
                self.n_max()
            )));
        }
        Ok(&self.records[n_lo - first..=n_hi - first])
    }

    /// Largest recorded `n` with `min_x Re μ_ñ(x) ≥ -tol` for all `ñ ≤ n`.
    pub fn n_crit(&self, tol: f64) -> usize {
        self.records
            .iter()
            .find(|r| r.min_real < -tol)
            .map_or(self.n_max(), |r| r.n.saturating_sub(1))
    }
}

fn step_record(mu: &ComplexMeasure, options: &SeriesOptions) -> StepRecord {
    let detailed = mu.n >= options.detail_from && mu.n > 0;
    StepRecord {
        n: mu.n,
        origin: mu.get(0).re,
        min_real: mu.min_real(),
        total: mu.total(),
        max_imag: mu.max_imag_abs(),
        peak: if detailed { peak_in(mu, options.delta) } else { None },
        edge: if detailed {
            support_edge(mu, options.support_threshold)
        } else {
            None
        },
        edge_sensitivity: if detailed {
            SENSITIVITY_THRESHOLDS.map(|t| support_edge(mu, t))
        } else {
            [None; 2]
        },
    }
}

fn peak_in(mu: &ComplexMeasure, delta: f64) -> Option<Peak> {
    let n = mu.n as f64;
    let lo = (delta * n).ceil() as i64;
    let hi = mu.n as i64;
    let mut best: Option<Peak> = None;
    for x in lo.max(mu.min_x())..=hi.min(mu.max_x()) {
        let value = mu.get(x).re;
        // `>=` keeps the larger x on ties.
        if best.is_none_or(|b| value >= b.value) {
            best = Some(Peak { x, value });
        }
    }
    best
}

/// Argmax of `Re μ_n` over `x/n ∈ [delta, 1]`, returned as `x/n`.
pub fn peak_position(measure: &ComplexMeasure, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} not in (0, 1)")));
    }
    if measure.n == 0 {
        return Err(Error::EmptyWindow("no lattice point in [delta n, n] at n = 0".into()));
    }
    let peak = peak_in(measure, delta)
        .ok_or_else(|| Error::EmptyWindow(format!("no lattice point with x/n in [{delta}, 1]")))?;
    Ok(peak.x as f64 / measure.n as f64)
}

/// Largest `|x|` with `|Re μ(x)| > threshold · max |Re μ|`.
pub fn support_edge(measure: &ComplexMeasure, threshold: f64) -> Option<i64> {
    let cut = threshold * measure.max_real_abs();
    measure
        .iter()
        .filter(|(_, z)| z.re.abs() > cut)
        .map(|(x, _)| x.abs())
        .max()
}

/// First-violation scan of a band run from the product start.
pub fn n_crit(coin: &Coin, g: [C64; 2], stripe: Stripe, n_max: usize, tol: f64) -> Result<usize> {
    if n_max < 4 * stripe.width() {
        return Err(Error::InvalidArgument(format!(
            "n_max = {n_max} is below 4M = {}",
            4 * stripe.width()
        )));
    }
    let mut state = BandState::init_product(coin, g, stripe, n_max)?;
    while state.time() < n_max {
        state.step()?;
        if state.measure().min_real() < -tol {
            return Ok(state.time() - 1);
        }
    }
    Ok(n_max)
}

/// Mean of `Re μ_n(0) / Re μ_n(peak)` over `n_lo..=n_hi`, optionally even `n` only.
pub fn height_ratio(series: &RunSeries, n_lo: usize, n_hi: usize, even_only: bool) -> Result<f64> {
    if n_lo >= n_hi {
        return Err(Error::InvalidArgument(format!("empty window [{n_lo}, {n_hi}]")));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in series.range(n_lo, n_hi)? {
        if even_only && r.n % 2 == 1 {
            continue;
        }
        let peak = r.peak.ok_or(Error::VanishingPeak { n: r.n })?;
        if peak.value.abs() < f64::MIN_POSITIVE {
            return Err(Error::VanishingPeak { n: r.n });
        }
        sum += r.origin / peak.value;
        count += 1;
    }
    Ok(sum / count as f64)
}

/// Least-squares line through `(log n, log value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    pub n_lo: usize,
    pub n_hi: usize,
    /// Root mean square of the residuals in log space.
    pub rms_residual: f64,
    /// `|slope(first half) - slope(second half)|` of the fitted window.
    pub slope_variation: f64,
    /// True when a sub-window replaced the requested one.
    pub sub_window: bool,
    /// False when no window met the variation tolerance.
    pub stable: bool,
    /// Points dropped before fitting (non-positive values).
    pub excluded: usize,
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / len).sqrt();
    (slope, intercept, rms)
}

fn halves_variation(pts: &[(f64, f64)]) -> f64 {
    let mid = pts.len() / 2;
    if mid < 2 || pts.len() - mid < 2 {
        return f64::INFINITY;
    }
    (least_squares(&pts[..mid]).0 - least_squares(&pts[mid..]).0).abs()
}

/// Fits `log value` against `log n` over positive samples.
///
/// If the two halves of the window disagree in slope by more than
/// [`SLOPE_VARIATION_TOL`], the longest run of consecutive eighths of the
/// window (at least half of it) that passes the same test is used instead.
pub fn fit_loglog(samples: &[(usize, f64)], auto_window: bool) -> Result<LogLogFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(n, v)| *n > 0 && *v > 0.0)
        .map(|&(n, v)| ((n as f64).ln(), v.ln()))
        .collect();
    let ns: Vec<usize> = samples
        .iter()
        .filter(|(n, v)| *n > 0 && *v > 0.0)
        .map(|s| s.0)
        .collect();
    let excluded = samples.len() - pts.len();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewFitPoints {
            got: pts.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let full_var = halves_variation(&pts);
    let mut chosen = (0, pts.len());
    let mut sub_window = false;
    let mut stable = full_var < SLOPE_VARIATION_TOL;
    if auto_window && !stable {
        let seg = pts.len() / 8;
        if seg >= 1 {
            'outer: for len in (4..8).rev() {
                for start in (0..=8 - len).rev() {
                    let lo = start * seg;
                    let hi = if start + len == 8 {
                        pts.len()
                    } else {
                        (start + len) * seg
                    };
                    if hi - lo >= MIN_FIT_POINTS && halves_variation(&pts[lo..hi]) < SLOPE_VARIATION_TOL {
                        chosen = (lo, hi);
                        sub_window = true;
                        stable = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    let window = &pts[chosen.0..chosen.1];
    let (slope, intercept, rms) = least_squares(window);
    Ok(LogLogFit {
        slope,
        intercept,
        points: window.len(),
        n_lo: ns[chosen.0],
        n_hi: ns[chosen.1 - 1],
        rms_residual: rms,
        slope_variation: halves_variation(window),
        sub_window,
        stable,
        excluded,
    })
}

/// Growth exponent of `d_n = a_n - x_peak` over `n_lo..=n_hi`.
pub fn tail_exponent(series: &RunSeries, n_lo: usize, n_hi: usize) -> Result<LogLogFit> {
    let samples: Vec<(usize, f64)> = series
        .range(n_lo, n_hi)?
        .iter()
        .filter_map(|r| r.tail_width().map(|d| (r.n, d as f64)))
        .collect();
    fit_loglog(&samples, true)
}

/// Tail exponents at the primary threshold and at [`SENSITIVITY_THRESHOLDS`].
pub fn tail_exponent_sensitivity(series: &RunSeries, n_lo: usize, n_hi: usize) -> Result<[f64; 3]> {
    let primary = tail_exponent(series, n_lo, n_hi)?.slope;
    let mut out = [primary, 0.0, 0.0];
    for (i, slot) in out.iter_mut().skip(1).enumerate() {
        let samples: Vec<(usize, f64)> = series
            .range(n_lo, n_hi)?
            .iter()
            .filter_map(|r| Some((r.n, (r.edge_sensitivity[i]? - r.peak?.x) as f64)))
            .collect();
        *slot = fit_loglog(&samples, true)?.slope;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Center,
    Side,
}

/// Decay exponent of `Re μ_n(0)` (even `n`) or of the running peak value.
pub fn decay_exponent(series: &RunSeries, location: Location, n_lo: usize, n_hi: usize) -> Result<LogLogFit> {
    let mut samples = Vec::new();
    let mut sign = 0.0;
    for r in series.range(n_lo, n_hi)? {
        let value = match location {
            Location::Center if r.n % 2 == 1 => continue,
            Location::Center => r.origin,
            Location::Side => r.peak.ok_or(Error::VanishingPeak { n: r.n })?.value,
        };
        if value == 0.0 {
            return Err(Error::SignChange { n: r.n });
        }
        if sign == 0.0 {
            sign = value.signum();
        } else if value.signum() != sign {
            return Err(Error::SignChange { n: r.n });
        }
        samples.push((r.n, value.abs()));
    }
    fit_loglog(&samples, false)
}

/// One line of the characteristics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicsRow {
    pub m: Option<usize>,
    pub n_crit: usize,
    pub xmax: f64,
    pub ratio: f64,
    pub ratio_even: f64,
    pub gamma: Option<LogLogFit>,
    pub gamma_sensitivity: Option<[f64; 3]>,
    pub r_center: Option<LogLogFit>,
    pub r_side: Option<LogLogFit>,
    /// Messages from fits that were rejected.
    pub diagnostics: Vec<String>,
}

/// Summarizes a series over the fit window `n_lo..=n_hi`.
pub fn characteristics_row(series: &RunSeries, n_lo: usize, n_hi: usize, tol: f64) -> Result<CharacteristicsRow> {
    let last = series
        .get(n_hi)
        .ok_or_else(|| Error::InvalidArgument(format!("n = {n_hi} not recorded")))?;
    let xmax = last
        .peak_position()
        .ok_or_else(|| Error::EmptyWindow(format!("no peak at n = {n_hi}")))?;
    let mut diagnostics = Vec::new();
    let mut keep = |name: &str, r: Result<LogLogFit>| match r {
        Ok(f) => Some(f),
        Err(e) => {
            diagnostics.push(format!("{name}: {e}"));
            None
        }
    };
    let gamma = keep("gamma", tail_exponent(series, n_lo, n_hi));
    let r_center = keep("r_center", decay_exponent(series, Location::Center, n_lo, n_hi));
    let r_side = keep("r_side", decay_exponent(series, Location::Side, n_lo, n_hi));
    let gamma_sensitivity = tail_exponent_sensitivity(series, n_lo, n_hi).ok();
    Ok(CharacteristicsRow {
        m: series.m,
        n_crit: series.n_crit(tol),
        xmax,
        ratio: height_ratio(series, n_lo, n_hi, false)?,
        ratio_even: height_ratio(series, n_lo, n_hi, true)?,
        gamma,
        gamma_sensitivity,
        r_center,
        r_side,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;

    fn measure(n: usize, offset: i64, values: &[f64]) -> ComplexMeasure {
        ComplexMeasure::from_real(n, offset, values)
    }

    #[test]
    fn peak_ties_go_right() {
        let mu = measure(10, 0, &[0.0, 0.0, 0.0, 0.5, 0.1, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(peak_position(&mu, 0.3).unwrap(), 0.5);
    }

    #[test]
    fn peak_window_excludes_center() {
        let mu = measure(10, -2, &[0.0, 0.0, 0.9, 0.0, 0.0, 0.1, 0.0]);
        assert!((peak_position(&mu, 0.3).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(peak_position(&mu, 0.0), Err(Error::InvalidArgument(_))));
        let short = measure(10, -2, &[0.0, 0.0, 1.0]);
        assert!(matches!(peak_position(&short, 0.3), Err(Error::EmptyWindow(_))));
    }

    #[test]
    fn support_edge_uses_relative_threshold() {
        let mu = measure(5, -3, &[1e-20, 1e-3, 0.0, 1.0, 0.0, 1e-13, 0.0]);
        assert_eq!(support_edge(&mu, 1e-12), Some(2));
        assert_eq!(support_edge(&mu, 1e-14), Some(2));
        assert_eq!(support_edge(&mu, 1e-2), Some(0));
    }

    #[test]
    fn fit_recovers_power_law() {
        let samples: Vec<(usize, f64)> = (100..200).map(|n| (n, 3.0 * (n as f64).powf(-0.75))).collect();
        let fit = fit_loglog(&samples, true).unwrap();
        assert!((fit.slope + 0.75).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(!fit.sub_window && fit.stable);
    }

    #[test]
    fn fit_rejects_short_windows() {
        let samples: Vec<(usize, f64)> = (1..10).map(|n| (n, n as f64)).collect();
        assert!(matches!(
            fit_loglog(&samples, true),
            Err(Error::TooFewFitPoints { got: 9, .. })
        ));
        let mut with_zeros: Vec<(usize, f64)> = (1..=12).map(|n| (n, n as f64)).collect();
        with_zeros[3].1 = 0.0;
        with_zeros[4].1 = -1.0;
        with_zeros[5].1 = 0.0;
        assert!(matches!(
            fit_loglog(&with_zeros, true),
            Err(Error::TooFewFitPoints { got: 9, .. })
        ));
    }

    #[test]
    fn fit_selects_sub_window_on_a_kink() {
        // Slope 1 up to n = 400, slope 0.2 after.
        let samples: Vec<(usize, f64)> = (100..=1000)
            .map(|n| {
                let x = n as f64;
                let v = if n <= 400 { x } else { 400.0 * (x / 400.0).powf(0.2) };
                (n, v)
            })
            .collect();
        let fit = fit_loglog(&samples, true).unwrap();
        assert!(fit.sub_window);
        assert!((fit.slope - 0.2).abs() < 1e-10, "slope {}", fit.slope);
        assert!(fit.n_lo > 400);
    }

    #[test]
    fn oqrw_never_goes_negative() {
        let coin = Coin::hadamard();
        let stripe = Stripe::centered(1).unwrap();
        assert_eq!(
            n_crit(&coin, [re(1.0), re(0.0)], stripe, 300, DEFAULT_NCRIT_TOL).unwrap(),
            300
        );
        assert!(matches!(
            n_crit(&coin, [re(1.0), re(0.0)], Stripe::centered(3).unwrap(), 11, 1e-12),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn series_n_crit_matches_scan() {
        let coin = Coin::hadamard();
        let g = [re(1.0), re(0.0)];
        for m in [2, 3, 4] {
            let stripe = Stripe::centered(m).unwrap();
            let direct = n_crit(&coin, g, stripe, 80, DEFAULT_NCRIT_TOL).unwrap();
            let series = RunSeries::band(&coin, g, stripe, 80, SeriesOptions::default()).unwrap();
            assert_eq!(series.n_crit(DEFAULT_NCRIT_TOL), direct, "M={m}");
            assert!(direct < 80);
        }
    }

    #[test]
    fn height_ratio_parity_halving() {
        let coin = Coin::hadamard();
        let stripe = Stripe::centered(2).unwrap();
        let g = [re(1.0), re(0.0)];
        let series = RunSeries::band(&coin, g, stripe, 400, SeriesOptions::default()).unwrap();
        for r in &series.records[1..] {
            if r.n % 2 == 1 {
                assert!(r.origin.abs() < 1e-15);
            }
        }
        let all = height_ratio(&series, 201, 400, false).unwrap();
        let even = height_ratio(&series, 201, 400, true).unwrap();
        assert!((even / all - 2.0).abs() < 0.02, "even {even} all {all}");
    }

    #[test]
    fn center_decay_uses_even_steps() {
        let coin = Coin::hadamard();
        let stripe = Stripe::centered(2).unwrap();
        let series = RunSeries::band(&coin, [re(1.0), re(0.0)], stripe, 60, SeriesOptions::default()).unwrap();
        let r = decay_exponent(&series, Location::Center, 10, 60).unwrap();
        assert_eq!(r.points, 26);
    }

    #[test]
    fn decay_rejects_sign_change() {
        let coin = Coin::hadamard();
        let stripe = Stripe::centered(2).unwrap();
        let mut series = RunSeries::band(&coin, [re(1.0), re(0.0)], stripe, 60, SeriesOptions::default()).unwrap();
        series.records[40].origin = -series.records[40].origin;
        assert!(matches!(
            decay_exponent(&series, Location::Center, 10, 60),
            Err(Error::SignChange { n: 40 })
        ));
    }
}
