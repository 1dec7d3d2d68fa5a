//! Flat `key = value` run configuration.
//!
//! Complex numbers are written `re,im` (a bare `re` is accepted on input),
//! lists of complex numbers are separated by `;`, integer lists by `,` with
//! `a-b` ranges allowed. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};
use stripewalk_core::{BandState, Coin, Stripe, C64};

#[derive(Debug, Clone, PartialEq)]
pub enum CoinSpec {
    Hadamard,
    Entries([C64; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StripeSpec {
    /// Width `M` with the centered placement.
    Width(usize),
    Explicit {
        s: i64,
        t: i64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    /// Product start `(Hg) ⊗ conj(Hg)` at the origin.
    Product([C64; 2]),
    /// Flat band vector, four components per row from `v = t` down to `v = s`.
    Band(Vec<C64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub coin: CoinSpec,
    pub stripe: StripeSpec,
    pub initial: InitialSpec,
    pub steps: usize,
    /// Steps at which measures are written; empty means the final step only.
    pub snapshots: Vec<usize>,
    pub band_field: bool,
    pub k_grid: usize,
    pub widths: Vec<usize>,
    pub delta: f64,
    pub window: f64,
    /// Fit window for exponent fits; `None` is the upper half of the run.
    pub fit: Option<(usize, usize)>,
    pub tol_unitarity: f64,
    pub tol_support: f64,
    pub tol_ncrit: f64,
    pub check_ncrit_rule: bool,
    pub kato_deltas: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            coin: CoinSpec::Hadamard,
            stripe: StripeSpec::Width(2),
            initial: InitialSpec::Product([C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            steps: 100,
            snapshots: Vec::new(),
            band_field: false,
            k_grid: 64,
            widths: vec![2],
            delta: 0.3,
            window: 4.0,
            fit: None,
            tol_unitarity: 1e-10,
            tol_support: 1e-12,
            tol_ncrit: 1e-12,
            check_ncrit_rule: false,
            kato_deltas: vec![1e-1, 1e-2, 1e-3],
        }
    }
}

const KEYS: &[&str] = &[
    "coin",
    "width",
    "stripe",
    "g",
    "band",
    "steps",
    "snapshots",
    "band_field",
    "k_grid",
    "widths",
    "delta",
    "window",
    "fit",
    "tol.unitarity",
    "tol.support",
    "tol.ncrit",
    "check.ncrit_rule",
    "kato.deltas",
];

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| anyhow!("bad number {s:?}: {e}"))
}

fn parse_complex(s: &str) -> Result<C64> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [r] => Ok(C64::new(parse_f64(r)?, 0.0)),
        [r, i] => Ok(C64::new(parse_f64(r)?, parse_f64(i)?)),
        _ => bail!("bad complex number {s:?}, expected re,im"),
    }
}

fn parse_complex_list(s: &str) -> Result<Vec<C64>> {
    s.split(';').map(parse_complex).collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
            if a > b {
                bail!("empty range {part:?}");
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().with_context(|| format!("bad integer {part:?}"))?);
        }
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => bail!("bad boolean {other:?}"),
    }
}

fn fmt_complex(z: C64) -> String {
    format!("{:?},{:?}", z.re, z.im)
}

fn fmt_complex_list(zs: &[C64]) -> String {
    zs.iter().map(|&z| fmt_complex(z)).collect::<Vec<_>>().join(";")
}

fn fmt_list<T: std::fmt::Debug>(xs: &[T]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            if seen.insert(key.to_string(), lineno + 1).is_some() {
                bail!("line {}: duplicate key {key:?}", lineno + 1);
            }
            cfg.set(key, value.trim())
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        if seen.contains_key("width") && seen.contains_key("stripe") {
            bail!("give either width or stripe, not both");
        }
        if seen.contains_key("g") && seen.contains_key("band") {
            bail!("give either g or band, not both");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "coin" => {
                self.coin = if value == "hadamard" {
                    CoinSpec::Hadamard
                } else {
                    let e = parse_complex_list(value)?;
                    let e: [C64; 4] = e.try_into().map_err(|_| anyhow!("coin needs four entries a;b;c;d"))?;
                    CoinSpec::Entries(e)
                }
            }
            "width" => self.stripe = StripeSpec::Width(value.parse().context("width")?),
            "stripe" => {
                let (s, t) = value.split_once(',').ok_or_else(|| anyhow!("stripe = s,t"))?;
                self.stripe = StripeSpec::Explicit {
                    s: s.trim().parse()?,
                    t: t.trim().parse()?,
                };
            }
            "g" => {
                let g = parse_complex_list(value)?;
                let g: [C64; 2] = g.try_into().map_err(|_| anyhow!("g needs two entries g1;g2"))?;
                self.initial = InitialSpec::Product(g);
            }
            "band" => self.initial = InitialSpec::Band(parse_complex_list(value)?),
            "steps" => self.steps = value.parse().context("steps")?,
            "snapshots" => self.snapshots = parse_usize_list(value)?,
            "band_field" => self.band_field = parse_bool(value)?,
            "k_grid" => self.k_grid = value.parse().context("k_grid")?,
            "widths" => self.widths = parse_usize_list(value)?,
            "delta" => self.delta = parse_f64(value)?,
            "window" => self.window = parse_f64(value)?,
            "fit" => {
                self.fit = if value == "auto" {
                    None
                } else {
                    let v = parse_usize_list(value)?;
                    match v.as_slice() {
                        [lo, hi] if lo < hi => Some((*lo, *hi)),
                        _ => bail!("fit = lo,hi with lo < hi, or auto"),
                    }
                }
            }
            "tol.unitarity" => self.tol_unitarity = parse_f64(value)?,
            "tol.support" => self.tol_support = parse_f64(value)?,
            "tol.ncrit" => self.tol_ncrit = parse_f64(value)?,
            "check.ncrit_rule" => self.check_ncrit_rule = parse_bool(value)?,
            "kato.deltas" => self.kato_deltas = value.split(',').map(parse_f64).collect::<Result<_>>()?,
            other => bail!("unknown key {other:?} (known: {})", KEYS.join(", ")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.coin()?;
        self.stripe()?;
        if let InitialSpec::Band(v) = &self.initial {
            let m = self.stripe()?.width();
            if v.len() != 4 * m {
                bail!("band vector has {} entries, width {m} needs {}", v.len(), 4 * m);
            }
        }
        if self.snapshots.iter().any(|&n| n > self.steps) {
            bail!("snapshot beyond steps = {}", self.steps);
        }
        if self.k_grid < 2 {
            bail!("k_grid must be at least 2");
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            bail!("widths must be a non-empty list of positive integers");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("delta must lie in (0, 1)");
        }
        if self.window.is_nan() || self.window <= 0.0 {
            bail!("window must be positive");
        }
        if let Some((_, hi)) = self.fit {
            if hi > self.steps {
                bail!("fit window ends after steps = {}", self.steps);
            }
        }
        Ok(())
    }

    pub fn coin(&self) -> Result<Coin> {
        match &self.coin {
            CoinSpec::Hadamard => Ok(Coin::hadamard()),
            CoinSpec::Entries([a, b, c, d]) => {
                Coin::with_tolerance(*a, *b, *c, *d, self.tol_unitarity).map_err(|e| anyhow!("coin: {e}"))
            }
        }
    }

    pub fn stripe(&self) -> Result<Stripe> {
        self.stripe_with_width(match self.stripe {
            StripeSpec::Width(m) => Some(m),
            StripeSpec::Explicit { .. } => None,
        })
    }

    /// Stripe for width `m` in the centered placement, or the configured one when `m` is `None`.
    pub fn stripe_with_width(&self, m: Option<usize>) -> Result<Stripe> {
        let r = match (m, self.stripe) {
            (Some(m), _) => Stripe::centered(m),
            (None, StripeSpec::Explicit { s, t }) => Stripe::new(s, t),
            (None, StripeSpec::Width(m)) => Stripe::centered(m),
        };
        r.map_err(|e| anyhow!("stripe: {e}"))
    }

    /// Product spinor, if the start is a product state.
    pub fn spinor(&self) -> Option<[C64; 2]> {
        match &self.initial {
            InitialSpec::Product(g) => Some(*g),
            InitialSpec::Band(_) => None,
        }
    }

    pub fn initial_state(&self, stripe: Stripe, horizon: usize) -> Result<BandState> {
        let coin = self.coin()?;
        let state = match &self.initial {
            InitialSpec::Product(g) => BandState::init_product(&coin, *g, stripe, horizon),
            InitialSpec::Band(v) => BandState::init_flat_vector(&coin, v, stripe, horizon),
        };
        state.map_err(|e| anyhow!("initial state: {e}"))
    }

    pub fn snapshot_steps(&self) -> Vec<usize> {
        if self.snapshots.is_empty() {
            vec![self.steps]
        } else {
            let mut s = self.snapshots.clone();
            s.sort_unstable();
            s.dedup();
            s
        }
    }

    pub fn fit_window(&self) -> (usize, usize) {
        self.fit.unwrap_or((self.steps / 2, self.steps))
    }

    /// Canonical text form: every key, fixed order, shortest round-trip floats.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut e = Vec::new();
        e.push((
            "coin",
            match &self.coin {
                CoinSpec::Hadamard => "hadamard".to_string(),
                CoinSpec::Entries(v) => fmt_complex_list(v),
            },
        ));
        match self.stripe {
            StripeSpec::Width(m) => e.push(("width", m.to_string())),
            StripeSpec::Explicit { s, t } => e.push(("stripe", format!("{s},{t}"))),
        }
        match &self.initial {
            InitialSpec::Product(g) => e.push(("g", fmt_complex_list(g))),
            InitialSpec::Band(v) => e.push(("band", fmt_complex_list(v))),
        }
        e.push(("steps", self.steps.to_string()));
        e.push(("snapshots", fmt_list(&self.snapshots)));
        e.push(("band_field", self.band_field.to_string()));
        e.push(("k_grid", self.k_grid.to_string()));
        e.push(("widths", fmt_list(&self.widths)));
        e.push(("delta", format!("{:?}", self.delta)));
        e.push(("window", format!("{:?}", self.window)));
        e.push((
            "fit",
            self.fit.map_or("auto".to_string(), |(lo, hi)| format!("{lo},{hi}")),
        ));
        e.push(("tol.unitarity", format!("{:?}", self.tol_unitarity)));
        e.push(("tol.support", format!("{:?}", self.tol_support)));
        e.push(("tol.ncrit", format!("{:?}", self.tol_ncrit)));
        e.push(("check.ncrit_rule", self.check_ncrit_rule.to_string()));
        e.push(("kato.deltas", fmt_list(&self.kato_deltas)));
        e
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical().as_bytes()))
    }
}
