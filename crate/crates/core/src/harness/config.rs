//! Flat `key = value` experiment configuration.
//!
//! Precedence, lowest first: documented defaults, the config file,
//! `ML_LAB_<KEY>` environment variables, explicit overrides (CLI flags).
//! Unknown keys are errors everywhere.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use crate::localtime::ScalingScheme;
use crate::numeric::geometric_grid;
use crate::processes::ProcessKind;
use crate::transferop::{symmetric_grid, MapKind};
use crate::{Error, Result};

pub const ENV_PREFIX: &str = "ML_LAB_";

/// `(key, default, description)` for every accepted key, in canonical order.
pub const KEYS: &[(&str, &str, &str)] = &[
    (
        "experiment",
        "verify-ml",
        "simulate | verify-ml | deviation | limsup | asclt | conditions | spectrum | calibrate",
    ),
    ("process", "lazy", "lazy | heavy-tail | gauss-cf | beta"),
    (
        "d",
        "1.5",
        "stability index of the heavy-tail walk, in (1, 2]",
    ),
    ("beta", "2", "base of the beta-transformation pair, > 1"),
    (
        "scheme",
        "auto",
        "auto | calibrate | explicit: how B_n = c n^(1/d) and g(0) are chosen",
    ),
    ("scheme_d", "2", "explicit scheme: stability index"),
    ("scale_c", "0.7071067811865476", "explicit scheme: c"),
    ("g0", "0.3989422804014327", "explicit scheme: g(0)"),
    (
        "calibration_horizon",
        "2000",
        "largest n used by calibration",
    ),
    ("master_seed", "42", "root of all path seeds"),
    (
        "horizon",
        "100000",
        "path length n for ensemble experiments",
    ),
    (
        "checkpoints",
        "auto",
        "comma list of n at which local times are recorded; auto = decades from 1000 up to horizon",
    ),
    ("paths", "10000", "ensemble size"),
    ("gamma", "1.5", "deviation band parameter, > 1"),
    ("t_values", "3,4,5", "deviation thresholds t"),
    (
        "limsup_horizon",
        "10000000",
        "path length for the upper-limit statistic",
    ),
    ("limsup_paths", "100", "paths for the upper-limit statistic"),
    (
        "x_grid",
        "0.5,1,2",
        "points at which logarithmic averages are evaluated",
    ),
    (
        "asclt_horizon",
        "1000000",
        "single-path length for the logarithmic average",
    ),
    (
        "averaged_horizon",
        "100000",
        "path length for the averaged version",
    ),
    ("averaged_paths", "1000", "paths for the averaged version"),
    (
        "n_list",
        "1000,10000,100000",
        "horizons of the variance probe",
    ),
    ("probe_paths", "1000", "paths for the variance probe"),
    (
        "k_list",
        "100,1000,10000",
        "k values of the covariance-decay check",
    ),
    (
        "cov_delta",
        "0.1",
        "delta in the (log log k)^(-1-delta) envelope",
    ),
    ("cov_paths", "4000", "paths for the covariance-decay check"),
    (
        "levels",
        "1,2,4,8",
        "levels x for the exact potential-kernel sums",
    ),
    (
        "levels_horizon",
        "10000",
        "horizon N for the exact potential-kernel sums",
    ),
    (
        "ratio_limit",
        "1.5",
        "largest allowed ratio to the frozen envelope",
    ),
    ("second_diff_k", "50", "k in the second-difference moment"),
    (
        "j_list",
        "1000,10000,100000",
        "j values in the second-difference moment",
    ),
    (
        "second_diff_paths",
        "2000",
        "paths for the second-difference moment",
    ),
    (
        "expected_horizon",
        "10000",
        "n for the exact expected local time",
    ),
    ("map", "gauss", "doubling | gauss | beta (uses beta)"),
    ("resolution", "4096", "Ulam cells m"),
    ("window", "1", "half-width delta of the small-t window"),
    (
        "t_grid",
        "auto",
        "symmetric t grid in [-window, window]; auto = 17 points",
    ),
    (
        "tail_grid",
        "auto",
        "t grid in (window, pi]; auto = 8 points",
    ),
    ("d_exp", "2", "exponent d in |lambda_t| <= 1 - K |t|^d"),
    (
        "output_dir",
        "ml-lab-out",
        "directory receiving the result files",
    ),
];

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeChoice {
    Auto,
    Calibrate,
    Explicit(ScalingScheme),
}

/// Parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    raw: BTreeMap<&'static str, String>,
    pub experiment: String,
    pub process: ProcessKind,
    pub scheme: SchemeChoice,
    pub calibration_horizon: usize,
    pub master_seed: u64,
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
    pub paths: usize,
    pub gamma: f64,
    pub t_values: Vec<f64>,
    pub limsup_horizon: u64,
    pub limsup_paths: usize,
    pub x_grid: Vec<f64>,
    pub asclt_horizon: u64,
    pub averaged_horizon: u64,
    pub averaged_paths: usize,
    pub n_list: Vec<u64>,
    pub probe_paths: usize,
    pub k_list: Vec<u64>,
    pub cov_delta: f64,
    pub cov_paths: usize,
    pub levels: Vec<i64>,
    pub levels_horizon: usize,
    pub ratio_limit: f64,
    pub second_diff_k: u64,
    pub j_list: Vec<u64>,
    pub second_diff_paths: usize,
    pub expected_horizon: usize,
    pub map: MapKind,
    pub resolution: usize,
    pub window: f64,
    pub t_grid: Vec<f64>,
    pub tail_grid: Vec<f64>,
    pub d_exp: f64,
    pub output_dir: PathBuf,
}

fn key_of(name: &str) -> Option<&'static str> {
    KEYS.iter().find(|k| k.0 == name).map(|k| k.0)
}

fn unknown(name: &str, origin: &str) -> Error {
    let known: Vec<&str> = KEYS.iter().map(|k| k.0).collect();
    Error::Config(format!(
        "unknown key '{name}' {origin}; known keys: {}",
        known.join(", ")
    ))
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

/// Overrides applied on top of the file and environment, e.g. from CLI flags.
pub type Overrides = Vec<(String, String)>;

impl ExperimentConfig {
    pub fn defaults() -> Self {
        Self::load(None, std::iter::empty(), &[]).expect("documented defaults are valid")
    }

    /// Builds a config from an optional file body, environment pairs and overrides.
    pub fn load<I>(file: Option<&str>, env: I, overrides: &[(String, String)]) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut raw: BTreeMap<&'static str, String> =
            KEYS.iter().map(|k| (k.0, k.1.to_string())).collect();
        if let Some(text) = file {
            let mut seen = BTreeMap::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!(
                        "line {}: expected 'key = value', got '{line}'",
                        lineno + 1
                    ))
                })?;
                let (k, v) = (k.trim(), v.trim());
                let key =
                    key_of(k).ok_or_else(|| unknown(k, &format!("on line {}", lineno + 1)))?;
                if let Some(prev) = seen.insert(key, lineno + 1) {
                    return Err(Error::Config(format!(
                        "key '{key}' set twice (lines {prev} and {})",
                        lineno + 1
                    )));
                }
                raw.insert(key, v.to_string());
            }
        }
        for (name, v) in env {
            if let Some(rest) = name.strip_prefix(ENV_PREFIX) {
                let lower = rest.to_ascii_lowercase();
                let key = key_of(&lower)
                    .ok_or_else(|| unknown(&lower, &format!("from environment variable {name}")))?;
                raw.insert(key, v.trim().to_string());
            }
        }
        for (k, v) in overrides {
            let key = key_of(k).ok_or_else(|| unknown(k, "in overrides"))?;
            raw.insert(key, v.trim().to_string());
        }
        Self::from_raw(raw)
    }

    /// Reads `path` (if any) and the process environment.
    pub fn from_sources(
        path: Option<&std::path::Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => None,
        };
        Self::load(text.as_deref(), std::env::vars(), overrides)
    }

    fn from_raw(raw: BTreeMap<&'static str, String>) -> Result<Self> {
        let g = |k: &str| raw[k].as_str();
        let d: f64 = parse("d", g("d"))?;
        let beta: f64 = parse("beta", g("beta"))?;
        let process = match g("process") {
            "lazy" => ProcessKind::LazyWalk,
            "heavy-tail" => ProcessKind::HeavyTailWalk { d },
            "gauss-cf" => ProcessKind::GaussCfPair,
            "beta" => ProcessKind::BetaPair { beta },
            other => return Err(Error::Config(format!("unknown process '{other}'"))),
        };
        let scheme = match g("scheme") {
            "auto" => SchemeChoice::Auto,
            "calibrate" => SchemeChoice::Calibrate,
            "explicit" => SchemeChoice::Explicit(
                ScalingScheme::new(
                    parse("scheme_d", g("scheme_d"))?,
                    parse("scale_c", g("scale_c"))?,
                    parse("g0", g("g0"))?,
                )
                .map_err(|e| Error::Config(format!("explicit scheme: {e}")))?,
            ),
            other => return Err(Error::Config(format!("unknown scheme '{other}'"))),
        };
        let horizon: u64 = parse("horizon", g("horizon"))?;
        check(horizon >= 1, || "horizon must be at least 1".into())?;
        let checkpoints = match g("checkpoints") {
            "auto" => {
                let mut c: Vec<u64> = geometric_grid(1000.min(horizon), horizon, 1);
                c.push(horizon);
                c.sort_unstable();
                c.dedup();
                c
            }
            v => parse_list("checkpoints", v)?,
        };
        check(
            !checkpoints.is_empty() && checkpoints.iter().all(|&c| c >= 1 && c <= horizon),
            || "checkpoints must be non-empty and lie in 1..=horizon".into(),
        )?;
        let map = match g("map") {
            "doubling" => MapKind::Doubling,
            "gauss" => MapKind::Gauss,
            "beta" => MapKind::Beta { beta },
            other => return Err(Error::Config(format!("unknown map '{other}'"))),
        };
        let window: f64 = parse("window", g("window"))?;
        check(window > 0.0 && window < PI, || {
            "window must lie in (0, pi)".into()
        })?;
        let t_grid = match g("t_grid") {
            "auto" => symmetric_grid(window, 8),
            v => parse_list("t_grid", v)?,
        };
        let tail_grid = match g("tail_grid") {
            "auto" => (1..=8)
                .map(|i| window + (PI - window) * i as f64 / 8.0)
                .collect(),
            v => parse_list("tail_grid", v)?,
        };
        let experiment = g("experiment").to_string();
        let cfg = Self {
            experiment,
            process,
            scheme,
            calibration_horizon: parse("calibration_horizon", g("calibration_horizon"))?,
            master_seed: parse("master_seed", g("master_seed"))?,
            horizon,
            checkpoints,
            paths: parse("paths", g("paths"))?,
            gamma: parse("gamma", g("gamma"))?,
            t_values: parse_list("t_values", g("t_values"))?,
            limsup_horizon: parse("limsup_horizon", g("limsup_horizon"))?,
            limsup_paths: parse("limsup_paths", g("limsup_paths"))?,
            x_grid: parse_list("x_grid", g("x_grid"))?,
            asclt_horizon: parse("asclt_horizon", g("asclt_horizon"))?,
            averaged_horizon: parse("averaged_horizon", g("averaged_horizon"))?,
            averaged_paths: parse("averaged_paths", g("averaged_paths"))?,
            n_list: parse_list("n_list", g("n_list"))?,
            probe_paths: parse("probe_paths", g("probe_paths"))?,
            k_list: parse_list("k_list", g("k_list"))?,
            cov_delta: parse("cov_delta", g("cov_delta"))?,
            cov_paths: parse("cov_paths", g("cov_paths"))?,
            levels: parse_list("levels", g("levels"))?,
            levels_horizon: parse("levels_horizon", g("levels_horizon"))?,
            ratio_limit: parse("ratio_limit", g("ratio_limit"))?,
            second_diff_k: parse("second_diff_k", g("second_diff_k"))?,
            j_list: parse_list("j_list", g("j_list"))?,
            second_diff_paths: parse("second_diff_paths", g("second_diff_paths"))?,
            expected_horizon: parse("expected_horizon", g("expected_horizon"))?,
            map,
            resolution: parse("resolution", g("resolution"))?,
            window,
            t_grid,
            tail_grid,
            d_exp: parse("d_exp", g("d_exp"))?,
            output_dir: PathBuf::from(g("output_dir")),
            raw,
        };
        check(cfg.paths >= 2, || "paths must be at least 2".into())?;
        check(cfg.gamma > 1.0, || "gamma must exceed 1".into())?;
        check(cfg.resolution >= 2, || {
            "resolution must be at least 2".into()
        })?;
        Ok(cfg)
    }

    /// Raw value of a key as it will appear in the manifest.
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.raw.get(key).map(String::as_str)
    }

    /// Every key except `output_dir`, one `key = value` line each, in
    /// canonical order. Re-loading this text reproduces the run.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        for (k, _, _) in KEYS {
            if *k == "output_dir" {
                continue;
            }
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&self.raw[k]);
            s.push('\n');
        }
        s
    }

    /// Documented defaults as a commented config file.
    pub fn documented_defaults() -> String {
        let mut s = String::new();
        for (k, v, doc) in KEYS {
            s.push_str(&format!("# {doc}\n{k} = {v}\n"));
        }
        s
    }
}
