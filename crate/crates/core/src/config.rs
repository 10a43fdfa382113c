//! Flat `key = value` run configuration.
//!
//! Every key has a default; [`RunConfig::to_text`] writes all of them in a
//! fixed order with floats in shortest round-trip form, so parsing the output
//! reproduces the configuration bit for bit.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chains::{default_ell0, SectionLadder};
use crate::field::{DerivativeOptions, ExpFilter, DEFAULT_K_MAX};
use crate::harmonic::solve_tuning_pair;
use crate::solver::{InitialCondition, SolverConfig};
use crate::sparseness::{PointSampling, ScanOptions, SparsenessMode, SparsenessParams, MIN_SUBSAMPLE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    Type { key: String, value: String, expected: &'static str },
    #[error("key `{key}` = {value} violates {constraint}")]
    Constraint { key: String, value: String, constraint: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tuning {
    /// λ as given.
    Manual,
    /// λ derived from δ through the harmonic-measure tuning relation.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    /// `α_k = 1/(k+1)`, the regularity class.
    Regularity,
    /// `α_k = 1/(k+3/2)`, the a priori class.
    Apriori,
    Fixed(f64),
}

impl AlphaRule {
    pub fn alpha(&self, k: u32) -> f64 {
        match *self {
            AlphaRule::Regularity => 1.0 / (k as f64 + 1.0),
            AlphaRule::Apriori => 1.0 / (k as f64 + 1.5),
            AlphaRule::Fixed(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotPolicy {
    None,
    /// First and last sample.
    Ends,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub box_length: f64,
    pub ic: String,
    pub ic_a: f64,
    pub ic_b: f64,
    pub ic_c: f64,
    pub ic_amplitude: f64,
    pub ic_seed: u64,
    pub ic_k_cut: f64,
    pub t_end: f64,
    pub dt: f64,
    pub adaptive: bool,
    pub cfl_limit: f64,
    pub safety: f64,
    pub c_m: f64,
    pub max_horizon: f64,
    pub sample_interval: f64,
    pub k_list: Vec<u32>,
    pub all_indices: bool,
    pub derivative_filter: bool,
    pub tuning: Tuning,
    pub lambda: f64,
    pub delta: f64,
    pub c0: f64,
    pub alpha: AlphaRule,
    pub sparseness_mode: SparsenessMode,
    /// `0` scans every grid point; otherwise a stratified subsample.
    pub sample_points: usize,
    pub sample_seed: u64,
    pub m_dirs: usize,
    pub chain_c: f64,
    pub chain_j_max: u32,
    /// `None` picks `⌈log_{1+ε}‖u₀‖_∞⌉` clamped to `[1, 4]`.
    pub ladder_ell0: Option<usize>,
    pub ladder_q: usize,
    pub epsilon: f64,
    pub m_star: f64,
    pub mu: f64,
    pub kappa_dual: f64,
    pub snapshots: SnapshotPolicy,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 32,
            box_length: 2.0 * PI,
            ic: "abc".into(),
            ic_a: 1.0,
            ic_b: 1.0,
            ic_c: 1.0,
            ic_amplitude: 1.0,
            ic_seed: 42,
            ic_k_cut: 4.0,
            t_end: 0.1,
            dt: 1e-3,
            adaptive: false,
            cfl_limit: 1.0,
            safety: 0.5,
            c_m: 1.0,
            max_horizon: 1.0,
            sample_interval: 0.1,
            k_list: vec![1, 2, 3],
            all_indices: false,
            derivative_filter: false,
            tuning: Tuning::Auto,
            lambda: solve_tuning_pair(0.75).expect("δ in range").lambda,
            delta: 0.75,
            c0: 4.0,
            alpha: AlphaRule::Regularity,
            sparseness_mode: SparsenessMode::Volumetric,
            sample_points: 0,
            sample_seed: 0,
            m_dirs: 16,
            chain_c: 0.5,
            chain_j_max: 12,
            ladder_ell0: None,
            ladder_q: 2,
            epsilon: 0.1,
            m_star: 1.1,
            mu: 1.0,
            kappa_dual: 1.0,
            snapshots: SnapshotPolicy::Ends,
            output_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: &[&str] = &[
    "n",
    "box_length",
    "ic",
    "ic_a",
    "ic_b",
    "ic_c",
    "ic_amplitude",
    "ic_seed",
    "ic_k_cut",
    "t_end",
    "dt",
    "adaptive",
    "cfl_limit",
    "safety",
    "c_m",
    "max_horizon",
    "sample_interval",
    "k_list",
    "all_indices",
    "derivative_filter",
    "tuning",
    "lambda",
    "delta",
    "c0",
    "alpha",
    "sparseness_mode",
    "sample_points",
    "sample_seed",
    "m_dirs",
    "chain_c",
    "chain_j_max",
    "ladder_ell0",
    "ladder_q",
    "epsilon",
    "m_star",
    "mu",
    "kappa_dual",
    "snapshots",
    "output_dir",
];

fn type_err(key: &str, value: &str, expected: &'static str) -> ConfigError {
    ConfigError::Type { key: key.into(), value: value.into(), expected }
}

fn constraint(key: &str, value: impl ToString, what: &str) -> ConfigError {
    ConfigError::Constraint { key: key.into(), value: value.to_string(), constraint: what.into() }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>().map_err(|_| type_err(key, v, "a real number"))
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse::<T>().map_err(|_| type_err(key, v, "a nonnegative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(type_err(key, v, "true or false")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut lambda_given = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| ConfigError::Syntax { line, text: raw.to_string() })?;
            let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
                return Err(ConfigError::UnknownKey { line, key: key.into() });
            };
            if seen.contains(&known) {
                return Err(ConfigError::Duplicate { line, key: key.into() });
            }
            seen.push(known);
            cfg.set(known, value, &mut lambda_given)?;
        }
        cfg.resolve(lambda_given)?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str, lambda_given: &mut Option<f64>) -> Result<(), ConfigError> {
        match key {
            "n" => self.n = parse_int(key, v)?,
            "box_length" => self.box_length = parse_f64(key, v)?,
            "ic" => self.ic = v.to_string(),
            "ic_a" => self.ic_a = parse_f64(key, v)?,
            "ic_b" => self.ic_b = parse_f64(key, v)?,
            "ic_c" => self.ic_c = parse_f64(key, v)?,
            "ic_amplitude" => self.ic_amplitude = parse_f64(key, v)?,
            "ic_seed" => self.ic_seed = parse_int(key, v)?,
            "ic_k_cut" => self.ic_k_cut = parse_f64(key, v)?,
            "t_end" => self.t_end = parse_f64(key, v)?,
            "dt" => self.dt = parse_f64(key, v)?,
            "adaptive" => self.adaptive = parse_bool(key, v)?,
            "cfl_limit" => self.cfl_limit = parse_f64(key, v)?,
            "safety" => self.safety = parse_f64(key, v)?,
            "c_m" => self.c_m = parse_f64(key, v)?,
            "max_horizon" => self.max_horizon = parse_f64(key, v)?,
            "sample_interval" => self.sample_interval = parse_f64(key, v)?,
            "k_list" => {
                self.k_list = v
                    .split(',')
                    .map(|s| s.trim().parse::<u32>().map_err(|_| type_err(key, v, "a comma-separated list of orders")))
                    .collect::<Result<_, _>>()?
            }
            "all_indices" => self.all_indices = parse_bool(key, v)?,
            "derivative_filter" => self.derivative_filter = parse_bool(key, v)?,
            "tuning" => {
                self.tuning = match v {
                    "auto" => Tuning::Auto,
                    "manual" => Tuning::Manual,
                    _ => return Err(type_err(key, v, "auto or manual")),
                }
            }
            "lambda" => *lambda_given = Some(parse_f64(key, v)?),
            "delta" => self.delta = parse_f64(key, v)?,
            "c0" => self.c0 = parse_f64(key, v)?,
            "alpha" => {
                self.alpha = match v {
                    "regularity" => AlphaRule::Regularity,
                    "apriori" => AlphaRule::Apriori,
                    _ => AlphaRule::Fixed(v.parse().map_err(|_| type_err(key, v, "regularity, apriori or a number"))?),
                }
            }
            "sparseness_mode" => {
                self.sparseness_mode = v.parse().map_err(|_| type_err(key, v, "vol or 1d"))?;
            }
            "sample_points" => {
                self.sample_points = if v == "all" { 0 } else { parse_int(key, v)? };
            }
            "sample_seed" => self.sample_seed = parse_int(key, v)?,
            "m_dirs" => self.m_dirs = parse_int(key, v)?,
            "chain_c" => self.chain_c = parse_f64(key, v)?,
            "chain_j_max" => self.chain_j_max = parse_int(key, v)?,
            "ladder_ell0" => {
                self.ladder_ell0 = if v == "auto" { None } else { Some(parse_int(key, v)?) };
            }
            "ladder_q" => self.ladder_q = parse_int(key, v)?,
            "epsilon" => self.epsilon = parse_f64(key, v)?,
            "m_star" => self.m_star = parse_f64(key, v)?,
            "mu" => self.mu = parse_f64(key, v)?,
            "kappa_dual" => self.kappa_dual = parse_f64(key, v)?,
            "snapshots" => {
                self.snapshots = match v {
                    "none" => SnapshotPolicy::None,
                    "ends" => SnapshotPolicy::Ends,
                    "all" => SnapshotPolicy::All,
                    _ => return Err(type_err(key, v, "none, ends or all")),
                }
            }
            "output_dir" => self.output_dir = PathBuf::from(v),
            _ => unreachable!("key list and setter disagree"),
        }
        Ok(())
    }

    fn resolve(&mut self, lambda_given: Option<f64>) -> Result<(), ConfigError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(constraint("delta", self.delta, "δ ∈ (0,1)"));
        }
        match self.tuning {
            Tuning::Auto => {
                let derived = solve_tuning_pair(self.delta).expect("δ checked").lambda;
                if let Some(l) = lambda_given {
                    if l.to_bits() != derived.to_bits() {
                        return Err(constraint(
                            "lambda",
                            l,
                            &format!("tuning = auto, which derives λ = {derived:?} from δ"),
                        ));
                    }
                }
                self.lambda = derived;
            }
            Tuning::Manual => {
                if let Some(l) = lambda_given {
                    self.lambda = l;
                }
            }
        }
        self.validate()
    }

    /// Checks every precondition the pipeline relies on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(constraint("lambda", self.lambda, "λ ∈ (0,1)"));
        }
        self.solver_config().validate().map_err(|e| constraint("solver", self.n, &e.to_string()))?;
        self.initial_condition()?;
        if self.k_list.is_empty() {
            return Err(constraint("k_list", "", "at least one derivative order"));
        }
        if let Some(&k) = self.k_list.iter().find(|&&k| k > DEFAULT_K_MAX) {
            return Err(constraint("k_list", k, &format!("orders ≤ {DEFAULT_K_MAX}")));
        }
        self.sparseness_params(1)
            .validate()
            .map_err(|e| constraint("sparseness", format!("{:?}", self.alpha), &e.to_string()))?;
        if self.sample_points != 0 && self.sample_points < MIN_SUBSAMPLE {
            return Err(constraint("sample_points", self.sample_points, &format!("all or ≥ {MIN_SUBSAMPLE}")));
        }
        if self.m_dirs < 3 {
            return Err(constraint("m_dirs", self.m_dirs, "m_dirs ≥ 3"));
        }
        if !(self.chain_c > 0.0 && self.chain_c < 1.0) {
            return Err(constraint("chain_c", self.chain_c, "c ∈ (0,1)"));
        }
        if self.chain_j_max > DEFAULT_K_MAX || self.chain_j_max < 2 {
            return Err(constraint("chain_j_max", self.chain_j_max, &format!("2 ≤ j_max ≤ {DEFAULT_K_MAX}")));
        }
        if self.ladder_ell0 == Some(0) {
            return Err(constraint("ladder_ell0", 0, "ℓ₀ ≥ 1"));
        }
        // Auto ℓ₀ can reach 4, so the ladder must fit that worst case.
        let ell0 = self.ladder_ell0.unwrap_or(4);
        if let Err(e) = self.ladder(ell0) {
            return Err(constraint("chain_j_max", self.chain_j_max, &format!("a ladder from ℓ₀ = {ell0} ({e})")));
        }
        if self.ladder_q == 0 {
            return Err(constraint("ladder_q", 0, "q ≥ 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(constraint("epsilon", self.epsilon, "ε > 0"));
        }
        if !(self.m_star > 1.0) {
            return Err(constraint("m_star", self.m_star, "M* > 1"));
        }
        if !(self.mu > 0.0) {
            return Err(constraint("mu", self.mu, "μ > 0"));
        }
        if !(self.kappa_dual > 0.0) {
            return Err(constraint("kappa_dual", self.kappa_dual, "κ_dual > 0"));
        }
        Ok(())
    }

    pub fn initial_condition(&self) -> Result<InitialCondition, ConfigError> {
        Ok(match self.ic.as_str() {
            "abc" => InitialCondition::Abc { a: self.ic_a, b: self.ic_b, c: self.ic_c },
            "taylor_green" => InitialCondition::TaylorGreen { amplitude: self.ic_amplitude },
            "kida" => InitialCondition::Kida,
            "random_bandlimited" => InitialCondition::RandomBandlimited {
                seed: self.ic_seed,
                k_cut: self.ic_k_cut,
                amplitude: self.ic_amplitude,
            },
            other => return Err(constraint("ic", other, "ic ∈ {abc, taylor_green, kida, random_bandlimited}")),
        })
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            n: self.n,
            box_length: self.box_length,
            dt: self.dt,
            t_end: self.t_end,
            sample_interval: self.sample_interval,
            adaptive: self.adaptive,
            cfl_limit: self.cfl_limit,
            safety: self.safety,
            c_m: self.c_m,
            max_horizon: self.max_horizon,
            k_list: self.k_list.clone(),
            all_indices: self.all_indices,
        }
    }

    pub fn derivative_options(&self) -> DerivativeOptions {
        DerivativeOptions { filter: self.derivative_filter.then(ExpFilter::default), ..Default::default() }
    }

    pub fn sparseness_params(&self, k: u32) -> SparsenessParams {
        SparsenessParams { lambda: self.lambda, delta: self.delta, c0: self.c0, alpha: self.alpha.alpha(k) }
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            sampling: if self.sample_points == 0 {
                PointSampling::All
            } else {
                PointSampling::Stratified { count: self.sample_points, seed: self.sample_seed }
            },
            m_dirs: self.m_dirs,
        }
    }

    /// ℓ₀ in effect for an initial sup-norm.
    pub fn ell0(&self, u0_sup: f64) -> usize {
        self.ladder_ell0.unwrap_or_else(|| default_ell0(u0_sup, self.epsilon))
    }

    /// Doubling ladder from `ell0` up to `chain_j_max`, one constant for all sections.
    pub fn ladder(&self, ell0: usize) -> Result<SectionLadder, crate::chains::ChainError> {
        SectionLadder::doubling(ell0, self.chain_j_max as usize, self.chain_c, self.ladder_q)
    }

    /// Canonical text: every key in fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("n", self.n.to_string());
        put("box_length", format!("{:?}", self.box_length));
        put("ic", self.ic.clone());
        put("ic_a", format!("{:?}", self.ic_a));
        put("ic_b", format!("{:?}", self.ic_b));
        put("ic_c", format!("{:?}", self.ic_c));
        put("ic_amplitude", format!("{:?}", self.ic_amplitude));
        put("ic_seed", self.ic_seed.to_string());
        put("ic_k_cut", format!("{:?}", self.ic_k_cut));
        put("t_end", format!("{:?}", self.t_end));
        put("dt", format!("{:?}", self.dt));
        put("adaptive", self.adaptive.to_string());
        put("cfl_limit", format!("{:?}", self.cfl_limit));
        put("safety", format!("{:?}", self.safety));
        put("c_m", format!("{:?}", self.c_m));
        put("max_horizon", format!("{:?}", self.max_horizon));
        put("sample_interval", format!("{:?}", self.sample_interval));
        put("k_list", self.k_list.iter().map(u32::to_string).collect::<Vec<_>>().join(","));
        put("all_indices", self.all_indices.to_string());
        put("derivative_filter", self.derivative_filter.to_string());
        put(
            "tuning",
            match self.tuning {
                Tuning::Auto => "auto".into(),
                Tuning::Manual => "manual".into(),
            },
        );
        put("lambda", format!("{:?}", self.lambda));
        put("delta", format!("{:?}", self.delta));
        put("c0", format!("{:?}", self.c0));
        put(
            "alpha",
            match self.alpha {
                AlphaRule::Regularity => "regularity".into(),
                AlphaRule::Apriori => "apriori".into(),
                AlphaRule::Fixed(a) => format!("{a:?}"),
            },
        );
        put("sparseness_mode", self.sparseness_mode.to_string());
        put("sample_points", if self.sample_points == 0 { "all".into() } else { self.sample_points.to_string() });
        put("sample_seed", self.sample_seed.to_string());
        put("m_dirs", self.m_dirs.to_string());
        put("chain_c", format!("{:?}", self.chain_c));
        put("chain_j_max", self.chain_j_max.to_string());
        put("ladder_ell0", self.ladder_ell0.map_or("auto".into(), |l| l.to_string()));
        put("ladder_q", self.ladder_q.to_string());
        put("epsilon", format!("{:?}", self.epsilon));
        put("m_star", format!("{:?}", self.m_star));
        put("mu", format!("{:?}", self.mu));
        put("kappa_dual", format!("{:?}", self.kappa_dual));
        put(
            "snapshots",
            match self.snapshots {
                SnapshotPolicy::None => "none".into(),
                SnapshotPolicy::Ends => "ends".into(),
                SnapshotPolicy::All => "all".into(),
            },
        );
        put("output_dir", self.output_dir.display().to_string());
        s
    }

    /// Hex SHA-256 of [`to_text`](Self::to_text).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
