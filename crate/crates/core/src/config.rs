//! TOML configuration files.
//!
//! A file has four optional tables. Missing keys take the published fixed
//! values and the variable values of the selected setting (1 unless `setting`
//! says otherwise):
//!
//! ```toml
//! [fixed]
//! B = 20
//! E_b0 = 50.0
//!
//! [setting]
//! setting = 2
//! zeta = 0.1
//!
//! [gapfill]
//! eta = 0.1
//! shortfall_policy = "pa"
//!
//! [run]
//! mechanism = ["pa", "bailin"]
//! r0 = [0.021, 0.027, 0.03]
//! t_max = 1000
//! seeds = 50
//! seed = 0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::experiment::SweepSpec;
use crate::params::{Mechanism, Parameters, RunConfig, Setting, ShortfallPolicy};

/// Rate grid used when a file names no `r0`.
pub const DEFAULT_GRID: [f64; 10] = [0.015, 0.018, 0.021, 0.023, 0.025, 0.026, 0.027, 0.028, 0.03, 0.033];

/// A scalar or a list in the run table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixedBlock {
    #[serde(rename = "B")]
    n_banks: Option<usize>,
    #[serde(rename = "I")]
    n_firms: Option<usize>,
    #[serde(rename = "J")]
    n_workers: Option<usize>,
    #[serde(rename = "E_b0")]
    bank_equity0: Option<f64>,
    alpha: Option<f64>,
    w: Option<f64>,
    z: Option<usize>,
    kappa_min: Option<f64>,
    lambda_max: Option<f64>,
    tau: Option<f64>,
    mu: Option<f64>,
    r_max: Option<f64>,
    r_ib: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingBlock {
    setting: Option<i64>,
    delta: Option<f64>,
    phi: Option<f64>,
    c: Option<f64>,
    m: Option<f64>,
    zeta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GapfillBlock {
    eta: Option<f64>,
    critical_tolerance: Option<f64>,
    shortfall_policy: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunBlock {
    mechanism: Option<OneOrMany<String>>,
    r0: Option<OneOrMany<f64>>,
    t_max: Option<i64>,
    seeds: Option<i64>,
    seed: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    fixed: FixedBlock,
    #[serde(default)]
    setting: SettingBlock,
    #[serde(default)]
    gapfill: GapfillBlock,
    #[serde(default)]
    run: RunBlock,
}

/// Fully resolved configuration: parameters plus the run block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub setting: Setting,
    pub params: Parameters<f64>,
    pub mechanisms: Vec<Mechanism>,
    pub grid: Vec<f64>,
    pub t_max: u64,
    pub n_seeds: usize,
    pub base_seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            setting: Setting::One,
            params: Parameters::with_setting(Setting::One),
            mechanisms: Mechanism::ALL.to_vec(),
            grid: DEFAULT_GRID.to_vec(),
            t_max: SweepSpec::<f64>::DEFAULT_T_MAX,
            n_seeds: SweepSpec::<f64>::DEFAULT_SEEDS,
            base_seed: 0,
        }
    }
}

fn parse_policy(s: &str) -> Result<ShortfallPolicy, ConfigError> {
    match s.to_ascii_lowercase().as_str() {
        "pa" | "purchase_and_assumption" => Ok(ShortfallPolicy::PurchaseAndAssumption),
        "carry" => Ok(ShortfallPolicy::Carry),
        other => Err(ConfigError::invalid("shortfall_policy", format!("expected `pa` or `carry`, got `{other}`"))),
    }
}

fn policy_name(p: ShortfallPolicy) -> &'static str {
    match p {
        ShortfallPolicy::PurchaseAndAssumption => "pa",
        ShortfallPolicy::Carry => "carry",
    }
}

fn non_negative(key: &str, v: i64) -> Result<u64, ConfigError> {
    u64::try_from(v).map_err(|_| ConfigError::invalid(key, format!("must be >= 0, got {v}")))
}

impl Config {
    /// Parses TOML text. Keys not present keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let setting = match raw.setting.setting {
            Some(n) => Setting::from_number(n)?,
            None => Setting::One,
        };
        let mut p = Parameters::<f64>::with_setting(setting);
        let f = raw.fixed;
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        set!(p.n_banks, f.n_banks);
        set!(p.n_firms, f.n_firms);
        set!(p.n_workers, f.n_workers);
        set!(p.bank_equity0, f.bank_equity0);
        set!(p.alpha, f.alpha);
        set!(p.wage, f.w);
        set!(p.z, f.z);
        set!(p.kappa_min, f.kappa_min);
        set!(p.lambda_max, f.lambda_max);
        set!(p.tau, f.tau);
        set!(p.mu, f.mu);
        set!(p.r_max, f.r_max);
        set!(p.r_ib, f.r_ib);
        let s = raw.setting;
        set!(p.delta, s.delta);
        set!(p.phi, s.phi);
        set!(p.consumption, s.c);
        set!(p.overhead, s.m);
        set!(p.zeta, s.zeta);
        let g = raw.gapfill;
        set!(p.eta, g.eta);
        set!(p.critical_tolerance, g.critical_tolerance);
        if let Some(policy) = g.shortfall_policy {
            p.shortfall_policy = parse_policy(&policy)?;
        }

        let mut cfg = Config { setting, params: p, ..Config::default() };
        let r = raw.run;
        if let Some(m) = r.mechanism {
            cfg.mechanisms = m.into_vec().iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
        }
        if let Some(grid) = r.r0 {
            cfg.grid = grid.into_vec();
        }
        if let Some(t) = r.t_max {
            cfg.t_max = non_negative("t_max", t)?;
        }
        if let Some(n) = r.seeds {
            cfg.n_seeds = non_negative("seeds", n)? as usize;
        }
        if let Some(s) = r.seed {
            cfg.base_seed = non_negative("seed", s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sweep_spec().validate()
    }

    /// Serializes every key explicitly; parsing the result gives `self` back.
    pub fn to_toml_string(&self) -> String {
        let p = &self.params;
        let mechs: Vec<String> = self.mechanisms.iter().map(|m| format!("\"{m}\"")).collect();
        let grid: Vec<String> = self.grid.iter().map(|r| format!("{r:?}")).collect();
        format!(
            "[fixed]\nB = {}\nI = {}\nJ = {}\nE_b0 = {:?}\nalpha = {:?}\nw = {:?}\nz = {}\nkappa_min = {:?}\n\
             lambda_max = {:?}\ntau = {:?}\nmu = {:?}\nr_max = {:?}\nr_ib = {:?}\n\n\
             [setting]\nsetting = {}\ndelta = {:?}\nphi = {:?}\nc = {:?}\nm = {:?}\nzeta = {:?}\n\n\
             [gapfill]\neta = {:?}\ncritical_tolerance = {:?}\nshortfall_policy = \"{}\"\n\n\
             [run]\nmechanism = [{}]\nr0 = [{}]\nt_max = {}\nseeds = {}\nseed = {}\n",
            p.n_banks,
            p.n_firms,
            p.n_workers,
            p.bank_equity0,
            p.alpha,
            p.wage,
            p.z,
            p.kappa_min,
            p.lambda_max,
            p.tau,
            p.mu,
            p.r_max,
            p.r_ib,
            self.setting.number(),
            p.delta,
            p.phi,
            p.consumption,
            p.overhead,
            p.zeta,
            p.eta,
            p.critical_tolerance,
            policy_name(p.shortfall_policy),
            mechs.join(", "),
            grid.join(", "),
            self.t_max,
            self.n_seeds,
            self.base_seed,
        )
    }

    pub fn sweep_spec(&self) -> SweepSpec<f64> {
        SweepSpec {
            params: self.params.clone(),
            setting: self.setting,
            grid: self.grid.clone(),
            mechanisms: self.mechanisms.clone(),
            n_seeds: self.n_seeds,
            t_max: self.t_max,
            base_seed: self.base_seed,
        }
    }

    /// Single-run configuration for the first mechanism and rate listed.
    pub fn run_config(&self) -> RunConfig<f64> {
        RunConfig::new(self.params.clone(), self.grid[0], self.mechanisms[0], self.t_max, self.base_seed)
    }

    /// Switches to the other published setting, replacing the variable block.
    pub fn apply_setting(&mut self, setting: Setting) {
        self.setting = setting;
        self.params.apply_setting(setting);
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<Config, ConfigError> {
    if !path.exists() {
        return Err(ConfigError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    Config::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_setting_block_is_setting_one() {
        let c = Config::from_toml_str("[setting]\n").unwrap();
        let p = &c.params;
        assert_eq!((p.delta, p.phi, p.consumption, p.overhead, p.zeta), (0.25, 0.75, 0.85, 1.0, 0.0));
    }

    #[test]
    fn setting_two_defaults() {
        let c = Config::from_toml_str("[setting]\nsetting = 2\n").unwrap();
        let p = &c.params;
        assert_eq!((p.delta, p.phi, p.consumption, p.overhead, p.zeta), (0.5, 0.8, 0.8, 0.5, 0.05));
    }

    #[test]
    fn explicit_keys_override_setting() {
        let c = Config::from_toml_str("[setting]\nsetting = 2\nzeta = 0.1\n[fixed]\nE_b0 = 50.0\n").unwrap();
        assert_eq!(c.params.zeta, 0.1);
        assert_eq!(c.params.delta, 0.5);
        assert_eq!(c.params.bank_equity0, 50.0);
    }

    #[test]
    fn consumption_above_one_names_the_key() {
        match Config::from_toml_str("[setting]\nc = 1.3\n") {
            Err(ConfigError::InvalidValue { key, .. }) => assert_eq!(key, "c"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(Config::from_toml_str("[fixed]\nbanks = 3\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn run_block_accepts_scalars_and_lists() {
        let c = Config::from_toml_str("[run]\nmechanism = \"bailin\"\nr0 = 0.03\nseeds = 4\nseed = 9\n").unwrap();
        assert_eq!(c.mechanisms, vec![Mechanism::BailIn]);
        assert_eq!(c.grid, vec![0.03]);
        assert_eq!((c.n_seeds, c.base_seed), (4, 9));
        let c = Config::from_toml_str("[run]\nmechanism = [\"pa\", \"bailout\"]\nr0 = [0.021, 0.027]\n").unwrap();
        assert_eq!(c.mechanisms.len(), 2);
        assert_eq!(c.grid, vec![0.021, 0.027]);
    }

    #[test]
    fn negative_horizon_names_the_key() {
        match Config::from_toml_str("[run]\nt_max = -5\n") {
            Err(ConfigError::InvalidValue { key, .. }) => assert_eq!(key, "t_max"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file() {
        let err = parse_config(Path::new("/nonexistent/crisis.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::MissingFile(_)));
    }

    #[test]
    fn round_trip_reproduces_config() {
        let mut c = Config::from_toml_str("[setting]\nsetting = 2\n[fixed]\nE_b0 = 33.3\n[gapfill]\nshortfall_policy = \"carry\"\n").unwrap();
        c.grid = vec![0.1 + 0.2, 0.5];
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn default_grid_is_valid() {
        assert!(Config::default().validate().is_ok());
    }
}
