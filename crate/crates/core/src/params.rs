//! Model parameters and run configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::num::Real;

/// Crisis resolution mechanism applied to every insolvent bank of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "pa")]
    PurchaseAndAssumption,
    #[serde(rename = "bailout")]
    BailOut,
    #[serde(rename = "bailin")]
    BailIn,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [
        Mechanism::PurchaseAndAssumption,
        Mechanism::BailOut,
        Mechanism::BailIn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::PurchaseAndAssumption => "pa",
            Mechanism::BailOut => "bailout",
            Mechanism::BailIn => "bailin",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pa" | "p&a" | "purchase-and-assumption" => Ok(Mechanism::PurchaseAndAssumption),
            "bailout" | "bail-out" => Ok(Mechanism::BailOut),
            "bailin" | "bail-in" => Ok(Mechanism::BailIn),
            other => Err(ConfigError::invalid("mechanism", format!("unknown mechanism `{other}`"))),
        }
    }
}

/// What to do when a bail-out or bail-in cannot raise the full amount.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortfallPolicy {
    /// Close the bank through purchase & assumption instead.
    PurchaseAndAssumption,
    /// Leave the bank insolvent and retry at the next step.
    Carry,
}

/// One of the two published variable-parameter settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Setting {
    pub fn number(self) -> u8 {
        match self {
            Setting::One => 1,
            Setting::Two => 2,
        }
    }

    pub fn from_number(n: i64) -> Result<Self, ConfigError> {
        match n {
            1 => Ok(Setting::One),
            2 => Ok(Setting::Two),
            _ => Err(ConfigError::invalid("setting", format!("must be 1 or 2, got {n}"))),
        }
    }
}

/// Full parameter set of the economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters<S: Real> {
    // fixed block
    pub n_banks: usize,
    pub n_firms: usize,
    pub n_workers: usize,
    pub bank_equity0: S,
    pub alpha: S,
    pub wage: S,
    pub z: usize,
    pub kappa_min: S,
    pub lambda_max: S,
    pub tau: S,
    pub mu: S,
    pub r_max: S,
    pub r_ib: S,
    // setting block
    pub delta: S,
    pub phi: S,
    pub consumption: S,
    pub overhead: S,
    pub zeta: S,
    // gap-fill block
    pub eta: S,
    pub critical_tolerance: S,
    pub shortfall_policy: ShortfallPolicy,
}

impl<S: Real> Parameters<S> {
    /// Fixed parameters combined with the given variable setting.
    pub fn with_setting(setting: Setting) -> Self {
        let mut p = Self {
            n_banks: 20,
            n_firms: 100,
            n_workers: 700,
            bank_equity0: S::lit(10.0),
            alpha: S::lit(0.1),
            wage: S::lit(1.0),
            z: 2,
            kappa_min: S::lit(0.005),
            lambda_max: S::lit(100.0),
            tau: S::lit(0.05),
            mu: S::lit(0.2),
            r_max: S::lit(0.05),
            r_ib: S::zero(),
            delta: S::zero(),
            phi: S::zero(),
            consumption: S::zero(),
            overhead: S::zero(),
            zeta: S::zero(),
            eta: S::lit(0.1),
            critical_tolerance: S::lit(0.002),
            shortfall_policy: ShortfallPolicy::PurchaseAndAssumption,
        };
        p.apply_setting(setting);
        p
    }

    pub fn apply_setting(&mut self, setting: Setting) {
        let (delta, phi, c, m, zeta) = match setting {
            Setting::One => (0.25, 0.75, 0.85, 1.0, 0.0),
            Setting::Two => (0.5, 0.8, 0.8, 0.5, 0.05),
        };
        self.delta = S::lit(delta);
        self.phi = S::lit(phi);
        self.consumption = S::lit(c);
        self.overhead = S::lit(m);
        self.zeta = S::lit(zeta);
    }

    /// Unit labor cost `w / alpha`, the price floor.
    pub fn unit_labor_cost(&self) -> S {
        self.wage / self.alpha
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn nonneg<S: Real>(key: &'static str, v: S) -> Result<(), ConfigError> {
            if !v.is_finite() || v < S::zero() {
                return Err(ConfigError::invalid(key, format!("must be a finite value >= 0, got {v}")));
            }
            Ok(())
        }
        fn positive<S: Real>(key: &'static str, v: S) -> Result<(), ConfigError> {
            if !v.is_finite() || v <= S::zero() {
                return Err(ConfigError::invalid(key, format!("must be finite and > 0, got {v}")));
            }
            Ok(())
        }
        fn unit<S: Real>(key: &'static str, v: S) -> Result<(), ConfigError> {
            nonneg(key, v)?;
            if v > S::one() {
                return Err(ConfigError::invalid(key, format!("must lie in [0, 1], got {v}")));
            }
            Ok(())
        }

        if self.n_banks < 2 {
            return Err(ConfigError::invalid("B", "at least 2 banks are required"));
        }
        if self.n_firms == 0 {
            return Err(ConfigError::invalid("I", "at least one firm is required"));
        }
        if self.n_workers == 0 {
            return Err(ConfigError::invalid("J", "at least one worker is required"));
        }
        if self.z == 0 {
            return Err(ConfigError::invalid("z", "must be >= 1"));
        }
        if self.z > self.n_firms.min(self.n_banks) {
            return Err(ConfigError::invalid("z", "must not exceed the number of banks or firms"));
        }
        nonneg("E_b0", self.bank_equity0)?;
        positive("alpha", self.alpha)?;
        positive("w", self.wage)?;
        unit("kappa_min", self.kappa_min)?;
        positive("lambda_max", self.lambda_max)?;
        unit("tau", self.tau)?;
        nonneg("mu", self.mu)?;
        nonneg("r_max", self.r_max)?;
        nonneg("r_ib", self.r_ib)?;
        unit("delta", self.delta)?;
        unit("phi", self.phi)?;
        positive("c", self.consumption)?;
        if self.consumption > S::one() {
            return Err(ConfigError::invalid("c", format!("must lie in (0, 1], got {}", self.consumption)));
        }
        nonneg("m", self.overhead)?;
        nonneg("zeta", self.zeta)?;
        if self.zeta >= S::one() {
            return Err(ConfigError::invalid("zeta", format!("must lie in [0, 1), got {}", self.zeta)));
        }
        unit("eta", self.eta)?;
        nonneg("critical_tolerance", self.critical_tolerance)?;
        Ok(())
    }
}

impl<S: Real> Default for Parameters<S> {
    fn default() -> Self {
        Self::with_setting(Setting::One)
    }
}

/// Everything a single trajectory depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig<S: Real> {
    pub params: Parameters<S>,
    pub r0: S,
    pub mechanism: Mechanism,
    pub t_max: u64,
    pub seed: u64,
}

impl<S: Real> RunConfig<S> {
    pub fn new(params: Parameters<S>, r0: S, mechanism: Mechanism, t_max: u64, seed: u64) -> Self {
        Self { params, r0, mechanism, t_max, seed }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        if !self.r0.is_finite() || self.r0 < S::zero() {
            return Err(ConfigError::invalid("r0", format!("must be a finite value >= 0, got {}", self.r0)));
        }
        if self.t_max == 0 {
            return Err(ConfigError::invalid("t_max", "must be >= 1"));
        }
        Ok(())
    }
}
