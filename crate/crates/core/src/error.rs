use std::path::PathBuf;

use thiserror::Error;

use crate::economy::{Account, BankId};

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("insufficient funds in {account:?}: balance {balance}, requested {requested}")]
    InsufficientFunds { account: Account, balance: f64, requested: f64 },
    #[error("unknown account {0:?}")]
    UnknownAccount(Account),
    #[error("negative or non-finite transfer amount {0}")]
    InvalidAmount(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResolutionError {
    #[error("no healthy bank left to absorb bank {0}")]
    NoHealthyBank(BankId),
    #[error("levy on households and firms could not cover bank {bank}: short by {shortfall}")]
    ShortfallAfterLevy { bank: BankId, shortfall: f64 },
    #[error("conversion and depositor levy could not cover bank {bank}: short by {shortfall}")]
    ShortfallAfterDepositors { bank: BankId, shortfall: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),
    #[error("sample too small: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    MissingFile(PathBuf),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("failed to parse config: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::InvalidValue { key: key.into(), reason: reason.into() }
    }
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("i/o error writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}
