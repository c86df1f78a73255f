//! Event log entries, serialized one per line as JSON.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::params::Mechanism;

/// Funds that recapitalized or absorbed a failed bank, by source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FundingSources {
    pub interbank_conversion: f64,
    pub depositor_levy: f64,
    pub purchaser_absorption: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    FirmBankruptcy {
        firm: usize,
        /// Outstanding principal at default.
        magnitude: f64,
        recovered: f64,
        written_off: f64,
    },
    LoanRefused {
        firm: usize,
        bank: usize,
        magnitude: f64,
    },
    BankInsolvency {
        bank: usize,
        /// Negative equity `M_b` at detection.
        magnitude: f64,
        mechanism: Mechanism,
        applied: Mechanism,
        funds: FundingSources,
    },
    BankIlliquid {
        bank: usize,
        /// Liquidity gap that could not be raised.
        magnitude: f64,
    },
    RunTerminated {
        reason: String,
        magnitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn is_insolvency(&self) -> bool {
        matches!(self.kind, EventKind::BankInsolvency { .. })
    }

    /// `M_b` for insolvency events.
    pub fn negative_equity(&self) -> Option<f64> {
        match self.kind {
            EventKind::BankInsolvency { magnitude, .. } => Some(magnitude),
            _ => None,
        }
    }
}

/// Writes events as JSON lines.
pub fn write_json_lines<W: Write>(mut out: W, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
