//! Agent-based macro-financial simulator with households, firms and banks,
//! and three ways of resolving failed banks: purchase & assumption, bail-out
//! and bail-in.
//!
//! The engine is generic over the scalar type `S: Real` (`f64` or `f32`).
//! The aliases at the crate root fix it to `f64`, which every experiment in
//! this crate uses.

pub mod banking;
pub mod config;
pub mod economy;
pub mod emit;
pub mod error;
pub mod events;
pub mod experiment;
pub mod firm;
pub mod markets;
pub mod metrics;
pub mod num;
pub mod params;
pub mod resolution;
pub mod scenario;
pub mod scheduler;
pub mod stats;

pub use economy::{Account, BankId, FirmId, HouseholdId, Owner};
pub use error::{ConfigError, EmitError, LedgerError, ResolutionError, StatsError};
pub use events::{Event, EventKind};
pub use num::Real;
pub use params::{Mechanism, Setting, ShortfallPolicy};

pub type Economy = economy::EconomyState<f64>;
pub type Params = params::Parameters<f64>;
pub type Run = params::RunConfig<f64>;
pub type Row = metrics::MetricsRow<f64>;
pub type Output = scheduler::RunOutput<f64>;
