//! The seven-phase time step and the run loop.
//!
//! Phase order within a step:
//!
//! 1. firms update price or expected demand
//! 2. credit market, with interbank raising by cash-short lenders
//! 3. job market, wages and production
//! 4. goods market
//! 5. firm dividends, then liquidity checks and bankruptcies
//! 6. firm loan repayments, bank interbank repayments, bank dividends
//! 7. illiquid banks seek interbank funds, insolvent banks are resolved
//!
//! All randomness comes from the state's single stream, drawn in this order.

use serde::{Deserialize, Serialize};

use crate::banking::{bank_dividends, raise_interbank, repay_firm_loans, repay_interbank_loans};
use crate::economy::{BankId, EconomyState, FirmId};
use crate::error::ConfigError;
use crate::events::{Event, EventKind};
use crate::firm::{firm_dividends, firm_profit, settle_liquidity, update_expectations, ExpectationSignal, Expectations};
use crate::markets::{credit_market, goods_market, job_market};
use crate::metrics::{snapshot, MetricsRow};
use crate::num::Real;
use crate::params::{Mechanism, RunConfig};
use crate::resolution::{resolve_insolvencies, ResolutionOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Expectations,
    Credit,
    Labor,
    Goods,
    FirmSettlement,
    Repayment,
    Resolution,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Expectations,
        Phase::Credit,
        Phase::Labor,
        Phase::Goods,
        Phase::FirmSettlement,
        Phase::Repayment,
        Phase::Resolution,
    ];
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Termination {
    /// Reached `t_max`.
    Horizon,
    /// Only one bank is left under purchase & assumption.
    SingleBank,
    /// An insolvent bank had no healthy bank to absorb it.
    NoHealthyBank { bank: usize },
}

/// Result of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<S: Real> {
    pub row: MetricsRow<S>,
    pub collapsed: Option<BankId>,
}

fn phase_expectations<S: Real>(state: &mut EconomyState<S>) {
    let p = &state.params;
    let (eta, floor_p, floor_d) = (p.eta, p.unit_labor_cost(), p.alpha);
    let avg = state.avg_price_prev;
    for i in 0..state.firms.len() {
        // one shock per firm keeps the stream aligned whatever the signal
        let shock = state.uniform();
        let f = &mut state.firms[i];
        let signal = ExpectationSignal { sold_all: f.sold_all, demand_short: f.demand_short };
        let next = update_expectations(
            Expectations { price: f.price, demand: f.expected_demand },
            avg,
            signal,
            shock,
            eta,
            floor_p,
            floor_d,
        );
        f.price = next.price;
        f.expected_demand = next.demand;
    }
}

fn phase_firm_settlement<S: Real>(state: &mut EconomyState<S>) {
    let delta = state.params.delta;
    for i in 0..state.firms.len() {
        let firm = FirmId(i);
        let profit = firm_profit(state, firm);
        firm_dividends(state, firm, profit, delta);
        settle_liquidity(state, firm);
    }
}

fn phase_repayment<S: Real>(state: &mut EconomyState<S>) {
    for i in 0..state.firms.len() {
        repay_firm_loans(state, FirmId(i));
    }
    for b in state.active_bank_ids() {
        repay_interbank_loans(state, b);
    }
    let delta = state.params.delta;
    for b in state.active_bank_ids() {
        bank_dividends(state, b, delta);
    }
}

/// Banks below the reserve requirement try to borrow the gap. A failed
/// attempt is logged and otherwise harmless.
fn phase_liquidity<S: Real>(state: &mut EconomyState<S>) {
    let kappa = state.params.kappa_min;
    for b in state.active_bank_ids() {
        let bank = state.bank(b);
        let gap = kappa * bank.deposits - bank.cash;
        if gap <= S::zero() {
            continue;
        }
        let raised = raise_interbank(state, b, gap);
        if raised < gap {
            state.log(EventKind::BankIlliquid { bank: b.0, magnitude: (gap - raised).as_f64() });
        }
    }
}

/// Advances the economy by one step, calling `observe` after every phase.
pub fn step_observed<S: Real>(
    state: &mut EconomyState<S>,
    r0: S,
    mechanism: Mechanism,
    mut observe: impl FnMut(Phase, &EconomyState<S>),
) -> StepReport<S> {
    state.t += 1;
    for b in &mut state.banks {
        b.profit = S::zero();
    }
    for f in &mut state.firms {
        f.wage_bill = S::zero();
    }

    phase_expectations(state);
    observe(Phase::Expectations, state);
    credit_market(state, r0);
    observe(Phase::Credit, state);
    job_market(state);
    observe(Phase::Labor, state);
    goods_market(state);
    observe(Phase::Goods, state);
    phase_firm_settlement(state);
    observe(Phase::FirmSettlement, state);
    phase_repayment(state);
    observe(Phase::Repayment, state);
    phase_liquidity(state);
    let outcome = resolve_insolvencies(state, mechanism);
    observe(Phase::Resolution, state);

    let collapsed = match &outcome {
        ResolutionOutcome::Collapsed(_, bank) => Some(*bank),
        ResolutionOutcome::Completed(_) => None,
    };
    let m_b: Vec<S> = outcome.events().iter().map(|e| e.negative_equity).collect();
    let row = snapshot(state, m_b);
    state.inflation_prev = row.inflation;
    state.avg_price_prev = row.avg_price;
    StepReport { row, collapsed }
}

pub fn step<S: Real>(state: &mut EconomyState<S>, r0: S, mechanism: Mechanism) -> StepReport<S> {
    step_observed(state, r0, mechanism, |_, _| {})
}

/// A full trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<S: Real> {
    pub rows: Vec<MetricsRow<S>>,
    pub events: Vec<Event>,
    /// Step at which a purchase & assumption run was left with one bank.
    pub t_f: Option<u64>,
    pub termination: Termination,
}

impl<S: Real> RunOutput<S> {
    /// Step of the first bank insolvency, if any.
    pub fn first_crisis(&self) -> Option<u64> {
        self.rows.iter().find(|r| !r.insolvencies.is_empty()).map(|r| r.t)
    }

    pub fn last_step(&self) -> u64 {
        self.rows.last().map(|r| r.t).unwrap_or(0)
    }
}

/// A run in progress. Holds the state so callers can inspect it between
/// steps.
#[derive(Debug, Clone)]
pub struct Simulation<S: Real> {
    pub state: EconomyState<S>,
    pub config: RunConfig<S>,
    rows: Vec<MetricsRow<S>>,
    termination: Option<Termination>,
    t_f: Option<u64>,
}

impl<S: Real> Simulation<S> {
    pub fn new(config: RunConfig<S>) -> Result<Self, ConfigError> {
        config.validate()?;
        let state = EconomyState::new(config.params.clone(), config.seed);
        Ok(Self::from_state(state, config))
    }

    /// Continues from a prepared state, for scripted scenarios.
    pub fn from_state(state: EconomyState<S>, config: RunConfig<S>) -> Self {
        Self { state, config, rows: Vec::new(), termination: None, t_f: None }
    }

    pub fn rows(&self) -> &[MetricsRow<S>] {
        &self.rows
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn is_finished(&self) -> bool {
        self.termination.is_some()
    }

    /// Runs one step unless the run is over. Returns the new row.
    pub fn advance(&mut self) -> Option<&MetricsRow<S>> {
        self.advance_observed(|_, _| {})
    }

    pub fn advance_observed(&mut self, observe: impl FnMut(Phase, &EconomyState<S>)) -> Option<&MetricsRow<S>> {
        if self.termination.is_some() {
            return None;
        }
        let report = step_observed(&mut self.state, self.config.r0, self.config.mechanism, observe);
        let t = report.row.t;
        self.rows.push(report.row);
        if let Some(bank) = report.collapsed {
            self.termination = Some(Termination::NoHealthyBank { bank: bank.0 });
        } else if self.config.mechanism == Mechanism::PurchaseAndAssumption && self.state.n_active_banks() <= 1 {
            self.t_f = Some(t);
            self.termination = Some(Termination::SingleBank);
        } else if t >= self.config.t_max {
            self.termination = Some(Termination::Horizon);
        }
        self.rows.last()
    }

    pub fn run_to_end(mut self) -> RunOutput<S> {
        while self.advance().is_some() {}
        self.finish()
    }

    /// Ends the run where it stands.
    pub fn finish(mut self) -> RunOutput<S> {
        RunOutput {
            rows: self.rows,
            events: std::mem::take(&mut self.state.events),
            t_f: self.t_f,
            termination: self.termination.unwrap_or(Termination::Horizon),
        }
    }
}

/// Runs a configuration from its seeded initial state.
pub fn run<S: Real>(config: &RunConfig<S>) -> Result<RunOutput<S>, ConfigError> {
    Ok(Simulation::new(config.clone())?.run_to_end())
}
