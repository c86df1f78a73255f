//! Per-step observables, interest regimes and stylized-fact statistics.

use serde::{Deserialize, Serialize};

use crate::banking::nominal_rate;
use crate::economy::EconomyState;
use crate::error::StatsError;
use crate::events::Event;
use crate::num::{fixed9, Real};
use crate::stats::{ols, OlsFit};

/// Observables recorded at the end of a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow<S: Real> {
    pub t: u64,
    /// Value of goods produced this step.
    pub output: S,
    /// Unemployed share of workers.
    pub unemployment: S,
    pub inflation: S,
    /// Outstanding firm-loan principal.
    pub credit_volume: S,
    pub nominal_rate: S,
    pub n_banks: usize,
    /// `M_b` of every insolvency resolved this step.
    pub insolvencies: Vec<S>,
    pub avg_price: S,
}

impl<S: Real> MetricsRow<S> {
    pub const CSV_HEADER: &'static str = "t,Y,U,pi,CV,i_n,n_banks,n_insolvencies,M_b_sum,p_bar";

    /// One CSV line with fixed 9-decimal formatting.
    pub fn csv_row(&self) -> String {
        let m_sum: f64 = self.insolvencies.iter().map(|m| m.as_f64()).sum();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.t,
            fixed9(self.output.as_f64()),
            fixed9(self.unemployment.as_f64()),
            fixed9(self.inflation.as_f64()),
            fixed9(self.credit_volume.as_f64()),
            fixed9(self.nominal_rate.as_f64()),
            self.n_banks,
            self.insolvencies.len(),
            fixed9(m_sum),
            fixed9(self.avg_price.as_f64()),
        )
    }
}

/// Reads off the observables of a completed step. `avg_price_prev` must
/// still hold the previous step's average price.
pub fn snapshot<S: Real>(state: &EconomyState<S>, insolvencies: Vec<S>) -> MetricsRow<S> {
    let avg_price = state.average_price();
    let inflation = if state.avg_price_prev > S::zero() {
        avg_price / state.avg_price_prev - S::one()
    } else {
        S::zero()
    };
    let output = state.firms.iter().map(|f| f.produced_last_step * f.price).sum();
    let workers = S::from_usize_lossy(state.params.n_workers);
    let employed = S::from_usize_lossy(state.employed_count());
    MetricsRow {
        t: state.t,
        output,
        unemployment: (S::one() - employed / workers).max(S::zero()),
        inflation,
        credit_volume: state.credit_volume(),
        nominal_rate: nominal_rate(state),
        n_banks: state.n_active_banks(),
        insolvencies,
        avg_price,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    Low,
    Critical,
    High,
}

/// Places the market rate relative to the contraction threshold `r_max + pi`.
pub fn classify_regime<S: Real>(nominal_rate: S, inflation: S, r_max: S, tolerance: S) -> RegimeLabel {
    let threshold = r_max + inflation;
    if nominal_rate < threshold - tolerance {
        RegimeLabel::Low
    } else if nominal_rate > threshold + tolerance {
        RegimeLabel::High
    } else {
        RegimeLabel::Critical
    }
}

/// Mean `M_b` over the insolvency events in `events`; 0 without events.
pub fn mean_negative_equity<'a>(events: impl IntoIterator<Item = &'a Event>) -> f64 {
    let (sum, n) = events
        .into_iter()
        .filter_map(Event::negative_equity)
        .fold((0.0, 0usize), |(s, n), m| (s + m, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Minimum window for the Okun and Phillips regressions.
pub const MIN_REGRESSION_WINDOW: usize = 50;

/// Okun: `dY` regressed on `dU`. Phillips: `pi` regressed on `U`.
pub fn okun_phillips_slopes<S: Real>(rows: &[MetricsRow<S>]) -> Result<(OlsFit, OlsFit), StatsError> {
    if rows.len() < MIN_REGRESSION_WINDOW {
        return Err(StatsError::InsufficientSample { needed: MIN_REGRESSION_WINDOW, got: rows.len() });
    }
    let u: Vec<f64> = rows.iter().map(|r| r.unemployment.as_f64()).collect();
    if u.iter().all(|&x| x == u[0]) {
        return Err(StatsError::DegenerateSample("unemployment is constant"));
    }
    let y: Vec<f64> = rows.iter().map(|r| r.output.as_f64()).collect();
    let pi: Vec<f64> = rows.iter().map(|r| r.inflation.as_f64()).collect();
    let du: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let okun = ols(&du, &dy)?;
    let phillips = ols(&u, &pi)?;
    Ok((okun, phillips))
}
