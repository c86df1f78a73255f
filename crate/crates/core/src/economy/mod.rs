//! World state, agents, and the deposit ledger every other module builds on.
//!
//! All money lives in deposit accounts (household personal accounts and firm
//! cash) or in bank reserves. Paying from an account held at one bank into an
//! account at another bank moves the matching reserves, so every bank's
//! balance sheet stays consistent and the sum of reserves never changes.

mod ledger;

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::events::{Event, EventKind};
use crate::num::Real;
use crate::params::Parameters;

pub use ledger::{check_bank_identity, IdentityCheck};

/// Run RNG; a portable stream so seeds replay on every platform.
pub type SimRng = ChaCha8Rng;

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(BankId, "bank#");
id_type!(FirmId, "firm#");
id_type!(HouseholdId, "hh#");

/// A deposit account: a household's personal account or a firm's cash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Account {
    Household(HouseholdId),
    Firm(FirmId),
}

/// Holder of an ownership share in a bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Owner {
    Household(HouseholdId),
    Firm(FirmId),
    Bank(BankId),
}

impl From<Account> for Owner {
    fn from(a: Account) -> Self {
        match a {
            Account::Household(h) => Owner::Household(h),
            Account::Firm(f) => Owner::Firm(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HouseholdKind {
    Worker,
    FirmOwner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Borrower {
    Firm(FirmId),
    Bank(BankId),
}

/// A credit contract. Stored with its borrower; one record per lender, with
/// later draws merged in at the volume-weighted rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loan<S: Real> {
    pub lender: BankId,
    pub principal: S,
    /// Per-step interest rate.
    pub rate: S,
}

impl<S: Real> Loan<S> {
    /// Adds a draw to this contract. Interest on the merged record equals the
    /// sum of interest on the two parts.
    pub fn merge(&mut self, principal: S, rate: S) {
        let total = self.principal + principal;
        if total > S::zero() {
            self.rate = (self.rate * self.principal + rate * principal) / total;
        }
        self.principal = total;
    }
}

/// Adds `principal` at `rate` from `lender` into a borrower's loan list.
pub(crate) fn book_loan<S: Real>(loans: &mut Vec<Loan<S>>, lender: BankId, principal: S, rate: S) {
    match loans.iter_mut().find(|l| l.lender == lender) {
        Some(l) => l.merge(principal, rate),
        None => loans.push(Loan { lender, principal, rate }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Household<S: Real> {
    pub id: HouseholdId,
    pub kind: HouseholdKind,
    pub house_bank: BankId,
    pub deposit: S,
    pub employed_at: Option<FirmId>,
    pub owned_firm: Option<FirmId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Firm<S: Real> {
    pub id: FirmId,
    pub owner: HouseholdId,
    pub house_bank: BankId,
    pub cash: S,
    pub price: S,
    pub expected_demand: S,
    pub inventory: S,
    pub workforce: Vec<HouseholdId>,
    pub loans: Vec<Loan<S>>,
    pub sold_last_step: S,
    pub produced_last_step: S,
    /// Inventory was exhausted in the last goods market.
    pub sold_all: bool,
    /// Sales fell short of expected demand in the last goods market.
    pub demand_short: bool,
    pub revenue: S,
    pub wage_bill: S,
}

impl<S: Real> Firm<S> {
    pub fn debt(&self) -> S {
        self.loans.iter().map(|l| l.principal).sum()
    }

    /// Interest falling due on the current loan book.
    pub fn interest_due(&self) -> S {
        self.loans.iter().map(|l| l.rate * l.principal).sum()
    }

    /// Size measure for rank-size statistics: cash plus stock at own price.
    pub fn size(&self) -> S {
        self.cash + self.inventory * self.price
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bank<S: Real> {
    pub id: BankId,
    pub active: bool,
    /// Reserves.
    pub cash: S,
    /// Sum of deposits of households and firms banking here.
    pub deposits: S,
    /// Sum of principal lent to firms.
    pub firm_loans: S,
    /// Sum of principal lent to other banks.
    pub interbank_assets: S,
    /// Borrowing from other banks.
    pub interbank_liabilities: Vec<Loan<S>>,
    pub equity: S,
    pub ownership: BTreeMap<Owner, S>,
    /// Profit accumulated during the current step.
    pub profit: S,
}

impl<S: Real> Bank<S> {
    pub fn interbank_liability_total(&self) -> S {
        self.interbank_liabilities.iter().map(|l| l.principal).sum()
    }

    /// Loan assets used for the leverage constraint.
    pub fn loan_assets(&self) -> S {
        self.firm_loans + self.interbank_assets
    }

    pub fn total_assets(&self) -> S {
        self.cash + self.firm_loans + self.interbank_assets
    }

    /// Equity implied by the other balance sheet entries.
    pub fn derived_equity(&self) -> S {
        self.cash + self.firm_loans + self.interbank_assets
            - self.deposits
            - self.interbank_liability_total()
    }

    pub fn ownership_total(&self) -> S {
        self.ownership.values().copied().sum()
    }
}

/// Complete world state of one run.
#[derive(Debug, Clone)]
pub struct EconomyState<S: Real> {
    pub t: u64,
    pub params: Parameters<S>,
    pub banks: Vec<Bank<S>>,
    pub firms: Vec<Firm<S>>,
    pub households: Vec<Household<S>>,
    /// Demand-weighted average price of the previous step.
    pub avg_price_prev: S,
    /// Inflation of the previous step.
    pub inflation_prev: S,
    pub rng: SimRng,
    pub events: Vec<Event>,
    initial_cash: S,
}

impl<S: Real> EconomyState<S> {
    /// Builds the t = 0 economy.
    ///
    /// Workers and owners start with one wage in their account, each firm
    /// with its share of a full-employment wage bill, and each bank with its
    /// start equity held as reserves. Prices start at unit labor cost plus a
    /// markup drawn from U(0, 0.1); expected demand at the full-employment
    /// output share. House banks are drawn uniformly.
    pub fn new(params: Parameters<S>, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        let n_banks = params.n_banks;
        let n_firms = params.n_firms;
        let n_workers = params.n_workers;
        let wage = params.wage;

        let mut banks: Vec<Bank<S>> = (0..n_banks)
            .map(|b| Bank {
                id: BankId(b),
                active: true,
                cash: params.bank_equity0,
                deposits: S::zero(),
                firm_loans: S::zero(),
                interbank_assets: S::zero(),
                interbank_liabilities: Vec::new(),
                equity: params.bank_equity0,
                ownership: BTreeMap::new(),
                profit: S::zero(),
            })
            .collect();

        let mut households = Vec::with_capacity(n_workers + n_firms);
        for j in 0..n_workers + n_firms {
            let bank = BankId(rng.gen_range(0..n_banks));
            let (kind, owned_firm) = if j < n_workers {
                (HouseholdKind::Worker, None)
            } else {
                (HouseholdKind::FirmOwner, Some(FirmId(j - n_workers)))
            };
            households.push(Household {
                id: HouseholdId(j),
                kind,
                house_bank: bank,
                deposit: wage,
                employed_at: None,
                owned_firm,
            });
            banks[bank.0].cash += wage;
            banks[bank.0].deposits += wage;
        }

        let n_workers_s = S::from_usize_lossy(n_workers);
        let n_firms_s = S::from_usize_lossy(n_firms);
        let firm_cash = wage * n_workers_s / n_firms_s;
        let demand0 = n_workers_s * params.alpha / n_firms_s;
        let ulc = params.unit_labor_cost();
        let mut firms = Vec::with_capacity(n_firms);
        for i in 0..n_firms {
            let bank = BankId(rng.gen_range(0..n_banks));
            let markup = S::lit(rng.gen::<f64>() * 0.1);
            firms.push(Firm {
                id: FirmId(i),
                owner: HouseholdId(n_workers + i),
                house_bank: bank,
                cash: firm_cash,
                price: ulc * (S::one() + markup),
                expected_demand: demand0,
                inventory: S::zero(),
                workforce: Vec::new(),
                loans: Vec::new(),
                sold_last_step: S::zero(),
                produced_last_step: S::zero(),
                sold_all: false,
                demand_short: false,
                revenue: S::zero(),
                wage_bill: S::zero(),
            });
            banks[bank.0].cash += firm_cash;
            banks[bank.0].deposits += firm_cash;
        }

        // Firm owners are the initial shareholders of every bank.
        let share = S::one() / n_firms_s;
        for bank in &mut banks {
            for i in 0..n_firms {
                bank.ownership.insert(Owner::Household(HouseholdId(n_workers + i)), share);
            }
        }

        let mut state = Self {
            t: 0,
            params,
            banks,
            firms,
            households,
            avg_price_prev: S::zero(),
            inflation_prev: S::zero(),
            rng,
            events: Vec::new(),
            initial_cash: S::zero(),
        };
        state.avg_price_prev = state.average_price();
        state.initial_cash = state.total_cash();
        state
    }

    /// Reserves held at t = 0.
    pub fn initial_cash(&self) -> S {
        self.initial_cash
    }

    pub(crate) fn set_initial_cash(&mut self, cash: S) {
        self.initial_cash = cash;
    }

    pub fn active_banks(&self) -> impl Iterator<Item = &Bank<S>> {
        self.banks.iter().filter(|b| b.active)
    }

    pub fn active_bank_ids(&self) -> Vec<BankId> {
        self.active_banks().map(|b| b.id).collect()
    }

    pub fn n_active_banks(&self) -> usize {
        self.active_banks().count()
    }

    pub fn bank(&self, id: BankId) -> &Bank<S> {
        &self.banks[id.0]
    }

    pub fn bank_mut(&mut self, id: BankId) -> &mut Bank<S> {
        &mut self.banks[id.0]
    }

    pub fn firm(&self, id: FirmId) -> &Firm<S> {
        &self.firms[id.0]
    }

    pub fn household(&self, id: HouseholdId) -> &Household<S> {
        &self.households[id.0]
    }

    /// Demand-weighted average price over all firms.
    pub fn average_price(&self) -> S {
        let (num, den) = self
            .firms
            .iter()
            .fold((S::zero(), S::zero()), |(n, d), f| (n + f.price * f.expected_demand, d + f.expected_demand));
        if den > S::zero() {
            num / den
        } else if self.firms.is_empty() {
            S::zero()
        } else {
            self.firms.iter().map(|f| f.price).sum::<S>() / S::from_usize_lossy(self.firms.len())
        }
    }

    /// All deposit accounts, households first, in id order.
    pub fn accounts(&self) -> impl Iterator<Item = Account> + '_ {
        self.households
            .iter()
            .map(|h| Account::Household(h.id))
            .chain(self.firms.iter().map(|f| Account::Firm(f.id)))
    }

    pub fn employed_count(&self) -> usize {
        self.firms.iter().map(|f| f.workforce.len()).sum()
    }

    /// Sum of all firm-loan principal.
    pub fn credit_volume(&self) -> S {
        self.firms.iter().map(|f| f.debt()).sum()
    }

    pub fn log(&mut self, kind: EventKind) {
        self.events.push(Event { step: self.t, kind });
    }

    /// Uniform draw in [0, 1) from the run stream.
    pub fn uniform(&mut self) -> S {
        S::lit(self.rng.gen::<f64>())
    }

    /// Uniform draw of `k` distinct elements of `pool`, in draw order.
    pub fn sample_distinct<T: Copy>(&mut self, pool: &[T], k: usize) -> Vec<T> {
        let k = k.min(pool.len());
        rand::seq::index::sample(&mut self.rng, pool.len(), k)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    }

    /// Fisher-Yates shuffle from the run stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Parameters;

    #[test]
    fn initial_state_matches_construction_rules() {
        let p = Parameters::<f64>::default();
        let st = EconomyState::new(p.clone(), 7);
        let deposits: f64 = st.households.iter().map(|h| h.deposit).sum::<f64>()
            + st.firms.iter().map(|f| f.cash).sum::<f64>();
        let equity: f64 = st.banks.iter().map(|b| b.equity).sum();
        assert!((deposits - (800.0 + 700.0)).abs() < 1e-9);
        assert!((equity - 200.0).abs() < 1e-12);
        assert!((st.total_cash() - (deposits + equity)).abs() < 1e-9);
        for f in &st.firms {
            assert!(f.price >= 10.0 && f.price < 11.0);
            assert!((f.expected_demand - 0.7).abs() < 1e-12);
        }
        for b in &st.banks {
            assert!(check_bank_identity(b).pass);
            assert!((b.ownership_total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn merged_loan_keeps_interest() {
        let mut l = Loan { lender: BankId(0), principal: 100.0f64, rate: 0.02 };
        l.merge(300.0, 0.04);
        assert!((l.principal - 400.0).abs() < 1e-12);
        assert!((l.rate * l.principal - (2.0 + 12.0)).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_world() {
        let a = EconomyState::new(Parameters::<f64>::default(), 3);
        let b = EconomyState::new(Parameters::<f64>::default(), 3);
        assert_eq!(a.firms, b.firms);
        assert_eq!(a.households, b.households);
    }
}
