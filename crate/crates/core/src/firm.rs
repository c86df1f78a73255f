//! Firm behavior: expectations, production, dividends, default and respawn.

use serde::{Deserialize, Serialize};

use crate::economy::{Account, BankId, EconomyState, FirmId};
use crate::events::EventKind;
use crate::num::{snap, Real};

/// What the last goods market told a firm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExpectationSignal {
    pub sold_all: bool,
    pub demand_short: bool,
}

/// A firm's price and expected demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations<S> {
    pub price: S,
    pub demand: S,
}

/// Adjusts price or expected demand after the last market outcome.
///
/// A sold-out firm raises its price if it was cheaper than average and its
/// expected demand otherwise. A firm that sold less than expected cuts its
/// price if it was dearer than average and its expected demand otherwise.
/// Changes are multiplicative with size `eta * shock`; cuts stop at
/// `price_floor` and `demand_floor`.
pub fn update_expectations<S: Real>(
    current: Expectations<S>,
    avg_price: S,
    signal: ExpectationSignal,
    shock: S,
    eta: S,
    price_floor: S,
    demand_floor: S,
) -> Expectations<S> {
    let Expectations { price, demand } = current;
    let up = S::one() + eta * shock;
    let down = S::one() - eta * shock;
    if signal.sold_all {
        if price < avg_price {
            Expectations { price: price * up, demand }
        } else {
            Expectations { price, demand: demand * up }
        }
    } else if signal.demand_short {
        if price > avg_price {
            Expectations { price: (price * down).max(price_floor.min(price)), demand }
        } else {
            Expectations { price, demand: (demand * down).max(demand_floor.min(demand)) }
        }
    } else {
        current
    }
}

/// Workers needed to produce the expected demand.
pub fn desired_workforce<S: Real>(expected_demand: S, alpha: S) -> usize {
    if expected_demand <= S::zero() {
        return 0;
    }
    // shave float noise so that 0.7 / 0.1 stays 7
    let q = (expected_demand / alpha - S::lit(1e-9)).ceil();
    q.max(S::zero()).to_usize().unwrap_or(usize::MAX)
}

/// Adds this step's output to inventory and returns it.
pub fn produce<S: Real>(state: &mut EconomyState<S>, firm: FirmId) -> S {
    let alpha = state.params.alpha;
    let f = &mut state.firms[firm.0];
    let goods = alpha * S::from_usize_lossy(f.workforce.len());
    f.inventory += goods;
    f.produced_last_step = goods;
    goods
}

/// Profit of the current step: revenue less wages less interest due.
pub fn firm_profit<S: Real>(state: &EconomyState<S>, firm: FirmId) -> S {
    let f = &state.firms[firm.0];
    f.revenue - f.wage_bill - f.interest_due()
}

/// Pays `delta` of a positive profit to the owner. Returns the payout.
pub fn firm_dividends<S: Real>(state: &mut EconomyState<S>, firm: FirmId, profit: S, delta: S) -> S {
    if profit <= S::zero() {
        return S::zero();
    }
    let f = &state.firms[firm.0];
    let payout = (delta * profit).min(f.cash);
    if payout <= S::zero() {
        return S::zero();
    }
    let owner = Account::Household(f.owner);
    state
        .transfer(Account::Firm(firm), owner, payout)
        .expect("dividend is capped at firm cash")
}

/// Cash short of the debt service falling due this step.
pub fn liquidity_gap<S: Real>(state: &EconomyState<S>, firm: FirmId) -> S {
    let f = &state.firms[firm.0];
    let due = state.params.tau * f.debt() + f.interest_due();
    snap(due - f.cash).max(S::zero())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankruptcyReport<S: Real> {
    pub firm: FirmId,
    pub debt: S,
    /// Per lender: (bank, recovered, written off).
    pub lenders: Vec<(BankId, S, S)>,
}

impl<S: Real> BankruptcyReport<S> {
    pub fn recovered(&self) -> S {
        self.lenders.iter().map(|l| l.1).sum()
    }

    pub fn written_off(&self) -> S {
        self.lenders.iter().map(|l| l.2).sum()
    }
}

/// Owner covers a liquidity gap if the personal account allows it; otherwise
/// the firm defaults. Returns the default report, if any.
pub fn settle_liquidity<S: Real>(state: &mut EconomyState<S>, firm: FirmId) -> Option<BankruptcyReport<S>> {
    let gap = liquidity_gap(state, firm);
    if gap <= S::zero() {
        return None;
    }
    let owner = Account::Household(state.firms[firm.0].owner);
    let wealth = state.balance(owner).expect("owner exists");
    if wealth >= gap {
        state.transfer(owner, Account::Firm(firm), gap).expect("covered by owner");
        return None;
    }
    let report = resolve_firm_bankruptcy(state, firm);
    respawn_firm(state, firm);
    Some(report)
}

/// Liquidates a failed firm. Its remaining cash and the owner's whole
/// personal account go to the lenders pro rata to outstanding principal;
/// unpaid principal is written off against lender equity.
pub fn resolve_firm_bankruptcy<S: Real>(state: &mut EconomyState<S>, firm: FirmId) -> BankruptcyReport<S> {
    let fa = Account::Firm(firm);
    let owner = Account::Household(state.firms[firm.0].owner);
    let owner_wealth = state.balance(owner).expect("owner exists");
    state.transfer(owner, fa, owner_wealth).expect("full balance");

    let loans = std::mem::take(&mut state.firms[firm.0].loans);
    let debt: S = loans.iter().map(|l| l.principal).sum();
    let pool = state.firms[firm.0].cash.min(debt);
    let mut lenders = Vec::with_capacity(loans.len());
    for loan in &loans {
        let recovered = if debt > S::zero() { pool * loan.principal / debt } else { S::zero() };
        let recovered = state.pay_to_bank(fa, loan.lender, recovered).expect("pool within firm cash");
        let written_off = loan.principal - recovered;
        let bank = state.bank_mut(loan.lender);
        bank.firm_loans -= loan.principal;
        bank.equity -= written_off;
        bank.profit -= written_off;
        lenders.push((loan.lender, recovered, written_off));
    }

    // anything left over returns to the owner
    let rest = state.firms[firm.0].cash;
    if rest > S::zero() {
        state.transfer(fa, owner, rest).expect("full balance");
    }

    let workers = std::mem::take(&mut state.firms[firm.0].workforce);
    for w in workers {
        state.households[w.0].employed_at = None;
    }

    let report = BankruptcyReport { firm, debt, lenders };
    state.log(EventKind::FirmBankruptcy {
        firm: firm.0,
        magnitude: debt.as_f64(),
        recovered: report.recovered().as_f64(),
        written_off: report.written_off().as_f64(),
    });
    report
}

/// Restarts a liquidated firm with the population mean price and expected
/// demand, taken over all other firms. A lone firm keeps its own values.
/// The new firm has no cash, debt, stock or staff.
pub fn respawn_firm<S: Real>(state: &mut EconomyState<S>, firm: FirmId) {
    let others = state.firms.len() - 1;
    let (price, demand) = if others == 0 {
        let f = &state.firms[firm.0];
        (f.price, f.expected_demand)
    } else {
        let (p, d) = state
            .firms
            .iter()
            .filter(|f| f.id != firm)
            .fold((S::zero(), S::zero()), |(p, d), f| (p + f.price, d + f.expected_demand));
        let n = S::from_usize_lossy(others);
        (p / n, d / n)
    };
    let f = &mut state.firms[firm.0];
    debug_assert!(f.cash == S::zero() && f.loans.is_empty());
    f.price = price;
    f.expected_demand = demand;
    f.inventory = S::zero();
    f.workforce.clear();
    f.sold_last_step = S::zero();
    f.produced_last_step = S::zero();
    f.sold_all = false;
    f.demand_short = false;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economy::{book_loan, HouseholdId};
    use crate::params::Parameters;

    const FLOOR_P: f64 = 10.0;
    const FLOOR_D: f64 = 0.1;

    fn upd(price: f64, demand: f64, avg: f64, sold_all: bool, short: bool, shock: f64) -> Expectations<f64> {
        update_expectations(
            Expectations { price, demand },
            avg,
            ExpectationSignal { sold_all, demand_short: short },
            shock,
            0.1,
            FLOOR_P,
            FLOOR_D,
        )
    }

    #[test]
    fn sold_out_cheap_firm_raises_price() {
        let e = upd(9.0, 0.7, 10.0, true, false, 0.5);
        assert!((e.price - 9.45).abs() < 1e-12);
        assert_eq!(e.demand, 0.7);
    }

    #[test]
    fn sold_out_dear_firm_raises_demand() {
        let e = upd(10.0, 0.7, 10.0, true, false, 0.5);
        assert_eq!(e.price, 10.0);
        assert!((e.demand - 0.735).abs() < 1e-12);
    }

    #[test]
    fn short_firm_at_average_cuts_demand() {
        let e = upd(10.0, 0.7, 10.0, false, true, 1.0);
        assert!((e.demand - 0.63).abs() < 1e-12);
        assert_eq!(e.price, 10.0);
    }

    #[test]
    fn short_dear_firm_cuts_price_to_floor() {
        let e = upd(10.5, 0.7, 10.0, false, true, 1.0);
        assert_eq!(e.price, FLOOR_P);
        let e = upd(12.0, 0.7, 10.0, false, true, 0.5);
        assert!((e.price - 11.4).abs() < 1e-12);
    }

    #[test]
    fn demand_floor_holds() {
        let e = upd(10.0, 0.105, 10.0, false, true, 1.0);
        assert_eq!(e.demand, FLOOR_D);
    }

    #[test]
    fn zero_shock_changes_nothing() {
        for (sa, ds) in [(true, false), (false, true), (false, false)] {
            for p in [9.0, 10.0, 11.0] {
                let e = upd(p, 0.7, 10.0, sa, ds, 0.0);
                assert_eq!((e.price, e.demand), (p, 0.7));
            }
        }
    }

    #[test]
    fn workforce_is_ceiling() {
        assert_eq!(desired_workforce(0.7, 0.1), 7);
        assert_eq!(desired_workforce(0.71, 0.1), 8);
        assert_eq!(desired_workforce(0.0, 0.1), 0);
        assert_eq!(desired_workforce(0.3, 0.1), 3);
    }

    fn tiny_state() -> EconomyState<f64> {
        let mut p = Parameters::<f64>::default();
        p.n_banks = 2;
        p.n_firms = 3;
        p.n_workers = 10;
        EconomyState::new(p, 11)
    }

    #[test]
    fn production_accumulates_unsold_stock() {
        let mut st = tiny_state();
        st.firms[0].workforce = (0..7).map(HouseholdId).collect();
        assert!((produce(&mut st, FirmId(0)) - 0.7).abs() < 1e-12);
        assert!((produce(&mut st, FirmId(0)) - 0.7).abs() < 1e-12);
        assert!((st.firms[0].inventory - 1.4).abs() < 1e-12);
        st.firms[1].workforce.clear();
        assert_eq!(produce(&mut st, FirmId(1)), 0.0);
    }

    #[test]
    fn dividends_follow_profit_sign() {
        let mut st = tiny_state();
        let owner = st.firms[0].owner;
        st.set_balance(Account::Firm(FirmId(0)), 20.0);
        st.restate_equities();
        let before = st.households[owner.0].deposit;
        assert_eq!(firm_dividends(&mut st, FirmId(0), 10.0, 0.25), 2.5);
        assert!((st.households[owner.0].deposit - before - 2.5).abs() < 1e-12);
        assert!((st.firms[0].cash - 17.5).abs() < 1e-12);
        assert_eq!(firm_dividends(&mut st, FirmId(0), -3.0, 0.25), 0.0);
        assert_eq!(firm_dividends(&mut st, FirmId(0), 10.0, 0.5), 5.0);
        assert!(st.audit().is_ok());
    }

    /// Gives firm 0 a 60/40 loan book across both banks and zero cash.
    fn indebted(owner_deposit: f64) -> EconomyState<f64> {
        let mut st = tiny_state();
        for (b, p) in [(0, 60.0), (1, 40.0)] {
            book_loan(&mut st.firms[0].loans, BankId(b), p, 0.0);
            st.banks[b].firm_loans += p;
            st.banks[b].equity += p;
        }
        let hb = st.firms[0].house_bank;
        let cash = st.firms[0].cash;
        st.firms[0].cash = 0.0;
        st.banks[hb.0].deposits -= cash;
        st.banks[hb.0].equity += cash;
        let owner = st.firms[0].owner;
        let ob = st.households[owner.0].house_bank;
        let dep = st.households[owner.0].deposit;
        st.households[owner.0].deposit = owner_deposit;
        st.banks[ob.0].deposits += owner_deposit - dep;
        st.banks[ob.0].cash += owner_deposit - dep;
        assert!(st.audit().is_ok());
        st
    }

    #[test]
    fn bankruptcy_splits_owner_wealth_pro_rata() {
        let mut st = indebted(10.0);
        let cash0 = st.total_cash();
        let eq0: Vec<f64> = st.banks.iter().map(|b| b.equity).collect();
        let r = resolve_firm_bankruptcy(&mut st, FirmId(0));
        assert_eq!(r.lenders.len(), 2);
        assert!((r.lenders[0].1 - 6.0).abs() < 1e-12 && (r.lenders[0].2 - 54.0).abs() < 1e-12);
        assert!((r.lenders[1].1 - 4.0).abs() < 1e-12 && (r.lenders[1].2 - 36.0).abs() < 1e-12);
        assert!((st.banks[0].equity - (eq0[0] - 54.0)).abs() < 1e-12);
        assert!((st.banks[1].equity - (eq0[1] - 36.0)).abs() < 1e-12);
        assert_eq!(st.households[st.firms[0].owner.0].deposit, 0.0);
        assert!((st.total_cash() - cash0).abs() < 1e-12);
        assert!(st.audit().is_ok());
    }

    #[test]
    fn bankruptcy_without_owner_wealth_writes_off_everything() {
        let mut st = indebted(0.0);
        let r = resolve_firm_bankruptcy(&mut st, FirmId(0));
        assert_eq!((r.lenders[0].2, r.lenders[1].2), (60.0, 40.0));
        assert_eq!(r.recovered(), 0.0);
        assert!(st.audit().is_ok());
    }

    #[test]
    fn owner_covers_gap_when_rich_enough() {
        let mut st = indebted(10.0);
        // debt service = 5% of 100 = 5 <= 10
        assert!(settle_liquidity(&mut st, FirmId(0)).is_none());
        assert!((st.firms[0].cash - 5.0).abs() < 1e-12);
        assert!((st.households[st.firms[0].owner.0].deposit - 5.0).abs() < 1e-12);
        assert!(st.audit().is_ok());
    }

    #[test]
    fn poor_owner_means_default_and_respawn() {
        let mut st = indebted(2.0);
        let r = settle_liquidity(&mut st, FirmId(0)).expect("defaults");
        assert!((r.recovered() - 2.0).abs() < 1e-12);
        assert!(st.firms[0].loans.is_empty());
        assert_eq!(st.firms[0].cash, 0.0);
        assert_eq!(st.firms.len(), 3);
        assert!(st.audit().is_ok());
    }

    #[test]
    fn respawn_uses_means_of_the_other_firms() {
        let mut st = tiny_state();
        let vals = [(99.0, 5.0), (10.0, 0.6), (10.4, 0.7)];
        for (f, (p, d)) in st.firms.iter_mut().zip(vals) {
            f.price = p;
            f.expected_demand = d;
        }
        let hb = st.firms[0].house_bank;
        let c = st.firms[0].cash;
        st.firms[0].cash = 0.0;
        st.banks[hb.0].deposits -= c;
        respawn_firm(&mut st, FirmId(0));
        assert!((st.firms[0].price - 10.2).abs() < 1e-12);
        assert!((st.firms[0].expected_demand - 0.65).abs() < 1e-12);
    }

    #[test]
    fn lone_firm_respawns_with_own_values() {
        let mut p = Parameters::<f64>::default();
        p.n_banks = 2;
        p.n_firms = 1;
        p.n_workers = 3;
        let mut st = EconomyState::new(p, 1);
        st.firms[0].price = 10.7;
        st.firms[0].expected_demand = 0.4;
        st.firms[0].cash = 0.0;
        respawn_firm(&mut st, FirmId(0));
        assert_eq!((st.firms[0].price, st.firms[0].expected_demand), (10.7, 0.4));
    }
}
