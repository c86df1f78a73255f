//! Hand-built single-failure ledgers shared by the oracle tests and the
//! acceptance run.
#![allow(dead_code)]

use crisis_abm::economy::{Account, BankId, EconomyState, FirmId, HouseholdId};
use crisis_abm::params::Parameters;

pub const FAILED: BankId = BankId(0);

/// Three banks. Bank 0 lends 80 to firm 0 and owes deposits of 50, 30 and
/// 20 to households 0, 1 and 2. Banks 1 and 2 hold reserves equal to the
/// given equities and lend `claims[k]` to bank 0 on the interbank market.
/// Bank 0's reserves are chosen so that its equity is `-m_b`.
pub fn single_failure(m_b: f64, healthy: [f64; 2], claims: [f64; 2]) -> EconomyState<f64> {
    let mut p = Parameters::<f64>::default();
    p.n_banks = 3;
    p.n_firms = 2;
    p.n_workers = 3;
    let mut st = EconomyState::new(p, 5);
    st.clear_positions();
    for a in st.accounts().collect::<Vec<_>>() {
        st.set_house_bank(a, BankId(1));
    }
    for (h, bal) in [(0, 50.0), (1, 30.0), (2, 20.0)] {
        let a = Account::Household(HouseholdId(h));
        st.set_house_bank(a, FAILED);
        st.set_balance(a, bal);
    }
    st.add_firm_loan(FirmId(0), FAILED, 80.0, 0.02);
    let owed: f64 = claims.iter().sum();
    for (k, &c) in claims.iter().enumerate() {
        if c > 0.0 {
            st.add_interbank_loan(BankId(k + 1), FAILED, c, 0.0);
        }
    }
    // equity = cash + 80 - 100 - owed
    st.set_reserves(FAILED, 20.0 + owed - m_b);
    for (k, &e) in healthy.iter().enumerate() {
        st.set_reserves(BankId(k + 1), e - claims[k]);
    }
    st.restate_equities();
    st.rebase_cash();
    st
}

/// Bank 0 with loans 80, reserves 5 and deposits 100: `M_b = 15`.
pub fn pa_scenario() -> EconomyState<f64> {
    single_failure(15.0, [30.0, 10.0], [0.0, 0.0])
}

pub fn deposit(st: &EconomyState<f64>, h: usize) -> f64 {
    st.household(HouseholdId(h)).deposit
}
