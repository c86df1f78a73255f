//! Hand-built balance sheets for scripted scenarios and tests.
//!
//! These setters bypass the ledger, so they break money conservation on
//! purpose. Finish a setup with [`EconomyState::restate_equities`] and
//! [`EconomyState::rebase_cash`].

use crate::economy::{book_loan, Account, BankId, EconomyState, FirmId};
use crate::num::Real;

impl<S: Real> EconomyState<S> {
    /// Zeroes every balance, loan, reserve and employment relation.
    pub fn clear_positions(&mut self) {
        for h in &mut self.households {
            h.deposit = S::zero();
            h.employed_at = None;
        }
        for f in &mut self.firms {
            f.cash = S::zero();
            f.loans.clear();
            f.workforce.clear();
            f.inventory = S::zero();
        }
        for b in &mut self.banks {
            b.cash = S::zero();
            b.deposits = S::zero();
            b.firm_loans = S::zero();
            b.interbank_assets = S::zero();
            b.interbank_liabilities.clear();
            b.equity = S::zero();
            b.profit = S::zero();
        }
    }

    /// Sets an account balance, adjusting the house bank's deposit total.
    pub fn set_balance(&mut self, account: Account, amount: S) {
        let bank = self.house_bank(account).expect("account exists");
        let old = self.balance(account).expect("account exists");
        match account {
            Account::Household(h) => self.households[h.0].deposit = amount,
            Account::Firm(f) => self.firms[f.0].cash = amount,
        }
        self.banks[bank.0].deposits += amount - old;
    }

    pub fn set_house_bank(&mut self, account: Account, bank: BankId) {
        self.rehome_account(account, bank).expect("account exists");
    }

    pub fn set_reserves(&mut self, bank: BankId, cash: S) {
        self.banks[bank.0].cash = cash;
    }

    pub fn add_firm_loan(&mut self, firm: FirmId, lender: BankId, principal: S, rate: S) {
        book_loan(&mut self.firms[firm.0].loans, lender, principal, rate);
        self.banks[lender.0].firm_loans += principal;
    }

    pub fn add_interbank_loan(&mut self, lender: BankId, borrower: BankId, principal: S, rate: S) {
        book_loan(&mut self.banks[borrower.0].interbank_liabilities, lender, principal, rate);
        self.banks[lender.0].interbank_assets += principal;
    }

    /// Sets every bank's recorded equity to assets minus liabilities.
    pub fn restate_equities(&mut self) {
        for b in &mut self.banks {
            b.equity = b.derived_equity();
        }
    }

    /// Records the current reserves as the conserved total.
    pub fn rebase_cash(&mut self) {
        self.set_initial_cash(self.total_cash());
    }
}
