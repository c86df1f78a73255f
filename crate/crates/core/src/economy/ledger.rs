use super::{Account, Bank, BankId, EconomyState};
use crate::error::LedgerError;
use crate::num::{snap, Real, MONEY_EPS};

/// Outcome of a balance-sheet identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub residual: f64,
    pub pass: bool,
}

/// Compares recorded equity against assets minus liabilities.
pub fn check_bank_identity<S: Real>(bank: &Bank<S>) -> IdentityCheck {
    let residual = (bank.equity - bank.derived_equity()).abs().as_f64();
    let scale = bank.total_assets().as_f64().abs().max(1.0);
    IdentityCheck { residual, pass: residual < 1e-9 * scale }
}

impl<S: Real> EconomyState<S> {
    pub fn balance(&self, account: Account) -> Result<S, LedgerError> {
        match account {
            Account::Household(h) => self.households.get(h.0).map(|x| x.deposit),
            Account::Firm(f) => self.firms.get(f.0).map(|x| x.cash),
        }
        .ok_or(LedgerError::UnknownAccount(account))
    }

    pub fn house_bank(&self, account: Account) -> Result<BankId, LedgerError> {
        match account {
            Account::Household(h) => self.households.get(h.0).map(|x| x.house_bank),
            Account::Firm(f) => self.firms.get(f.0).map(|x| x.house_bank),
        }
        .ok_or(LedgerError::UnknownAccount(account))
    }

    fn balance_mut(&mut self, account: Account) -> Result<&mut S, LedgerError> {
        match account {
            Account::Household(h) => self.households.get_mut(h.0).map(|x| &mut x.deposit),
            Account::Firm(f) => self.firms.get_mut(f.0).map(|x| &mut x.cash),
        }
        .ok_or(LedgerError::UnknownAccount(account))
    }

    /// Rebooks the house bank of an account, carrying its deposit along.
    /// Reserves do not move.
    pub(crate) fn rehome_account(&mut self, account: Account, to: BankId) -> Result<(), LedgerError> {
        let from = self.house_bank(account)?;
        let bal = self.balance(account)?;
        self.banks[from.0].deposits -= bal;
        self.banks[to.0].deposits += bal;
        match account {
            Account::Household(h) => self.households[h.0].house_bank = to,
            Account::Firm(f) => self.firms[f.0].house_bank = to,
        }
        Ok(())
    }

    fn check_amount(amount: S) -> Result<(), LedgerError> {
        if !amount.is_finite() || amount < S::zero() {
            return Err(LedgerError::InvalidAmount(amount.as_f64()));
        }
        Ok(())
    }

    /// Debits `amount` from an account, clamping sub-epsilon overdraws.
    fn withdraw(&mut self, account: Account, amount: S) -> Result<S, LedgerError> {
        let bal = self.balance(account)?;
        if amount > bal + S::lit(MONEY_EPS) {
            return Err(LedgerError::InsufficientFunds {
                account,
                balance: bal.as_f64(),
                requested: amount.as_f64(),
            });
        }
        let amount = amount.min(bal);
        let bank = self.house_bank(account)?;
        let slot = self.balance_mut(account)?;
        *slot = snap(*slot - amount);
        self.banks[bank.0].deposits -= amount;
        Ok(amount)
    }

    fn deposit(&mut self, account: Account, amount: S) -> Result<(), LedgerError> {
        let bank = self.house_bank(account)?;
        *self.balance_mut(account)? += amount;
        self.banks[bank.0].deposits += amount;
        Ok(())
    }

    pub(crate) fn move_reserves(&mut self, from: BankId, to: BankId, amount: S) {
        if from != to {
            self.banks[from.0].cash -= amount;
            self.banks[to.0].cash += amount;
        }
    }

    /// Moves money between two deposit accounts. Reserves follow the money
    /// when the accounts sit at different banks.
    pub fn transfer(&mut self, from: Account, to: Account, amount: S) -> Result<S, LedgerError> {
        Self::check_amount(amount)?;
        self.balance(to)?;
        if amount == S::zero() {
            self.balance(from)?;
            return Ok(S::zero());
        }
        let amount = self.withdraw(from, amount)?;
        self.deposit(to, amount)?;
        let (bf, bt) = (self.house_bank(from)?, self.house_bank(to)?);
        self.move_reserves(bf, bt, amount);
        Ok(amount)
    }

    /// Moves money out of an account into the reserves of `bank`. The caller
    /// books the counter-entry on `bank` (loan repaid, equity raised, ...).
    pub(crate) fn pay_to_bank(&mut self, from: Account, bank: BankId, amount: S) -> Result<S, LedgerError> {
        Self::check_amount(amount)?;
        let amount = self.withdraw(from, amount)?;
        let hb = self.house_bank(from)?;
        self.move_reserves(hb, bank, amount);
        Ok(amount)
    }

    /// Moves reserves out of `bank` into an account. The caller books the
    /// counter-entry on `bank`.
    pub(crate) fn pay_from_bank(&mut self, bank: BankId, to: Account, amount: S) -> Result<(), LedgerError> {
        Self::check_amount(amount)?;
        self.deposit(to, amount)?;
        let hb = self.house_bank(to)?;
        self.move_reserves(bank, hb, amount);
        Ok(())
    }

    /// Sum of bank reserves.
    pub fn total_cash(&self) -> S {
        self.banks.iter().map(|b| b.cash).sum()
    }

    pub fn total_deposits(&self) -> S {
        self.accounts().map(|a| self.balance(a).unwrap_or_else(|_| S::zero())).sum()
    }

    /// Cross-checks cached bank totals against the underlying records and
    /// every agent-level invariant. Returns a description of the first
    /// violation.
    pub fn audit(&self) -> Result<(), String> {
        let n = self.banks.len();
        let mut deposits = vec![S::zero(); n];
        let mut firm_loans = vec![S::zero(); n];
        let mut ib_assets = vec![S::zero(); n];
        for h in &self.households {
            if h.deposit < S::zero() {
                return Err(format!("{} has negative deposit {}", h.id, h.deposit));
            }
            deposits[h.house_bank.0] += h.deposit;
        }
        for f in &self.firms {
            if f.cash < S::zero() {
                return Err(format!("{} has negative cash {}", f.id, f.cash));
            }
            deposits[f.house_bank.0] += f.cash;
            for l in &f.loans {
                if l.principal < S::zero() || l.rate < S::zero() {
                    return Err(format!("{} has malformed loan {:?}", f.id, l));
                }
                firm_loans[l.lender.0] += l.principal;
            }
        }
        for b in &self.banks {
            for l in &b.interbank_liabilities {
                ib_assets[l.lender.0] += l.principal;
            }
        }
        for b in &self.banks {
            let tol = S::lit(1e-9) * b.total_assets().abs().max(b.deposits.abs()).max(S::one());
            let i = b.id.0;
            if !b.active {
                if deposits[i] != S::zero() || firm_loans[i] != S::zero() || ib_assets[i] != S::zero() {
                    return Err(format!("closed {} still carries positions", b.id));
                }
                continue;
            }
            if (deposits[i] - b.deposits).abs() > tol {
                return Err(format!("{} deposits cached {} vs records {}", b.id, b.deposits, deposits[i]));
            }
            if (firm_loans[i] - b.firm_loans).abs() > tol {
                return Err(format!("{} firm loans cached {} vs records {}", b.id, b.firm_loans, firm_loans[i]));
            }
            if (ib_assets[i] - b.interbank_assets).abs() > tol {
                return Err(format!("{} interbank assets cached {} vs records {}", b.id, b.interbank_assets, ib_assets[i]));
            }
            let id = check_bank_identity(b);
            if !id.pass {
                return Err(format!("{} balance sheet identity residual {}", b.id, id.residual));
            }
            if !b.ownership.is_empty() && (b.ownership_total() - S::one()).abs() > S::lit(1e-9) {
                return Err(format!("{} ownership sums to {}", b.id, b.ownership_total()));
            }
        }
        Ok(())
    }
}
