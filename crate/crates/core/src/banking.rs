//! Loan pricing, prudential constraints, interbank funding, repayment and
//! bank dividends.

use serde::{Deserialize, Serialize};

use crate::economy::{book_loan, Account, Bank, BankId, EconomyState, FirmId, Owner};
use crate::num::{snap, Real};

/// A bank's quote to a firm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoanOffer<S: Real> {
    pub bank: BankId,
    pub firm: FirmId,
    pub rate: S,
    pub max_volume: S,
}

/// Debt over cash. Infinite for a cash-less firm that owes anything.
pub fn firm_leverage<S: Real>(debt: S, cash: S) -> S {
    if debt <= S::zero() {
        S::zero()
    } else if cash <= S::zero() {
        S::infinity()
    } else {
        debt / cash
    }
}

/// `r0 (1 + eps) (1 + tanh(mu * leverage))`.
pub fn offer_rate<S: Real>(r0: S, mu: S, leverage: S, eps: S) -> S {
    let risk = if mu == S::zero() || leverage == S::zero() {
        S::zero()
    } else {
        (mu * leverage).tanh()
    };
    r0 * (S::one() + eps) * (S::one() + risk)
}

/// Lending capacity left under the reserve requirement.
pub fn cash_room<S: Real>(bank: &Bank<S>, kappa_min: S) -> S {
    bank.cash - kappa_min * bank.deposits
}

/// Lending capacity left under the leverage cap. Zero for a bank without
/// positive equity.
pub fn leverage_room<S: Real>(bank: &Bank<S>, lambda_max: S) -> S {
    if bank.equity <= S::zero() {
        return S::zero();
    }
    lambda_max * bank.equity - bank.loan_assets()
}

/// Largest part of `request` the bank can lend while keeping
/// `cash >= kappa_min * deposits` and `loans / equity <= lambda_max`.
pub fn constraints_allow<S: Real>(bank: &Bank<S>, request: S, kappa_min: S, lambda_max: S) -> S {
    if bank.equity <= S::zero() {
        return S::zero();
    }
    request
        .min(cash_room(bank, kappa_min))
        .min(leverage_room(bank, lambda_max))
        .max(S::zero())
}

/// Borrows up to `amount` from `z` randomly drawn peers, each lending what
/// its own constraints allow at the interbank rate. Returns the sum raised.
pub fn raise_interbank<S: Real>(state: &mut EconomyState<S>, bank: BankId, amount: S) -> S {
    if amount <= S::zero() {
        return S::zero();
    }
    let peers: Vec<BankId> = state.active_banks().map(|b| b.id).filter(|&b| b != bank).collect();
    let z = state.params.z;
    let drawn = state.sample_distinct(&peers, z);
    let (kappa, lambda, r_ib) = (state.params.kappa_min, state.params.lambda_max, state.params.r_ib);
    let mut raised = S::zero();
    for peer in drawn {
        let need = amount - raised;
        if need <= S::zero() {
            break;
        }
        let lend = constraints_allow(state.bank(peer), need, kappa, lambda);
        if lend <= S::zero() {
            continue;
        }
        let p = state.bank_mut(peer);
        p.cash -= lend;
        p.interbank_assets += lend;
        let b = state.bank_mut(bank);
        b.cash += lend;
        book_loan(&mut b.interbank_liabilities, peer, lend, r_ib);
        raised += lend;
    }
    raised
}

/// Money paid on a loan book in one repayment round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RepaymentReport<S> {
    pub interest: S,
    pub principal: S,
}

impl<S: Real> RepaymentReport<S> {
    pub fn total(&self) -> S {
        self.interest + self.principal
    }
}

/// Splits a payment into (interest, principal), interest first.
fn split_payment<S: Real>(payment: S, interest_due: S) -> (S, S) {
    let interest = payment.min(interest_due);
    (interest, payment - interest)
}

/// Scale applied to every installment when cash cannot cover all of them.
fn coverage<S: Real>(available: S, due: S) -> S {
    if due <= S::zero() || available >= due {
        S::one()
    } else {
        (available.max(S::zero()) / due).min(S::one())
    }
}

/// Firm pays `tau` of principal plus interest on each loan. With too little
/// cash every installment shrinks pro rata; unpaid interest is forgiven and
/// unpaid principal stays outstanding.
pub fn repay_firm_loans<S: Real>(state: &mut EconomyState<S>, firm: FirmId) -> RepaymentReport<S> {
    let tau = state.params.tau;
    let account = Account::Firm(firm);
    let mut loans = std::mem::take(&mut state.firms[firm.0].loans);
    let due: S = loans.iter().map(|l| (tau + l.rate) * l.principal).sum();
    let scale = coverage(state.firms[firm.0].cash, due);
    let mut report = RepaymentReport::default();
    for loan in &mut loans {
        let installment = (tau + loan.rate) * loan.principal * scale;
        if installment <= S::zero() {
            continue;
        }
        let paid = state.pay_to_bank(account, loan.lender, installment).expect("installment covered by cash");
        let (interest, principal) = split_payment(paid, loan.rate * loan.principal);
        loan.principal -= principal;
        let lender = state.bank_mut(loan.lender);
        lender.firm_loans -= principal;
        lender.equity += interest;
        lender.profit += interest;
        report.interest += interest;
        report.principal += principal;
    }
    retain_live_loans(state, &mut loans, |st, lender, residual| {
        let b = st.bank_mut(lender);
        b.firm_loans -= residual;
        b.equity -= residual;
    });
    state.firms[firm.0].loans = loans;
    report
}

/// Bank repays its interbank borrowing on the same schedule as firm loans,
/// out of non-negative reserves.
pub fn repay_interbank_loans<S: Real>(state: &mut EconomyState<S>, bank: BankId) -> RepaymentReport<S> {
    let tau = state.params.tau;
    let mut loans = std::mem::take(&mut state.banks[bank.0].interbank_liabilities);
    let due: S = loans.iter().map(|l| (tau + l.rate) * l.principal).sum();
    let scale = coverage(state.banks[bank.0].cash, due);
    let mut report = RepaymentReport::default();
    for loan in &mut loans {
        let installment = (tau + loan.rate) * loan.principal * scale;
        if installment <= S::zero() {
            continue;
        }
        let (interest, principal) = split_payment(installment, loan.rate * loan.principal);
        loan.principal -= principal;
        state.move_reserves(bank, loan.lender, installment);
        let b = state.bank_mut(bank);
        b.equity -= interest;
        b.profit -= interest;
        let l = state.bank_mut(loan.lender);
        l.interbank_assets -= principal;
        l.equity += interest;
        l.profit += interest;
        report.interest += interest;
        report.principal += principal;
    }
    retain_live_loans(state, &mut loans, |st, lender, residual| {
        let l = st.bank_mut(lender);
        l.interbank_assets -= residual;
        l.equity -= residual;
        // forgiven residual is a gain for the borrower
        st.bank_mut(bank).equity += residual;
    });
    state.banks[bank.0].interbank_liabilities = loans;
    report
}

/// Drops loans whose principal rounded to zero, booking the residual.
fn retain_live_loans<S: Real>(
    state: &mut EconomyState<S>,
    loans: &mut Vec<crate::economy::Loan<S>>,
    mut book_residual: impl FnMut(&mut EconomyState<S>, BankId, S),
) {
    loans.retain(|l| {
        if snap(l.principal) == S::zero() {
            if l.principal != S::zero() {
                book_residual(state, l.lender, l.principal);
            }
            false
        } else {
            true
        }
    });
}

/// Pays `delta` of a positive step profit to the bank's owners, pro rata to
/// their shares. Returns (owner, amount) pairs.
pub fn bank_dividends<S: Real>(state: &mut EconomyState<S>, bank: BankId, delta: S) -> Vec<(Owner, S)> {
    let b = state.bank(bank);
    if !b.active || b.profit <= S::zero() || b.equity <= S::zero() || b.ownership.is_empty() {
        return Vec::new();
    }
    let payout = (delta * b.profit).min(b.equity);
    let shares: Vec<(Owner, S)> = b.ownership.iter().map(|(&o, &s)| (o, s)).collect();
    let mut paid = Vec::with_capacity(shares.len());
    for (owner, share) in shares {
        let amount = payout * share;
        if amount <= S::zero() {
            continue;
        }
        match owner {
            Owner::Household(h) => state
                .pay_from_bank(bank, Account::Household(h), amount)
                .expect("owner account exists"),
            Owner::Firm(f) => state.pay_from_bank(bank, Account::Firm(f), amount).expect("owner account exists"),
            Owner::Bank(other) => {
                state.move_reserves(bank, other, amount);
                state.bank_mut(other).equity += amount;
            }
        }
        state.bank_mut(bank).equity -= amount;
        paid.push((owner, amount));
    }
    paid
}

/// Volume-weighted mean rate over outstanding firm loans; 0 without loans.
pub fn nominal_rate<S: Real>(state: &EconomyState<S>) -> S {
    let (num, den) = state
        .firms
        .iter()
        .flat_map(|f| f.loans.iter())
        .fold((S::zero(), S::zero()), |(n, d), l| (n + l.rate * l.principal, d + l.principal));
    if den > S::zero() {
        num / den
    } else {
        S::zero()
    }
}
