//! Insolvency detection and the three resolution mechanisms.
//!
//! * Purchase & assumption closes the bank. Healthy banks take over its
//!   assets and liabilities in proportion to their equity, so they absorb
//!   the hole in its balance sheet.
//! * Bail-out recapitalizes the bank with a one-time levy on every household
//!   account and firm cash balance. Levied agents become the new owners.
//! * Bail-in converts the bank's interbank debt into equity first and levies
//!   its own depositors only for the remainder.
//!
//! A recapitalized bank ends with equity equal to the overhead `m`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::economy::{book_loan, Account, BankId, EconomyState, Owner};
use crate::error::ResolutionError;
use crate::events::{EventKind, FundingSources};
use crate::num::{snap, Real, MONEY_EPS};
use crate::params::{Mechanism, ShortfallPolicy};

/// Normalized non-negative weights; empty when nothing carries weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<S: Real>(pub Vec<S>);

impl<S: Real> WeightVector<S> {
    /// Weights proportional to the positive entries of `values`.
    pub fn proportional(values: &[S]) -> Self {
        let total: S = values.iter().copied().filter(|v| *v > S::zero()).sum();
        if total <= S::zero() {
            return Self(Vec::new());
        }
        Self(values.iter().map(|&v| if v > S::zero() { v / total } else { S::zero() }).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A bank found insolvent, with `M_b = -equity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insolvency<S> {
    pub bank: BankId,
    pub negative_equity: S,
}

/// Report of one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsolvencyEvent<S: Real> {
    pub bank: BankId,
    pub negative_equity: S,
    pub t: u64,
    pub mechanism: Mechanism,
    /// Mechanism actually applied after any fallback.
    pub applied: Mechanism,
    pub interbank_conversion: S,
    pub depositor_levy: S,
    pub purchaser_absorption: S,
}

/// Active banks with negative equity, in random order.
pub fn detect_insolvencies<S: Real>(state: &mut EconomyState<S>) -> Vec<Insolvency<S>> {
    let mut found: Vec<Insolvency<S>> = state
        .active_banks()
        .filter(|b| b.equity < S::zero())
        .map(|b| Insolvency { bank: b.id, negative_equity: -b.equity })
        .collect();
    state.shuffle(&mut found);
    found
}

/// Levy weights proportional to balance. Balances below `zeta` times the
/// largest balance in scope are exempt.
pub fn levy_weights<S: Real>(balances: &[S], zeta: S) -> WeightVector<S> {
    let largest = balances.iter().copied().fold(S::zero(), S::max);
    let threshold = zeta * largest;
    let eligible: Vec<S> = balances
        .iter()
        .map(|&b| if b >= threshold && b > S::zero() { b } else { S::zero() })
        .collect();
    WeightVector::proportional(&eligible)
}

/// Amounts to collect from each balance to raise `target`: a first pass at
/// `weight * target` capped at the balance, then one re-pass spreading the
/// residual over the agents that still have room. Returns the levies and the
/// amount still missing.
pub fn plan_levy<S: Real>(balances: &[S], weights: &WeightVector<S>, target: S) -> (Vec<S>, S) {
    let mut levy = vec![S::zero(); balances.len()];
    if weights.is_empty() || target <= S::zero() {
        return (levy, target.max(S::zero()));
    }
    for (i, (&b, &w)) in balances.iter().zip(&weights.0).enumerate() {
        levy[i] = (w * target).min(b);
    }
    let residual = target - levy.iter().copied().sum::<S>();
    if residual > S::lit(MONEY_EPS) {
        let room: Vec<bool> = balances
            .iter()
            .zip(&levy)
            .zip(&weights.0)
            .map(|((&b, &l), &w)| w > S::zero() && b - l > S::zero())
            .collect();
        let wsum: S = weights.0.iter().zip(&room).filter(|(_, r)| **r).map(|(w, _)| *w).sum();
        if wsum > S::zero() {
            for i in 0..balances.len() {
                if room[i] {
                    let extra = (weights.0[i] / wsum * residual).min(balances[i] - levy[i]);
                    levy[i] += extra;
                }
            }
        }
    }
    let short = snap(target - levy.iter().copied().sum::<S>()).max(S::zero());
    (levy, short)
}

/// Collects levies into a bank's equity and returns per-account amounts.
fn collect_levy<S: Real>(state: &mut EconomyState<S>, bank: BankId, accounts: &[Account], levy: &[S]) -> Vec<(Account, S)> {
    let mut paid = Vec::new();
    for (&a, &amount) in accounts.iter().zip(levy) {
        if amount <= S::zero() {
            continue;
        }
        let got = state.pay_to_bank(a, bank, amount).expect("levy capped at balance");
        state.bank_mut(bank).equity += got;
        paid.push((a, got));
    }
    paid
}

/// Replaces a bank's owners with shares proportional to contributions.
fn reassign_ownership<S: Real>(state: &mut EconomyState<S>, bank: BankId, contributions: &[(Owner, S)]) {
    let total: S = contributions.iter().map(|c| c.1).sum();
    let mut owners = BTreeMap::new();
    if total > S::zero() {
        for &(o, amount) in contributions {
            *owners.entry(o).or_insert(S::zero()) += amount / total;
        }
    }
    state.bank_mut(bank).ownership = owners;
}

/// Closes a bank and spreads its balance sheet over the healthy banks in
/// proportion to their equity. Each deposit account moves to purchaser `i`
/// with probability `w_i`. Purchasers jointly absorb exactly `M_b`.
pub fn purchase_and_assumption<S: Real>(
    state: &mut EconomyState<S>,
    bank: BankId,
) -> Result<WeightVector<S>, ResolutionError> {
    let healthy: Vec<BankId> = state
        .active_banks()
        .filter(|b| b.id != bank && b.equity > S::zero())
        .map(|b| b.id)
        .collect();
    if healthy.is_empty() {
        return Err(ResolutionError::NoHealthyBank(bank));
    }
    let equities: Vec<S> = healthy.iter().map(|&b| state.bank(b).equity).collect();
    let weights = WeightVector::proportional(&equities);
    let w = &weights.0;
    // equity change of each purchaser
    let mut delta = vec![S::zero(); healthy.len()];

    // firm loans
    for fi in 0..state.firms.len() {
        let Some(pos) = state.firms[fi].loans.iter().position(|l| l.lender == bank) else { continue };
        let loan = state.firms[fi].loans.swap_remove(pos);
        for (k, &buyer) in healthy.iter().enumerate() {
            let part = loan.principal * w[k];
            book_loan(&mut state.firms[fi].loans, buyer, part, loan.rate);
            state.bank_mut(buyer).firm_loans += part;
            delta[k] += part;
        }
    }

    // claims of the failed bank on other banks
    for bi in 0..state.banks.len() {
        let debtor = BankId(bi);
        if debtor == bank {
            continue;
        }
        let Some(pos) = state.banks[bi].interbank_liabilities.iter().position(|l| l.lender == bank) else {
            continue;
        };
        let loan = state.banks[bi].interbank_liabilities.swap_remove(pos);
        for (k, &buyer) in healthy.iter().enumerate() {
            let part = loan.principal * w[k];
            delta[k] += part;
            if buyer != debtor {
                book_loan(&mut state.banks[bi].interbank_liabilities, buyer, part, loan.rate);
                state.bank_mut(buyer).interbank_assets += part;
            }
            // a claim on itself extinguishes: the debtor simply owes less
        }
    }

    // debts of the failed bank to other banks
    let owed = std::mem::take(&mut state.bank_mut(bank).interbank_liabilities);
    for loan in owed {
        let creditor = loan.lender;
        state.bank_mut(creditor).interbank_assets -= loan.principal;
        for (k, &buyer) in healthy.iter().enumerate() {
            let part = loan.principal * w[k];
            delta[k] -= part;
            if buyer != creditor {
                book_loan(&mut state.bank_mut(buyer).interbank_liabilities, creditor, part, loan.rate);
                state.bank_mut(creditor).interbank_assets += part;
            }
        }
    }

    // reserves
    let cash = state.bank(bank).cash;
    for (k, &buyer) in healthy.iter().enumerate() {
        let part = cash * w[k];
        state.bank_mut(buyer).cash += part;
        delta[k] += part;
    }

    // deposits, one categorical draw per account
    let accounts: Vec<Account> = state
        .accounts()
        .filter(|&a| state.house_bank(a).map(|b| b == bank).unwrap_or(false))
        .collect();
    for a in accounts {
        let u = state.uniform();
        let mut k = 0;
        let mut acc = w[0];
        while u >= acc && k + 1 < w.len() {
            k += 1;
            acc += w[k];
        }
        let bal = state.balance(a).expect("account exists");
        delta[k] -= bal;
        state.rehome_account(a, healthy[k]).expect("account exists");
    }

    for (k, &buyer) in healthy.iter().enumerate() {
        state.bank_mut(buyer).equity += delta[k];
    }

    // stakes the closed bank held pass to the purchasers
    for bi in 0..state.banks.len() {
        if let Some(share) = state.banks[bi].ownership.remove(&Owner::Bank(bank)) {
            for (k, &buyer) in healthy.iter().enumerate() {
                *state.banks[bi].ownership.entry(Owner::Bank(buyer)).or_insert(S::zero()) += share * w[k];
            }
        }
    }

    let b = state.bank_mut(bank);
    b.active = false;
    b.cash = S::zero();
    b.deposits = S::zero();
    b.firm_loans = S::zero();
    b.interbank_assets = S::zero();
    b.equity = S::zero();
    b.profit = S::zero();
    b.ownership.clear();
    Ok(weights)
}

/// Recapitalizes a bank with a levy of `M_b + m` on every household account
/// and firm cash balance. Previous owners are wiped out.
pub fn bail_out<S: Real>(state: &mut EconomyState<S>, bank: BankId) -> Result<S, ResolutionError> {
    let m_b = -state.bank(bank).equity;
    let target = m_b + state.params.overhead;
    let accounts: Vec<Account> = state.accounts().collect();
    let balances: Vec<S> = accounts.iter().map(|&a| state.balance(a).expect("account exists")).collect();
    let weights = levy_weights(&balances, state.params.zeta);
    let (levy, short) = plan_levy(&balances, &weights, target);
    if short > S::zero() {
        return Err(ResolutionError::ShortfallAfterLevy { bank, shortfall: short.as_f64() });
    }
    let paid = collect_levy(state, bank, &accounts, &levy);
    let contributions: Vec<(Owner, S)> = paid.into_iter().map(|(a, x)| (Owner::from(a), x)).collect();
    reassign_ownership(state, bank, &contributions);
    Ok(target)
}

/// Amounts raised by a bail-in.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BailInFunding<S> {
    pub converted: S,
    pub levied: S,
}

/// Converts up to `M_b + m` of the bank's interbank debt into equity, pro
/// rata to claim size, and levies the rest from its own depositors. Creditor
/// banks and levied depositors become owners in proportion to what they put
/// in.
pub fn bail_in<S: Real>(state: &mut EconomyState<S>, bank: BankId) -> Result<BailInFunding<S>, ResolutionError> {
    let m_b = -state.bank(bank).equity;
    let target = m_b + state.params.overhead;
    let claims = state.bank(bank).interbank_liability_total();
    let converted = claims.min(target);
    let residual = snap(target - converted).max(S::zero());

    let accounts: Vec<Account> = state
        .accounts()
        .filter(|&a| state.house_bank(a).map(|b| b == bank).unwrap_or(false))
        .collect();
    let balances: Vec<S> = accounts.iter().map(|&a| state.balance(a).expect("account exists")).collect();
    let (levy, short) = if residual > S::zero() {
        let weights = levy_weights(&balances, state.params.zeta);
        plan_levy(&balances, &weights, residual)
    } else {
        (vec![S::zero(); accounts.len()], S::zero())
    };
    if short > S::zero() {
        return Err(ResolutionError::ShortfallAfterDepositors { bank, shortfall: short.as_f64() });
    }

    let mut contributions: Vec<(Owner, S)> = Vec::new();
    if converted > S::zero() {
        let frac = converted / claims;
        let mut loans = std::mem::take(&mut state.bank_mut(bank).interbank_liabilities);
        for loan in &mut loans {
            let cut = loan.principal * frac;
            loan.principal -= cut;
            let creditor = state.bank_mut(loan.lender);
            creditor.interbank_assets -= cut;
            creditor.equity -= cut;
            creditor.profit -= cut;
            state.bank_mut(bank).equity += cut;
            contributions.push((Owner::Bank(loan.lender), cut));
        }
        let (live, dust): (Vec<_>, Vec<_>) = loans.into_iter().partition(|l| snap(l.principal) > S::zero());
        for l in dust {
            let creditor = state.bank_mut(l.lender);
            creditor.interbank_assets -= l.principal;
            creditor.equity -= l.principal;
            state.bank_mut(bank).equity += l.principal;
        }
        state.bank_mut(bank).interbank_liabilities = live;
    }
    let paid = collect_levy(state, bank, &accounts, &levy);
    let levied: S = paid.iter().map(|p| p.1).sum();
    contributions.extend(paid.into_iter().map(|(a, x)| (Owner::from(a), x)));
    reassign_ownership(state, bank, &contributions);
    Ok(BailInFunding { converted, levied })
}

/// Outcome of the end-of-step resolution phase.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolutionOutcome<S: Real> {
    Completed(Vec<InsolvencyEvent<S>>),
    /// P&A found no healthy bank; the run must stop.
    Collapsed(Vec<InsolvencyEvent<S>>, BankId),
}

impl<S: Real> ResolutionOutcome<S> {
    pub fn events(&self) -> &[InsolvencyEvent<S>] {
        match self {
            ResolutionOutcome::Completed(e) | ResolutionOutcome::Collapsed(e, _) => e,
        }
    }
}

/// Resolves insolvent banks one at a time in random order, re-evaluating
/// balance sheets after each resolution, until none is left.
pub fn resolve_insolvencies<S: Real>(state: &mut EconomyState<S>, mechanism: Mechanism) -> ResolutionOutcome<S> {
    let mut events = Vec::new();
    let mut carried: Vec<BankId> = Vec::new();
    // each round fixes one bank; the cap only guards against cycles of
    // mutual conversion losses
    let max_rounds = 16 * state.banks.len().max(1);
    for _ in 0..max_rounds {
        let pending: Vec<Insolvency<S>> =
            detect_insolvencies(state).into_iter().filter(|i| !carried.contains(&i.bank)).collect();
        let Some(next) = pending.first().copied() else { break };
        match resolve_one(state, next, mechanism) {
            Ok(Some(ev)) => events.push(ev),
            Ok(None) => carried.push(next.bank),
            Err(bank) => return ResolutionOutcome::Collapsed(events, bank),
        }
    }
    ResolutionOutcome::Completed(events)
}

/// `Ok(None)` when the bank is carried to the next step; `Err` when P&A
/// found no healthy bank.
fn resolve_one<S: Real>(
    state: &mut EconomyState<S>,
    ins: Insolvency<S>,
    mechanism: Mechanism,
) -> Result<Option<InsolvencyEvent<S>>, BankId> {
    let mut ev = InsolvencyEvent {
        bank: ins.bank,
        negative_equity: ins.negative_equity,
        t: state.t,
        mechanism,
        applied: mechanism,
        interbank_conversion: S::zero(),
        depositor_levy: S::zero(),
        purchaser_absorption: S::zero(),
    };
    let recap = match mechanism {
        Mechanism::PurchaseAndAssumption => None,
        Mechanism::BailOut => Some(bail_out(state, ins.bank).map(|x| {
            ev.depositor_levy = x;
        })),
        Mechanism::BailIn => Some(bail_in(state, ins.bank).map(|f| {
            ev.interbank_conversion = f.converted;
            ev.depositor_levy = f.levied;
        })),
    };
    let needs_pa = match recap {
        None => true,
        Some(Ok(())) => false,
        Some(Err(_)) => match state.params.shortfall_policy {
            ShortfallPolicy::PurchaseAndAssumption => true,
            ShortfallPolicy::Carry => return Ok(None),
        },
    };
    if needs_pa {
        ev.applied = Mechanism::PurchaseAndAssumption;
        match purchase_and_assumption(state, ins.bank) {
            Ok(_) => ev.purchaser_absorption = ins.negative_equity,
            Err(_) => {
                state.log(EventKind::RunTerminated {
                    reason: format!("no healthy bank left to absorb bank {}", ins.bank.0),
                    magnitude: ins.negative_equity.as_f64(),
                });
                return Err(ins.bank);
            }
        }
    }
    let funds = FundingSources {
        interbank_conversion: ev.interbank_conversion.as_f64(),
        depositor_levy: ev.depositor_levy.as_f64(),
        purchaser_absorption: ev.purchaser_absorption.as_f64(),
    };
    state.log(EventKind::BankInsolvency {
        bank: ins.bank.0,
        magnitude: ins.negative_equity.as_f64(),
        mechanism,
        applied: ev.applied,
        funds,
    });
    Ok(Some(ev))
}
