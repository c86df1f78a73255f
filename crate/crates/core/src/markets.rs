//! Credit, job and goods markets. Every market is a sequential random search
//! where each agent looks at `z` randomly drawn counterparties.

use crate::banking::{cash_room, constraints_allow, firm_leverage, leverage_room, offer_rate, raise_interbank};
use crate::economy::{book_loan, Account, BankId, EconomyState, FirmId, HouseholdId, HouseholdKind};
use crate::events::EventKind;
use crate::firm::{desired_workforce, produce};
use crate::num::{Real, MONEY_EPS};

/// Outcome of one firm's visit to the credit market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CreditOutcome<S> {
    NotNeeded,
    Granted { bank: BankId, amount: S, rate: S, contracted: bool },
    Refused { bank: BankId, amount: S },
}

/// Headcount a firm can actually employ: its desired workforce, capped by
/// the wage bill its cash covers.
pub fn affordable_workforce<S: Real>(state: &EconomyState<S>, firm: FirmId) -> usize {
    let f = &state.firms[firm.0];
    let desired = desired_workforce(f.expected_demand, state.params.alpha);
    let affordable = (f.cash / state.params.wage + S::lit(1e-9)).floor().to_usize().unwrap_or(0);
    desired.min(affordable)
}

/// Lowest of the sampled quotes; ties go to the smaller bank id.
fn best_offer<S: Real>(offers: &[(BankId, S)]) -> Option<(BankId, S)> {
    offers
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)))
}

/// One firm seeks the financing gap of its desired wage bill.
pub fn seek_credit<S: Real>(state: &mut EconomyState<S>, firm: FirmId, r0: S) -> CreditOutcome<S> {
    let p = state.params.clone();
    let f = &state.firms[firm.0];
    let desired = desired_workforce(f.expected_demand, p.alpha);
    let need = p.wage * S::from_usize_lossy(desired) - f.cash;
    if need <= S::lit(MONEY_EPS) {
        return CreditOutcome::NotNeeded;
    }
    let leverage = firm_leverage(f.debt(), f.cash);

    let banks = state.active_bank_ids();
    let sampled = state.sample_distinct(&banks, p.z);
    let mut offers = Vec::with_capacity(sampled.len());
    for b in sampled {
        let eps = state.uniform();
        offers.push((b, offer_rate(r0, p.mu, leverage, eps)));
    }
    let Some((lender, rate)) = best_offer(&offers) else {
        return CreditOutcome::NotNeeded;
    };

    let contracted = rate - state.inflation_prev > p.r_max;
    let request = if contracted { need * p.phi } else { need };

    let fundable = {
        let b = state.bank(lender);
        b.equity > S::zero() && leverage_room(b, p.lambda_max) >= request
    };
    if fundable {
        let short = request - cash_room(state.bank(lender), p.kappa_min);
        if short > S::zero() {
            raise_interbank(state, lender, short);
        }
    }
    let allowed = constraints_allow(state.bank(lender), request, p.kappa_min, p.lambda_max);
    if !fundable || allowed < request * (S::one() - S::lit(1e-12)) {
        state.log(EventKind::LoanRefused { firm: firm.0, bank: lender.0, magnitude: request.as_f64() });
        return CreditOutcome::Refused { bank: lender, amount: request };
    }

    book_loan(&mut state.firms[firm.0].loans, lender, request, rate);
    state.bank_mut(lender).firm_loans += request;
    state
        .pay_from_bank(lender, Account::Firm(firm), request)
        .expect("firm account exists");
    CreditOutcome::Granted { bank: lender, amount: request, rate, contracted }
}

/// Every firm with a financing gap visits the credit market, in random order.
pub fn credit_market<S: Real>(state: &mut EconomyState<S>, r0: S) -> Vec<(FirmId, CreditOutcome<S>)> {
    let mut order: Vec<FirmId> = state.firms.iter().map(|f| f.id).collect();
    state.shuffle(&mut order);
    order.into_iter().map(|f| (f, seek_credit(state, f, r0))).collect()
}

/// Firms shed or hire workers toward their affordable workforce, pay wages
/// and produce.
///
/// Over-staffed firms fire uniformly at random. Unemployed workers then
/// arrive in random order; each applies to `z` random firms and joins the
/// first with a vacancy.
pub fn job_market<S: Real>(state: &mut EconomyState<S>) {
    let n_firms = state.firms.len();
    let mut vacancies = vec![0usize; n_firms];
    for i in 0..n_firms {
        let target = affordable_workforce(state, FirmId(i));
        let staff = state.firms[i].workforce.len();
        if staff > target {
            let fired = rand::seq::index::sample(&mut state.rng, staff, staff - target).into_vec();
            let mut keep = vec![true; staff];
            for k in fired {
                keep[k] = false;
            }
            let f = &mut state.firms[i];
            let mut k = 0;
            let mut out = Vec::with_capacity(staff - target);
            f.workforce.retain(|w| {
                let stay = keep[k];
                k += 1;
                if !stay {
                    out.push(*w);
                }
                stay
            });
            for w in out {
                state.households[w.0].employed_at = None;
            }
        } else {
            vacancies[i] = target - staff;
        }
    }

    let mut applicants: Vec<HouseholdId> = state
        .households
        .iter()
        .filter(|h| h.kind == HouseholdKind::Worker && h.employed_at.is_none())
        .map(|h| h.id)
        .collect();
    state.shuffle(&mut applicants);
    let firm_ids: Vec<FirmId> = (0..n_firms).map(FirmId).collect();
    let z = state.params.z;
    for worker in applicants {
        for target in state.sample_distinct(&firm_ids, z) {
            if vacancies[target.0] > 0 {
                vacancies[target.0] -= 1;
                state.firms[target.0].workforce.push(worker);
                state.households[worker.0].employed_at = Some(target);
                break;
            }
        }
    }

    let wage = state.params.wage;
    for i in 0..n_firms {
        let firm = FirmId(i);
        let staff = state.firms[i].workforce.clone();
        for w in &staff {
            state
                .transfer(Account::Firm(firm), Account::Household(*w), wage)
                .expect("workforce is capped at the affordable wage bill");
        }
        state.firms[i].wage_bill = wage * S::from_usize_lossy(staff.len());
        produce(state, firm);
    }
}

/// Households, in random order, each compare `z` random firms and spend the
/// consumption share of their account at the cheapest one with stock.
pub fn goods_market<S: Real>(state: &mut EconomyState<S>) {
    for f in &mut state.firms {
        f.sold_last_step = S::zero();
        f.revenue = S::zero();
    }
    let mut order: Vec<HouseholdId> = state.households.iter().map(|h| h.id).collect();
    state.shuffle(&mut order);
    let firm_ids: Vec<FirmId> = state.firms.iter().map(|f| f.id).collect();
    let (z, c) = (state.params.z, state.params.consumption);
    for h in order {
        let sampled = state.sample_distinct(&firm_ids, z);
        let budget = c * state.households[h.0].deposit;
        if budget <= S::zero() {
            continue;
        }
        let cheapest = sampled
            .into_iter()
            .filter(|f| state.firms[f.0].inventory > S::zero())
            .min_by(|a, b| {
                let (pa, pb) = (state.firms[a.0].price, state.firms[b.0].price);
                pa.partial_cmp(&pb).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(b))
            });
        let Some(firm) = cheapest else { continue };
        let f = &state.firms[firm.0];
        let qty = (budget / f.price).min(f.inventory);
        let cost = qty * f.price;
        let paid = state
            .transfer(Account::Household(h), Account::Firm(firm), cost)
            .expect("budget is a share of the deposit");
        let f = &mut state.firms[firm.0];
        f.inventory -= qty;
        if f.inventory < S::lit(MONEY_EPS) {
            f.inventory = S::zero();
        }
        f.sold_last_step += qty;
        f.revenue += paid;
    }
    for f in &mut state.firms {
        // A firm that could not produce its plan and still sold out only
        // learns that demand reached its output, not that it beat the plan.
        f.demand_short = f.sold_last_step < f.expected_demand * S::lit(1.0 - 1e-9);
        f.sold_all = f.inventory <= S::zero() && !f.demand_short;
    }
}
