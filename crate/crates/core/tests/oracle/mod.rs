//! Independent big-rational evaluator used to freeze expected values.
//!
//! Works on plain integers and `BigRational` only; nothing here calls into
//! the library, so a shared arithmetic bug cannot hide in both places.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// One merchant-side transaction, whole units.
#[derive(Clone, Copy)]
pub struct MTx {
    pub payment: i64,
    pub fee: i64,
    pub exec: i64,
    pub rebate: i64,
    pub psi: i64,
    pub late_penalty: i64,
    pub default_penalty: i64,
}

/// Stage payoffs for one merchant epoch, evaluated row by row.
pub fn merchant_rows(txs: &[MTx], stake_reward: i64, stake_cost: i64) -> (Q, Q, Q) {
    let mut conf = int(stake_reward - stake_cost);
    let mut late = int(stake_reward - stake_cost);
    let mut def = int(-stake_cost);
    for t in txs {
        conf += int(t.payment) - int(t.fee) - int(t.exec) + int(t.rebate);
        late += int(t.payment) - int(t.fee) - int(t.exec) + int(t.rebate) + int(t.psi) - int(t.late_penalty);
        def += int(t.payment) + int(t.psi) - int(t.default_penalty);
    }
    (conf, late, def)
}

pub struct BuyerInputs {
    /// (service value, payment, outside option, late penalty) per transaction.
    pub txs: Vec<(i64, i64, i64, i64)>,
    pub tx_rebate: i64,
    pub stake_reward: i64,
    pub stake_cost: i64,
    pub financing_cost: i64,
    pub credit_reward: i64,
    pub credit_penalty: i64,
    pub credit_limit: i64,
    pub stake: i64,
    pub omega: Q,
}

pub fn buyer_rows(b: &BuyerInputs) -> (Q, Q, Q) {
    let (mut w, mut v, mut psi, mut plb) = (Q::zero(), Q::zero(), Q::zero(), Q::zero());
    for &(wi, vi, si, pi) in &b.txs {
        w += int(wi);
        v += int(vi);
        psi += int(si);
        plb += int(pi);
    }
    let conf = &w - &v + int(b.tx_rebate) + int(b.stake_reward) - int(b.stake_cost) + &b.omega * int(b.credit_reward);
    let late = &w - &v + &psi - &plb + int(b.stake_reward)
        - int(b.financing_cost)
        - int(b.stake_cost)
        - &b.omega * int(b.credit_penalty);
    let def = &w + &psi - int(b.stake) - int(b.stake_cost) - &b.omega * int(b.credit_limit);
    (conf, late, def)
}

/// `(v_max - S) / (v_max - S + ū)`.
pub fn delta_threshold(v_max: &Q, stake: &Q, u_bar: &Q) -> Q {
    let gap = v_max - stake;
    &gap / (&gap + u_bar)
}

/// Single-default gain against grim punishment: `(v_max - S) - δū/(1-δ)`.
pub fn default_gain(v_max: &Q, stake: &Q, u_bar: &Q, delta: &Q) -> Q {
    v_max - stake - delta * u_bar / (Q::one() - delta)
}

pub fn power(base: &Q, exp: u32) -> Q {
    (0..exp).fold(Q::one(), |acc, _| acc * base)
}

/// Closed-form geometric bound `ℓ (1 - δ^T) / (1 - δ)`.
pub fn geometric_bound(delta: &Q, periods: u32, floor: &Q) -> Q {
    floor * (Q::one() - power(delta, periods)) / (Q::one() - delta)
}

/// `Σ_{τ} δ^τ ℓ_τ`, computed Horner-style from the last epoch backwards.
pub fn discounted_sum(delta: &Q, losses: &[Q]) -> Q {
    losses.iter().rev().fold(Q::zero(), |acc, l| l + delta * acc)
}

/// Interest in units on `principal` units at `rate` (a fraction) over `hours`.
pub fn accrual_units(principal: &Q, rate: &Q, hours: i64) -> Q {
    principal * rate * q(hours, 8760)
}

/// Nearest integer, ties to the even neighbour; computed via `2x` so it
/// does not mirror the library's floor-and-compare approach.
pub fn round_half_even(x: &Q) -> BigInt {
    let twice = x * int(2);
    let n = twice.numer();
    let d = twice.denom();
    // floor(2x) and whether 2x is an integer.
    let (fl, rem) = n.div_mod_floor(d);
    if !rem.is_zero() {
        // Not a tie: round(x) = floor((floor(2x) + 1) / 2).
        return (fl + BigInt::one()).div_floor(&BigInt::from(2));
    }
    // 2x integral: x is an integer or exactly half-way.
    if fl.is_even() {
        return fl / BigInt::from(2);
    }
    let lo = (&fl - BigInt::one()) / BigInt::from(2);
    if lo.is_even() {
        lo
    } else {
        lo + BigInt::one()
    }
}

/// Micro-units from an exact unit amount, rounded half-even.
pub fn to_micros(units: &Q) -> i64 {
    let v = round_half_even(&(units * int(1_000_000)));
    i64::try_from(v).expect("fits i64")
}

pub fn abs(x: &Q) -> Q {
    x.abs()
}
