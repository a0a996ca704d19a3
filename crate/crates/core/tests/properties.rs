//! Property checks over leaf encoding, Merkle proofs, the root ledger,
//! incentive identities and whole-scenario invariants.

mod oracle;

use std::path::PathBuf;

use micropay::commitment::{
    verify_inclusion, CreditRecord, LeafRecord, LedgerConfig, MerkleRoot, MerkleTree, RootKind, RootLedger,
    CREDIT_LEAF_LEN, TX_LEAF_LEN,
};
use micropay::incentives::{
    buyer_utilities, default_deviation_gain, delta_threshold, discounted_loss, merchant_utilities, suspension_loss,
    BuyerParams, BuyerTx, MerchantParams, MerchantTx,
};
use micropay::model::{AgentId, Conduct, EpochIndex, Role, Transaction};
use micropay::money::{apply_rate, round_half_even, Amount, Rate, Ratio};
use micropay::sim::{run_scenario, ScenarioConfig, Strategy as Play};
use proptest::prelude::*;

fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn big(r: &Ratio) -> oracle::Q {
    r.as_big().clone()
}

fn tx_strategy() -> impl Strategy<Value = Transaction> {
    (any::<[u8; 32]>(), any::<[u8; 32]>(), any::<[u8; 32]>(), 1..i64::MAX, 0..i64::MAX, any::<u64>()).prop_map(
        |(id, b, m, pay, value, epoch)| Transaction {
            id,
            buyer: AgentId::new(b, Role::Buyer),
            merchant: AgentId::new(m, Role::Merchant),
            payment: Amount::from_micros(pay),
            service_value: Amount::from_micros(value),
            epoch: EpochIndex(epoch),
        },
    )
}

fn credit_strategy() -> impl Strategy<Value = CreditRecord> {
    let role = prop_oneof![Just(Role::Buyer), Just(Role::Merchant), Just(Role::Guarantor)];
    (any::<[u8; 32]>(), role, any::<i64>(), any::<u64>()).prop_map(|(bytes, role, remaining, epoch)| CreditRecord {
        agent: AgentId::new(bytes, role),
        remaining: Amount::from_micros(remaining),
        epoch: EpochIndex(epoch),
    })
}

fn leaves(n: usize, epoch: u64) -> Vec<LeafRecord> {
    let buyer = AgentId::derive(Role::Buyer, "p-buyer");
    let merchant = AgentId::derive(Role::Merchant, "p-merchant");
    (0..n)
        .map(|i| {
            let mut id = [0u8; 32];
            id[..8].copy_from_slice(&(i as u64).to_be_bytes());
            LeafRecord::Tx(
                Transaction::new(id, buyer, merchant, Amount::units(1 + i as i64), Amount::units(1), EpochIndex(epoch))
                    .unwrap(),
            )
        })
        .collect()
}

fn amount(max_units: i64) -> impl Strategy<Value = Amount> {
    (0..=max_units * 1000).prop_map(|milli| Amount::from_micros(milli * 1000))
}

fn merchant_tx() -> impl Strategy<Value = MerchantTx> {
    (amount(200), amount(10), amount(10), amount(10), amount(10), amount(20), amount(50)).prop_map(
        |(payment, fee, exec_cost, fee_rebate, outside_option, late_penalty, default_penalty)| MerchantTx {
            payment,
            fee,
            exec_cost,
            fee_rebate,
            outside_option,
            late_penalty,
            default_penalty,
        },
    )
}

fn buyer_tx() -> impl Strategy<Value = BuyerTx> {
    (amount(200), amount(200), amount(10), amount(20)).prop_map(
        |(service_value, payment, outside_option, late_penalty)| BuyerTx {
            service_value,
            payment,
            outside_option,
            late_penalty,
        },
    )
}

fn sum<T>(items: &[T], f: impl Fn(&T) -> Amount) -> Ratio {
    Ratio::from_big(items.iter().map(|t| big(&f(t).to_ratio())).sum())
}

fn conduct() -> impl Strategy<Value = Conduct> {
    prop_oneof![Just(Conduct::Conform), Just(Conduct::Late), Just(Conduct::Default)]
}

fn sim_strategy() -> impl Strategy<Value = Play> {
    prop_oneof![
        Just(Play::AlwaysConform),
        Just(Play::AlwaysLate),
        Just(Play::GrimConform),
        (0..6u64).prop_map(|epoch| Play::DefaultAtEpoch { epoch }),
        (0..6u64, conduct()).prop_map(|(epoch, conduct)| Play::DeviateOnce { epoch, conduct }),
    ]
}

proptest! {
    #[test]
    fn rounding_matches_the_oracle(n in -1_000_000i64..1_000_000, d in 1i64..64) {
        let x = oracle::q(n, d);
        prop_assert_eq!(round_half_even(&x), oracle::round_half_even(&x));
    }

    #[test]
    fn accrual_matches_the_oracle(principal in 0i64..1_000_000_000_000, ppm in 0u64..2_000_000, hours in 0u64..9000) {
        let got = apply_rate(Amount::from_micros(principal), Rate::from_ppm(ppm), hours).unwrap();
        let units = oracle::accrual_units(&oracle::q(principal, 1_000_000), &oracle::q(ppm as i64, 1_000_000), hours as i64);
        prop_assert_eq!(got.micros(), oracle::to_micros(&units));
    }

    #[test]
    fn tx_leaf_round_trips(tx in tx_strategy()) {
        let leaf = LeafRecord::Tx(tx);
        let bytes = leaf.encode();
        prop_assert_eq!(bytes.len(), TX_LEAF_LEN);
        prop_assert_eq!(LeafRecord::decode(&bytes).unwrap(), leaf);
    }

    #[test]
    fn credit_leaf_round_trips(record in credit_strategy()) {
        let leaf = LeafRecord::Credit(record);
        let bytes = leaf.encode();
        prop_assert_eq!(bytes.len(), CREDIT_LEAF_LEN);
        prop_assert_eq!(LeafRecord::decode(&bytes).unwrap(), leaf);
    }

    #[test]
    fn any_bit_flip_in_a_leaf_breaks_its_proof(
        n in 1usize..64,
        pick in any::<prop::sample::Index>(),
        byte in 2usize..TX_LEAF_LEN,
        bit in 0u8..8,
    ) {
        let batch = leaves(n, 5);
        let tree = MerkleTree::build(RootKind::TxRoot, EpochIndex(5), &batch).unwrap();
        let i = pick.index(n);
        let proof = tree.prove(i).unwrap();
        prop_assert!(verify_inclusion(&tree.root(), &batch[i], &proof));
        let mut bytes = batch[i].encode();
        bytes[byte] ^= 1 << bit;
        let forged = LeafRecord::decode(&bytes).unwrap();
        prop_assert!(!verify_inclusion(&tree.root(), &forged, &proof));
    }

    #[test]
    fn proof_length_is_logarithmic(n in 1usize..200) {
        let tree = MerkleTree::build(RootKind::TxRoot, EpochIndex(0), &leaves(n, 0)).unwrap();
        let depth = usize::BITS - (n - 1).leading_zeros();
        for i in [0, n / 2, n - 1] {
            prop_assert!(tree.prove(i).unwrap().siblings.len() <= depth as usize);
        }
    }

    #[test]
    fn ledger_is_append_only(
        subs in prop::collection::vec((0u64..12, any::<bool>(), 0u64..60, any::<u8>()), 1..40),
    ) {
        let mut ledger = RootLedger::new(LedgerConfig::default());
        for (epoch, tx, at, fill) in subs {
            let kind = if tx { RootKind::TxRoot } else { RootKind::CreditRoot };
            let before = ledger.entries().to_vec();
            let latest = ledger.latest(kind);
            let root = MerkleRoot { digest: [fill; 32], kind, epoch: EpochIndex(epoch) };
            let accepted = ledger.submit_root(&root, at).is_accepted();
            let after = ledger.entries();
            prop_assert_eq!(&after[..before.len()], &before[..]);
            prop_assert_eq!(after.len(), before.len() + usize::from(accepted));
            if accepted {
                let (opens, closes) = ledger.window(EpochIndex(epoch));
                prop_assert!(opens <= at && at < closes);
                prop_assert!(latest.is_none_or(|l| l < EpochIndex(epoch)));
                prop_assert_eq!(ledger.root_for(EpochIndex(epoch), kind), Some(root));
            }
        }
    }

    #[test]
    fn constant_losses_make_the_bound_tight(
        num in 0i64..100,
        periods in 0u32..12,
        floor in 0i64..1_000_000_000,
    ) {
        let delta = Ratio::new(num, 100).unwrap();
        let floor = Amount::from_micros(floor);
        let loss = suspension_loss(&delta, periods, floor).unwrap();
        prop_assert_eq!(&loss.bound, &loss.exact_sum);
        let flat = vec![floor; periods as usize];
        prop_assert_eq!(discounted_loss(&delta, &flat).unwrap(), loss.exact_sum.clone());
        let expected = oracle::geometric_bound(&big(&delta), periods, &oracle::q(floor.micros(), 1_000_000));
        prop_assert_eq!(big(&loss.bound), expected);
    }

    #[test]
    fn losses_above_the_floor_dominate_the_bound(
        num in 0i64..100,
        floor in 0i64..1_000_000,
        extra in prop::collection::vec(0i64..1_000_000, 0..10),
    ) {
        let delta = Ratio::new(num, 100).unwrap();
        let seq: Vec<Amount> = extra.iter().map(|e| Amount::from_micros(floor + e)).collect();
        let bound = suspension_loss(&delta, seq.len() as u32, Amount::from_micros(floor)).unwrap().bound;
        prop_assert!(bound <= discounted_loss(&delta, &seq).unwrap());
    }

    #[test]
    fn merchant_gap_identities(
        txs in prop::collection::vec(merchant_tx(), 1..5),
        stake_reward in amount(20),
        stake_cost in amount(20),
    ) {
        let p = MerchantParams { transactions: txs.clone(), stake_reward, stake_cost, ..MerchantParams::default() };
        let u = merchant_utilities(&p);
        let delay_gap = sum(&txs, |t| t.late_penalty) - sum(&txs, |t| t.outside_option);
        prop_assert_eq!(&u.conform - &u.late, delay_gap);
        let walk_gap = stake_reward.to_ratio() + sum(&txs, |t| t.default_penalty) + sum(&txs, |t| t.fee_rebate)
            - sum(&txs, |t| t.exec_cost) - sum(&txs, |t| t.fee) - sum(&txs, |t| t.late_penalty);
        prop_assert_eq!(&u.late - &u.default, walk_gap);

        let rows: Vec<oracle::MTx> = txs.iter().map(|t| oracle::MTx {
            payment: t.payment.micros(),
            fee: t.fee.micros(),
            exec: t.exec_cost.micros(),
            rebate: t.fee_rebate.micros(),
            psi: t.outside_option.micros(),
            late_penalty: t.late_penalty.micros(),
            default_penalty: t.default_penalty.micros(),
        }).collect();
        let (c, l, d) = oracle::merchant_rows(&rows, stake_reward.micros(), stake_cost.micros());
        let scale = oracle::int(1_000_000);
        prop_assert_eq!(big(&u.conform), c / &scale);
        prop_assert_eq!(big(&u.late), l / &scale);
        prop_assert_eq!(big(&u.default), d / &scale);
    }

    #[test]
    fn buyer_gap_identity(
        txs in prop::collection::vec(buyer_tx(), 1..5),
        terms in prop::collection::vec(amount(20), 7),
        omega_num in 0i64..8,
    ) {
        let omega = Ratio::new(omega_num, 4).unwrap();
        let p = BuyerParams {
            transactions: txs.clone(),
            tx_rebate: terms[0],
            stake_reward: terms[1],
            stake_cost: terms[2],
            financing_cost: terms[3],
            credit_reward: terms[4],
            credit_penalty: terms[5],
            stake: terms[6],
            credit_limit: Amount::units(50),
            conversion: omega.clone(),
            ..BuyerParams::default()
        };
        let u = buyer_utilities(&p);
        let gap = sum(&txs, |t| t.late_penalty) - sum(&txs, |t| t.outside_option)
            + p.tx_rebate.to_ratio()
            + p.financing_cost.to_ratio()
            + &omega * (p.credit_reward.to_ratio() + p.credit_penalty.to_ratio());
        prop_assert_eq!(&u.conform - &u.late, gap);

        let inputs = oracle::BuyerInputs {
            txs: txs.iter().map(|t| (
                t.service_value.micros(), t.payment.micros(), t.outside_option.micros(), t.late_penalty.micros(),
            )).collect(),
            tx_rebate: p.tx_rebate.micros(),
            stake_reward: p.stake_reward.micros(),
            stake_cost: p.stake_cost.micros(),
            financing_cost: p.financing_cost.micros(),
            credit_reward: p.credit_reward.micros(),
            credit_penalty: p.credit_penalty.micros(),
            credit_limit: p.credit_limit.micros(),
            stake: p.stake.micros(),
            omega: big(&omega),
        };
        let (c, l, d) = oracle::buyer_rows(&inputs);
        let scale = oracle::int(1_000_000);
        prop_assert_eq!(big(&u.conform), c / &scale);
        prop_assert_eq!(big(&u.late), l / &scale);
        prop_assert_eq!(big(&u.default), d / &scale);
    }

    #[test]
    fn every_scenario_conserves_value(
        buyer in sim_strategy(),
        merchant in sim_strategy(),
        horizon in 1u64..7,
        auction in any::<bool>(),
    ) {
        let mut cfg = scenario(if auction { "auction" } else { "conform" });
        cfg.horizon = horizon;
        cfg.buyers[0].strategy = buyer;
        cfg.merchants[0].strategy = merchant;
        let trace = run_scenario(&cfg).unwrap();
        for record in &trace.epochs {
            prop_assert_eq!(record.settlement.flows.residual(), 0);
        }
    }

    #[test]
    fn default_is_absorbing_under_grim_trigger(k in 0u64..5, extra in 1u64..4) {
        let mut cfg = scenario("default");
        cfg.horizon = k + 1 + extra;
        cfg.buyers[0].strategy = Play::DefaultAtEpoch { epoch: k };
        cfg.merchants[0].strategy = Play::GrimConform;
        let trace = run_scenario(&cfg).unwrap();
        for record in &trace.epochs {
            let alice = record.agent("alice").unwrap();
            let shop = record.agent("shop").unwrap();
            if record.epoch.0 < k {
                prop_assert_eq!(alice.conduct, Some(Conduct::Conform));
                prop_assert!(alice.alive);
            } else if record.epoch.0 == k {
                prop_assert_eq!(alice.conduct, Some(Conduct::Default));
                prop_assert!(!alice.alive);
            } else {
                prop_assert_eq!(alice.conduct, None);
                prop_assert!(!alice.alive);
                prop_assert_eq!(shop.conduct, None);
                prop_assert!(alice.stage_payoff.is_zero());
            }
        }
    }
}

/// Threshold moves the right way along every axis of a 10×10×10 grid, and
/// `δ ≥ δ̲` coincides with a non-positive default gain.
#[test]
fn threshold_is_monotone_on_a_grid() {
    let v_max: Vec<i64> = (1..=10).map(|i| 20 * i).collect();
    let stakes: Vec<i64> = (0..10).map(|i| 10 * i).collect();
    let u_bar: Vec<i64> = (1..=10).map(|i| 3 * i).collect();
    let threshold = |v: i64, s: i64, u: i64| {
        delta_threshold(Amount::units(v), Amount::units(s), &Ratio::from_integer(u)).unwrap().value
    };
    for (a, &v) in v_max.iter().enumerate() {
        for (b, &s) in stakes.iter().enumerate() {
            for (c, &u) in u_bar.iter().enumerate() {
                let t = threshold(v, s, u);
                assert!(!t.is_negative() && t < Ratio::one());
                if v > s {
                    let o = oracle::delta_threshold(&oracle::int(v), &oracle::int(s), &oracle::int(u));
                    assert_eq!(big(&t), o);
                }
                if a + 1 < v_max.len() {
                    assert!(threshold(v_max[a + 1], s, u) >= t);
                }
                if b + 1 < stakes.len() {
                    assert!(threshold(v, stakes[b + 1], u) <= t);
                }
                if c + 1 < u_bar.len() {
                    assert!(threshold(v, s, u_bar[c + 1]) <= t);
                }
                for num in [0, 25, 50, 74, 75, 90, 99] {
                    let d = Ratio::new(num, 100).unwrap();
                    let gain = default_deviation_gain(Amount::units(v), Amount::units(s), &Ratio::from_integer(u), &d)
                        .unwrap();
                    assert_eq!(d >= t, !gain.is_positive(), "v {v} s {s} u {u} δ {d}");
                }
            }
        }
    }
}

#[test]
fn rounding_ties_go_to_even() {
    for (n, want) in [(1, 0), (3, 2), (5, 2), (-1, 0), (-3, -2), (7, 4)] {
        let x = oracle::q(n, 2);
        assert_eq!(oracle::round_half_even(&x), want.into());
        assert_eq!(round_half_even(&x), want.into());
    }
}
