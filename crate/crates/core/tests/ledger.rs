use std::sync::Arc;

use proptest::prelude::*;

use sac_core::codec::Canonical;
use sac_core::hash::Hash;
use sac_core::ledger::{sanitize, strip_prefix, supersanitize, Sanitizer};
use sac_core::merkle::{merkleize, verify_inclusion, MerkleTree, EMPTY_ROOT};
use sac_core::oracle::{self, ledger_sweep, merkle_sweep, proof_mutations};
use sac_core::rng::Stream;
use sac_core::types::{BftBlock, LcBlock, Ledger, Transaction, VoteRecord};
use sac_core::{CoinId, NodeId, TxId, TxRef};

fn pool(seed: u64, size: usize) -> Vec<TxRef> {
    oracle::tx_pool(&mut Stream::new(seed, "test-pool"), size)
}

fn arb_seq() -> impl Strategy<Value = Vec<TxRef>> {
    (any::<u64>(), 1usize..25, prop::collection::vec(any::<prop::sample::Index>(), 0..40)).prop_map(|(seed, size, picks)| {
        let p = pool(seed, size);
        picks.iter().map(|i| p[i.index(p.len())].clone()).collect()
    })
}

#[test]
fn fast_ledgers_match_replay_oracles() {
    let s = ledger_sweep(42, 500);
    assert_eq!(s.mismatches(), 0, "{s:?}");
}

#[test]
fn supersanitize_examples() {
    let m = |id, a: &[u64]| Arc::new(Transaction::mint(id, a));
    let sp = |id, from: u64, a: &[u64]| Arc::new(Transaction::spend(id, vec![CoinId::new(TxId(from), 0)], a));
    let (a, b) = (m(1, &[5]), sp(2, 1, &[5]));
    let double = sp(3, 1, &[4]);
    let ids = |l: Ledger| l.txs.iter().map(|t| t.id.0).collect::<Vec<_>>();
    assert_eq!(ids(supersanitize(&[a.clone(), b.clone(), double.clone()])), vec![1, 2]);
    assert_eq!(ids(supersanitize(&[b.clone(), a.clone(), b.clone()])), vec![1, 2]);
    assert_eq!(ids(supersanitize(&[sp(4, 1, &[6]), a.clone()])), vec![1]);
    assert_eq!(ids(supersanitize(&[Arc::new(Transaction::mint(9, &[]))])), Vec::<u64>::new());
    assert_eq!(ids(sanitize(&[a.clone(), a.clone(), b.clone()])), vec![1, 2]);
}

#[test]
fn strip_prefix_rejects_non_prefix() {
    let t = |i| Arc::new(Transaction::mint(i, &[1])) as TxRef;
    let full = Ledger::new(vec![t(1), t(2), t(3)]);
    assert_eq!(strip_prefix(&full, &Ledger::new(vec![t(1)])).unwrap().len(), 2);
    assert!(strip_prefix(&full, &Ledger::new(vec![t(2)])).is_err());
}

#[test]
fn merkle_exhaustive_small_trees() {
    let s = merkle_sweep(1..=33);
    assert_eq!(s.rejected_proofs, 0);
    assert_eq!(s.accepted_mutations, 0, "{s:?}");
    assert_eq!(merkleize(&[]).root(), EMPTY_ROOT);
}

#[test]
fn merkle_rejects_out_of_range() {
    let tree = MerkleTree::from_leaves(vec![Hash::ZERO; 3]);
    assert!(tree.prove(3).is_err());
}

#[test]
fn hash_vectors_are_stable() {
    let tx = Transaction::mint(1, &[5]);
    assert_eq!(tx.digest(), Transaction::from_bytes(&tx.to_bytes()).unwrap().digest());
    let g = LcBlock::genesis();
    assert_eq!(g.hash, LcBlock::genesis().hash);
    assert_ne!(g.hash, BftBlock::genesis(g.hash).hash);
    assert_ne!(Hash::tagged(0, b"x"), Hash::tagged(1, b"x"));
}

proptest! {
    #[test]
    fn incremental_equals_batch(seq in arb_seq(), cut in any::<prop::sample::Index>()) {
        let batch = supersanitize(&seq);
        let k = cut.index(seq.len() + 1);
        let mut s = Sanitizer::resume(&supersanitize(&seq[..k]));
        s.extend(&seq[k..]);
        prop_assert_eq!(s.finish(), batch.clone());
        prop_assert_eq!(batch, oracle::supersanitize(&seq));
    }

    #[test]
    fn supersanitize_is_idempotent_and_prefix_monotone(seq in arb_seq(), cut in any::<prop::sample::Index>()) {
        let full = supersanitize(&seq);
        prop_assert_eq!(supersanitize(&full.txs), full.clone());
        let k = cut.index(seq.len() + 1);
        prop_assert!(supersanitize(&seq[..k]).is_prefix_of(&full));
    }

    #[test]
    fn merkle_roundtrip(n in 1usize..=64, pick in any::<prop::sample::Index>(), flip in 0usize..2048) {
        let leaves: Vec<Hash> = (0..n as u64).map(|i| Hash::tagged(0, &i.to_be_bytes())).collect();
        let tree = MerkleTree::from_leaves(leaves);
        let i = pick.index(n);
        let proof = tree.prove(i).unwrap();
        prop_assert!(verify_inclusion(&tree.root(), &proof));
        let muts = proof_mutations(&tree.root(), &proof);
        let (root, bad) = &muts[flip % muts.len()];
        prop_assert!(!verify_inclusion(root, bad));
    }

    #[test]
    fn codec_roundtrip(id in any::<u64>(), amounts in prop::collection::vec(any::<u64>(), 0..5), ins in prop::collection::vec((any::<u64>(), any::<u32>()), 0..4)) {
        let tx = Transaction::spend(id, ins.iter().map(|(t, i)| CoinId::new(TxId(*t), *i)).collect(), &amounts);
        prop_assert_eq!(Transaction::from_bytes(&tx.to_bytes()).unwrap(), tx.clone());
        let mut bytes = tx.to_bytes();
        bytes.push(0);
        prop_assert!(Transaction::from_bytes(&bytes).is_err());

        let lc = LcBlock::new(Hash::tagged(1, &id.to_le_bytes()), id % 1000, NodeId(3), vec![Arc::new(tx)], Hash::ZERO, Hash::ZERO);
        let back = LcBlock::from_bytes(&lc.to_bytes()).unwrap();
        prop_assert_eq!(back.hash, lc.hash);
        let b = BftBlock::new(Hash::ZERO, id, NodeId(1), lc.hash, Hash::ZERO, 1);
        prop_assert_eq!(BftBlock::from_bytes(&b.to_bytes()).unwrap(), b.clone());
        let v = VoteRecord::streamlet(NodeId(2), &b);
        prop_assert_eq!(VoteRecord::from_bytes(&v.to_bytes()).unwrap(), v);
    }
}
