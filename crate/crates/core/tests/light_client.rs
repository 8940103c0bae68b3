use std::sync::Arc;

use sac_core::bft::compose_bft_block;
use sac_core::hash::Hash;
use sac_core::light_client::{HeaderOutcome, HonestProver, LightClient, Mode, ProverIndex};
use sac_core::merkle::merkle_root;
use sac_core::store::BlockStore;
use sac_core::types::{BftBlock, LcBlock, Transaction, VoteRecord};
use sac_core::{NodeId, TxId, TxRef};

/// One validator, so every epoch's leader is node 0 and one vote notarizes.
struct World {
    store: BlockStore,
    client: LightClient,
    slot: u64,
}

impl World {
    fn new() -> Self {
        World { store: BlockStore::new(), client: LightClient::new(Mode::FollowDa, 1, 0, 0), slot: 0 }
    }

    fn lc(&mut self, prev: Hash, ids: &[u64], auxref: Hash) -> Hash {
        self.slot += 1;
        let txs: Vec<TxRef> = ids.iter().map(|i| Arc::new(Transaction::mint(*i, &[1]))).collect();
        let draft = LcBlock::new(prev, self.slot, NodeId(0), txs.clone(), auxref, Hash::ZERO);
        let root = merkle_root(&self.store.lc_innovation(&draft).unwrap());
        let b = Arc::new(LcBlock::new(prev, self.slot, NodeId(0), txs, auxref, root));
        self.store.insert_lc(b.clone()).unwrap();
        assert_eq!(self.client.sync_lc(b.header()), HeaderOutcome::Stored);
        b.hash
    }

    /// Proposes and, if `notarize`, votes.
    fn bft(&mut self, prev: Hash, snapshot: Hash, epoch: u64, notarize: bool) -> Hash {
        let b = Arc::new(compose_bft_block(&self.store, &prev, &snapshot, epoch, NodeId(0)).unwrap());
        self.store.insert_bft(b.clone()).unwrap();
        assert_eq!(self.client.sync_bft(b.clone()), HeaderOutcome::Stored);
        if notarize {
            self.client.add_vote(VoteRecord::streamlet(NodeId(0), &b));
        }
        b.hash
    }

    fn accepts(&self, tx: u64) -> bool {
        let mut index = ProverIndex::new();
        index.refresh(&self.store);
        self.client.spv_available(TxId(tx), &mut HonestProver { index: &index }).accepted()
    }

    fn in_da(&self, tx: u64) -> bool {
        let fin = self.client.finalized_tip();
        let da = self.store.log_da(&fin, &self.client.confirmed_tip()).unwrap();
        da.txs.iter().any(|t| t.id == TxId(tx))
    }
}

/// B1, B2, B3 snapshot `l1`; B2 is final.
fn finalized_base(w: &mut World) -> (Hash, [Hash; 3]) {
    let g = w.store.lc_genesis();
    let l1 = w.lc(g, &[1], Hash::ZERO);
    let b0 = w.store.bft_genesis();
    let b1 = w.bft(b0, l1, 1, true);
    let b2 = w.bft(b1, l1, 2, true);
    let b3 = w.bft(b2, l1, 3, true);
    assert_eq!(w.client.finalized_tip(), b2);
    (l1, [b1, b2, b3])
}

#[test]
fn auxref_at_finalized_tip_opens_lc_root() {
    let mut w = World::new();
    let (l1, [_, b2, _]) = finalized_base(&mut w);
    w.lc(l1, &[2], b2);
    let p = w.client.permitted_available();
    assert!(!p.gated);
    assert!(w.accepts(1) && w.accepts(2));
    assert!(w.in_da(2));
}

#[test]
fn consistent_snapshots_after_auxref_keep_lc_root() {
    let mut w = World::new();
    let (l1, [_, b2, b3]) = finalized_base(&mut w);
    let l2 = w.lc(l1, &[2], b2);
    w.bft(b3, l2, 4, true);
    assert_eq!(w.client.finalized_tip(), b3);
    assert!(!w.client.permitted_available().gated);
    assert!(w.accepts(2));
}

#[test]
fn conflicting_snapshot_after_auxref_closes_gate() {
    let mut w = World::new();
    let (l1, [_, b2, b3]) = finalized_base(&mut w);
    let l2a = w.lc(l1, &[2], b2);
    let l2b = w.lc(l1, &[3], b2);
    w.lc(l2a, &[4], b2);
    let b4 = w.bft(b3, l2b, 4, true);
    w.bft(b4, l2b, 5, true);
    assert_eq!(w.client.finalized_tip(), b4);
    let p = w.client.permitted_available();
    assert!(p.gated);
    assert!(w.accepts(3), "finalized snapshot stays provable");
    assert!(!w.accepts(4), "stale LC commitment withheld");
    assert!(!w.accepts(2));
}

#[test]
fn auxref_off_the_finalized_chain_falls_back_to_bft_roots() {
    let mut w = World::new();
    let (l1, [_, _, b3]) = finalized_base(&mut w);
    let b4 = w.bft(b3, l1, 4, false);
    w.lc(l1, &[2], b4);
    let p = w.client.permitted_available();
    assert!(p.gated);
    assert!(w.accepts(1));
    assert!(!w.accepts(2));
}

#[test]
fn regressed_auxref_is_rejected() {
    let mut w = World::new();
    let (l1, [b1, b2, _]) = finalized_base(&mut w);
    let l2 = w.lc(l1, &[2], b2);
    let bad = LcBlock::new(l2, 100, NodeId(0), Vec::new(), b1, Hash::ZERO);
    assert_eq!(w.client.sync_lc(bad.header()), HeaderOutcome::Rejected);
    let mut forged = LcBlock::new(l2, 101, NodeId(0), Vec::new(), b2, Hash::ZERO).header();
    forged.slot += 1;
    assert_eq!(w.client.sync_lc(forged), HeaderOutcome::Rejected);
}

#[test]
fn out_of_order_sync_converges() {
    let mut w = World::new();
    let (l1, [_, b2, b3]) = finalized_base(&mut w);
    let l2 = w.lc(l1, &[2], b2);
    let b4 = w.bft(b3, l2, 4, true);

    let mut lcs: Vec<_> = w.store.lc_blocks().filter(|b| b.slot > 0).map(|b| b.header()).collect();
    lcs.sort_by_key(|h| std::cmp::Reverse(h.slot));
    let mut bfts: Vec<Arc<BftBlock>> = w.store.bft_blocks().filter(|b| b.depth > 0).cloned().collect();
    bfts.sort_by_key(|b| std::cmp::Reverse(b.depth));

    let mut c = LightClient::new(Mode::FollowDa, 1, 0, 0);
    for b in &bfts {
        c.add_vote(VoteRecord::streamlet(NodeId(0), b));
        assert_eq!(c.sync_bft(b.clone()), HeaderOutcome::Buffered);
    }
    for h in lcs {
        c.sync_lc(h);
    }
    assert_eq!(c.pending(), 0);
    assert_eq!(c.lc_tip(), w.client.lc_tip());
    assert_eq!(c.finalized_tip(), b3);
    assert_eq!(w.client.finalized_tip(), b3);
    assert!(c.bft_header(&b4).is_some());
}

#[test]
fn wrong_leader_is_rejected() {
    let mut c = LightClient::new(Mode::FollowDa, 4, 0, 9);
    let g = LcBlock::genesis();
    let bg = BftBlock::genesis(g.hash);
    let leader = sac_core::bft::epoch_leader(1, 9, 4);
    let other = NodeId((leader.0 + 1) % 4);
    let b = BftBlock::new(bg.hash, 1, other, g.hash, Hash::ZERO, 1);
    assert_eq!(c.sync_bft(Arc::new(b)), HeaderOutcome::Rejected);
    let b = BftBlock::new(bg.hash, 1, leader, g.hash, Hash::ZERO, 2);
    assert_eq!(c.sync_bft(Arc::new(b)), HeaderOutcome::Rejected);
}
