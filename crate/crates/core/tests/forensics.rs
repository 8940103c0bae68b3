use std::collections::BTreeSet;
use std::sync::Arc;

use sac_core::forensics::{hotstuff_scan, streamlet_scan, verify_evidence, violates, Condition, Evidence};
use sac_core::hash::Hash;
use sac_core::rng::Stream;
use sac_core::store::BlockStore;
use sac_core::types::{BftBlock, Protocol, VoteRecord, VoteType};
use sac_core::NodeId;

const N: usize = 4;

/// Random fork-heavy tree; siblings often share an epoch.
fn tree(s: &mut Stream, size: usize) -> (BlockStore, Vec<Arc<BftBlock>>) {
    let mut store = BlockStore::new();
    let mut blocks = vec![store.bft(&store.bft_genesis()).unwrap().clone()];
    for i in 0..size {
        let p = s.pick(&blocks).unwrap().clone();
        let b = Arc::new(BftBlock::new(p.hash, p.epoch + 1 + s.below(3), NodeId(i as u32), store.lc_genesis(), Hash::ZERO, p.depth + 1));
        store.insert_bft(b.clone()).unwrap();
        blocks.push(b);
    }
    (store, blocks)
}

fn hotstuff(voter: NodeId, b: &BftBlock, vote_type: VoteType) -> VoteRecord {
    VoteRecord { protocol: Protocol::Hotstuff, vote_type, ..VoteRecord::streamlet(voter, b) }
}

fn all_pairs(votes: &[VoteRecord], c: Condition, store: &BlockStore, ctx: impl Fn(&VoteRecord, &VoteRecord) -> Vec<VoteRecord>) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    for a in votes {
        for b in votes {
            if violates(c, a, b, store, &ctx(a, b), N) {
                out.insert(a.voter);
            }
        }
    }
    out
}

fn accused(ev: &[Evidence], c: Condition) -> BTreeSet<NodeId> {
    ev.iter().filter(|e| e.condition == c).map(|e| e.accused).collect()
}

#[test]
fn streamlet_scan_matches_all_pairs() {
    let mut s = Stream::new(11, "streamlet-scan");
    let mut seen = [0usize; 2];
    for _ in 0..300 {
        let size = 1 + s.below(10) as usize;
        let (store, blocks) = tree(&mut s, size);
        let votes: Vec<VoteRecord> = (0..s.below(25))
            .map(|_| VoteRecord::streamlet(NodeId(s.below(N as u64) as u32), s.pick(&blocks[1..]).unwrap()))
            .collect();
        let ev = streamlet_scan(&votes);
        for (i, c) in [Condition::Streamlet1, Condition::Streamlet2].into_iter().enumerate() {
            let want = all_pairs(&votes, c, &store, |_, _| Vec::new());
            seen[i] += want.len();
            assert_eq!(accused(&ev, c), want, "{c:?}");
            assert_eq!(ev.iter().filter(|e| e.condition == c).count(), want.len());
        }
        assert!(ev.iter().all(|e| verify_evidence(e, &store, N)));
    }
    assert!(seen.iter().all(|c| *c > 20), "{seen:?}");
}

#[test]
fn hotstuff_scan_matches_all_pairs() {
    let mut s = Stream::new(12, "hotstuff-scan");
    let types = [VoteType::Prepare, VoteType::Precommit, VoteType::Commit];
    let mut seen = [0usize; 2];
    for _ in 0..300 {
        let size = 1 + s.below(8) as usize;
        let (store, blocks) = tree(&mut s, size);
        let votes: Vec<VoteRecord> = (0..s.below(40))
            .map(|_| hotstuff(NodeId(s.below(N as u64) as u32), s.pick(&blocks[1..]).unwrap(), *s.pick(&types).unwrap()))
            .collect();
        let report = hotstuff_scan(&votes, &store, N).unwrap();
        let between = |a: &VoteRecord, b: &VoteRecord| -> Vec<VoteRecord> {
            votes
                .iter()
                .filter(|v| v.vote_type == VoteType::Prepare && v.epoch_or_view > a.epoch_or_view && v.epoch_or_view < b.epoch_or_view)
                .copied()
                .collect()
        };
        let h1 = all_pairs(&votes, Condition::Hotstuff1, &store, |_, _| Vec::new());
        let h2 = all_pairs(&votes, Condition::Hotstuff2, &store, between);
        seen[0] += h1.len();
        seen[1] += h2.len();
        assert_eq!(accused(&report.evidence, Condition::Hotstuff1), h1);
        assert_eq!(accused(&report.evidence, Condition::Hotstuff2), h2);
        assert!(report.evidence.iter().all(|e| verify_evidence(e, &store, N)));
        for sup in &report.suppressed {
            let [c, p] = &sup.votes;
            assert!(!violates(Condition::Hotstuff2, c, p, &store, &between(c, p), N));
        }
    }
    assert!(seen.iter().all(|c| *c > 20), "{seen:?}");
}

#[test]
fn tampered_evidence_is_rejected() {
    let mut s = Stream::new(13, "tamper");
    let mut checked = 0;
    for _ in 0..100 {
        let (store, blocks) = tree(&mut s, 8);
        let votes: Vec<VoteRecord> = (0..20).map(|_| VoteRecord::streamlet(NodeId(s.below(N as u64) as u32), s.pick(&blocks[1..]).unwrap())).collect();
        for e in streamlet_scan(&votes) {
            assert!(verify_evidence(&e, &store, N));
            let mut variants = Vec::new();
            for i in 0..2 {
                let mut m = e.clone();
                m.votes[i].voter = NodeId(m.votes[i].voter.0 + 1);
                variants.push(m);
                let mut m = e.clone();
                m.votes[i].epoch_or_view += 1;
                variants.push(m);
                let mut m = e.clone();
                m.votes[i].block_depth += 1;
                variants.push(m);
                let mut m = e.clone();
                m.votes[i].block = Hash::tagged(7, &[i as u8]);
                variants.push(m);
                let mut m = e.clone();
                m.votes[i].protocol = Protocol::Hotstuff;
                variants.push(m);
            }
            let mut m = e.clone();
            m.accused = NodeId(e.accused.0 + 1);
            variants.push(m);
            let mut m = e.clone();
            m.condition = if e.condition == Condition::Streamlet1 { Condition::Streamlet2 } else { Condition::Streamlet1 };
            variants.push(m);
            let mut m = e.clone();
            m.context = Some(Vec::new());
            variants.push(m);
            for m in variants {
                assert!(!verify_evidence(&m, &store, N), "{m:?}");
                checked += 1;
            }
        }
    }
    assert!(checked > 1000, "{checked}");
}

#[test]
fn hotstuff_evidence_needs_its_context() {
    let mut store = BlockStore::new();
    let g = store.bft_genesis();
    let lc = store.lc_genesis();
    let mk = |store: &mut BlockStore, prev: Hash, epoch, proposer, depth| {
        let b = Arc::new(BftBlock::new(prev, epoch, NodeId(proposer), lc, Hash::ZERO, depth));
        store.insert_bft(b.clone()).unwrap();
        b
    };
    let a1 = mk(&mut store, g, 1, 0, 1);
    let b2 = mk(&mut store, g, 2, 1, 1);
    let c3 = mk(&mut store, g, 3, 2, 1);
    let commit = hotstuff(NodeId(0), &a1, VoteType::Commit);
    let prepare = hotstuff(NodeId(0), &c3, VoteType::Prepare);
    let quorum: Vec<VoteRecord> = (1..4).map(|v| hotstuff(NodeId(v), &b2, VoteType::Prepare)).collect();

    let report = hotstuff_scan(&[commit, prepare], &store, N).unwrap();
    assert_eq!(report.evidence.len(), 1);
    let e = &report.evidence[0];
    assert!(verify_evidence(e, &store, N));
    let mut hidden = e.clone();
    hidden.context = None;
    assert!(!verify_evidence(&hidden, &store, N));
    let mut padded = e.clone();
    padded.context = Some(quorum.clone());
    assert!(!verify_evidence(&padded, &store, N));

    let mut all = vec![commit, prepare];
    all.extend(&quorum);
    let report = hotstuff_scan(&all, &store, N).unwrap();
    assert!(report.evidence.is_empty());
    assert_eq!(report.suppressed.len(), 1);
    assert_eq!(report.suppressed[0].quorum_block, b2.hash);
}

#[test]
fn unknown_block_is_an_error() {
    let store = BlockStore::new();
    let b = BftBlock::new(store.bft_genesis(), 1, NodeId(0), store.lc_genesis(), Hash::ZERO, 1);
    assert!(hotstuff_scan(&[hotstuff(NodeId(0), &b, VoteType::Prepare)], &store, N).is_err());
}
