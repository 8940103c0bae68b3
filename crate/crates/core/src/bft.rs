//! Streamlet with snapshot-carrying blocks: epoch leaders, notarization at
//! two thirds, finalization on three consecutive epochs, and the boycott
//! rule for unconfirmed snapshots.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::hash::Hash;
use crate::ledger::LedgerError;
use crate::merkle::merkle_root;
use crate::rng;
use crate::store::BlockStore;
use crate::types::{BftBlock, NodeId, Protocol, VoteRecord, VoteType};

/// Smallest voter count that is at least `2n/3`.
pub fn quorum(n: usize) -> usize {
    (2 * n).div_ceil(3)
}

pub fn epoch_leader(epoch: u64, seed: u64, n: usize) -> NodeId {
    NodeId(rng::range(seed, "leader", &[epoch], 0, n as u64 - 1) as u32)
}

/// Anything that can resolve BFT headers: full stores and light clients.
pub trait BftLookup {
    fn get_bft(&self, h: &Hash) -> Option<&BftBlock>;
}

impl BftLookup for BlockStore {
    fn get_bft(&self, h: &Hash) -> Option<&BftBlock> {
        self.bft(h).map(|b| &**b)
    }
}

impl BftLookup for HashMap<Hash, std::sync::Arc<BftBlock>> {
    fn get_bft(&self, h: &Hash) -> Option<&BftBlock> {
        self.get(h).map(|b| &**b)
    }
}

/// Ancestor of `h` at `depth`, walking headers.
pub fn ancestor_at<L: BftLookup>(lookup: &L, h: &Hash, depth: u64) -> Option<Hash> {
    let mut b = lookup.get_bft(h)?;
    if b.depth < depth {
        return None;
    }
    while b.depth > depth {
        b = lookup.get_bft(&b.prev)?;
    }
    Some(b.hash)
}

/// `a ⪯ b`; `None` if ancestry cannot be resolved.
pub fn extends<L: BftLookup>(lookup: &L, b: &Hash, a: &Hash) -> Option<bool> {
    let da = lookup.get_bft(a)?.depth;
    if lookup.get_bft(b)?.depth < da {
        return Some(false);
    }
    Some(ancestor_at(lookup, b, da)? == *a)
}

pub fn conflicting<L: BftLookup>(lookup: &L, a: &Hash, b: &Hash) -> Option<bool> {
    Some(!extends(lookup, a, b)? && !extends(lookup, b, a)?)
}

/// Vote bookkeeping, notarization and finality for one validator (or one
/// light client following certificates).
#[derive(Clone, Debug)]
pub struct BftState {
    pub n: usize,
    genesis: Hash,
    votes: HashMap<Hash, BTreeMap<NodeId, VoteRecord>>,
    known: HashSet<Hash>,
    children: HashMap<Hash, Vec<Hash>>,
    notarized: HashSet<Hash>,
    /// Notarized with every ancestor notarized.
    chain_notarized: HashSet<Hash>,
    best_depth: u64,
    best_tips: BTreeSet<Hash>,
    pub voted_epochs: BTreeSet<u64>,
    pub finalized_tip: Hash,
    finalized_depth: u64,
    /// Every B2 ever finalized, in discovery order.
    pub finalized: Vec<Hash>,
}

impl BftState {
    pub fn new(n: usize, genesis: Hash) -> Self {
        let mut s = BftState {
            n,
            genesis,
            votes: HashMap::new(),
            known: HashSet::new(),
            children: HashMap::new(),
            notarized: HashSet::new(),
            chain_notarized: HashSet::new(),
            best_depth: 0,
            best_tips: BTreeSet::new(),
            voted_epochs: BTreeSet::new(),
            finalized_tip: genesis,
            finalized_depth: 0,
            finalized: Vec::new(),
        };
        s.known.insert(genesis);
        s.notarized.insert(genesis);
        s.chain_notarized.insert(genesis);
        s.best_tips.insert(genesis);
        s
    }

    pub fn is_notarized(&self, h: &Hash) -> bool {
        self.notarized.contains(h)
    }

    pub fn is_chain_notarized(&self, h: &Hash) -> bool {
        self.chain_notarized.contains(h)
    }

    pub fn notarized_blocks(&self) -> impl Iterator<Item = &Hash> {
        self.notarized.iter()
    }

    pub fn voters(&self, h: &Hash) -> BTreeSet<NodeId> {
        self.votes.get(h).map(|m| m.keys().copied().collect()).unwrap_or_default()
    }

    pub fn best_depth(&self) -> u64 {
        self.best_depth
    }

    /// Tip of a longest notarized chain; ties go to the smaller hash.
    pub fn longest_notarized_tip(&self) -> Hash {
        *self.best_tips.iter().next().expect("genesis is always a tip")
    }

    pub fn extends_longest(&self, prev: &Hash) -> bool {
        self.best_tips.contains(prev)
    }

    /// Registers a header the caller has stored.
    pub fn on_block<L: BftLookup>(&mut self, h: &Hash, lookup: &L) {
        let Some(blk) = lookup.get_bft(h) else { return };
        if !self.known.insert(*h) {
            return;
        }
        self.children.entry(blk.prev).or_default().push(*h);
        self.recount(h, lookup);
    }

    /// Records a vote; returns false for a duplicate (same voter, block).
    pub fn on_vote<L: BftLookup>(&mut self, vote: &VoteRecord, lookup: &L) -> bool {
        if vote.protocol != Protocol::Streamlet || vote.vote_type != VoteType::Generic {
            return false;
        }
        let entry = self.votes.entry(vote.block).or_default();
        if entry.contains_key(&vote.voter) {
            return false;
        }
        entry.insert(vote.voter, *vote);
        if self.known.contains(&vote.block) {
            self.recount(&vote.block, lookup);
        }
        true
    }

    fn recount<L: BftLookup>(&mut self, h: &Hash, lookup: &L) {
        if self.notarized.contains(h) {
            return;
        }
        let Some(blk) = lookup.get_bft(h) else { return };
        let count = self
            .votes
            .get(h)
            .map(|m| m.values().filter(|v| v.epoch_or_view == blk.epoch && v.block_depth == blk.depth).count())
            .unwrap_or(0);
        if count >= quorum(self.n) {
            self.notarized.insert(*h);
            if self.chain_notarized.contains(&blk.prev) {
                self.mark_chain(*h, lookup);
            }
        }
    }

    fn mark_chain<L: BftLookup>(&mut self, h: Hash, lookup: &L) {
        let mut stack = vec![h];
        while let Some(h) = stack.pop() {
            if !self.chain_notarized.insert(h) {
                continue;
            }
            let depth = lookup.get_bft(&h).map(|b| b.depth).unwrap_or(0);
            if depth > self.best_depth {
                self.best_depth = depth;
                self.best_tips.clear();
            }
            if depth == self.best_depth {
                self.best_tips.insert(h);
            }
            self.try_finalize_at(&h, lookup);
            if let Some(kids) = self.children.get(&h) {
                stack.extend(kids.iter().filter(|k| self.notarized.contains(*k)).copied());
            }
        }
    }

    /// `h` as B3: finalize its parent if B1, B2, B3 have consecutive epochs.
    fn try_finalize_at<L: BftLookup>(&mut self, h: &Hash, lookup: &L) {
        let Some(b3) = lookup.get_bft(h) else { return };
        let Some(b2) = lookup.get_bft(&b3.prev) else { return };
        if b2.hash == self.genesis || b2.prev == self.genesis {
            return;
        }
        let Some(b1) = lookup.get_bft(&b2.prev) else { return };
        if b1.epoch + 1 == b2.epoch && b2.epoch + 1 == b3.epoch {
            self.finalized.push(b2.hash);
            if b2.depth > self.finalized_depth || (b2.depth == self.finalized_depth && b2.hash < self.finalized_tip) {
                self.finalized_depth = b2.depth;
                self.finalized_tip = b2.hash;
            }
        }
    }

    pub fn finalize(&self) -> Hash {
        self.finalized_tip
    }
}

pub fn compose_bft_block(
    store: &BlockStore,
    prev: &Hash,
    snapshot: &Hash,
    epoch: u64,
    proposer: NodeId,
) -> Result<BftBlock, LedgerError> {
    let parent = store.bft(prev).ok_or(LedgerError::Unresolved(*prev))?;
    let root = merkle_root(&store.bft_innovation_for(prev, snapshot)?);
    Ok(BftBlock::new(*prev, epoch, proposer, *snapshot, root, parent.depth + 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VoteRefusal {
    WrongEpoch,
    AlreadyVoted,
    NotLongest,
    Boycott,
    BadAuxinnov,
    Unresolved,
}

/// Streamlet voting rule plus the boycott of unconfirmed snapshots.
pub fn vote_rule(
    state: &BftState,
    store: &BlockStore,
    proposal: &BftBlock,
    current_epoch: u64,
    confirmed_tip: &Hash,
) -> Result<(), VoteRefusal> {
    if proposal.epoch != current_epoch {
        return Err(VoteRefusal::WrongEpoch);
    }
    if state.voted_epochs.contains(&current_epoch) {
        return Err(VoteRefusal::AlreadyVoted);
    }
    if !state.extends_longest(&proposal.prev) {
        return Err(VoteRefusal::NotLongest);
    }
    if !store.has_lc(&proposal.b) || !store.lc_extends(confirmed_tip, &proposal.b) {
        return Err(VoteRefusal::Boycott);
    }
    let innov = store.bft_innovation_for(&proposal.prev, &proposal.b).map_err(|_| VoteRefusal::Unresolved)?;
    if merkle_root(&innov) != proposal.auxinnov {
        return Err(VoteRefusal::BadAuxinnov);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn vote(voter: u32, b: &BftBlock) -> VoteRecord {
        VoteRecord::streamlet(NodeId(voter), b)
    }

    #[test]
    fn quorum_values() {
        assert_eq!(quorum(3), 2);
        assert_eq!(quorum(4), 3);
        assert_eq!(quorum(6), 4);
        assert_eq!(quorum(10), 7);
        assert_eq!(quorum(1), 1);
    }

    #[test]
    fn leader_edges() {
        for e in 0..100 {
            assert_eq!(epoch_leader(e, 5, 1), NodeId(0));
            assert_eq!(epoch_leader(e, 5, 7), epoch_leader(e, 5, 7));
        }
    }

    fn chain(store: &mut BlockStore, epochs: &[u64]) -> Vec<BftBlock> {
        let mut prev = store.bft_genesis();
        let mut out = Vec::new();
        for (i, &e) in epochs.iter().enumerate() {
            let b = BftBlock::new(prev, e, NodeId(0), store.lc_genesis(), merkle_root(&[]), i as u64 + 1);
            store.insert_bft(Arc::new(b.clone())).unwrap();
            prev = b.hash;
            out.push(b);
        }
        out
    }

    #[test]
    fn notarize_and_finalize() {
        let mut store = BlockStore::new();
        let blocks = chain(&mut store, &[1, 2, 3]);
        let mut st = BftState::new(3, store.bft_genesis());
        for b in &blocks {
            st.on_block(&b.hash, &store);
            assert!(st.on_vote(&vote(0, b), &store));
            assert!(!st.on_vote(&vote(0, b), &store));
            assert!(!st.is_notarized(&b.hash));
            st.on_vote(&vote(1, b), &store);
            assert!(st.is_notarized(&b.hash));
        }
        assert_eq!(st.finalize(), blocks[1].hash);
    }

    #[test]
    fn gap_blocks_finality() {
        let mut store = BlockStore::new();
        let blocks = chain(&mut store, &[1, 2, 4]);
        let mut st = BftState::new(3, store.bft_genesis());
        for b in &blocks {
            st.on_block(&b.hash, &store);
            st.on_vote(&vote(0, b), &store);
            st.on_vote(&vote(2, b), &store);
        }
        assert_eq!(st.best_depth(), 3);
        assert_eq!(st.finalize(), store.bft_genesis());
    }

    #[test]
    fn votes_before_blocks() {
        let mut store = BlockStore::new();
        let blocks = chain(&mut store, &[1, 2, 3]);
        let mut st = BftState::new(4, store.bft_genesis());
        for b in blocks.iter().rev() {
            for v in 0..3 {
                st.on_vote(&vote(v, b), &store);
            }
        }
        for b in blocks.iter().rev() {
            st.on_block(&b.hash, &store);
        }
        assert_eq!(st.longest_notarized_tip(), blocks[2].hash);
        assert_eq!(st.finalize(), blocks[1].hash);
    }
}
