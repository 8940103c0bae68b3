//! Permissioned longest-chain protocol: slot lottery, fork choice, k-deep
//! confirmation and block composition.

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use crate::hash::Hash;
use crate::ledger::{LedgerError, Sanitizer};
use crate::merkle::merkle_root;
use crate::rng;
use crate::store::BlockStore;
use crate::types::{LcBlock, NodeId, TxId, TxRef};

pub const DEFAULT_K: u64 = 6;
pub const MAX_BLOCK_TXS: usize = 256;

pub fn lottery_win(node: NodeId, slot: u64, seed: u64, p: f64) -> bool {
    rng::bernoulli(seed, "lottery", &[node.0 as u64, slot], p)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InvalidLcBlock {
    #[error("unknown parent {0}")]
    UnknownParent(Hash),
    #[error("unknown auxref {0}")]
    UnknownAuxref(Hash),
    #[error("slot {slot} does not exceed parent slot {parent}")]
    SlotNotIncreasing { parent: u64, slot: u64 },
    #[error("auxref depth {got} below parent's auxref depth {parent}")]
    AuxrefRegressed { parent: u64, got: u64 },
    #[error("auxinnov does not match the recomputed innovation root")]
    BadAuxinnov,
    #[error("hash does not match header")]
    BadHash,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

pub fn check_lc_block(block: &LcBlock, store: &BlockStore) -> Result<(), InvalidLcBlock> {
    if block.compute_hash() != block.hash {
        return Err(InvalidLcBlock::BadHash);
    }
    let parent = store.lc(&block.prev).ok_or(InvalidLcBlock::UnknownParent(block.prev))?;
    if block.slot <= parent.slot {
        return Err(InvalidLcBlock::SlotNotIncreasing { parent: parent.slot, slot: block.slot });
    }
    let aux = store.resolve_auxref(&block.auxref);
    let got = store.bft_depth(&aux).ok_or(InvalidLcBlock::UnknownAuxref(block.auxref))?;
    let parent_aux = store.resolve_auxref(&parent.auxref);
    let want = store.bft_depth(&parent_aux).ok_or(InvalidLcBlock::UnknownAuxref(parent.auxref))?;
    if got < want {
        return Err(InvalidLcBlock::AuxrefRegressed { parent: want, got });
    }
    if merkle_root(&store.lc_innovation(block)?) != block.auxinnov {
        return Err(InvalidLcBlock::BadAuxinnov);
    }
    Ok(())
}

pub fn validate_lc_block(block: &LcBlock, store: &BlockStore) -> bool {
    check_lc_block(block, store).is_ok()
}

/// Fork-choice order: longer wins, then smaller hash.
pub fn better_tip(a: (u64, Hash), b: (u64, Hash)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[derive(Clone, Debug)]
pub struct LcState {
    pub k: u64,
    pub tip: Hash,
    pub fin_tip: Hash,
    pub mempool: Vec<TxRef>,
    pooled: HashSet<TxId>,
}

impl LcState {
    pub fn new(store: &BlockStore, k: u64) -> Self {
        LcState {
            k,
            tip: store.lc_genesis(),
            fin_tip: store.bft_genesis(),
            mempool: Vec::new(),
            pooled: HashSet::new(),
        }
    }

    pub fn add_tx(&mut self, tx: TxRef) {
        if self.pooled.insert(tx.id) {
            self.mempool.push(tx);
        }
    }

    /// Fork choice after `hash` was stored.
    pub fn on_lc_block(&mut self, store: &BlockStore, hash: &Hash) {
        let (Some(h), Some(cur)) = (store.lc_height(hash), store.lc_height(&self.tip)) else {
            return;
        };
        if better_tip((h, *hash), (cur, self.tip)) {
            self.tip = *hash;
        }
    }

    pub fn confirmed_tip(&self, store: &BlockStore) -> Hash {
        confirmed_of(store, &self.tip, self.k)
    }

    /// Drops mempool entries already buried in the confirmed ledger.
    pub fn prune(&mut self, store: &BlockStore) {
        let Ok(conf) = store.log_lc(&self.confirmed_tip(store)) else { return };
        if conf.is_empty() {
            return;
        }
        let ids: HashSet<TxId> = conf.txs.iter().map(|t| t.id).collect();
        self.mempool.retain(|t| !ids.contains(&t.id));
    }
}

pub fn confirmed_of(store: &BlockStore, tip: &Hash, k: u64) -> Hash {
    let h = store.lc_height(tip).unwrap_or(0);
    store.lc_ancestor_at(tip, h.saturating_sub(k)).unwrap_or_else(|| store.lc_genesis())
}

/// Builds the next block on `state.tip`. The body is the mempool filtered
/// against the tip's ledger; `auxref` is the node's finalized tip unless
/// the parent already references something deeper.
pub fn compose_lc_block(
    state: &LcState,
    store: &BlockStore,
    slot: u64,
    producer: NodeId,
) -> Result<LcBlock, LedgerError> {
    let parent = store.lc(&state.tip).ok_or(LedgerError::Unresolved(state.tip))?;
    let base = store.log_lc(&state.tip)?;
    let mut s = Sanitizer::resume(&base);
    let mut txs = Vec::new();
    for tx in &state.mempool {
        if txs.len() >= MAX_BLOCK_TXS {
            break;
        }
        if s.push(tx) {
            txs.push(tx.clone());
        }
    }
    let parent_aux = store.resolve_auxref(&parent.auxref);
    let own = store.depth_or_zero(&state.fin_tip);
    let auxref = if store.depth_or_zero(&parent_aux) > own { parent_aux } else { state.fin_tip };
    let mut block = LcBlock::new(state.tip, slot, producer, txs, auxref, Hash::ZERO);
    let root = merkle_root(&store.lc_innovation(&block)?);
    block = LcBlock::new(block.prev, slot, producer, block.txs, auxref, root);
    Ok(block)
}

/// Same as [`compose_lc_block`] but with an explicit body, for adversaries
/// and tests.
pub fn compose_with_body(
    store: &BlockStore,
    prev: Hash,
    slot: u64,
    producer: NodeId,
    txs: Vec<TxRef>,
    auxref: Hash,
) -> Result<LcBlock, LedgerError> {
    let draft = LcBlock::new(prev, slot, producer, txs, auxref, Hash::ZERO);
    let root = merkle_root(&store.lc_innovation(&draft)?);
    Ok(LcBlock::new(prev, slot, producer, draft.txs, auxref, root))
}

pub fn store_and_choose(state: &mut LcState, store: &mut BlockStore, block: LcBlock) -> bool {
    let h = block.hash;
    match store.insert_lc(Arc::new(block)) {
        Ok(true) => {
            state.on_lc_block(store, &h);
            true
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{CoinId, Transaction};

    #[test]
    fn lottery_edges() {
        for s in 0..200 {
            assert!(!lottery_win(NodeId(1), s, 3, 0.0));
            assert!(lottery_win(NodeId(1), s, 3, 1.0));
            assert_eq!(lottery_win(NodeId(1), s, 3, 0.5), lottery_win(NodeId(1), s, 3, 0.5));
        }
    }

    #[test]
    fn compose_and_validate() {
        let mut store = BlockStore::new();
        let mut st = LcState::new(&store, 2);
        let m = Arc::new(Transaction::mint(1, &[5]));
        let c = CoinId::new(TxId(1), 0);
        st.add_tx(m.clone());
        st.add_tx(Arc::new(Transaction::spend(2, vec![c], &[5])));
        st.add_tx(Arc::new(Transaction::spend(3, vec![c], &[5])));
        let b = compose_lc_block(&st, &store, 1, NodeId(0)).unwrap();
        assert_eq!(b.txs.iter().map(|t| t.id.0).collect::<Vec<_>>(), vec![1, 2]);
        assert!(validate_lc_block(&b, &store));
        let mut tampered = b.clone();
        tampered.auxinnov = Hash::ZERO;
        tampered.hash = tampered.compute_hash();
        assert_eq!(check_lc_block(&tampered, &store), Err(InvalidLcBlock::BadAuxinnov));
        assert!(store_and_choose(&mut st, &mut store, b.clone()));
        assert_eq!(st.tip, b.hash);
        assert_eq!(st.confirmed_tip(&store), store.lc_genesis());
        let e = compose_lc_block(&st, &store, 1, NodeId(0)).unwrap();
        assert!(matches!(check_lc_block(&e, &store), Err(InvalidLcBlock::SlotNotIncreasing { .. })));
    }

    #[test]
    fn empty_compose() {
        let store = BlockStore::new();
        let st = LcState::new(&store, 6);
        let b = compose_lc_block(&st, &store, 3, NodeId(0)).unwrap();
        assert!(b.txs.is_empty());
        assert_eq!(b.auxinnov, crate::merkle::EMPTY_ROOT);
    }

    #[test]
    fn tie_breaks_to_smaller_hash() {
        let mut store = BlockStore::new();
        let mut st = LcState::new(&store, 6);
        let g = store.lc_genesis();
        let a = compose_with_body(&store, g, 1, NodeId(0), vec![], Hash::ZERO).unwrap();
        let b = compose_with_body(&store, g, 2, NodeId(1), vec![], Hash::ZERO).unwrap();
        let (small, large) = if a.hash < b.hash { (a, b) } else { (b, a) };
        assert!(store_and_choose(&mut st, &mut store, small.clone()));
        assert!(store_and_choose(&mut st, &mut store, large));
        assert_eq!(st.tip, small.hash);
    }
}
