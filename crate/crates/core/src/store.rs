//! Content-addressed block storage and the recursive ledger definitions.
//!
//! `log_lc`, `log_fin` and `log_da` are pure functions of block content, so
//! their memo tables live in a [`LedgerCache`] that several stores (one per
//! simulated node) may share.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::hash::Hash;
use crate::ledger::{strip_prefix, LedgerError, Sanitizer};
use crate::types::{BftBlock, Ledger, LcBlock, TxRef};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("parent {0} of block is unknown")]
    MissingParent(Hash),
    #[error("snapshot {0} referenced by BFT block is unknown")]
    MissingSnapshot(Hash),
    #[error("BFT block depth {got} does not extend parent depth {parent}")]
    BadDepth { parent: u64, got: u64 },
    #[error("block hash does not match its contents")]
    BadHash,
}

#[derive(Default)]
pub struct LedgerCache {
    lc: RwLock<HashMap<Hash, Arc<Ledger>>>,
    fin: RwLock<HashMap<Hash, Arc<Ledger>>>,
    da: RwLock<HashMap<(Hash, Hash), Arc<Ledger>>>,
}

impl LedgerCache {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn get(map: &RwLock<HashMap<Hash, Arc<Ledger>>>, h: &Hash) -> Option<Arc<Ledger>> {
        map.read().unwrap().get(h).cloned()
    }

    fn put(map: &RwLock<HashMap<Hash, Arc<Ledger>>>, h: Hash, l: Arc<Ledger>) {
        map.write().unwrap().entry(h).or_insert(l);
    }
}

#[derive(Clone)]
pub struct BlockStore {
    lc: HashMap<Hash, Arc<LcBlock>>,
    bft: HashMap<Hash, Arc<BftBlock>>,
    lc_height: HashMap<Hash, u64>,
    lc_genesis: Hash,
    bft_genesis: Hash,
    cache: Arc<LedgerCache>,
}

impl Default for BlockStore {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockStore {
    pub fn new() -> Self {
        Self::with_cache(LedgerCache::new())
    }

    pub fn with_cache(cache: Arc<LedgerCache>) -> Self {
        let g = LcBlock::genesis();
        let bg = BftBlock::genesis(g.hash);
        let mut s = BlockStore {
            lc: HashMap::new(),
            bft: HashMap::new(),
            lc_height: HashMap::new(),
            lc_genesis: g.hash,
            bft_genesis: bg.hash,
            cache,
        };
        s.lc_height.insert(g.hash, 0);
        s.lc.insert(g.hash, Arc::new(g));
        s.bft.insert(bg.hash, Arc::new(bg));
        s
    }

    pub fn cache(&self) -> &Arc<LedgerCache> {
        &self.cache
    }

    pub fn lc_genesis(&self) -> Hash {
        self.lc_genesis
    }

    pub fn bft_genesis(&self) -> Hash {
        self.bft_genesis
    }

    /// Stores an LC block whose parent is known. Returns false if it was
    /// already present.
    pub fn insert_lc(&mut self, block: Arc<LcBlock>) -> Result<bool, StoreError> {
        if self.lc.contains_key(&block.hash) {
            return Ok(false);
        }
        if block.compute_hash() != block.hash {
            return Err(StoreError::BadHash);
        }
        let h = *self.lc_height.get(&block.prev).ok_or(StoreError::MissingParent(block.prev))?;
        self.lc_height.insert(block.hash, h + 1);
        self.lc.insert(block.hash, block);
        Ok(true)
    }

    /// Stores a BFT block whose parent and snapshot are known.
    pub fn insert_bft(&mut self, block: Arc<BftBlock>) -> Result<bool, StoreError> {
        if self.bft.contains_key(&block.hash) {
            return Ok(false);
        }
        if block.compute_hash() != block.hash {
            return Err(StoreError::BadHash);
        }
        let parent = self.bft.get(&block.prev).ok_or(StoreError::MissingParent(block.prev))?;
        if block.depth != parent.depth + 1 {
            return Err(StoreError::BadDepth { parent: parent.depth, got: block.depth });
        }
        if !self.lc.contains_key(&block.b) {
            return Err(StoreError::MissingSnapshot(block.b));
        }
        self.bft.insert(block.hash, block);
        Ok(true)
    }

    pub fn lc(&self, h: &Hash) -> Option<&Arc<LcBlock>> {
        self.lc.get(h)
    }

    pub fn bft(&self, h: &Hash) -> Option<&Arc<BftBlock>> {
        self.bft.get(h)
    }

    pub fn has_lc(&self, h: &Hash) -> bool {
        self.lc.contains_key(h)
    }

    pub fn has_bft(&self, h: &Hash) -> bool {
        self.bft.contains_key(h)
    }

    pub fn lc_blocks(&self) -> impl Iterator<Item = &Arc<LcBlock>> {
        self.lc.values()
    }

    pub fn bft_blocks(&self) -> impl Iterator<Item = &Arc<BftBlock>> {
        self.bft.values()
    }

    /// Number of blocks above genesis.
    pub fn lc_height(&self, h: &Hash) -> Option<u64> {
        self.lc_height.get(h).copied()
    }

    pub fn bft_depth(&self, h: &Hash) -> Option<u64> {
        self.bft.get(h).map(|b| b.depth)
    }

    pub fn depth_or_zero(&self, h: &Hash) -> u64 {
        self.bft_depth(h).unwrap_or(0)
    }

    /// The zero hash stands for BFT genesis in `auxref` fields.
    pub fn resolve_auxref(&self, auxref: &Hash) -> Hash {
        if auxref.is_zero() {
            self.bft_genesis
        } else {
            *auxref
        }
    }

    pub fn lc_ancestor_at(&self, h: &Hash, height: u64) -> Option<Hash> {
        let mut cur = *h;
        let mut ch = self.lc_height(&cur)?;
        if height > ch {
            return None;
        }
        while ch > height {
            cur = self.lc.get(&cur)?.prev;
            ch -= 1;
        }
        Some(cur)
    }

    pub fn bft_ancestor_at(&self, h: &Hash, depth: u64) -> Option<Hash> {
        let mut cur = self.bft.get(h)?;
        if depth > cur.depth {
            return None;
        }
        while cur.depth > depth {
            cur = self.bft.get(&cur.prev)?;
        }
        Some(cur.hash)
    }

    /// `a ⪯ b` on the LC chain (ancestor-or-equal).
    pub fn lc_extends(&self, b: &Hash, a: &Hash) -> bool {
        match self.lc_height(a) {
            Some(ha) => self.lc_ancestor_at(b, ha) == Some(*a),
            None => false,
        }
    }

    pub fn lc_conflict(&self, a: &Hash, b: &Hash) -> bool {
        !self.lc_extends(a, b) && !self.lc_extends(b, a)
    }

    /// `a ⪯ b` on the BFT chain.
    pub fn bft_extends(&self, b: &Hash, a: &Hash) -> bool {
        match self.bft_depth(a) {
            Some(da) => self.bft_ancestor_at(b, da) == Some(*a),
            None => false,
        }
    }

    pub fn bft_conflict(&self, a: &Hash, b: &Hash) -> bool {
        !self.bft_extends(a, b) && !self.bft_extends(b, a)
    }

    /// `LOG_lc(b) = supersanitize(LOG_lc(b.prev) ∥ b.txs)`, empty at genesis.
    pub fn log_lc(&self, b: &Hash) -> Result<Arc<Ledger>, LedgerError> {
        if let Some(l) = LedgerCache::get(&self.cache.lc, b) {
            return Ok(l);
        }
        let mut pending = Vec::new();
        let mut cur = *b;
        let base = loop {
            if cur == self.lc_genesis {
                break Arc::new(Ledger::default());
            }
            if let Some(l) = LedgerCache::get(&self.cache.lc, &cur) {
                break l;
            }
            let blk = self.lc.get(&cur).ok_or(LedgerError::Unresolved(cur))?;
            pending.push(blk);
            cur = blk.prev;
        };
        LedgerCache::put(&self.cache.lc, self.lc_genesis, Arc::new(Ledger::default()));
        let mut s = Sanitizer::resume(&base);
        let mut out = base;
        for blk in pending.into_iter().rev() {
            s.extend(&blk.txs);
            out = Arc::new(Ledger::new(s.txs().to_vec()));
            LedgerCache::put(&self.cache.lc, blk.hash, out.clone());
        }
        Ok(out)
    }

    /// `LOG_fin(B) = supersanitize(LOG_fin(B.prev) ∥ LOG_lc(B.b))`, empty at genesis.
    pub fn log_fin(&self, bh: &Hash) -> Result<Arc<Ledger>, LedgerError> {
        if let Some(l) = LedgerCache::get(&self.cache.fin, bh) {
            return Ok(l);
        }
        let mut pending = Vec::new();
        let mut cur = *bh;
        let base = loop {
            if cur == self.bft_genesis {
                break Arc::new(Ledger::default());
            }
            if let Some(l) = LedgerCache::get(&self.cache.fin, &cur) {
                break l;
            }
            let blk = self.bft.get(&cur).ok_or(LedgerError::Unresolved(cur))?;
            pending.push(blk);
            cur = blk.prev;
        };
        LedgerCache::put(&self.cache.fin, self.bft_genesis, Arc::new(Ledger::default()));
        let mut s = Sanitizer::resume(&base);
        let mut out = base;
        for blk in pending.into_iter().rev() {
            let snap = self.log_lc(&blk.b)?;
            s.extend(&snap.txs);
            out = Arc::new(Ledger::new(s.txs().to_vec()));
            LedgerCache::put(&self.cache.fin, blk.hash, out.clone());
        }
        Ok(out)
    }

    /// `LOG_da(B, b) = supersanitize(LOG_fin(B) ∥ LOG_lc(b))`.
    pub fn log_da(&self, bh: &Hash, b: &Hash) -> Result<Arc<Ledger>, LedgerError> {
        let key = (*bh, *b);
        if let Some(l) = self.cache.da.read().unwrap().get(&key) {
            return Ok(l.clone());
        }
        let fin = self.log_fin(bh)?;
        let lc = self.log_lc(b)?;
        let mut s = Sanitizer::resume(&fin);
        s.extend(&lc.txs);
        let out = Arc::new(s.finish());
        self.cache.da.write().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// `ΔTxs(B) = LOG_fin(B) ⊖ LOG_fin(B.prev)`.
    pub fn innovation(&self, bh: &Hash) -> Result<Vec<TxRef>, LedgerError> {
        let blk = self.bft.get(bh).ok_or(LedgerError::Unresolved(*bh))?;
        if *bh == self.bft_genesis {
            return Ok(Vec::new());
        }
        strip_prefix(&*self.log_fin(bh)?, &*self.log_fin(&blk.prev)?)
    }

    /// What `b` adds to the available ledger on top of the finalized ledger
    /// it references: `LOG_da(b.auxref, b) ⊖ LOG_fin(b.auxref)`.
    pub fn lc_innovation(&self, b: &LcBlock) -> Result<Vec<TxRef>, LedgerError> {
        let fin_ref = self.resolve_auxref(&b.auxref);
        let fin = self.log_fin(&fin_ref)?;
        let lc = if self.lc.contains_key(&b.hash) {
            self.log_lc(&b.hash)?
        } else {
            let parent = self.log_lc(&b.prev)?;
            let mut s = Sanitizer::resume(&parent);
            s.extend(&b.txs);
            Arc::new(s.finish())
        };
        let mut s = Sanitizer::resume(&fin);
        s.extend(&lc.txs);
        Ok(s.txs()[fin.len()..].to_vec())
    }

    /// `ΔTxs` that a BFT block snapshotting `b` on top of `prev` would carry.
    pub fn bft_innovation_for(&self, prev: &Hash, b: &Hash) -> Result<Vec<TxRef>, LedgerError> {
        let fin = self.log_fin(prev)?;
        let lc = self.log_lc(b)?;
        let mut s = Sanitizer::resume(&fin);
        s.extend(&lc.txs);
        Ok(s.txs()[fin.len()..].to_vec())
    }
}
