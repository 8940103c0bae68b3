//! Slow, obviously-correct reference implementations and random instance
//! generators, for checking the real ones.

use std::sync::Arc;

use crate::hash::Hash;
use crate::merkle::{verify_inclusion, MerkleProof, MerkleTree, Side};
use crate::rng::Stream;
use crate::store::BlockStore;
use crate::types::{BftBlock, CoinId, LcBlock, Ledger, NodeId, Transaction, TxId, TxRef};

/// Unspent coins after replaying `kept` from nothing.
fn unspent(kept: &[TxRef]) -> Vec<(CoinId, u64)> {
    let spent: Vec<CoinId> = kept.iter().flat_map(|t| t.inputs.iter().copied()).collect();
    kept.iter()
        .flat_map(|t| t.outputs.iter().copied())
        .filter(|(c, _)| !spent.contains(c))
        .collect()
}

pub fn valid_after(tx: &Transaction, kept: &[TxRef]) -> bool {
    let coins = unspent(kept);
    for (i, (c, _)) in tx.outputs.iter().enumerate() {
        if c.tx != tx.id || c.index as usize != i || coins.iter().any(|(u, _)| u == c) {
            return false;
        }
    }
    for (i, c) in tx.inputs.iter().enumerate() {
        if tx.inputs[..i].contains(c) {
            return false;
        }
    }
    if tx.inputs.is_empty() {
        return !tx.outputs.is_empty();
    }
    let mut total = 0u128;
    for c in &tx.inputs {
        match coins.iter().find(|(u, _)| u == c) {
            Some((_, a)) => total += *a as u128,
            None => return false,
        }
    }
    total >= tx.outputs.iter().map(|(_, a)| *a as u128).sum::<u128>()
}

/// Keep a transaction iff its id is new and it is valid after everything
/// kept so far, re-deriving the state from scratch every time.
pub fn supersanitize(txs: &[TxRef]) -> Ledger {
    let mut kept: Vec<TxRef> = Vec::new();
    for t in txs {
        if !kept.iter().any(|k| k.id == t.id) && valid_after(t, &kept) {
            kept.push(t.clone());
        }
    }
    Ledger::new(kept)
}

fn lc_chain(store: &BlockStore, b: &Hash) -> Vec<Arc<LcBlock>> {
    let mut chain = Vec::new();
    let mut h = *b;
    while let Some(blk) = store.lc(&h) {
        chain.push(blk.clone());
        if blk.prev.is_zero() {
            break;
        }
        h = blk.prev;
    }
    chain.reverse();
    chain
}

fn bft_chain(store: &BlockStore, b: &Hash) -> Vec<Arc<BftBlock>> {
    let mut chain = Vec::new();
    let mut h = *b;
    while let Some(blk) = store.bft(&h) {
        chain.push(blk.clone());
        if blk.depth == 0 {
            break;
        }
        h = blk.prev;
    }
    chain.reverse();
    chain
}

/// Every body from genesis to `b`, concatenated, then sanitized once.
pub fn log_lc(store: &BlockStore, b: &Hash) -> Ledger {
    let all: Vec<TxRef> = lc_chain(store, b).iter().flat_map(|blk| blk.txs.iter().cloned()).collect();
    supersanitize(&all)
}

/// Every snapshot's LC ledger along the BFT chain, concatenated.
pub fn log_fin(store: &BlockStore, bh: &Hash) -> Ledger {
    let all: Vec<TxRef> = bft_chain(store, bh)
        .iter()
        .skip(1)
        .flat_map(|blk| log_lc(store, &blk.b).txs)
        .collect();
    supersanitize(&all)
}

pub fn log_da(store: &BlockStore, bh: &Hash, b: &Hash) -> Ledger {
    let mut all = log_fin(store, bh).txs;
    all.extend(log_lc(store, b).txs);
    supersanitize(&all)
}

/// A small block tree over a pool of mints, spends and conflicting spends.
pub struct Instance {
    pub store: BlockStore,
    pub lc: Vec<Hash>,
    pub bft: Vec<Hash>,
    pub pool: Vec<TxRef>,
}

pub fn tx_pool(s: &mut Stream, size: usize) -> Vec<TxRef> {
    let mut pool: Vec<TxRef> = Vec::new();
    for i in 0..size as u64 {
        let id = i + 1;
        let tx = match s.below(4) {
            0 | 1 if !pool.is_empty() => {
                let src = s.pick(&pool).expect("non-empty").clone();
                if src.outputs.is_empty() {
                    Transaction::mint(id, &[1 + s.below(5)])
                } else {
                    let (c, a) = src.outputs[s.below(src.outputs.len() as u64) as usize];
                    let split = s.below(a + 2);
                    Transaction::spend(id, vec![c], &[split, a.saturating_sub(split)])
                }
            }
            2 if s.chance(0.2) => Transaction { id: TxId(id), inputs: vec![], outputs: vec![] },
            _ => Transaction::mint(id, &[1 + s.below(5), 1 + s.below(5)]),
        };
        pool.push(Arc::new(tx));
    }
    pool
}

pub fn random_instance(s: &mut Stream) -> Instance {
    let size = 6 + s.below(14) as usize;
    let pool = tx_pool(s, size);
    let mut store = BlockStore::new();
    let mut lc = vec![store.lc_genesis()];
    for slot in 1..=(2 + s.below(10)) {
        let prev = *s.pick(&lc).expect("genesis");
        let body: Vec<TxRef> = (0..s.below(5)).map(|_| s.pick(&pool).expect("pool").clone()).collect();
        let b = Arc::new(LcBlock::new(prev, slot, NodeId(0), body, Hash::ZERO, Hash::ZERO));
        lc.push(b.hash);
        store.insert_lc(b).expect("parent stored");
    }
    let mut bft = vec![store.bft_genesis()];
    for epoch in 1..=(1 + s.below(6)) {
        let prev = *s.pick(&bft).expect("genesis");
        let depth = store.bft_depth(&prev).expect("stored") + 1;
        let snap = *s.pick(&lc).expect("genesis");
        let b = Arc::new(BftBlock::new(prev, epoch, NodeId(0), snap, Hash::ZERO, depth));
        bft.push(b.hash);
        store.insert_bft(b).expect("parent stored");
    }
    Instance { store, lc, bft, pool }
}

/// `LOG_fin(B)` minus `LOG_fin(B.prev)`, by position.
pub fn innovation(store: &BlockStore, bh: &Hash) -> Vec<TxRef> {
    let Some(blk) = store.bft(bh) else { return Vec::new() };
    if blk.depth == 0 {
        return Vec::new();
    }
    let full = log_fin(store, bh).txs;
    let before = log_fin(store, &blk.prev).txs.len();
    full[before..].to_vec()
}

/// Every single-bit change to a proof or its root: leaf, each sibling,
/// each side, the leaf index and the root.
pub fn proof_mutations(root: &Hash, p: &MerkleProof) -> Vec<(Hash, MerkleProof)> {
    let mut out = Vec::new();
    for i in 0..256 {
        out.push((root.flip_bit(i), p.clone()));
        out.push((*root, MerkleProof { leaf: p.leaf.flip_bit(i), ..p.clone() }));
        for j in 0..p.path.len() {
            let mut q = p.clone();
            q.path[j].0 = q.path[j].0.flip_bit(i);
            out.push((*root, q));
        }
    }
    for j in 0..p.path.len() {
        let mut q = p.clone();
        q.path[j].1 = match q.path[j].1 {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        out.push((*root, q));
    }
    for i in 0..64 {
        out.push((*root, MerkleProof { leaf_index: p.leaf_index ^ (1 << i), ..p.clone() }));
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MerkleSweep {
    pub proofs: u64,
    pub rejected_proofs: u64,
    pub mutations: u64,
    pub accepted_mutations: u64,
}

/// Proves every leaf of trees of `sizes` distinct leaves and tries every
/// mutation of every proof.
pub fn merkle_sweep(sizes: impl IntoIterator<Item = usize>) -> MerkleSweep {
    let mut s = MerkleSweep::default();
    for n in sizes {
        let leaves: Vec<Hash> = (0..n as u64).map(|i| Hash::tagged(crate::hash::tag::MERKLE_LEAF, &i.to_le_bytes())).collect();
        let tree = MerkleTree::from_leaves(leaves);
        let root = tree.root();
        for i in 0..n {
            let p = tree.prove(i).expect("in range");
            s.proofs += 1;
            s.rejected_proofs += u64::from(!verify_inclusion(&root, &p));
            for (r, q) in proof_mutations(&root, &p) {
                s.mutations += 1;
                s.accepted_mutations += u64::from(verify_inclusion(&r, &q));
            }
        }
    }
    s
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OracleSweep {
    pub instances: u64,
    pub supersanitize: u64,
    pub log_lc: u64,
    pub log_fin: u64,
    pub log_da: u64,
    pub innovation: u64,
}

impl OracleSweep {
    pub fn mismatches(&self) -> u64 {
        self.supersanitize + self.log_lc + self.log_fin + self.log_da + self.innovation
    }
}

/// Compares the fast ledger functions with the replay oracles on
/// `instances` random block trees; counts mismatches per function.
pub fn ledger_sweep(seed: u64, instances: u64) -> OracleSweep {
    let mut s = Stream::new(seed, "oracle-sweep");
    let mut out = OracleSweep { instances, ..Default::default() };
    for _ in 0..instances {
        let inst = random_instance(&mut s);
        let st = &inst.store;
        let seq: Vec<TxRef> = (0..s.below(30)).map(|_| s.pick(&inst.pool).expect("pool").clone()).collect();
        out.supersanitize += u64::from(crate::ledger::supersanitize(&seq) != supersanitize(&seq));
        for b in &inst.lc {
            out.log_lc += u64::from(*st.log_lc(b).expect("stored") != log_lc(st, b));
        }
        for bh in &inst.bft {
            out.log_fin += u64::from(*st.log_fin(bh).expect("stored") != log_fin(st, bh));
            out.innovation += u64::from(st.innovation(bh).expect("stored") != innovation(st, bh));
            let b = *s.pick(&inst.lc).expect("genesis");
            out.log_da += u64::from(*st.log_da(bh, &b).expect("stored") != log_da(st, bh, &b));
        }
    }
    out
}
