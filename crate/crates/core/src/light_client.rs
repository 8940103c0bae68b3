//! Header-only clients and SPV against innovation commitments.
//!
//! A client keeps LC and BFT headers plus the vote certificates it is
//! shown. It runs the same fork choice and finality rules as a full node,
//! but can only check membership through Merkle proofs supplied by an
//! untrusted prover.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bft::{self, epoch_leader, BftLookup, BftState};
use crate::hash::Hash;
use crate::lc::better_tip;
use crate::merkle::{leaf_hash, merkleize, verify_inclusion, MerkleProof, MerkleTree, Side};
use crate::node::Accepted;
use crate::rng::Stream;
use crate::store::BlockStore;
use crate::types::{BftBlock, LcBlock, LcHeader, Transaction, TxId, TxRef, VoteRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FollowFin,
    FollowDa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpvStatus {
    Accepted,
    Unavailable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpvAnswer {
    pub status: SpvStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted_against: Option<Hash>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proof: Option<MerkleProof>,
}

impl SpvAnswer {
    fn unavailable() -> Self {
        SpvAnswer { status: SpvStatus::Unavailable, accepted_against: None, proof: None }
    }

    pub fn accepted(&self) -> bool {
        self.status == SpvStatus::Accepted
    }
}

/// A prover's claim: `tx` sits under `root` at the proof's position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProverResponse {
    pub tx: Transaction,
    pub root: Hash,
    pub proof: MerkleProof,
}

pub trait Prover {
    fn answer(&mut self, tx: TxId, permitted: &BTreeSet<Hash>) -> Option<ProverResponse>;
}

/// Why a header was not taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeaderOutcome {
    Stored,
    Duplicate,
    Buffered,
    Rejected,
}

/// Roots a query may be answered against, and whether the consistency
/// gate withheld the LC commitment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permitted {
    pub roots: BTreeSet<Hash>,
    pub gated: bool,
}

#[derive(Clone, Debug)]
pub struct LightClient {
    pub mode: Mode,
    n: usize,
    k: u64,
    seed: u64,
    lc: HashMap<Hash, (LcHeader, u64)>,
    bft: HashMap<Hash, Arc<BftBlock>>,
    certs: BftState,
    lc_genesis: Hash,
    bft_genesis: Hash,
    tip: Hash,
    pending_lc: Vec<LcHeader>,
    pending_bft: Vec<Arc<BftBlock>>,
}

impl LightClient {
    pub fn new(mode: Mode, n: usize, k: u64, seed: u64) -> Self {
        let lg = LcBlock::genesis();
        let bg = Arc::new(BftBlock::genesis(lg.hash));
        let mut certs = BftState::new(n, bg.hash);
        let mut bft = HashMap::new();
        bft.insert(bg.hash, bg.clone());
        certs.on_block(&bg.hash, &bft);
        LightClient {
            mode,
            n,
            k,
            seed,
            lc: [(lg.hash, (lg.header(), 0))].into(),
            bft,
            certs,
            lc_genesis: lg.hash,
            bft_genesis: bg.hash,
            tip: lg.hash,
            pending_lc: Vec::new(),
            pending_bft: Vec::new(),
        }
    }

    pub fn lc_tip(&self) -> Hash {
        self.tip
    }

    /// `b*`: the tip's ancestor `k` blocks back.
    pub fn confirmed_tip(&self) -> Hash {
        let h = self.height(&self.tip).unwrap_or(0);
        self.lc_ancestor_at(&self.tip, h.saturating_sub(self.k)).unwrap_or(self.lc_genesis)
    }

    /// `B*`.
    pub fn finalized_tip(&self) -> Hash {
        self.certs.finalized_tip
    }

    pub fn lc_header(&self, h: &Hash) -> Option<&LcHeader> {
        self.lc.get(h).map(|(hd, _)| hd)
    }

    pub fn bft_header(&self, h: &Hash) -> Option<&Arc<BftBlock>> {
        self.bft.get(h)
    }

    fn height(&self, h: &Hash) -> Option<u64> {
        self.lc.get(h).map(|(_, ht)| *ht)
    }

    fn lc_ancestor_at(&self, h: &Hash, height: u64) -> Option<Hash> {
        let (mut hd, mut ht) = self.lc.get(h).map(|(hd, ht)| (hd, *ht))?;
        if ht < height {
            return None;
        }
        while ht > height {
            hd = &self.lc.get(&hd.prev)?.0;
            ht -= 1;
        }
        Some(hd.hash)
    }

    /// `a ⪯ b` on LC headers.
    fn lc_extends(&self, b: &Hash, a: &Hash) -> Option<bool> {
        let ha = self.height(a)?;
        if self.height(b)? < ha {
            return Some(false);
        }
        Some(self.lc_ancestor_at(b, ha)? == *a)
    }

    fn resolve_auxref(&self, auxref: &Hash) -> Hash {
        if auxref.is_zero() {
            self.bft_genesis
        } else {
            *auxref
        }
    }

    /// Feeds one event from a full node's accepted stream.
    pub fn sync(&mut self, ev: &Accepted) -> HeaderOutcome {
        match ev {
            Accepted::Lc(h) => self.sync_lc(h.clone()),
            Accepted::Bft(b) => self.sync_bft(b.clone()),
            Accepted::Vote(v) => {
                self.add_vote(*v);
                HeaderOutcome::Stored
            }
        }
    }

    /// Votes for unknown blocks are kept and counted once the header
    /// arrives.
    pub fn add_vote(&mut self, v: VoteRecord) {
        if v.voter.index() < self.n {
            self.certs.on_vote(&v, &self.bft);
        }
    }

    pub fn sync_lc(&mut self, h: LcHeader) -> HeaderOutcome {
        let out = self.try_lc(&h);
        if out == HeaderOutcome::Buffered {
            self.pending_lc.push(h);
        } else if out == HeaderOutcome::Stored {
            self.drain();
        }
        out
    }

    pub fn sync_bft(&mut self, b: Arc<BftBlock>) -> HeaderOutcome {
        let out = self.try_bft(&b);
        if out == HeaderOutcome::Buffered {
            self.pending_bft.push(b);
        } else if out == HeaderOutcome::Stored {
            self.drain();
        }
        out
    }

    fn try_lc(&mut self, h: &LcHeader) -> HeaderOutcome {
        if self.lc.contains_key(&h.hash) {
            return HeaderOutcome::Duplicate;
        }
        if h.compute_hash() != h.hash {
            return HeaderOutcome::Rejected;
        }
        let aux = self.resolve_auxref(&h.auxref);
        let Some((parent, ph)) = self.lc.get(&h.prev).map(|(p, ht)| (p.clone(), *ht)) else {
            return HeaderOutcome::Buffered;
        };
        let Some(aux_depth) = self.bft.get(&aux).map(|b| b.depth) else {
            return HeaderOutcome::Buffered;
        };
        let parent_aux_depth = self.bft.get(&self.resolve_auxref(&parent.auxref)).map_or(0, |b| b.depth);
        if h.slot <= parent.slot || aux_depth < parent_aux_depth {
            return HeaderOutcome::Rejected;
        }
        self.lc.insert(h.hash, (h.clone(), ph + 1));
        let cur = self.height(&self.tip).unwrap_or(0);
        if better_tip((ph + 1, h.hash), (cur, self.tip)) {
            self.tip = h.hash;
        }
        HeaderOutcome::Stored
    }

    fn try_bft(&mut self, b: &Arc<BftBlock>) -> HeaderOutcome {
        if self.bft.contains_key(&b.hash) {
            return HeaderOutcome::Duplicate;
        }
        if b.compute_hash() != b.hash {
            return HeaderOutcome::Rejected;
        }
        let (Some(parent), true) = (self.bft.get(&b.prev), self.lc.contains_key(&b.b)) else {
            return HeaderOutcome::Buffered;
        };
        if b.depth != parent.depth + 1 || b.epoch <= parent.epoch || b.proposer != epoch_leader(b.epoch, self.seed, self.n) {
            return HeaderOutcome::Rejected;
        }
        self.bft.insert(b.hash, b.clone());
        self.certs.on_block(&b.hash, &self.bft);
        HeaderOutcome::Stored
    }

    fn drain(&mut self) {
        loop {
            let mut progress = false;
            for h in std::mem::take(&mut self.pending_lc) {
                match self.try_lc(&h) {
                    HeaderOutcome::Buffered => self.pending_lc.push(h),
                    _ => progress = true,
                }
            }
            for b in std::mem::take(&mut self.pending_bft) {
                match self.try_bft(&b) {
                    HeaderOutcome::Buffered => self.pending_bft.push(b),
                    _ => progress = true,
                }
            }
            if !progress {
                break;
            }
        }
    }

    pub fn pending(&self) -> usize {
        self.pending_lc.len() + self.pending_bft.len()
    }

    /// Innovation roots of every BFT block on the finalized chain.
    fn finalized_roots(&self) -> BTreeSet<Hash> {
        let mut roots = BTreeSet::new();
        let mut h = self.finalized_tip();
        while h != self.bft_genesis {
            let Some(b) = self.bft.get(&h) else { break };
            roots.insert(b.auxinnov);
            h = b.prev;
        }
        roots
    }

    /// Roots for the available ledger. The confirmed LC block's own
    /// commitment is only usable when no BFT block between its reference
    /// and `B*` snapshots something conflicting with it.
    pub fn permitted_available(&self) -> Permitted {
        let mut roots = self.finalized_roots();
        let conf = self.confirmed_tip();
        let Some(hd) = self.lc_header(&conf) else { return Permitted { roots, gated: true } };
        let aux = self.resolve_auxref(&hd.auxref);
        let fin = self.finalized_tip();
        let gated = match bft::extends(&self.bft, &fin, &aux) {
            Some(true) => {
                let mut h = fin;
                let mut conflict = false;
                while h != aux {
                    let b = &self.bft[&h];
                    let consistent = self.lc_extends(&conf, &b.b) == Some(true) || self.lc_extends(&b.b, &conf) == Some(true);
                    conflict |= !consistent;
                    h = b.prev;
                }
                conflict
            }
            _ => true,
        };
        if !gated {
            roots.insert(hd.auxinnov);
        }
        Permitted { roots, gated }
    }

    pub fn permitted(&self) -> Permitted {
        match self.mode {
            Mode::FollowFin => Permitted { roots: self.finalized_roots(), gated: false },
            Mode::FollowDa => self.permitted_available(),
        }
    }

    /// Checks a prover's answer against `permitted`; anything that does not
    /// verify is treated as no answer.
    pub fn check(tx: TxId, permitted: &Permitted, resp: Option<ProverResponse>) -> SpvAnswer {
        let Some(r) = resp else { return SpvAnswer::unavailable() };
        let ok = r.tx.id == tx
            && permitted.roots.contains(&r.root)
            && r.proof.leaf == leaf_hash(&r.tx)
            && verify_inclusion(&r.root, &r.proof);
        if ok {
            SpvAnswer { status: SpvStatus::Accepted, accepted_against: Some(r.root), proof: Some(r.proof) }
        } else {
            SpvAnswer::unavailable()
        }
    }

    pub fn spv_finalized(&self, tx: TxId, prover: &mut dyn Prover) -> SpvAnswer {
        let p = Permitted { roots: self.finalized_roots(), gated: false };
        let resp = prover.answer(tx, &p.roots);
        Self::check(tx, &p, resp)
    }

    pub fn spv_available(&self, tx: TxId, prover: &mut dyn Prover) -> SpvAnswer {
        let p = self.permitted_available();
        let resp = prover.answer(tx, &p.roots);
        Self::check(tx, &p, resp)
    }

    pub fn spv(&self, tx: TxId, prover: &mut dyn Prover) -> SpvAnswer {
        match self.mode {
            Mode::FollowFin => self.spv_finalized(tx, prover),
            Mode::FollowDa => self.spv_available(tx, prover),
        }
    }
}

impl BftLookup for LightClient {
    fn get_bft(&self, h: &Hash) -> Option<&BftBlock> {
        self.bft.get(h).map(|b| &**b)
    }
}

struct Commitment {
    txs: Vec<TxRef>,
    tree: MerkleTree,
}

/// Innovation commitments of every block a full node has seen, indexed by
/// transaction. Grows incrementally as the store does.
#[derive(Default)]
pub struct ProverIndex {
    commitments: HashMap<Hash, Arc<Commitment>>,
    by_tx: HashMap<TxId, Vec<Hash>>,
    indexed: HashSet<Hash>,
}

impl ProverIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn refresh(&mut self, store: &BlockStore) {
        let mut lcs: Vec<(Hash, Result<Vec<TxRef>, _>)> = store
            .lc_blocks()
            .filter(|b| !self.indexed.contains(&b.hash))
            .map(|b| (b.hash, store.lc_innovation(b)))
            .collect();
        let mut bfts: Vec<(Hash, Result<Vec<TxRef>, _>)> = store
            .bft_blocks()
            .filter(|b| !self.indexed.contains(&b.hash))
            .map(|b| (b.hash, store.innovation(&b.hash)))
            .collect();
        lcs.sort_by_key(|(h, _)| *h);
        bfts.sort_by_key(|(h, _)| *h);
        for (h, innov) in lcs.into_iter().chain(bfts) {
            self.indexed.insert(h);
            let Ok(txs) = innov else { continue };
            let tree = merkleize(&txs);
            let root = tree.root();
            if self.commitments.contains_key(&root) {
                continue;
            }
            for t in &txs {
                self.by_tx.entry(t.id).or_default().push(root);
            }
            self.commitments.insert(root, Arc::new(Commitment { txs, tree }));
        }
    }

    pub fn roots_for(&self, tx: TxId) -> &[Hash] {
        self.by_tx.get(&tx).map_or(&[], |v| v.as_slice())
    }

    pub fn prove(&self, tx: TxId, root: &Hash) -> Option<ProverResponse> {
        let c = self.commitments.get(root)?;
        let i = c.txs.iter().position(|t| t.id == tx)?;
        Some(ProverResponse { tx: (*c.txs[i]).clone(), root: *root, proof: c.tree.prove(i).ok()? })
    }

    pub fn any_tx(&self, stream: &mut Stream) -> Option<TxRef> {
        if self.commitments.is_empty() {
            return None;
        }
        let roots: Vec<&Hash> = self.commitments.keys().collect();
        let mut roots = roots;
        roots.sort();
        let c = &self.commitments[*stream.pick(&roots)?];
        stream.pick(&c.txs).cloned()
    }
}

/// Answers from a full node's data, only against permitted roots.
pub struct HonestProver<'a> {
    pub index: &'a ProverIndex,
}

impl Prover for HonestProver<'_> {
    fn answer(&mut self, tx: TxId, permitted: &BTreeSet<Hash>) -> Option<ProverResponse> {
        self.index.roots_for(tx).iter().filter(|r| permitted.contains(*r)).find_map(|r| self.index.prove(tx, r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lie {
    /// Random roots, leaves and paths.
    Garbage,
    /// Real proofs against whatever root holds the transaction, permitted
    /// or not, including stale forks.
    AnyRoot,
    /// A real proof of some other transaction, relabelled.
    Relabel,
    /// A real proof with one bit of the position or path flipped.
    Tamper,
}

impl Lie {
    pub const ALL: [Lie; 4] = [Lie::Garbage, Lie::AnyRoot, Lie::Relabel, Lie::Tamper];
}

pub struct ByzantineProver<'a> {
    pub index: &'a ProverIndex,
    pub lie: Lie,
    pub stream: Stream,
}

impl Prover for ByzantineProver<'_> {
    fn answer(&mut self, tx: TxId, permitted: &BTreeSet<Hash>) -> Option<ProverResponse> {
        let permitted: Vec<Hash> = permitted.iter().copied().collect();
        let s = &mut self.stream;
        match self.lie {
            Lie::Garbage => {
                let root = if s.chance(0.5) { *s.pick(&permitted)? } else { random_hash(s) };
                let fake = Transaction::mint(tx.0, &[s.below(1000) + 1]);
                let leaf = if s.chance(0.5) { leaf_hash(&fake) } else { random_hash(s) };
                let path = (0..s.below(8)).map(|_| (random_hash(s), if s.chance(0.5) { Side::Left } else { Side::Right })).collect();
                Some(ProverResponse { tx: fake, root, proof: MerkleProof { leaf_index: s.below(16), leaf, path } })
            }
            Lie::AnyRoot => {
                let roots = self.index.roots_for(tx);
                let root = *s.pick(roots)?;
                self.index.prove(tx, &root)
            }
            Lie::Relabel => {
                let other = self.index.any_tx(s)?;
                let root = *s.pick(self.index.roots_for(other.id))?;
                let mut r = self.index.prove(other.id, &root)?;
                if s.chance(0.5) {
                    r.tx.id = tx;
                } else {
                    r.tx = Transaction::mint(tx.0, &[1]);
                    r.proof.leaf = leaf_hash(&r.tx);
                }
                Some(r)
            }
            Lie::Tamper => {
                let roots = self.index.roots_for(tx);
                let root = *s.pick(roots)?;
                let mut r = self.index.prove(tx, &root)?;
                let bits = 64 + r.proof.path.len() as u64 * 256;
                let bit = s.below(bits);
                if bit < 64 {
                    r.proof.leaf_index ^= 1 << bit;
                } else {
                    let b = bit - 64;
                    let (i, j) = ((b / 256) as usize, (b % 256) as usize);
                    r.proof.path[i].0 = r.proof.path[i].0.flip_bit(j);
                }
                Some(r)
            }
        }
    }
}

fn random_hash(s: &mut Stream) -> Hash {
    let mut b = [0u8; 32];
    for chunk in b.chunks_mut(8) {
        chunk.copy_from_slice(&s.next_u64().to_le_bytes());
    }
    Hash(b)
}
