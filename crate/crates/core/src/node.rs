//! A snap-and-chat validator: the longest-chain and Streamlet layers run
//! side by side over one block store, and the node reads off a finalized
//! and an available ledger every slot.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bft::{compose_bft_block, epoch_leader, vote_rule, BftState};
use crate::codec::Canonical;
use crate::hash::Hash;
use crate::lc::{check_lc_block, compose_lc_block, lottery_win, LcState};
use crate::store::{BlockStore, LedgerCache};
use crate::types::{BftBlock, LcBlock, LcHeader, Ledger, NodeId, TxRef, VoteRecord};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Lc(Arc<LcBlock>),
    Bft(Arc<BftBlock>),
    Vote(VoteRecord),
    Tx(TxRef),
}

impl Payload {
    pub fn id(&self) -> Hash {
        match self {
            Payload::Lc(b) => b.hash,
            Payload::Bft(b) => b.hash,
            Payload::Vote(v) => v.digest(),
            Payload::Tx(t) => t.digest(),
        }
    }

    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Lc(_) => MessageKind::Lc,
            Payload::Bft(_) => MessageKind::Bft,
            Payload::Vote(_) => MessageKind::Vote,
            Payload::Tx(_) => MessageKind::Tx,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Lc,
    Bft,
    Vote,
    Tx,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dest {
    All,
    Only(Vec<NodeId>),
}

#[derive(Clone, Debug)]
pub struct Outbound {
    pub payload: Payload,
    pub to: Dest,
}

impl Outbound {
    pub fn all(payload: Payload) -> Self {
        Outbound { payload, to: Dest::All }
    }
}

/// (finalized tip, confirmed tip) and the two ledgers read at that key.
type CachedLedgers = ((Hash, Hash), Arc<Ledger>, Arc<Ledger>);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeConfig {
    pub n: usize,
    pub k: u64,
    pub epoch_len: u64,
    pub seed: u64,
    pub lottery_p: f64,
}

pub fn epoch_of(slot: u64, epoch_len: u64) -> u64 {
    slot / epoch_len + 1
}

pub fn epoch_start(epoch: u64, epoch_len: u64) -> u64 {
    (epoch - 1) * epoch_len
}

/// What a node accepted, in order; enough to drive a header-only client.
#[derive(Clone, Debug)]
pub enum Accepted {
    Lc(LcHeader),
    Bft(Arc<BftBlock>),
    Vote(VoteRecord),
}

pub struct Node {
    pub id: NodeId,
    pub cfg: NodeConfig,
    pub store: BlockStore,
    pub lc: LcState,
    pub bft: BftState,
    pending_lc: Vec<Arc<LcBlock>>,
    pending_bft: Vec<Arc<BftBlock>>,
    pending_ids: HashSet<Hash>,
    proposals: BTreeMap<u64, Vec<Hash>>,
    /// Records accepted headers and votes with the slot they were accepted.
    pub accepted: Vec<(u64, Accepted)>,
    pub record_accepted: bool,
    pub votes_cast: Vec<VoteRecord>,
    pub echo: bool,
    ledgers: Option<CachedLedgers>,
}

impl Node {
    pub fn new(id: NodeId, cfg: NodeConfig, cache: Arc<LedgerCache>) -> Self {
        let store = BlockStore::with_cache(cache);
        let lc = LcState::new(&store, cfg.k);
        let bft = BftState::new(cfg.n, store.bft_genesis());
        Node {
            id,
            cfg,
            store,
            lc,
            bft,
            pending_lc: Vec::new(),
            pending_bft: Vec::new(),
            pending_ids: HashSet::new(),
            proposals: BTreeMap::new(),
            accepted: Vec::new(),
            record_accepted: false,
            votes_cast: Vec::new(),
            echo: true,
            ledgers: None,
        }
    }

    pub fn epoch(&self, slot: u64) -> u64 {
        epoch_of(slot, self.cfg.epoch_len)
    }

    pub fn confirmed_tip(&self) -> Hash {
        self.lc.confirmed_tip(&self.store)
    }

    pub fn finalized_tip(&self) -> Hash {
        self.bft.finalized_tip
    }

    /// One slot of honest behaviour.
    pub fn on_slot(&mut self, slot: u64, inbox: Vec<Payload>) -> Vec<Outbound> {
        let mut out = Vec::new();
        for p in inbox {
            self.ingest(slot, p, &mut out);
        }
        self.resolve_pending(slot, &mut out);
        if slot > 0 && lottery_win(self.id, slot, self.cfg.seed, self.cfg.lottery_p) {
            if let Some(b) = self.produce_lc(slot) {
                out.push(Outbound::all(Payload::Lc(b)));
            }
        }
        if let Some(b) = self.propose(slot) {
            out.push(Outbound::all(Payload::Bft(b)));
        }
        if let Some(v) = self.try_vote(slot) {
            out.push(Outbound::all(Payload::Vote(v)));
        }
        out
    }

    /// Takes in one message; new blocks wait in a buffer until
    /// [`Node::resolve_pending`] finds their dependencies.
    pub fn ingest(&mut self, slot: u64, p: Payload, out: &mut Vec<Outbound>) {
        match p {
            Payload::Lc(b) => {
                if !self.store.has_lc(&b.hash) && self.pending_ids.insert(b.hash) {
                    self.pending_lc.push(b);
                }
            }
            Payload::Bft(b) => {
                if !self.store.has_bft(&b.hash) && self.pending_ids.insert(b.hash) {
                    self.pending_bft.push(b);
                }
            }
            Payload::Vote(v) => {
                if v.voter.index() < self.cfg.n && self.bft.on_vote(&v, &self.store) {
                    self.after_bft_change();
                    if self.record_accepted {
                        self.accepted.push((slot, Accepted::Vote(v)));
                    }
                    if self.echo {
                        out.push(Outbound::all(Payload::Vote(v)));
                    }
                }
            }
            Payload::Tx(t) => self.lc.add_tx(t),
        }
    }

    pub fn resolve_pending(&mut self, slot: u64, out: &mut Vec<Outbound>) {
        loop {
            let mut progress = false;
            let lcs = std::mem::take(&mut self.pending_lc);
            for b in lcs {
                let aux = self.store.resolve_auxref(&b.auxref);
                if !self.store.has_lc(&b.prev) || !self.store.has_bft(&aux) {
                    self.pending_lc.push(b);
                    continue;
                }
                self.pending_ids.remove(&b.hash);
                progress = true;
                if check_lc_block(&b, &self.store).is_ok() && self.accept_lc(slot, b.clone()) && self.echo {
                    out.push(Outbound::all(Payload::Lc(b)));
                }
            }
            let bfts = std::mem::take(&mut self.pending_bft);
            for b in bfts {
                if !self.store.has_bft(&b.prev) || !self.store.has_lc(&b.b) {
                    self.pending_bft.push(b);
                    continue;
                }
                self.pending_ids.remove(&b.hash);
                progress = true;
                if self.bft_block_ok(&b) && self.accept_bft(slot, b.clone()) && self.echo {
                    out.push(Outbound::all(Payload::Bft(b)));
                }
            }
            if !progress {
                break;
            }
        }
    }

    fn bft_block_ok(&self, b: &BftBlock) -> bool {
        let Some(parent) = self.store.bft(&b.prev) else { return false };
        b.compute_hash() == b.hash
            && b.depth == parent.depth + 1
            && b.epoch > parent.epoch
            && b.proposer == epoch_leader(b.epoch, self.cfg.seed, self.cfg.n)
    }

    /// Stores a validated LC block and reruns fork choice.
    pub fn accept_lc(&mut self, slot: u64, b: Arc<LcBlock>) -> bool {
        let h = b.hash;
        let header = self.record_accepted.then(|| b.header());
        match self.store.insert_lc(b) {
            Ok(true) => {
                self.lc.on_lc_block(&self.store, &h);
                if let Some(hd) = header {
                    self.accepted.push((slot, Accepted::Lc(hd)));
                }
                true
            }
            _ => false,
        }
    }

    pub fn accept_bft(&mut self, slot: u64, b: Arc<BftBlock>) -> bool {
        let h = b.hash;
        let epoch = b.epoch;
        match self.store.insert_bft(b.clone()) {
            Ok(true) => {
                self.bft.on_block(&h, &self.store);
                self.after_bft_change();
                if epoch >= self.epoch(slot) {
                    self.proposals.entry(epoch).or_default().push(h);
                }
                if self.record_accepted {
                    self.accepted.push((slot, Accepted::Bft(b)));
                }
                true
            }
            _ => false,
        }
    }

    fn after_bft_change(&mut self) {
        self.lc.fin_tip = self.bft.finalized_tip;
    }

    /// Composes and stores an LC block on the current tip.
    pub fn produce_lc(&mut self, slot: u64) -> Option<Arc<LcBlock>> {
        let b = Arc::new(compose_lc_block(&self.lc, &self.store, slot, self.id).ok()?);
        self.accept_lc(slot, b.clone()).then_some(b)
    }

    /// Leader's proposal at the first slot of its epoch.
    pub fn propose(&mut self, slot: u64) -> Option<Arc<BftBlock>> {
        let epoch = self.epoch(slot);
        if slot != epoch_start(epoch, self.cfg.epoch_len) || epoch_leader(epoch, self.cfg.seed, self.cfg.n) != self.id {
            return None;
        }
        if epoch.is_multiple_of(8) {
            self.lc.prune(&self.store);
        }
        let prev = self.bft.longest_notarized_tip();
        let snap = self.confirmed_tip();
        let b = Arc::new(compose_bft_block(&self.store, &prev, &snap, epoch, self.id).ok()?);
        self.accept_bft(slot, b.clone()).then_some(b)
    }

    /// Votes for the first acceptable proposal of the current epoch.
    pub fn try_vote(&mut self, slot: u64) -> Option<VoteRecord> {
        let epoch = self.epoch(slot);
        let stale: Vec<u64> = self.proposals.range(..epoch).map(|(e, _)| *e).collect();
        for e in stale {
            self.proposals.remove(&e);
        }
        if self.bft.voted_epochs.contains(&epoch) {
            return None;
        }
        let conf = self.confirmed_tip();
        let chosen = self.proposals.get(&epoch)?.iter().copied().find(|h| {
            let blk = self.store.bft(h).expect("proposals are stored");
            vote_rule(&self.bft, &self.store, blk, epoch, &conf).is_ok()
        })?;
        let blk = self.store.bft(&chosen).expect("stored").clone();
        Some(self.cast_vote(slot, &blk))
    }

    pub fn cast_vote(&mut self, slot: u64, blk: &BftBlock) -> VoteRecord {
        let v = VoteRecord::streamlet(self.id, blk);
        self.bft.voted_epochs.insert(blk.epoch);
        if self.bft.on_vote(&v, &self.store) && self.record_accepted {
            self.accepted.push((slot, Accepted::Vote(v)));
        }
        self.after_bft_change();
        self.votes_cast.push(v);
        v
    }

    /// `(LOG_fin, LOG_da)` at the node's finalized tip and confirmed LC tip.
    pub fn read_ledgers(&mut self) -> (Arc<Ledger>, Arc<Ledger>) {
        let key = (self.finalized_tip(), self.confirmed_tip());
        if let Some((k, f, d)) = &self.ledgers {
            if *k == key {
                return (f.clone(), d.clone());
            }
        }
        let fin = self.store.log_fin(&key.0).expect("finalized chain is stored");
        let da = self.store.log_da(&key.0, &key.1).expect("confirmed chain is stored");
        self.ledgers = Some((key, fin.clone(), da.clone()));
        (fin, da)
    }

    pub fn pending_len(&self) -> usize {
        self.pending_lc.len() + self.pending_bft.len()
    }
}
