//! Scripted adversaries. They see every honest message in the slot it is
//! sent (rushing) and may read honest node state; their own messages go
//! through the network like anyone else's.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use crate::bft::{compose_bft_block, epoch_leader};
use crate::hash::Hash;
use crate::node::{epoch_of, epoch_start, Accepted, Dest, Node, NodeConfig, Outbound, Payload};
use crate::scenario::{AdversaryGroup, Scenario, Strategy};
use crate::store::{BlockStore, LedgerCache};
use crate::types::{LcBlock, NodeId, Transaction, TxId, TxRef, VoteRecord};

/// Read access to the honest side of the simulation.
pub struct HonestView<'a> {
    pub scenario: &'a Scenario,
    pub nodes: &'a [Option<Node>],
}

impl HonestView<'_> {
    fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.index()).and_then(|n| n.as_ref())
    }

    fn best_public_height(&self) -> u64 {
        self.nodes
            .iter()
            .flatten()
            .filter_map(|n| n.store.lc_height(&n.lc.tip))
            .max()
            .unwrap_or(0)
    }
}

enum Group {
    Silent,
    Engines(EngineGroup),
    Equivocator(Box<EquivocatorGroup>),
}

struct EngineGroup {
    strategy: Strategy,
    engines: Vec<Node>,
    held: Vec<Arc<LcBlock>>,
    release_slot: u64,
    twinned: HashSet<TxId>,
    next_twin: u64,
}

struct EquivocatorGroup {
    nodes: Vec<NodeId>,
    view: Node,
    cursor: usize,
}

pub struct Adversary {
    groups: Vec<Group>,
    members: BTreeSet<NodeId>,
    /// Adversary-to-adversary traffic, visible to every engine next slot.
    internal: Vec<Payload>,
}

impl Adversary {
    pub fn new(scenario: &Scenario, cfg: NodeConfig, cache: &Arc<LedgerCache>) -> Self {
        let groups = scenario.adversaries.iter().map(|g| Self::group(g, scenario, cfg, cache)).collect();
        Adversary { groups, members: scenario.adversary_set(), internal: Vec::new() }
    }

    fn group(g: &AdversaryGroup, sc: &Scenario, cfg: NodeConfig, cache: &Arc<LedgerCache>) -> Group {
        let engine = |id: NodeId| {
            let mut n = Node::new(id, cfg, cache.clone());
            n.echo = false;
            n
        };
        match g.strategy {
            Strategy::HonestButSilent => Group::Silent,
            Strategy::StreamletEquivocator => {
                let mut view = engine(g.nodes[0]);
                view.record_accepted = true;
                Group::Equivocator(Box::new(EquivocatorGroup { nodes: g.nodes.clone(), view, cursor: 0 }))
            }
            s => Group::Engines(EngineGroup {
                strategy: s,
                engines: g.nodes.iter().map(|id| engine(*id)).collect(),
                held: Vec::new(),
                release_slot: g.release_slot.unwrap_or(sc.gst),
                twinned: HashSet::new(),
                next_twin: 0,
            }),
        }
    }

    pub fn is_member(&self, id: NodeId) -> bool {
        self.members.contains(&id)
    }

    /// A scheduled transaction addressed to an adversary.
    pub fn inject(&mut self, to: NodeId, tx: TxRef) {
        for g in &mut self.groups {
            if let Group::Engines(eg) = g {
                for e in eg.engines.iter_mut().filter(|e| e.id == to) {
                    e.lc.add_tx(tx.clone());
                }
            }
        }
    }

    /// Messages the adversary emits at `slot`, tagged with the sender.
    pub fn step(&mut self, slot: u64, observed: &[(NodeId, Payload)], view: &HonestView<'_>) -> Vec<(NodeId, Outbound)> {
        let mut inbox: Vec<Payload> = std::mem::take(&mut self.internal);
        inbox.extend(observed.iter().map(|(_, p)| p.clone()));
        let mut out = Vec::new();
        for g in &mut self.groups {
            match g {
                Group::Silent => {}
                Group::Engines(eg) => eg.step(slot, &inbox, view, &mut out),
                Group::Equivocator(q) => q.step(slot, &inbox, view, &mut out),
            }
        }
        self.internal = out.iter().map(|(_, o)| o.payload.clone()).collect();
        out
    }

    /// Every adversary engine's store, for building transcripts.
    pub fn stores(&self) -> Vec<&BlockStore> {
        let mut v = Vec::new();
        for g in &self.groups {
            match g {
                Group::Silent => {}
                Group::Engines(eg) => v.extend(eg.engines.iter().map(|e| &e.store)),
                Group::Equivocator(q) => v.push(&q.view.store),
            }
        }
        v
    }
}

impl EngineGroup {
    fn step(&mut self, slot: u64, inbox: &[Payload], view: &HonestView<'_>, out: &mut Vec<(NodeId, Outbound)>) {
        let honest = view.scenario.honest();
        for e in &mut self.engines {
            let produced = e.on_slot(slot, inbox.to_vec());
            for o in produced {
                let withhold = match self.strategy {
                    Strategy::LcPrivateMiner => true,
                    Strategy::Withholder => slot < self.release_slot,
                    _ => false,
                };
                match &o.payload {
                    // Peers still learn the block through the internal channel.
                    Payload::Lc(b) if withhold => {
                        self.held.push(b.clone());
                        out.push((e.id, Outbound { payload: o.payload.clone(), to: Dest::Only(Vec::new()) }));
                    }
                    _ => out.push((e.id, o)),
                }
            }
        }
        if self.strategy == Strategy::DoubleSpender {
            self.twin_spends(inbox, &honest, out);
        }
        let release = match self.strategy {
            Strategy::Withholder => slot >= self.release_slot,
            // Publish as soon as the private chain is strictly longer than
            // anything honest nodes hold; until then keep mining on it.
            Strategy::LcPrivateMiner => self
                .engines
                .iter()
                .filter_map(|e| e.store.lc_height(&e.lc.tip))
                .max()
                .is_some_and(|h| h > view.best_public_height()),
            _ => false,
        };
        if release && !self.held.is_empty() {
            let from = self.engines[0].id;
            for b in self.held.drain(..) {
                out.push((from, Outbound::all(Payload::Lc(b))));
            }
        }
    }

    /// Answers every observed spend with a conflicting spend of the same
    /// coins, sent to half of the honest nodes.
    fn twin_spends(&mut self, inbox: &[Payload], honest: &[NodeId], out: &mut Vec<(NodeId, Outbound)>) {
        let mut spends: Vec<TxRef> = Vec::new();
        for p in inbox {
            match p {
                Payload::Lc(b) => spends.extend(b.txs.iter().cloned()),
                Payload::Tx(t) => spends.push(t.clone()),
                _ => {}
            }
        }
        for e in &self.engines {
            spends.extend(e.lc.mempool.iter().cloned());
        }
        let half: Vec<NodeId> = honest.iter().copied().step_by(2).collect();
        let me = self.engines[0].id;
        for t in spends {
            if t.is_mint() || t.id.0 >= TWIN_BASE || !self.twinned.insert(t.id) {
                continue;
            }
            self.next_twin += 1;
            let id = TWIN_BASE | (me.0 as u64) << 32 | self.next_twin;
            let amounts: Vec<u64> = t.outputs.iter().map(|(_, a)| *a).collect();
            let twin: TxRef = Arc::new(Transaction::spend(id, t.inputs.clone(), &amounts));
            for e in &mut self.engines {
                e.lc.add_tx(twin.clone());
            }
            out.push((me, Outbound { payload: Payload::Tx(twin), to: Dest::Only(half.clone()) }));
        }
    }
}

/// Ids at or above this are adversary-made transactions.
pub const TWIN_BASE: u64 = 1 << 62;

impl EquivocatorGroup {
    fn step(&mut self, slot: u64, inbox: &[Payload], view: &HonestView<'_>, out: &mut Vec<(NodeId, Outbound)>) {
        let mut scratch = Vec::new();
        for p in inbox {
            self.view.ingest(slot, p.clone(), &mut scratch);
        }
        self.view.resolve_pending(slot, &mut scratch);

        let cfg = self.view.cfg;
        let epoch = epoch_of(slot, cfg.epoch_len);
        let leader = epoch_leader(epoch, cfg.seed, cfg.n);
        if slot == epoch_start(epoch, cfg.epoch_len) && self.nodes.contains(&leader) {
            for cell in honest_cells(view, slot) {
                if let Some(b) = self.proposal_for(&cell, view, epoch, leader, slot) {
                    out.push((leader, Outbound { payload: Payload::Bft(b), to: Dest::Only(cell) }));
                }
            }
        }

        // Vote for every block seen, whatever its epoch or branch.
        let fresh: Vec<_> = self.view.accepted[self.cursor..]
            .iter()
            .filter_map(|(_, a)| match a {
                Accepted::Bft(b) => Some(b.clone()),
                _ => None,
            })
            .collect();
        self.cursor = self.view.accepted.len();
        for b in fresh {
            for m in &self.nodes {
                let v = VoteRecord::streamlet(*m, &b);
                self.view.bft.on_vote(&v, &self.view.store);
                out.push((*m, Outbound::all(Payload::Vote(v))));
            }
        }
    }

    /// A block each member of `cell` will vote for: it extends their
    /// longest notarized chain and snapshots an LC block all of them
    /// already confirm.
    fn proposal_for(&mut self, cell: &[NodeId], view: &HonestView<'_>, epoch: u64, leader: NodeId, slot: u64) -> Option<Arc<crate::types::BftBlock>> {
        let first = view.node(cell[0])?;
        let prev = first.bft.longest_notarized_tip();
        let store = &self.view.store;
        let mut snap = first.confirmed_tip();
        for id in &cell[1..] {
            let other = view.node(*id)?.confirmed_tip();
            snap = common_lc_ancestor(store, &snap, &other)?;
        }
        let b = Arc::new(compose_bft_block(store, &prev, &snap, epoch, leader).ok()?);
        self.view.accept_bft(slot, b.clone());
        Some(b)
    }
}

fn honest_cells(view: &HonestView<'_>, slot: u64) -> Vec<Vec<NodeId>> {
    let sc = view.scenario;
    let awake: Vec<NodeId> = sc.honest().into_iter().filter(|h| sc.awake(*h, slot)).collect();
    let cells: Vec<Vec<NodeId>> = match sc.active_partition(slot) {
        Some(p) => {
            let mut cells: Vec<Vec<NodeId>> = p
                .node_partition
                .iter()
                .map(|c| c.iter().copied().filter(|id| awake.contains(id)).collect())
                .collect();
            let loose: Vec<NodeId> = awake.iter().copied().filter(|id| p.cell_of(*id).is_none()).collect();
            cells.push(loose);
            cells
        }
        None => vec![awake],
    };
    cells.into_iter().filter(|c| !c.is_empty()).collect()
}

pub fn common_lc_ancestor(store: &BlockStore, a: &Hash, b: &Hash) -> Option<Hash> {
    let h = store.lc_height(a)?.min(store.lc_height(b)?);
    let mut x = store.lc_ancestor_at(a, h)?;
    let mut y = store.lc_ancestor_at(b, h)?;
    while x != y {
        x = store.lc(&x)?.prev;
        y = store.lc(&y)?.prev;
    }
    Some(x)
}
