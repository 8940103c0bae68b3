//! Deterministic slot-driven network simulator.
//!
//! Per slot: due messages are delivered to awake honest nodes, each honest
//! node runs one slot, the adversary reacts to everything just sent, and
//! new messages are scheduled. Delays are keyed draws, so a run is a pure
//! function of its scenario.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, HonestView};
use crate::checks::{Monitor, SlotStats};
use crate::forensics::{find_witness, SafetyViolationWitness};
use crate::hash::Hash;
use crate::node::{Dest, MessageKind, Node, NodeConfig, Outbound, Payload};
use crate::rng;
use crate::scenario::{Scenario, ScenarioError};
use crate::store::LedgerCache;
use crate::types::{BftBlock, LcBlock, NodeId, TxRef, VoteRecord};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Envelope {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: MessageKind,
    pub id: Hash,
    pub send_slot: u64,
    pub deliver_slot: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceRow {
    pub slot: u64,
    pub node: NodeId,
    pub len_fin: u64,
    pub len_da: u64,
    pub lc_tip: Hash,
    pub bft_tip: Hash,
}

/// Everything that was said during a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Transcript {
    pub n: usize,
    #[serde(default)]
    pub adversaries: Vec<NodeId>,
    #[serde(default)]
    pub lc_blocks: Vec<Arc<LcBlock>>,
    #[serde(default)]
    pub bft_blocks: Vec<Arc<BftBlock>>,
    #[serde(default)]
    pub votes: Vec<VoteRecord>,
    #[serde(default)]
    pub envelopes: Vec<Envelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<SafetyViolationWitness>,
}

impl Transcript {
    pub fn bft_index(&self) -> std::collections::HashMap<Hash, Arc<BftBlock>> {
        let mut m: std::collections::HashMap<Hash, Arc<BftBlock>> =
            self.bft_blocks.iter().map(|b| (b.hash, b.clone())).collect();
        let g = BftBlock::genesis(LcBlock::genesis().hash);
        m.entry(g.hash).or_insert_with(|| Arc::new(g));
        m
    }
}

struct Delivery {
    from: NodeId,
    to: NodeId,
    payload: Payload,
}

pub struct Sim {
    pub scenario: Scenario,
    pub nodes: Vec<Option<Node>>,
    adversary: Adversary,
    queue: BTreeMap<u64, Vec<Delivery>>,
    injections: BTreeMap<u64, Vec<(NodeId, TxRef)>>,
    seen: HashSet<Hash>,
    pub trace: Vec<TraceRow>,
    pub transcript: Transcript,
    pub monitor: Monitor,
    slot: u64,
    record_envelopes: bool,
}

pub struct RunOutput {
    pub trace: Vec<TraceRow>,
    pub transcript: Transcript,
    pub monitor: Monitor,
    pub nodes: Vec<Option<Node>>,
}

impl Sim {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let cfg = NodeConfig {
            n: scenario.n,
            k: scenario.k,
            epoch_len: scenario.epoch_len,
            seed: scenario.seed,
            lottery_p: scenario.lottery_p,
        };
        let cache = LedgerCache::new();
        let nodes = (0..scenario.n as u32)
            .map(NodeId)
            .map(|id| (!scenario.is_adversary(id)).then(|| Node::new(id, cfg, cache.clone())))
            .collect();
        let adversary = Adversary::new(&scenario, cfg, &cache);
        let honest = scenario.honest();
        let mut injections: BTreeMap<u64, Vec<(NodeId, TxRef)>> = BTreeMap::new();
        for inj in &scenario.tx_schedule {
            let targets: Vec<NodeId> =
                if inj.targets.is_empty() { (0..scenario.n as u32).map(NodeId).collect() } else { inj.targets.clone() };
            for t in targets {
                let at = if honest.contains(&t) { scenario.next_awake(t, inj.slot) } else { inj.slot };
                injections.entry(at).or_default().push((t, inj.tx.clone()));
            }
        }
        let transcript = Transcript { n: scenario.n, adversaries: scenario.adversary_set().into_iter().collect(), ..Default::default() };
        Ok(Sim {
            monitor: Monitor::new(&scenario),
            scenario,
            nodes,
            adversary,
            queue: BTreeMap::new(),
            injections,
            seen: HashSet::new(),
            trace: Vec::new(),
            transcript,
            slot: 0,
            record_envelopes: true,
        })
    }

    pub fn set_record_envelopes(&mut self, on: bool) {
        self.record_envelopes = on;
    }

    /// Enables header/vote logging on every honest node (light clients
    /// replay it).
    pub fn record_accepted(&mut self) {
        for n in self.nodes.iter_mut().flatten() {
            n.record_accepted = true;
        }
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn done(&self) -> bool {
        self.slot >= self.scenario.slots
    }

    pub fn run(scenario: Scenario) -> Result<RunOutput, ScenarioError> {
        let mut sim = Sim::new(scenario)?;
        while sim.step() {}
        Ok(sim.finish())
    }

    pub fn finish(mut self) -> RunOutput {
        self.transcript.witness = find_witness(&self.transcript);
        RunOutput { trace: self.trace, transcript: self.transcript, monitor: self.monitor, nodes: self.nodes }
    }

    /// Runs one slot; false once the scenario is over.
    pub fn step(&mut self) -> bool {
        if self.done() {
            return false;
        }
        let s = self.slot;
        let mut inboxes: BTreeMap<NodeId, Vec<Payload>> = BTreeMap::new();
        for d in self.queue.remove(&s).unwrap_or_default() {
            debug_assert!(d.from != d.to);
            inboxes.entry(d.to).or_default().push(d.payload);
        }
        for (to, tx) in self.injections.remove(&s).unwrap_or_default() {
            if self.adversary.is_member(to) {
                self.adversary.inject(to, tx);
            } else {
                inboxes.entry(to).or_default().push(Payload::Tx(tx));
            }
        }

        let mut sent: Vec<(NodeId, Outbound)> = Vec::new();
        for i in 0..self.nodes.len() {
            let id = NodeId(i as u32);
            if !self.scenario.awake(id, s) {
                continue;
            }
            if let Some(node) = self.nodes[i].as_mut() {
                let inbox = inboxes.remove(&id).unwrap_or_default();
                sent.extend(node.on_slot(s, inbox).into_iter().map(|o| (id, o)));
            }
        }
        let observed: Vec<(NodeId, Payload)> = sent.iter().map(|(f, o)| (*f, o.payload.clone())).collect();
        let view = HonestView { scenario: &self.scenario, nodes: &self.nodes };
        let adv = self.adversary.step(s, &observed, &view);
        sent.extend(adv);

        for (from, o) in sent {
            self.record(&o.payload);
            self.route(s, from, o);
        }
        self.observe(s);
        self.slot += 1;
        true
    }

    fn record(&mut self, p: &Payload) {
        if !self.seen.insert(p.id()) {
            return;
        }
        match p {
            Payload::Lc(b) => self.transcript.lc_blocks.push(b.clone()),
            Payload::Bft(b) => self.transcript.bft_blocks.push(b.clone()),
            Payload::Vote(v) => self.transcript.votes.push(*v),
            Payload::Tx(_) => {}
        }
    }

    fn route(&mut self, s: u64, from: NodeId, o: Outbound) {
        let targets: Vec<NodeId> = match o.to {
            Dest::All => (0..self.scenario.n as u32).map(NodeId).filter(|t| *t != from).collect(),
            Dest::Only(v) => v.into_iter().filter(|t| *t != from).collect(),
        };
        let key = o.payload.id().prefix_u64();
        for to in targets {
            if self.adversary.is_member(to) {
                continue;
            }
            let at = self.deliver_slot(from, to, s, key);
            if self.record_envelopes {
                self.transcript.envelopes.push(Envelope {
                    from,
                    to,
                    kind: o.payload.kind(),
                    id: o.payload.id(),
                    send_slot: s,
                    deliver_slot: at,
                });
            }
            self.queue.entry(at).or_default().push(Delivery { from, to, payload: o.payload.clone() });
        }
    }

    /// Post-GST delays are uniform in `[1, delta]`; earlier sends may take
    /// up to `2 delta` but always arrive by `gst + delta`. A message that
    /// would land across an active partition waits for the partition to end,
    /// and a sleeping recipient gets it when it wakes.
    pub fn deliver_slot(&self, from: NodeId, to: NodeId, s: u64, key: u64) -> u64 {
        let sc = &self.scenario;
        let keys = [from.0 as u64, to.0 as u64, s, key];
        let mut t = if s >= sc.gst {
            s + rng::range(sc.seed, "delay", &keys, 1, sc.delta)
        } else {
            (s + rng::range(sc.seed, "delay", &keys, 1, 2 * sc.delta)).min(sc.gst + sc.delta).max(s + 1)
        };
        loop {
            let mut moved = false;
            for p in &sc.partitions {
                if p.active(t) && p.separates(from, to) {
                    t = p.end_slot + rng::range(sc.seed, "heal", &keys, 0, sc.delta - 1);
                    moved = true;
                }
            }
            let w = sc.next_awake(to, t);
            if w != t {
                t = w;
                moved = true;
            }
            if !moved {
                return t;
            }
        }
    }

    fn observe(&mut self, s: u64) {
        let mut stats = SlotStats { slot: s, min_fin: u64::MAX, min_da: u64::MAX, ..Default::default() };
        for i in 0..self.nodes.len() {
            let id = NodeId(i as u32);
            if !self.scenario.awake(id, s) {
                continue;
            }
            let Some(node) = self.nodes[i].as_mut() else { continue };
            let (fin, da) = node.read_ledgers();
            self.monitor.observe(s, id, &fin, &da);
            let (lf, ld) = (fin.len() as u64, da.len() as u64);
            stats.awake += 1;
            stats.min_fin = stats.min_fin.min(lf);
            stats.max_fin = stats.max_fin.max(lf);
            stats.min_da = stats.min_da.min(ld);
            stats.max_da = stats.max_da.max(ld);
            self.trace.push(TraceRow { slot: s, node: id, len_fin: lf, len_da: ld, lc_tip: node.lc.tip, bft_tip: node.finalized_tip() });
        }
        if stats.awake == 0 {
            stats.min_fin = 0;
            stats.min_da = 0;
        }
        self.monitor.end_slot(stats);
    }
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("slot,node,lenFin,lenDa,lcTip,bftTip\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{},{}\n", r.slot, r.node, r.len_fin, r.len_da, r.lc_tip, r.bft_tip));
    }
    s
}

/// Two-line plot data: per slot, min/max honest ledger lengths.
pub fn plot_csv(series: &[SlotStats]) -> String {
    let mut s = String::from("slot,minLenFin,maxLenFin,minLenDa,maxLenDa\n");
    for x in series {
        s.push_str(&format!("{},{},{},{},{}\n", x.slot, x.min_fin, x.max_fin, x.min_da, x.max_da));
    }
    s
}
