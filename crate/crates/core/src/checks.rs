//! Online monitoring of honest ledgers and the ebb-and-flow checks.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::types::{Ledger, NodeId, TxId};

/// Keeps the longest ledger seen so far; any ledger that is neither a prefix
/// nor an extension of it is a conflict.
#[derive(Clone, Debug, Default)]
pub struct ChainTracker {
    longest: Option<Arc<Ledger>>,
    pub conflicts: u64,
    pub first_conflict: Option<(u64, NodeId)>,
}

impl ChainTracker {
    pub fn observe(&mut self, l: &Arc<Ledger>, slot: u64, node: NodeId) {
        match &self.longest {
            None => self.longest = Some(l.clone()),
            Some(m) if Arc::ptr_eq(m, l) || l.is_prefix_of(m) => {}
            Some(m) if m.is_prefix_of(l) => self.longest = Some(l.clone()),
            Some(_) => {
                self.conflicts += 1;
                self.first_conflict.get_or_insert((slot, node));
            }
        }
    }

    pub fn longest(&self) -> Option<&Arc<Ledger>> {
        self.longest.as_ref()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SlotStats {
    pub slot: u64,
    pub awake: u32,
    pub min_fin: u64,
    pub max_fin: u64,
    pub min_da: u64,
    pub max_da: u64,
}

#[derive(Clone, Debug)]
struct Probe {
    slot: u64,
    tx: TxId,
}

pub struct Monitor {
    pub prefix_violations: Vec<(u64, NodeId)>,
    pub fin: ChainTracker,
    pub da: ChainTracker,
    last: HashMap<NodeId, (Arc<Ledger>, Arc<Ledger>)>,
    probes: Vec<Probe>,
    probe_index: HashMap<TxId, usize>,
    /// First slot each probe was seen in each node's ledgers.
    pub fin_seen: HashMap<(usize, NodeId), u64>,
    pub da_seen: HashMap<(usize, NodeId), u64>,
    pub series: Vec<SlotStats>,
}

impl Monitor {
    pub fn new(scenario: &Scenario) -> Self {
        let probes: Vec<Probe> = scenario.probes().into_iter().map(|(slot, tx)| Probe { slot, tx: tx.id }).collect();
        let probe_index = probes.iter().enumerate().map(|(i, p)| (p.tx, i)).collect();
        Monitor {
            prefix_violations: Vec::new(),
            fin: ChainTracker::default(),
            da: ChainTracker::default(),
            last: HashMap::new(),
            probes,
            probe_index,
            fin_seen: HashMap::new(),
            da_seen: HashMap::new(),
            series: Vec::new(),
        }
    }

    pub fn observe(&mut self, slot: u64, node: NodeId, fin: &Arc<Ledger>, da: &Arc<Ledger>) {
        let (old_fin, old_da) = match self.last.get(&node) {
            Some((f, d)) if Arc::ptr_eq(f, fin) && Arc::ptr_eq(d, da) => return,
            Some((f, d)) => (Some(f.clone()), Some(d.clone())),
            None => (None, None),
        };
        if !fin.is_prefix_of(da) {
            self.prefix_violations.push((slot, node));
        }
        self.fin.observe(fin, slot, node);
        self.da.observe(da, slot, node);
        Self::scan(&self.probe_index, &mut self.fin_seen, old_fin.as_ref(), fin, slot, node);
        Self::scan(&self.probe_index, &mut self.da_seen, old_da.as_ref(), da, slot, node);
        self.last.insert(node, (fin.clone(), da.clone()));
    }

    fn scan(
        index: &HashMap<TxId, usize>,
        seen: &mut HashMap<(usize, NodeId), u64>,
        old: Option<&Arc<Ledger>>,
        new: &Arc<Ledger>,
        slot: u64,
        node: NodeId,
    ) {
        if index.is_empty() {
            return;
        }
        let from = match old {
            Some(o) if Arc::ptr_eq(o, new) => return,
            Some(o) if o.is_prefix_of(new) => o.len(),
            _ => 0,
        };
        for tx in &new.txs[from..] {
            if let Some(&i) = index.get(&tx.id) {
                seen.entry((i, node)).or_insert(slot);
            }
        }
    }

    pub fn end_slot(&mut self, stats: SlotStats) {
        self.series.push(stats);
    }

    pub fn probe_count(&self) -> usize {
        self.probes.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "n.a.")]
    NotApplicable,
}

impl Outcome {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    pub fn failed(self) -> bool {
        self == Outcome::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checks {
    pub prefix: Outcome,
    #[serde(rename = "p1-safety")]
    pub p1_safety: Outcome,
    #[serde(rename = "p1-liveness")]
    pub p1_liveness: Outcome,
    #[serde(rename = "p2-safety")]
    pub p2_safety: Outcome,
    #[serde(rename = "p2-liveness")]
    pub p2_liveness: Outcome,
    pub catchup: Outcome,
}

impl Checks {
    pub fn all(&self) -> [(&'static str, Outcome); 6] {
        [
            ("prefix", self.prefix),
            ("p1-safety", self.p1_safety),
            ("p1-liveness", self.p1_liveness),
            ("p2-safety", self.p2_safety),
            ("p2-liveness", self.p2_liveness),
            ("catchup", self.catchup),
        ]
    }

    pub fn any_failed(&self) -> bool {
        self.all().iter().any(|(_, o)| o.failed())
    }
}

pub fn p1_applies(sc: &Scenario) -> bool {
    3 * sc.adversary_set().len() < sc.n
}

pub fn p2_applies(sc: &Scenario) -> bool {
    sc.gst == 0 && sc.partitions.is_empty() && sc.honest_awake_majority()
}

pub fn evaluate(sc: &Scenario, m: &Monitor) -> Checks {
    let honest = sc.honest();
    let p1 = p1_applies(sc);
    let p2 = p2_applies(sc);
    let settle = sc.gst.max(sc.got);

    let p1_liveness = if p1 && sc.partitions.iter().all(|p| p.end_slot <= sc.gst) {
        let t = sc.t_fin();
        let due: Vec<usize> = (0..m.probes.len())
            .filter(|&i| m.probes[i].slot >= settle && m.probes[i].slot + t < sc.slots)
            .collect();
        if due.is_empty() {
            Outcome::NotApplicable
        } else {
            Outcome::from_bool(due.iter().all(|&i| {
                let deadline = m.probes[i].slot + t;
                honest.iter().all(|h| m.fin_seen.get(&(i, *h)).is_some_and(|&s| s <= deadline))
            }))
        }
    } else {
        Outcome::NotApplicable
    };

    let p2_liveness = if p2 {
        let t = sc.t_da();
        let due: Vec<usize> = (0..m.probes.len()).filter(|&i| m.probes[i].slot + t < sc.slots).collect();
        if due.is_empty() {
            Outcome::NotApplicable
        } else {
            Outcome::from_bool(due.iter().all(|&i| {
                let (from, deadline) = (m.probes[i].slot, m.probes[i].slot + t);
                honest
                    .iter()
                    .filter(|h| sc.awake_during(**h, from, deadline))
                    .all(|h| m.da_seen.get(&(i, *h)).is_some_and(|&s| s <= deadline))
            }))
        }
    } else {
        Outcome::NotApplicable
    };

    let catchup = if p1 && !sc.partitions.is_empty() { Outcome::from_bool(catchup_ok(sc, m)) } else { Outcome::NotApplicable };

    Checks {
        prefix: Outcome::from_bool(m.prefix_violations.is_empty()),
        p1_safety: if p1 { Outcome::from_bool(m.fin.conflicts == 0) } else { Outcome::NotApplicable },
        p1_liveness,
        p2_safety: if p2 { Outcome::from_bool(m.da.conflicts == 0) } else { Outcome::NotApplicable },
        p2_liveness,
        catchup,
    }
}

/// During each partition the smallest honest finalized ledger does not
/// move; within `T_catchup` of healing it reaches the largest available
/// ledger observed at healing time.
pub fn catchup_ok(sc: &Scenario, m: &Monitor) -> bool {
    sc.partitions.iter().all(|p| catchup_detail(sc, m, p.start_slot, p.end_slot).is_some_and(|d| d.ok))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CatchupDetail {
    pub stalled: bool,
    pub watermark: u64,
    pub reached_at: Option<u64>,
    pub ok: bool,
}

pub fn catchup_detail(sc: &Scenario, m: &Monitor, start: u64, end: u64) -> Option<CatchupDetail> {
    let at = |s: u64| m.series.iter().find(|x| x.slot == s);
    let window: Vec<&SlotStats> = m.series.iter().filter(|x| x.slot >= start && x.slot < end).collect();
    let first = window.first()?.min_fin;
    let stalled = window.iter().all(|x| x.min_fin == first);
    let watermark = at(end.checked_sub(1)?)?.max_da;
    let reached_at = m
        .series
        .iter()
        .filter(|x| x.slot >= end && x.min_fin >= watermark)
        .map(|x| x.slot)
        .next();
    let ok = stalled && reached_at.is_some_and(|s| s <= end + sc.t_catchup());
    Some(CatchupDetail { stalled, watermark, reached_at, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Transaction;

    #[test]
    fn tracker_detects_fork() {
        let t = |i| Arc::new(Transaction::mint(i, &[1]));
        let a = Arc::new(Ledger::new(vec![t(1)]));
        let ab = Arc::new(Ledger::new(vec![t(1), t(2)]));
        let ac = Arc::new(Ledger::new(vec![t(1), t(3)]));
        let mut tr = ChainTracker::default();
        tr.observe(&a, 0, NodeId(0));
        tr.observe(&ab, 1, NodeId(0));
        tr.observe(&a, 2, NodeId(1));
        assert_eq!(tr.conflicts, 0);
        tr.observe(&ac, 3, NodeId(1));
        assert_eq!(tr.conflicts, 1);
        assert_eq!(tr.first_conflict, Some((3, NodeId(1))));
    }
}
