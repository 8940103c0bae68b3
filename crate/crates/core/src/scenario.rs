//! Declarative simulation input.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{tag, Hash};
use crate::types::{NodeId, TxRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    HonestButSilent,
    Withholder,
    LcPrivateMiner,
    StreamletEquivocator,
    DoubleSpender,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdversaryGroup {
    pub nodes: Vec<NodeId>,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub release_slot: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Partition {
    pub start_slot: u64,
    pub end_slot: u64,
    pub node_partition: Vec<Vec<NodeId>>,
}

impl Partition {
    pub fn active(&self, slot: u64) -> bool {
        self.start_slot <= slot && slot < self.end_slot
    }

    pub fn cell_of(&self, node: NodeId) -> Option<usize> {
        self.node_partition.iter().position(|c| c.contains(&node))
    }

    /// Nodes outside every cell reach everyone.
    pub fn separates(&self, a: NodeId, b: NodeId) -> bool {
        matches!((self.cell_of(a), self.cell_of(b)), (Some(x), Some(y)) if x != y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SleepInterval {
    pub sleep_slot: u64,
    pub wake_slot: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TxInjection {
    pub slot: u64,
    /// Empty means every node.
    #[serde(default)]
    pub targets: Vec<NodeId>,
    pub tx: TxRef,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(rename = "T_fin", default, skip_serializing_if = "Option::is_none")]
    pub t_fin: Option<u64>,
    #[serde(rename = "T_da", default, skip_serializing_if = "Option::is_none")]
    pub t_da: Option<u64>,
    #[serde(rename = "T_catchup", default, skip_serializing_if = "Option::is_none")]
    pub t_catchup: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub adversaries: Vec<AdversaryGroup>,
    pub delta: u64,
    #[serde(default)]
    pub gst: u64,
    #[serde(default)]
    pub got: u64,
    #[serde(default)]
    pub partitions: Vec<Partition>,
    #[serde(default)]
    pub sleep: BTreeMap<NodeId, Vec<SleepInterval>>,
    pub lottery_p: f64,
    #[serde(default = "default_k")]
    pub k: u64,
    pub epoch_len: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tx_schedule: Vec<TxInjection>,
    #[serde(default)]
    pub bounds: Bounds,
    pub slots: u64,
}

fn default_k() -> u64 {
    crate::lc::DEFAULT_K
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("validator count must be positive")]
    NoValidators,
    #[error("node {0} is out of range")]
    NodeOutOfRange(u32),
    #[error("node {0} appears in more than one adversary group")]
    DuplicateAdversary(u32),
    #[error("adversary {0} has a sleep schedule")]
    AdversarySleeps(u32),
    #[error("sleep interval [{0}, {1}) of node {2} is empty or ends after GOT")]
    BadSleep(u64, u64, u32),
    #[error("partition [{0}, {1}) is empty or has overlapping cells")]
    BadPartition(u64, u64),
    #[error("delta and epochLen must be positive")]
    BadTiming,
    #[error("lotteryP must lie in [0, 1]")]
    BadLottery,
    #[error("transaction id {0} is scheduled twice")]
    DuplicateTx(u64),
    #[error("streamlet-equivocator needs more than n/3 adversaries")]
    WeakEquivocator,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n == 0 {
            return Err(ScenarioError::NoValidators);
        }
        if self.delta == 0 || self.epoch_len == 0 {
            return Err(ScenarioError::BadTiming);
        }
        if !(0.0..=1.0).contains(&self.lottery_p) {
            return Err(ScenarioError::BadLottery);
        }
        let in_range = |id: &NodeId| if id.index() < self.n { Ok(()) } else { Err(ScenarioError::NodeOutOfRange(id.0)) };
        let mut advs = HashSet::new();
        for g in &self.adversaries {
            for id in &g.nodes {
                in_range(id)?;
                if !advs.insert(*id) {
                    return Err(ScenarioError::DuplicateAdversary(id.0));
                }
            }
            if g.strategy == Strategy::StreamletEquivocator && 3 * g.nodes.len() <= self.n {
                return Err(ScenarioError::WeakEquivocator);
            }
        }
        for (id, ivs) in &self.sleep {
            in_range(id)?;
            if advs.contains(id) {
                return Err(ScenarioError::AdversarySleeps(id.0));
            }
            for iv in ivs {
                if iv.wake_slot <= iv.sleep_slot || iv.wake_slot > self.got {
                    return Err(ScenarioError::BadSleep(iv.sleep_slot, iv.wake_slot, id.0));
                }
            }
        }
        for p in &self.partitions {
            if p.end_slot <= p.start_slot {
                return Err(ScenarioError::BadPartition(p.start_slot, p.end_slot));
            }
            let mut seen = HashSet::new();
            for id in p.node_partition.iter().flatten() {
                in_range(id)?;
                if !seen.insert(*id) {
                    return Err(ScenarioError::BadPartition(p.start_slot, p.end_slot));
                }
            }
        }
        let mut ids = HashSet::new();
        for inj in &self.tx_schedule {
            for t in &inj.targets {
                in_range(t)?;
            }
            if !ids.insert(inj.tx.id) {
                return Err(ScenarioError::DuplicateTx(inj.tx.id.0));
            }
        }
        Ok(())
    }

    pub fn digest(&self) -> Hash {
        Hash::tagged(tag::SCENARIO, &serde_json::to_vec(self).expect("scenario serializes"))
    }

    pub fn adversary_set(&self) -> BTreeSet<NodeId> {
        self.adversaries.iter().flat_map(|g| g.nodes.iter().copied()).collect()
    }

    pub fn is_adversary(&self, id: NodeId) -> bool {
        self.adversaries.iter().any(|g| g.nodes.contains(&id))
    }

    pub fn honest(&self) -> Vec<NodeId> {
        (0..self.n as u32).map(NodeId).filter(|id| !self.is_adversary(*id)).collect()
    }

    pub fn awake(&self, id: NodeId, slot: u64) -> bool {
        self.sleep
            .get(&id)
            .is_none_or(|ivs| !ivs.iter().any(|iv| iv.sleep_slot <= slot && slot < iv.wake_slot))
    }

    /// First slot at or after `slot` when `id` is awake.
    pub fn next_awake(&self, id: NodeId, slot: u64) -> u64 {
        let mut t = slot;
        while let Some(iv) = self
            .sleep
            .get(&id)
            .and_then(|ivs| ivs.iter().find(|iv| iv.sleep_slot <= t && t < iv.wake_slot))
        {
            t = iv.wake_slot;
        }
        t
    }

    pub fn awake_during(&self, id: NodeId, from: u64, to: u64) -> bool {
        self.sleep
            .get(&id)
            .is_none_or(|ivs| ivs.iter().all(|iv| iv.wake_slot <= from || iv.sleep_slot > to))
    }

    pub fn active_partition(&self, slot: u64) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.active(slot))
    }

    pub fn connected(&self, a: NodeId, b: NodeId, slot: u64) -> bool {
        !self.partitions.iter().any(|p| p.active(slot) && p.separates(a, b))
    }

    pub fn t_fin(&self) -> u64 {
        self.bounds.t_fin.unwrap_or(10 * self.epoch_len)
    }

    pub fn t_da(&self) -> u64 {
        self.bounds.t_da.unwrap_or(10 * self.k.max(1))
    }

    pub fn t_catchup(&self) -> u64 {
        self.bounds.t_catchup.unwrap_or(10 * self.epoch_len)
    }

    /// Mints sent to every node; these are the liveness probes.
    pub fn probes(&self) -> Vec<(u64, TxRef)> {
        self.tx_schedule
            .iter()
            .filter(|i| i.tx.is_mint() && (i.targets.is_empty() || self.honest().iter().all(|h| i.targets.contains(h))))
            .map(|i| (i.slot, i.tx.clone()))
            .collect()
    }

    /// `2f < awake` at every slot, adversaries always awake.
    pub fn honest_awake_majority(&self) -> bool {
        let f = self.adversary_set().len();
        let honest = self.honest();
        let mut edges: BTreeSet<u64> = [0].into();
        for ivs in self.sleep.values() {
            for iv in ivs {
                edges.insert(iv.sleep_slot);
                edges.insert(iv.wake_slot);
            }
        }
        edges
            .into_iter()
            .filter(|&s| s < self.slots.max(1))
            .all(|s| 2 * f < f + honest.iter().filter(|h| self.awake(**h, s)).count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Scenario {
        Scenario {
            name: String::new(),
            n: 4,
            adversaries: vec![],
            delta: 2,
            gst: 0,
            got: 100,
            partitions: vec![],
            sleep: BTreeMap::new(),
            lottery_p: 0.1,
            k: 6,
            epoch_len: 4,
            seed: 0,
            tx_schedule: vec![],
            bounds: Bounds::default(),
            slots: 10,
        }
    }

    #[test]
    fn json_names_and_validation() {
        let mut s = base();
        s.sleep.insert(NodeId(1), vec![SleepInterval { sleep_slot: 3, wake_slot: 9 }]);
        s.adversaries.push(AdversaryGroup { nodes: vec![NodeId(3)], strategy: Strategy::Withholder, release_slot: Some(5) });
        let v = serde_json::to_value(&s).unwrap();
        for key in ["lotteryP", "epochLen", "txSchedule", "sleep", "adversaries"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["adversaries"][0]["strategy"], "withholder");
        assert_eq!(v["sleep"]["1"][0]["wakeSlot"], 9);
        let back: Scenario = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
        assert!(s.validate().is_ok());
        assert!(!s.awake(NodeId(1), 3));
        assert_eq!(s.next_awake(NodeId(1), 4), 9);
        s.sleep.insert(NodeId(3), vec![SleepInterval { sleep_slot: 1, wake_slot: 2 }]);
        assert_eq!(s.validate(), Err(ScenarioError::AdversarySleeps(3)));
    }

    #[test]
    fn unknown_strategy_rejected() {
        let bad = r#"{"nodes":[1],"strategy":"teleporter"}"#;
        assert!(serde_json::from_str::<AdversaryGroup>(bad).is_err());
    }

    #[test]
    fn partition_connectivity() {
        let mut s = base();
        s.partitions.push(Partition { start_slot: 5, end_slot: 8, node_partition: vec![vec![NodeId(0)], vec![NodeId(1)]] });
        assert!(s.connected(NodeId(0), NodeId(1), 4));
        assert!(!s.connected(NodeId(0), NodeId(1), 5));
        assert!(s.connected(NodeId(0), NodeId(3), 5));
        assert!(s.connected(NodeId(0), NodeId(1), 8));
    }
}
