//! The scenarios shipped in `scenarios/`. The JSON files are generated from
//! these builders (`cargo run --example gen_assets`).

use std::collections::BTreeMap;
use std::sync::Arc;

use sac_core::scenario::{AdversaryGroup, Bounds, Partition, Scenario, SleepInterval, Strategy, TxInjection};
use sac_core::{CoinId, NodeId, Transaction, TxId};

fn nodes(ids: impl IntoIterator<Item = u32>) -> Vec<NodeId> {
    ids.into_iter().map(NodeId).collect()
}

fn base(name: &str, n: usize, slots: u64) -> Scenario {
    Scenario {
        name: name.into(),
        n,
        adversaries: Vec::new(),
        delta: 2,
        gst: 0,
        got: 0,
        partitions: Vec::new(),
        sleep: BTreeMap::new(),
        lottery_p: 0.02,
        k: 6,
        epoch_len: 10,
        seed: 1,
        tx_schedule: Vec::new(),
        bounds: Bounds::default(),
        slots,
    }
}

/// A mint to every node each `every` slots from `first`; ids from 1.
fn mints(sc: &mut Scenario, first: u64, every: u64) {
    let mut id = 1;
    let mut slot = first;
    while slot < sc.slots {
        sc.tx_schedule.push(TxInjection { slot, targets: Vec::new(), tx: Arc::new(Transaction::mint(id, &[5])) });
        id += 1;
        slot += every;
    }
}

/// Spends of earlier mints, each sent to a single honest node.
fn spends(sc: &mut Scenario, first: u64, every: u64, count: u64) {
    let honest = sc.honest();
    for i in 0..count {
        let slot = first + i * every;
        let src = CoinId::new(TxId(i + 1), 0);
        let to = honest[i as usize % honest.len()];
        let tx = Transaction::spend(1000 + i, vec![src], &[3, 2]);
        sc.tx_schedule.push(TxInjection { slot, targets: vec![to], tx: Arc::new(tx) });
    }
}

pub fn p2_baseline(seed: u64) -> Scenario {
    let mut sc = base("p2_baseline", 10, 1200);
    sc.seed = seed;
    sc.adversaries.push(AdversaryGroup { nodes: nodes([8, 9]), strategy: Strategy::LcPrivateMiner, release_slot: None });
    sc.got = 600;
    for (node, from, to) in [(1, 100, 300), (2, 200, 500), (3, 350, 600)] {
        sc.sleep.insert(NodeId(node), vec![SleepInterval { sleep_slot: from, wake_slot: to }]);
    }
    mints(&mut sc, 20, 50);
    sc.bounds.t_da = Some(150);
    sc
}

pub fn p1_partition() -> Scenario {
    let mut sc = base("p1_partition", 10, 2400);
    sc.seed = 3;
    sc.adversaries.push(AdversaryGroup { nodes: nodes([7, 8, 9]), strategy: Strategy::DoubleSpender, release_slot: None });
    sc.partitions.push(Partition { start_slot: 1400, end_slot: 2000, node_partition: vec![nodes(0..4), nodes(4..7)] });
    sc.gst = 2000;
    mints(&mut sc, 0, 50);
    spends(&mut sc, 300, 50, 40);
    sc.bounds.t_catchup = Some(200);
    sc
}

pub fn attack_equivocate() -> Scenario {
    let mut sc = base("attack_equivocate", 6, 400);
    sc.adversaries.push(AdversaryGroup { nodes: nodes([3, 4, 5]), strategy: Strategy::StreamletEquivocator, release_slot: None });
    sc.partitions.push(Partition { start_slot: 0, end_slot: 300, node_partition: vec![nodes([0]), nodes([1, 2])] });
    sc.gst = 300;
    mints(&mut sc, 20, 50);
    sc
}

pub fn fig1_ebb_flow() -> Scenario {
    let mut sc = base("fig1_ebb_flow", 10, 1800);
    sc.adversaries.push(AdversaryGroup { nodes: nodes([8, 9]), strategy: Strategy::Withholder, release_slot: None });
    for node in 3..8 {
        sc.sleep.insert(NodeId(node), vec![SleepInterval { sleep_slot: 0, wake_slot: 400 }]);
    }
    sc.got = 400;
    sc.partitions.push(Partition { start_slot: 900, end_slot: 1300, node_partition: vec![nodes(0..4), nodes(4..8)] });
    sc.gst = 1300;
    mints(&mut sc, 20, 50);
    sc.bounds.t_catchup = Some(200);
    sc
}

pub fn all() -> Vec<Scenario> {
    vec![p2_baseline(1), p1_partition(), attack_equivocate(), fig1_ebb_flow()]
}
