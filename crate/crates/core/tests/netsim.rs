use std::collections::BTreeMap;
use std::sync::Arc;

use sac_core::netsim::{trace_csv, Sim};
use sac_core::scenario::{AdversaryGroup, Bounds, Partition, Scenario, ScenarioError, SleepInterval, Strategy, TxInjection};
use sac_core::{NodeId, Transaction};

fn ids(v: impl IntoIterator<Item = u32>) -> Vec<NodeId> {
    v.into_iter().map(NodeId).collect()
}

fn scenario() -> Scenario {
    let mut sleep = BTreeMap::new();
    sleep.insert(NodeId(5), vec![SleepInterval { sleep_slot: 30, wake_slot: 80 }]);
    sleep.insert(NodeId(1), vec![SleepInterval { sleep_slot: 10, wake_slot: 15 }, SleepInterval { sleep_slot: 90, wake_slot: 95 }]);
    Scenario {
        name: "mixed".into(),
        n: 7,
        adversaries: vec![AdversaryGroup { nodes: ids([6]), strategy: Strategy::Withholder, release_slot: None }],
        delta: 3,
        gst: 60,
        got: 100,
        partitions: vec![Partition { start_slot: 20, end_slot: 60, node_partition: vec![ids(0..3), ids(3..5)] }],
        sleep,
        lottery_p: 0.08,
        k: 3,
        epoch_len: 6,
        seed: 4,
        tx_schedule: (0..10)
            .map(|i| TxInjection { slot: 5 + 20 * i, targets: Vec::new(), tx: Arc::new(Transaction::mint(i + 1, &[1])) })
            .collect(),
        bounds: Bounds::default(),
        slots: 220,
    }
}

#[test]
fn runs_are_deterministic() {
    let a = Sim::run(scenario()).unwrap();
    let b = Sim::run(scenario()).unwrap();
    assert_eq!(trace_csv(&a.trace), trace_csv(&b.trace));
    assert_eq!(serde_json::to_string(&a.transcript).unwrap(), serde_json::to_string(&b.transcript).unwrap());
    assert!(!a.transcript.bft_blocks.is_empty());
    let mut other = scenario();
    other.seed = 5;
    let c = Sim::run(other).unwrap();
    assert_ne!(trace_csv(&a.trace), trace_csv(&c.trace));
}

#[test]
fn empty_run() {
    let mut sc = scenario();
    sc.slots = 0;
    let out = Sim::run(sc).unwrap();
    assert!(out.trace.is_empty());
    assert!(out.transcript.lc_blocks.is_empty() && out.transcript.votes.is_empty());
    assert!(out.transcript.witness.is_none());
}

#[test]
fn deliveries_respect_the_network_model() {
    let sc = scenario();
    let out = Sim::run(sc.clone()).unwrap();
    let env = &out.transcript.envelopes;
    assert!(env.len() > 1000);
    let mut unconstrained = 0;
    for e in env {
        assert!(e.deliver_slot > e.send_slot, "{e:?}");
        assert!(!sc.is_adversary(e.to));
        assert!(sc.awake(e.to, e.deliver_slot), "{e:?}");
        assert!(!sc.partitions.iter().any(|p| p.active(e.deliver_slot) && p.separates(e.from, e.to)), "{e:?}");
        let bound = if e.send_slot >= sc.gst {
            e.send_slot + sc.delta
        } else {
            (e.send_slot + 2 * sc.delta).min(sc.gst + sc.delta).max(e.send_slot + 1)
        };
        let blocked = (e.send_slot..=bound)
            .any(|t| !sc.awake(e.to, t) || sc.partitions.iter().any(|p| p.active(t) && p.separates(e.from, e.to)));
        if !blocked {
            unconstrained += 1;
            assert!(e.deliver_slot <= bound, "{e:?}");
        }
        for p in &sc.partitions {
            if p.active(e.send_slot) && p.separates(e.from, e.to) && sc.awake(e.to, p.end_slot + sc.delta) {
                assert!(e.deliver_slot < p.end_slot + sc.delta || e.deliver_slot <= bound, "{e:?}");
            }
        }
    }
    assert!(unconstrained > env.len() / 2);
}

#[test]
fn sleeping_nodes_are_silent() {
    let sc = scenario();
    let out = Sim::run(sc.clone()).unwrap();
    for e in &out.transcript.envelopes {
        if !sc.is_adversary(e.from) {
            assert!(sc.awake(e.from, e.send_slot), "{e:?}");
        }
    }
    assert!(out.trace.iter().all(|r| sc.awake(r.node, r.slot) && !sc.is_adversary(r.node)));
    let rows_5 = out.trace.iter().filter(|r| r.node == NodeId(5)).count() as u64;
    assert_eq!(rows_5, sc.slots - 50);
}

#[test]
fn invalid_scenarios_are_rejected() {
    let check = |f: fn(&mut Scenario), want: ScenarioError| {
        let mut sc = scenario();
        f(&mut sc);
        assert_eq!(sc.validate(), Err(want.clone()));
        assert_eq!(Sim::new(sc).err(), Some(want));
    };
    check(|s| s.n = 0, ScenarioError::NoValidators);
    check(|s| s.delta = 0, ScenarioError::BadTiming);
    check(|s| s.lottery_p = 1.5, ScenarioError::BadLottery);
    check(|s| s.adversaries[0].nodes.push(NodeId(9)), ScenarioError::NodeOutOfRange(9));
    check(|s| s.adversaries[0].nodes.push(NodeId(6)), ScenarioError::DuplicateAdversary(6));
    check(|s| s.got = 50, ScenarioError::BadSleep(90, 95, 1));
    check(|s| s.partitions[0].end_slot = 20, ScenarioError::BadPartition(20, 20));
    check(|s| s.partitions[0].node_partition[1].push(NodeId(0)), ScenarioError::BadPartition(20, 60));
    check(|s| s.tx_schedule.push(s.tx_schedule[0].clone()), ScenarioError::DuplicateTx(1));
    check(|s| s.adversaries[0].strategy = Strategy::StreamletEquivocator, ScenarioError::WeakEquivocator);
    check(
        |s| {
            s.sleep.insert(NodeId(6), vec![SleepInterval { sleep_slot: 0, wake_slot: 1 }]);
        },
        ScenarioError::AdversarySleeps(6),
    );
    assert!(scenario().validate().is_ok());
}

#[test]
fn scenario_json_roundtrip() {
    let sc = scenario();
    let back: Scenario = serde_json::from_str(&serde_json::to_string(&sc).unwrap()).unwrap();
    assert_eq!(back.digest(), sc.digest());
}
