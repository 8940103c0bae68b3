//! SPV fuzzing: light clients shadow honest full nodes through a run and
//! are queried against honest and lying provers.

use serde::{Deserialize, Serialize};

use crate::light_client::{ByzantineProver, HonestProver, Lie, LightClient, Mode, ProverIndex};
use crate::merkle::leaf_hash;
use crate::netsim::Sim;
use crate::rng::{self, Stream};
use crate::scenario::{Scenario, ScenarioError};
use crate::types::{Ledger, NodeId, TxId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tally {
    pub asked: u64,
    pub accepted: u64,
    pub false_accepts: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpvReport {
    pub queries: u64,
    pub honest_available: Tally,
    pub honest_finalized: Tally,
    pub byzantine: Tally,
    /// Full client has the transaction (in either ledger), light client
    /// with an honest prover does not, inside the liveness window.
    pub misses: u64,
    pub liveness_checked: u64,
    pub liveness_from: u64,
    /// Queries answered while the consistency gate withheld the LC root.
    pub gate_fired: u64,
    /// Client-slot pairs during which the gate was closed.
    pub gated_slots: u64,
    /// Slots where a client's tips differed from its full node's.
    pub tip_mismatches: u64,
    pub first_miss: Option<(u64, NodeId, TxId)>,
    pub first_false_accept: Option<(u64, NodeId, TxId)>,
}

impl SpvReport {
    pub fn false_accepts(&self) -> u64 {
        self.honest_available.false_accepts + self.honest_finalized.false_accepts + self.byzantine.false_accepts
    }
}

/// Whether `tx` (as proved by `leaf`) is in `l`, body included.
fn holds(l: &Ledger, tx: TxId, leaf: Option<crate::hash::Hash>) -> bool {
    l.txs.iter().any(|t| t.id == tx && leaf.is_none_or(|h| leaf_hash(t) == h))
}

/// Runs `sc` with a light client beside every honest node and spreads
/// `queries` SPV queries over the run. Queries at slots at or after
/// `liveness_from` also count towards liveness.
pub fn spv_fuzz(sc: &Scenario, queries: u64, seed: u64, liveness_from: u64) -> Result<SpvReport, ScenarioError> {
    let mut sim = Sim::new(sc.clone())?;
    sim.record_accepted();
    sim.set_record_envelopes(false);
    let honest = sc.honest();
    let mut clients: Vec<(NodeId, LightClient, usize, ProverIndex)> = honest
        .iter()
        .map(|id| (*id, LightClient::new(Mode::FollowDa, sc.n, sc.k, sc.seed), 0, ProverIndex::new()))
        .collect();
    let mut plan: Vec<u64> = (0..queries).map(|i| rng::range(seed, "spv-slot", &[i], 0, sc.slots.saturating_sub(1))).collect();
    plan.sort_unstable();
    let scheduled: Vec<TxId> = sc.tx_schedule.iter().map(|i| i.tx.id).collect();
    let mut stream = Stream::new(seed, "spv-query");
    let mut report = SpvReport { liveness_from, ..Default::default() };
    let mut next = 0;

    while !sim.done() {
        let slot = sim.slot();
        sim.step();
        let due = plan[next..].iter().take_while(|s| **s == slot).count();
        next += due;
        for (id, client, cursor, _) in clients.iter_mut() {
            let node = sim.nodes[id.index()].as_mut().expect("honest node");
            for (_, ev) in &node.accepted[*cursor..] {
                client.sync(ev);
            }
            *cursor = node.accepted.len();
            if client.lc_tip() != node.lc.tip || client.finalized_tip() != node.finalized_tip() {
                report.tip_mismatches += 1;
            }
            report.gated_slots += u64::from(client.permitted_available().gated);
        }
        for _ in 0..due {
            let (id, client, _, index) = &mut clients[stream.below(honest.len() as u64) as usize];
            let node = sim.nodes[id.index()].as_mut().expect("honest node");
            index.refresh(&node.store);
            let (fin, da) = node.read_ledgers();
            let tx = match stream.below(10) {
                0..=5 if !da.is_empty() => da.txs[stream.below(da.len() as u64) as usize].id,
                0..=8 if !scheduled.is_empty() => *stream.pick(&scheduled).expect("non-empty"),
                _ => index.any_tx(&mut stream).map(|t| t.id).unwrap_or(TxId(stream.next_u64())),
            };
            report.queries += 1;

            let permitted = client.permitted_available();
            report.gate_fired += u64::from(permitted.gated);
            let mut honest_prover = HonestProver { index };
            let avail = client.spv_available(tx, &mut honest_prover);
            let leaf = avail.proof.as_ref().map(|p| p.leaf);
            let mut bad = tally(&mut report.honest_available, avail.accepted(), holds(&da, tx, leaf));
            let fin_ans = client.spv_finalized(tx, &mut honest_prover);
            let leaf = fin_ans.proof.as_ref().map(|p| p.leaf);
            bad |= tally(&mut report.honest_finalized, fin_ans.accepted(), holds(&fin, tx, leaf));
            if slot >= liveness_from {
                report.liveness_checked += 1;
                let missed = (holds(&da, tx, None) && !avail.accepted()) || (holds(&fin, tx, None) && !fin_ans.accepted());
                if missed {
                    report.misses += 1;
                    report.first_miss.get_or_insert((slot, *id, tx));
                }
            }

            for lie in Lie::ALL {
                let mut liar = ByzantineProver { index, lie, stream: Stream::new(stream.next_u64(), "liar") };
                for (ans, truth) in [(client.spv_available(tx, &mut liar), &da), (client.spv_finalized(tx, &mut liar), &fin)] {
                    let leaf = ans.proof.as_ref().map(|p| p.leaf);
                    bad |= tally(&mut report.byzantine, ans.accepted(), holds(truth, tx, leaf));
                }
            }
            if bad {
                report.first_false_accept.get_or_insert((slot, *id, tx));
            }
        }
    }
    Ok(report)
}

/// Counts one answer; true on a false accept.
fn tally(t: &mut Tally, accepted: bool, truth: bool) -> bool {
    t.asked += 1;
    t.accepted += u64::from(accepted);
    let bad = accepted && !truth;
    t.false_accepts += u64::from(bad);
    bad
}
