//! Hand-built HotStuff vote transcripts, each with the violations it was
//! built to contain.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use sac_core::forensics::{Condition, HotstuffReport};
use sac_core::netsim::Transcript;
use sac_core::types::{Protocol, VoteType};
use sac_core::{BftBlock, Hash, LcBlock, NodeId, VoteRecord};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub evidence: BTreeSet<(NodeId, Condition)>,
    pub suppressed: BTreeSet<NodeId>,
}

impl Expected {
    pub fn of(report: &HotstuffReport) -> Self {
        Expected {
            evidence: report.evidence.iter().map(|e| (e.accused, e.condition)).collect(),
            suppressed: report.suppressed.iter().map(|s| s.accused).collect(),
        }
    }
}

pub struct Fixture {
    pub name: &'static str,
    pub transcript: Transcript,
    pub expected: Expected,
}

const N: usize = 4;

/// The block tree shared by every fixture. `a*` is one branch off genesis,
/// `b*` another; `c3` and `c4` fork `a` after `a1`, `d2` is a sibling of `a2`.
struct Tree {
    a1: Arc<BftBlock>,
    a2: Arc<BftBlock>,
    a3: Arc<BftBlock>,
    a5: Arc<BftBlock>,
    b3: Arc<BftBlock>,
    b4: Arc<BftBlock>,
    b5: Arc<BftBlock>,
    c3: Arc<BftBlock>,
    c4: Arc<BftBlock>,
    d2: Arc<BftBlock>,
}

impl Tree {
    fn new() -> Self {
        let g = BftBlock::genesis(LcBlock::genesis().hash);
        let child = |p: &BftBlock, epoch: u64, proposer: u32| {
            Arc::new(BftBlock::new(p.hash, epoch, NodeId(proposer), g.b, Hash::ZERO, p.depth + 1))
        };
        let a1 = child(&g, 1, 1);
        let a2 = child(&a1, 2, 2);
        let a3 = child(&a2, 3, 3);
        let a5 = child(&a3, 5, 1);
        let b3 = child(&g, 3, 3);
        let b4 = child(&b3, 4, 0);
        let b5 = child(&b4, 5, 1);
        let c3 = child(&a1, 3, 3);
        let c4 = child(&c3, 4, 0);
        let d2 = child(&a1, 2, 0);
        Tree { a1, a2, a3, a5, b3, b4, b5, c3, c4, d2 }
    }

    fn blocks(&self) -> Vec<Arc<BftBlock>> {
        [&self.a1, &self.a2, &self.a3, &self.a5, &self.b3, &self.b4, &self.b5, &self.c3, &self.c4, &self.d2]
            .into_iter()
            .cloned()
            .collect()
    }
}

fn vote(voter: u32, t: VoteType, b: &BftBlock) -> VoteRecord {
    VoteRecord { voter: NodeId(voter), protocol: Protocol::Hotstuff, epoch_or_view: b.epoch, vote_type: t, block: b.hash, block_depth: b.depth }
}

/// Every phase by every validator for `b`.
fn decided(b: &BftBlock) -> Vec<VoteRecord> {
    (0..N as u32)
        .flat_map(|v| [VoteType::Prepare, VoteType::Precommit, VoteType::Commit].map(|t| vote(v, t, b)))
        .collect()
}

fn prepares(voters: &[u32], b: &BftBlock) -> Vec<VoteRecord> {
    voters.iter().map(|v| vote(*v, VoteType::Prepare, b)).collect()
}

fn fixture(name: &'static str, tree: &Tree, votes: Vec<VoteRecord>, evidence: &[(u32, Condition)], suppressed: &[u32]) -> Fixture {
    Fixture {
        name,
        transcript: Transcript { n: N, bft_blocks: tree.blocks(), votes, ..Default::default() },
        expected: Expected {
            evidence: evidence.iter().map(|(v, c)| (NodeId(*v), *c)).collect(),
            suppressed: suppressed.iter().copied().map(NodeId).collect(),
        },
    }
}

pub fn hotstuff_fixtures() -> Vec<Fixture> {
    use Condition::{Hotstuff1 as H1, Hotstuff2 as H2};
    use VoteType::{Commit, Precommit, Prepare};
    let t = Tree::new();
    let with = |mut base: Vec<VoteRecord>, extra: Vec<VoteRecord>| {
        base.extend(extra);
        base
    };
    let honest = with(decided(&t.a1), decided(&t.a2));
    // a2 prepared and precommitted by all, committed by 1 only.
    let partial = with(
        decided(&t.a1),
        (0..N as u32).flat_map(|v| [vote(v, Prepare, &t.a2), vote(v, Precommit, &t.a2)]).chain([vote(1, Commit, &t.a2)]).collect(),
    );

    vec![
        fixture("honest_linear", &t, honest.clone(), &[], &[]),
        fixture("double_prepare", &t, with(honest.clone(), vec![vote(3, Prepare, &t.d2)]), &[(3, H1)], &[]),
        fixture("double_commit", &t, with(honest.clone(), vec![vote(2, Commit, &t.d2)]), &[(2, H1)], &[]),
        fixture(
            "double_precommit_two_voters",
            &t,
            with(honest.clone(), vec![vote(0, Precommit, &t.d2), vote(1, Precommit, &t.d2)]),
            &[(0, H1), (1, H1)],
            &[],
        ),
        fixture(
            "same_view_different_phase",
            &t,
            vec![vote(3, Prepare, &t.a2), vote(3, Commit, &t.d2)],
            &[],
            &[],
        ),
        fixture("commit_then_conflicting_prepare", &t, with(honest.clone(), vec![vote(1, Prepare, &t.b3)]), &[(1, H2)], &[]),
        fixture(
            "excused_by_prepare_quorum",
            &t,
            with(partial.clone(), with(prepares(&[0, 2, 3], &t.c3), vec![vote(1, Prepare, &t.c4)])),
            &[],
            &[1],
        ),
        fixture(
            "quorum_too_thin",
            &t,
            with(partial.clone(), with(prepares(&[0, 2], &t.c3), vec![vote(1, Prepare, &t.c4)])),
            &[(1, H2)],
            &[],
        ),
        fixture(
            "quorum_for_extension",
            &t,
            with(partial.clone(), with(prepares(&[0, 2, 3], &t.a3), vec![vote(1, Prepare, &t.c4)])),
            &[(1, H2)],
            &[],
        ),
        fixture(
            "quorum_at_prepare_view",
            &t,
            with(vec![vote(1, Commit, &t.a2)], prepares(&[0, 1, 2, 3], &t.b5)),
            &[(1, H2)],
            &[],
        ),
        fixture("prepare_extends_commit", &t, with(honest.clone(), vec![vote(1, Prepare, &t.a5)]), &[], &[]),
        fixture(
            "both_conditions",
            &t,
            with(honest.clone(), vec![vote(0, Precommit, &t.d2), vote(3, Prepare, &t.b3)]),
            &[(0, H1), (3, H2)],
            &[],
        ),
        fixture("prepare_before_commit", &t, vec![vote(2, Prepare, &t.b3), vote(2, Commit, &t.a5)], &[], &[]),
        fixture(
            "excused_and_guilty",
            &t,
            with(partial, with(prepares(&[0, 2, 3], &t.c3), vec![vote(1, Prepare, &t.c4), vote(2, Commit, &t.a2)])),
            &[(2, H2)],
            &[1],
        ),
        fixture(
            "sibling_fork_commit",
            &t,
            with(honest, vec![vote(0, Prepare, &t.c3)]),
            &[(0, H2)],
            &[],
        ),
    ]
}
