//! Accountability: slashing-condition scans over vote transcripts and
//! attribution of a BFT safety violation to provably guilty validators.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bft::{ancestor_at, conflicting, quorum, BftLookup, BftState};
use crate::hash::Hash;
use crate::netsim::Transcript;
use crate::types::{NodeId, Protocol, VoteRecord, VoteType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "streamlet-1")]
    Streamlet1,
    #[serde(rename = "streamlet-2")]
    Streamlet2,
    #[serde(rename = "hotstuff-1")]
    Hotstuff1,
    #[serde(rename = "hotstuff-2")]
    Hotstuff2,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::Streamlet1, Condition::Streamlet2, Condition::Hotstuff1, Condition::Hotstuff2];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub accused: NodeId,
    pub condition: Condition,
    pub votes: [VoteRecord; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<Vec<VoteRecord>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ForensicsError {
    #[error("block {0} is not in the transcript")]
    UnknownBlock(Hash),
    #[error("no notarization for block {0} in the witness")]
    MissingNotarization(Hash),
    #[error("notarization of {block} has {got} voters, quorum is {need}")]
    ThinNotarization { block: Hash, got: usize, need: usize },
    #[error("transcript has no vote by {voter} for {block}")]
    MissingVote { voter: NodeId, block: Hash },
    #[error("witness is inconsistent: {0}")]
    BadWitness(&'static str),
}

fn is_streamlet(v: &VoteRecord) -> bool {
    v.protocol == Protocol::Streamlet && v.vote_type == VoteType::Generic
}

fn is_hotstuff(v: &VoteRecord) -> bool {
    v.protocol == Protocol::Hotstuff && v.vote_type != VoteType::Generic
}

/// The named condition's predicate on an ordered vote pair. Ancestry and
/// the exception clause are only consulted for hotstuff-2.
pub fn violates<L: BftLookup>(c: Condition, a: &VoteRecord, b: &VoteRecord, lookup: &L, context: &[VoteRecord], n: usize) -> bool {
    if a.voter != b.voter {
        return false;
    }
    match c {
        Condition::Streamlet1 => is_streamlet(a) && is_streamlet(b) && a.epoch_or_view == b.epoch_or_view && a.block != b.block,
        Condition::Streamlet2 => {
            is_streamlet(a) && is_streamlet(b) && a.epoch_or_view < b.epoch_or_view && a.block_depth > b.block_depth
        }
        Condition::Hotstuff1 => {
            is_hotstuff(a)
                && is_hotstuff(b)
                && a.vote_type == b.vote_type
                && a.epoch_or_view == b.epoch_or_view
                && a.block != b.block
        }
        Condition::Hotstuff2 => {
            is_hotstuff(a)
                && is_hotstuff(b)
                && a.vote_type == VoteType::Commit
                && b.vote_type == VoteType::Prepare
                && a.epoch_or_view < b.epoch_or_view
                && conflicting(lookup, &a.block, &b.block) == Some(true)
                && exception(a, b, lookup, context, n).is_none()
        }
    }
}

/// A prepare quorum in a view strictly between the commit and the prepare,
/// for a block conflicting with the committed one.
fn exception<L: BftLookup>(commit: &VoteRecord, prepare: &VoteRecord, lookup: &L, context: &[VoteRecord], n: usize) -> Option<(u64, Hash)> {
    let (lo, hi) = (commit.epoch_or_view, prepare.epoch_or_view);
    let mut tally: BTreeMap<(u64, Hash), BTreeSet<NodeId>> = BTreeMap::new();
    for v in context {
        if v.protocol == Protocol::Hotstuff && v.vote_type == VoteType::Prepare && v.epoch_or_view > lo && v.epoch_or_view < hi {
            tally.entry((v.epoch_or_view, v.block)).or_default().insert(v.voter);
        }
    }
    tally
        .into_iter()
        .find(|((_, blk), voters)| voters.len() >= quorum(n) && conflicting(lookup, blk, &commit.block) == Some(true))
        .map(|(k, _)| k)
}

/// Both votes name a known block with matching epoch (or view) and depth.
fn anchored<L: BftLookup>(v: &VoteRecord, lookup: &L) -> bool {
    lookup
        .get_bft(&v.block)
        .is_some_and(|b| b.epoch == v.epoch_or_view && b.depth == v.block_depth)
}

/// True iff the evidence stands on its own against `lookup`.
pub fn verify_evidence<L: BftLookup>(e: &Evidence, lookup: &L, n: usize) -> bool {
    let [a, b] = &e.votes;
    if a.voter != e.accused || b.voter != e.accused || !anchored(a, lookup) || !anchored(b, lookup) {
        return false;
    }
    match (e.condition, &e.context) {
        (Condition::Hotstuff2, Some(ctx)) => {
            let (lo, hi) = (a.epoch_or_view, b.epoch_or_view);
            ctx.iter().all(|v| {
                v.protocol == Protocol::Hotstuff && v.vote_type == VoteType::Prepare && v.epoch_or_view > lo && v.epoch_or_view < hi
            }) && violates(e.condition, a, b, lookup, ctx, n)
        }
        (Condition::Hotstuff2, None) | (_, Some(_)) => false,
        (c, None) => violates(c, a, b, lookup, &[], n),
    }
}

fn by_voter<'a>(votes: impl Iterator<Item = &'a VoteRecord>) -> BTreeMap<NodeId, Vec<VoteRecord>> {
    let mut m: BTreeMap<NodeId, Vec<VoteRecord>> = BTreeMap::new();
    for v in votes {
        m.entry(v.voter).or_default().push(*v);
    }
    for vs in m.values_mut() {
        vs.sort_by_key(|v| (v.epoch_or_view, v.block, v.block_depth, v.vote_type as u8));
        vs.dedup();
    }
    m
}

/// At most one streamlet-1 and one streamlet-2 evidence per validator; a
/// validator is listed iff some pair of its votes violates the condition.
pub fn streamlet_scan(votes: &[VoteRecord]) -> Vec<Evidence> {
    let mut out = Vec::new();
    for (voter, vs) in by_voter(votes.iter().filter(|v| is_streamlet(v))) {
        if let Some(w) = vs.windows(2).find(|w| w[0].epoch_or_view == w[1].epoch_or_view && w[0].block != w[1].block) {
            out.push(Evidence { accused: voter, condition: Condition::Streamlet1, votes: [w[0], w[1]], context: None });
        }
        // Deepest vote over strictly earlier epochs, swept epoch by epoch.
        let mut deepest: Option<VoteRecord> = None;
        let mut i = 0;
        'sweep: while i < vs.len() {
            let e = vs[i].epoch_or_view;
            let j = vs[i..].iter().position(|v| v.epoch_or_view != e).map_or(vs.len(), |p| i + p);
            if let Some(d) = deepest {
                if let Some(v) = vs[i..j].iter().find(|v| v.block_depth < d.block_depth) {
                    out.push(Evidence { accused: voter, condition: Condition::Streamlet2, votes: [d, *v], context: None });
                    break 'sweep;
                }
            }
            let top = vs[i..j].iter().max_by_key(|v| v.block_depth).copied();
            if top.is_some_and(|t| deepest.is_none_or(|d| t.block_depth > d.block_depth)) {
                deepest = top;
            }
            i = j;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Suppressed {
    pub accused: NodeId,
    pub votes: [VoteRecord; 2],
    pub quorum_view: u64,
    pub quorum_block: Hash,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HotstuffReport {
    pub evidence: Vec<Evidence>,
    /// Commit/prepare pairs excused by an intervening prepare quorum.
    pub suppressed: Vec<Suppressed>,
}

pub fn hotstuff_scan<L: BftLookup>(votes: &[VoteRecord], lookup: &L, n: usize) -> Result<HotstuffReport, ForensicsError> {
    let hs: Vec<VoteRecord> = votes.iter().filter(|v| is_hotstuff(v)).copied().collect();
    if let Some(v) = hs.iter().find(|v| lookup.get_bft(&v.block).is_none()) {
        return Err(ForensicsError::UnknownBlock(v.block));
    }
    let prepares: Vec<VoteRecord> = hs.iter().filter(|v| v.vote_type == VoteType::Prepare).copied().collect();
    let mut report = HotstuffReport::default();
    for (voter, vs) in by_voter(hs.iter()) {
        let mut groups: BTreeMap<(u8, u64), Vec<&VoteRecord>> = BTreeMap::new();
        for v in &vs {
            groups.entry((v.vote_type as u8, v.epoch_or_view)).or_default().push(v);
        }
        if let Some(g) = groups.values().find(|g| g.iter().any(|v| v.block != g[0].block)) {
            let other = g.iter().find(|v| v.block != g[0].block).expect("distinct block");
            report.evidence.push(Evidence { accused: voter, condition: Condition::Hotstuff1, votes: [*g[0], **other], context: None });
        }

        let mut flagged = false;
        for c in vs.iter().filter(|v| v.vote_type == VoteType::Commit) {
            for p in vs.iter().filter(|v| v.vote_type == VoteType::Prepare && v.epoch_or_view > c.epoch_or_view) {
                if conflicting(lookup, &c.block, &p.block) != Some(true) {
                    continue;
                }
                let ctx: Vec<VoteRecord> = prepares
                    .iter()
                    .filter(|v| v.epoch_or_view > c.epoch_or_view && v.epoch_or_view < p.epoch_or_view)
                    .copied()
                    .collect();
                match exception(c, p, lookup, &ctx, n) {
                    Some((quorum_view, quorum_block)) => {
                        report.suppressed.push(Suppressed { accused: voter, votes: [*c, *p], quorum_view, quorum_block })
                    }
                    None if !flagged => {
                        flagged = true;
                        report.evidence.push(Evidence {
                            accused: voter,
                            condition: Condition::Hotstuff2,
                            votes: [*c, *p],
                            context: Some(ctx),
                        });
                    }
                    None => {}
                }
            }
        }
    }
    report.evidence.sort_by_key(|e| (e.accused, e.condition));
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalizedTriple {
    pub blocks: [Hash; 3],
    pub epochs: [u64; 3],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notarization {
    pub epoch: u64,
    pub depth: u64,
    pub voters: BTreeSet<NodeId>,
}

/// Two conflicting finalized blocks together with the notarizations of
/// both chains from their fork point upward.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SafetyViolationWitness {
    pub finalized_a: FinalizedTriple,
    pub finalized_b: FinalizedTriple,
    pub notarizations: BTreeMap<Hash, Notarization>,
}

/// Which epoch case of the attribution argument applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionCase {
    SameWindow,
    Earlier,
    Later,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub accused: BTreeSet<NodeId>,
    pub case: AttributionCase,
    pub evidence: Vec<Evidence>,
}

fn valid_votes<'a>(t: &'a Transcript, lookup: &'a impl BftLookup) -> impl Iterator<Item = &'a VoteRecord> + 'a {
    t.votes.iter().filter(move |v| is_streamlet(v) && anchored(v, lookup))
}

/// Global notarizations: every block whose matching votes reach quorum.
fn tally(t: &Transcript, lookup: &impl BftLookup) -> HashMap<Hash, BTreeSet<NodeId>> {
    let mut m: HashMap<Hash, BTreeSet<NodeId>> = HashMap::new();
    for v in valid_votes(t, lookup) {
        m.entry(v.block).or_default().insert(v.voter);
    }
    m
}

/// Looks for two conflicting finalized blocks anywhere in the transcript.
pub fn find_witness(t: &Transcript) -> Option<SafetyViolationWitness> {
    let lookup = t.bft_index();
    let genesis = crate::types::BftBlock::genesis(crate::types::LcBlock::genesis().hash).hash;
    let mut st = BftState::new(t.n, genesis);
    for b in &t.bft_blocks {
        st.on_block(&b.hash, &lookup);
    }
    for v in &t.votes {
        st.on_vote(v, &lookup);
    }
    let fin = &st.finalized;
    let (a, b) = fin
        .iter()
        .enumerate()
        .flat_map(|(i, a)| fin[i + 1..].iter().map(move |b| (*a, *b)))
        .find(|(a, b)| conflicting(&lookup, a, b) == Some(true))?;
    let triple = |b2: Hash| -> Option<FinalizedTriple> {
        let m = lookup.get_bft(&b2)?;
        let b1 = lookup.get_bft(&m.prev)?;
        let b3 = t
            .bft_blocks
            .iter()
            .filter(|c| c.prev == b2 && c.epoch == m.epoch + 1 && st.is_chain_notarized(&c.hash))
            .map(|c| c.hash)
            .min()?;
        Some(FinalizedTriple { blocks: [b1.hash, b2, b3], epochs: [b1.epoch, m.epoch, m.epoch + 1] })
    };
    let (ta, tb) = (triple(a)?, triple(b)?);
    let voters = tally(t, &lookup);
    let mut notarizations = BTreeMap::new();
    for top in [ta.blocks[2], tb.blocks[2]] {
        let other = if top == ta.blocks[2] { tb.blocks[2] } else { ta.blocks[2] };
        let mut h = top;
        while h != genesis && extends_opt(&lookup, &other, &h) != Some(true) {
            let blk = lookup.get_bft(&h)?;
            let vs = voters.get(&h).cloned().unwrap_or_default();
            notarizations.insert(h, Notarization { epoch: blk.epoch, depth: blk.depth, voters: vs });
            h = blk.prev;
        }
    }
    Some(SafetyViolationWitness { finalized_a: ta, finalized_b: tb, notarizations })
}

fn extends_opt<L: BftLookup>(lookup: &L, b: &Hash, a: &Hash) -> Option<bool> {
    crate::bft::extends(lookup, b, a)
}

/// Turns a safety violation into a set of validators that provably broke a
/// slashing condition, each with evidence drawn from the transcript.
pub fn streamlet_attribute(w: &SafetyViolationWitness, t: &Transcript) -> Result<Attribution, ForensicsError> {
    let lookup = t.bft_index();
    let need = quorum(t.n);
    for tr in [&w.finalized_a, &w.finalized_b] {
        for (h, e) in tr.blocks.iter().zip(tr.epochs) {
            let b = lookup.get_bft(h).ok_or(ForensicsError::UnknownBlock(*h))?;
            if b.epoch != e {
                return Err(ForensicsError::BadWitness("epoch mismatch"));
            }
        }
        if tr.epochs[0] + 1 != tr.epochs[1] || tr.epochs[1] + 1 != tr.epochs[2] {
            return Err(ForensicsError::BadWitness("epochs not consecutive"));
        }
        let [b1, b2, b3] = tr.blocks;
        let prev = |h: &Hash| lookup.get_bft(h).map(|b| b.prev);
        if prev(&b3) != Some(b2) || prev(&b2) != Some(b1) {
            return Err(ForensicsError::BadWitness("triple is not a chain"));
        }
    }
    if conflicting(&lookup, &w.finalized_a.blocks[1], &w.finalized_b.blocks[1]) != Some(true) {
        return Err(ForensicsError::BadWitness("finalized blocks do not conflict"));
    }
    let quorum_of = |h: &Hash| -> Result<&BTreeSet<NodeId>, ForensicsError> {
        let q = w.notarizations.get(h).ok_or(ForensicsError::MissingNotarization(*h))?;
        if q.voters.len() < need {
            return Err(ForensicsError::ThinNotarization { block: *h, got: q.voters.len(), need });
        }
        Ok(&q.voters)
    };
    let depth = |h: &Hash| lookup.get_bft(h).map(|b| b.depth).ok_or(ForensicsError::UnknownBlock(*h));

    // Shorter finalized block first.
    let (short, long) = if depth(&w.finalized_a.blocks[1])? <= depth(&w.finalized_b.blocks[1])? {
        (&w.finalized_a, &w.finalized_b)
    } else {
        (&w.finalized_b, &w.finalized_a)
    };
    let d = depth(&short.blocks[1])?;
    let e = short.epochs[1];
    let b = ancestor_at(&lookup, &long.blocks[1], d).ok_or(ForensicsError::BadWitness("other chain too short"))?;
    let e_b = lookup.get_bft(&b).ok_or(ForensicsError::UnknownBlock(b))?.epoch;

    // (first vote, second vote) blocks per case, ordered as the condition
    // predicate expects.
    let (case, first, second, cond) = if e_b + 1 >= e && e_b <= e + 1 {
        let i = (e_b + 1 - e) as usize;
        (AttributionCase::SameWindow, short.blocks[i], b, Condition::Streamlet1)
    } else if e_b + 1 < e {
        (AttributionCase::Earlier, b, short.blocks[0], Condition::Streamlet2)
    } else {
        (AttributionCase::Later, short.blocks[2], b, Condition::Streamlet2)
    };
    let accused: BTreeSet<NodeId> = quorum_of(&first)?.intersection(quorum_of(&second)?).copied().collect();

    let vote_of = |voter: NodeId, block: Hash| -> Result<VoteRecord, ForensicsError> {
        valid_votes(t, &lookup)
            .find(|v| v.voter == voter && v.block == block)
            .copied()
            .ok_or(ForensicsError::MissingVote { voter, block })
    };
    for (h, q) in &w.notarizations {
        for voter in &q.voters {
            vote_of(*voter, *h)?;
        }
    }
    let evidence = accused
        .iter()
        .map(|v| {
            Ok(Evidence { accused: *v, condition: cond, votes: [vote_of(*v, first)?, vote_of(*v, second)?], context: None })
        })
        .collect::<Result<Vec<_>, ForensicsError>>()?;
    Ok(Attribution { accused, case, evidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BftBlock, LcBlock};
    use std::sync::Arc;

    fn chain(epochs: &[u64], fork_from: Option<&BftBlock>) -> Vec<Arc<BftBlock>> {
        let lc = LcBlock::genesis().hash;
        let mut prev = fork_from.cloned().unwrap_or_else(|| BftBlock::genesis(lc));
        epochs
            .iter()
            .map(|&e| {
                let b = Arc::new(BftBlock::new(prev.hash, e, NodeId(0), lc, Hash::ZERO, prev.depth + 1));
                prev = (*b).clone();
                b
            })
            .collect()
    }

    #[test]
    fn scan_flags_double_vote() {
        let bs = chain(&[5], None);
        let alt = chain(&[5], Some(&BftBlock::genesis(LcBlock::genesis().hash)));
        let alt = Arc::new(BftBlock::new(alt[0].prev, 5, NodeId(1), LcBlock::genesis().hash, Hash::ZERO, 1));
        let votes = [VoteRecord::streamlet(NodeId(2), &bs[0]), VoteRecord::streamlet(NodeId(2), &alt)];
        let ev = streamlet_scan(&votes);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].condition, Condition::Streamlet1);
        let mut lookup: HashMap<Hash, Arc<BftBlock>> = HashMap::new();
        lookup.insert(bs[0].hash, bs[0].clone());
        lookup.insert(alt.hash, alt.clone());
        assert!(verify_evidence(&ev[0], &lookup, 4));
    }

    #[test]
    fn scan_flags_depth_regression() {
        let bs = chain(&[1, 2, 3], None);
        let votes = [VoteRecord::streamlet(NodeId(1), &bs[2]), {
            let mut v = VoteRecord::streamlet(NodeId(1), &bs[0]);
            v.epoch_or_view = 9;
            v
        }];
        let ev = streamlet_scan(&votes);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].condition, Condition::Streamlet2);
        assert_eq!(ev[0].votes[0].block, bs[2].hash);
    }

    #[test]
    fn honest_votes_are_clean() {
        let bs = chain(&[1, 2, 4, 5, 6], None);
        let votes: Vec<_> = bs.iter().map(|b| VoteRecord::streamlet(NodeId(0), b)).collect();
        assert!(streamlet_scan(&votes).is_empty());
    }
}
