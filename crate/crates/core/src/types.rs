//! Core data model: validators, transactions, blocks of both chains, votes and ledgers.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::{Canonical, CodecError, Reader, Writer};
use crate::hash::{tag, Hash};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Output `index` of transaction `tx`. Globally unique because tx ids are.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoinId {
    pub tx: TxId,
    pub index: u32,
}

impl CoinId {
    pub fn new(tx: TxId, index: u32) -> Self {
        CoinId { tx, index }
    }
}

impl fmt::Display for CoinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.tx.0, self.index)
    }
}

impl FromStr for CoinId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("bad coin id {s:?}"))?;
        let tx = a.parse().map_err(|e| format!("bad coin id {s:?}: {e}"))?;
        let index = b.parse().map_err(|e| format!("bad coin id {s:?}: {e}"))?;
        Ok(CoinId { tx: TxId(tx), index })
    }
}

impl Serialize for CoinId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CoinId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl Canonical for CoinId {
    const TAG: u8 = tag::TRANSACTION;

    fn encode(&self, w: &mut Writer) {
        w.u64(self.tx.0).u32(self.index);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(CoinId { tx: TxId(r.u64()?), index: r.u32()? })
    }
}

/// A coin transfer. A transaction without inputs is a mint issued by the
/// scenario's faucet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub inputs: Vec<CoinId>,
    pub outputs: Vec<(CoinId, u64)>,
}

pub type TxRef = Arc<Transaction>;

impl Transaction {
    pub fn mint(id: u64, amounts: &[u64]) -> Transaction {
        let id = TxId(id);
        Transaction {
            id,
            inputs: Vec::new(),
            outputs: amounts.iter().enumerate().map(|(i, &a)| (CoinId::new(id, i as u32), a)).collect(),
        }
    }

    pub fn spend(id: u64, inputs: Vec<CoinId>, amounts: &[u64]) -> Transaction {
        let id = TxId(id);
        Transaction {
            id,
            inputs,
            outputs: amounts.iter().enumerate().map(|(i, &a)| (CoinId::new(id, i as u32), a)).collect(),
        }
    }

    pub fn is_mint(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn output_total(&self) -> u128 {
        self.outputs.iter().map(|(_, a)| *a as u128).sum()
    }
}

impl Canonical for (CoinId, u64) {
    const TAG: u8 = tag::TRANSACTION;

    fn encode(&self, w: &mut Writer) {
        self.0.encode(w);
        w.u64(self.1);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok((CoinId::decode(r)?, r.u64()?))
    }
}

impl Canonical for Transaction {
    const TAG: u8 = tag::TRANSACTION;

    fn encode(&self, w: &mut Writer) {
        w.u64(self.id.0).list(&self.inputs).list(&self.outputs);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Transaction { id: TxId(r.u64()?), inputs: r.list()?, outputs: r.list()? })
    }
}

/// Longest-chain block. `hash` commits to the header, and the header commits
/// to the body through a digest of the transaction list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LcBlock {
    pub hash: Hash,
    pub prev: Hash,
    pub slot: u64,
    pub producer: NodeId,
    pub txs: Vec<TxRef>,
    /// The BFT block whose finalized ledger the producer assumed.
    pub auxref: Hash,
    /// Merkle root of the block's innovation relative to `auxref`.
    pub auxinnov: Hash,
}

impl LcBlock {
    pub fn new(prev: Hash, slot: u64, producer: NodeId, txs: Vec<TxRef>, auxref: Hash, auxinnov: Hash) -> Self {
        let mut b = LcBlock { hash: Hash::ZERO, prev, slot, producer, txs, auxref, auxinnov };
        b.hash = b.compute_hash();
        b
    }

    /// LC genesis: slot 0, no parent, references no BFT block (`auxref` is
    /// zero and resolves to BFT genesis).
    pub fn genesis() -> Self {
        LcBlock::new(Hash::ZERO, 0, NodeId(0), Vec::new(), Hash::ZERO, Hash::ZERO)
    }

    pub fn body_root(&self) -> Hash {
        let mut w = Writer::new();
        w.list(&self.txs);
        Hash::tagged(tag::LC_BODY, &w.finish())
    }

    pub fn compute_hash(&self) -> Hash {
        self.header().compute_hash()
    }

    pub fn header(&self) -> LcHeader {
        LcHeader {
            hash: self.hash,
            prev: self.prev,
            slot: self.slot,
            producer: self.producer,
            body_root: self.body_root(),
            auxref: self.auxref,
            auxinnov: self.auxinnov,
        }
    }
}

impl Canonical for LcBlock {
    const TAG: u8 = tag::LC_BLOCK;

    fn encode(&self, w: &mut Writer) {
        w.hash(&self.hash).hash(&self.prev).u64(self.slot).u32(self.producer.0);
        w.list(&self.txs).hash(&self.auxref).hash(&self.auxinnov);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(LcBlock {
            hash: r.hash()?,
            prev: r.hash()?,
            slot: r.u64()?,
            producer: NodeId(r.u32()?),
            txs: r.list()?,
            auxref: r.hash()?,
            auxinnov: r.hash()?,
        })
    }

    fn digest(&self) -> Hash {
        self.compute_hash()
    }
}

/// What a light client stores of an LC block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LcHeader {
    pub hash: Hash,
    pub prev: Hash,
    pub slot: u64,
    pub producer: NodeId,
    pub body_root: Hash,
    pub auxref: Hash,
    pub auxinnov: Hash,
}

impl LcHeader {
    pub fn compute_hash(&self) -> Hash {
        let mut w = Writer::new();
        w.hash(&self.prev).u64(self.slot).u32(self.producer.0);
        w.hash(&self.body_root).hash(&self.auxref).hash(&self.auxinnov);
        Hash::tagged(tag::LC_BLOCK, &w.finish())
    }
}

/// Streamlet block carrying a snapshot (`b`) of the LC chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BftBlock {
    pub hash: Hash,
    pub prev: Hash,
    pub epoch: u64,
    pub proposer: NodeId,
    pub b: Hash,
    pub auxinnov: Hash,
    pub depth: u64,
}

/// BFT blocks carry no body, so the header is the block.
pub type BftHeader = BftBlock;

impl BftBlock {
    pub fn new(prev: Hash, epoch: u64, proposer: NodeId, b: Hash, auxinnov: Hash, depth: u64) -> Self {
        let mut blk = BftBlock { hash: Hash::ZERO, prev, epoch, proposer, b, auxinnov, depth };
        blk.hash = blk.compute_hash();
        blk
    }

    /// BFT genesis snapshots LC genesis and has depth 0, epoch 0.
    pub fn genesis(lc_genesis: Hash) -> Self {
        BftBlock::new(Hash::ZERO, 0, NodeId(0), lc_genesis, Hash::ZERO, 0)
    }

    pub fn compute_hash(&self) -> Hash {
        let mut w = Writer::new();
        w.hash(&self.prev).u64(self.epoch).u32(self.proposer.0);
        w.hash(&self.b).hash(&self.auxinnov).u64(self.depth);
        Hash::tagged(tag::BFT_BLOCK, &w.finish())
    }
}

impl Canonical for BftBlock {
    const TAG: u8 = tag::BFT_BLOCK;

    fn encode(&self, w: &mut Writer) {
        w.hash(&self.hash).hash(&self.prev).u64(self.epoch).u32(self.proposer.0);
        w.hash(&self.b).hash(&self.auxinnov).u64(self.depth);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(BftBlock {
            hash: r.hash()?,
            prev: r.hash()?,
            epoch: r.u64()?,
            proposer: NodeId(r.u32()?),
            b: r.hash()?,
            auxinnov: r.hash()?,
            depth: r.u64()?,
        })
    }

    fn digest(&self) -> Hash {
        self.compute_hash()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Streamlet,
    Hotstuff,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteType {
    Generic,
    Prepare,
    Precommit,
    Commit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VoteRecord {
    pub voter: NodeId,
    pub protocol: Protocol,
    pub epoch_or_view: u64,
    pub vote_type: VoteType,
    pub block: Hash,
    pub block_depth: u64,
}

impl VoteRecord {
    pub fn streamlet(voter: NodeId, block: &BftBlock) -> Self {
        VoteRecord {
            voter,
            protocol: Protocol::Streamlet,
            epoch_or_view: block.epoch,
            vote_type: VoteType::Generic,
            block: block.hash,
            block_depth: block.depth,
        }
    }
}

impl Canonical for VoteRecord {
    const TAG: u8 = tag::VOTE;

    fn encode(&self, w: &mut Writer) {
        w.u32(self.voter.0);
        w.u8(match self.protocol {
            Protocol::Streamlet => 0,
            Protocol::Hotstuff => 1,
        });
        w.u64(self.epoch_or_view);
        w.u8(match self.vote_type {
            VoteType::Generic => 0,
            VoteType::Prepare => 1,
            VoteType::Precommit => 2,
            VoteType::Commit => 3,
        });
        w.hash(&self.block).u64(self.block_depth);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let voter = NodeId(r.u32()?);
        let protocol = match r.u8()? {
            0 => Protocol::Streamlet,
            1 => Protocol::Hotstuff,
            value => return Err(CodecError::BadTag { what: "protocol", value }),
        };
        let epoch_or_view = r.u64()?;
        let vote_type = match r.u8()? {
            0 => VoteType::Generic,
            1 => VoteType::Prepare,
            2 => VoteType::Precommit,
            3 => VoteType::Commit,
            value => return Err(CodecError::BadTag { what: "vote type", value }),
        };
        Ok(VoteRecord { voter, protocol, epoch_or_view, vote_type, block: r.hash()?, block_depth: r.u64()? })
    }
}

/// An ordered transaction sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub txs: Vec<TxRef>,
}

impl Ledger {
    pub fn new(txs: Vec<TxRef>) -> Self {
        Ledger { txs }
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn ids(&self) -> Vec<TxId> {
        self.txs.iter().map(|t| t.id).collect()
    }

    pub fn contains(&self, id: TxId) -> bool {
        self.txs.iter().any(|t| t.id == id)
    }

    /// List-prefix relation `self ⪯ other`.
    pub fn is_prefix_of(&self, other: &Ledger) -> bool {
        self.len() <= other.len() && self.txs.iter().zip(&other.txs).all(|(a, b)| Arc::ptr_eq(a, b) || a == b)
    }

    /// Neither ledger is a prefix of the other.
    pub fn conflicts_with(&self, other: &Ledger) -> bool {
        !self.is_prefix_of(other) && !other.is_prefix_of(self)
    }
}

impl Canonical for Ledger {
    const TAG: u8 = tag::LEDGER;

    fn encode(&self, w: &mut Writer) {
        w.list(&self.txs);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Ledger { txs: r.list()? })
    }
}
