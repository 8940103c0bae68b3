//! Binary Merkle commitments over transaction lists.
//!
//! Leaves are `H(0x00 || tx)`, internal nodes `H(0x01 || left || right)`.
//! A node without a right sibling is promoted to the next level unchanged,
//! so a path only lists the levels where a sibling actually existed. The
//! empty list commits to the all-zero hash.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Canonical;
use crate::hash::{tag, Hash};
use crate::types::Transaction;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("leaf index {index} out of range for {len} leaves")]
pub struct OutOfRange {
    pub index: usize,
    pub len: usize,
}

/// Which side the sibling sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MerkleProof {
    pub leaf_index: u64,
    pub leaf: Hash,
    pub path: Vec<(Hash, Side)>,
}

#[derive(Clone, Debug)]
pub struct MerkleTree {
    levels: Vec<Vec<Hash>>,
}

pub const EMPTY_ROOT: Hash = Hash::ZERO;

pub fn leaf_hash(tx: &Transaction) -> Hash {
    Hash::tagged(tag::MERKLE_LEAF, &tx.to_bytes())
}

fn node_hash(l: &Hash, r: &Hash) -> Hash {
    Hash::tagged_pair(tag::MERKLE_NODE, l, r)
}

impl MerkleTree {
    pub fn from_leaves(leaves: Vec<Hash>) -> Self {
        let mut levels = vec![leaves];
        while levels.last().unwrap().len() > 1 {
            let next = levels
                .last()
                .unwrap()
                .chunks(2)
                .map(|c| if c.len() == 2 { node_hash(&c[0], &c[1]) } else { c[0] })
                .collect();
            levels.push(next);
        }
        MerkleTree { levels }
    }

    pub fn leaves(&self) -> &[Hash] {
        &self.levels[0]
    }

    pub fn root(&self) -> Hash {
        match self.levels.last().unwrap().as_slice() {
            [] => EMPTY_ROOT,
            [r] => *r,
            _ => unreachable!("tree construction stops at one node"),
        }
    }

    pub fn prove(&self, index: usize) -> Result<MerkleProof, OutOfRange> {
        let len = self.levels[0].len();
        if index >= len {
            return Err(OutOfRange { index, len });
        }
        let mut path = Vec::new();
        let mut pos = index;
        for level in &self.levels[..self.levels.len() - 1] {
            if pos % 2 == 1 {
                path.push((level[pos - 1], Side::Left));
            } else if pos + 1 < level.len() {
                path.push((level[pos + 1], Side::Right));
            }
            pos /= 2;
        }
        Ok(MerkleProof { leaf_index: index as u64, leaf: self.levels[0][index], path })
    }
}

pub fn merkleize<'a>(txs: impl IntoIterator<Item = &'a std::sync::Arc<Transaction>>) -> MerkleTree {
    MerkleTree::from_leaves(txs.into_iter().map(|t| leaf_hash(t)).collect())
}

pub fn merkle_root<'a>(txs: impl IntoIterator<Item = &'a std::sync::Arc<Transaction>>) -> Hash {
    merkleize(txs).root()
}

/// Checks the proof against `root`. The sides must also agree with
/// `leaf_index`: an odd position always has a left sibling, an even one
/// either a right sibling or none (promotion), and once the path is used
/// up the remaining index bits must be zero.
pub fn verify_inclusion(root: &Hash, proof: &MerkleProof) -> bool {
    let mut acc = proof.leaf;
    let mut pos = proof.leaf_index;
    let mut rest = proof.path.iter().peekable();
    while rest.peek().is_some() {
        if pos == 0 && rest.peek().map(|e| e.1) == Some(Side::Left) {
            return false;
        }
        if pos % 2 == 1 {
            match rest.next() {
                Some((s, Side::Left)) => acc = node_hash(s, &acc),
                _ => return false,
            }
        } else if let Some((s, Side::Right)) = rest.peek() {
            acc = node_hash(&acc, s);
            rest.next();
        }
        pos /= 2;
    }
    pos == 0 && acc == *root
}
