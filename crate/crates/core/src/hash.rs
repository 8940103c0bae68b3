//! 256-bit digests with one-byte domain separation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Domain tags. Merkle leaves and internal nodes use `0x00` / `0x01`, so
/// type tags start at `0x10` to keep the two namespaces disjoint.
pub mod tag {
    pub const MERKLE_LEAF: u8 = 0x00;
    pub const MERKLE_NODE: u8 = 0x01;
    pub const TRANSACTION: u8 = 0x10;
    pub const LC_BLOCK: u8 = 0x11;
    pub const BFT_BLOCK: u8 = 0x12;
    pub const VOTE: u8 = 0x13;
    pub const LEDGER: u8 = 0x14;
    pub const LC_BODY: u8 = 0x15;
    pub const SCENARIO: u8 = 0x16;
    pub const DRAW: u8 = 0x17;
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Hash(pub [u8; 32]);

impl Hash {
    pub const ZERO: Hash = Hash([0u8; 32]);

    /// SHA-256 over `tag || bytes`.
    pub fn tagged(tag: u8, bytes: &[u8]) -> Hash {
        let mut h = Sha256::new();
        h.update([tag]);
        h.update(bytes);
        Hash(h.finalize().into())
    }

    /// SHA-256 over `tag || a || b`, used for Merkle internal nodes.
    pub fn tagged_pair(tag: u8, a: &Hash, b: &Hash) -> Hash {
        let mut h = Sha256::new();
        h.update([tag]);
        h.update(a.0);
        h.update(b.0);
        Hash(h.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; 32]
    }

    /// First eight bytes as a big-endian integer; handy for keyed draws.
    pub fn prefix_u64(&self) -> u64 {
        let mut b = [0u8; 8];
        b.copy_from_slice(&self.0[..8]);
        u64::from_be_bytes(b)
    }

    /// Copy with bit `i` (0..256) inverted.
    pub fn flip_bit(mut self, i: usize) -> Hash {
        self.0[i / 8] ^= 1 << (i % 8);
        self
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for Hash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash({})", self.short())
    }
}

impl fmt::Display for Hash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for Hash {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Hash(out))
    }
}

impl Serialize for Hash {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Hash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_separate_domains() {
        assert_ne!(Hash::tagged(tag::LC_BLOCK, b"x"), Hash::tagged(tag::BFT_BLOCK, b"x"));
        assert_eq!(Hash::tagged(tag::LC_BLOCK, b"x"), Hash::tagged(tag::LC_BLOCK, b"x"));
    }

    #[test]
    fn hex_round_trip() {
        let h = Hash::tagged(tag::DRAW, b"abc");
        let s = serde_json::to_string(&h).unwrap();
        let back: Hash = serde_json::from_str(&s).unwrap();
        assert_eq!(h, back);
        assert!("zz".parse::<Hash>().is_err());
    }
}
