//! Snap-and-chat consensus: a longest-chain protocol and a Streamlet-style
//! finality layer composed into an ebb-and-flow pair of ledgers, with
//! forensics, light clients and a deterministic network simulator.

pub mod adversary;
pub mod bft;
pub mod checks;
pub mod codec;
pub mod forensics;
pub mod hash;
pub mod lc;
pub mod ledger;
pub mod light_client;
pub mod merkle;
pub mod netsim;
pub mod node;
pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod spv;
pub mod store;
pub mod types;
pub mod utxo;

pub use hash::Hash;
pub use types::{BftBlock, CoinId, LcBlock, Ledger, NodeId, Transaction, TxId, TxRef, VoteRecord};
