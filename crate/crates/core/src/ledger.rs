//! Ledger sanitization and the prefix-difference operator.

use std::collections::HashSet;

use thiserror::Error;

use crate::hash::Hash;
use crate::types::{Ledger, TxId, TxRef};
use crate::utxo::{tx_valid, UtxoState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("ledger of length {prefix} is not a prefix of ledger of length {full}")]
    NotPrefix { prefix: usize, full: usize },
    #[error("unknown block {0}")]
    Unresolved(Hash),
}

/// Keep the first occurrence of each transaction id.
pub fn sanitize(txs: &[TxRef]) -> Ledger {
    let mut seen = HashSet::with_capacity(txs.len());
    Ledger::new(txs.iter().filter(|t| seen.insert(t.id)).cloned().collect())
}

pub fn supersanitize(txs: &[TxRef]) -> Ledger {
    let mut s = Sanitizer::new();
    s.extend(txs);
    s.finish()
}

/// `full = prefix ∥ suffix`; returns the suffix.
pub fn strip_prefix(full: &Ledger, prefix: &Ledger) -> Result<Vec<TxRef>, LedgerError> {
    if !prefix.is_prefix_of(full) {
        return Err(LedgerError::NotPrefix { prefix: prefix.len(), full: full.len() });
    }
    Ok(full.txs[prefix.len()..].to_vec())
}

/// Incremental supersanitize. Feeding a sequence one transaction at a time
/// gives the same output as `supersanitize` over the whole sequence.
#[derive(Clone, Debug, Default)]
pub struct Sanitizer {
    kept: HashSet<TxId>,
    state: UtxoState,
    out: Vec<TxRef>,
}

impl Sanitizer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Continue from an already supersanitized ledger.
    pub fn resume(ledger: &Ledger) -> Self {
        let mut s = Sanitizer {
            kept: HashSet::with_capacity(ledger.len()),
            state: UtxoState::new(),
            out: Vec::with_capacity(ledger.len()),
        };
        for tx in &ledger.txs {
            let pushed = s.push(tx);
            debug_assert!(pushed, "resume() needs a supersanitized ledger");
        }
        s
    }

    /// Appends `tx` if it is new and valid; returns whether it was kept.
    pub fn push(&mut self, tx: &TxRef) -> bool {
        if self.kept.contains(&tx.id) || !tx_valid(tx, &self.state) {
            return false;
        }
        self.state.apply_mut(tx).expect("validity checked above");
        self.kept.insert(tx.id);
        self.out.push(tx.clone());
        true
    }

    pub fn extend<'a>(&mut self, txs: impl IntoIterator<Item = &'a TxRef>) {
        for tx in txs {
            self.push(tx);
        }
    }

    /// Would `tx` be kept if pushed now?
    pub fn accepts(&self, tx: &TxRef) -> bool {
        !self.kept.contains(&tx.id) && tx_valid(tx, &self.state)
    }

    pub fn contains(&self, id: TxId) -> bool {
        self.kept.contains(&id)
    }

    pub fn state(&self) -> &UtxoState {
        &self.state
    }

    pub fn txs(&self) -> &[TxRef] {
        &self.out
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn finish(self) -> Ledger {
        Ledger::new(self.out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{CoinId, Transaction};
    use std::sync::Arc;

    fn mint(id: u64) -> TxRef {
        Arc::new(Transaction::mint(id, &[10]))
    }

    #[test]
    fn sanitize_keeps_first_occurrence() {
        let (a, b, c) = (mint(1), mint(2), mint(3));
        let out = sanitize(&[a.clone(), b.clone(), a.clone(), c.clone(), b.clone()]);
        assert_eq!(out.ids(), vec![TxId(1), TxId(2), TxId(3)]);
        assert!(sanitize(&[]).is_empty());
    }

    #[test]
    fn supersanitize_drops_second_spend() {
        let m = mint(1);
        let c = CoinId::new(TxId(1), 0);
        let d = Arc::new(Transaction::spend(2, vec![c], &[10]));
        let e = Arc::new(Transaction::spend(3, vec![c], &[10]));
        let out = supersanitize(&[m.clone(), d.clone(), e]);
        assert_eq!(out.ids(), vec![TxId(1), TxId(2)]);
        assert_eq!(supersanitize(&out.txs), out);
    }

    #[test]
    fn strip_prefix_cases() {
        let (a, b, c) = (mint(1), mint(2), mint(3));
        let full = Ledger::new(vec![a.clone(), b.clone(), c.clone()]);
        let suffix = strip_prefix(&full, &Ledger::new(vec![a.clone(), b.clone()])).unwrap();
        assert_eq!(suffix, vec![c.clone()]);
        let ab = Ledger::new(vec![a.clone(), b]);
        assert!(strip_prefix(&ab, &ab).unwrap().is_empty());
        assert!(strip_prefix(&full, &Ledger::new(vec![a, c])).is_err());
    }
}
