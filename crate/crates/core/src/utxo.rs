//! Coin-transfer validity.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::types::{CoinId, Transaction};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("transaction {0} is not valid against the current state")]
pub struct InvalidTx(pub u64);

/// Unspent coins and their amounts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UtxoState {
    unspent: BTreeMap<CoinId, u64>,
}

impl UtxoState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, coin: &CoinId) -> Option<u64> {
        self.unspent.get(coin).copied()
    }

    pub fn len(&self) -> usize {
        self.unspent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unspent.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CoinId, &u64)> {
        self.unspent.iter()
    }

    pub fn apply_mut(&mut self, tx: &Transaction) -> Result<(), InvalidTx> {
        if !tx_valid(tx, self) {
            return Err(InvalidTx(tx.id.0));
        }
        for c in &tx.inputs {
            self.unspent.remove(c);
        }
        for (c, a) in &tx.outputs {
            self.unspent.insert(*c, *a);
        }
        Ok(())
    }
}

/// Structural checks that do not depend on state: output ids derive from
/// the tx id, inputs are distinct.
fn well_formed(tx: &Transaction) -> bool {
    let outputs_ok = tx
        .outputs
        .iter()
        .enumerate()
        .all(|(i, (c, _))| c.tx == tx.id && c.index as usize == i);
    if !outputs_ok {
        return false;
    }
    let mut seen = HashSet::with_capacity(tx.inputs.len());
    tx.inputs.iter().all(|c| seen.insert(*c))
}

/// Mints are authorized when well-formed and non-empty; spends need every
/// input unspent and must not create value.
pub fn tx_valid(tx: &Transaction, state: &UtxoState) -> bool {
    if !well_formed(tx) || tx.outputs.iter().any(|(c, _)| state.unspent.contains_key(c)) {
        return false;
    }
    if tx.is_mint() {
        return !tx.outputs.is_empty();
    }
    let mut total: u128 = 0;
    for c in &tx.inputs {
        match state.unspent.get(c) {
            Some(a) => total += *a as u128,
            None => return false,
        }
    }
    total >= tx.output_total()
}

pub fn apply_tx(tx: &Transaction, state: &UtxoState) -> Result<UtxoState, InvalidTx> {
    let mut next = state.clone();
    next.apply_mut(tx)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TxId;

    #[test]
    fn spend_then_double_spend() {
        let mint = Transaction::mint(1, &[5]);
        let s = apply_tx(&mint, &UtxoState::new()).unwrap();
        let c = CoinId::new(TxId(1), 0);
        assert_eq!(s.get(&c), Some(5));
        let spend = Transaction::spend(2, vec![c], &[5]);
        assert!(tx_valid(&spend, &s));
        let s2 = apply_tx(&spend, &s).unwrap();
        assert_eq!(s.get(&c), Some(5), "input state untouched");
        let again = Transaction::spend(3, vec![c], &[5]);
        assert!(!tx_valid(&again, &s2));
        assert_eq!(apply_tx(&again, &s2), Err(InvalidTx(3)));
        assert_eq!(s2.get(&CoinId::new(TxId(2), 0)), Some(5));
        assert_eq!(s2.len(), 1);
    }

    #[test]
    fn rejects_inflation_and_malformed() {
        let s = apply_tx(&Transaction::mint(1, &[5]), &UtxoState::new()).unwrap();
        let c = CoinId::new(TxId(1), 0);
        assert!(!tx_valid(&Transaction::spend(2, vec![c], &[6]), &s));
        assert!(!tx_valid(&Transaction::spend(2, vec![c, c], &[1]), &s));
        let mut bad = Transaction::mint(9, &[1]);
        bad.outputs[0].0 = CoinId::new(TxId(8), 0);
        assert!(!tx_valid(&bad, &UtxoState::new()));
        assert!(!tx_valid(&Transaction::mint(9, &[]), &UtxoState::new()));
        assert!(!tx_valid(&Transaction::mint(1, &[3]), &s), "re-minting a live coin");
    }
}
