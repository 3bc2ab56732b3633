use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One release: its budget and the data partition it touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub epsilon: f64,
    pub partition: String,
}

/// Record of releases. Entries sharing a partition compose sequentially
/// (budgets add); distinct partitions hold disjoint data and compose in
/// parallel (the total is the largest partition sum).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<LedgerEntry>) -> Result<Self> {
        let mut ledger = Self::new();
        for e in entries {
            ledger.record(e.epsilon, e.partition)?;
        }
        Ok(ledger)
    }

    /// Appends a release; `epsilon` must be positive (infinity is accepted).
    pub fn record(&mut self, epsilon: f64, partition: impl Into<String>) -> Result<()> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid("epsilon", format!("ledger entries need epsilon > 0, got {epsilon}")));
        }
        self.entries.push(LedgerEntry { epsilon, partition: partition.into() });
        Ok(())
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of budgets per partition, keyed by partition id.
    pub fn partition_totals(&self) -> BTreeMap<&str, f64> {
        let mut totals = BTreeMap::new();
        for e in &self.entries {
            *totals.entry(e.partition.as_str()).or_insert(0.0) += e.epsilon;
        }
        totals
    }

    pub fn total(&self) -> Result<f64> {
        ledger_epsilon(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BudgetLedger = serde_json::from_str(text)?;
        Self::from_entries(raw.entries)
    }
}

/// Total budget: sum within each partition, maximum across partitions.
pub fn ledger_epsilon(ledger: &BudgetLedger) -> Result<f64> {
    ledger.partition_totals().into_values().reduce(f64::max).ok_or(Error::EmptyLedger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ledger(entries: &[(f64, &str)]) -> BudgetLedger {
        let mut l = BudgetLedger::new();
        for &(e, p) in entries {
            l.record(e, p).unwrap();
        }
        l
    }

    #[test]
    fn sequential_sum() {
        assert_eq!(ledger(&[(1.0, "a"), (2.0, "a")]).total().unwrap(), 3.0);
    }

    #[test]
    fn parallel_max() {
        assert_eq!(ledger(&[(1.0, "a"), (2.0, "b")]).total().unwrap(), 2.0);
    }

    #[test]
    fn mixed_groups() {
        assert_eq!(ledger(&[(1.0, "p1"), (2.0, "p1"), (4.0, "p2")]).total().unwrap(), 4.0);
        assert_eq!(ledger(&[(5.0, "x")]).total().unwrap(), 5.0);
    }

    #[test]
    fn empty_and_invalid() {
        assert!(matches!(BudgetLedger::new().total(), Err(Error::EmptyLedger)));
        let mut l = BudgetLedger::new();
        assert!(l.record(0.0, "a").is_err());
        assert!(l.record(-1.0, "a").is_err());
        assert!(l.record(f64::NAN, "a").is_err());
        assert!(l.record(f64::INFINITY, "a").is_ok());
    }

    #[test]
    fn json_validates_entries() {
        let ok = r#"{"entries":[{"epsilon":1.5,"partition":"a"}]}"#;
        assert_eq!(BudgetLedger::from_json(ok).unwrap().total().unwrap(), 1.5);
        let bad = r#"{"entries":[{"epsilon":-1,"partition":"a"}]}"#;
        assert!(BudgetLedger::from_json(bad).is_err());
    }

    proptest! {
        #[test]
        fn total_bounded_by_sum_and_max(entries in proptest::collection::vec((0.01f64..10.0, 0u8..4), 1..30)) {
            let mut l = BudgetLedger::new();
            for (e, p) in &entries {
                l.record(*e, p.to_string()).unwrap();
            }
            let total = l.total().unwrap();
            let sum: f64 = entries.iter().map(|(e, _)| e).sum();
            let max = entries.iter().map(|(e, _)| *e).fold(0.0, f64::max);
            prop_assert!(total <= sum + 1e-9);
            prop_assert!(total >= max - 1e-12);
        }
    }
}
