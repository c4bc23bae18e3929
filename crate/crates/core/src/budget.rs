use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Counts true utility evaluations against a fixed allowance.
///
/// Shareable across threads; consumption is all-or-nothing per request.
#[derive(Debug)]
pub struct BudgetAccountant {
    total: u64,
    consumed: AtomicU64,
}

impl BudgetAccountant {
    pub fn new(total: u64) -> Self {
        Self {
            total,
            consumed: AtomicU64::new(0),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(u64::MAX)
    }

    /// Reserves `units` if they fit in what is left.
    pub fn try_consume(&self, units: u64) -> bool {
        self.consumed
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |used| {
                used.checked_add(units).filter(|&next| next <= self.total)
            })
            .is_ok()
    }

    pub fn consumed(&self) -> u64 {
        self.consumed.load(Ordering::Acquire)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn remaining(&self) -> u64 {
        self.total - self.consumed()
    }

    pub fn snapshot(&self) -> BudgetSnapshot {
        BudgetSnapshot {
            consumed: self.consumed(),
            total: self.total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSnapshot {
    pub consumed: u64,
    pub total: u64,
}
