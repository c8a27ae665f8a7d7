//! Outcome vectors and the hidden-defective oracle.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::bits::BitVec;
use crate::design::TestMatrix;
use crate::error::{Error, Result};

/// Results of the `N` first-stage pools: bit `i` is positive iff pool `i`
/// contains a defective.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeVector {
    bits: BitVec,
}

impl OutcomeVector {
    pub fn new(bits: BitVec) -> Self {
        OutcomeVector { bits }
    }

    pub fn parse(s: &str) -> Option<Self> {
        BitVec::parse(s).map(OutcomeVector::new)
    }

    pub fn bits(&self) -> &BitVec {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of positive pools.
    pub fn weight(&self) -> usize {
        self.bits.count_ones()
    }
}

impl fmt::Display for OutcomeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.bits.fmt(f)
    }
}

impl fmt::Debug for OutcomeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OutcomeVector({})", self.bits)
    }
}

fn check_items(t: usize, items: &[usize]) -> Result<()> {
    match items.iter().find(|&&j| j >= t) {
        Some(j) => Err(Error::param(format!("item {j} outside universe of {t} items"))),
        None => Ok(()),
    }
}

/// Disjunctive sum of the columns of `x` indexed by `items`.
pub fn outcome_vector(x: &TestMatrix, items: &[usize]) -> Result<OutcomeVector> {
    check_items(x.cols(), items)?;
    let mut bits = BitVec::zeros(x.rows());
    for i in 0..x.rows() {
        let row = x.row(i);
        if items.iter().any(|&j| row.get(j)) {
            bits.set(i, true);
        }
    }
    Ok(OutcomeVector::new(bits))
}

/// Hides a defective set behind a pool-test interface and counts every query.
///
/// Individual tests are pool tests of a singleton but are tallied separately.
#[derive(Debug)]
pub struct DefectiveOracle {
    universe: usize,
    defective: BTreeSet<usize>,
    pool_tests: AtomicU64,
    individual_tests: AtomicU64,
}

impl DefectiveOracle {
    pub fn new(universe: usize, defective: impl IntoIterator<Item = usize>) -> Result<Self> {
        let defective: BTreeSet<usize> = defective.into_iter().collect();
        if let Some(&j) = defective.iter().find(|&&j| j >= universe) {
            return Err(Error::param(format!(
                "defective {j} outside universe of {universe} items"
            )));
        }
        Ok(DefectiveOracle {
            universe,
            defective,
            pool_tests: AtomicU64::new(0),
            individual_tests: AtomicU64::new(0),
        })
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    /// Size of the hidden set. The algorithm is assumed to know `s`.
    pub fn defective_count(&self) -> usize {
        self.defective.len()
    }

    pub fn pool_tests(&self) -> u64 {
        self.pool_tests.load(Ordering::Relaxed)
    }

    pub fn individual_tests(&self) -> u64 {
        self.individual_tests.load(Ordering::Relaxed)
    }

    pub fn total_tests(&self) -> u64 {
        self.pool_tests() + self.individual_tests()
    }

    fn answer(&self, pool: &[usize]) -> bool {
        pool.iter().any(|j| self.defective.contains(j))
    }

    /// Tests one pool: positive iff it contains a defective.
    pub fn pool_test(&self, pool: &[usize]) -> Result<bool> {
        check_items(self.universe, pool)?;
        self.pool_tests.fetch_add(1, Ordering::Relaxed);
        Ok(self.answer(pool))
    }

    /// Tests a single item.
    pub fn individual_test(&self, item: usize) -> Result<bool> {
        check_items(self.universe, &[item])?;
        self.individual_tests.fetch_add(1, Ordering::Relaxed);
        Ok(self.answer(&[item]))
    }

    /// Runs every row of `x` as a pool, counting `N` tests.
    pub fn stage1(&self, x: &TestMatrix) -> Result<OutcomeVector> {
        if x.cols() != self.universe {
            return Err(Error::param(format!(
                "matrix has {} columns but the oracle holds {} items",
                x.cols(),
                self.universe
            )));
        }
        let mut bits = BitVec::zeros(x.rows());
        for i in 0..x.rows() {
            if x.row(i).ones_iter().any(|j| self.defective.contains(&j)) {
                bits.set(i, true);
            }
        }
        self.pool_tests.fetch_add(x.rows() as u64, Ordering::Relaxed);
        Ok(OutcomeVector::new(bits))
    }

    /// Test-only access to the hidden set.
    #[cfg(test)]
    pub(crate) fn hidden(&self) -> Vec<usize> {
        self.defective.iter().copied().collect()
    }
}
