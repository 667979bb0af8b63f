//! Budgeted subset enumeration.
//!
//! Exhaustive certificates walk k-subsets of a vertex pool in a fixed order:
//! increasing size, lexicographic within a size (domains are scanned in the
//! order given, which is ascending vertex id everywhere in this crate).
//! Every visited subset costs one unit of budget; hitting the cap aborts the
//! scan so callers can surface an explicit budget error instead of silently
//! sampling.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Default cap on enumerated subsets for one certificate-grade scan.
pub const DEFAULT_SUBSET_CAP: u64 = 5_000_000;

/// Consumable enumeration allowance shared across the phases of one check.
#[derive(Clone, Debug)]
pub struct Budget {
    remaining: u64,
    cap: u64,
}

impl Budget {
    pub fn new(cap: u64) -> Self {
        Budget { remaining: cap, cap }
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn used(&self) -> u64 {
        self.cap - self.remaining
    }

    /// Charges one unit of work; false once the budget is spent.
    #[inline]
    pub fn consume(&mut self) -> bool {
        self.take_one()
    }

    #[inline]
    fn take_one(&mut self) -> bool {
        if self.remaining == 0 {
            return false;
        }
        self.remaining -= 1;
        true
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(DEFAULT_SUBSET_CAP)
    }
}

/// Outcome of a budgeted scan: the first hit, exhaustion, or budget overrun.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scan<T> {
    Found(T),
    Exhausted,
    OutOfBudget,
}

impl<T> Scan<T> {
    pub fn found(self) -> Option<T> {
        match self {
            Scan::Found(t) => Some(t),
            _ => None,
        }
    }
}

/// C(n, k) saturating at `u64::MAX`, for budget pre-checks.
pub fn binomial_saturating(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Visits every k-subset of `domain` in lexicographic position order until
/// `f` returns `Some`, the space is exhausted, or the budget runs out.
pub fn scan_k_subsets<T>(
    domain: &[usize],
    k: usize,
    budget: &mut Budget,
    mut f: impl FnMut(&[usize]) -> Option<T>,
) -> Scan<T> {
    if k == 0 || k > domain.len() {
        return Scan::Exhausted;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut subset: Vec<usize> = idx.iter().map(|&i| domain[i]).collect();
    loop {
        if !budget.take_one() {
            return Scan::OutOfBudget;
        }
        if let Some(t) = f(&subset) {
            return Scan::Found(t);
        }
        // Advance to the next combination of positions.
        let mut i = k;
        loop {
            if i == 0 {
                return Scan::Exhausted;
            }
            i -= 1;
            if idx[i] != i + domain.len() - k {
                break;
            }
        }
        if idx[i] == i + domain.len() - k {
            return Scan::Exhausted;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in i..k {
            subset[j] = domain[idx[j]];
        }
    }
}

/// Scans sizes `1..=k_max` in increasing order, lexicographic within each.
pub fn scan_subsets_up_to<T>(
    domain: &[usize],
    k_max: usize,
    budget: &mut Budget,
    mut f: impl FnMut(&[usize]) -> Option<T>,
) -> Scan<T> {
    for k in 1..=k_max.min(domain.len()) {
        match scan_k_subsets(domain, k, budget, &mut f) {
            Scan::Exhausted => continue,
            other => return other,
        }
    }
    Scan::Exhausted
}

/// Uniform k-subset of `domain`, ascending order, via a seeded stream.
pub fn sample_k_subset(rng: &mut ChaCha8Rng, domain: &[usize], k: usize) -> Vec<usize> {
    assert!(k <= domain.len());
    let mut pool: Vec<usize> = domain.to_vec();
    pool.shuffle(rng);
    let mut out: Vec<usize> = pool[..k].to_vec();
    out.sort_unstable();
    out
}
