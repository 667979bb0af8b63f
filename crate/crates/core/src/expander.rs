//! Expansion certificates: small-set growth, the weak edge-between-sets
//! property, extraction of an expander from a weak expander, bipartite
//! hosts, and the three-host cleaning loop.
//!
//! All checks run on induced subgraphs expressed as vertex masks, so the
//! cleaning loops never copy graphs. Exhaustive scans visit subsets in
//! increasing size, lexicographic within a size; the first violator found
//! is therefore the canonical smallest one.

use thiserror::Error;

use crate::bitset::VertexSet;
use crate::graph::Graph;
use crate::rng;
use crate::subsets::{binomial_saturating, sample_k_subset, scan_k_subsets, scan_subsets_up_to, Budget, Scan};

#[derive(Debug, Error)]
pub enum ExpanderError {
    #[error("enumeration budget exhausted after {used} subsets (cap {cap})")]
    BudgetExceeded { used: u64, cap: u64 },
    #[error("precondition broken: {0}")]
    PreconditionBroken(String),
    #[error("cleaning removed {removed} vertices from side {side}, cap {cap}")]
    CleaningDiverged {
        side: usize,
        removed: usize,
        cap: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    Exhaustive,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VerdictKind {
    Certified,
    /// X with external neighbourhood of size `observed` ≤ D|X|.
    SmallSetViolation { x: Vec<usize>, observed: usize },
    /// Disjoint X, Y with no edge between them.
    WeakPairViolation { x: Vec<usize>, y: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionVerdict {
    pub kind: VerdictKind,
    pub mode: CheckMode,
}

impl ExpansionVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(self.kind, VerdictKind::Certified)
    }

    /// One-line record for replay files.
    pub fn to_record(&self) -> String {
        let mode = match self.mode {
            CheckMode::Exhaustive => "exhaustive",
            CheckMode::Heuristic => "heuristic",
        };
        match &self.kind {
            VerdictKind::Certified => format!("certified mode={mode}"),
            VerdictKind::SmallSetViolation { x, observed } => {
                format!("small-set mode={mode} x={} observed={observed}", join_ids(x))
            }
            VerdictKind::WeakPairViolation { x, y } => {
                format!("weak-pair mode={mode} x={} y={}", join_ids(x), join_ids(y))
            }
        }
    }
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn budget_error(budget: &Budget) -> ExpanderError {
    ExpanderError::BudgetExceeded {
        used: budget.used(),
        cap: budget.cap(),
    }
}

/// External neighbourhood of `x` inside `within`, minus `x` itself.
fn ext_in(g: &Graph, x: &[usize], within: &VertexSet) -> VertexSet {
    let mut acc = VertexSet::empty(g.vertex_count());
    for &v in x {
        acc.union_with(g.neighbours(v));
    }
    acc.intersect_with(within);
    for &v in x {
        acc.remove(v);
    }
    acc
}

/// Weak (m1, m2)-expansion on the induced subgraph `within`: certified iff
/// every m1-subset X has fewer than m2 vertices outside X and its
/// neighbourhood. A violation carries Y = the m2 smallest such vertices.
pub fn check_weak(
    g: &Graph,
    within: &VertexSet,
    m1: usize,
    m2: usize,
    budget: &mut Budget,
) -> Result<ExpansionVerdict, ExpanderError> {
    assert!(m1 >= 1 && m2 >= 1);
    let domain = within.to_vec();
    let scan = scan_k_subsets(&domain, m1, budget, |x| {
        let mut non = within.clone();
        let reach = ext_in(g, x, within);
        non.subtract(&reach);
        for &v in x {
            non.remove(v);
        }
        if non.len() >= m2 {
            let y: Vec<usize> = non.iter().take(m2).collect();
            Some(VerdictKind::WeakPairViolation { x: x.to_vec(), y })
        } else {
            None
        }
    });
    match scan {
        Scan::Found(kind) => Ok(ExpansionVerdict {
            kind,
            mode: CheckMode::Exhaustive,
        }),
        Scan::Exhausted => Ok(ExpansionVerdict {
            kind: VerdictKind::Certified,
            mode: CheckMode::Exhaustive,
        }),
        Scan::OutOfBudget => Err(budget_error(budget)),
    }
}

/// One-sided sampled variant: draws `samples` random m1-subsets and reports
/// the first weak-pair violation found, if any. Never certifies.
pub fn check_weak_sampled(
    g: &Graph,
    within: &VertexSet,
    m1: usize,
    m2: usize,
    samples: u64,
    seed: u64,
) -> Option<ExpansionVerdict> {
    let domain = within.to_vec();
    if domain.len() < m1 {
        return None;
    }
    let mut rng = rng::stream(seed);
    for _ in 0..samples {
        let x = sample_k_subset(&mut rng, &domain, m1);
        let mut non = within.clone();
        let reach = ext_in(g, &x, within);
        non.subtract(&reach);
        for &v in &x {
            non.remove(v);
        }
        if non.len() >= m2 {
            let y: Vec<usize> = non.iter().take(m2).collect();
            return Some(ExpansionVerdict {
                kind: VerdictKind::WeakPairViolation { x, y },
                mode: CheckMode::Heuristic,
            });
        }
    }
    None
}

/// Small-set growth on the induced subgraph: certified iff every X with
/// 1 ≤ |X| ≤ m1 has |N(X)| ≥ D|X| + 1. The violation returned is the
/// smallest one, lexicographically first within its size.
pub fn check_strong(
    g: &Graph,
    within: &VertexSet,
    m1: usize,
    d: usize,
    budget: &mut Budget,
) -> Result<ExpansionVerdict, ExpanderError> {
    assert!(m1 >= 1 && d >= 1);
    let domain = within.to_vec();
    let scan = scan_subsets_up_to(&domain, m1, budget, |x| {
        let observed = ext_in(g, x, within).len();
        if observed <= d * x.len() {
            Some(VerdictKind::SmallSetViolation {
                x: x.to_vec(),
                observed,
            })
        } else {
            None
        }
    });
    match scan {
        Scan::Found(kind) => Ok(ExpansionVerdict {
            kind,
            mode: CheckMode::Exhaustive,
        }),
        Scan::Exhausted => Ok(ExpansionVerdict {
            kind: VerdictKind::Certified,
            mode: CheckMode::Exhaustive,
        }),
        Scan::OutOfBudget => Err(budget_error(budget)),
    }
}

/// Result of carving an expander out of a weak expander.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub kept: VertexSet,
    pub removed: VertexSet,
}

/// Removes a maximal union Z of small violating sets (|Z| ≤ m1) so that the
/// rest satisfies both expansion properties. Requires the caller to have
/// checked (or to assert) weak (m1, m2)-expansion and
/// |within| ≥ m2 + (2D+2)·m1; if the greedy union would outgrow m1, that
/// hypothesis was broken and the call fails.
pub fn extract_expander(
    g: &Graph,
    within: &VertexSet,
    m1: usize,
    m2: usize,
    d: usize,
    budget: &mut Budget,
) -> Result<Extraction, ExpanderError> {
    let need = m2 + (2 * d + 2) * m1;
    if within.len() < need {
        return Err(ExpanderError::PreconditionBroken(format!(
            "{} vertices, need at least {need}",
            within.len()
        )));
    }
    let mut kept = within.clone();
    let mut removed = VertexSet::empty(g.vertex_count());
    loop {
        let verdict = check_strong(g, &kept, m1, d, budget)?;
        let VerdictKind::SmallSetViolation { x, .. } = verdict.kind else {
            break;
        };
        if removed.len() + x.len() > m1 {
            return Err(ExpanderError::PreconditionBroken(format!(
                "violating union would reach {} vertices, cap {m1}; \
                 the input was not a weak ({m1}, {m2})-expander of sufficient size",
                removed.len() + x.len()
            )));
        }
        for v in x {
            removed.insert(v);
            kept.remove(v);
        }
    }
    Ok(Extraction { kept, removed })
}

/// Two disjoint sides of a bipartite host; operations only look at edges
/// crossing between the sides.
#[derive(Clone, Debug)]
pub struct BipartiteHost {
    pub v1: VertexSet,
    pub v2: VertexSet,
}

impl BipartiteHost {
    pub fn new(v1: VertexSet, v2: VertexSet) -> Result<Self, ExpanderError> {
        if !v1.is_disjoint(&v2) {
            return Err(ExpanderError::PreconditionBroken(
                "bipartite sides overlap".into(),
            ));
        }
        Ok(BipartiteHost { v1, v2 })
    }
}

/// Bipartite (m, D)-expansion: every X within one side with |X| ≤ m has
/// |N(X)| ≥ D|X| on the other side, and every pair of m-subsets taken from
/// the two sides spans an edge. Violations are searched side 1 first, then
/// side 2, then cross pairs.
pub fn check_bip_expander(
    g: &Graph,
    host: &BipartiteHost,
    m: usize,
    d: usize,
    budget: &mut Budget,
) -> Result<ExpansionVerdict, ExpanderError> {
    assert!(m >= 1 && d >= 1);
    let sides = [&host.v1, &host.v2];
    for (this, other) in [(0usize, 1usize), (1, 0)] {
        let domain = sides[this].to_vec();
        let scan = scan_subsets_up_to(&domain, m, budget, |x| {
            let observed = ext_in(g, x, sides[other]).len();
            if observed < d * x.len() {
                Some(VerdictKind::SmallSetViolation {
                    x: x.to_vec(),
                    observed,
                })
            } else {
                None
            }
        });
        match scan {
            Scan::Found(kind) => {
                return Ok(ExpansionVerdict {
                    kind,
                    mode: CheckMode::Exhaustive,
                })
            }
            Scan::Exhausted => {}
            Scan::OutOfBudget => return Err(budget_error(budget)),
        }
    }
    // Cross pairs: an X, Y pair without an edge exists exactly when some
    // m-subset of side 1 has at least m non-neighbours on side 2, and the
    // lexicographically first such pair is X with its m smallest
    // non-neighbours.
    let d1 = host.v1.to_vec();
    if d1.len() < m || host.v2.len() < m {
        return Ok(ExpansionVerdict {
            kind: VerdictKind::Certified,
            mode: CheckMode::Exhaustive,
        });
    }
    let scan = scan_k_subsets(&d1, m, budget, |x| {
        let mut non = host.v2.clone();
        non.subtract(&ext_in(g, x, &host.v2));
        if non.len() >= m {
            let y: Vec<usize> = non.iter().take(m).collect();
            Some(VerdictKind::WeakPairViolation { x: x.to_vec(), y })
        } else {
            None
        }
    });
    match scan {
        Scan::Found(kind) => Ok(ExpansionVerdict {
            kind,
            mode: CheckMode::Exhaustive,
        }),
        Scan::Exhausted => Ok(ExpansionVerdict {
            kind: VerdictKind::Certified,
            mode: CheckMode::Exhaustive,
        }),
        Scan::OutOfBudget => Err(budget_error(budget)),
    }
}

#[derive(Clone, Debug)]
pub struct CleanedHosts {
    pub v1: VertexSet,
    pub v2: VertexSet,
    pub v3: VertexSet,
}

/// Iteratively removes small sets with deficient cross-expansion until
/// G[V1∪V2, V3], G[V1, V3] and G[V2, V3] are bipartite (m2, D)-expanders.
/// Each side loses at most 2·m2 vertices; more signals that the underlying
/// graph was not a weak (m2, m2)-expander and the call fails.
pub fn clean_three_hosts(
    g: &Graph,
    w1: &VertexSet,
    w2: &VertexSet,
    w3: &VertexSet,
    m2: usize,
    d: usize,
    budget: &mut Budget,
) -> Result<CleanedHosts, ExpanderError> {
    if !w1.is_disjoint(w2) || !w1.is_disjoint(w3) || !w2.is_disjoint(w3) {
        return Err(ExpanderError::PreconditionBroken(
            "host sides overlap".into(),
        ));
    }
    let mut v1 = w1.clone();
    let mut v2 = w2.clone();
    let mut v3 = w3.clone();
    let cap = 2 * m2;
    loop {
        let mut progressed = false;
        // Vertices of V3 short on neighbours in V1 or in V2 leave V3.
        for target_is_v1 in [true, false] {
            let target = if target_is_v1 { &v1 } else { &v2 };
            let domain = v3.to_vec();
            let hit = scan_subsets_up_to(&domain, m2, budget, |x| {
                if ext_in(g, x, target).len() < d * x.len() {
                    Some(x.to_vec())
                } else {
                    None
                }
            });
            match hit {
                Scan::Found(x) => {
                    for v in x {
                        v3.remove(v);
                    }
                    progressed = true;
                }
                Scan::Exhausted => {}
                Scan::OutOfBudget => return Err(budget_error(budget)),
            }
            if w3.len() - v3.len() > cap {
                return Err(ExpanderError::CleaningDiverged {
                    side: 3,
                    removed: w3.len() - v3.len(),
                    cap,
                });
            }
        }
        // Vertices of V1∪V2 short on neighbours in V3 leave their side.
        let union12 = v1.union(&v2);
        let domain = union12.to_vec();
        let hit = scan_subsets_up_to(&domain, m2, budget, |x| {
            if ext_in(g, x, &v3).len() < d * x.len() {
                Some(x.to_vec())
            } else {
                None
            }
        });
        match hit {
            Scan::Found(x) => {
                for v in x {
                    v1.remove(v);
                    v2.remove(v);
                }
                progressed = true;
            }
            Scan::Exhausted => {}
            Scan::OutOfBudget => return Err(budget_error(budget)),
        }
        for (side, w, v) in [(1usize, w1, &v1), (2, w2, &v2)] {
            if w.len() - v.len() > cap {
                return Err(ExpanderError::CleaningDiverged {
                    side,
                    removed: w.len() - v.len(),
                    cap,
                });
            }
        }
        if !progressed {
            break;
        }
    }
    Ok(CleanedHosts { v1, v2, v3 })
}

/// Per-size outcome of the codegree-based neighbourhood bound.
#[derive(Clone, Debug)]
pub struct SizeBound {
    pub size: usize,
    /// Lower bound on |N(X)| certified from degrees and codegrees alone.
    pub certified_lower: f64,
    /// Required bound γ′·p·N·|X| / ln N.
    pub required: f64,
    /// Smallest |N(X)| seen by direct enumeration, when affordable.
    pub exhaustive_min: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct CodegreeBoundReport {
    pub applicable: bool,
    pub min_degree: usize,
    pub max_codegree: usize,
    pub degree_need: f64,
    pub codegree_cap: f64,
    pub gamma_prime: f64,
    pub per_size: Vec<SizeBound>,
    pub all_certified: bool,
}

/// Certifies |N(X)| ≥ γ′·p·N·|X| / ln N for all X up to size C/p, using the
/// inclusion–exclusion chain over a pilot subset X′ of at most
/// γ/(4·p·ln N) vertices: the k smallest degrees minus a codegree term.
/// Sizes whose full enumeration fits the budget are also checked directly.
pub fn codegree_expansion_bound(
    g: &Graph,
    gamma: f64,
    p: f64,
    c: f64,
    budget: &mut Budget,
) -> CodegreeBoundReport {
    let n = g.vertex_count();
    let nf = n as f64;
    let stats = crate::graph::codegree_stats(g);
    let degree_need = gamma * p * nf;
    let codegree_cap = 2.0 * p * p * nf * nf.ln();
    let gamma_prime = gamma * gamma / (16.0 * c);
    let mut report = CodegreeBoundReport {
        applicable: true,
        min_degree: stats.min_degree,
        max_codegree: stats.max_codegree,
        degree_need,
        codegree_cap,
        gamma_prime,
        per_size: Vec::new(),
        all_certified: true,
    };
    if (stats.min_degree as f64) < degree_need || (stats.max_codegree as f64) > codegree_cap {
        report.applicable = false;
        report.all_certified = false;
        return report;
    }
    let max_size = ((c / p).floor() as usize).min(n.saturating_sub(1)).max(1);
    let pilot_cap = ((gamma / (4.0 * p * nf.ln())).floor() as usize).max(1);
    let mut degrees: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    degrees.sort_unstable();
    let prefix: Vec<f64> = degrees
        .iter()
        .scan(0.0, |acc, &d| {
            *acc += d as f64;
            Some(*acc)
        })
        .collect();
    let domain: Vec<usize> = (0..n).collect();
    let all = VertexSet::full(n);
    for k in 1..=max_size {
        let kp = pilot_cap.min(k);
        let pairs = (kp * (kp - 1) / 2) as f64;
        let certified_lower = prefix[kp - 1] - pairs * stats.max_codegree as f64 - k as f64;
        let required = gamma_prime * p * nf * k as f64 / nf.ln();
        let exhaustive_min = if binomial_saturating(n, k) <= budget.cap().saturating_sub(budget.used())
        {
            let mut min_seen = usize::MAX;
            let scan = scan_k_subsets(&domain, k, budget, |x| {
                min_seen = min_seen.min(ext_in(g, x, &all).len());
                None::<()>
            });
            if scan == Scan::Exhausted {
                Some(min_seen)
            } else {
                None
            }
        } else {
            None
        };
        if certified_lower < required {
            report.all_certified = false;
        }
        if let Some(m) = exhaustive_min {
            if (m as f64) < required {
                report.all_certified = false;
            }
        }
        report.per_size.push(SizeBound {
            size: k,
            certified_lower,
            required,
            exhaustive_min,
        });
    }
    report
}
