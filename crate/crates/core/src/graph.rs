//! Simple undirected graphs with bitset adjacency rows, deterministic
//! G(n, p) sampling, edge-colourings, and density/uniformity diagnostics.
//!
//! Graphs are capped at [`DEFAULT_VERTEX_LIMIT`] vertices so adjacency rows
//! stay small enough to treat set operations as constant-cost word scans.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::VertexSet;
use crate::rng::{self, pair_bernoulli};
use crate::subsets::{binomial_saturating, sample_k_subset, scan_k_subsets, Budget, Scan};

/// Hard cap on vertex counts accepted by constructors.
pub const DEFAULT_VERTEX_LIMIT: usize = 5000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph on {n} vertices exceeds the vertex limit {limit}")]
    TooManyVertices { n: usize, limit: usize },
    #[error("edge ({u}, {v}) is out of range or a loop for a graph on {n} vertices")]
    BadEdge { u: usize, v: usize, n: usize },
    #[error("enumeration budget exhausted after {used} subsets (cap {cap})")]
    BudgetExceeded { used: u64, cap: u64 },
    #[error("malformed graph text: {0}")]
    Format(String),
    #[error("edge colouring does not partition the base edge set: {0}")]
    BadColouring(String),
}

/// Undirected graph; one bitset row per vertex.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    rows: Vec<VertexSet>,
    edges: usize,
}

impl Graph {
    pub fn new(n: usize) -> Result<Self, GraphError> {
        Self::with_limit(n, DEFAULT_VERTEX_LIMIT)
    }

    pub fn with_limit(n: usize, limit: usize) -> Result<Self, GraphError> {
        if n > limit {
            return Err(GraphError::TooManyVertices { n, limit });
        }
        Ok(Graph {
            n,
            rows: vec![VertexSet::empty(n); n],
            edges: 0,
        })
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let mut g = Self::new(n)?;
        for v in 0..n {
            g.rows[v] = VertexSet::full(n);
            g.rows[v].remove(v);
        }
        g.edges = n * (n.saturating_sub(1)) / 2;
        Ok(g)
    }

    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::new(n)?;
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<(), GraphError> {
        if u == v || u >= self.n || v >= self.n {
            return Err(GraphError::BadEdge { u, v, n: self.n });
        }
        if !self.rows[u].contains(v) {
            self.rows[u].insert(v);
            self.rows[v].insert(u);
            self.edges += 1;
        }
        Ok(())
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.rows[u].contains(v)
    }

    #[inline]
    pub fn neighbours(&self, v: usize) -> &VertexSet {
        &self.rows[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.rows[v].len()
    }

    pub fn vertices(&self) -> VertexSet {
        VertexSet::full(self.n)
    }

    /// Edges as sorted (u, v) pairs with u < v.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edges);
        for u in 0..self.n {
            for v in self.rows[u].iter() {
                if v > u {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Union of neighbourhoods of X.
    pub fn closed_reach(&self, x: &VertexSet) -> VertexSet {
        let mut acc = VertexSet::empty(self.n);
        for v in x.iter() {
            acc.union_with(&self.rows[v]);
        }
        acc
    }

    /// External neighbourhood N(X), the union of neighbourhoods minus X.
    pub fn ext_neighbourhood(&self, x: &VertexSet) -> VertexSet {
        let mut acc = self.closed_reach(x);
        acc.subtract(x);
        acc
    }

    /// |N(X) ∩ within|.
    pub fn ext_neighbourhood_in(&self, x: &VertexSet, within: &VertexSet) -> usize {
        let mut acc = self.closed_reach(x);
        acc.subtract(x);
        acc.intersection_len(within)
    }

    /// Degree of v into a vertex set.
    #[inline]
    pub fn degree_in(&self, v: usize, within: &VertexSet) -> usize {
        self.rows[v].intersection_len(within)
    }

    /// Number of edges with one end in `a` and the other in `b`.
    /// The sets must be disjoint.
    pub fn edges_between(&self, a: &VertexSet, b: &VertexSet) -> usize {
        debug_assert!(a.is_disjoint(b));
        a.iter().map(|v| self.rows[v].intersection_len(b)).sum()
    }

    /// Number of edges with both ends in `a`.
    pub fn edges_within(&self, a: &VertexSet) -> usize {
        let total: usize = a.iter().map(|v| self.rows[v].intersection_len(a)).sum();
        total / 2
    }

    /// Induced subgraph on `mask`; second return maps new ids to old ids.
    pub fn induced(&self, mask: &VertexSet) -> (Graph, Vec<usize>) {
        let ids: Vec<usize> = mask.iter().collect();
        let mut back = vec![usize::MAX; self.n];
        for (new, &old) in ids.iter().enumerate() {
            back[old] = new;
        }
        let mut g = Graph::with_limit(ids.len(), self.n.max(1)).expect("induced size <= parent");
        for (new, &old) in ids.iter().enumerate() {
            for w in self.rows[old].iter() {
                if w > old && back[w] != usize::MAX {
                    g.add_edge(new, back[w]).expect("mapped edge in range");
                }
            }
        }
        (g, ids)
    }

    /// Serialises to the plain text exchange format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "p graph {} {}", self.n, self.edges);
        for (u, v) in self.edge_list() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    /// Parses the plain text exchange format (strict: sorted edges, u < v).
    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().filter(|l| !is_comment_line(l));
        let header = lines
            .next()
            .ok_or_else(|| GraphError::Format("empty input".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("p") || parts.next() != Some("graph") {
            return Err(GraphError::Format("expected 'p graph <N> <M>' header".into()));
        }
        let n: usize = parse_field(parts.next(), "vertex count")?;
        let m: usize = parse_field(parts.next(), "edge count")?;
        let mut g = Graph::new(n)?;
        let mut prev: Option<(usize, usize)> = None;
        let mut count = 0usize;
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let u: usize = parse_field(it.next(), "edge endpoint")?;
            let v: usize = parse_field(it.next(), "edge endpoint")?;
            if it.next().is_some() {
                return Err(GraphError::Format(format!("trailing tokens on edge line '{line}'")));
            }
            if u >= v {
                return Err(GraphError::Format(format!("edge ({u}, {v}) not in u < v form")));
            }
            if let Some(p) = prev {
                if (u, v) <= p {
                    return Err(GraphError::Format(format!("edge ({u}, {v}) out of order")));
                }
            }
            prev = Some((u, v));
            g.add_edge(u, v)?;
            count += 1;
        }
        if count != m {
            return Err(GraphError::Format(format!(
                "header promises {m} edges, found {count}"
            )));
        }
        Ok(g)
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T, GraphError> {
    tok.ok_or_else(|| GraphError::Format(format!("missing {what}")))?
        .parse()
        .map_err(|_| GraphError::Format(format!("unparseable {what}")))
}

/// True for comment lines (first token `c`); every text parser skips them,
/// so artifact files can carry self-describing parameter headers.
pub fn is_comment_line(line: &str) -> bool {
    line.split_whitespace().next() == Some("c")
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Graph(n={}, m={})", self.n, self.edges)
    }
}

/// Parameters of one G(n, p) sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnpSpec {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
}

impl GnpSpec {
    pub fn sample(&self) -> Result<Graph, GraphError> {
        sample_gnp(self.n, self.p, self.seed)
    }
}

/// Draws G(n, p) with edge indicators keyed by `(seed, min(u,v), max(u,v))`.
/// The same spec always yields the same graph, independent of platform.
pub fn sample_gnp(n: usize, p: f64, seed: u64) -> Result<Graph, GraphError> {
    assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1]");
    let mut g = Graph::new(n)?;
    for u in 0..n {
        for v in (u + 1)..n {
            if pair_bernoulli(seed, u, v, p) {
                g.add_edge(u, v)?;
            }
        }
    }
    Ok(g)
}

/// Two-colouring of a graph's edges. Blue and red are spanning subgraphs
/// that partition the base edge set.
#[derive(Clone)]
pub struct ColouredGraph {
    base: Graph,
    blue: Graph,
    red: Graph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Colour {
    Blue,
    Red,
}

impl Colour {
    pub fn letter(self) -> char {
        match self {
            Colour::Blue => 'B',
            Colour::Red => 'R',
        }
    }
}

impl ColouredGraph {
    /// Colours every edge of `base` through `f`.
    pub fn from_fn(base: Graph, mut f: impl FnMut(usize, usize) -> Colour) -> Self {
        let n = base.vertex_count();
        let mut blue = Graph::with_limit(n, n.max(1)).expect("size bounded by base");
        let mut red = blue.clone();
        for (u, v) in base.edge_list() {
            match f(u, v) {
                Colour::Blue => blue.add_edge(u, v).expect("edge from base"),
                Colour::Red => red.add_edge(u, v).expect("edge from base"),
            }
        }
        ColouredGraph { base, blue, red }
    }

    pub fn all_blue(base: Graph) -> Self {
        Self::from_fn(base, |_, _| Colour::Blue)
    }

    pub fn all_red(base: Graph) -> Self {
        Self::from_fn(base, |_, _| Colour::Red)
    }

    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn blue(&self) -> &Graph {
        &self.blue
    }

    pub fn red(&self) -> &Graph {
        &self.red
    }

    pub fn vertex_count(&self) -> usize {
        self.base.vertex_count()
    }

    pub fn colour_of(&self, u: usize, v: usize) -> Option<Colour> {
        if self.blue.has_edge(u, v) {
            Some(Colour::Blue)
        } else if self.red.has_edge(u, v) {
            Some(Colour::Red)
        } else {
            None
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "p cgraph {} {}",
            self.base.vertex_count(),
            self.base.edge_count()
        );
        for (u, v) in self.base.edge_list() {
            let c = self.colour_of(u, v).expect("base edge is coloured");
            let _ = writeln!(s, "{u} {v} {}", c.letter());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().filter(|l| !is_comment_line(l));
        let header = lines
            .next()
            .ok_or_else(|| GraphError::Format("empty input".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("p") || parts.next() != Some("cgraph") {
            return Err(GraphError::Format(
                "expected 'p cgraph <N> <M>' header".into(),
            ));
        }
        let n: usize = parse_field(parts.next(), "vertex count")?;
        let m: usize = parse_field(parts.next(), "edge count")?;
        let mut base = Graph::new(n)?;
        let mut blue = Graph::new(n)?;
        let mut red = Graph::new(n)?;
        let mut prev: Option<(usize, usize)> = None;
        let mut count = 0usize;
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let u: usize = parse_field(it.next(), "edge endpoint")?;
            let v: usize = parse_field(it.next(), "edge endpoint")?;
            let c = it
                .next()
                .ok_or_else(|| GraphError::Format("missing colour column".into()))?;
            if u >= v {
                return Err(GraphError::Format(format!("edge ({u}, {v}) not in u < v form")));
            }
            if let Some(p) = prev {
                if (u, v) <= p {
                    return Err(GraphError::Format(format!("edge ({u}, {v}) out of order")));
                }
            }
            prev = Some((u, v));
            base.add_edge(u, v)?;
            match c {
                "B" => blue.add_edge(u, v)?,
                "R" => red.add_edge(u, v)?,
                other => {
                    return Err(GraphError::Format(format!("unknown colour '{other}'")));
                }
            }
            count += 1;
        }
        if count != m {
            return Err(GraphError::Format(format!(
                "header promises {m} edges, found {count}"
            )));
        }
        Ok(ColouredGraph { base, blue, red })
    }
}

impl std::fmt::Debug for ColouredGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ColouredGraph(n={}, blue={}, red={})",
            self.base.vertex_count(),
            self.blue.edge_count(),
            self.red.edge_count()
        )
    }
}

/// How a uniformity check walks the pair space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UniformityMode {
    /// Every set of the threshold size, and every disjoint pair of them.
    Exhaustive,
    /// Every set pair with both sizes in `threshold..=n`. Expensive.
    ExhaustiveFullRange,
    /// `samples` seeded random disjoint pairs at the threshold size.
    Sampled { samples: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum UniformityViolation {
    /// e(A, B) outside `[lo, hi]`.
    PairCount {
        a: Vec<usize>,
        b: Vec<usize>,
        observed: usize,
        lo: f64,
        hi: f64,
    },
    /// e(A) outside `[lo, hi]`.
    SetCount {
        a: Vec<usize>,
        observed: usize,
        lo: f64,
        hi: f64,
    },
}

/// Outcome of a uniformity scan. In an exhaustive mode, an empty violation
/// list certifies the density property at the sizes scanned.
#[derive(Clone, Debug)]
pub struct UniformityReport {
    pub eta: f64,
    pub p: f64,
    pub threshold_size: usize,
    pub mode: UniformityMode,
    pub sets_checked: u64,
    pub pairs_checked: u64,
    pub violations: Vec<UniformityViolation>,
}

impl UniformityReport {
    pub fn is_uniform(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the two-sided density bounds `(1±eta)·p·|A||B|` for disjoint set
/// pairs and `(1±eta)·p·C(|A|,2)` for single sets, at size `ceil(eta·n)`
/// (or the full size range, or by sampling, per `mode`).
pub fn check_uniformity(
    g: &Graph,
    eta: f64,
    p: f64,
    mode: UniformityMode,
    budget: &mut Budget,
) -> Result<UniformityReport, GraphError> {
    assert!(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
    let n = g.vertex_count();
    let threshold = (eta * n as f64).ceil() as usize;
    let mut report = UniformityReport {
        eta,
        p,
        threshold_size: threshold,
        mode,
        sets_checked: 0,
        pairs_checked: 0,
        violations: Vec::new(),
    };
    if threshold == 0 || threshold > n {
        return Ok(report);
    }
    match mode {
        UniformityMode::Exhaustive => {
            scan_uniformity_at_sizes(g, eta, p, threshold, threshold, budget, &mut report)?;
        }
        UniformityMode::ExhaustiveFullRange => {
            for sa in threshold..=n {
                for sb in sa..=n {
                    if sa + sb > n {
                        break;
                    }
                    scan_uniformity_at_sizes(g, eta, p, sa, sb, budget, &mut report)?;
                }
            }
            // Single-set bounds for sizes beyond the largest pairable one.
            for sa in threshold..=n {
                if sa + threshold <= n {
                    continue;
                }
                scan_single_sets(g, eta, p, sa, budget, &mut report)?;
            }
        }
        UniformityMode::Sampled { samples, seed } => {
            let mut rng = rng::stream(seed);
            let domain: Vec<usize> = (0..n).collect();
            for _ in 0..samples {
                if 2 * threshold > n {
                    break;
                }
                let a = sample_k_subset(&mut rng, &domain, threshold);
                let rest: Vec<usize> = domain
                    .iter()
                    .copied()
                    .filter(|v| !a.contains(v))
                    .collect();
                let b = sample_k_subset(&mut rng, &rest, threshold);
                report.pairs_checked += 1;
                record_pair(g, eta, p, &a, &b, &mut report);
                report.sets_checked += 2;
                record_single(g, eta, p, &a, &mut report);
                record_single(g, eta, p, &b, &mut report);
            }
        }
    }
    Ok(report)
}

fn scan_single_sets(
    g: &Graph,
    eta: f64,
    p: f64,
    size: usize,
    budget: &mut Budget,
    report: &mut UniformityReport,
) -> Result<(), GraphError> {
    let domain: Vec<usize> = (0..g.vertex_count()).collect();
    let scan = scan_k_subsets(&domain, size, budget, |a| {
        report.sets_checked += 1;
        record_single(g, eta, p, a, report);
        None::<()>
    });
    if scan == Scan::OutOfBudget {
        return Err(GraphError::BudgetExceeded {
            used: budget.used(),
            cap: budget.cap(),
        });
    }
    Ok(())
}

fn scan_uniformity_at_sizes(
    g: &Graph,
    eta: f64,
    p: f64,
    size_a: usize,
    size_b: usize,
    budget: &mut Budget,
    report: &mut UniformityReport,
) -> Result<(), GraphError> {
    let n = g.vertex_count();
    if size_a + size_b > n {
        return scan_single_sets(g, eta, p, size_a, budget, report);
    }
    // Pre-check the pair space against the budget so we fail fast.
    let pair_space = binomial_saturating(n, size_a)
        .saturating_mul(binomial_saturating(n - size_a, size_b));
    if pair_space > budget.cap() {
        return Err(GraphError::BudgetExceeded {
            used: budget.used(),
            cap: budget.cap(),
        });
    }
    scan_single_sets(g, eta, p, size_a, budget, report)?;
    if size_b != size_a {
        scan_single_sets(g, eta, p, size_b, budget, report)?;
    }
    let domain: Vec<usize> = (0..n).collect();
    let mut idx: Vec<usize> = (0..size_a).collect();
    loop {
        if !budget.consume() {
            return Err(GraphError::BudgetExceeded {
                used: budget.used(),
                cap: budget.cap(),
            });
        }
        let a_owned: Vec<usize> = idx.iter().map(|&i| domain[i]).collect();
        let rest: Vec<usize> = domain
            .iter()
            .copied()
            .filter(|v| !a_owned.contains(v))
            .collect();
        let inner = scan_k_subsets(&rest, size_b, budget, |b| {
            // Visit unordered pairs once when sizes coincide.
            if size_a == size_b && b < a_owned.as_slice() {
                return None::<()>;
            }
            report.pairs_checked += 1;
            record_pair(g, eta, p, &a_owned, b, report);
            None::<()>
        });
        if inner == Scan::OutOfBudget {
            return Err(GraphError::BudgetExceeded {
                used: budget.used(),
                cap: budget.cap(),
            });
        }
        if !next_combination(&mut idx, n) {
            return Ok(());
        }
    }
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - (k - i) {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn record_pair(
    g: &Graph,
    eta: f64,
    p: f64,
    a: &[usize],
    b: &[usize],
    report: &mut UniformityReport,
) {
    let n = g.vertex_count();
    let sa = VertexSet::from_iter(n, a.iter().copied());
    let sb = VertexSet::from_iter(n, b.iter().copied());
    let observed = g.edges_between(&sa, &sb);
    let expected = p * (a.len() * b.len()) as f64;
    let (lo, hi) = ((1.0 - eta) * expected, (1.0 + eta) * expected);
    if (observed as f64) < lo || (observed as f64) > hi {
        report.violations.push(UniformityViolation::PairCount {
            a: a.to_vec(),
            b: b.to_vec(),
            observed,
            lo,
            hi,
        });
    }
}

fn record_single(g: &Graph, eta: f64, p: f64, a: &[usize], report: &mut UniformityReport) {
    let n = g.vertex_count();
    let sa = VertexSet::from_iter(n, a.iter().copied());
    let observed = g.edges_within(&sa);
    let pairs = (a.len() * a.len().saturating_sub(1) / 2) as f64;
    let expected = p * pairs;
    let (lo, hi) = ((1.0 - eta) * expected, (1.0 + eta) * expected);
    if (observed as f64) < lo || (observed as f64) > hi {
        report.violations.push(UniformityViolation::SetCount {
            a: a.to_vec(),
            observed,
            lo,
            hi,
        });
    }
}

/// Degree and weak-expansion diagnostics for one sampled graph.
#[derive(Clone, Debug)]
pub struct GnpDiagnostics {
    /// Degree threshold `gamma·p·n / 8` used for the low-degree census.
    pub low_degree_threshold: f64,
    /// Vertices whose degree into `u` falls strictly below the threshold.
    pub low_degree_vertices: Vec<usize>,
    /// Outcome of a weak-expansion check when parameters were supplied.
    pub weak_expander: Option<crate::expander::ExpansionVerdict>,
}

/// Counts vertices with few neighbours in `u` and, optionally, runs a weak
/// expansion check at the supplied `(m1, m2)`.
pub fn gnp_diagnostics(
    g: &Graph,
    u: &VertexSet,
    gamma: f64,
    p: f64,
    weak: Option<(usize, usize)>,
    budget: &mut Budget,
) -> Result<GnpDiagnostics, crate::expander::ExpanderError> {
    let n = g.vertex_count() as f64;
    let threshold = gamma * p * n / 8.0;
    let low_degree_vertices = (0..g.vertex_count())
        .filter(|&v| (g.degree_in(v, u) as f64) < threshold)
        .collect();
    let weak_expander = match weak {
        Some((m1, m2)) => Some(crate::expander::check_weak(
            g,
            &g.vertices(),
            m1,
            m2,
            budget,
        )?),
        None => None,
    };
    Ok(GnpDiagnostics {
        low_degree_threshold: threshold,
        low_degree_vertices,
        weak_expander,
    })
}

/// Extremes used by neighbourhood-union lower bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodegreeStats {
    pub min_degree: usize,
    pub max_codegree: usize,
}

/// Minimum degree and maximum codegree (|N(u) ∩ N(v)| over all pairs).
pub fn codegree_stats(g: &Graph) -> CodegreeStats {
    let n = g.vertex_count();
    let min_degree = (0..n).map(|v| g.degree(v)).min().unwrap_or(0);
    let mut max_codegree = 0;
    for u in 0..n {
        for v in (u + 1)..n {
            max_codegree = max_codegree.max(g.neighbours(u).intersection_len(g.neighbours(v)));
        }
    }
    CodegreeStats {
        min_degree,
        max_codegree,
    }
}
