//! Arrowing harness over two-coloured graphs.
//!
//! The battleground is a blue/red edge colouring of a host graph: either the
//! blue graph contains a clique on `r + 1` vertices, or the red graph is
//! expected to contain every tree with `n` edges and maximum degree at most
//! `D`.  [`check_colouring`] searches for one of those witnesses in a given
//! colouring, [`arrow_exhaustive`] closes small cases by enumerating every
//! colouring, and [`extremal_colouring`] produces the classic blocking
//! colouring of `r` red cliques below the `rn + 1` threshold.
//!
//! [`weakly_clique`] walks the staged dichotomy on a red graph with at least
//! `rn + 10Drm` vertices: each stage either certifies tree universality
//! through expander extraction, or peels off an `m`-set with no red edges to
//! the rest of the stage, ending with `r + 1` pairwise red-edge-free sets.
//! [`canonical_clique`] then looks for a blue clique transversal to such
//! sets, and [`janson_condition`] evaluates the set-size arithmetic that
//! predicts when transversals exist in random hosts.
//!
//! The ε-good machinery ([`eps_good_check`], [`refine_partition`]) validates
//! and repairs vertex partitions whose parts have high red degree and low
//! blue degree inside, and [`mc_sweep`] drives seeded Monte Carlo grids over
//! host sizes, densities and adversary colouring strategies, emitting a
//! deterministic CSV.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::VertexSet;
use crate::embed::{
    apply_embedding_pairs, haxell_conditions, haxell_embed, validate_embedding, EmbedConfig,
    EmbedError,
};
use crate::expander::{check_weak, extract_expander, ExpanderError, VerdictKind};
use crate::graph::{sample_gnp, Colour, ColouredGraph, Graph, GraphError};
use crate::rng::{derive_seed, pair_bernoulli};
use crate::subsets::{Budget, DEFAULT_SUBSET_CAP};
use crate::tree::{enumerate_trees, gen_random_tree, Tree, TreeError};

#[derive(Debug, Error)]
pub enum RamseyError {
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("internal assertion failed: {0}")]
    InternalAssertion(String),
    #[error("search truncated: {0}")]
    Truncated(String),
    #[error("refinement left violations: {}", .0.join("; "))]
    RefineFailed(Vec<String>),
    #[error(transparent)]
    Expander(#[from] ExpanderError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Blocking colouring: `r` red blocks with all remaining edges blue.
#[derive(Clone, Debug)]
pub struct ExtremalColouring {
    pub coloured: ColouredGraph,
    /// The `r` red blocks; vertices beyond them carry only blue edges.
    pub parts: Vec<VertexSet>,
}

/// Splits `0..n_vertices` into `r` blocks of at most `n` vertices each.
///
/// With `n_vertices >= r * n` the blocks have size exactly `n` and any
/// remaining vertices belong to no block; otherwise the split is balanced,
/// with the first `n_vertices mod r` blocks one vertex larger.
pub fn extremal_parts(
    n_vertices: usize,
    r: usize,
    n: usize,
) -> Result<Vec<VertexSet>, RamseyError> {
    if r == 0 || n == 0 {
        return Err(RamseyError::BadInput(
            "need at least one part of positive capacity".into(),
        ));
    }
    let mut sizes = Vec::with_capacity(r);
    if n_vertices >= r * n {
        sizes.resize(r, n);
    } else {
        let q = n_vertices / r;
        let rem = n_vertices % r;
        for i in 0..r {
            sizes.push(q + usize::from(i < rem));
        }
    }
    let mut parts = Vec::with_capacity(r);
    let mut next = 0;
    for s in sizes {
        parts.push(VertexSet::from_iter(n_vertices, next..next + s));
        next += s;
    }
    Ok(parts)
}

/// Colours `base` so that edges inside a block are red and all other edges,
/// including every edge touching a vertex beyond the blocks, are blue.
///
/// On a complete host with `n_vertices <= r * n` this is the classic
/// non-arrowing witness: the blue graph is `r`-partite, so it has no clique
/// on `r + 1` vertices, and every red component has at most `n` vertices,
/// one too few for a tree with `n` edges.
pub fn extremal_colouring(
    base: Graph,
    r: usize,
    n: usize,
) -> Result<ExtremalColouring, RamseyError> {
    let parts = extremal_parts(base.vertex_count(), r, n)?;
    let mut part_of = vec![usize::MAX; base.vertex_count()];
    for (i, part) in parts.iter().enumerate() {
        for v in part.iter() {
            part_of[v] = i;
        }
    }
    let coloured = ColouredGraph::from_fn(base, |u, v| {
        if part_of[u] != usize::MAX && part_of[u] == part_of[v] {
            Colour::Red
        } else {
            Colour::Blue
        }
    });
    Ok(ExtremalColouring { coloured, parts })
}

/// Vertex set certified to contain every tree with `n` edges and maximum
/// degree at most `d`, together with the stage of the dichotomy that
/// produced it.
#[derive(Clone, Debug)]
pub struct UniversalityCertificate {
    pub stage: usize,
    pub v_prime: VertexSet,
    /// Vertices trimmed during expander extraction, at most `m` of them.
    pub removed: VertexSet,
    pub m: usize,
    /// Pair-condition scale the stage was checked at.
    pub m_s: usize,
}

#[derive(Clone, Debug)]
pub enum WeaklyCliqueOutcome {
    Universality(UniversalityCertificate),
    /// `r + 1` disjoint sets of size `m` with no red edges between any two.
    BlueSets(Vec<VertexSet>),
}

/// Staged dichotomy on a red graph with at least `rn + 10Drm` vertices:
/// tree universality or `r + 1` mutually red-edge-free `m`-sets.
///
/// Stage `s` holds a vertex set of at least `(r-s)n + (r-s+1)5Dm` vertices
/// and checks the pair condition at scales `(m, m_s)` with
/// `m_s = (r-s-1)n + (r-s)5Dm`.  A violating pair `(X, Y)` banks `X` and
/// recurses into `Y`; after `r` violations the final stage set has `5Dm`
/// vertices and its first `m` join the banked sets.  A certified stage
/// instead extracts an expander (losing at most `m` vertices) and certifies
/// both neighbourhood growth conditions for tree containment on what
/// remains; arithmetic guarantees that certification succeeds, so a failure
/// there reports an internal assertion rather than a fake outcome.
pub fn weakly_clique(
    g_red: &Graph,
    n: usize,
    m: usize,
    r: usize,
    d: usize,
    budget: &mut Budget,
) -> Result<WeaklyCliqueOutcome, RamseyError> {
    if n == 0 || m == 0 || r == 0 || d < 2 {
        return Err(RamseyError::BadInput(format!(
            "need n, m, r >= 1 and d >= 2, got n = {n}, m = {m}, r = {r}, d = {d}"
        )));
    }
    let nv = g_red.vertex_count();
    let need = r * n + 10 * d * r * m;
    if nv < need {
        return Err(RamseyError::BadInput(format!(
            "{nv} vertices, need at least rn + 10Drm = {need}"
        )));
    }
    let mut v_s = g_red.vertices();
    let mut banked: Vec<VertexSet> = Vec::with_capacity(r + 1);
    for s in 0..r {
        let m_s = (r - s - 1) * n + (r - s) * 5 * d * m;
        let verdict = check_weak(g_red, &v_s, m, m_s, budget)?;
        match verdict.kind {
            VerdictKind::Certified => {
                let ext = extract_expander(g_red, &v_s, m, m_s, d, budget)?;
                let (sub, _) = g_red.induced(&ext.kept);
                let certified = haxell_conditions(&sub, n, m, d, budget)?;
                if !certified {
                    return Err(RamseyError::InternalAssertion(format!(
                        "stage {s} certified the pair condition at ({m}, {m_s}) on {} vertices \
                         but the extracted set failed the growth conditions",
                        v_s.len()
                    )));
                }
                return Ok(WeaklyCliqueOutcome::Universality(UniversalityCertificate {
                    stage: s,
                    v_prime: ext.kept,
                    removed: ext.removed,
                    m,
                    m_s,
                }));
            }
            VerdictKind::WeakPairViolation { x, y } => {
                banked.push(VertexSet::from_iter(nv, x.iter().copied()));
                v_s = VertexSet::from_iter(nv, y.iter().copied());
            }
            VerdictKind::SmallSetViolation { .. } => {
                return Err(RamseyError::InternalAssertion(
                    "pair-condition check reported a growth violation".into(),
                ));
            }
        }
    }
    banked.push(VertexSet::from_iter(nv, v_s.iter().take(m)));
    for (i, set) in banked.iter().enumerate() {
        if set.len() != m {
            return Err(RamseyError::InternalAssertion(format!(
                "banked set {i} has {} vertices, expected {m}",
                set.len()
            )));
        }
        for other in banked.iter().skip(i + 1) {
            if !set.is_disjoint(other) {
                return Err(RamseyError::InternalAssertion(format!(
                    "banked set {i} overlaps a later one"
                )));
            }
            let red = g_red.edges_between(set, other);
            if red != 0 {
                return Err(RamseyError::InternalAssertion(format!(
                    "banked set {i} has {red} red edges to a later one"
                )));
            }
        }
    }
    Ok(WeaklyCliqueOutcome::BlueSets(banked))
}

fn rec_clique(g: &Graph, k: usize, cands: &[usize], chosen: &mut Vec<usize>) -> bool {
    if chosen.len() == k {
        return true;
    }
    for (i, &v) in cands.iter().enumerate() {
        if chosen.len() + cands.len() - i < k {
            return false;
        }
        let next: Vec<usize> = cands[i + 1..]
            .iter()
            .copied()
            .filter(|&u| g.has_edge(u, v))
            .collect();
        chosen.push(v);
        if rec_clique(g, k, &next, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// First clique on `k` vertices in ascending-id order, by exhaustive
/// branch-and-bound; `None` is a proof of absence.
pub fn find_clique(g: &Graph, k: usize) -> Option<Vec<usize>> {
    let mut chosen = Vec::with_capacity(k);
    let all: Vec<usize> = (0..g.vertex_count()).collect();
    if rec_clique(g, k, &all, &mut chosen) {
        Some(chosen)
    } else {
        None
    }
}

fn rec_transversal(
    g: &Graph,
    sets: &[Vec<usize>],
    chosen: &mut Vec<usize>,
    budget: &mut Budget,
) -> Result<bool, RamseyError> {
    let depth = chosen.len();
    if depth == sets.len() {
        return Ok(true);
    }
    for &v in &sets[depth] {
        if !budget.consume() {
            return Err(RamseyError::Expander(ExpanderError::BudgetExceeded {
                used: budget.used(),
                cap: budget.cap(),
            }));
        }
        if chosen.iter().all(|&u| g.has_edge(u, v)) {
            chosen.push(v);
            if rec_transversal(g, sets, chosen, budget)? {
                return Ok(true);
            }
            chosen.pop();
        }
    }
    Ok(false)
}

/// Exhaustive search for a clique with exactly one vertex in each of the
/// given disjoint sets; `None` is exact.
///
/// Vertices are tried in ascending order within each set, sets in the given
/// order, and every candidate probe charges the budget.
pub fn canonical_clique(
    g: &Graph,
    sets: &[VertexSet],
    budget: &mut Budget,
) -> Result<Option<Vec<usize>>, RamseyError> {
    for (i, a) in sets.iter().enumerate() {
        if a.is_empty() {
            return Err(RamseyError::BadInput(format!("set {i} is empty")));
        }
        for b in sets.iter().skip(i + 1) {
            if !a.is_disjoint(b) {
                return Err(RamseyError::BadInput(format!(
                    "set {i} overlaps a later set"
                )));
            }
        }
    }
    let lists: Vec<Vec<usize>> = sets.iter().map(|s| s.to_vec()).collect();
    let mut chosen = Vec::with_capacity(sets.len());
    if rec_transversal(g, &lists, &mut chosen, budget)? {
        Ok(Some(chosen))
    } else {
        Ok(None)
    }
}

/// Seeded randomized variant: draws one vertex per set uniformly, `samples`
/// times, and reports the first transversal clique found.  Never proves
/// absence.
pub fn canonical_clique_sampled(
    g: &Graph,
    sets: &[VertexSet],
    samples: u64,
    seed: u64,
) -> Option<Vec<usize>> {
    use rand::Rng;
    let lists: Vec<Vec<usize>> = sets.iter().map(|s| s.to_vec()).collect();
    if lists.iter().any(|l| l.is_empty()) {
        return None;
    }
    let mut rng = crate::rng::stream(seed);
    'outer: for _ in 0..samples {
        let mut tuple = Vec::with_capacity(lists.len());
        for l in &lists {
            tuple.push(l[rng.random_range(0..l.len())]);
        }
        for (i, &u) in tuple.iter().enumerate() {
            for &v in tuple.iter().skip(i + 1) {
                if !g.has_edge(u, v) {
                    continue 'outer;
                }
            }
        }
        return Some(tuple);
    }
    None
}

/// Natural logarithm of the gamma function for positive arguments, by the
/// Lanczos approximation (g = 7, nine coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "ln_gamma needs a positive argument");
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Natural logarithm of the binomial coefficient `C(n, k)`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Both sides of the canonical-clique size condition
/// `m^(r+1) p^(r(r+1)/2) >= C ln C(N, m)`, compared in log space.
#[derive(Clone, Copy, Debug)]
pub struct JansonCheck {
    pub holds: bool,
    /// Left side `m^(r+1) p^(r(r+1)/2)`; may overflow to infinity.
    pub lhs: f64,
    /// Right side `C ln C(N, m)`.
    pub rhs: f64,
    pub lhs_log: f64,
}

/// Evaluates the size condition under which every family of `r + 1`
/// disjoint `m`-sets in a random host of density `p` is expected to span a
/// transversal clique.  The logarithm is natural; the constant `c` absorbs
/// any base change.
pub fn janson_condition(
    n_vertices: usize,
    p: f64,
    m: usize,
    r: usize,
    c: f64,
) -> Result<JansonCheck, RamseyError> {
    if m == 0 || m > n_vertices {
        return Err(RamseyError::BadInput(format!(
            "set size m = {m} must lie in 1..={n_vertices}"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(RamseyError::BadInput(format!("density p = {p} not in (0, 1]")));
    }
    if r == 0 {
        return Err(RamseyError::BadInput("need r >= 1".into()));
    }
    let pairs = (r * (r + 1) / 2) as f64;
    let lhs_log = (r + 1) as f64 * (m as f64).ln() + pairs * p.ln();
    let rhs = c * ln_binomial(n_vertices, m);
    let holds = if rhs <= 0.0 { true } else { lhs_log >= rhs.ln() };
    Ok(JansonCheck {
        holds,
        lhs: lhs_log.exp(),
        rhs,
        lhs_log,
    })
}

/// How the tree family driving a universality check was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyRegime {
    /// One representative per isomorphism class.
    Enumerated,
    Sampled { count: usize, seed: u64 },
}

/// Concrete stand-in for the family of trees with `n_edges` edges and
/// maximum degree at most `degree_bound`.
#[derive(Clone, Debug)]
pub struct TreeFamily {
    pub n_edges: usize,
    pub degree_bound: usize,
    pub regime: FamilyRegime,
    pub trees: Vec<Tree>,
}

/// Largest edge count at which the family is enumerated exhaustively; above
/// it, seeded random trees stand in.
pub const FAMILY_ENUMERATION_CAP: usize = 9;

pub fn tree_family(
    n_edges: usize,
    degree_bound: usize,
    samples: usize,
    seed: u64,
) -> Result<TreeFamily, RamseyError> {
    if n_edges <= FAMILY_ENUMERATION_CAP {
        let trees = enumerate_trees(n_edges, degree_bound)?;
        return Ok(TreeFamily {
            n_edges,
            degree_bound,
            regime: FamilyRegime::Enumerated,
            trees,
        });
    }
    if samples == 0 {
        return Err(RamseyError::BadInput(
            "sampled tree family needs at least one sample".into(),
        ));
    }
    let mut trees = Vec::with_capacity(samples);
    for i in 0..samples {
        trees.push(gen_random_tree(
            n_edges,
            degree_bound,
            derive_seed(seed, i as u64),
        )?);
    }
    Ok(TreeFamily {
        n_edges,
        degree_bound,
        regime: FamilyRegime::Sampled {
            count: samples,
            seed,
        },
        trees,
    })
}

/// Outcome of searching one colouring for its witnesses.
#[derive(Clone, Debug)]
pub enum ArrowVerdict {
    /// All-blue clique on `r + 1` vertices.
    BlueClique { vertices: Vec<usize> },
    /// Every family tree embedded in the red graph; one pair list per tree.
    RedFamilyEmbedded {
        regime: FamilyRegime,
        embeddings: Vec<Vec<(usize, usize)>>,
    },
    /// Some family tree missing from the red graph.  The claim is exact
    /// only when `exhaustive` is set; otherwise the search ran out of
    /// placement budget.
    RedTreeMissing {
        regime: FamilyRegime,
        tree_index: usize,
        exhaustive: bool,
        placements: u64,
    },
    /// A full colouring with no blue clique and a missing red tree.
    NonArrowWitness { colouring: Box<ColouredGraph> },
}

impl ArrowVerdict {
    pub fn token(&self) -> &'static str {
        match self {
            ArrowVerdict::BlueClique { .. } => "blue-clique",
            ArrowVerdict::RedFamilyEmbedded { .. } => "red-family",
            ArrowVerdict::RedTreeMissing { .. } => "red-tree-missing",
            ArrowVerdict::NonArrowWitness { .. } => "non-arrow",
        }
    }
}

/// Searches one colouring: first an exhaustive blue clique search, then an
/// exact embedding search for every family tree in the red graph.
///
/// Returns the first witness found.  A tree whose search exhausts proves
/// non-containment; a tree whose search hits the placement budget yields a
/// missing verdict with `exhaustive` unset, kept distinct so callers never
/// mistake truncation for proof.
pub fn check_colouring(
    cg: &ColouredGraph,
    r: usize,
    family: &TreeFamily,
    cfg: &EmbedConfig,
    budget: &mut Budget,
) -> Result<ArrowVerdict, RamseyError> {
    if r == 0 {
        return Err(RamseyError::BadInput("need r >= 1".into()));
    }
    if let Some(vertices) = find_clique(cg.blue(), r + 1) {
        return Ok(ArrowVerdict::BlueClique { vertices });
    }
    let mut embeddings = Vec::with_capacity(family.trees.len());
    for (i, t) in family.trees.iter().enumerate() {
        match haxell_embed(cg.red(), t, None, None, cfg, budget) {
            Ok(report) => match report.embedding {
                Some(emb) => {
                    let bad = validate_embedding(&emb);
                    if !emb.is_complete() || !bad.is_empty() {
                        return Err(RamseyError::InternalAssertion(format!(
                            "embedding of family tree {i} failed validation: {}",
                            bad.join("; ")
                        )));
                    }
                    embeddings.push(emb.pairs());
                }
                None => {
                    return Ok(ArrowVerdict::RedTreeMissing {
                        regime: family.regime,
                        tree_index: i,
                        exhaustive: report.exhausted,
                        placements: report.placements,
                    })
                }
            },
            Err(EmbedError::BudgetExhausted { placements }) => {
                return Ok(ArrowVerdict::RedTreeMissing {
                    regime: family.regime,
                    tree_index: i,
                    exhaustive: false,
                    placements,
                })
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(ArrowVerdict::RedFamilyEmbedded {
        regime: family.regime,
        embeddings,
    })
}

/// Replays a verdict's witness against the colouring it was issued for;
/// returns the discrepancies found.
///
/// Blue cliques are recounted edge by edge, embeddings are replayed through
/// the embedding validator, and a non-arrowing witness is re-searched from
/// scratch, demanding an exhaustive missing-tree verdict on a colouring of
/// the same base graph.
pub fn validate_verdict(
    cg: &ColouredGraph,
    r: usize,
    family: &TreeFamily,
    verdict: &ArrowVerdict,
    cfg: &EmbedConfig,
    budget: &mut Budget,
) -> Result<Vec<String>, RamseyError> {
    let mut bad = Vec::new();
    match verdict {
        ArrowVerdict::BlueClique { vertices } => {
            if vertices.len() != r + 1 {
                bad.push(format!(
                    "clique has {} vertices, expected {}",
                    vertices.len(),
                    r + 1
                ));
            }
            for (i, &u) in vertices.iter().enumerate() {
                for &v in vertices.iter().skip(i + 1) {
                    if u == v {
                        bad.push(format!("clique repeats vertex {u}"));
                    } else if cg.colour_of(u, v) != Some(Colour::Blue) {
                        bad.push(format!("pair ({u}, {v}) is not a blue edge"));
                    }
                }
            }
        }
        ArrowVerdict::RedFamilyEmbedded { embeddings, .. } => {
            if embeddings.len() != family.trees.len() {
                bad.push(format!(
                    "{} embeddings for {} trees",
                    embeddings.len(),
                    family.trees.len()
                ));
            }
            for (i, pairs) in embeddings.iter().enumerate() {
                let Some(t) = family.trees.get(i) else { break };
                match apply_embedding_pairs(t, cg.red(), pairs) {
                    Ok(emb) => {
                        if !emb.is_complete() {
                            bad.push(format!("embedding {i} is partial"));
                        }
                        for v in validate_embedding(&emb) {
                            bad.push(format!("embedding {i}: {v}"));
                        }
                    }
                    Err(e) => bad.push(format!("embedding {i} does not replay: {e}")),
                }
            }
        }
        ArrowVerdict::RedTreeMissing { tree_index, .. } => {
            if *tree_index >= family.trees.len() {
                bad.push(format!("missing-tree index {tree_index} is out of range"));
            }
        }
        ArrowVerdict::NonArrowWitness { colouring } => {
            if colouring.base() != cg.base() {
                bad.push("witness colouring is over a different base graph".into());
            }
            match check_colouring(colouring, r, family, cfg, budget)? {
                ArrowVerdict::RedTreeMissing {
                    exhaustive: true, ..
                } => {}
                other => bad.push(format!(
                    "witness re-search produced {} instead of an exhaustive missing tree",
                    other.token()
                )),
            }
        }
    }
    Ok(bad)
}

/// Colours `g`'s edges by the bits of `mask` over the sorted edge list:
/// set bits are blue, clear bits red.
pub fn mask_colouring(g: &Graph, edges: &[(usize, usize)], mask: u64) -> ColouredGraph {
    ColouredGraph::from_fn(g.clone(), |u, v| {
        let key = (u.min(v), u.max(v));
        let idx = edges.binary_search(&key).expect("edge of the base graph");
        if mask >> idx & 1 == 1 {
            Colour::Blue
        } else {
            Colour::Red
        }
    })
}

#[derive(Clone, Debug)]
pub enum ArrowOutcome {
    /// Every colouring contains a witness.
    Arrows { colourings: u64 },
    /// First colouring, in mask order, with no blue clique and an
    /// exhaustively missing red tree.
    NonArrow(Box<ColouredGraph>),
}

/// Decides arrowing on a small graph by enumerating all `2^e` colourings.
///
/// Each colouring charges one unit of budget.  Every missing-tree verdict
/// must be exhaustive for the enumeration to count as a proof; a truncated
/// search aborts with an error instead of guessing.
pub fn arrow_exhaustive(
    g: &Graph,
    r: usize,
    family: &TreeFamily,
    cfg: &EmbedConfig,
    budget: &mut Budget,
) -> Result<ArrowOutcome, RamseyError> {
    let mut edges = g.edge_list();
    edges.sort_unstable();
    let e = edges.len();
    if e >= 63 {
        return Err(RamseyError::BadInput(format!(
            "{e} edges is beyond colouring enumeration"
        )));
    }
    let total = 1u64 << e;
    for mask in 0..total {
        if !budget.consume() {
            return Err(RamseyError::Expander(ExpanderError::BudgetExceeded {
                used: budget.used(),
                cap: budget.cap(),
            }));
        }
        let cg = mask_colouring(g, &edges, mask);
        match check_colouring(&cg, r, family, cfg, budget)? {
            ArrowVerdict::RedTreeMissing {
                exhaustive: true, ..
            } => return Ok(ArrowOutcome::NonArrow(Box::new(cg))),
            ArrowVerdict::RedTreeMissing {
                exhaustive: false,
                tree_index,
                ..
            } => {
                return Err(RamseyError::Truncated(format!(
                    "colouring {mask}: search for tree {tree_index} ran out of placement budget"
                )))
            }
            _ => {}
        }
    }
    Ok(ArrowOutcome::Arrows { colourings: total })
}

/// One failed condition of an ε-good partition.
#[derive(Clone, Debug, PartialEq)]
pub enum EpsGoodViolation {
    PartTooSmall {
        part: usize,
        size: usize,
        bound: f64,
    },
    RedDegreeLow {
        part: usize,
        vertex: usize,
        degree: usize,
        bound: f64,
    },
    BlueDegreeHigh {
        part: usize,
        vertex: usize,
        degree: usize,
        bound: f64,
    },
}

impl std::fmt::Display for EpsGoodViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EpsGoodViolation::PartTooSmall { part, size, bound } => {
                write!(f, "part {part} has {size} vertices, below {bound:.3}")
            }
            EpsGoodViolation::RedDegreeLow {
                part,
                vertex,
                degree,
                bound,
            } => write!(
                f,
                "vertex {vertex} has red degree {degree} in part {part}, below {bound:.3}"
            ),
            EpsGoodViolation::BlueDegreeHigh {
                part,
                vertex,
                degree,
                bound,
            } => write!(
                f,
                "vertex {vertex} has blue degree {degree} in part {part}, above {bound:.3}"
            ),
        }
    }
}

/// Checks the three ε-good conditions on `parts[1..]`, with `parts[0]` the
/// exempt exceptional set: each part holds at least `(1 - 1/2D) N/r`
/// vertices, every vertex has red degree at least `pN/32r` inside its own
/// part, and blue degree at most `eps * pN` there.
pub fn eps_good_check(
    cg: &ColouredGraph,
    parts: &[VertexSet],
    eps: f64,
    p: f64,
    d: usize,
) -> Result<Vec<EpsGoodViolation>, RamseyError> {
    if parts.len() < 2 {
        return Err(RamseyError::BadInput(
            "need an exceptional set plus at least one part".into(),
        ));
    }
    if d == 0 || !(p > 0.0 && p <= 1.0) || eps < 0.0 {
        return Err(RamseyError::BadInput(format!(
            "parameters out of range: eps = {eps}, p = {p}, d = {d}"
        )));
    }
    let nv = cg.vertex_count();
    let mut seen = VertexSet::empty(nv);
    let mut total = 0;
    for (i, part) in parts.iter().enumerate() {
        if !seen.is_disjoint(part) {
            return Err(RamseyError::BadInput(format!("part {i} overlaps an earlier one")));
        }
        seen.union_with(part);
        total += part.len();
    }
    if total != nv || seen.len() != nv {
        return Err(RamseyError::BadInput(format!(
            "parts cover {total} of {nv} vertices"
        )));
    }
    let r = parts.len() - 1;
    let nf = nv as f64;
    let size_bound = (1.0 - 1.0 / (2.0 * d as f64)) * nf / r as f64;
    let red_bound = p * nf / (32.0 * r as f64);
    let blue_bound = eps * p * nf;
    let mut out = Vec::new();
    for (i, part) in parts.iter().enumerate().skip(1) {
        if (part.len() as f64) < size_bound {
            out.push(EpsGoodViolation::PartTooSmall {
                part: i,
                size: part.len(),
                bound: size_bound,
            });
        }
        for v in part.iter() {
            let dr = cg.red().degree_in(v, part);
            if (dr as f64) < red_bound {
                out.push(EpsGoodViolation::RedDegreeLow {
                    part: i,
                    vertex: v,
                    degree: dr,
                    bound: red_bound,
                });
            }
            let db = cg.blue().degree_in(v, part);
            if (db as f64) > blue_bound {
                out.push(EpsGoodViolation::BlueDegreeHigh {
                    part: i,
                    vertex: v,
                    degree: db,
                    bound: blue_bound,
                });
            }
        }
    }
    Ok(out)
}

/// Result of trimming and greedily repairing a partition towards
/// ε-goodness.
#[derive(Clone, Debug)]
pub struct RefinedPartition {
    /// `parts[0]` is the leftover set; `parts[1..]` pass the ε-good check.
    pub parts: Vec<VertexSet>,
    /// Vertices dropped for high blue degree inside their part.
    pub b_set: VertexSet,
    /// Vertices dropped for low total degree into some trimmed part.
    pub b_prime: VertexSet,
    /// Accepted relocations in order, as (vertex, destination part).
    pub moved: Vec<(usize, usize)>,
}

/// Trims each part of its blue-heavy vertices (blue degree at least
/// `eps * pN` inside the part) and of vertices with degree at most
/// `pN/16r` into some trimmed part, then greedily relocates leftover
/// vertices: scanning vertices ascending and parts ascending, a vertex
/// with red degree at least `pN/32r` into a part moves there if the full
/// ε-good check still passes afterwards, re-checked rather than assumed.
/// The loop stops when a sweep commits no move; if the surviving partition
/// still fails the check, the violations are returned as an error rather
/// than a partition that does not deliver.
pub fn refine_partition(
    cg: &ColouredGraph,
    initial: &[VertexSet],
    eps: f64,
    p: f64,
    d: usize,
) -> Result<RefinedPartition, RamseyError> {
    if initial.is_empty() {
        return Err(RamseyError::BadInput("need at least one part".into()));
    }
    if d == 0 || !(p > 0.0 && p <= 1.0) || eps <= 0.0 {
        return Err(RamseyError::BadInput(format!(
            "parameters out of range: eps = {eps}, p = {p}, d = {d}"
        )));
    }
    let nv = cg.vertex_count();
    let r = initial.len();
    let mut seen = VertexSet::empty(nv);
    for (i, part) in initial.iter().enumerate() {
        if !seen.is_disjoint(part) {
            return Err(RamseyError::BadInput(format!("part {i} overlaps an earlier one")));
        }
        seen.union_with(part);
    }
    let nf = nv as f64;
    let blue_cut = eps * p * nf;
    let degree_cut = p * nf / (16.0 * r as f64);
    let red_need = p * nf / (32.0 * r as f64);

    let mut b_set = VertexSet::empty(nv);
    for part in initial {
        for v in part.iter() {
            if (cg.blue().degree_in(v, part) as f64) >= blue_cut {
                b_set.insert(v);
            }
        }
    }
    let trimmed: Vec<VertexSet> = initial.iter().map(|p| p.difference(&b_set)).collect();
    let mut b_prime = VertexSet::empty(nv);
    for v in 0..nv {
        for part in &trimmed {
            if (cg.base().degree_in(v, part) as f64) <= degree_cut {
                b_prime.insert(v);
                break;
            }
        }
    }
    let mut parts = Vec::with_capacity(r + 1);
    parts.push(VertexSet::full(nv));
    for part in &trimmed {
        let w = part.difference(&b_prime);
        parts[0].subtract(&w);
        parts.push(w);
    }

    let mut moved = Vec::new();
    loop {
        let mut committed = false;
        for u in parts[0].to_vec() {
            for i in 1..=r {
                if (cg.red().degree_in(u, &parts[i]) as f64) < red_need {
                    continue;
                }
                parts[0].remove(u);
                parts[i].insert(u);
                if eps_good_check(cg, &parts, eps, p, d)?.is_empty() {
                    moved.push((u, i));
                    committed = true;
                    break;
                }
                parts[i].remove(u);
                parts[0].insert(u);
            }
        }
        if !committed {
            break;
        }
    }
    let remaining = eps_good_check(cg, &parts, eps, p, d)?;
    if !remaining.is_empty() {
        return Err(RamseyError::RefineFailed(
            remaining.iter().map(|v| v.to_string()).collect(),
        ));
    }
    Ok(RefinedPartition {
        parts,
        b_set,
        b_prime,
        moved,
    })
}

/// Greedy low-conductance set: grows from a minimum-degree vertex, always
/// absorbing the candidate that minimizes the external neighbourhood.
pub fn sparse_cut_set(g: &Graph, target: usize) -> VertexSet {
    let nv = g.vertex_count();
    let target = target.min(nv);
    let mut s = VertexSet::empty(nv);
    if target == 0 {
        return s;
    }
    let start = (0..nv).min_by_key(|&v| (g.degree(v), v)).unwrap();
    s.insert(start);
    while s.len() < target {
        let frontier = g.ext_neighbourhood(&s);
        let pool = if frontier.is_empty() {
            s.complement()
        } else {
            frontier
        };
        let mut best = usize::MAX;
        let mut best_ext = usize::MAX;
        for c in pool.iter() {
            let mut grown = s.clone();
            grown.insert(c);
            let ext = g.ext_neighbourhood(&grown).len();
            if ext < best_ext {
                best = c;
                best_ext = ext;
            }
        }
        s.insert(best);
    }
    s
}

/// Adversary colouring strategies for sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Each edge blue or red by a fair coin keyed to (seed, edge).
    Random,
    /// Red blocks of capacity `n`, everything else blue.
    Extremal,
    /// First block from the greedy low-conductance set, the rest as in the
    /// extremal scheme over the remaining vertices.
    SparseCut,
}

impl Strategy {
    pub fn token(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Extremal => "extremal",
            Strategy::SparseCut => "sparse-cut",
        }
    }
}

/// Builds the adversary colouring of `g` for one strategy.  `n` is the red
/// block capacity, `seed` drives only the random strategy.
pub fn strategy_colouring(
    g: &Graph,
    strategy: Strategy,
    r: usize,
    n: usize,
    seed: u64,
) -> Result<ColouredGraph, RamseyError> {
    match strategy {
        Strategy::Random => {
            let coin = derive_seed(seed, 0x636f_6c6f);
            Ok(ColouredGraph::from_fn(g.clone(), |u, v| {
                if pair_bernoulli(coin, u, v, 0.5) {
                    Colour::Blue
                } else {
                    Colour::Red
                }
            }))
        }
        Strategy::Extremal => Ok(extremal_colouring(g.clone(), r, n)?.coloured),
        Strategy::SparseCut => {
            let nv = g.vertex_count();
            let first = sparse_cut_set(g, n.min(nv));
            let mut part_of = vec![usize::MAX; nv];
            for v in first.iter() {
                part_of[v] = 0;
            }
            let rest: Vec<usize> = (0..nv).filter(|&v| !first.contains(v)).collect();
            if r > 1 {
                let blocks = extremal_parts(rest.len(), r - 1, n)?;
                for (i, block) in blocks.iter().enumerate() {
                    for local in block.iter() {
                        part_of[rest[local]] = i + 1;
                    }
                }
            }
            Ok(ColouredGraph::from_fn(g.clone(), |u, v| {
                if part_of[u] != usize::MAX && part_of[u] == part_of[v] {
                    Colour::Red
                } else {
                    Colour::Blue
                }
            }))
        }
    }
}

/// Grid description for [`mc_sweep`]; parsed from JSON with an explicit
/// seed list so runs carry no implicit entropy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub r: usize,
    pub degree_bound: usize,
    /// Tree edge count for the red family.
    pub n_edges: usize,
    pub n_grid: Vec<usize>,
    pub p_grid: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    /// Family sample count above the enumeration cap.
    #[serde(default = "default_tree_samples")]
    pub tree_samples: usize,
    #[serde(default)]
    pub family_seed: u64,
    /// Set size for the per-colouring dichotomy rows; 0 skips them.
    #[serde(default)]
    pub weakly_m: usize,
    /// Wall-clock timings in the ms column; off keeps output bit-stable.
    #[serde(default)]
    pub wall_time: bool,
    #[serde(default)]
    pub placement_budget: Option<u64>,
    #[serde(default)]
    pub subset_budget: Option<u64>,
}

fn default_tree_samples() -> usize {
    8
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub r: usize,
    pub degree_bound: usize,
    pub n_edges: usize,
    pub n_vertices: usize,
    pub p: f64,
    pub seed: u64,
    pub strategy: String,
    pub verdict: String,
    pub witness_size: usize,
    pub ms: u64,
}

pub const SWEEP_CSV_HEADER: &str = "r,D,n,N,p,seed,strategy,verdict,witness_size,ms";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.r,
            self.degree_bound,
            self.n_edges,
            self.n_vertices,
            self.p,
            self.seed,
            self.strategy,
            self.verdict,
            self.witness_size,
            self.ms
        )
    }
}

/// Renders rows to CSV with the fixed header.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

fn timed<T>(wall: bool, f: impl FnOnce() -> T) -> (T, u64) {
    if wall {
        let t0 = Instant::now();
        let v = f();
        (v, t0.elapsed().as_millis() as u64)
    } else {
        (f(), 0)
    }
}

fn sweep_task(
    config: &SweepConfig,
    family: &TreeFamily,
    n_vertices: usize,
    p: f64,
    seed: u64,
) -> Vec<SweepRow> {
    let subset_cap = config.subset_budget.unwrap_or(DEFAULT_SUBSET_CAP);
    let ecfg = EmbedConfig {
        placement_budget: config
            .placement_budget
            .unwrap_or_else(|| EmbedConfig::default().placement_budget),
        ..EmbedConfig::default()
    };
    let base = |strategy: &str, verdict: String, witness: usize, ms: u64| SweepRow {
        r: config.r,
        degree_bound: config.degree_bound,
        n_edges: config.n_edges,
        n_vertices,
        p,
        seed,
        strategy: strategy.to_string(),
        verdict,
        witness_size: witness,
        ms,
    };
    let mut rows = Vec::new();
    let g = match sample_gnp(n_vertices, p, seed) {
        Ok(g) => g,
        Err(_) => {
            for strat in &config.strategies {
                rows.push(base(strat.token(), "error".into(), 0, 0));
                if config.weakly_m > 0 {
                    rows.push(base(
                        &format!("{}+weakly", strat.token()),
                        "error".into(),
                        0,
                        0,
                    ));
                }
            }
            return rows;
        }
    };
    for strat in &config.strategies {
        let cg = match strategy_colouring(&g, *strat, config.r, config.n_edges, seed) {
            Ok(cg) => cg,
            Err(_) => {
                rows.push(base(strat.token(), "error".into(), 0, 0));
                if config.weakly_m > 0 {
                    rows.push(base(
                        &format!("{}+weakly", strat.token()),
                        "error".into(),
                        0,
                        0,
                    ));
                }
                continue;
            }
        };
        let (res, ms) = timed(config.wall_time, || {
            let mut budget = Budget::new(subset_cap);
            check_colouring(&cg, config.r, family, &ecfg, &mut budget)
        });
        let (verdict, witness) = match res {
            Ok(v) => {
                let w = match &v {
                    ArrowVerdict::BlueClique { vertices } => vertices.len(),
                    ArrowVerdict::RedFamilyEmbedded { embeddings, .. } => embeddings.len(),
                    _ => 0,
                };
                (v.token().to_string(), w)
            }
            Err(_) => ("error".into(), 0),
        };
        rows.push(base(strat.token(), verdict, witness, ms));
        if config.weakly_m > 0 {
            let (res, ms) = timed(config.wall_time, || {
                let mut budget = Budget::new(subset_cap);
                let outcome = weakly_clique(
                    cg.red(),
                    config.n_edges,
                    config.weakly_m,
                    config.r,
                    config.degree_bound,
                    &mut budget,
                )?;
                match outcome {
                    WeaklyCliqueOutcome::Universality(cert) => {
                        Ok(("wc-universal".to_string(), cert.v_prime.len()))
                    }
                    WeaklyCliqueOutcome::BlueSets(sets) => {
                        let mut cb = Budget::new(subset_cap);
                        match canonical_clique(cg.blue(), &sets, &mut cb)? {
                            Some(tuple) => Ok(("wc-bluesets-clique".to_string(), tuple.len())),
                            None => Ok((
                                "wc-bluesets-open".to_string(),
                                config.weakly_m * (config.r + 1),
                            )),
                        }
                    }
                }
            });
            let (verdict, witness) = match res {
                Ok((v, w)) => (v, w),
                Err(RamseyError::BadInput(_)) => ("skipped".into(), 0),
                Err(_) => ("error".into(), 0),
            };
            rows.push(base(&format!("{}+weakly", strat.token()), verdict, witness, ms));
        }
    }
    rows
}

/// Runs the full grid: for every host size, density and seed, samples the
/// host once and scores every strategy's colouring, appending dichotomy
/// rows when `weakly_m` is set.
///
/// Tasks run in parallel with owned state; rows come back sorted by host
/// size, density, seed and strategy order, so output never depends on
/// scheduling.  Individual failures land in their row's verdict column as
/// `error` (or `skipped` when a precondition rules the operation out); the
/// sweep itself only fails on an unusable config.
pub fn mc_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, RamseyError> {
    if config.strategies.is_empty() || config.seeds.is_empty() {
        return Err(RamseyError::BadInput(
            "need at least one strategy and one seed".into(),
        ));
    }
    if config.n_grid.is_empty() || config.p_grid.is_empty() {
        return Err(RamseyError::BadInput("empty grid".into()));
    }
    for &p in &config.p_grid {
        if !(0.0..=1.0).contains(&p) {
            return Err(RamseyError::BadInput(format!("density {p} not in [0, 1]")));
        }
    }
    let family = tree_family(
        config.n_edges,
        config.degree_bound,
        config.tree_samples,
        config.family_seed,
    )?;
    let mut ns = config.n_grid.clone();
    ns.sort_unstable();
    let mut ps = config.p_grid.clone();
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    let mut tasks = Vec::new();
    for &n_vertices in &ns {
        for &p in &ps {
            for &seed in &seeds {
                tasks.push((n_vertices, p, seed));
            }
        }
    }
    let workers = std::thread::available_parallelism()
        .map(|v| v.get())
        .unwrap_or(1)
        .min(tasks.len())
        .max(1);
    let mut results: Vec<Option<Vec<SweepRow>>> = vec![None; tasks.len()];
    if workers == 1 {
        for (i, &(n_vertices, p, seed)) in tasks.iter().enumerate() {
            results[i] = Some(sweep_task(config, &family, n_vertices, p, seed));
        }
    } else {
        let family_ref = &family;
        let tasks_ref = &tasks;
        let collected: Vec<Vec<(usize, Vec<SweepRow>)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        let mut out = Vec::new();
                        for (i, &(n_vertices, p, seed)) in tasks_ref.iter().enumerate() {
                            if i % workers != w {
                                continue;
                            }
                            out.push((i, sweep_task(config, family_ref, n_vertices, p, seed)));
                        }
                        out
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        });
        for chunk in collected {
            for (i, rows) in chunk {
                results[i] = Some(rows);
            }
        }
    }
    Ok(results.into_iter().flat_map(|r| r.unwrap()).collect())
}
