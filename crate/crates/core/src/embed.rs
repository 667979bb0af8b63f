//! Incremental tree embeddings into expanding hosts.
//!
//! A partial embedding maps a connected subtree of a pattern tree injectively
//! into a host graph so that mapped tree edges land on host edges.  Around
//! that core type this module builds four embedding strategies:
//!
//! * goodness-guided leaf extension inside a certified bipartite host
//!   ([`extend_leaf`], [`embed_three_classes`]), where every accepted
//!   placement must keep the neighbourhood surplus invariant intact;
//! * a star finish via Hall's theorem ([`star_hall_embed`]) that attaches
//!   many pendant leaves to already-placed centres in one matching round;
//! * the combined pipeline [`embed_many_leaves`] for trees with a large leaf
//!   class: reserve host room by seeded sampling, clean the three working
//!   sets, grow the pruned tree class-by-class, then finish the reserved
//!   leaves through the star matching;
//! * an exact backtracking embedder [`haxell_embed`] whose exhausted runs are
//!   proofs of non-containment, plus [`embed_across_edge`] which splits a
//!   tree along a balanced edge and embeds the halves into two host parts
//!   joined by a bridge edge.
//!
//! All scans run under the caller's [`Budget`] and all candidate orders are
//! deterministic (ascending vertex id unless stated otherwise), so equal
//! inputs produce equal embeddings.

use std::fmt::Write as _;

use thiserror::Error;

use crate::bitset::VertexSet;
use crate::expander::{
    check_bip_expander, check_strong, check_weak, clean_three_hosts, BipartiteHost, ExpanderError,
};
use crate::graph::Graph;
use crate::matching::bipartite_demand_matching;
use crate::rng::{derive_seed, stream};
use crate::subsets::{sample_k_subset, scan_k_subsets, scan_subsets_up_to, Budget, Scan};
use crate::tree::{find_split_edge, Tree};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error(transparent)]
    Expander(#[from] ExpanderError),
    #[error("no unused candidate adjacent to host vertex {host_vertex}")]
    NoCandidate { host_vertex: usize },
    #[error("no placement restores goodness ({placements} placements tried)")]
    GoodnessUnrecoverable { placements: u64 },
    #[error("hypothesis broken: {0}")]
    HypothesisBroken(String),
    #[error("precondition rejected: {0}")]
    PreconditionRejected(String),
    #[error("reservoir sampling gave no usable set in {attempts} attempts")]
    SamplingExhausted { attempts: usize },
    #[error("placement budget exhausted after {placements} placements")]
    BudgetExhausted { placements: u64 },
    #[error("invalid move: {0}")]
    InvalidMove(String),
    #[error("side {side} of the split tree has no embedding into its part")]
    SideFailed { side: usize },
    #[error("bad embedding text: {0}")]
    Format(String),
}

/// Injective partial map from tree vertices to host vertices.
///
/// Invariants maintained by [`place`](Self::place) and
/// [`remove_leaf`](Self::remove_leaf): the embedded tree vertices form a
/// connected subtree, distinct tree vertices occupy distinct host vertices,
/// and every tree edge inside the embedded subtree lands on a host edge.
#[derive(Clone, Debug)]
pub struct PartialEmbedding<'a> {
    tree: &'a Tree,
    host: &'a Graph,
    image: Vec<Option<usize>>,
    preimage: Vec<Option<usize>>,
    used: VertexSet,
    domain: VertexSet,
}

impl<'a> PartialEmbedding<'a> {
    pub fn new(tree: &'a Tree, host: &'a Graph) -> Self {
        PartialEmbedding {
            tree,
            host,
            image: vec![None; tree.vertex_count()],
            preimage: vec![None; host.vertex_count()],
            used: VertexSet::empty(host.vertex_count()),
            domain: VertexSet::empty(tree.vertex_count()),
        }
    }

    pub fn tree(&self) -> &'a Tree {
        self.tree
    }

    pub fn host(&self) -> &'a Graph {
        self.host
    }

    pub fn image_of(&self, v: usize) -> Option<usize> {
        self.image.get(v).copied().flatten()
    }

    pub fn preimage_of(&self, h: usize) -> Option<usize> {
        self.preimage.get(h).copied().flatten()
    }

    /// Host vertices currently occupied.
    pub fn used(&self) -> &VertexSet {
        &self.used
    }

    /// Tree vertices currently embedded.
    pub fn domain(&self) -> &VertexSet {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.domain.len() == self.tree.vertex_count()
    }

    /// Embedded pairs `(tree_vertex, host_vertex)` sorted by tree vertex.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.domain
            .iter()
            .map(|v| (v, self.image[v].unwrap()))
            .collect()
    }

    fn tree_neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.tree
            .children(v)
            .iter()
            .copied()
            .chain(self.tree.parent(v))
    }

    /// Degree of `v` inside the embedded subtree.
    pub fn embedded_degree(&self, v: usize) -> usize {
        self.tree_neighbours(v)
            .filter(|&u| self.domain.contains(u))
            .count()
    }

    /// Embeds `v` at host vertex `h`.
    ///
    /// Unless the embedding is empty, `v` must have at least one embedded
    /// tree neighbour and all of them must sit on host neighbours of `h`,
    /// which keeps the domain connected and edge-preserving.
    pub fn place(&mut self, v: usize, h: usize) -> Result<(), EmbedError> {
        if v >= self.tree.vertex_count() {
            return Err(EmbedError::InvalidMove(format!("no tree vertex {v}")));
        }
        if h >= self.host.vertex_count() {
            return Err(EmbedError::InvalidMove(format!("no host vertex {h}")));
        }
        if self.domain.contains(v) {
            return Err(EmbedError::InvalidMove(format!(
                "tree vertex {v} is already embedded"
            )));
        }
        if self.used.contains(h) {
            return Err(EmbedError::InvalidMove(format!(
                "host vertex {h} is already used"
            )));
        }
        if !self.domain.is_empty() {
            let mut anchored = false;
            for u in self.tree_neighbours(v) {
                if let Some(img) = self.image_of(u) {
                    if !self.host.has_edge(img, h) {
                        return Err(EmbedError::InvalidMove(format!(
                            "tree edge ({u}, {v}) would map to the non-edge ({img}, {h})"
                        )));
                    }
                    anchored = true;
                }
            }
            if !anchored {
                return Err(EmbedError::InvalidMove(format!(
                    "tree vertex {v} has no embedded neighbour to attach to"
                )));
            }
        }
        self.image[v] = Some(h);
        self.preimage[h] = Some(v);
        self.domain.insert(v);
        self.used.insert(h);
        Ok(())
    }

    /// Removes `v`, which must be a leaf of the embedded subtree.
    pub fn remove_leaf(&mut self, v: usize) -> Result<(), EmbedError> {
        if v >= self.tree.vertex_count() || !self.domain.contains(v) {
            return Err(EmbedError::InvalidMove(format!(
                "tree vertex {v} is not embedded"
            )));
        }
        if self.embedded_degree(v) > 1 {
            return Err(EmbedError::InvalidMove(format!(
                "tree vertex {v} is interior to the embedded subtree"
            )));
        }
        let h = self.image[v].unwrap();
        self.image[v] = None;
        self.preimage[h] = None;
        self.domain.remove(v);
        self.used.remove(h);
        Ok(())
    }

    /// Serializes the embedded pairs with a header naming the inputs.
    pub fn to_text(&self, tree_file: &str, graph_file: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p embed {tree_file} {graph_file}");
        for (v, h) in self.pairs() {
            let _ = writeln!(out, "{v} {h}");
        }
        out
    }
}

/// Re-checks every invariant of `emb` from scratch; returns violations.
pub fn validate_embedding(emb: &PartialEmbedding<'_>) -> Vec<String> {
    let mut bad = Vec::new();
    let t = emb.tree();
    for v in 0..t.vertex_count() {
        match emb.image_of(v) {
            Some(h) => {
                if !emb.domain().contains(v) {
                    bad.push(format!("vertex {v} has an image but is not in the domain"));
                }
                if emb.preimage_of(h) != Some(v) {
                    bad.push(format!("image {h} of {v} does not point back"));
                }
                if !emb.used().contains(h) {
                    bad.push(format!("image {h} of {v} is not marked used"));
                }
            }
            None => {
                if emb.domain().contains(v) {
                    bad.push(format!("domain vertex {v} has no image"));
                }
            }
        }
    }
    for h in 0..emb.host().vertex_count() {
        if emb.used().contains(h) && emb.preimage_of(h).is_none() {
            bad.push(format!("used host vertex {h} has no preimage"));
        }
    }
    for (u, v) in t.edges() {
        if let (Some(a), Some(b)) = (emb.image_of(u), emb.image_of(v)) {
            if !emb.host().has_edge(a, b) {
                bad.push(format!("tree edge ({u}, {v}) maps to non-edge ({a}, {b})"));
            }
        }
    }
    if let Some(start) = emb.domain().first() {
        let mut seen = VertexSet::empty(t.vertex_count());
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(v) = stack.pop() {
            for u in t.children(v).iter().copied().chain(t.parent(v)) {
                if emb.domain().contains(u) && !seen.contains(u) {
                    seen.insert(u);
                    stack.push(u);
                }
            }
        }
        if seen.len() != emb.domain().len() {
            bad.push(format!(
                "domain is disconnected: component of {start} has {} of {} vertices",
                seen.len(),
                emb.domain().len()
            ));
        }
    }
    bad
}

/// Parses the output of [`PartialEmbedding::to_text`].
///
/// Returns the two header names and the pair list in file order.
pub fn pairs_from_text(text: &str) -> Result<(String, String, Vec<(usize, usize)>), EmbedError> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !crate::graph::is_comment_line(l));
    let header = lines
        .next()
        .ok_or_else(|| EmbedError::Format("empty input".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "p" || fields[1] != "embed" {
        return Err(EmbedError::Format(format!(
            "expected header 'p embed <tree> <graph>', got '{header}'"
        )));
    }
    let mut pairs = Vec::new();
    for line in lines {
        let nums: Vec<&str> = line.split_whitespace().collect();
        if nums.len() != 2 {
            return Err(EmbedError::Format(format!("bad pair line '{line}'")));
        }
        let v = nums[0]
            .parse::<usize>()
            .map_err(|e| EmbedError::Format(format!("bad tree vertex '{}': {e}", nums[0])))?;
        let h = nums[1]
            .parse::<usize>()
            .map_err(|e| EmbedError::Format(format!("bad host vertex '{}': {e}", nums[1])))?;
        pairs.push((v, h));
    }
    Ok((fields[2].to_string(), fields[3].to_string(), pairs))
}

/// Rebuilds a partial embedding from `(tree_vertex, host_vertex)` pairs.
///
/// Placement follows breadth-first order on the tree, so any pair list whose
/// tree vertices form a connected subtree replays cleanly; anything else is
/// rejected through the usual move validation.
pub fn apply_embedding_pairs<'a>(
    tree: &'a Tree,
    host: &'a Graph,
    pairs: &[(usize, usize)],
) -> Result<PartialEmbedding<'a>, EmbedError> {
    let mut target = vec![None; tree.vertex_count()];
    for &(v, h) in pairs {
        if v >= tree.vertex_count() {
            return Err(EmbedError::Format(format!("no tree vertex {v}")));
        }
        if target[v].is_some() {
            return Err(EmbedError::Format(format!("tree vertex {v} listed twice")));
        }
        target[v] = Some(h);
    }
    let mut emb = PartialEmbedding::new(tree, host);
    for &v in tree.bfs_order() {
        if let Some(h) = target[v] {
            emb.place(v, h)?;
        }
    }
    Ok(emb)
}

/// A partial embedding viewed against one bipartite host at scale `m`.
pub struct GoodState<'a, 'e> {
    pub embedding: &'e PartialEmbedding<'a>,
    pub parts: BipartiteHost,
    pub m: usize,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GoodnessVerdict {
    Certified,
    /// First set (by size, then lexicographic position) whose unused
    /// neighbourhood falls short of the surplus demanded of it.
    Violation {
        x: Vec<usize>,
        observed: usize,
        required: usize,
    },
}

impl GoodnessVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, GoodnessVerdict::Certified)
    }
}

/// Core goodness scan over one side pair of a bipartite host.
///
/// For every `X` inside `side_a` (then `side_b`) with `1 <= |X| <= m` the
/// unused neighbourhood on the opposite side must cover the demand: `d` for
/// each unoccupied vertex of `X` plus the remaining degree allowance of each
/// occupied one.
fn goodness_scan(
    emb: &PartialEmbedding<'_>,
    side_a: &VertexSet,
    side_b: &VertexSet,
    m: usize,
    d: usize,
    budget: &mut Budget,
) -> Result<GoodnessVerdict, ExpanderError> {
    let host = emb.host();
    let n = host.vertex_count();
    for (this, other) in [(side_a, side_b), (side_b, side_a)] {
        let domain = this.to_vec();
        let scan = scan_subsets_up_to(&domain, m, budget, |x| {
            let mut nb = VertexSet::empty(n);
            for &v in x {
                nb.union_with(host.neighbours(v));
            }
            nb.intersect_with(other);
            nb.subtract(emb.used());
            let observed = nb.len();
            let mut required = 0usize;
            for &v in x {
                if emb.used().contains(v) {
                    let tv = emb.preimage_of(v).unwrap();
                    required += d.saturating_sub(emb.embedded_degree(tv));
                } else {
                    required += d;
                }
            }
            if observed < required {
                Some(GoodnessVerdict::Violation {
                    x: x.to_vec(),
                    observed,
                    required,
                })
            } else {
                None
            }
        });
        match scan {
            Scan::Found(v) => return Ok(v),
            Scan::Exhausted => {}
            Scan::OutOfBudget => {
                return Err(ExpanderError::BudgetExceeded {
                    used: budget.used(),
                    cap: budget.cap(),
                })
            }
        }
    }
    Ok(GoodnessVerdict::Certified)
}

/// Checks whether the state's embedding leaves enough free expansion room.
pub fn is_m_good(
    state: &GoodState<'_, '_>,
    budget: &mut Budget,
) -> Result<GoodnessVerdict, ExpanderError> {
    goodness_scan(
        state.embedding,
        &state.parts.v1,
        &state.parts.v2,
        state.m,
        state.d,
        budget,
    )
}

/// Margin condition for single-leaf extension: every `X` in one side with
/// `m <= |X| <= 2m` keeps at least `2dm + 2` unused neighbours opposite.
///
/// Returns the first violating set, if any.
pub fn check_extension_margin(
    emb: &PartialEmbedding<'_>,
    side_a: &VertexSet,
    side_b: &VertexSet,
    m: usize,
    d: usize,
    budget: &mut Budget,
) -> Result<Option<Vec<usize>>, ExpanderError> {
    let host = emb.host();
    let n = host.vertex_count();
    let need = 2 * d * m + 2;
    for (this, other) in [(side_a, side_b), (side_b, side_a)] {
        let domain = this.to_vec();
        for size in m..=(2 * m).min(domain.len()) {
            let scan = scan_k_subsets(&domain, size, budget, |x| {
                let mut nb = VertexSet::empty(n);
                for &v in x {
                    nb.union_with(host.neighbours(v));
                }
                nb.intersect_with(other);
                nb.subtract(emb.used());
                if nb.len() < need {
                    Some(x.to_vec())
                } else {
                    None
                }
            });
            match scan {
                Scan::Found(x) => return Ok(Some(x)),
                Scan::Exhausted => {}
                Scan::OutOfBudget => {
                    return Err(ExpanderError::BudgetExceeded {
                        used: budget.used(),
                        cap: budget.cap(),
                    })
                }
            }
        }
    }
    Ok(None)
}

/// Tuning knobs shared by the embedding drivers.
#[derive(Clone, Debug)]
pub struct EmbedConfig {
    /// Cap on individual vertex placements, including retracted ones.
    pub placement_budget: u64,
    /// Attempts at drawing an acceptable reservoir before giving up.
    pub w_retry_cap: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            placement_budget: 100_000,
            w_retry_cap: 64,
        }
    }
}

/// Attaches `new_leaf` next to its embedded tree neighbour `parent`,
/// keeping the embedding good at scale `m`.
///
/// The margin condition is checked first; a failure there means the host no
/// longer supports the extension argument and surfaces as
/// [`EmbedError::HypothesisBroken`].  Candidates are the unused host
/// neighbours of `parent`'s image on the opposite side, ascending; the first
/// one that restores goodness wins.  This routine never retracts previously
/// placed vertices; drivers that need backtracking implement it on top.
pub fn extend_leaf(
    emb: &mut PartialEmbedding<'_>,
    parts: &BipartiteHost,
    m: usize,
    d: usize,
    parent: usize,
    new_leaf: usize,
    budget: &mut Budget,
) -> Result<usize, EmbedError> {
    if !emb.domain().contains(parent) {
        return Err(EmbedError::InvalidMove(format!(
            "parent {parent} is not embedded"
        )));
    }
    if emb.domain().contains(new_leaf) {
        return Err(EmbedError::InvalidMove(format!(
            "leaf {new_leaf} is already embedded"
        )));
    }
    if !emb.tree_neighbours(new_leaf).any(|u| u == parent) {
        return Err(EmbedError::InvalidMove(format!(
            "({parent}, {new_leaf}) is not a tree edge"
        )));
    }
    if emb.embedded_degree(parent) >= d {
        return Err(EmbedError::InvalidMove(format!(
            "parent {parent} already has {d} embedded neighbours"
        )));
    }
    if let Some(x) = check_extension_margin(emb, &parts.v1, &parts.v2, m, d, budget)? {
        return Err(EmbedError::HypothesisBroken(format!(
            "extension margin fails at X = {x:?}"
        )));
    }
    let img = emb.image_of(parent).unwrap();
    let target = if parts.v1.contains(img) {
        &parts.v2
    } else if parts.v2.contains(img) {
        &parts.v1
    } else {
        return Err(EmbedError::InvalidMove(format!(
            "image {img} of parent {parent} lies outside the host parts"
        )));
    };
    let mut cands = emb.host().neighbours(img).intersection(target);
    cands.subtract(emb.used());
    if cands.is_empty() {
        return Err(EmbedError::NoCandidate { host_vertex: img });
    }
    let mut placements = 0u64;
    for h in cands.iter() {
        placements += 1;
        emb.place(new_leaf, h)?;
        if goodness_scan(emb, &parts.v1, &parts.v2, m, d, budget)?.is_certified() {
            return Ok(h);
        }
        emb.remove_leaf(new_leaf)?;
    }
    Err(EmbedError::GoodnessUnrecoverable { placements })
}

struct Frame {
    cands: Vec<usize>,
    next: usize,
}

/// Grows the kept part of `t` into three host sets with backtracking.
///
/// `class_of[v]` selects the target set (1, 2 or 3) for each kept tree
/// vertex.  A placement is accepted only if the embedding stays good at
/// scale `m` in all three bipartite views (set 1 against 3, set 2 against 3,
/// and their union against 3); before each new vertex the extension margin
/// is checked in the view matching its class.
#[allow(clippy::too_many_arguments)]
fn grow_in_hosts<'a>(
    t: &'a Tree,
    host: &'a Graph,
    keep: &VertexSet,
    class_of: &[u8],
    v1: &VertexSet,
    v2: &VertexSet,
    v3: &VertexSet,
    m: usize,
    d: usize,
    cfg: &EmbedConfig,
    budget: &mut Budget,
) -> Result<(PartialEmbedding<'a>, u64), EmbedError> {
    let union12 = v1.union(v2);
    let order: Vec<usize> = t
        .bfs_order()
        .iter()
        .copied()
        .filter(|&v| keep.contains(v))
        .collect();
    let mut emb = PartialEmbedding::new(t, host);
    let mut frames: Vec<Frame> = Vec::new();
    let mut placements = 0u64;
    let mut i = 0usize;
    let target = |c: u8| -> &VertexSet {
        match c {
            1 => v1,
            2 => v2,
            _ => v3,
        }
    };
    while i < order.len() {
        let v = order[i];
        let class = class_of[v];
        if frames.len() == i {
            if i > 0 {
                let (sa, sb) = match class {
                    1 => (v1, v3),
                    2 => (v2, v3),
                    _ => (&union12, v3),
                };
                if let Some(x) = check_extension_margin(&emb, sa, sb, m, d, budget)? {
                    return Err(EmbedError::HypothesisBroken(format!(
                        "extension margin fails at X = {x:?} before vertex {v}"
                    )));
                }
            }
            let cands: Vec<usize> = if i == 0 {
                target(class).to_vec()
            } else {
                let p = t.parent(v).expect("non-root kept vertex has a parent");
                let img = emb
                    .image_of(p)
                    .expect("parents precede children in the kept order");
                let mut c = host.neighbours(img).intersection(target(class));
                c.subtract(emb.used());
                c.to_vec()
            };
            frames.push(Frame { cands, next: 0 });
        }
        let mut advanced = false;
        while frames[i].next < frames[i].cands.len() {
            let h = frames[i].cands[frames[i].next];
            frames[i].next += 1;
            placements += 1;
            if placements > cfg.placement_budget {
                return Err(EmbedError::BudgetExhausted { placements });
            }
            emb.place(v, h)?;
            let ok = goodness_scan(&emb, &union12, v3, m, d, budget)?.is_certified()
                && goodness_scan(&emb, v1, v3, m, d, budget)?.is_certified()
                && goodness_scan(&emb, v2, v3, m, d, budget)?.is_certified();
            if ok {
                advanced = true;
                break;
            }
            emb.remove_leaf(v)?;
        }
        if advanced {
            i += 1;
            continue;
        }
        frames.pop();
        if i == 0 {
            return Err(EmbedError::GoodnessUnrecoverable { placements });
        }
        i -= 1;
        emb.remove_leaf(order[i])?;
    }
    debug_assert!(validate_embedding(&emb).is_empty());
    Ok((emb, placements))
}

/// Embeds all of `t` with each class landing in its own host set.
///
/// `u1`, `u2`, `u3` must partition the tree's vertices with `u1 + u2` and
/// `u3` equal to the two proper 2-colouring classes, so every tree edge runs
/// between `u3` and the rest.  The three bipartite views of the host sets
/// must certify as expanders at scale `(m, d)` and each `v_i` must exceed
/// `u_i` by at least `3dm` vertices; the grower then maintains goodness in
/// all three views at every step.
#[allow(clippy::too_many_arguments)]
pub fn embed_three_classes<'a>(
    t: &'a Tree,
    u1: &VertexSet,
    u2: &VertexSet,
    u3: &VertexSet,
    host: &'a Graph,
    v1: &VertexSet,
    v2: &VertexSet,
    v3: &VertexSet,
    m: usize,
    d: usize,
    cfg: &EmbedConfig,
    budget: &mut Budget,
) -> Result<PartialEmbedding<'a>, EmbedError> {
    if m == 0 || d == 0 {
        return Err(EmbedError::PreconditionRejected(
            "scale m and degree bound d must be positive".into(),
        ));
    }
    if t.max_degree() > d {
        return Err(EmbedError::PreconditionRejected(format!(
            "tree degree {} exceeds bound {d}",
            t.max_degree()
        )));
    }
    let nt = t.vertex_count();
    if !u1.is_disjoint(u2) || !u1.is_disjoint(u3) || !u2.is_disjoint(u3) {
        return Err(EmbedError::PreconditionRejected(
            "tree classes overlap".into(),
        ));
    }
    let u12 = u1.union(u2);
    if u12.union(u3) != VertexSet::full(nt) {
        return Err(EmbedError::PreconditionRejected(
            "tree classes do not cover the tree".into(),
        ));
    }
    let (c1, c2) = t.colour_classes();
    if !((u12 == c1 && *u3 == c2) || (u12 == c2 && *u3 == c1)) {
        return Err(EmbedError::PreconditionRejected(
            "classes must refine the proper 2-colouring of the tree".into(),
        ));
    }
    if !v1.is_disjoint(v2) || !v1.is_disjoint(v3) || !v2.is_disjoint(v3) {
        return Err(EmbedError::PreconditionRejected("host sets overlap".into()));
    }
    for (i, (vs, us)) in [(v1, u1), (v2, u2), (v3, u3)].into_iter().enumerate() {
        if vs.len() < us.len() + 3 * d * m {
            return Err(EmbedError::HypothesisBroken(format!(
                "host set {} has {} vertices, needs at least {}",
                i + 1,
                vs.len(),
                us.len() + 3 * d * m
            )));
        }
    }
    let union12 = v1.union(v2);
    for (label, a, b) in [
        ("(V1+V2, V3)", &union12, v3),
        ("(V1, V3)", v1, v3),
        ("(V2, V3)", v2, v3),
    ] {
        let pair = BipartiteHost::new(a.clone(), b.clone())?;
        let verdict = check_bip_expander(host, &pair, m, d, budget)?;
        if !verdict.is_certified() {
            return Err(EmbedError::HypothesisBroken(format!(
                "host view {label} fails expansion: {}",
                verdict.to_record()
            )));
        }
    }
    let mut class_of = vec![0u8; nt];
    for v in u1.iter() {
        class_of[v] = 1;
    }
    for v in u2.iter() {
        class_of[v] = 2;
    }
    for v in u3.iter() {
        class_of[v] = 3;
    }
    let keep = VertexSet::full(nt);
    let (emb, _) = grow_in_hosts(t, host, &keep, &class_of, v1, v2, v3, m, d, cfg, budget)?;
    debug_assert!(emb.is_complete());
    Ok(emb)
}

/// Stars to attach: `centers[i]` is an occupied host vertex that needs
/// `demands[i]` fresh pendant leaves.
#[derive(Clone, Debug)]
pub struct StarRequest {
    pub centers: Vec<usize>,
    pub demands: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StarHallOutcome {
    /// `leaves[i]` lists the host vertices assigned to `centers[i]`.
    Assignment(Vec<Vec<usize>>),
    /// Centre set whose pooled neighbourhood cannot cover its total demand.
    Violator(Vec<usize>),
}

/// Packs vertex-disjoint stars into `pool`, or exhibits a Hall violator.
///
/// Total: every input either yields an assignment (centre `i` receives
/// `demands[i]` distinct pool vertices adjacent to it, all assignments
/// disjoint) or a set of centres whose combined pool neighbourhood is
/// smaller than their combined demand.
pub fn star_hall_embed(
    host: &Graph,
    req: &StarRequest,
    pool: &VertexSet,
) -> Result<StarHallOutcome, EmbedError> {
    if req.centers.len() != req.demands.len() {
        return Err(EmbedError::PreconditionRejected(format!(
            "{} centers with {} demands",
            req.centers.len(),
            req.demands.len()
        )));
    }
    let n = host.vertex_count();
    let mut seen = VertexSet::empty(n);
    for &c in &req.centers {
        if c >= n {
            return Err(EmbedError::PreconditionRejected(format!(
                "no host vertex {c}"
            )));
        }
        if seen.contains(c) {
            return Err(EmbedError::PreconditionRejected(format!(
                "centre {c} listed twice"
            )));
        }
        seen.insert(c);
    }
    let pool_ids = pool.to_vec();
    let mut pool_index = vec![usize::MAX; n];
    for (i, &p) in pool_ids.iter().enumerate() {
        pool_index[p] = i;
    }
    let neigh: Vec<Vec<usize>> = req
        .centers
        .iter()
        .map(|&c| {
            host.neighbours(c)
                .intersection(pool)
                .iter()
                .map(|p| pool_index[p])
                .collect()
        })
        .collect();
    match bipartite_demand_matching(&neigh, &req.demands, pool_ids.len()) {
        Ok(assign) => Ok(StarHallOutcome::Assignment(
            assign
                .into_iter()
                .map(|rights| rights.into_iter().map(|r| pool_ids[r]).collect())
                .collect(),
        )),
        Err(stations) => {
            #[cfg(debug_assertions)]
            {
                let mut union = VertexSet::empty(pool_ids.len().max(1));
                let mut demand = 0usize;
                for &s in &stations {
                    demand += req.demands[s];
                    for &r in &neigh[s] {
                        union.insert(r);
                    }
                }
                debug_assert!(union.len() < demand, "violator is not deficient");
            }
            let mut centres: Vec<usize> = stations.iter().map(|&s| req.centers[s]).collect();
            centres.sort_unstable();
            Ok(StarHallOutcome::Violator(centres))
        }
    }
}

/// Result of [`embed_many_leaves`]: the full embedding plus run diagnostics.
#[derive(Debug)]
pub struct ManyLeavesEmbedding<'a> {
    pub embedding: PartialEmbedding<'a>,
    /// Reservoir draws consumed until one passed its non-neighbour check.
    pub sampling_attempts: usize,
    /// Asymptotic side conditions that do not hold at this instance size.
    pub warnings: Vec<String>,
}

/// Embeds a tree with a large leaf class into a doubly weak expander.
///
/// Writing `n` for the host order, the host must certify as a weak
/// `(m1, n/32d)`- and a weak `(m2, m2)`-expander and the tree must fit in
/// `n - m1` vertices while carrying at least `24 d m2` non-root leaves.  The
/// routine sets aside the `12 d m2` smallest leaves of the larger leaf
/// class, grows the remaining tree through three cleaned host sets at scale
/// `m2`, and attaches the reserved leaves in one star-matching round.  The
/// reservoir for the parents' host set is drawn from a stream derived from
/// `seed`, so runs are reproducible.
#[allow(clippy::too_many_arguments)]
pub fn embed_many_leaves<'a>(
    host: &'a Graph,
    t: &'a Tree,
    m1: usize,
    m2: usize,
    d: usize,
    seed: u64,
    cfg: &EmbedConfig,
    budget: &mut Budget,
) -> Result<ManyLeavesEmbedding<'a>, EmbedError> {
    let n = host.vertex_count();
    if m1 == 0 || m2 == 0 || d == 0 {
        return Err(EmbedError::PreconditionRejected(
            "m1, m2 and d must be positive".into(),
        ));
    }
    if t.max_degree() > d {
        return Err(EmbedError::PreconditionRejected(format!(
            "tree degree {} exceeds bound {d}",
            t.max_degree()
        )));
    }
    if t.vertex_count() + m1 > n {
        return Err(EmbedError::PreconditionRejected(format!(
            "tree needs {} vertices plus {m1} spare, host has {n}",
            t.vertex_count()
        )));
    }
    if 16 * d * m2 > n {
        return Err(EmbedError::PreconditionRejected(format!(
            "host order {n} is below 16*d*m2 = {}",
            16 * d * m2
        )));
    }
    let root = t.root();
    let leaves: Vec<usize> = t.leaves().into_iter().filter(|&v| v != root).collect();
    if leaves.len() < 24 * d * m2 {
        return Err(EmbedError::PreconditionRejected(format!(
            "{} usable leaves, need at least {}",
            leaves.len(),
            24 * d * m2
        )));
    }
    let all = host.vertices();
    let w_scale = (n / (32 * d)).max(1);
    let weak1 = check_weak(host, &all, m1, w_scale, budget)?;
    if !weak1.is_certified() {
        return Err(EmbedError::PreconditionRejected(format!(
            "host fails weak ({m1}, {w_scale}) expansion: {}",
            weak1.to_record()
        )));
    }
    let weak2 = check_weak(host, &all, m2, m2, budget)?;
    if !weak2.is_certified() {
        return Err(EmbedError::PreconditionRejected(format!(
            "host fails weak ({m2}, {m2}) expansion: {}",
            weak2.to_record()
        )));
    }
    let mut warnings = Vec::new();
    if 6.0 * m1 as f64 * (n as f64).ln() >= m2 as f64 {
        warnings.push(format!(
            "asymptotic side condition 6*m1*ln(n) < m2 fails ({:.1} vs {m2})",
            6.0 * m1 as f64 * (n as f64).ln()
        ));
    }

    let leaf_colour = {
        let ones = leaves.iter().filter(|&&v| t.colour_of(v) == 1).count();
        if ones > leaves.len() - ones {
            1
        } else {
            2
        }
    };
    let l_set = VertexSet::from_iter(
        t.vertex_count(),
        leaves
            .iter()
            .copied()
            .filter(|&v| t.colour_of(v) == leaf_colour)
            .take(12 * d * m2),
    );
    let mut u1 = VertexSet::empty(t.vertex_count());
    for v in l_set.iter() {
        u1.insert(t.parent(v).expect("reserved leaves are not the root"));
    }
    if u1.len() < 12 * m2 {
        return Err(EmbedError::HypothesisBroken(format!(
            "only {} parents over {} reserved leaves",
            u1.len(),
            l_set.len()
        )));
    }
    let parent_colour = 3 - leaf_colour;
    let mut u2 = VertexSet::empty(t.vertex_count());
    let mut u3 = VertexSet::empty(t.vertex_count());
    for v in 0..t.vertex_count() {
        if l_set.contains(v) || u1.contains(v) {
            continue;
        }
        if t.colour_of(v) == parent_colour {
            u2.insert(v);
        } else {
            u3.insert(v);
        }
    }

    let all_ids = all.to_vec();
    let r = u1.len() + 4 * d * m2;
    let mut rng = stream(derive_seed(seed, 1));
    let mut accepted = None;
    let mut attempts = 0usize;
    while attempts < cfg.w_retry_cap && accepted.is_none() {
        attempts += 1;
        let w = VertexSet::from_iter(n, sample_k_subset(&mut rng, &all_ids, r));
        let scan = scan_k_subsets(&all_ids, m1, budget, |x| {
            // Reject the draw if some m1-set sees m2 of its vertices
            // without any neighbour among them.
            let mut nb = VertexSet::empty(n);
            for &v in x {
                nb.union_with(host.neighbours(v));
            }
            let mut uncovered = w.difference(&nb);
            for &v in x {
                uncovered.remove(v);
            }
            if uncovered.len() >= m2 {
                Some(())
            } else {
                None
            }
        });
        match scan {
            Scan::Found(()) => continue,
            Scan::Exhausted => accepted = Some(w),
            Scan::OutOfBudget => {
                return Err(EmbedError::Expander(ExpanderError::BudgetExceeded {
                    used: budget.used(),
                    cap: budget.cap(),
                }))
            }
        }
    }
    let w1 = accepted.ok_or(EmbedError::SamplingExhausted { attempts })?;

    let free = all.difference(&w1).to_vec();
    let need2 = u2.len() + 4 * d * m2;
    let need3 = u3.len() + 4 * d * m2;
    if free.len() < need2 + need3 {
        return Err(EmbedError::HypothesisBroken(format!(
            "only {} host vertices remain for working sets of {need2} and {need3}",
            free.len()
        )));
    }
    let w2 = VertexSet::from_iter(n, free[..need2].iter().copied());
    let w3 = VertexSet::from_iter(n, free[need2..need2 + need3].iter().copied());

    let cleaned = clean_three_hosts(host, &w1, &w2, &w3, m2, d, budget)?;
    for (i, (vs, us)) in [(&cleaned.v1, &u1), (&cleaned.v2, &u2), (&cleaned.v3, &u3)]
        .into_iter()
        .enumerate()
    {
        if vs.len() < us.len() + 3 * d * m2 {
            return Err(EmbedError::HypothesisBroken(format!(
                "cleaned host set {} has {} vertices, needs {}",
                i + 1,
                vs.len(),
                us.len() + 3 * d * m2
            )));
        }
    }

    let mut class_of = vec![0u8; t.vertex_count()];
    for v in u1.iter() {
        class_of[v] = 1;
    }
    for v in u2.iter() {
        class_of[v] = 2;
    }
    for v in u3.iter() {
        class_of[v] = 3;
    }
    let keep = VertexSet::full(t.vertex_count()).difference(&l_set);
    let (mut emb, _) = grow_in_hosts(
        t,
        host,
        &keep,
        &class_of,
        &cleaned.v1,
        &cleaned.v2,
        &cleaned.v3,
        m2,
        d,
        cfg,
        budget,
    )?;

    let parents = u1.to_vec();
    let mut leaves_of: Vec<Vec<usize>> = Vec::with_capacity(parents.len());
    for &p in &parents {
        let mut ls: Vec<usize> = t
            .children(p)
            .iter()
            .copied()
            .filter(|&c| l_set.contains(c))
            .collect();
        ls.sort_unstable();
        leaves_of.push(ls);
    }
    let req = StarRequest {
        centers: parents.iter().map(|&p| emb.image_of(p).unwrap()).collect(),
        demands: leaves_of.iter().map(Vec::len).collect(),
    };
    let pool = all.difference(emb.used());
    match star_hall_embed(host, &req, &pool)? {
        StarHallOutcome::Assignment(assign) => {
            for (i, hosts) in assign.into_iter().enumerate() {
                for (&leaf, h) in leaves_of[i].iter().zip(hosts) {
                    emb.place(leaf, h)?;
                }
            }
        }
        StarHallOutcome::Violator(centres) => {
            return Err(EmbedError::HypothesisBroken(format!(
                "reserved leaves admit no star packing; violating centres {centres:?}"
            )));
        }
    }
    debug_assert!(emb.is_complete());
    debug_assert!(validate_embedding(&emb).is_empty());
    Ok(ManyLeavesEmbedding {
        embedding: emb,
        sampling_attempts: attempts,
        warnings,
    })
}

/// Outcome of one exact embedding search.
pub struct HaxellReport<'a> {
    pub embedding: Option<PartialEmbedding<'a>>,
    /// Result of the optional sufficient-condition certificate.
    pub conditions_certified: Option<bool>,
    /// Vertex placements performed, including retracted ones.
    pub placements: u64,
    /// True when the search space was exhausted without an embedding, which
    /// proves the host contains no copy of the tree under the given pin.
    pub exhausted: bool,
}

/// Certifies the neighbourhood conditions that guarantee containment of
/// every `t_count`-vertex tree with maximum degree at most `d`: sets of
/// size up to `m` expand to `d|X| + 1` and sets of size `m+1..=2m` expand
/// to `t_count + d|X| + 1`.
pub fn haxell_conditions(
    g: &Graph,
    t_count: usize,
    m: usize,
    d: usize,
    budget: &mut Budget,
) -> Result<bool, ExpanderError> {
    let all = g.vertices();
    if !check_strong(g, &all, m, d, budget)?.is_certified() {
        return Ok(false);
    }
    let n = g.vertex_count();
    let ids = all.to_vec();
    for size in (m + 1)..=(2 * m).min(n) {
        let scan = scan_k_subsets(&ids, size, budget, |x| {
            let mut nb = VertexSet::empty(n);
            for &v in x {
                nb.union_with(g.neighbours(v));
            }
            for &v in x {
                nb.remove(v);
            }
            if nb.len() < t_count + d * size + 1 {
                Some(())
            } else {
                None
            }
        });
        match scan {
            Scan::Found(()) => return Ok(false),
            Scan::Exhausted => {}
            Scan::OutOfBudget => {
                return Err(ExpanderError::BudgetExceeded {
                    used: budget.used(),
                    cap: budget.cap(),
                })
            }
        }
    }
    Ok(true)
}

/// Exact tree containment by chronological backtracking.
///
/// `pin` fixes one tree vertex onto one host vertex before the search.  The
/// tree is traversed from the pinned vertex (or its own root) in
/// breadth-first order; candidates for each vertex are the unused host
/// neighbours of the parent's image, fewest unused neighbours first.  With
/// `certify_m` set, the sufficient conditions at that scale are checked
/// first and reported, but the search runs either way.  An exhausted search
/// is a proof that no embedding with the given pin exists.
pub fn haxell_embed<'a>(
    g: &'a Graph,
    t: &'a Tree,
    pin: Option<(usize, usize)>,
    certify_m: Option<usize>,
    cfg: &EmbedConfig,
    budget: &mut Budget,
) -> Result<HaxellReport<'a>, EmbedError> {
    let n = g.vertex_count();
    let tc = t.vertex_count();
    if let Some((tv, hv)) = pin {
        if tv >= tc {
            return Err(EmbedError::PreconditionRejected(format!(
                "pinned tree vertex {tv} does not exist"
            )));
        }
        if hv >= n {
            return Err(EmbedError::PreconditionRejected(format!(
                "pinned host vertex {hv} does not exist"
            )));
        }
    }
    let d = t.max_degree().max(1);
    let conditions_certified = match certify_m {
        Some(m) => Some(haxell_conditions(g, tc, m, d, budget)?),
        None => None,
    };
    if tc > n {
        return Ok(HaxellReport {
            embedding: None,
            conditions_certified,
            placements: 0,
            exhausted: true,
        });
    }
    let rooted_storage;
    let rooted: &Tree = match pin {
        Some((tv, _)) => {
            rooted_storage = t.rerooted(tv);
            &rooted_storage
        }
        None => t,
    };
    let order = rooted.bfs_order();
    let mut emb = PartialEmbedding::new(t, g);
    let mut frames: Vec<Frame> = Vec::new();
    let mut placements = 0u64;
    let mut i = 0usize;
    loop {
        if i == order.len() {
            debug_assert!(validate_embedding(&emb).is_empty());
            return Ok(HaxellReport {
                embedding: Some(emb),
                conditions_certified,
                placements,
                exhausted: false,
            });
        }
        let v = order[i];
        if frames.len() == i {
            let mut cands: Vec<usize> = if i == 0 {
                match pin {
                    Some((_, hv)) => vec![hv],
                    None => (0..n).collect(),
                }
            } else {
                let p = rooted.parent(v).unwrap();
                let img = emb.image_of(p).unwrap();
                g.neighbours(img).difference(emb.used()).to_vec()
            };
            cands.sort_by_key(|&h| {
                (
                    g.degree(h) - g.neighbours(h).intersection_len(emb.used()),
                    h,
                )
            });
            frames.push(Frame { cands, next: 0 });
        }
        let mut advanced = false;
        while frames[i].next < frames[i].cands.len() {
            let h = frames[i].cands[frames[i].next];
            frames[i].next += 1;
            placements += 1;
            if placements > cfg.placement_budget {
                return Err(EmbedError::BudgetExhausted { placements });
            }
            emb.place(v, h)?;
            advanced = true;
            break;
        }
        if advanced {
            i += 1;
            continue;
        }
        frames.pop();
        if i == 0 {
            return Ok(HaxellReport {
                embedding: None,
                conditions_certified,
                placements,
                exhausted: true,
            });
        }
        i -= 1;
        emb.remove_leaf(order[i])?;
    }
}

/// Embedding of a split tree across a bridge edge, with the per-side
/// certification results when they were requested.
#[derive(Debug)]
pub struct BridgeEmbedding<'a> {
    pub embedding: PartialEmbedding<'a>,
    pub side_certified: [Option<bool>; 2],
}

fn extract_side(t: &Tree, side: &VertexSet) -> (Tree, Vec<usize>) {
    let ids = side.to_vec();
    if ids.len() == 1 {
        return (Tree::single(), ids);
    }
    let mut local = vec![usize::MAX; t.vertex_count()];
    for (i, &v) in ids.iter().enumerate() {
        local[v] = i;
    }
    let edges: Vec<(usize, usize)> = t
        .edges()
        .into_iter()
        .filter(|&(a, b)| side.contains(a) && side.contains(b))
        .map(|(a, b)| (local[a], local[b]))
        .collect();
    let sub = Tree::from_edges(ids.len(), edges).expect("a split side is a tree");
    (sub, ids)
}

/// Splits `t` along a balanced edge and embeds one half into each of two
/// disjoint host parts, matching the split edge onto the `bridge` edge.
///
/// The split edge `(u, v)` found for degree bound `d` leaves both sides
/// with at least a `1/d` fraction of the tree; the side containing `u` is
/// embedded into `vi` pinned at `bridge.0`, the other side into `vj` pinned
/// at `bridge.1`, each by exact search on the induced host part.
/// `certify_m` is forwarded to both side searches.
#[allow(clippy::too_many_arguments)]
pub fn embed_across_edge<'a>(
    g: &'a Graph,
    vi: &VertexSet,
    vj: &VertexSet,
    bridge: (usize, usize),
    t: &'a Tree,
    d: usize,
    certify_m: Option<usize>,
    cfg: &EmbedConfig,
    budget: &mut Budget,
) -> Result<BridgeEmbedding<'a>, EmbedError> {
    let (b1, b2) = bridge;
    if !vi.contains(b1) || !vj.contains(b2) {
        return Err(EmbedError::PreconditionRejected(format!(
            "bridge ({b1}, {b2}) does not join the two parts"
        )));
    }
    if !vi.is_disjoint(vj) {
        return Err(EmbedError::PreconditionRejected(
            "host parts overlap".into(),
        ));
    }
    if !g.has_edge(b1, b2) {
        return Err(EmbedError::PreconditionRejected(format!(
            "({b1}, {b2}) is not a host edge"
        )));
    }
    let split = find_split_edge(t, d).map_err(|e| EmbedError::PreconditionRejected(e.to_string()))?;
    let child = if t.parent(split.v) == Some(split.u) {
        split.v
    } else {
        split.u
    };
    let child_side = t.subtree_vertices(child);
    let other_side = VertexSet::full(t.vertex_count()).difference(&child_side);
    let (side_u, side_v) = if child == split.u {
        (child_side, other_side)
    } else {
        (other_side, child_side)
    };

    let mut image = vec![usize::MAX; t.vertex_count()];
    let mut side_certified = [None, None];
    let jobs = [
        (&side_u, split.u, vi, b1),
        (&side_v, split.v, vj, b2),
    ];
    for (idx, (side, anchor_tree, part, anchor_host)) in jobs.into_iter().enumerate() {
        let (sub, ids) = extract_side(t, side);
        let local_anchor = ids
            .binary_search(&anchor_tree)
            .expect("anchor lies on its own side");
        let (hg, hmap) = g.induced(part);
        let local_pin = hmap
            .binary_search(&anchor_host)
            .expect("anchor host vertex lies in its part");
        let report = haxell_embed(
            &hg,
            &sub,
            Some((local_anchor, local_pin)),
            certify_m,
            cfg,
            budget,
        )?;
        side_certified[idx] = report.conditions_certified;
        let emb = match report.embedding {
            Some(e) => e,
            None => return Err(EmbedError::SideFailed { side: idx + 1 }),
        };
        for (tv, hv) in emb.pairs() {
            image[ids[tv]] = hmap[hv];
        }
    }

    let mut emb = PartialEmbedding::new(t, g);
    for &v in t.bfs_order() {
        emb.place(v, image[v])
            .map_err(|e| EmbedError::InvalidMove(format!("merge failed: {e}")))?;
    }
    debug_assert!(emb.is_complete());
    debug_assert!(validate_embedding(&emb).is_empty());
    Ok(BridgeEmbedding {
        embedding: emb,
        side_certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sample_gnp;
    use crate::subsets::DEFAULT_SUBSET_CAP;

    fn budget() -> Budget {
        Budget::new(DEFAULT_SUBSET_CAP)
    }

    fn complete(n: usize) -> Graph {
        Graph::complete(n).unwrap()
    }

    fn complete_bipartite(a: usize, b: usize) -> (Graph, VertexSet, VertexSet) {
        let mut g = Graph::new(a + b).unwrap();
        for u in 0..a {
            for v in a..(a + b) {
                g.add_edge(u, v).unwrap();
            }
        }
        let left = VertexSet::from_iter(a + b, 0..a);
        let right = VertexSet::from_iter(a + b, a..(a + b));
        (g, left, right)
    }

    #[test]
    fn place_and_remove_respect_invariants() {
        let t = Tree::path(2);
        let g = complete(5);
        let mut emb = PartialEmbedding::new(&t, &g);
        emb.place(1, 2).unwrap();
        assert!(matches!(emb.place(1, 3), Err(EmbedError::InvalidMove(_))));
        assert!(matches!(emb.place(0, 2), Err(EmbedError::InvalidMove(_))));
        emb.place(0, 0).unwrap();
        emb.place(2, 4).unwrap();
        assert!(emb.is_complete());
        assert!(matches!(emb.remove_leaf(1), Err(EmbedError::InvalidMove(_))));
        emb.remove_leaf(2).unwrap();
        assert_eq!(emb.pairs(), vec![(0, 0), (1, 2)]);
        assert!(validate_embedding(&emb).is_empty());
    }

    #[test]
    fn place_rejects_detached_vertices() {
        let t = Tree::path(3);
        let g = complete(6);
        let mut emb = PartialEmbedding::new(&t, &g);
        emb.place(0, 0).unwrap();
        assert!(matches!(emb.place(3, 5), Err(EmbedError::InvalidMove(_))));
    }

    #[test]
    fn place_rejects_non_edges() {
        let t = Tree::path(1);
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let mut emb = PartialEmbedding::new(&t, &g);
        emb.place(0, 0).unwrap();
        assert!(emb.place(1, 2).is_err());
        emb.place(1, 1).unwrap();
        assert!(validate_embedding(&emb).is_empty());
    }

    #[test]
    fn serialization_round_trips() {
        let t = Tree::path(3);
        let g = complete(6);
        let mut emb = PartialEmbedding::new(&t, &g);
        emb.place(0, 3).unwrap();
        emb.place(1, 0).unwrap();
        emb.place(2, 5).unwrap();
        let text = emb.to_text("t.tree", "g.graph");
        let (tf, gf, pairs) = pairs_from_text(&text).unwrap();
        assert_eq!(tf, "t.tree");
        assert_eq!(gf, "g.graph");
        let back = apply_embedding_pairs(&t, &g, &pairs).unwrap();
        assert_eq!(back.pairs(), emb.pairs());
    }

    #[test]
    fn apply_rejects_disconnected_pairs() {
        let t = Tree::path(4);
        let g = complete(8);
        let err = apply_embedding_pairs(&t, &g, &[(0, 0), (4, 4)]).unwrap_err();
        assert!(matches!(err, EmbedError::InvalidMove(_)));
    }

    #[test]
    fn empty_and_singleton_embeddings_are_good() {
        let (g, left, right) = complete_bipartite(6, 6);
        let t = Tree::single();
        let mut emb = PartialEmbedding::new(&t, &g);
        let state = GoodState {
            embedding: &emb,
            parts: BipartiteHost::new(left.clone(), right.clone()).unwrap(),
            m: 2,
            d: 2,
        };
        assert!(is_m_good(&state, &mut budget()).unwrap().is_certified());
        emb.place(0, 0).unwrap();
        let state = GoodState {
            embedding: &emb,
            parts: BipartiteHost::new(left, right).unwrap(),
            m: 2,
            d: 2,
        };
        assert!(is_m_good(&state, &mut budget()).unwrap().is_certified());
    }

    #[test]
    fn goodness_catches_starved_vertices() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let t = Tree::single();
        let mut emb = PartialEmbedding::new(&t, &g);
        emb.place(0, 0).unwrap();
        let state = GoodState {
            embedding: &emb,
            parts: BipartiteHost::new(
                VertexSet::from_iter(2, [0]),
                VertexSet::from_iter(2, [1]),
            )
            .unwrap(),
            m: 1,
            d: 2,
        };
        let verdict = is_m_good(&state, &mut budget()).unwrap();
        assert_eq!(
            verdict,
            GoodnessVerdict::Violation {
                x: vec![0],
                observed: 1,
                required: 2
            }
        );
    }

    #[test]
    fn extend_leaf_picks_smallest_good_candidate() {
        let (g, left, right) = complete_bipartite(8, 8);
        let t = Tree::path(1);
        let mut emb = PartialEmbedding::new(&t, &g);
        emb.place(0, 0).unwrap();
        let parts = BipartiteHost::new(left, right).unwrap();
        let h = extend_leaf(&mut emb, &parts, 1, 2, 0, 1, &mut budget()).unwrap();
        assert_eq!(h, 8);
        assert!(validate_embedding(&emb).is_empty());
    }

    #[test]
    fn extend_leaf_flags_thin_margins() {
        let (g, left, right) = complete_bipartite(4, 4);
        let t = Tree::path(1);
        let mut emb = PartialEmbedding::new(&t, &g);
        emb.place(0, 0).unwrap();
        let parts = BipartiteHost::new(left, right).unwrap();
        let err = extend_leaf(&mut emb, &parts, 1, 2, 0, 1, &mut budget()).unwrap_err();
        assert!(matches!(err, EmbedError::HypothesisBroken(_)));
    }

    #[test]
    fn extend_leaf_rejects_bad_moves() {
        let (g, left, right) = complete_bipartite(8, 8);
        let t = Tree::path(2);
        let mut emb = PartialEmbedding::new(&t, &g);
        emb.place(0, 0).unwrap();
        let parts = BipartiteHost::new(left, right).unwrap();
        // Vertex 2 is not adjacent to vertex 0 in the path.
        let err = extend_leaf(&mut emb, &parts, 1, 2, 0, 2, &mut budget()).unwrap_err();
        assert!(matches!(err, EmbedError::InvalidMove(_)));
    }

    fn three_parts(n_part: usize) -> (Graph, VertexSet, VertexSet, VertexSet) {
        let n = 3 * n_part;
        let g = complete(n);
        let v1 = VertexSet::from_iter(n, 0..n_part);
        let v2 = VertexSet::from_iter(n, n_part..2 * n_part);
        let v3 = VertexSet::from_iter(n, 2 * n_part..n);
        (g, v1, v2, v3)
    }

    #[test]
    fn three_class_single_vertex() {
        let (g, v1, v2, v3) = three_parts(7);
        let t = Tree::single();
        let u1 = VertexSet::empty(1);
        let u2 = VertexSet::empty(1);
        let u3 = VertexSet::from_iter(1, [0]);
        let emb = embed_three_classes(
            &t,
            &u1,
            &u2,
            &u3,
            &g,
            &v1,
            &v2,
            &v3,
            1,
            2,
            &EmbedConfig::default(),
            &mut budget(),
        )
        .unwrap();
        assert!(v3.contains(emb.image_of(0).unwrap()));
    }

    #[test]
    fn three_class_path_lands_in_declared_parts() {
        let (g, v1, v2, v3) = three_parts(8);
        let t = Tree::path(2);
        let u1 = VertexSet::from_iter(3, [1]);
        let u2 = VertexSet::empty(3);
        let u3 = VertexSet::from_iter(3, [0, 2]);
        let emb = embed_three_classes(
            &t,
            &u1,
            &u2,
            &u3,
            &g,
            &v1,
            &v2,
            &v3,
            1,
            2,
            &EmbedConfig::default(),
            &mut budget(),
        )
        .unwrap();
        assert!(emb.is_complete());
        assert!(v1.contains(emb.image_of(1).unwrap()));
        assert!(v3.contains(emb.image_of(0).unwrap()));
        assert!(v3.contains(emb.image_of(2).unwrap()));
        assert!(validate_embedding(&emb).is_empty());
    }

    #[test]
    fn three_class_rejects_miscoloured_classes() {
        let (g, v1, v2, v3) = three_parts(8);
        let t = Tree::path(2);
        let u1 = VertexSet::from_iter(3, [0]);
        let u2 = VertexSet::empty(3);
        let u3 = VertexSet::from_iter(3, [1, 2]);
        let err = embed_three_classes(
            &t,
            &u1,
            &u2,
            &u3,
            &g,
            &v1,
            &v2,
            &v3,
            1,
            2,
            &EmbedConfig::default(),
            &mut budget(),
        )
        .unwrap_err();
        assert!(matches!(err, EmbedError::PreconditionRejected(_)));
    }

    #[test]
    fn three_class_random_tree_on_partitioned_clique() {
        let t = crate::tree::gen_random_tree(11, 3, 904).unwrap();
        let (c1, c2) = t.colour_classes();
        let mut u1 = VertexSet::empty(t.vertex_count());
        let mut u2 = VertexSet::empty(t.vertex_count());
        for (i, v) in c1.iter().enumerate() {
            if i % 2 == 0 {
                u1.insert(v);
            } else {
                u2.insert(v);
            }
        }
        let u3 = c2;
        let g = complete(63);
        let v1 = VertexSet::from_iter(63, 0..21);
        let v2 = VertexSet::from_iter(63, 21..42);
        let v3 = VertexSet::from_iter(63, 42..63);
        let emb = embed_three_classes(
            &t,
            &u1,
            &u2,
            &u3,
            &g,
            &v1,
            &v2,
            &v3,
            1,
            3,
            &EmbedConfig::default(),
            &mut budget(),
        )
        .unwrap();
        assert!(emb.is_complete());
        for v in u1.iter() {
            assert!(v1.contains(emb.image_of(v).unwrap()));
        }
        for v in u2.iter() {
            assert!(v2.contains(emb.image_of(v).unwrap()));
        }
        for v in u3.iter() {
            assert!(v3.contains(emb.image_of(v).unwrap()));
        }
        assert!(validate_embedding(&emb).is_empty());
    }

    #[test]
    fn star_hall_small_instances() {
        let (g, _, _) = complete_bipartite(2, 2);
        let pool = VertexSet::from_iter(4, [2, 3]);
        let req = StarRequest {
            centers: vec![0, 1],
            demands: vec![1, 1],
        };
        match star_hall_embed(&g, &req, &pool).unwrap() {
            StarHallOutcome::Assignment(a) => {
                assert_eq!(a.iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 1]);
                let mut all: Vec<usize> = a.into_iter().flatten().collect();
                all.sort_unstable();
                assert_eq!(all, vec![2, 3]);
            }
            other => panic!("expected assignment, got {other:?}"),
        }
        let req = StarRequest {
            centers: vec![0, 1],
            demands: vec![2, 2],
        };
        match star_hall_embed(&g, &req, &pool).unwrap() {
            StarHallOutcome::Violator(v) => assert_eq!(v, vec![0, 1]),
            other => panic!("expected violator, got {other:?}"),
        }
    }

    #[test]
    fn star_hall_violator_is_deficient() {
        let g = Graph::from_edges(5, [(0, 4), (1, 4), (2, 3)]).unwrap();
        let pool = VertexSet::from_iter(5, [3, 4]);
        let req = StarRequest {
            centers: vec![0, 1, 2],
            demands: vec![1, 1, 1],
        };
        match star_hall_embed(&g, &req, &pool).unwrap() {
            StarHallOutcome::Violator(v) => assert_eq!(v, vec![0, 1]),
            other => panic!("expected violator, got {other:?}"),
        }
    }

    fn hall_feasible_oracle(neigh: &[VertexSet], demands: &[usize]) -> bool {
        let k = neigh.len();
        for mask in 1u32..(1 << k) {
            let mut union = VertexSet::empty(neigh[0].universe());
            let mut demand = 0usize;
            for (i, d) in demands.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    union.union_with(&neigh[i]);
                    demand += d;
                }
            }
            if union.len() < demand {
                return false;
            }
        }
        true
    }

    #[test]
    fn star_hall_matches_exhaustive_oracle() {
        for seed in 0..40u64 {
            let g = sample_gnp(24, 0.18, 7000 + seed).unwrap();
            let pool = VertexSet::from_iter(24, 12..24);
            let centers: Vec<usize> = (0..8).collect();
            let demands: Vec<usize> = centers
                .iter()
                .map(|&c| (crate::rng::pair_hash(seed, c, 99) % 3) as usize)
                .collect();
            let req = StarRequest {
                centers: centers.clone(),
                demands: demands.clone(),
            };
            let neigh: Vec<VertexSet> = centers
                .iter()
                .map(|&c| g.neighbours(c).intersection(&pool))
                .collect();
            let feasible = hall_feasible_oracle(&neigh, &demands);
            match star_hall_embed(&g, &req, &pool).unwrap() {
                StarHallOutcome::Assignment(assign) => {
                    assert!(feasible, "seed {seed}: oracle says infeasible");
                    let mut seen = VertexSet::empty(24);
                    for (i, hosts) in assign.iter().enumerate() {
                        assert_eq!(hosts.len(), demands[i]);
                        for &h in hosts {
                            assert!(pool.contains(h));
                            assert!(g.has_edge(centers[i], h));
                            assert!(!seen.contains(h), "seed {seed}: host {h} reused");
                            seen.insert(h);
                        }
                    }
                }
                StarHallOutcome::Violator(vs) => {
                    assert!(!feasible, "seed {seed}: oracle says feasible");
                    assert!(!vs.is_empty());
                }
            }
        }
    }

    fn caterpillar(spine: usize, legs_per: usize) -> Tree {
        let mut edges = Vec::new();
        for i in 1..spine {
            edges.push((i - 1, i));
        }
        let mut next = spine;
        for i in 0..spine {
            for _ in 0..legs_per {
                edges.push((i, next));
                next += 1;
            }
        }
        Tree::from_edges(next, edges).unwrap()
    }

    #[test]
    fn many_leaves_rejects_loose_hosts() {
        let t = caterpillar(50, 2);
        let g = sample_gnp(170, 0.5, 3).unwrap();
        let err = embed_many_leaves(&g, &t, 1, 1, 4, 11, &EmbedConfig::default(), &mut budget())
            .unwrap_err();
        assert!(matches!(err, EmbedError::PreconditionRejected(_)));
    }

    #[test]
    fn many_leaves_embeds_caterpillar_into_complete_host() {
        let t = caterpillar(50, 2);
        assert!(t.leaves().len() >= 96);
        let g = complete(170);
        let out = embed_many_leaves(&g, &t, 1, 1, 4, 11, &EmbedConfig::default(), &mut budget())
            .unwrap();
        assert!(out.embedding.is_complete());
        assert!(validate_embedding(&out.embedding).is_empty());
        assert!(out.sampling_attempts >= 1);
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn many_leaves_is_deterministic() {
        let t = caterpillar(50, 2);
        let g = complete(170);
        let a = embed_many_leaves(&g, &t, 1, 1, 4, 5, &EmbedConfig::default(), &mut budget())
            .unwrap();
        let b = embed_many_leaves(&g, &t, 1, 1, 4, 5, &EmbedConfig::default(), &mut budget())
            .unwrap();
        assert_eq!(a.embedding.pairs(), b.embedding.pairs());
    }

    #[test]
    fn haxell_conditions_on_cliques() {
        assert!(haxell_conditions(&complete(20), 6, 1, 2, &mut budget()).unwrap());
        assert!(!haxell_conditions(&complete(12), 6, 1, 2, &mut budget()).unwrap());
    }

    #[test]
    fn haxell_embeds_pinned_path_without_backtracking() {
        let g = complete(8);
        let t = Tree::path(4);
        let report = haxell_embed(
            &g,
            &t,
            Some((0, 3)),
            None,
            &EmbedConfig::default(),
            &mut budget(),
        )
        .unwrap();
        let emb = report.embedding.unwrap();
        assert_eq!(emb.image_of(0), Some(3));
        assert_eq!(report.placements, 5);
        assert!(!report.exhausted);
        assert!(validate_embedding(&emb).is_empty());
    }

    #[test]
    fn haxell_rejects_oversized_trees() {
        let g = complete(9);
        let t = Tree::path(9);
        let report =
            haxell_embed(&g, &t, None, None, &EmbedConfig::default(), &mut budget()).unwrap();
        assert!(report.embedding.is_none());
        assert!(report.exhausted);
        assert_eq!(report.placements, 0);
    }

    #[test]
    fn haxell_exhausts_on_low_degree_hosts() {
        // A 4-cycle has maximum degree 2 and cannot hold a 3-leaf star.
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let t = Tree::star(3);
        let report =
            haxell_embed(&g, &t, None, None, &EmbedConfig::default(), &mut budget()).unwrap();
        assert!(report.embedding.is_none());
        assert!(report.exhausted);
        assert!(report.placements > 0);
    }

    #[test]
    fn haxell_certifies_and_embeds_on_large_cliques() {
        let g = complete(20);
        let t = crate::tree::gen_random_tree(5, 3, 77).unwrap();
        let report = haxell_embed(
            &g,
            &t,
            None,
            Some(1),
            &EmbedConfig::default(),
            &mut budget(),
        )
        .unwrap();
        assert_eq!(report.conditions_certified, Some(true));
        assert!(report.embedding.is_some());
    }

    #[test]
    fn haxell_single_vertex() {
        let g = complete(1);
        let t = Tree::single();
        let report =
            haxell_embed(&g, &t, None, None, &EmbedConfig::default(), &mut budget()).unwrap();
        assert_eq!(report.embedding.unwrap().image_of(0), Some(0));
    }

    fn two_cliques_with_bridge(part: usize) -> (Graph, VertexSet, VertexSet) {
        let n = 2 * part;
        let mut g = Graph::new(n).unwrap();
        for u in 0..part {
            for v in (u + 1)..part {
                g.add_edge(u, v).unwrap();
            }
        }
        for u in part..n {
            for v in (u + 1)..n {
                g.add_edge(u, v).unwrap();
            }
        }
        g.add_edge(part - 1, part).unwrap();
        (
            g,
            VertexSet::from_iter(n, 0..part),
            VertexSet::from_iter(n, part..n),
        )
    }

    #[test]
    fn across_edge_single_edge_tree() {
        let (g, vi, vj) = two_cliques_with_bridge(5);
        let t = Tree::path(1);
        let out = embed_across_edge(
            &g,
            &vi,
            &vj,
            (4, 5),
            &t,
            2,
            None,
            &EmbedConfig::default(),
            &mut budget(),
        )
        .unwrap();
        assert_eq!(out.embedding.image_of(0), Some(4));
        assert_eq!(out.embedding.image_of(1), Some(5));
    }

    #[test]
    fn across_edge_splits_longer_paths() {
        let (g, vi, vj) = two_cliques_with_bridge(8);
        let t = Tree::path(5);
        let out = embed_across_edge(
            &g,
            &vi,
            &vj,
            (7, 8),
            &t,
            2,
            None,
            &EmbedConfig::default(),
            &mut budget(),
        )
        .unwrap();
        let emb = out.embedding;
        assert!(emb.is_complete());
        assert!(validate_embedding(&emb).is_empty());
        let on_i = (0..6)
            .filter(|&v| vi.contains(emb.image_of(v).unwrap()))
            .count();
        assert!(on_i >= 2 && (6 - on_i) >= 2);
    }

    #[test]
    fn across_edge_reports_side_failures() {
        let (g, vi, vj) = two_cliques_with_bridge(3);
        let t = Tree::path(7);
        let err = embed_across_edge(
            &g,
            &vi,
            &vj,
            (2, 3),
            &t,
            2,
            None,
            &EmbedConfig::default(),
            &mut budget(),
        )
        .unwrap_err();
        assert!(matches!(err, EmbedError::SideFailed { .. }));
    }
}
