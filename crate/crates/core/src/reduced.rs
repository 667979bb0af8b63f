//! Cluster-level structure finding and subtree assignment.
//!
//! This module works on reduced graphs: small graphs whose vertices stand
//! for clusters of a partitioned host, each carrying the same capacity.
//! [`find_structure`] locates a high-degree cluster `X` whose neighbourhood
//! splits exactly into a matching and an independent set, by trimming
//! low-degree clusters, decomposing the neighbourhood through
//! [`mat_trian_decompose`], and passing to a 2-blow-up in which every
//! triangle of the decomposition turns into three matching pairs.
//! [`assign_subtrees`] then reserves room for a family of two-coloured
//! subtrees inside that structure: cross pairs of the independent part are
//! filled first up to a density target, and the remaining subtrees go to
//! matching pairs with the larger colour class always sent to the less
//! occupied endpoint, keeping every pair balanced.
//!
//! All searches scan clusters in ascending id order, so equal inputs yield
//! identical structures and plans; plans serialize to a line-based ledger
//! for replay and independent validation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bitset::VertexSet;
use crate::graph::{sample_gnp, Graph, GraphError};
use crate::matching::maximum_matching;

#[derive(Debug, Error)]
pub enum ReducedError {
    #[error("{edges} edges is below the density threshold {needed:.2}")]
    DensityTooLow { edges: usize, needed: f64 },
    #[error("internal assertion failed: {0}")]
    InternalAssertion(String),
    #[error("cluster capacity exhausted: {detail}\n{ledger}")]
    CapacityExhausted { detail: String, ledger: String },
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("bad plan text: {0}")]
    Format(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A graph on clusters of uniform capacity.
#[derive(Clone, Debug)]
pub struct ReducedGraph {
    pub graph: Graph,
    /// Number of host vertices represented by each cluster.
    pub capacity: usize,
    /// Optional per-edge densities, keyed by `(min, max)` cluster pairs.
    pub densities: Option<BTreeMap<(usize, usize), f64>>,
}

impl ReducedGraph {
    pub fn new(
        graph: Graph,
        capacity: usize,
        densities: Option<BTreeMap<(usize, usize), f64>>,
    ) -> Result<Self, ReducedError> {
        if capacity == 0 {
            return Err(ReducedError::BadInput(
                "cluster capacity must be positive".into(),
            ));
        }
        if let Some(map) = &densities {
            for &(a, b) in map.keys() {
                if a >= b || b >= graph.vertex_count() || !graph.has_edge(a, b) {
                    return Err(ReducedError::BadInput(format!(
                        "density key ({a}, {b}) is not a normalized edge"
                    )));
                }
            }
        }
        Ok(ReducedGraph {
            graph,
            capacity,
            densities,
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// Random cluster graph with the given edge density, every present edge
    /// annotated with that density.
    pub fn synthetic(
        k: usize,
        density: f64,
        capacity: usize,
        seed: u64,
    ) -> Result<Self, ReducedError> {
        let graph = sample_gnp(k, density, seed)?;
        let mut map = BTreeMap::new();
        for u in 0..k {
            for v in graph.neighbours(u).iter() {
                if u < v {
                    map.insert((u, v), density);
                }
            }
        }
        ReducedGraph::new(graph, capacity, Some(map))
    }
}

/// Partition of a graph into an independent set, a matching and triangles,
/// with every neighbour of the independent set confined to one matching
/// side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatTrianDecomposition {
    pub i_set: VertexSet,
    /// Matching edges stored as `(front, back)`: all neighbours of `i_set`
    /// inside the matching are front endpoints.
    pub matching: Vec<(usize, usize)>,
    /// Vertex-disjoint triangles, each sorted ascending.
    pub triangles: Vec<[usize; 3]>,
}

impl MatTrianDecomposition {
    /// Endpoints carrying all edges into the independent set.
    pub fn front_side(&self, universe: usize) -> VertexSet {
        VertexSet::from_iter(universe, self.matching.iter().map(|&(a, _)| a))
    }
}

fn decomposition_violations(f: &Graph, dec: &MatTrianDecomposition) -> Vec<String> {
    let n = f.vertex_count();
    let mut bad = Vec::new();
    let mut covered = dec.i_set.clone();
    let mut count = dec.i_set.len();
    for &(a, b) in &dec.matching {
        if a >= n || b >= n || !f.has_edge(a, b) {
            bad.push(format!("matching pair ({a}, {b}) is not an edge"));
            continue;
        }
        covered.insert(a);
        covered.insert(b);
        count += 2;
    }
    for t in &dec.triangles {
        let [x, y, z] = *t;
        if z >= n || !(f.has_edge(x, y) && f.has_edge(y, z) && f.has_edge(x, z)) {
            bad.push(format!("{t:?} is not a triangle"));
            continue;
        }
        covered.insert(x);
        covered.insert(y);
        covered.insert(z);
        count += 3;
    }
    if covered != VertexSet::full(n) || count != n {
        bad.push(format!(
            "parts cover {} of {n} vertices with multiplicity {count}",
            covered.len()
        ));
    }
    for v in dec.i_set.iter() {
        if !f.neighbours(v).intersection(&dec.i_set).is_empty() {
            bad.push(format!("independent set contains the neighbour pair at {v}"));
            break;
        }
    }
    let front = dec.front_side(n);
    for v in dec.i_set.iter() {
        let stray = f.neighbours(v).difference(&front);
        if !stray.is_empty() {
            bad.push(format!(
                "vertex {v} of the independent set has neighbour {} outside the front side",
                stray.first().unwrap()
            ));
            break;
        }
    }
    bad
}

/// Decomposes `f` into an independent set, a matching and triangles so that
/// `N(i_set)` lies entirely on the matching's front side.
///
/// A maximum matching is computed first and the unmatched vertices form the
/// independent set.  Any matching edge whose endpoints both see the
/// independent set must do so through a single common vertex (two distinct
/// witnesses would form an augmenting path); each such edge absorbs its
/// witness as a triangle.  Afterwards every remaining matching edge has at
/// most one endpoint with independent-set neighbours, and that endpoint
/// becomes the front.  All invariants are re-checked before returning.
pub fn mat_trian_decompose(f: &Graph) -> Result<MatTrianDecomposition, ReducedError> {
    let n = f.vertex_count();
    let mut matching: Vec<(usize, usize)> = maximum_matching(f)
        .into_iter()
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    matching.sort_unstable();
    let mut i_set = VertexSet::full(n);
    for &(a, b) in &matching {
        i_set.remove(a);
        i_set.remove(b);
    }
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    loop {
        let mut converted = None;
        for (idx, &(a, b)) in matching.iter().enumerate() {
            let wa = f.neighbours(a).intersection(&i_set);
            let wb = f.neighbours(b).intersection(&i_set);
            if wa.is_empty() || wb.is_empty() {
                continue;
            }
            let witnesses = wa.union(&wb);
            if witnesses.len() > 1 {
                return Err(ReducedError::InternalAssertion(format!(
                    "matching edge ({a}, {b}) has distinct unmatched witnesses {:?}; \
                     the matching was not maximum",
                    witnesses.to_vec()
                )));
            }
            converted = Some((idx, witnesses.first().unwrap()));
            break;
        }
        match converted {
            Some((idx, x)) => {
                let (a, b) = matching.remove(idx);
                i_set.remove(x);
                let mut tri = [x, a, b];
                tri.sort_unstable();
                triangles.push(tri);
            }
            None => break,
        }
    }
    triangles.sort_unstable();
    let mut sided = Vec::with_capacity(matching.len());
    for (a, b) in matching {
        let a_sees = !f.neighbours(a).intersection(&i_set).is_empty();
        let b_sees = !f.neighbours(b).intersection(&i_set).is_empty();
        let pair = match (a_sees, b_sees) {
            (true, true) => {
                return Err(ReducedError::InternalAssertion(format!(
                    "matching edge ({a}, {b}) still faces the independent set on both sides"
                )))
            }
            (false, true) => (b, a),
            _ => (a, b),
        };
        sided.push(pair);
    }
    let dec = MatTrianDecomposition {
        i_set,
        matching: sided,
        triangles,
    };
    let bad = decomposition_violations(f, &dec);
    if !bad.is_empty() {
        return Err(ReducedError::InternalAssertion(format!(
            "decomposition left invariants broken: {}",
            bad.join("; ")
        )));
    }
    Ok(dec)
}

/// High-degree cluster with its decomposed neighbourhood, on a 2-blow-up of
/// the trimmed reduced graph.
///
/// The blown graph keeps two copies `2i`, `2i+1` of every input cluster;
/// copies of trimmed clusters are isolated.  `matching` pairs are edges of
/// the blown graph, `y` is independent, and `z` collects the neighbours of
/// `y` away from `x` and `N(x)`.
#[derive(Clone, Debug)]
pub struct ReducedStructure {
    pub x: usize,
    pub matching: Vec<(usize, usize)>,
    pub y: VertexSet,
    pub z: VertexSet,
    /// Cluster count of the blown graph (twice the input count).
    pub k: usize,
    pub graph: Graph,
    /// Per-cluster capacity after the blow-up halving.
    pub capacity: usize,
    pub rho: f64,
    pub delta: f64,
    /// Maps each blown cluster back to its input cluster.
    pub blow_map: Vec<usize>,
}

impl ReducedStructure {
    /// Clusters covered by the matching.
    pub fn matched_set(&self) -> VertexSet {
        let mut s = VertexSet::empty(self.k);
        for &(a, b) in &self.matching {
            s.insert(a);
            s.insert(b);
        }
        s
    }
}

/// Re-derives every structural guarantee of a [`ReducedStructure`] from its
/// own fields; returns the violations found.
pub fn validate_structure(s: &ReducedStructure) -> Vec<String> {
    let mut bad = Vec::new();
    let k = s.k;
    if s.graph.vertex_count() != k {
        bad.push(format!(
            "graph has {} clusters, field k says {k}",
            s.graph.vertex_count()
        ));
        return bad;
    }
    if s.x >= k {
        bad.push(format!("cluster x = {} is out of range", s.x));
        return bad;
    }
    let mut matched = VertexSet::empty(k);
    for &(a, b) in &s.matching {
        if a >= k || b >= k || a == b {
            bad.push(format!("matching pair ({a}, {b}) is malformed"));
            continue;
        }
        if !s.graph.has_edge(a, b) {
            bad.push(format!("matching pair ({a}, {b}) is not an edge"));
        }
        if matched.contains(a) || matched.contains(b) {
            bad.push(format!("matching pairs overlap at ({a}, {b})"));
        }
        matched.insert(a);
        matched.insert(b);
    }
    if !matched.is_disjoint(&s.y) {
        bad.push("matched clusters and the independent part overlap".into());
    }
    let nx = s.graph.neighbours(s.x);
    if *nx != matched.union(&s.y) {
        bad.push("N(x) is not exactly the matched clusters plus the independent part".into());
    }
    for v in s.y.iter() {
        if !s.graph.neighbours(v).intersection(&s.y).is_empty() {
            bad.push(format!("independent part has an edge at cluster {v}"));
            break;
        }
    }
    let mut ny = VertexSet::empty(k);
    for v in s.y.iter() {
        ny.union_with(s.graph.neighbours(v));
    }
    ny.remove(s.x);
    ny.subtract(nx);
    if ny != s.z {
        bad.push("z is not N(y) minus x and N(x)".into());
    }
    let coverage = (matched.len() + s.y.len()) as f64;
    let floor = (s.rho + s.delta / 3.0) * k as f64;
    if coverage + 1e-9 < floor {
        bad.push(format!(
            "matched plus independent covers {coverage} clusters, below {floor:.2}"
        ));
    }
    let cross_floor = (s.rho + s.delta / 4.0) * k as f64 / 2.0 - matched.len() as f64 / 2.0;
    for v in s.y.iter() {
        let deg = s.graph.neighbours(v).intersection_len(&s.z);
        if (deg as f64) + 1e-9 < cross_floor {
            bad.push(format!(
                "cluster {v} reaches only {deg} of the required {cross_floor:.2} cross clusters"
            ));
        }
    }
    bad
}

/// Finds the blown-up cluster structure in a reduced graph.
///
/// Requires edge density at least `(rho + delta/3) k^2 / 2`.  Clusters of
/// degree below `(rho + delta/3) k / 2` are trimmed (smallest id first,
/// rescanning after each removal); the surviving subgraph keeps average
/// degree at least `(rho + delta/3) k`, so its maximum-degree cluster `x'`
/// has enough neighbours for the decomposition.  The result lives on the
/// 2-blow-up with cluster ids `2i` and `2i+1`, where each decomposition
/// triangle contributes three matching pairs and each matching edge two,
/// and capacities are halved (odd capacities lose their remainder).
pub fn find_structure(
    r: &ReducedGraph,
    rho: f64,
    delta: f64,
) -> Result<ReducedStructure, ReducedError> {
    let k_in = r.cluster_count();
    if k_in == 0 {
        return Err(ReducedError::BadInput("no clusters".into()));
    }
    if !(rho > 0.0 && rho < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(ReducedError::BadInput(format!(
            "rho = {rho} and delta = {delta} must lie in (0, 1)"
        )));
    }
    if r.capacity < 2 {
        return Err(ReducedError::BadInput(
            "cluster capacity must survive halving".into(),
        ));
    }
    let needed = (rho + delta / 3.0) * (k_in * k_in) as f64 / 2.0;
    if (r.graph.edge_count() as f64) < needed {
        return Err(ReducedError::DensityTooLow {
            edges: r.graph.edge_count(),
            needed,
        });
    }
    let mut alive = VertexSet::full(k_in);
    let degree_floor = (rho + delta / 3.0) * k_in as f64 / 2.0;
    while let Some(v) = alive
        .iter()
        .find(|&v| (r.graph.degree_in(v, &alive) as f64) < degree_floor)
    {
        alive.remove(v);
    }
    if alive.is_empty() {
        return Err(ReducedError::InternalAssertion(
            "trimming removed every cluster despite the density precondition".into(),
        ));
    }
    let mut xp = usize::MAX;
    let mut best = 0usize;
    for v in alive.iter() {
        let deg = r.graph.degree_in(v, &alive);
        if xp == usize::MAX || deg > best {
            xp = v;
            best = deg;
        }
    }
    if (best as f64) + 1e-9 < (rho + delta / 3.0) * k_in as f64 {
        return Err(ReducedError::InternalAssertion(format!(
            "maximum surviving degree {best} fell below the average-degree bound {:.2}",
            (rho + delta / 3.0) * k_in as f64
        )));
    }
    let nb = r.graph.neighbours(xp).intersection(&alive);
    let (sub, map) = r.graph.induced(&nb);
    let dec = mat_trian_decompose(&sub)?;

    let k = 2 * k_in;
    let mut blown = Graph::new(k)?;
    for u in alive.iter() {
        for v in r.graph.neighbours(u).intersection(&alive).iter() {
            if u < v {
                blown.add_edge(2 * u, 2 * v)?;
                blown.add_edge(2 * u, 2 * v + 1)?;
                blown.add_edge(2 * u + 1, 2 * v)?;
                blown.add_edge(2 * u + 1, 2 * v + 1)?;
            }
        }
    }
    let x = 2 * xp;
    let y = VertexSet::from_iter(
        k,
        dec.i_set.iter().flat_map(|v| {
            let c = map[v];
            [2 * c, 2 * c + 1]
        }),
    );
    let norm = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut matching = Vec::new();
    for &(a, b) in &dec.matching {
        let (ca, cb) = (map[a], map[b]);
        matching.push(norm(2 * ca, 2 * cb));
        matching.push(norm(2 * ca + 1, 2 * cb + 1));
    }
    for &[a, b, c] in &dec.triangles {
        let (ca, cb, cc) = (map[a], map[b], map[c]);
        matching.push(norm(2 * ca, 2 * cb + 1));
        matching.push(norm(2 * cb, 2 * cc + 1));
        matching.push(norm(2 * cc, 2 * ca + 1));
    }
    matching.sort_unstable();
    let mut ny = VertexSet::empty(k);
    for v in y.iter() {
        ny.union_with(blown.neighbours(v));
    }
    let mut z = ny;
    z.remove(x);
    z.subtract(blown.neighbours(x));
    let blow_map = (0..k).map(|i| i / 2).collect();
    let s = ReducedStructure {
        x,
        matching,
        y,
        z,
        k,
        graph: blown,
        capacity: r.capacity / 2,
        rho,
        delta,
        blow_map,
    };
    let bad = validate_structure(&s);
    if !bad.is_empty() {
        return Err(ReducedError::InternalAssertion(format!(
            "constructed structure fails validation: {}",
            bad.join("; ")
        )));
    }
    Ok(s)
}

/// Which kind of cluster pair a subtree was assigned to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKind {
    /// An edge between the independent part and its outside neighbours.
    YzEdge,
    /// A matching pair.
    MatchingEdge,
}

impl PairKind {
    fn token(self) -> &'static str {
        match self {
            PairKind::YzEdge => "yz",
            PairKind::MatchingEdge => "matching",
        }
    }
}

/// One subtree's pair of cluster reservations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanEntry {
    pub subtree: usize,
    pub kind: PairKind,
    pub cluster_c1: usize,
    pub reserved_c1: usize,
    pub tree_c1: usize,
    pub cluster_c2: usize,
    pub reserved_c2: usize,
    pub tree_c2: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanParams {
    /// Cluster capacity the plan was built against.
    pub capacity: usize,
    /// Slack added to every reservation.
    pub pad: usize,
    /// Cap on the usage gap across any matching pair.
    pub balance_bound: f64,
}

/// Reservation schedule for a family of subtrees, in assignment order.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentPlan {
    pub entries: Vec<PlanEntry>,
    /// Total reserved room per cluster.
    pub occupancy: BTreeMap<usize, usize>,
    pub params: PlanParams,
    /// Proof-arithmetic side conditions that fail at this instance size.
    pub warnings: Vec<String>,
}

fn render_ledger(entries: &[PlanEntry], occupancy: &BTreeMap<usize, usize>) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "subtree {} via {}: class 1 -> cluster {} ({} reserved), class 2 -> cluster {} ({} reserved)\n",
            e.subtree, e.kind.token(), e.cluster_c1, e.reserved_c1, e.cluster_c2, e.reserved_c2
        ));
    }
    for (c, used) in occupancy {
        out.push_str(&format!("cluster {c}: {used} reserved\n"));
    }
    out
}

/// Reserves cluster room for subtrees with class sizes `sizes[i] = (|T_i|
/// in colour 1, |T_i| in colour 2)`.
///
/// Subtrees are processed by descending class-2 surplus (ties by index).
/// While the reserved total is below the fill target derived from the
/// structure's density margin, each subtree takes the first available
/// cross pair: an independent-part cluster and one of its outside
/// neighbours, both with usage at most `capacity - (D^4 beta n + 16 D eps
/// capacity)`.  The remaining subtrees go to matching pairs under the
/// tighter bound with `rho n` in place of `n`, with the larger colour
/// class (ties to colour 2) on the less occupied endpoint, which keeps
/// every pair's usage gap within `D^4 beta rho n` after every step.  Each
/// reservation is padded by `ceil(16 D eps capacity)`.
///
/// Running out of eligible pairs while subtrees remain contradicts the
/// density accounting that produced the structure, so it surfaces as
/// [`ReducedError::CapacityExhausted`] carrying the full ledger.
#[allow(clippy::too_many_arguments)]
pub fn assign_subtrees(
    sizes: &[(usize, usize)],
    s: &ReducedStructure,
    eps: f64,
    beta: f64,
    d: usize,
    rho: f64,
    n: usize,
) -> Result<AssignmentPlan, ReducedError> {
    if d == 0 || n == 0 {
        return Err(ReducedError::BadInput(
            "degree bound and host order must be positive".into(),
        ));
    }
    if !(eps >= 0.0) || !(beta >= 0.0) || !(rho > 0.0 && rho <= 1.0) {
        return Err(ReducedError::BadInput(format!(
            "parameters out of range: eps = {eps}, beta = {beta}, rho = {rho}"
        )));
    }
    let m = s.capacity;
    if m == 0 {
        return Err(ReducedError::BadInput("structure has no capacity".into()));
    }
    let mf = m as f64;
    let d4 = (d as f64).powi(4);
    let pad_f = 16.0 * d as f64 * eps * mf;
    let pad = pad_f.ceil() as usize;
    let balance_bound = d4 * beta * rho * n as f64;

    let mut warnings = Vec::new();
    let mut total_size = 0usize;
    for (i, &(t1, t2)) in sizes.iter().enumerate() {
        if t1 + t2 == 0 {
            return Err(ReducedError::BadInput(format!("subtree {i} is empty")));
        }
        total_size += t1 + t2;
        if ((t1 + t2) as f64) > balance_bound + 1e-9 {
            warnings.push(format!(
                "subtree {i} has {} vertices, above the proof bound {balance_bound:.2}",
                t1 + t2
            ));
        }
    }
    if beta > 0.0 && (sizes.len() as f64) > 4.0 * d as f64 / beta {
        warnings.push(format!(
            "{} subtrees exceed the proof bound {:.1}",
            sizes.len(),
            4.0 * d as f64 / beta
        ));
    }
    if ((total_size as f64) - rho * n as f64).abs() > 1.0 {
        warnings.push(format!(
            "subtrees total {total_size} vertices, expected rho*n = {:.1}",
            rho * n as f64
        ));
    }
    let mut sigma: Vec<usize> = (0..sizes.len()).collect();
    sigma.sort_by_key(|&i| (-((sizes[i].1 as i64) - (sizes[i].0 as i64)), i));
    let mut prefix = 0i64;
    for &i in &sigma {
        prefix += sizes[i].1 as i64 - sizes[i].0 as i64;
        if prefix < 0 {
            warnings.push(
                "class-2 surplus prefix goes negative; colour 2 is not the majority class".into(),
            );
            break;
        }
    }

    let matched_len = 2 * s.matching.len();
    let q = (s.rho + s.delta / 4.0) * s.k as f64 - matched_len as f64;
    let mut used: BTreeMap<usize, usize> = BTreeMap::new();
    let mut entries: Vec<PlanEntry> = Vec::with_capacity(sizes.len());
    let y_list = s.y.to_vec();
    let mut pos = 0usize;

    if q > 0.0 {
        if (s.y.len() as f64) < q {
            warnings.push(format!(
                "independent part has {} clusters, below the margin {q:.2}",
                s.y.len()
            ));
        }
        for &yv in &y_list {
            let deg = s.graph.neighbours(yv).intersection_len(&s.z);
            if (deg as f64) < q / 2.0 {
                warnings.push(format!(
                    "cluster {yv} has cross degree {deg}, below the margin {:.2}",
                    q / 2.0
                ));
            }
        }
        let target = (1.0 - s.delta / 16.0) * q * mf;
        let fill_cap = mf - (d4 * beta * n as f64 + pad_f);
        let mut assigned = 0usize;
        while pos < sigma.len() && (assigned as f64) < target {
            let i = sigma[pos];
            let (t1, t2) = sizes[i];
            let mut found = None;
            'search: for &yv in &y_list {
                if (*used.get(&yv).unwrap_or(&0) as f64) > fill_cap {
                    continue;
                }
                for zv in s.graph.neighbours(yv).intersection(&s.z).iter() {
                    if (*used.get(&zv).unwrap_or(&0) as f64) <= fill_cap {
                        found = Some((yv, zv));
                        break 'search;
                    }
                }
            }
            let (yv, zv) = match found {
                Some(p) => p,
                None => {
                    return Err(ReducedError::CapacityExhausted {
                        detail: format!(
                            "no cross pair can take subtree {i} with {assigned} of the \
                             {target:.1}-vertex fill target assigned"
                        ),
                        ledger: render_ledger(&entries, &used),
                    })
                }
            };
            let need1 = t1 + pad;
            let need2 = t2 + pad;
            if used.get(&yv).unwrap_or(&0) + need2 > m || used.get(&zv).unwrap_or(&0) + need1 > m {
                return Err(ReducedError::CapacityExhausted {
                    detail: format!("reservation for subtree {i} overflows capacity {m}"),
                    ledger: render_ledger(&entries, &used),
                });
            }
            *used.entry(yv).or_insert(0) += need2;
            *used.entry(zv).or_insert(0) += need1;
            entries.push(PlanEntry {
                subtree: i,
                kind: PairKind::YzEdge,
                cluster_c1: zv,
                reserved_c1: need1,
                tree_c1: t1,
                cluster_c2: yv,
                reserved_c2: need2,
                tree_c2: t2,
            });
            assigned += t1 + t2;
            pos += 1;
        }
    }

    let pair_cap = mf - (balance_bound + pad_f);
    while pos < sigma.len() {
        let i = sigma[pos];
        let (t1, t2) = sizes[i];
        let edge = s.matching.iter().copied().find(|&(a, b)| {
            let ua = *used.get(&a).unwrap_or(&0);
            let ub = *used.get(&b).unwrap_or(&0);
            (ua.max(ub) as f64) <= pair_cap
        });
        let (a, b) = match edge {
            Some(e) => e,
            None => {
                return Err(ReducedError::CapacityExhausted {
                    detail: format!("no matching pair can take subtree {i}"),
                    ledger: render_ledger(&entries, &used),
                })
            }
        };
        let ua = *used.get(&a).unwrap_or(&0);
        let ub = *used.get(&b).unwrap_or(&0);
        let (lighter, heavier) = if ua <= ub { (a, b) } else { (b, a) };
        let (c1, c2) = if t2 >= t1 {
            (heavier, lighter)
        } else {
            (lighter, heavier)
        };
        let need1 = t1 + pad;
        let need2 = t2 + pad;
        if used.get(&c1).unwrap_or(&0) + need1 > m || used.get(&c2).unwrap_or(&0) + need2 > m {
            return Err(ReducedError::CapacityExhausted {
                detail: format!("reservation for subtree {i} overflows capacity {m}"),
                ledger: render_ledger(&entries, &used),
            });
        }
        *used.entry(c1).or_insert(0) += need1;
        *used.entry(c2).or_insert(0) += need2;
        entries.push(PlanEntry {
            subtree: i,
            kind: PairKind::MatchingEdge,
            cluster_c1: c1,
            reserved_c1: need1,
            tree_c1: t1,
            cluster_c2: c2,
            reserved_c2: need2,
            tree_c2: t2,
        });
        let gap = (*used.get(&a).unwrap_or(&0) as i64 - *used.get(&b).unwrap_or(&0) as i64).abs();
        if (gap as f64) > balance_bound + 1e-9 {
            return Err(ReducedError::CapacityExhausted {
                detail: format!(
                    "matching pair ({a}, {b}) is out of balance by {gap}, bound {balance_bound:.2}"
                ),
                ledger: render_ledger(&entries, &used),
            });
        }
        pos += 1;
    }

    Ok(AssignmentPlan {
        entries,
        occupancy: used,
        params: PlanParams {
            capacity: m,
            pad,
            balance_bound,
        },
        warnings,
    })
}

/// Recomputes every plan invariant from scratch against its structure.
///
/// Checks reservation uniqueness per subtree, exact padded sizes, cluster
/// membership (cross pairs must join the independent part to its outside
/// neighbours along an edge, matching entries must sit on a matching
/// pair), capacity totals against the recorded occupancy, and the balance
/// of every matching pair replayed after each entry in order.
pub fn validate_plan(plan: &AssignmentPlan, s: &ReducedStructure) -> Vec<String> {
    let mut bad = Vec::new();
    let m = plan.params.capacity;
    if m != s.capacity {
        bad.push(format!(
            "plan capacity {m} differs from the structure's {}",
            s.capacity
        ));
    }
    let pad = plan.params.pad;
    let mut seen = BTreeMap::new();
    let mut used: BTreeMap<usize, usize> = BTreeMap::new();
    for (pos, e) in plan.entries.iter().enumerate() {
        if let Some(prev) = seen.insert(e.subtree, pos) {
            bad.push(format!(
                "subtree {} is reserved twice (entries {prev} and {pos})",
                e.subtree
            ));
        }
        if e.cluster_c1 >= s.k || e.cluster_c2 >= s.k || e.cluster_c1 == e.cluster_c2 {
            bad.push(format!(
                "entry {pos} uses the malformed cluster pair ({}, {})",
                e.cluster_c1, e.cluster_c2
            ));
            continue;
        }
        if e.reserved_c1 != e.tree_c1 + pad || e.reserved_c2 != e.tree_c2 + pad {
            bad.push(format!(
                "entry {pos} reserves ({}, {}), expected padded sizes ({}, {})",
                e.reserved_c1,
                e.reserved_c2,
                e.tree_c1 + pad,
                e.tree_c2 + pad
            ));
        }
        match e.kind {
            PairKind::YzEdge => {
                if !s.y.contains(e.cluster_c2) {
                    bad.push(format!(
                        "entry {pos} puts colour 2 on cluster {}, which is not in the \
                         independent part",
                        e.cluster_c2
                    ));
                }
                if !s.z.contains(e.cluster_c1) {
                    bad.push(format!(
                        "entry {pos} puts colour 1 on cluster {}, which is not an outside \
                         neighbour",
                        e.cluster_c1
                    ));
                }
                if !s.graph.has_edge(e.cluster_c1, e.cluster_c2) {
                    bad.push(format!("entry {pos} does not sit on an edge"));
                }
            }
            PairKind::MatchingEdge => {
                let key = (
                    e.cluster_c1.min(e.cluster_c2),
                    e.cluster_c1.max(e.cluster_c2),
                );
                if !s.matching.contains(&key) {
                    bad.push(format!(
                        "entry {pos} does not sit on a matching pair ({}, {})",
                        key.0, key.1
                    ));
                }
            }
        }
        *used.entry(e.cluster_c1).or_insert(0) += e.reserved_c1;
        *used.entry(e.cluster_c2).or_insert(0) += e.reserved_c2;
        for &(a, b) in &s.matching {
            let gap =
                (*used.get(&a).unwrap_or(&0) as i64 - *used.get(&b).unwrap_or(&0) as i64).abs();
            if (gap as f64) > plan.params.balance_bound + 1e-9 {
                bad.push(format!(
                    "after entry {pos}, matching pair ({a}, {b}) is out of balance by {gap}"
                ));
            }
        }
    }
    for (&c, &total) in &used {
        if total > m {
            bad.push(format!("cluster {c} holds {total} reserved, above capacity {m}"));
        }
    }
    if used != plan.occupancy {
        bad.push("recorded occupancy differs from the replayed totals".into());
    }
    bad
}

/// Serializes a plan as a header line plus one line per reservation.
pub fn plan_to_text(plan: &AssignmentPlan) -> String {
    let mut out = format!(
        "p plan {} {} {} {}\n",
        plan.entries.len(),
        plan.params.capacity,
        plan.params.pad,
        plan.params.balance_bound
    );
    for e in &plan.entries {
        out.push_str(&format!(
            "{} {} 1 {} {} {}\n",
            e.subtree,
            e.kind.token(),
            e.cluster_c1,
            e.reserved_c1,
            e.tree_c1
        ));
        out.push_str(&format!(
            "{} {} 2 {} {} {}\n",
            e.subtree,
            e.kind.token(),
            e.cluster_c2,
            e.reserved_c2,
            e.tree_c2
        ));
    }
    out
}

/// Parses the output of [`plan_to_text`], rebuilding the occupancy ledger.
pub fn plan_from_text(text: &str) -> Result<AssignmentPlan, ReducedError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| ReducedError::Format("empty input".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != "p" || fields[1] != "plan" {
        return Err(ReducedError::Format(format!(
            "expected header 'p plan <entries> <capacity> <pad> <balance>', got '{header}'"
        )));
    }
    let parse_usize = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|e| ReducedError::Format(format!("bad {what} '{s}': {e}")))
    };
    let n_entries = parse_usize(fields[2], "entry count")?;
    let capacity = parse_usize(fields[3], "capacity")?;
    let pad = parse_usize(fields[4], "pad")?;
    let balance_bound = fields[5]
        .parse::<f64>()
        .map_err(|e| ReducedError::Format(format!("bad balance bound '{}': {e}", fields[5])))?;
    let mut rows = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(ReducedError::Format(format!("bad reservation line '{line}'")));
        }
        let kind = match f[1] {
            "yz" => PairKind::YzEdge,
            "matching" => PairKind::MatchingEdge,
            other => {
                return Err(ReducedError::Format(format!("unknown pair kind '{other}'")));
            }
        };
        rows.push((
            parse_usize(f[0], "subtree")?,
            kind,
            parse_usize(f[2], "class")?,
            parse_usize(f[3], "cluster")?,
            parse_usize(f[4], "reserved size")?,
            parse_usize(f[5], "tree size")?,
        ));
    }
    if rows.len() != 2 * n_entries {
        return Err(ReducedError::Format(format!(
            "header promises {n_entries} entries but {} reservation lines follow",
            rows.len()
        )));
    }
    let mut entries = Vec::with_capacity(n_entries);
    let mut occupancy: BTreeMap<usize, usize> = BTreeMap::new();
    for pair in rows.chunks(2) {
        let (s1, k1, class1, cl1, r1, t1) = pair[0];
        let (s2, k2, class2, cl2, r2, t2) = pair[1];
        if s1 != s2 || k1 != k2 || class1 != 1 || class2 != 2 {
            return Err(ReducedError::Format(format!(
                "reservation lines for subtree {s1} do not pair up"
            )));
        }
        *occupancy.entry(cl1).or_insert(0) += r1;
        *occupancy.entry(cl2).or_insert(0) += r2;
        entries.push(PlanEntry {
            subtree: s1,
            kind: k1,
            cluster_c1: cl1,
            reserved_c1: r1,
            tree_c1: t1,
            cluster_c2: cl2,
            reserved_c2: r2,
            tree_c2: t2,
        });
    }
    Ok(AssignmentPlan {
        entries,
        occupancy,
        params: PlanParams {
            capacity,
            pad,
            balance_bound,
        },
        warnings: Vec::new(),
    })
}
