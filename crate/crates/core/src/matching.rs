//! Matching engines: maximum matching in general graphs via augmenting
//! paths with blossom contraction, a demand-expanded bipartite matcher
//! whose failure certificate is a Hall violator, and a bitmask oracle for
//! cross-checking on small instances.

use std::collections::VecDeque;

use crate::graph::Graph;

const UNSET: usize = usize::MAX;

struct BlossomState<'g> {
    g: &'g Graph,
    mate: Vec<usize>,
    parent: Vec<usize>,
    base: Vec<usize>,
    queued: Vec<bool>,
    in_blossom: Vec<bool>,
}

impl<'g> BlossomState<'g> {
    fn new(g: &'g Graph) -> Self {
        let n = g.vertex_count();
        BlossomState {
            g,
            mate: vec![UNSET; n],
            parent: vec![UNSET; n],
            base: Vec::new(),
            queued: Vec::new(),
            in_blossom: Vec::new(),
        }
    }

    fn lowest_common_base(&self, mut a: usize, mut b: usize) -> usize {
        let n = self.g.vertex_count();
        let mut on_path = vec![false; n];
        loop {
            a = self.base[a];
            on_path[a] = true;
            if self.mate[a] == UNSET {
                break;
            }
            a = self.parent[self.mate[a]];
        }
        loop {
            b = self.base[b];
            if on_path[b] {
                return b;
            }
            b = self.parent[self.mate[b]];
        }
    }

    fn mark_path(&mut self, mut v: usize, root_base: usize, mut child: usize) {
        while self.base[v] != root_base {
            self.in_blossom[self.base[v]] = true;
            self.in_blossom[self.base[self.mate[v]]] = true;
            self.parent[v] = child;
            child = self.mate[v];
            v = self.parent[self.mate[v]];
        }
    }

    /// BFS for an augmenting path from `root`; returns its free endpoint.
    fn find_path(&mut self, root: usize) -> Option<usize> {
        let n = self.g.vertex_count();
        self.parent = vec![UNSET; n];
        self.base = (0..n).collect();
        self.queued = vec![false; n];
        self.queued[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for to in self.g.neighbours(v).iter() {
                if self.base[v] == self.base[to] || self.mate[v] == to {
                    continue;
                }
                if to == root || (self.mate[to] != UNSET && self.parent[self.mate[to]] != UNSET) {
                    // Odd cycle: contract the blossom.
                    let cur_base = self.lowest_common_base(v, to);
                    self.in_blossom = vec![false; n];
                    self.mark_path(v, cur_base, to);
                    self.mark_path(to, cur_base, v);
                    for i in 0..n {
                        if self.in_blossom[self.base[i]] {
                            self.base[i] = cur_base;
                            if !self.queued[i] {
                                self.queued[i] = true;
                                queue.push_back(i);
                            }
                        }
                    }
                } else if self.parent[to] == UNSET {
                    self.parent[to] = v;
                    if self.mate[to] == UNSET {
                        return Some(to);
                    }
                    self.queued[self.mate[to]] = true;
                    queue.push_back(self.mate[to]);
                }
            }
        }
        None
    }

    fn augment(&mut self, mut v: usize) {
        while v != UNSET {
            let pv = self.parent[v];
            let next = self.mate[pv];
            self.mate[v] = pv;
            self.mate[pv] = v;
            v = next;
        }
    }
}

/// Maximum matching, returned as sorted (u, v) pairs with u < v.
pub fn maximum_matching(g: &Graph) -> Vec<(usize, usize)> {
    let n = g.vertex_count();
    let mut st = BlossomState::new(g);
    for v in 0..n {
        if st.mate[v] == UNSET {
            if let Some(end) = st.find_path(v) {
                st.augment(end);
            }
        }
    }
    let mut out = Vec::new();
    for v in 0..n {
        let u = st.mate[v];
        if u != UNSET && v < u {
            out.push((v, u));
        }
    }
    out
}

/// Maximum matching size by subset dynamic programming; for cross-checks
/// on graphs with at most 20 vertices.
pub fn max_matching_size_exhaustive(g: &Graph) -> usize {
    let n = g.vertex_count();
    assert!(n <= 20, "exhaustive matching oracle capped at 20 vertices");
    let full: usize = (1 << n) - 1;
    let mut dp = vec![0u8; 1 << n];
    for mask in 1..=full {
        let v = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << v);
        let mut best = dp[rest];
        for u in self_neighbours_in_mask(g, v, rest) {
            best = best.max(1 + dp[rest & !(1 << u)]);
        }
        dp[mask] = best;
    }
    dp[full] as usize
}

fn self_neighbours_in_mask(g: &Graph, v: usize, mask: usize) -> impl Iterator<Item = usize> + '_ {
    g.neighbours(v).iter().filter(move |&u| mask >> u & 1 == 1)
}

/// Assigns `demands[i]` distinct right-side vertices to each left station
/// `i`, where `neigh[i]` lists the station's candidates (indices into the
/// right side). On success returns the per-station assignments (sorted);
/// otherwise the stations X whose joint neighbourhood is smaller than
/// their total demand.
pub fn bipartite_demand_matching(
    neigh: &[Vec<usize>],
    demands: &[usize],
    n_right: usize,
) -> Result<Vec<Vec<usize>>, Vec<usize>> {
    assert_eq!(neigh.len(), demands.len());
    // One unit per demanded leaf; copies of a station share its candidates.
    let mut unit_station = Vec::new();
    for (i, &d) in demands.iter().enumerate() {
        for _ in 0..d {
            unit_station.push(i);
        }
    }
    let n_units = unit_station.len();
    let mut right_mate = vec![UNSET; n_right];
    let mut unit_mate = vec![UNSET; n_units];
    for u in 0..n_units {
        let mut seen = vec![false; n_right];
        try_augment(u, &unit_station, neigh, &mut right_mate, &mut unit_mate, &mut seen);
    }
    if unit_mate.iter().all(|&m| m != UNSET) {
        let mut out = vec![Vec::new(); neigh.len()];
        for (u, &r) in unit_mate.iter().enumerate() {
            out[unit_station[u]].push(r);
        }
        for leaves in &mut out {
            leaves.sort_unstable();
        }
        return Ok(out);
    }
    // Deficiency: stations alternating-reachable from an unmatched unit
    // jointly dominate fewer rights than their demand total.
    let mut unit_seen = vec![false; n_units];
    let mut right_seen = vec![false; n_right];
    let mut queue: VecDeque<usize> = (0..n_units).filter(|&u| unit_mate[u] == UNSET).collect();
    for &u in &queue {
        unit_seen[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &r in &neigh[unit_station[u]] {
            if right_seen[r] {
                continue;
            }
            right_seen[r] = true;
            let back = right_mate[r];
            if back != UNSET && !unit_seen[back] {
                unit_seen[back] = true;
                queue.push_back(back);
            }
        }
    }
    let mut stations: Vec<usize> = (0..n_units)
        .filter(|&u| unit_seen[u])
        .map(|u| unit_station[u])
        .collect();
    stations.sort_unstable();
    stations.dedup();
    Err(stations)
}

fn try_augment(
    unit: usize,
    unit_station: &[usize],
    neigh: &[Vec<usize>],
    right_mate: &mut [usize],
    unit_mate: &mut [usize],
    seen: &mut [bool],
) -> bool {
    for &r in &neigh[unit_station[unit]] {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        if right_mate[r] == UNSET
            || try_augment(right_mate[r], unit_station, neigh, right_mate, unit_mate, seen)
        {
            right_mate[r] = unit;
            unit_mate[unit] = r;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sample_gnp;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges.iter().copied()).unwrap()
    }

    #[test]
    fn matches_path_and_cycles() {
        let p4 = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(maximum_matching(&p4).len(), 2);
        let c5 = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]);
        assert_eq!(maximum_matching(&c5).len(), 2);
        let c6 = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)]);
        assert_eq!(maximum_matching(&c6).len(), 3);
    }

    #[test]
    fn handles_blossoms() {
        // Two triangles joined by a bridge: perfect matching exists.
        let g = graph(6, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]);
        let m = maximum_matching(&g);
        assert_eq!(m.len(), 3);
        let mut covered: Vec<usize> = m.iter().flat_map(|&(a, b)| [a, b]).collect();
        covered.sort_unstable();
        assert_eq!(covered, vec![0, 1, 2, 3, 4, 5]);
        for &(a, b) in &m {
            assert!(g.has_edge(a, b));
        }
        // Petersen graph has a perfect matching.
        let petersen = graph(
            10,
            &[
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 4),
                (4, 0),
                (5, 7),
                (7, 9),
                (9, 6),
                (6, 8),
                (8, 5),
                (0, 5),
                (1, 6),
                (2, 7),
                (3, 8),
                (4, 9),
            ],
        );
        assert_eq!(maximum_matching(&petersen).len(), 5);
    }

    #[test]
    fn agrees_with_exhaustive_oracle_on_random_graphs() {
        for seed in 0..40 {
            let g = sample_gnp(12, 0.25, seed).unwrap();
            let m = maximum_matching(&g);
            for &(a, b) in &m {
                assert!(g.has_edge(a, b));
            }
            let mut covered: Vec<usize> = m.iter().flat_map(|&(a, b)| [a, b]).collect();
            covered.sort_unstable();
            let before = covered.len();
            covered.dedup();
            assert_eq!(before, covered.len(), "matching reuses a vertex");
            assert_eq!(
                m.len(),
                max_matching_size_exhaustive(&g),
                "seed {seed}: wrong matching size"
            );
        }
    }

    #[test]
    fn demand_matching_assigns_when_possible() {
        // K_{2,2}, demands (1, 1).
        let neigh = vec![vec![0, 1], vec![0, 1]];
        let out = bipartite_demand_matching(&neigh, &[1, 1], 2).unwrap();
        assert_eq!(out[0].len(), 1);
        assert_eq!(out[1].len(), 1);
        assert_ne!(out[0][0], out[1][0]);
    }

    #[test]
    fn demand_matching_reports_hall_violator() {
        // K_{2,2} with demands (2, 2): four units, two rights.
        let neigh = vec![vec![0, 1], vec![0, 1]];
        let err = bipartite_demand_matching(&neigh, &[2, 2], 2).unwrap_err();
        assert_eq!(err, vec![0, 1]);
    }

    #[test]
    fn demand_matching_violator_is_genuine() {
        // Station 2 sees only right 3; stations 0 and 1 share rights {0, 1}.
        let neigh = vec![vec![0, 1], vec![0, 1], vec![3]];
        let err = bipartite_demand_matching(&neigh, &[2, 1, 1], 4).unwrap_err();
        let demand_total: usize = err.iter().map(|&s| [2, 1, 1][s]).sum();
        let mut joint: Vec<usize> = err.iter().flat_map(|&s| neigh[s].clone()).collect();
        joint.sort_unstable();
        joint.dedup();
        assert!(joint.len() < demand_total, "violator {err:?} not deficient");
        assert_eq!(err, vec![0, 1]);
    }

    #[test]
    fn zero_demands_are_satisfied_trivially() {
        let neigh = vec![vec![], vec![0]];
        let out = bipartite_demand_matching(&neigh, &[0, 1], 1).unwrap();
        assert!(out[0].is_empty());
        assert_eq!(out[1], vec![0]);
    }
}
