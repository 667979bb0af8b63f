//! End-to-end acceptance checks, one test per numbered criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads=1`
//! to see one verdict line per criterion; each line reports PASS or FAIL
//! together with the measured counts behind the verdict.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ramsey_trees::embed::{
    apply_embedding_pairs, embed_three_classes, haxell_conditions, haxell_embed, is_m_good,
    star_hall_embed, validate_embedding, EmbedConfig, GoodState, StarHallOutcome, StarRequest,
};
use ramsey_trees::expander::{
    check_bip_expander, check_strong, check_weak, extract_expander, BipartiteHost,
};
use ramsey_trees::graph::sample_gnp;
use ramsey_trees::matching::max_matching_size_exhaustive;
use ramsey_trees::ramsey::{
    arrow_exhaustive, canonical_clique, find_clique, janson_condition, mc_sweep,
    strategy_colouring, tree_family, validate_verdict, weakly_clique, ArrowOutcome, ArrowVerdict,
    Strategy, SweepConfig, TreeFamily, WeaklyCliqueOutcome,
};
use ramsey_trees::reduced::mat_trian_decompose;
use ramsey_trees::rng::{derive_seed, pair_bernoulli};
use ramsey_trees::subsets::{Budget, DEFAULT_SUBSET_CAP};
use ramsey_trees::tree::{cut_tree, gen_random_tree, validate_decomposition};
use ramsey_trees::{ColouredGraph, Graph, Tree, VertexSet};

fn fresh() -> Budget {
    Budget::new(DEFAULT_SUBSET_CAP)
}

fn report(idx: usize, name: &str, pass: bool, details: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {idx} ({name}): {verdict} - {details}");
    assert!(pass, "criterion {idx} ({name}) failed: {details}");
}

fn preview(failures: &[String]) -> String {
    match failures.first() {
        Some(f) => format!("; first failure: {f}"),
        None => String::new(),
    }
}

/// Indices of family trees provably absent from the witness's red graph;
/// errors if the witness has a blue triangle or any search is truncated.
fn missing_trees(
    cg: &ColouredGraph,
    fam: &TreeFamily,
    cfg: &EmbedConfig,
) -> Result<Vec<usize>, String> {
    if find_clique(cg.blue(), 3).is_some() {
        return Err("witness contains a blue triangle".into());
    }
    let mut missing = Vec::new();
    for (i, t) in fam.trees.iter().enumerate() {
        let rep = haxell_embed(cg.red(), t, None, None, cfg, &mut fresh())
            .map_err(|e| format!("tree {i} search failed: {e}"))?;
        if rep.embedding.is_none() {
            if !rep.exhausted {
                return Err(format!("tree {i} search was truncated"));
            }
            missing.push(i);
        }
    }
    Ok(missing)
}

#[test]
fn c1_exact_threshold_on_small_cliques() {
    let fam2 = tree_family(2, 2, 8, 0).expect("two-edge family");
    let fam3 = tree_family(3, 3, 8, 0).expect("three-edge family");
    assert_eq!(fam2.trees.len(), 1);
    assert_eq!(fam3.trees.len(), 2);
    let cfg = EmbedConfig::default();
    let mut failures: Vec<String> = Vec::new();
    let mut details: Vec<String> = Vec::new();

    for (nv, fam, want) in [(5usize, &fam2, 1u64 << 10), (7, &fam3, 1 << 21)] {
        let g = Graph::complete(nv).expect("complete graph");
        let t0 = Instant::now();
        match arrow_exhaustive(&g, 2, fam, &cfg, &mut fresh()) {
            Ok(ArrowOutcome::Arrows { colourings }) if colourings == want => {
                details.push(format!(
                    "K{nv} arrows over {colourings} colourings in {:.1?}",
                    t0.elapsed()
                ));
            }
            Ok(other) => failures.push(format!("K{nv} produced {other:?}")),
            Err(e) => failures.push(format!("K{nv} errored: {e}")),
        }
    }
    for (nv, fam, want_missing) in [(4usize, &fam2, vec![0usize]), (6, &fam3, vec![0, 1])] {
        let g = Graph::complete(nv).expect("complete graph");
        let t0 = Instant::now();
        match arrow_exhaustive(&g, 2, fam, &cfg, &mut fresh()) {
            Ok(ArrowOutcome::NonArrow(cg)) => {
                match missing_trees(&cg, fam, &cfg) {
                    Ok(missing) if missing == want_missing => {}
                    Ok(missing) => {
                        failures.push(format!("K{nv} witness misses only trees {missing:?}"))
                    }
                    Err(e) => failures.push(format!("K{nv} witness: {e}")),
                }
                let verdict = ArrowVerdict::NonArrowWitness {
                    colouring: cg.clone(),
                };
                match validate_verdict(&cg, 2, fam, &verdict, &cfg, &mut fresh()) {
                    Ok(bad) if bad.is_empty() => details.push(format!(
                        "K{nv} witness validated in {:.1?}",
                        t0.elapsed()
                    )),
                    Ok(bad) => failures.push(format!("K{nv} witness invalid: {}", bad.join("; "))),
                    Err(e) => failures.push(format!("K{nv} validation errored: {e}")),
                }
            }
            Ok(other) => failures.push(format!("K{nv} produced {other:?}")),
            Err(e) => failures.push(format!("K{nv} errored: {e}")),
        }
    }
    let pass = failures.is_empty();
    let text = if pass { details.join(", ") } else { failures.join("; ") };
    report(1, "arrowing flips exactly at the edge-count threshold", pass, &text);
}

#[test]
fn c2_dichotomy_witnesses_validate() {
    let (n, m, r, d) = (10usize, 2usize, 2usize, 2usize);
    let nv = 100usize;
    let mut blue_sets = 0usize;
    let mut universality = 0usize;
    let mut failures: Vec<String> = Vec::new();
    for seed in 0..250u64 {
        for strategy in [Strategy::Random, Strategy::Extremal] {
            let g = sample_gnp(nv, 0.4, derive_seed(0xC2, seed)).expect("host");
            let cg = strategy_colouring(&g, strategy, r, n, seed).expect("colouring");
            let red = cg.red();
            match weakly_clique(red, n, m, r, d, &mut fresh()) {
                Ok(WeaklyCliqueOutcome::BlueSets(sets)) => {
                    blue_sets += 1;
                    if sets.len() != r + 1 {
                        failures.push(format!(
                            "seed {seed} {strategy:?}: {} witness sets",
                            sets.len()
                        ));
                        continue;
                    }
                    'sets: for (i, a) in sets.iter().enumerate() {
                        if a.len() != m {
                            failures.push(format!(
                                "seed {seed} {strategy:?}: set {i} has {} vertices",
                                a.len()
                            ));
                            break 'sets;
                        }
                        for b in sets.iter().skip(i + 1) {
                            if !a.is_disjoint(b) {
                                failures
                                    .push(format!("seed {seed} {strategy:?}: sets overlap"));
                                break 'sets;
                            }
                            if red.edges_between(a, b) != 0 {
                                failures.push(format!(
                                    "seed {seed} {strategy:?}: red edge between witness sets"
                                ));
                                break 'sets;
                            }
                        }
                    }
                }
                Ok(WeaklyCliqueOutcome::Universality(cert)) => {
                    universality += 1;
                    if cert.removed.len() > m {
                        failures.push(format!(
                            "seed {seed} {strategy:?}: {} vertices trimmed",
                            cert.removed.len()
                        ));
                        continue;
                    }
                    let (sub, _) = red.induced(&cert.v_prime);
                    match haxell_conditions(&sub, n, m, d, &mut fresh()) {
                        Ok(true) => {}
                        Ok(false) => failures.push(format!(
                            "seed {seed} {strategy:?}: certificate fails recertification"
                        )),
                        Err(e) => failures.push(format!(
                            "seed {seed} {strategy:?}: recertification errored: {e}"
                        )),
                    }
                }
                Err(e) => failures.push(format!("seed {seed} {strategy:?}: {e}")),
            }
        }
    }
    report(
        2,
        "dichotomy witnesses validate",
        failures.is_empty(),
        &format!(
            "500 instances, {blue_sets} blue-set witnesses, {universality} universality \
             certificates, {} invalid{}",
            failures.len(),
            preview(&failures)
        ),
    );
}

#[test]
fn c3_extraction_recertifies_weak_expanders() {
    let d = 2usize;
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    let mut rejected = 0usize;
    let mut planted = 0usize;
    let mut trimmed = 0usize;
    let mut failures: Vec<String> = Vec::new();
    while accepted < 1000 && attempts < 4000 {
        let h = derive_seed(0xC3, attempts as u64);
        attempts += 1;
        let m1 = 1 + (h % 3) as usize;
        let (nv, m2) = if m1 == 1 {
            let nv = 24 + ((h >> 8) % 17) as usize;
            (nv, nv / 4)
        } else {
            let nv = 27 + ((h >> 8) % 14) as usize;
            (nv, nv / 3)
        };
        let mut g = sample_gnp(nv, 0.85, derive_seed(h, 1)).expect("instance");
        let mut low = None;
        if m1 >= 2 && (h >> 40) % 2 == 0 {
            // Replant one vertex with only two edges so extraction has
            // something to trim while the pair condition still holds.
            let v = ((h >> 24) % nv as u64) as usize;
            let mut edges: Vec<(usize, usize)> = g
                .edge_list()
                .into_iter()
                .filter(|&(a, b)| a != v && b != v)
                .collect();
            let mut added = 0;
            for u in 0..nv {
                if u != v && added < 2 {
                    edges.push((u.min(v), u.max(v)));
                    added += 1;
                }
            }
            g = Graph::from_edges(nv, edges).expect("replanted instance");
            low = Some(v);
        }
        let all = g.vertices();
        if !check_weak(&g, &all, m1, m2, &mut fresh())
            .expect("screening")
            .is_certified()
        {
            rejected += 1;
            continue;
        }
        accepted += 1;
        if low.is_some() {
            planted += 1;
        }
        let ext = match extract_expander(&g, &all, m1, m2, d, &mut fresh()) {
            Ok(e) => e,
            Err(e) => {
                failures.push(format!("attempt {}: extraction failed: {e}", attempts - 1));
                continue;
            }
        };
        if ext.removed.len() > m1 {
            failures.push(format!(
                "attempt {}: {} vertices removed with m1 = {m1}",
                attempts - 1,
                ext.removed.len()
            ));
            continue;
        }
        if !ext.removed.is_empty() {
            trimmed += 1;
        }
        if let Some(v) = low {
            if !ext.removed.contains(v) {
                failures.push(format!(
                    "attempt {}: replanted vertex {v} survived extraction",
                    attempts - 1
                ));
                continue;
            }
        }
        let strong = check_strong(&g, &ext.kept, m1, d, &mut fresh()).expect("strong recheck");
        let weak = check_weak(&g, &ext.kept, m1, m2, &mut fresh()).expect("weak recheck");
        if !strong.is_certified() || !weak.is_certified() {
            failures.push(format!(
                "attempt {}: extracted set fails recertification",
                attempts - 1
            ));
        }
    }
    let pass = failures.is_empty() && accepted == 1000;
    report(
        3,
        "extraction preserves certified expansion",
        pass,
        &format!(
            "{accepted}/1000 screened instances ({rejected} rejected, {planted} with a planted \
             low-degree vertex, {trimmed} trimmed), {} invalid{}",
            failures.len(),
            preview(&failures)
        ),
    );
}

#[test]
fn c4_star_packing_matches_hall_oracle() {
    let mut assignments = 0usize;
    let mut violators = 0usize;
    let mut failures: Vec<String> = Vec::new();
    for i in 0..1000u64 {
        let h = derive_seed(0xC4, i);
        let centers_n = 1 + (h % 12) as usize;
        let pool_n = 1 + ((h >> 8) % 12) as usize;
        let nv = centers_n + pool_n;
        let mut edges = Vec::new();
        for c in 0..centers_n {
            for q in 0..pool_n {
                if pair_bernoulli(derive_seed(h, 1), c, centers_n + q, 0.55) {
                    edges.push((c, centers_n + q));
                }
            }
        }
        let host = Graph::from_edges(nv, edges).expect("host");
        let demands: Vec<usize> = (0..centers_n)
            .map(|c| (derive_seed(h, 2 + c as u64) % 4) as usize)
            .collect();
        let pool = VertexSet::from_iter(nv, centers_n..nv);
        let req = StarRequest {
            centers: (0..centers_n).collect(),
            demands: demands.clone(),
        };
        let mut hall = true;
        for mask in 1u32..(1u32 << centers_n) {
            let mut need = 0usize;
            let mut un = VertexSet::empty(nv);
            for c in 0..centers_n {
                if mask >> c & 1 == 1 {
                    need += demands[c];
                    un.union_with(host.neighbours(c));
                }
            }
            un.intersect_with(&pool);
            if un.len() < need {
                hall = false;
                break;
            }
        }
        match star_hall_embed(&host, &req, &pool) {
            Ok(StarHallOutcome::Assignment(leaves)) => {
                assignments += 1;
                if !hall {
                    failures.push(format!("instance {i}: assignment despite a Hall violator"));
                    continue;
                }
                if leaves.len() != centers_n {
                    failures.push(format!("instance {i}: {} leaf lists", leaves.len()));
                    continue;
                }
                let mut seen = VertexSet::empty(nv);
                'leaves: for (c, ls) in leaves.iter().enumerate() {
                    if ls.len() != demands[c] {
                        failures.push(format!(
                            "instance {i}: centre {c} got {} of {} leaves",
                            ls.len(),
                            demands[c]
                        ));
                        break 'leaves;
                    }
                    for &q in ls {
                        if !pool.contains(q) || !host.has_edge(c, q) || seen.contains(q) {
                            failures
                                .push(format!("instance {i}: leaf {q} of centre {c} is invalid"));
                            break 'leaves;
                        }
                        seen.insert(q);
                    }
                }
            }
            Ok(StarHallOutcome::Violator(vs)) => {
                violators += 1;
                if hall {
                    failures.push(format!("instance {i}: violator despite Hall holding"));
                    continue;
                }
                let mut need = 0usize;
                let mut un = VertexSet::empty(nv);
                let mut well_formed = !vs.is_empty();
                for &c in &vs {
                    if c >= centers_n {
                        well_formed = false;
                        break;
                    }
                    need += demands[c];
                    un.union_with(host.neighbours(c));
                }
                un.intersect_with(&pool);
                if !well_formed || un.len() >= need {
                    failures.push(format!("instance {i}: reported violator is not deficient"));
                }
            }
            Err(e) => failures.push(format!("instance {i}: {e}")),
        }
    }
    report(
        4,
        "star packing matches the demand-Hall oracle",
        failures.is_empty(),
        &format!(
            "1000 instances, {assignments} assignments, {violators} violators, {} disagreements{}",
            failures.len(),
            preview(&failures)
        ),
    );
}

#[test]
fn c5_cut_trees_validate() {
    let mut failures: Vec<String> = Vec::new();
    let mut max_pieces = 0usize;
    for i in 0..1000u64 {
        let h = derive_seed(0xC5, i);
        let n_edges = 49 + (h % 252) as usize;
        let d = 2 + ((h >> 16) % 4) as usize;
        let beta = [0.02, 0.05, 0.1][((h >> 32) % 3) as usize];
        let t = gen_random_tree(n_edges, d, derive_seed(h, 3)).expect("tree");
        match cut_tree(&t, beta, d) {
            Ok(dec) => {
                max_pieces = max_pieces.max(dec.subtrees.len());
                let bad = validate_decomposition(&t, &dec);
                if !bad.is_empty() {
                    failures.push(format!(
                        "instance {i} (n = {n_edges}, D = {d}, beta = {beta}): {}",
                        bad[0]
                    ));
                }
            }
            Err(e) => failures.push(format!(
                "instance {i} (n = {n_edges}, D = {d}, beta = {beta}): {e}"
            )),
        }
    }
    report(
        5,
        "tree decompositions satisfy every invariant",
        failures.is_empty(),
        &format!(
            "1000 trees, largest decomposition {max_pieces} pieces, {} invalid{}",
            failures.len(),
            preview(&failures)
        ),
    );
}

/// Canonical form of a graph on `n <= 8` vertices: the minimum adjacency
/// bitstring over all vertex orders consistent with the degree and
/// neighbour-degree invariant, which identifies isomorphism classes.
fn canon(n: usize, adj: &[u8; 8]) -> u32 {
    let deg: Vec<u32> = (0..n).map(|v| (adj[v] as u32).count_ones()).collect();
    let keys: Vec<(u32, u64)> = (0..n)
        .map(|v| {
            let mut nd: Vec<u32> = (0..n)
                .filter(|&u| adj[v] >> u & 1 == 1)
                .map(|u| deg[u])
                .collect();
            nd.sort_unstable();
            let mut packed = 0u64;
            for x in nd {
                packed = packed << 3 | x as u64;
            }
            (deg[v], packed)
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| keys[v]);
    let mut classes: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    for i in 1..=n {
        if i == n || keys[order[i]] != keys[order[start]] {
            classes.push((start, i));
            start = i;
        }
    }
    fn walk(
        classes: &[(usize, usize)],
        ci: usize,
        k: usize,
        perm: &mut [usize],
        n: usize,
        adj: &[u8; 8],
        best: &mut u32,
    ) {
        if ci == classes.len() {
            let mut code = 0u32;
            for j in 1..n {
                for i in 0..j {
                    if adj[perm[i]] >> perm[j] & 1 == 1 {
                        code |= 1 << (j * (j - 1) / 2 + i);
                    }
                }
            }
            if code < *best {
                *best = code;
            }
            return;
        }
        let (cs, ce) = classes[ci];
        let k = k.max(cs);
        if k == ce {
            walk(classes, ci + 1, 0, perm, n, adj, best);
            return;
        }
        for i in k..ce {
            perm.swap(k, i);
            walk(classes, ci, k + 1, perm, n, adj, best);
            perm.swap(k, i);
        }
    }
    let mut best = u32::MAX;
    walk(&classes, 0, 0, &mut order, n, adj, &mut best);
    best
}

fn decomposition_ok(f: &Graph) -> Result<(), String> {
    let n = f.vertex_count();
    let dec = mat_trian_decompose(f).map_err(|e| format!("decomposition failed: {e}"))?;
    let mut cover = vec![0usize; n];
    for v in dec.i_set.iter() {
        cover[v] += 1;
    }
    for &(a, b) in &dec.matching {
        if !f.has_edge(a, b) {
            return Err(format!("matching pair ({a}, {b}) is not an edge"));
        }
        cover[a] += 1;
        cover[b] += 1;
    }
    for &[x, y, z] in &dec.triangles {
        if !(f.has_edge(x, y) && f.has_edge(y, z) && f.has_edge(x, z)) {
            return Err(format!("({x}, {y}, {z}) is not a triangle"));
        }
        cover[x] += 1;
        cover[y] += 1;
        cover[z] += 1;
    }
    if cover.iter().any(|&c| c != 1) {
        return Err("parts do not partition the vertices".into());
    }
    for v in dec.i_set.iter() {
        if !f.neighbours(v).intersection(&dec.i_set).is_empty() {
            return Err(format!("independent set spans an edge at {v}"));
        }
    }
    let front = dec.front_side(n);
    for v in dec.i_set.iter() {
        if !f.neighbours(v).difference(&front).is_empty() {
            return Err(format!("vertex {v} has a neighbour off the front side"));
        }
    }
    let nu = max_matching_size_exhaustive(f);
    if dec.matching.len() + dec.triangles.len() != nu {
        return Err(format!(
            "{} matching edges and {} triangles against maximum matching {nu}",
            dec.matching.len(),
            dec.triangles.len()
        ));
    }
    Ok(())
}

#[test]
fn c6_decomposition_matches_matching_oracle() {
    // Representatives of every isomorphism class on 1..=8 vertices, grown
    // one vertex at a time; the per-size counts pin the generation down.
    const COUNTS: [usize; 8] = [1, 2, 4, 11, 34, 156, 1044, 12346];
    let mut failures: Vec<String> = Vec::new();
    let mut levels: Vec<Vec<[u8; 8]>> = vec![vec![[0u8; 8]]];
    for k in 1..8 {
        let mut next: HashMap<u32, [u8; 8]> = HashMap::new();
        for adj in &levels[k - 1] {
            for mask in 0u16..(1u16 << k) {
                let mut a = *adj;
                a[k] = mask as u8;
                for u in 0..k {
                    if mask >> u & 1 == 1 {
                        a[u] |= 1 << k;
                    }
                }
                next.entry(canon(k + 1, &a)).or_insert(a);
            }
        }
        if next.len() != COUNTS[k] {
            failures.push(format!(
                "{} representatives on {} vertices, expected {}",
                next.len(),
                k + 1,
                COUNTS[k]
            ));
        }
        levels.push(next.into_values().collect());
    }
    let mut exhaustive = 0usize;
    if failures.is_empty() {
        for (idx, level) in levels.iter().enumerate() {
            let n = idx + 1;
            for adj in level {
                exhaustive += 1;
                let mut edges = Vec::new();
                for v in 0..n {
                    for u in v + 1..n {
                        if adj[v] >> u & 1 == 1 {
                            edges.push((v, u));
                        }
                    }
                }
                let f = Graph::from_edges(n, edges).expect("representative");
                if let Err(msg) = decomposition_ok(&f) {
                    failures.push(format!("{n}-vertex representative: {msg}"));
                }
            }
        }
    }
    let mut random = 0usize;
    for i in 0..1000u64 {
        let h = derive_seed(0xC6, i);
        let n = 2 + (h % 13) as usize;
        let p = 0.15 + ((h >> 16) % 71) as f64 / 100.0;
        let f = sample_gnp(n, p, derive_seed(h, 5)).expect("random instance");
        random += 1;
        if let Err(msg) = decomposition_ok(&f) {
            failures.push(format!("random instance {i}: {msg}"));
        }
    }
    report(
        6,
        "matching-triangle decompositions are exact",
        failures.is_empty(),
        &format!(
            "{exhaustive} exhaustive representatives plus {random} random graphs, {} invalid{}",
            failures.len(),
            preview(&failures)
        ),
    );
}

fn record_artifact(
    dir: &Path,
    paths: &mut Vec<PathBuf>,
    attempt: u64,
    t: &Tree,
    host: &Graph,
    note: &str,
) {
    let _ = fs::create_dir_all(dir);
    let path = dir.join(format!("three-class-failure-{attempt}.txt"));
    let body = format!("c {note}\n{}{}", t.to_text(), host.to_text());
    if fs::write(&path, body).is_ok() {
        paths.push(path);
    }
}

#[test]
fn c7_three_class_embedding_stays_good() {
    let (m, d) = (2usize, 3usize);
    let cfg = EmbedConfig::default();
    let artifact_dir = std::env::temp_dir().join("tree-embed-acceptance");
    let mut artifacts: Vec<PathBuf> = Vec::new();
    let mut done = 0usize;
    let mut skipped = 0usize;
    let mut attempt = 0u64;
    let mut failures: Vec<String> = Vec::new();
    while done < 300 && attempt < 600 {
        let h = derive_seed(0xC7, attempt);
        attempt += 1;
        let n_edges = 6 + (h % 7) as usize;
        let t = gen_random_tree(n_edges, d, derive_seed(h, 1)).expect("tree");
        let (ca, cb) = t.colour_classes();
        let (u3, small) = if ca.len() >= cb.len() { (ca, cb) } else { (cb, ca) };
        let nt = t.vertex_count();
        let mut u1 = VertexSet::empty(nt);
        let mut u2 = VertexSet::empty(nt);
        for (j, v) in small.iter().enumerate() {
            if j % 2 == 0 {
                u1.insert(v);
            } else {
                u2.insert(v);
            }
        }
        let pad = 3 * d * m;
        let s1 = u1.len() + pad + ((h >> 16) % 3) as usize;
        let s2 = u2.len() + pad + ((h >> 24) % 3) as usize;
        let s3 = u3.len() + pad + ((h >> 32) % 3) as usize;
        let nv = s1 + s2 + s3;
        // The pair condition leaves no cross pair of m-sets edge-free, so a
        // random host must be very dense before all three views certify.
        let host = sample_gnp(nv, 0.98, derive_seed(h, 2)).expect("host");
        let v1 = VertexSet::from_iter(nv, 0..s1);
        let v2 = VertexSet::from_iter(nv, s1..s1 + s2);
        let v3 = VertexSet::from_iter(nv, s1 + s2..nv);
        let views = [
            (v1.union(&v2), v3.clone()),
            (v1.clone(), v3.clone()),
            (v2.clone(), v3.clone()),
        ];
        let mut certified = true;
        for (a, b) in &views {
            let pair = BipartiteHost::new(a.clone(), b.clone()).expect("host sides");
            if !check_bip_expander(&host, &pair, m, d, &mut fresh())
                .expect("view check")
                .is_certified()
            {
                certified = false;
                break;
            }
        }
        if !certified {
            skipped += 1;
            continue;
        }
        done += 1;
        let emb = match embed_three_classes(
            &t, &u1, &u2, &u3, &host, &v1, &v2, &v3, m, d, &cfg, &mut fresh(),
        ) {
            Ok(e) => e,
            Err(e) => {
                failures.push(format!("attempt {}: embedding failed: {e}", attempt - 1));
                record_artifact(
                    &artifact_dir,
                    &mut artifacts,
                    attempt - 1,
                    &t,
                    &host,
                    "embedding failed",
                );
                continue;
            }
        };
        let mut bad = validate_embedding(&emb);
        if !emb.is_complete() {
            bad.push("embedding is partial".into());
        }
        for (us, vs, label) in [(&u1, &v1, "class 1"), (&u2, &v2, "class 2"), (&u3, &v3, "class 3")]
        {
            for v in us.iter() {
                match emb.image_of(v) {
                    Some(hv) if vs.contains(hv) => {}
                    _ => bad.push(format!("{label} vertex {v} lands outside its host set")),
                }
            }
        }
        // Replay the grower's placement order and demand goodness in all
        // three views after every single placement.
        let mut prefix: Vec<(usize, usize)> = Vec::new();
        'steps: for &tv in t.bfs_order() {
            prefix.push((tv, emb.image_of(tv).expect("complete embedding")));
            let pe = match apply_embedding_pairs(&t, &host, &prefix) {
                Ok(p) => p,
                Err(e) => {
                    bad.push(format!("prefix of {} does not replay: {e}", prefix.len()));
                    break 'steps;
                }
            };
            for (i, (a, b)) in views.iter().enumerate() {
                let state = GoodState {
                    embedding: &pe,
                    parts: BipartiteHost::new(a.clone(), b.clone()).expect("host sides"),
                    m,
                    d,
                };
                match is_m_good(&state, &mut fresh()) {
                    Ok(v) if v.is_certified() => {}
                    Ok(v) => {
                        bad.push(format!(
                            "view {i} loses goodness after {} placements: {v:?}",
                            prefix.len()
                        ));
                        break 'steps;
                    }
                    Err(e) => {
                        bad.push(format!("view {i} goodness check errored: {e}"));
                        break 'steps;
                    }
                }
            }
        }
        if !bad.is_empty() {
            failures.push(format!("attempt {}: {}", attempt - 1, bad.join("; ")));
            record_artifact(
                &artifact_dir,
                &mut artifacts,
                attempt - 1,
                &t,
                &host,
                &bad[0],
            );
        }
    }
    let pass = failures.is_empty() && done == 300;
    report(
        7,
        "three-class embeddings stay good stepwise",
        pass,
        &format!(
            "{done} instances embedded, {skipped} skipped at precondition screening, \
             {} falsification artifacts{}",
            artifacts.len(),
            preview(&failures)
        ),
    );
}

#[test]
fn c8_transversal_triangles_at_calibrated_density() {
    // Calibration on record: at 300 vertices, density 0.3 and set size 20
    // the size condition holds with constant 1.0, and the observed
    // transversal-triangle rate must reach 95 percent.
    const NV: usize = 300;
    const P: f64 = 0.3;
    const M: usize = 20;
    const R: usize = 2;
    const C_CONST: f64 = 1.0;
    let check = janson_condition(NV, P, M, R, C_CONST).expect("size condition");
    let sets = [
        VertexSet::from_iter(NV, 0..M),
        VertexSet::from_iter(NV, M..2 * M),
        VertexSet::from_iter(NV, 2 * M..3 * M),
    ];
    let mut hits = 0usize;
    let mut failures: Vec<String> = Vec::new();
    for seed in 0..200u64 {
        let g = sample_gnp(NV, P, derive_seed(0xC8, seed)).expect("host");
        let cg = ColouredGraph::all_blue(g);
        match canonical_clique(cg.blue(), &sets, &mut fresh()) {
            Ok(Some(_)) => hits += 1,
            Ok(None) => {}
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let pass = check.holds && hits >= 190 && failures.is_empty();
    report(
        8,
        "transversal triangles at the calibrated size condition",
        pass,
        &format!(
            "condition holds: {} (lhs log {:.3}, rhs {:.3}), {hits}/200 samples carry a \
             transversal triangle, threshold 190{}",
            check.holds,
            check.lhs_log,
            check.rhs,
            preview(&failures)
        ),
    );
}

#[test]
fn c9_nonarrow_frequency_falls_with_host_size() {
    let config = SweepConfig {
        r: 2,
        degree_bound: 3,
        n_edges: 8,
        n_grid: (16..=28).collect(),
        p_grid: vec![0.5],
        strategies: vec![Strategy::Extremal],
        seeds: (0..100u64).collect(),
        tree_samples: 8,
        family_seed: 0,
        weakly_m: 0,
        wall_time: false,
        placement_budget: None,
        subset_budget: None,
    };
    let rows = mc_sweep(&config).expect("sweep");
    let mut failures: Vec<String> = Vec::new();
    let mut freqs: Vec<(usize, f64)> = Vec::new();
    for n_v in 16..=28usize {
        let group: Vec<_> = rows.iter().filter(|row| row.n_vertices == n_v).collect();
        if group.len() != 100 {
            failures.push(format!("{} rows at N = {n_v}", group.len()));
            continue;
        }
        for row in &group {
            if !matches!(
                row.verdict.as_str(),
                "blue-clique" | "red-family" | "red-tree-missing"
            ) {
                failures.push(format!(
                    "seed {} at N = {n_v} produced verdict {}",
                    row.seed, row.verdict
                ));
            }
        }
        let missing = group
            .iter()
            .filter(|row| row.verdict == "red-tree-missing")
            .count();
        freqs.push((n_v, missing as f64 / 100.0));
    }
    let mut inversions = 0usize;
    for w in freqs.windows(2) {
        let (_, a) = w[0];
        let (n_b, b) = w[1];
        if b > a {
            inversions += 1;
            let se = ((a * (1.0 - a) + b * (1.0 - b)) / 100.0).sqrt();
            if b - a > 2.0 * se {
                failures.push(format!(
                    "rise {a:.2} to {b:.2} at N = {n_b} exceeds two standard errors"
                ));
            }
        }
    }
    if inversions > 1 {
        failures.push(format!("{inversions} inversions"));
    }
    let profile = freqs
        .iter()
        .map(|(n_v, f)| format!("{n_v}:{f:.2}"))
        .collect::<Vec<_>>()
        .join(" ");
    report(
        9,
        "non-arrow frequency falls with host size",
        failures.is_empty(),
        &format!("{profile}{}", preview(&failures)),
    );
}
