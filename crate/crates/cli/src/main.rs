//! Command-line front end for the arrowing toolkit: generators, expansion
//! checks, tree embedding, arrowing decisions, the red-graph dichotomy,
//! Monte Carlo sweeps, and validators for every artifact the other
//! commands emit.
//!
//! Every command is a pure function of its flags, input files and seeds;
//! re-running an invocation writes byte-identical artifacts.  Exit codes:
//! 0 for positive outcomes, 1 for witnessed negative ones (the witness file
//! is always written first), 2 for budget, precondition, format and I/O
//! failures, 3 for usage errors.  Human diagnostics go to stderr; machine
//! artifacts only ever go to files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ramsey_trees::bitset::VertexSet;
use ramsey_trees::embed::{
    apply_embedding_pairs, haxell_embed, pairs_from_text, validate_embedding, EmbedConfig,
};
use ramsey_trees::expander::{check_strong, check_weak, extract_expander, VerdictKind};
use ramsey_trees::graph::{is_comment_line, sample_gnp, ColouredGraph, Graph};
use ramsey_trees::ramsey::{
    arrow_exhaustive, check_colouring, mc_sweep, sweep_csv, tree_family, validate_verdict,
    weakly_clique, ArrowOutcome, ArrowVerdict, SweepConfig, TreeFamily, WeaklyCliqueOutcome,
};
use ramsey_trees::subsets::{Budget, DEFAULT_SUBSET_CAP};
use ramsey_trees::tree::{
    cut_tree, gen_random_tree, validate_decomposition, SubtreeDecomposition, Tree,
};

#[derive(Parser)]
#[command(
    name = "ramsey-trees-cli",
    version,
    about = "Deterministic experiments on tree arrowing in coloured graphs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a binomial random graph and write it in the exchange format.
    GenGraph {
        /// Number of vertices.
        #[arg(long)]
        n: usize,
        /// Edge probability.
        #[arg(long)]
        p: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a random tree with bounded maximum degree.
    GenTree {
        /// Number of edges.
        #[arg(long)]
        n: usize,
        /// Maximum degree.
        #[arg(long = "D")]
        degree: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut a tree into small rooted subtrees with even-depth roots.
    CutTree {
        #[arg(long)]
        tree: PathBuf,
        /// Size parameter; pieces hold at most D^4*beta*|V| vertices.
        #[arg(long)]
        beta: f64,
        #[arg(long = "D")]
        degree: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check strong and weak expansion of a graph; violations exit 1.
    CheckExpander {
        #[arg(long)]
        graph: PathBuf,
        /// Small-set scale for both checks.
        #[arg(long)]
        m1: usize,
        /// Leftover scale for the weak pair condition.
        #[arg(long)]
        m2: usize,
        #[arg(long = "D")]
        degree: usize,
        /// Subset-scan budget (default 5000000).
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value = "expander-verdict.txt")]
        out: PathBuf,
    },
    /// Remove a small violating union so the rest expands strongly.
    ExtractExpander {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        m1: usize,
        #[arg(long)]
        m2: usize,
        #[arg(long = "D")]
        degree: usize,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed a tree into a graph; a proven non-embedding exits 1.
    Embed {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Pin a tree vertex to a host vertex, written tree:host.
        #[arg(long)]
        pin: Option<String>,
        /// Also certify the sufficient expansion conditions at this scale.
        #[arg(long)]
        certify_m: Option<usize>,
        /// Vertex placement budget (default 100000).
        #[arg(long)]
        placements: Option<u64>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search one colouring for a blue clique or an embedded red family.
    ArrowCheck {
        #[arg(long)]
        colouring: PathBuf,
        /// Blue clique size minus one.
        #[arg(long)]
        r: usize,
        /// Tree family spec, n<edges> or n<edges>d<degree>.
        #[arg(long)]
        family: String,
        /// Family size in the sampled regime.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        family_seed: u64,
        #[arg(long)]
        placements: Option<u64>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value = "arrow-verdict.txt")]
        out: PathBuf,
    },
    /// Decide arrowing by enumerating every colouring of the graph.
    ArrowExhaustive {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        family_seed: u64,
        #[arg(long)]
        placements: Option<u64>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value = "arrow-verdict.txt")]
        out: PathBuf,
        #[arg(long, default_value = "non-arrow-witness.txt")]
        witness: PathBuf,
    },
    /// Staged dichotomy on a red graph: universality or r+1 blue sets.
    WeaklyClique {
        /// The red graph.
        #[arg(long)]
        graph: PathBuf,
        /// Tree vertex count the universality certificate covers.
        #[arg(long)]
        n: usize,
        /// Size of the banked sets.
        #[arg(long)]
        m: usize,
        #[arg(long)]
        r: usize,
        #[arg(long = "D")]
        degree: usize,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value = "dichotomy.txt")]
        out: PathBuf,
        #[arg(long, default_value = "blue-sets.txt")]
        witness: PathBuf,
    },
    /// Run a Monte Carlo sweep from a JSON config and write the CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check an artifact written by another command; invalid exits 1.
    Validate {
        /// One of: graph, tree, colouring, embed, cut, expander,
        /// no-embed, missing-tree, non-arrow, blue-sets.
        #[arg(long)]
        kind: String,
        /// The artifact under validation.
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long)]
        colouring: Option<PathBuf>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        family_seed: u64,
        #[arg(long)]
        placements: Option<u64>,
        #[arg(long)]
        budget: Option<u64>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

fn limit(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        msg: msg.into(),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 3,
        msg: msg.into(),
    }
}

fn lim<E: std::fmt::Display>(e: E) -> Failure {
    limit(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8, Failure> {
    match cmd {
        Cmd::GenGraph { n, p, seed, out } => gen_graph(n, p, seed, &out),
        Cmd::GenTree {
            n,
            degree,
            seed,
            out,
        } => gen_tree(n, degree, seed, &out),
        Cmd::CutTree {
            tree,
            beta,
            degree,
            out,
        } => cut_tree_cmd(&tree, beta, degree, &out),
        Cmd::CheckExpander {
            graph,
            m1,
            m2,
            degree,
            budget,
            out,
        } => check_expander_cmd(&graph, m1, m2, degree, budget, &out),
        Cmd::ExtractExpander {
            graph,
            m1,
            m2,
            degree,
            budget,
            out,
        } => extract_expander_cmd(&graph, m1, m2, degree, budget, &out),
        Cmd::Embed {
            tree,
            graph,
            pin,
            certify_m,
            placements,
            budget,
            out,
        } => embed_cmd(&tree, &graph, pin.as_deref(), certify_m, placements, budget, &out),
        Cmd::ArrowCheck {
            colouring,
            r,
            family,
            samples,
            family_seed,
            placements,
            budget,
            out,
        } => arrow_check_cmd(
            &colouring,
            r,
            &family,
            samples,
            family_seed,
            placements,
            budget,
            &out,
        ),
        Cmd::ArrowExhaustive {
            graph,
            r,
            family,
            samples,
            family_seed,
            placements,
            budget,
            out,
            witness,
        } => arrow_exhaustive_cmd(
            &graph,
            r,
            &family,
            samples,
            family_seed,
            placements,
            budget,
            &out,
            &witness,
        ),
        Cmd::WeaklyClique {
            graph,
            n,
            m,
            r,
            degree,
            budget,
            out,
            witness,
        } => weakly_clique_cmd(&graph, n, m, r, degree, budget, &out, &witness),
        Cmd::Sweep { config, out } => sweep_cmd(&config, &out),
        Cmd::Validate {
            kind,
            file,
            graph,
            tree,
            colouring,
            r,
            family,
            samples,
            family_seed,
            placements,
            budget,
        } => validate_cmd(ValidateArgs {
            kind,
            file,
            graph,
            tree,
            colouring,
            r,
            family,
            samples,
            family_seed,
            placements,
            budget,
        }),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| limit(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| limit(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<Graph, Failure> {
    Graph::from_text(&read_file(path)?).map_err(|e| limit(format!("{}: {e}", path.display())))
}

fn load_tree(path: &Path) -> Result<Tree, Failure> {
    Tree::from_text(&read_file(path)?).map_err(|e| limit(format!("{}: {e}", path.display())))
}

fn load_colouring(path: &Path) -> Result<ColouredGraph, Failure> {
    ColouredGraph::from_text(&read_file(path)?)
        .map_err(|e| limit(format!("{}: {e}", path.display())))
}

/// File stem with whitespace collapsed, safe inside whitespace-split headers.
fn stem(path: &Path) -> String {
    let raw = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".to_string());
    raw.split_whitespace().collect::<Vec<_>>().join("_")
}

fn ids(set: &VertexSet) -> String {
    let strs: Vec<String> = set.iter().map(|v| v.to_string()).collect();
    strs.join(" ")
}

fn ids_slice(list: &[usize]) -> String {
    let strs: Vec<String> = list.iter().map(|v| v.to_string()).collect();
    strs.join(" ")
}

fn make_budget(cap: Option<u64>) -> Budget {
    Budget::new(cap.unwrap_or(DEFAULT_SUBSET_CAP))
}

fn embed_cfg(placements: Option<u64>) -> EmbedConfig {
    let mut cfg = EmbedConfig::default();
    if let Some(p) = placements {
        cfg.placement_budget = p;
    }
    cfg
}

/// Family spec `n<edges>` or `n<edges>d<degree>`; the degree bound
/// defaults to the edge count (no restriction beyond the star), floor 2.
fn parse_family(
    spec: &str,
    samples: usize,
    family_seed: u64,
) -> Result<TreeFamily, Failure> {
    let rest = spec
        .strip_prefix('n')
        .ok_or_else(|| usage(format!("family spec {spec:?} must look like n4 or n4d3")))?;
    let (edges_str, degree_str) = match rest.split_once('d') {
        Some((a, b)) => (a, Some(b)),
        None => (rest, None),
    };
    let n_edges: usize = edges_str
        .parse()
        .map_err(|_| usage(format!("bad edge count in family spec {spec:?}")))?;
    let degree = match degree_str {
        Some(b) => b
            .parse()
            .map_err(|_| usage(format!("bad degree bound in family spec {spec:?}")))?,
        None => n_edges.max(2),
    };
    tree_family(n_edges, degree, samples, family_seed).map_err(lim)
}

fn gen_graph(n: usize, p: f64, seed: u64, out: &Path) -> Result<u8, Failure> {
    let g = sample_gnp(n, p, seed).map_err(lim)?;
    let mut text = format!("c gen-graph n={n} p={p} seed={seed}\n");
    text.push_str(&g.to_text());
    write_file(out, &text)?;
    eprintln!(
        "wrote {} ({} vertices, {} edges)",
        out.display(),
        g.vertex_count(),
        g.edge_count()
    );
    Ok(0)
}

fn gen_tree(n: usize, degree: usize, seed: u64, out: &Path) -> Result<u8, Failure> {
    let t = gen_random_tree(n, degree, seed).map_err(lim)?;
    let mut text = format!("c gen-tree n={n} D={degree} seed={seed}\n");
    text.push_str(&t.to_text());
    write_file(out, &text)?;
    eprintln!(
        "wrote {} ({} edges, max degree {})",
        out.display(),
        t.edge_count(),
        t.max_degree()
    );
    Ok(0)
}

fn cut_tree_cmd(tree: &Path, beta: f64, degree: usize, out: &Path) -> Result<u8, Failure> {
    let t = load_tree(tree)?;
    let dec = cut_tree(&t, beta, degree).map_err(lim)?;
    let mut text = format!("c cut-tree tree={} beta={beta} D={degree}\n", stem(tree));
    let _ = writeln!(
        text,
        "p cut {} {} {beta} {degree}",
        dec.subtrees.len(),
        t.vertex_count()
    );
    for (set, root) in &dec.subtrees {
        let _ = writeln!(text, "{root} {}", ids(set));
    }
    write_file(out, &text)?;
    eprintln!(
        "wrote {} ({} pieces over {} vertices)",
        out.display(),
        dec.subtrees.len(),
        t.vertex_count()
    );
    Ok(0)
}

fn check_expander_cmd(
    graph: &Path,
    m1: usize,
    m2: usize,
    degree: usize,
    budget: Option<u64>,
    out: &Path,
) -> Result<u8, Failure> {
    let g = load_graph(graph)?;
    let all = g.vertices();
    let mut b = make_budget(budget);
    let header = format!(
        "c check-expander graph={} m1={m1} m2={m2} D={degree} budget={}\n",
        stem(graph),
        b.cap()
    );
    let strong = check_strong(&g, &all, m1, degree, &mut b).map_err(lim)?;
    let weak = if strong.is_certified() {
        Some(check_weak(&g, &all, m1, m2, &mut b).map_err(lim)?)
    } else {
        None
    };
    let violation = match &weak {
        None => Some(&strong.kind),
        Some(v) if !v.is_certified() => Some(&v.kind),
        Some(_) => None,
    };
    match violation {
        None => {
            let mut text = String::from("Certified\n");
            text.push_str(&header);
            let _ = writeln!(text, "m1 {m1}");
            let _ = writeln!(text, "m2 {m2}");
            let _ = writeln!(text, "D {degree}");
            let _ = writeln!(text, "strong {}", strong.to_record());
            let _ = writeln!(text, "weak {}", weak.as_ref().unwrap().to_record());
            write_file(out, &text)?;
            eprintln!("certified: strong and weak expansion hold");
            Ok(0)
        }
        Some(kind) => {
            let mut text = String::new();
            match kind {
                VerdictKind::SmallSetViolation { x, observed } => {
                    text.push_str("SmallSetViolation\n");
                    text.push_str(&header);
                    let _ = writeln!(text, "m1 {m1}");
                    let _ = writeln!(text, "m2 {m2}");
                    let _ = writeln!(text, "D {degree}");
                    let _ = writeln!(text, "x {}", ids_slice(x));
                    let _ = writeln!(text, "observed {observed}");
                }
                VerdictKind::WeakPairViolation { x, y } => {
                    text.push_str("WeakPairViolation\n");
                    text.push_str(&header);
                    let _ = writeln!(text, "m1 {m1}");
                    let _ = writeln!(text, "m2 {m2}");
                    let _ = writeln!(text, "D {degree}");
                    let _ = writeln!(text, "x {}", ids_slice(x));
                    let _ = writeln!(text, "y {}", ids_slice(y));
                }
                VerdictKind::Certified => unreachable!(),
            }
            write_file(out, &text)?;
            eprintln!("violation found, witness in {}", out.display());
            Ok(1)
        }
    }
}

fn extract_expander_cmd(
    graph: &Path,
    m1: usize,
    m2: usize,
    degree: usize,
    budget: Option<u64>,
    out: &Path,
) -> Result<u8, Failure> {
    let g = load_graph(graph)?;
    let all = g.vertices();
    let mut b = make_budget(budget);
    let ext = extract_expander(&g, &all, m1, m2, degree, &mut b).map_err(lim)?;
    let mut text = String::from("Extracted\n");
    let _ = writeln!(
        text,
        "c extract-expander graph={} m1={m1} m2={m2} D={degree} budget={}",
        stem(graph),
        b.cap()
    );
    let _ = writeln!(text, "kept {}", ids(&ext.kept));
    let _ = writeln!(text, "removed {}", ids(&ext.removed));
    write_file(out, &text)?;
    eprintln!(
        "kept {} vertices, removed {}",
        ext.kept.len(),
        ext.removed.len()
    );
    Ok(0)
}

fn parse_pin(spec: &str) -> Result<(usize, usize), Failure> {
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| usage(format!("pin {spec:?} must look like tree:host")))?;
    let tv = a
        .parse()
        .map_err(|_| usage(format!("bad tree vertex in pin {spec:?}")))?;
    let hv = b
        .parse()
        .map_err(|_| usage(format!("bad host vertex in pin {spec:?}")))?;
    Ok((tv, hv))
}

#[allow(clippy::too_many_arguments)]
fn embed_cmd(
    tree: &Path,
    graph: &Path,
    pin: Option<&str>,
    certify_m: Option<usize>,
    placements: Option<u64>,
    budget: Option<u64>,
    out: &Path,
) -> Result<u8, Failure> {
    let t = load_tree(tree)?;
    let g = load_graph(graph)?;
    let pin_pair = pin.map(parse_pin).transpose()?;
    let cfg = embed_cfg(placements);
    let mut b = make_budget(budget);
    let report = haxell_embed(&g, &t, pin_pair, certify_m, &cfg, &mut b).map_err(lim)?;
    let mut header = format!("c embed tree={} graph={}", stem(tree), stem(graph));
    if let Some((tv, hv)) = pin_pair {
        let _ = write!(header, " pin={tv}:{hv}");
    }
    if let Some(m) = certify_m {
        let _ = write!(header, " certify-m={m}");
    }
    let _ = write!(header, " placements={}", cfg.placement_budget);
    header.push('\n');
    if let Some(certified) = report.conditions_certified {
        let _ = writeln!(header, "c conditions-certified={certified}");
    }
    match report.embedding {
        Some(emb) => {
            let bad = validate_embedding(&emb);
            if !emb.is_complete() || !bad.is_empty() {
                return Err(limit(format!(
                    "embedding failed validation: {}",
                    bad.join("; ")
                )));
            }
            let mut text = header;
            text.push_str(&emb.to_text(&stem(tree), &stem(graph)));
            write_file(out, &text)?;
            eprintln!(
                "embedded {} tree vertices after {} placements",
                t.vertex_count(),
                report.placements
            );
            Ok(0)
        }
        None if report.exhausted => {
            let mut text = String::from("NoEmbedding\n");
            text.push_str(&header);
            let _ = writeln!(text, "tree-vertices {}", t.vertex_count());
            let _ = writeln!(text, "placements {}", report.placements);
            if let Some((tv, hv)) = pin_pair {
                let _ = writeln!(text, "pin {tv} {hv}");
            }
            text.push_str("exhaustive true\n");
            write_file(out, &text)?;
            eprintln!("no embedding exists, proof in {}", out.display());
            Ok(1)
        }
        None => Err(limit(format!(
            "placement budget {} exhausted before the search completed",
            cfg.placement_budget
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn arrow_check_cmd(
    colouring: &Path,
    r: usize,
    family_spec: &str,
    samples: usize,
    family_seed: u64,
    placements: Option<u64>,
    budget: Option<u64>,
    out: &Path,
) -> Result<u8, Failure> {
    let cg = load_colouring(colouring)?;
    let family = parse_family(family_spec, samples, family_seed)?;
    let cfg = embed_cfg(placements);
    let mut b = make_budget(budget);
    let verdict = check_colouring(&cg, r, &family, &cfg, &mut b).map_err(lim)?;
    let header = format!(
        "c arrow-check colouring={} r={r} family={family_spec} samples={samples} \
         family-seed={family_seed}\n",
        stem(colouring)
    );
    match verdict {
        ArrowVerdict::BlueClique { vertices } => {
            let mut text = String::from("BlueClique\n");
            text.push_str(&header);
            let _ = writeln!(text, "vertices {}", ids_slice(&vertices));
            write_file(out, &text)?;
            eprintln!("blue clique on {} vertices", vertices.len());
            Ok(0)
        }
        ArrowVerdict::RedFamilyEmbedded { embeddings, .. } => {
            let mut text = String::from("RedFamilyEmbedded\n");
            text.push_str(&header);
            let _ = writeln!(text, "trees {}", embeddings.len());
            write_file(out, &text)?;
            eprintln!("all {} family trees embed in the red graph", embeddings.len());
            Ok(0)
        }
        ArrowVerdict::RedTreeMissing {
            tree_index,
            exhaustive: true,
            placements: placed,
            ..
        } => {
            let mut text = String::from("MissingTree\n");
            text.push_str(&header);
            let _ = writeln!(text, "r {r}");
            let _ = writeln!(text, "family {family_spec}");
            let _ = writeln!(text, "samples {samples}");
            let _ = writeln!(text, "family-seed {family_seed}");
            let _ = writeln!(text, "tree-index {tree_index}");
            let _ = writeln!(text, "placements {placed}");
            text.push_str("exhaustive true\n");
            write_file(out, &text)?;
            eprintln!(
                "family tree {tree_index} provably missing from the red graph, \
                 witness in {}",
                out.display()
            );
            Ok(1)
        }
        ArrowVerdict::RedTreeMissing {
            tree_index,
            exhaustive: false,
            ..
        } => Err(limit(format!(
            "search for family tree {tree_index} hit the placement budget; \
             raise --placements for a proof"
        ))),
        ArrowVerdict::NonArrowWitness { .. } => Err(limit(
            "unexpected composite verdict from a single-colouring check",
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn arrow_exhaustive_cmd(
    graph: &Path,
    r: usize,
    family_spec: &str,
    samples: usize,
    family_seed: u64,
    placements: Option<u64>,
    budget: Option<u64>,
    out: &Path,
    witness: &Path,
) -> Result<u8, Failure> {
    let g = load_graph(graph)?;
    let family = parse_family(family_spec, samples, family_seed)?;
    let cfg = embed_cfg(placements);
    let mut b = make_budget(budget);
    let header = format!(
        "c arrow-exhaustive graph={} r={r} family={family_spec} samples={samples} \
         family-seed={family_seed}\n",
        stem(graph)
    );
    match arrow_exhaustive(&g, r, &family, &cfg, &mut b).map_err(lim)? {
        ArrowOutcome::Arrows { colourings } => {
            let mut text = String::from("Arrows\n");
            text.push_str(&header);
            let _ = writeln!(text, "colourings {colourings}");
            write_file(out, &text)?;
            eprintln!("arrows: all {colourings} colourings carry a witness");
            Ok(0)
        }
        ArrowOutcome::NonArrow(cg) => {
            let mut wtext = format!(
                "c non-arrow graph={} r={r} family={family_spec} samples={samples} \
                 family-seed={family_seed}\n",
                stem(graph)
            );
            wtext.push_str(&cg.to_text());
            write_file(witness, &wtext)?;
            let mut text = String::from("NonArrow\n");
            text.push_str(&header);
            let _ = writeln!(text, "witness {}", stem(witness));
            write_file(out, &text)?;
            eprintln!(
                "does not arrow; witness colouring in {}",
                witness.display()
            );
            Ok(1)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn weakly_clique_cmd(
    graph: &Path,
    n: usize,
    m: usize,
    r: usize,
    degree: usize,
    budget: Option<u64>,
    out: &Path,
    witness: &Path,
) -> Result<u8, Failure> {
    let g = load_graph(graph)?;
    let mut b = make_budget(budget);
    let header = format!(
        "c weakly-clique graph={} n={n} m={m} r={r} D={degree} budget={}\n",
        stem(graph),
        b.cap()
    );
    match weakly_clique(&g, n, m, r, degree, &mut b).map_err(lim)? {
        WeaklyCliqueOutcome::Universality(cert) => {
            let mut text = String::from("Universality\n");
            text.push_str(&header);
            let _ = writeln!(text, "stage {}", cert.stage);
            let _ = writeln!(text, "m {}", cert.m);
            let _ = writeln!(text, "pair-scale {}", cert.m_s);
            let _ = writeln!(text, "removed {}", ids(&cert.removed));
            let _ = writeln!(text, "kept {}", ids(&cert.v_prime));
            write_file(out, &text)?;
            eprintln!(
                "universal: {} certified vertices at stage {}",
                cert.v_prime.len(),
                cert.stage
            );
            Ok(0)
        }
        WeaklyCliqueOutcome::BlueSets(sets) => {
            let mut wtext = header.clone();
            let _ = writeln!(wtext, "p blue-sets {} {m}", sets.len());
            for set in &sets {
                let _ = writeln!(wtext, "{}", ids(set));
            }
            write_file(witness, &wtext)?;
            let mut text = String::from("BlueSets\n");
            text.push_str(&header);
            let _ = writeln!(text, "count {}", sets.len());
            let _ = writeln!(text, "witness {}", stem(witness));
            write_file(out, &text)?;
            eprintln!(
                "{} mutually red-edge-free {m}-sets, witness in {}",
                sets.len(),
                witness.display()
            );
            Ok(1)
        }
    }
}

fn sweep_cmd(config: &Path, out: &Path) -> Result<u8, Failure> {
    let text = read_file(config)?;
    let cfg: SweepConfig = serde_json::from_str(&text)
        .map_err(|e| limit(format!("{}: {e}", config.display())))?;
    let rows = mc_sweep(&cfg).map_err(lim)?;
    write_file(out, &sweep_csv(&rows))?;
    eprintln!("wrote {} ({} rows)", out.display(), rows.len());
    Ok(0)
}

struct ValidateArgs {
    kind: String,
    file: PathBuf,
    graph: Option<PathBuf>,
    tree: Option<PathBuf>,
    colouring: Option<PathBuf>,
    r: Option<usize>,
    family: Option<String>,
    samples: usize,
    family_seed: u64,
    placements: Option<u64>,
    budget: Option<u64>,
}

/// Token line plus key-value lines, comments skipped.
struct Record {
    token: String,
    fields: Vec<(String, String)>,
}

impl Record {
    fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, Failure> {
        self.get(key)
            .ok_or_else(|| limit(format!("record is missing a {key} line")))
    }
}

fn parse_record(text: &str) -> Result<Record, Failure> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !is_comment_line(l));
    let token = lines
        .next()
        .ok_or_else(|| limit("record file is empty"))?
        .trim()
        .to_string();
    let mut fields = Vec::new();
    for line in lines {
        let mut it = line.trim().splitn(2, char::is_whitespace);
        let key = it.next().unwrap_or("").to_string();
        let value = it.next().unwrap_or("").trim().to_string();
        fields.push((key, value));
    }
    Ok(Record { token, fields })
}

fn parse_id_list(text: &str, universe: usize) -> Result<Vec<usize>, Failure> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        let v: usize = tok
            .parse()
            .map_err(|_| limit(format!("bad vertex id {tok:?}")))?;
        if v >= universe {
            return Err(limit(format!("vertex {v} outside a {universe}-vertex graph")));
        }
        out.push(v);
    }
    Ok(out)
}

fn report_invalid(problems: &[String]) -> u8 {
    for p in problems {
        eprintln!("invalid: {p}");
    }
    1
}

fn need<T>(opt: Option<T>, flag: &str, kind: &str) -> Result<T, Failure> {
    opt.ok_or_else(|| usage(format!("validate --kind {kind} needs {flag}")))
}

fn validate_cmd(args: ValidateArgs) -> Result<u8, Failure> {
    match args.kind.as_str() {
        "graph" => match Graph::from_text(&read_file(&args.file)?) {
            Ok(g) => {
                eprintln!("valid graph: {} vertices, {} edges", g.vertex_count(), g.edge_count());
                Ok(0)
            }
            Err(e) => Ok(report_invalid(&[e.to_string()])),
        },
        "tree" => match Tree::from_text(&read_file(&args.file)?) {
            Ok(t) => {
                eprintln!("valid tree: {} edges", t.edge_count());
                Ok(0)
            }
            Err(e) => Ok(report_invalid(&[e.to_string()])),
        },
        "colouring" => match ColouredGraph::from_text(&read_file(&args.file)?) {
            Ok(cg) => {
                eprintln!(
                    "valid colouring: {} vertices, {} edges",
                    cg.vertex_count(),
                    cg.base().edge_count()
                );
                Ok(0)
            }
            Err(e) => Ok(report_invalid(&[e.to_string()])),
        },
        "embed" => validate_embed(&args),
        "cut" => validate_cut(&args),
        "expander" => validate_expander(&args),
        "no-embed" => validate_no_embed(&args),
        "missing-tree" => validate_missing_tree(&args),
        "non-arrow" => validate_non_arrow(&args),
        "blue-sets" => validate_blue_sets(&args),
        other => Err(usage(format!("unknown validation kind {other:?}"))),
    }
}

fn validate_embed(args: &ValidateArgs) -> Result<u8, Failure> {
    let tree_path = need(args.tree.as_ref(), "--tree", "embed")?;
    let graph_path = need(args.graph.as_ref(), "--graph", "embed")?;
    let t = load_tree(tree_path)?;
    let g = load_graph(graph_path)?;
    let (_, _, pairs) = match pairs_from_text(&read_file(&args.file)?) {
        Ok(parsed) => parsed,
        Err(e) => return Ok(report_invalid(&[e.to_string()])),
    };
    let emb = match apply_embedding_pairs(&t, &g, &pairs) {
        Ok(emb) => emb,
        Err(e) => return Ok(report_invalid(&[e.to_string()])),
    };
    let mut problems = validate_embedding(&emb);
    if !emb.is_complete() {
        problems.push(format!(
            "only {} of {} tree vertices placed",
            emb.len(),
            t.vertex_count()
        ));
    }
    if problems.is_empty() {
        eprintln!("valid embedding of {} tree vertices", t.vertex_count());
        Ok(0)
    } else {
        Ok(report_invalid(&problems))
    }
}

fn validate_cut(args: &ValidateArgs) -> Result<u8, Failure> {
    let tree_path = need(args.tree.as_ref(), "--tree", "cut")?;
    let t = load_tree(tree_path)?;
    let text = read_file(&args.file)?;
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !is_comment_line(l));
    let header = lines.next().ok_or_else(|| limit("cut artifact is empty"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "p" || parts[1] != "cut" {
        return Ok(report_invalid(&[format!("bad header {header:?}")]));
    }
    let count: usize = parts[2].parse().map_err(lim)?;
    let n_vertices: usize = parts[3].parse().map_err(lim)?;
    let beta: f64 = parts[4].parse().map_err(lim)?;
    let degree: usize = parts[5].parse().map_err(lim)?;
    if n_vertices != t.vertex_count() {
        return Ok(report_invalid(&[format!(
            "artifact covers {n_vertices} vertices, tree has {}",
            t.vertex_count()
        )]));
    }
    let mut subtrees = Vec::with_capacity(count);
    for line in lines {
        let toks = parse_id_list(line, n_vertices)?;
        let (&root, rest) = toks
            .split_first()
            .ok_or_else(|| limit("empty subtree line"))?;
        subtrees.push((VertexSet::from_iter(n_vertices, rest.iter().copied()), root));
    }
    if subtrees.len() != count {
        return Ok(report_invalid(&[format!(
            "header promises {count} pieces, file holds {}",
            subtrees.len()
        )]));
    }
    let mut piece_of = vec![usize::MAX; n_vertices];
    for (i, (set, _)) in subtrees.iter().enumerate() {
        for v in set.iter() {
            if piece_of[v] != usize::MAX {
                return Ok(report_invalid(&[format!("vertex {v} appears twice")]));
            }
            piece_of[v] = i;
        }
    }
    if piece_of.iter().any(|&p| p == usize::MAX) {
        return Ok(report_invalid(&["pieces do not cover the tree".to_string()]));
    }
    let mut cluster_edges = Vec::new();
    for (u, v) in t.edges() {
        let (a, b) = (piece_of[u], piece_of[v]);
        if a != b {
            cluster_edges.push((a.min(b), a.max(b)));
        }
    }
    cluster_edges.sort_unstable();
    cluster_edges.dedup();
    let cluster_tree = match Tree::from_edges(subtrees.len(), cluster_edges) {
        Ok(ct) => ct,
        Err(e) => return Ok(report_invalid(&[format!("piece adjacency is not a tree: {e}")])),
    };
    let dec = SubtreeDecomposition {
        subtrees,
        cluster_tree,
        beta,
        degree_bound: degree,
    };
    let violations = validate_decomposition(&t, &dec);
    if violations.is_empty() {
        eprintln!("valid decomposition: {count} pieces");
        Ok(0)
    } else {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        Ok(report_invalid(&msgs))
    }
}

fn validate_expander(args: &ValidateArgs) -> Result<u8, Failure> {
    let graph_path = need(args.graph.as_ref(), "--graph", "expander")?;
    let g = load_graph(graph_path)?;
    let n = g.vertex_count();
    let all = g.vertices();
    let rec = parse_record(&read_file(&args.file)?)?;
    match rec.token.as_str() {
        "Certified" => {
            let mut b = make_budget(args.budget);
            let m1: usize = rec.require("m1")?.parse().map_err(lim)?;
            let m2: usize = rec.require("m2")?.parse().map_err(lim)?;
            let degree: usize = rec.require("D")?.parse().map_err(lim)?;
            let strong = check_strong(&g, &all, m1, degree, &mut b).map_err(lim)?;
            let weak = check_weak(&g, &all, m1, m2, &mut b).map_err(lim)?;
            if strong.is_certified() && weak.is_certified() {
                eprintln!("certification reproduced");
                Ok(0)
            } else {
                Ok(report_invalid(&["re-check found a violation".to_string()]))
            }
        }
        "SmallSetViolation" => {
            let m1: usize = rec.require("m1")?.parse().map_err(lim)?;
            let degree: usize = rec.require("D")?.parse().map_err(lim)?;
            let x = parse_id_list(rec.require("x")?, n)?;
            let observed: usize = rec.require("observed")?.parse().map_err(lim)?;
            let mut problems = Vec::new();
            if x.is_empty() || x.len() > m1 {
                problems.push(format!("|X| = {} outside 1..={m1}", x.len()));
            }
            let xset = VertexSet::from_iter(n, x.iter().copied());
            if xset.len() != x.len() {
                problems.push("X repeats a vertex".to_string());
            }
            let ext = g.ext_neighbourhood_in(&xset, &all);
            if ext != observed {
                problems.push(format!("recount found {ext} external neighbours, not {observed}"));
            }
            if ext > degree * x.len() {
                problems.push(format!(
                    "{ext} external neighbours exceed D|X| = {}",
                    degree * x.len()
                ));
            }
            if problems.is_empty() {
                eprintln!("small-set violation confirmed");
                Ok(0)
            } else {
                Ok(report_invalid(&problems))
            }
        }
        "WeakPairViolation" => {
            let m1: usize = rec.require("m1")?.parse().map_err(lim)?;
            let m2: usize = rec.require("m2")?.parse().map_err(lim)?;
            let x = parse_id_list(rec.require("x")?, n)?;
            let y = parse_id_list(rec.require("y")?, n)?;
            let xset = VertexSet::from_iter(n, x.iter().copied());
            let yset = VertexSet::from_iter(n, y.iter().copied());
            let mut problems = Vec::new();
            if xset.len() != m1 {
                problems.push(format!("|X| = {}, expected {m1}", xset.len()));
            }
            if yset.len() != m2 {
                problems.push(format!("|Y| = {}, expected {m2}", yset.len()));
            }
            if !xset.is_disjoint(&yset) {
                problems.push("X and Y intersect".to_string());
            }
            let crossing = g.edges_between(&xset, &yset);
            if crossing != 0 {
                problems.push(format!("{crossing} edges join X and Y"));
            }
            if problems.is_empty() {
                eprintln!("weak-pair violation confirmed");
                Ok(0)
            } else {
                Ok(report_invalid(&problems))
            }
        }
        other => Ok(report_invalid(&[format!("unknown expander token {other:?}")])),
    }
}

fn validate_no_embed(args: &ValidateArgs) -> Result<u8, Failure> {
    let tree_path = need(args.tree.as_ref(), "--tree", "no-embed")?;
    let graph_path = need(args.graph.as_ref(), "--graph", "no-embed")?;
    let t = load_tree(tree_path)?;
    let g = load_graph(graph_path)?;
    let rec = parse_record(&read_file(&args.file)?)?;
    if rec.token != "NoEmbedding" {
        return Ok(report_invalid(&[format!("unexpected token {:?}", rec.token)]));
    }
    let pin = match rec.get("pin") {
        Some(text) => {
            let toks = parse_id_list(text, usize::MAX)?;
            if toks.len() != 2 {
                return Ok(report_invalid(&["bad pin line".to_string()]));
            }
            Some((toks[0], toks[1]))
        }
        None => None,
    };
    let cfg = embed_cfg(Some(args.placements.unwrap_or(u64::MAX / 2)));
    let mut b = make_budget(args.budget);
    let report = haxell_embed(&g, &t, pin, None, &cfg, &mut b).map_err(lim)?;
    if report.embedding.is_none() && report.exhausted {
        eprintln!("non-embedding reproduced exhaustively");
        Ok(0)
    } else {
        Ok(report_invalid(&["re-search found an embedding".to_string()]))
    }
}

fn validate_missing_tree(args: &ValidateArgs) -> Result<u8, Failure> {
    let col_path = need(args.colouring.as_ref(), "--colouring", "missing-tree")?;
    let cg = load_colouring(col_path)?;
    let rec = parse_record(&read_file(&args.file)?)?;
    if rec.token != "MissingTree" {
        return Ok(report_invalid(&[format!("unexpected token {:?}", rec.token)]));
    }
    let family_spec = rec.require("family")?;
    let samples: usize = rec.require("samples")?.parse().map_err(lim)?;
    let family_seed: u64 = rec.require("family-seed")?.parse().map_err(lim)?;
    let tree_index: usize = rec.require("tree-index")?.parse().map_err(lim)?;
    let family = parse_family(family_spec, samples, family_seed)?;
    let Some(t) = family.trees.get(tree_index) else {
        return Ok(report_invalid(&[format!(
            "tree index {tree_index} outside a family of {}",
            family.trees.len()
        )]));
    };
    let cfg = embed_cfg(Some(args.placements.unwrap_or(u64::MAX / 2)));
    let mut b = make_budget(args.budget);
    let report = haxell_embed(cg.red(), t, None, None, &cfg, &mut b).map_err(lim)?;
    if report.embedding.is_none() && report.exhausted {
        eprintln!("missing tree reproduced exhaustively");
        Ok(0)
    } else {
        Ok(report_invalid(&[format!(
            "family tree {tree_index} embeds in the red graph after all"
        )]))
    }
}

fn validate_non_arrow(args: &ValidateArgs) -> Result<u8, Failure> {
    let r = need(args.r, "--r", "non-arrow")?;
    let family_spec = need(args.family.as_deref(), "--family", "non-arrow")?;
    let cg = load_colouring(&args.file)?;
    let family = parse_family(family_spec, args.samples, args.family_seed)?;
    let cfg = embed_cfg(args.placements);
    let mut b = make_budget(args.budget);
    let verdict = ArrowVerdict::NonArrowWitness {
        colouring: Box::new(cg.clone()),
    };
    let problems = validate_verdict(&cg, r, &family, &verdict, &cfg, &mut b).map_err(lim)?;
    if problems.is_empty() {
        eprintln!("non-arrowing witness confirmed");
        Ok(0)
    } else {
        Ok(report_invalid(&problems))
    }
}

fn validate_blue_sets(args: &ValidateArgs) -> Result<u8, Failure> {
    let graph_path = need(args.graph.as_ref(), "--graph", "blue-sets")?;
    let g = load_graph(graph_path)?;
    let n = g.vertex_count();
    let text = read_file(&args.file)?;
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !is_comment_line(l));
    let header = lines
        .next()
        .ok_or_else(|| limit("blue-sets artifact is empty"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "p" || parts[1] != "blue-sets" {
        return Ok(report_invalid(&[format!("bad header {header:?}")]));
    }
    let count: usize = parts[2].parse().map_err(lim)?;
    let m: usize = parts[3].parse().map_err(lim)?;
    let mut sets = Vec::with_capacity(count);
    for line in lines {
        let toks = parse_id_list(line, n)?;
        sets.push(VertexSet::from_iter(n, toks.iter().copied()));
    }
    let mut problems = Vec::new();
    if sets.len() != count {
        problems.push(format!("header promises {count} sets, file holds {}", sets.len()));
    }
    for (i, set) in sets.iter().enumerate() {
        if set.len() != m {
            problems.push(format!("set {i} has {} vertices, expected {m}", set.len()));
        }
    }
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if !sets[i].is_disjoint(&sets[j]) {
                problems.push(format!("sets {i} and {j} intersect"));
            }
            let crossing = g.edges_between(&sets[i], &sets[j]);
            if crossing != 0 {
                problems.push(format!("{crossing} red edges join sets {i} and {j}"));
            }
        }
    }
    if problems.is_empty() {
        eprintln!("blue-sets witness confirmed: {count} sets of size {m}");
        Ok(0)
    } else {
        Ok(report_invalid(&problems))
    }
}
