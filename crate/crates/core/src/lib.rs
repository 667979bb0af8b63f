//! Graph-side machinery for Ramsey arrowing experiments with bounded-degree
//! trees: deterministic random graphs, expansion certificates, tree embedding
//! via expansion conditions, tree decompositions, reduced-graph structures,
//! and colouring adversaries with exhaustive small-case arrowing checks.

pub mod bitset;
pub mod embed;
pub mod expander;
pub mod graph;
pub mod matching;
pub mod ramsey;
pub mod reduced;
pub mod rng;
pub mod subsets;
pub mod tree;

pub use bitset::VertexSet;
pub use graph::{ColouredGraph, Colour, Graph};
pub use tree::Tree;
