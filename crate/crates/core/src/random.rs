//! Seeded random fatgraphs for tests and benchmarks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::fatgraph::{FatGraph, Role, VertexRecord};
use crate::model_block::Sign;
use crate::seifert_piece::build_piece;

/// A 4-valent graph on `n` vertices with a uniformly random matching of
/// darts. Darts at vertex `i` are `4i..4i+4`.
pub fn random_valence4_graph<R: Rng + ?Sized>(rng: &mut R, n: usize) -> FatGraph {
    let vertices: Vec<VertexRecord> =
        (0..n as u32).map(|i| VertexRecord { id: i, darts: (4 * i..4 * i + 4).collect() }).collect();
    let mut darts: Vec<u32> = (0..4 * n as u32).collect();
    darts.shuffle(rng);
    let edges = darts.chunks(2).map(|c| [c[0], c[1]]).collect();
    FatGraph::new(vertices, edges, BTreeMap::new(), None).expect("well formed by construction")
}

/// Connected, admissible, with as many In faces as Out faces and a
/// consistent edge frame, so that the piece over it can be glued to itself.
pub fn is_self_gluable(g: &FatGraph) -> bool {
    if g.connected_components() != 1 || !g.is_admissible() {
        return false;
    }
    let Some(roles) = g.face_roles() else {
        return false;
    };
    let ins = roles.iter().filter(|r| **r == Role::In).count();
    2 * ins == roles.len() && build_piece(g, Sign::Plus, 1.0).is_ok()
}

/// Like [`random_valence4_graph`], but even darts are only matched with even
/// darts and odd with odd. Every corner then separates a face through an even
/// dart from one through an odd dart, which makes admissibility far more
/// likely.
pub fn random_parity_graph<R: Rng + ?Sized>(rng: &mut R, n: usize) -> FatGraph {
    let vertices: Vec<VertexRecord> =
        (0..n as u32).map(|i| VertexRecord { id: i, darts: (4 * i..4 * i + 4).collect() }).collect();
    let mut edges = Vec::with_capacity(2 * n);
    for parity in 0..2 {
        let mut darts: Vec<u32> = (0..4 * n as u32).filter(|d| d % 2 == parity).collect();
        darts.shuffle(rng);
        edges.extend(darts.chunks(2).map(|c| [c[0], c[1]]));
    }
    FatGraph::new(vertices, edges, BTreeMap::new(), None).expect("well formed by construction")
}

/// Rejection-samples a self-gluable 4-valent graph with at most `max_edges`
/// edges. The vertex count is drawn first, uniformly among even counts (a
/// balanced graph has an even number of faces, hence of vertices), so that
/// large graphs are not crowded out by their lower acceptance rate. Returns
/// `None` if `attempts` draws all fail.
pub fn random_admissible_graph<R: Rng + ?Sized>(rng: &mut R, max_edges: usize, attempts: usize) -> Option<FatGraph> {
    let pairs = max_edges / 4;
    if pairs == 0 {
        return None;
    }
    let n = 2 * rng.gen_range(1..=pairs);
    for _ in 0..attempts {
        let g = random_parity_graph(rng, n);
        if is_self_gluable(&g) {
            return Some(g);
        }
    }
    None
}
