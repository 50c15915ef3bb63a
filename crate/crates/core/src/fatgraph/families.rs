//! Concrete graphs: quotients of the half-integer square grid by a lattice of
//! translations and the `X_n` family built from them.

use std::collections::{BTreeMap, BTreeSet};

use super::{FatGraph, FatGraphError, VertexId, VertexRecord};

/// Width (in squares) of the torus grid underlying the `X_n` family.
pub const XN_GRID_WIDTH: i64 = 4;

/// Rows of the grid that are kept fixed across the family; `X_n` adds `2n`.
const XN_FIXED_ROWS: i64 = 4;

// Dart directions at a grid vertex, in counter-clockwise order.
const EAST: u32 = 0;
const NORTH: u32 = 1;
const WEST: u32 = 2;
const SOUTH: u32 = 3;

fn floor_div(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

struct Lattice {
    v1: (i64, i64),
    v2: (i64, i64),
    det: i64,
}

impl Lattice {
    fn new(v1: (i64, i64), v2: (i64, i64)) -> Result<Lattice, FatGraphError> {
        let det = v1.0 * v2.1 - v1.1 * v2.0;
        if det == 0 {
            return Err(FatGraphError::DegenerateLattice(v1, v2));
        }
        Ok(Lattice { v1, v2, det })
    }

    /// Unique representative of `p` in the half-open parallelogram spanned by
    /// the generators.
    fn reduce(&self, p: (i64, i64)) -> (i64, i64) {
        // p = s·v1 + t·v2 with s = num_s / det, t = num_t / det
        let num_s = p.0 * self.v2.1 - p.1 * self.v2.0;
        let num_t = self.v1.0 * p.1 - self.v1.1 * p.0;
        let fs = floor_div(num_s, self.det);
        let ft = floor_div(num_t, self.det);
        (p.0 - fs * self.v1.0 - ft * self.v2.0, p.1 - fs * self.v1.1 - ft * self.v2.1)
    }

    fn representatives(&self) -> Vec<(i64, i64)> {
        let xs = [0, self.v1.0, self.v2.0, self.v1.0 + self.v2.0];
        let ys = [0, self.v1.1, self.v2.1, self.v1.1 + self.v2.1];
        let (x0, x1) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
        let (y0, y1) = (*ys.iter().min().unwrap(), *ys.iter().max().unwrap());
        let mut reps = BTreeSet::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                reps.insert((y, x));
            }
        }
        let mut out: BTreeSet<(i64, i64)> = BTreeSet::new();
        for (y, x) in reps {
            let r = self.reduce((x, y));
            out.insert((r.1, r.0));
        }
        out.into_iter().map(|(y, x)| (x, y)).collect()
    }
}

/// The quotient of the half-integer grid fatgraph of the plane (vertices at
/// `ℤ² + (½, ½)`, unit horizontal and vertical edges, planar cyclic order)
/// by the translation lattice spanned by `v1` and `v2`.
///
/// Vertex `i` is the `i`-th class in (row, column) order of the representative
/// `(a, b)` of the point `(a + ½, b + ½)`; its darts are `4i + {E, N, W, S}`.
pub fn lattice_quotient_graph(v1: (i64, i64), v2: (i64, i64)) -> Result<FatGraph, FatGraphError> {
    let lat = Lattice::new(v1, v2)?;
    let reps = lat.representatives();
    let index: BTreeMap<(i64, i64), u32> = reps.iter().enumerate().map(|(i, p)| (*p, i as u32)).collect();
    let vertices: Vec<VertexRecord> = (0..reps.len() as u32)
        .map(|i| VertexRecord { id: i, darts: vec![4 * i + EAST, 4 * i + NORTH, 4 * i + WEST, 4 * i + SOUTH] })
        .collect();
    let mut edges = Vec::with_capacity(2 * reps.len());
    for (i, &(a, b)) in reps.iter().enumerate() {
        let i = i as u32;
        let east = index[&lat.reduce((a + 1, b))];
        let north = index[&lat.reduce((a, b + 1))];
        edges.push([4 * i + EAST, 4 * east + WEST]);
        edges.push([4 * i + NORTH, 4 * north + SOUTH]);
    }
    FatGraph::new(vertices, edges, BTreeMap::new(), None)
}

/// The two-vertex, four-edge fatgraph on a twice-punctured torus: the grid
/// quotient by the lattice generated by `(2,0)` and `(1,1)`.
pub fn two_holed_torus_example() -> FatGraph {
    lattice_quotient_graph((2, 0), (1, 1)).expect("independent lattice")
}

/// `X_n`: the square grid on a torus of width 4 and height `2n + 4`, with the
/// cyclic order reversed at vertex 0. Every vertex has valence 4; vertex 0 is
/// the only vertex not touching a quadrilateral face.
pub fn family_xn(n: u32) -> Result<FatGraph, FatGraphError> {
    if n == 0 {
        return Err(FatGraphError::InvalidParameter("X_n is defined for n ≥ 1".to_string()));
    }
    let height = XN_FIXED_ROWS + 2 * n as i64;
    let grid = lattice_quotient_graph((XN_GRID_WIDTH, 0), (0, height))?;
    let mut vertices = grid.vertices().to_vec();
    let d = &mut vertices[0].darts;
    d[1..].reverse();
    FatGraph::new(vertices, grid.edges().to_vec(), BTreeMap::new(), None)
}

/// The unique vertex not adjacent to any face of length 4, if there is exactly
/// one.
pub fn special_vertex(g: &FatGraph) -> Option<VertexId> {
    let faces = g.trace_boundary_faces();
    let mut touched = vec![false; g.vertex_count()];
    let topo = g.topo();
    for f in faces.iter().filter(|f| f.len() == 4) {
        for d in &f.darts {
            let i = g.dart_index(*d).expect("face dart indexed");
            touched[topo.vertex_of[i]] = true;
        }
    }
    let free: Vec<usize> = (0..g.vertex_count()).filter(|v| !touched[*v]).collect();
    match free.as_slice() {
        [v] => Some(g.vertices()[*v].id),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fatgraph::isomorphisms;

    /// Independent orbit count: enumerate a large box of grid points and
    /// count classes by brute-force membership tests.
    fn orbit_count(v1: (i64, i64), v2: (i64, i64)) -> usize {
        let same = |p: (i64, i64), q: (i64, i64)| {
            let (dx, dy) = (p.0 - q.0, p.1 - q.1);
            (-20..=20).any(|s| (-20..=20).any(|t| s * v1.0 + t * v2.0 == dx && s * v1.1 + t * v2.1 == dy))
        };
        let mut reps: Vec<(i64, i64)> = Vec::new();
        for x in -6..=6 {
            for y in -6..=6 {
                if !reps.iter().any(|r| same(*r, (x, y))) {
                    reps.push((x, y));
                }
            }
        }
        reps.len()
    }

    #[test]
    fn lattice_counts() {
        let g = lattice_quotient_graph((2, 0), (1, 1)).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (2, 4));
        let g = lattice_quotient_graph((1, 0), (0, 1)).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (1, 2));
        let g = lattice_quotient_graph((2, 0), (0, 2)).unwrap();
        assert_eq!(orbit_count((2, 0), (0, 2)), 4);
        assert_eq!((g.vertex_count(), g.edge_count()), (4, 8));
        for (v1, v2) in [((3, 1), (1, 2)), ((2, -1), (1, 3)), ((0, 2), (2, 0))] {
            let g = lattice_quotient_graph(v1, v2).unwrap();
            assert_eq!(g.vertex_count(), orbit_count(v1, v2));
            assert_eq!(g.edge_count(), 2 * g.vertex_count());
        }
    }

    #[test]
    fn degenerate_lattice() {
        assert_eq!(
            lattice_quotient_graph((2, 1), (4, 2)).unwrap_err(),
            FatGraphError::DegenerateLattice((2, 1), (4, 2))
        );
    }

    #[test]
    fn parity_lattices_are_admissible() {
        assert!(lattice_quotient_graph((2, 0), (1, 1)).unwrap().is_admissible());
        assert!(lattice_quotient_graph((2, 0), (0, 2)).unwrap().is_admissible());
        assert!(!lattice_quotient_graph((1, 0), (0, 1)).unwrap().is_admissible());
        assert!(!lattice_quotient_graph((3, 0), (0, 2)).unwrap().is_admissible());
    }

    #[test]
    fn xn_properties() {
        for n in 1..=3u32 {
            let g = family_xn(n).unwrap();
            assert!(g.is_admissible(), "X_{n} admissible");
            assert!(g.vertices().iter().all(|v| v.darts.len() == 4));
            assert_eq!(special_vertex(&g), Some(0));
            assert_eq!(g.vertex_count() as i64, XN_GRID_WIDTH * (4 + 2 * n as i64));
        }
        assert!(family_xn(0).is_err());
    }

    #[test]
    fn xn_surfaces_differ() {
        let gs: Vec<_> = (1..=3).map(|n| family_xn(n).unwrap()).collect();
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!(isomorphisms(&gs[i], &gs[j], true, true).is_empty());
                assert_ne!((gs[i].genus(), gs[i].face_count()), (gs[j].genus(), gs[j].face_count()));
            }
        }
    }
}
