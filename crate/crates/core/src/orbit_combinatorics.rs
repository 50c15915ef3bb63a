//! Finite pieces of orbit-space structure: balls in the fat tree covering a
//! piece's spine, lozenges with their side slots, lines of lozenges and sign
//! labels.
//!
//! A tree vertex is a corner orbit with four quadrants `0..4` in
//! counter-clockwise order. Half-leaf `h_k` separates quadrant `k` from
//! quadrant `k + 1`; stable and unstable half-leaves alternate. An edge of the
//! tree is a lozenge occupying one quadrant at each of its corners, and two
//! lozenges in adjacent quadrants of a common corner share the half-leaf
//! between them as a side.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fatgraph::{Role, VertexId, VertexMarking};
use crate::manifold_assembly::GluedFlow;
use crate::model_block::Sign;
use crate::seifert_piece::SeifertPiece;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrbitError {
    #[error("vertex {0} carries a marking the fat tree does not support")]
    UnsupportedMarking(VertexId),
    #[error("lozenge {0} touches the truncation boundary")]
    NotInterior(usize),
    #[error("flows do not share pieces and gluings")]
    IncomparableFlows,
    #[error("malformed ball: {0}")]
    MalformedBall(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideKind {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideSlot {
    Free,
    Shared(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeVertex {
    pub id: usize,
    /// Vertex of the folded fatgraph, when the ball came from a piece.
    pub image: Option<VertexId>,
    pub depth: usize,
    /// Lies just outside the ball; only its edge towards the root is known.
    pub frontier: bool,
    pub quadrants: [Option<usize>; 4],
    pub half_leaves: [SideKind; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lozenge {
    pub id: usize,
    pub corners: [usize; 2],
    /// Slots in the order `[x.s, x.u, y.s, y.u]` for corners `[x, y]`.
    pub slots: [SideSlot; 4],
    /// Darts of the folded fatgraph at the two corners.
    pub image_darts: Option<[u32; 2]>,
}

impl Lozenge {
    pub fn slot(&self, corner: usize, kind: SideKind) -> SideSlot {
        self.slots[2 * corner + kind as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FatTreeBall {
    pub radius: usize,
    pub root: usize,
    pub vertices: Vec<TreeVertex>,
    pub lozenges: Vec<Lozenge>,
}

/// Input for a hand-built ball: quadrant occupancy per vertex and the two
/// corners of every edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallSpec {
    pub radius: usize,
    pub root: usize,
    pub vertices: Vec<TreeVertex>,
    pub edges: Vec<[usize; 2]>,
}

impl FatTreeBall {
    /// Builds a ball and derives the side slots. Checks that the edges form a
    /// tree, that quadrant entries agree with the edge list, and that
    /// half-leaf kinds alternate.
    pub fn from_spec(spec: BallSpec) -> Result<FatTreeBall, OrbitError> {
        let bad = |m: String| Err(OrbitError::MalformedBall(m));
        let nv = spec.vertices.len();
        if spec.edges.len() + 1 != nv {
            return bad(format!("{} vertices but {} edges", nv, spec.edges.len()));
        }
        for (i, v) in spec.vertices.iter().enumerate() {
            if v.id != i {
                return bad(format!("vertex {i} has id {}", v.id));
            }
            for k in 0..4 {
                if v.half_leaves[k] == v.half_leaves[(k + 1) % 4] {
                    return bad(format!("half-leaf kinds do not alternate at vertex {i}"));
                }
                if let Some(e) = v.quadrants[k] {
                    if e >= spec.edges.len() || !spec.edges[e].contains(&i) {
                        return bad(format!("vertex {i} lists edge {e} it is not a corner of"));
                    }
                }
            }
        }
        for (e, &[a, b]) in spec.edges.iter().enumerate() {
            if a == b || a >= nv || b >= nv {
                return bad(format!("edge {e} has bad corners"));
            }
            for c in [a, b] {
                let n = spec.vertices[c].quadrants.iter().filter(|q| **q == Some(e)).count();
                if n != 1 {
                    return bad(format!("edge {e} occupies {n} quadrants at vertex {c}"));
                }
            }
        }
        let mut seen = vec![false; nv];
        let mut queue = VecDeque::from([spec.root]);
        seen[spec.root] = true;
        while let Some(v) = queue.pop_front() {
            for e in spec.vertices[v].quadrants.iter().flatten() {
                let [a, b] = spec.edges[*e];
                let w = if a == v { b } else { a };
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("edges do not connect the ball".to_string());
        }

        let lozenges = spec
            .edges
            .iter()
            .enumerate()
            .map(|(e, corners)| {
                let mut slots = [SideSlot::Free; 4];
                for (c, &x) in corners.iter().enumerate() {
                    let tv = &spec.vertices[x];
                    let q = tv.quadrants.iter().position(|o| *o == Some(e)).expect("checked");
                    let after = tv.half_leaves[q];
                    let before = tv.half_leaves[(q + 3) % 4];
                    let next = tv.quadrants[(q + 1) % 4];
                    let prev = tv.quadrants[(q + 3) % 4];
                    slots[2 * c + after as usize] = next.map_or(SideSlot::Free, SideSlot::Shared);
                    slots[2 * c + before as usize] = prev.map_or(SideSlot::Free, SideSlot::Shared);
                }
                Lozenge { id: e, corners: *corners, slots, image_darts: None }
            })
            .collect();
        Ok(FatTreeBall { radius: spec.radius, root: spec.root, vertices: spec.vertices, lozenges })
    }

    /// Vertices at distance at most the radius from the root.
    pub fn interior_vertex_count(&self) -> usize {
        self.vertices.iter().filter(|v| !v.frontier).count()
    }

    /// Lozenges with no frontier corner.
    pub fn interior_lozenges(&self) -> impl Iterator<Item = &Lozenge> + '_ {
        self.lozenges.iter().filter(move |l| l.corners.iter().all(|c| !self.vertices[*c].frontier))
    }

    pub fn is_interior(&self, l: usize) -> bool {
        self.lozenges[l].corners.iter().all(|c| !self.vertices[*c].frontier)
    }
}

/// Unfolds the quotient fatgraph of a piece into a ball of the covering tree,
/// rooted at the least vertex. Cone vertices lift to 4-valent vertices whose
/// quadrants repeat the two darts.
pub fn unfold_tree(p: &SeifertPiece, radius: usize) -> Result<FatTreeBall, OrbitError> {
    let g = p.graph();
    for (v, m) in g.markings().iter().enumerate() {
        if *m == VertexMarking::ReflectorEnd {
            return Err(OrbitError::UnsupportedMarking(g.vertices()[v].id));
        }
    }
    let topo = g.topo();
    let roles = g.face_roles().expect("piece graphs carry roles");

    // quadrant layout of each folded vertex: dart indices and half-leaf kinds
    let layout: Vec<([usize; 4], [SideKind; 4])> = (0..g.vertex_count())
        .map(|v| {
            let darts: Vec<usize> = g.darts_at(v).collect();
            let quad: [usize; 4] = match darts.len() {
                4 => [darts[0], darts[1], darts[2], darts[3]],
                2 => [darts[0], darts[1], darts[0], darts[1]],
                _ => unreachable!("piece valences are 2 or 4"),
            };
            let kinds = std::array::from_fn(|k| {
                // h_k is the corner between quadrants k and k+1
                if roles[topo.face_of[quad[(k + 1) % 4]]] == Role::In {
                    SideKind::Stable
                } else {
                    SideKind::Unstable
                }
            });
            (quad, kinds)
        })
        .collect();

    let mut vertices: Vec<TreeVertex> = Vec::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut image_darts: Vec<[u32; 2]> = Vec::new();
    // (tree vertex, folded vertex, quadrant used by the parent edge)
    let mut queue: VecDeque<(usize, usize, Option<usize>)> = VecDeque::new();
    let root_image = 0usize;
    vertices.push(TreeVertex {
        id: 0,
        image: Some(g.vertices()[root_image].id),
        depth: 0,
        frontier: false,
        quadrants: [None; 4],
        half_leaves: layout[root_image].1,
    });
    queue.push_back((0, root_image, None));
    while let Some((t, v, parent_q)) = queue.pop_front() {
        let depth = vertices[t].depth;
        let (quad, _) = layout[v];
        for (q, &d) in quad.iter().enumerate() {
            if Some(q) == parent_q {
                continue;
            }
            let od = topo.alpha[d];
            let w = topo.vertex_of[od];
            let (wquad, wkinds) = layout[w];
            let wq = wquad.iter().position(|x| *x == od).expect("dart at its vertex");
            let child = vertices.len();
            let e = edges.len();
            let frontier = depth + 1 > radius;
            let mut quadrants = [None; 4];
            quadrants[wq] = Some(e);
            vertices.push(TreeVertex {
                id: child,
                image: Some(g.vertices()[w].id),
                depth: depth + 1,
                frontier,
                quadrants,
                half_leaves: wkinds,
            });
            vertices[t].quadrants[q] = Some(e);
            edges.push([t, child]);
            image_darts.push([topo.darts[d], topo.darts[od]]);
            if !frontier {
                queue.push_back((child, w, Some(wq)));
            }
        }
    }
    let mut ball = FatTreeBall::from_spec(BallSpec { radius, root: 0, vertices, edges })?;
    for (l, d) in ball.lozenges.iter_mut().zip(image_darts) {
        l.image_darts = Some(d);
    }
    Ok(ball)
}

/// Whether every interior lozenge shares all four of its sides.
pub fn is_tree_of_scalloped(ball: &FatTreeBall) -> bool {
    ball.interior_lozenges().all(|l| l.slots.iter().all(|s| matches!(s, SideSlot::Shared(_))))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LozengeLine {
    /// Side type crossed between consecutive lozenges.
    pub kind: SideKind,
    /// Lozenges in order along the line.
    pub lozenges: Vec<usize>,
}

/// The two maximal lines through an interior lozenge, crossing its stable
/// sides and its unstable sides respectively, truncated at the ball.
pub fn scalloped_lines_through(l: usize, ball: &FatTreeBall) -> Result<[LozengeLine; 2], OrbitError> {
    if l >= ball.lozenges.len() || !ball.is_interior(l) {
        return Err(OrbitError::NotInterior(l));
    }
    Ok([SideKind::Stable, SideKind::Unstable].map(|kind| {
        let walk = |corner: usize| {
            let mut out = Vec::new();
            let mut cur = l;
            let mut via = ball.lozenges[l].corners[corner];
            while let SideSlot::Shared(next) = {
                let lz = &ball.lozenges[cur];
                let c = lz.corners.iter().position(|x| *x == via).expect("corner of lozenge");
                lz.slot(c, kind)
            } {
                out.push(next);
                let nl = &ball.lozenges[next];
                // leave through the opposite corner of the next lozenge
                via = if nl.corners[0] == via { nl.corners[1] } else { nl.corners[0] };
                cur = next;
            }
            out
        };
        let mut back = walk(0);
        back.reverse();
        back.push(l);
        back.extend(walk(1));
        LozengeLine { kind, lozenges: back }
    }))
}

/// Per-piece sign labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignVector(pub Vec<Sign>);

impl SignVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy with coordinate `i` negated.
    pub fn negated_at(&self, i: usize) -> SignVector {
        let mut v = self.0.clone();
        v[i] = -v[i];
        SignVector(v)
    }
}

pub fn sign_of(flow: &GluedFlow, piece: usize) -> Sign {
    flow.signs().0[piece]
}

/// Per-piece sign agreement.
pub fn compare_signs(a: &GluedFlow, b: &GluedFlow) -> Result<Vec<bool>, OrbitError> {
    if !a.same_underlying(b) {
        return Err(OrbitError::IncomparableFlows);
    }
    Ok(a.signs().0.iter().zip(&b.signs().0).map(|(x, y)| x == y).collect())
}

/// Checks that a ball folds back onto the fatgraph of `p`: corners map to the
/// vertices of their darts, quadrants repeat the cyclic order, and the image
/// edges are the edges of `p` met within the radius. Returns the set of folded
/// edges covered.
pub fn fold_back(ball: &FatTreeBall, p: &SeifertPiece) -> Result<BTreeSet<usize>, OrbitError> {
    let g = p.graph();
    let topo = g.topo();
    let bad = |m: String| Err(OrbitError::MalformedBall(m));
    let mut covered = BTreeSet::new();
    for l in &ball.lozenges {
        let Some([a, b]) = l.image_darts else {
            return bad(format!("lozenge {} has no image", l.id));
        };
        let (Some(ia), Some(ib)) = (g.dart_index(a), g.dart_index(b)) else {
            return bad(format!("lozenge {} maps to unknown darts", l.id));
        };
        if topo.alpha[ia] != ib {
            return bad(format!("lozenge {} does not map to an edge", l.id));
        }
        for (c, d) in l.corners.iter().zip([ia, ib]) {
            let want = g.vertices()[topo.vertex_of[d]].id;
            if ball.vertices[*c].image != Some(want) {
                return bad(format!("corner {c} of lozenge {} maps off its dart", l.id));
            }
        }
        covered.insert(topo.edge_of[ia]);
    }
    for tv in ball.vertices.iter().filter(|v| !v.frontier) {
        let Some(img) = tv.image else {
            return bad(format!("vertex {} has no image", tv.id));
        };
        let vi = g.vertex_index(img).expect("image vertex exists");
        let cyc: Vec<u32> = g.vertices()[vi].darts.clone();
        let seen: Vec<u32> = tv
            .quadrants
            .iter()
            .map(|q| {
                let l = &ball.lozenges[q.expect("interior vertices are full")];
                let [a, b] = l.image_darts.expect("checked");
                if l.corners[0] == tv.id {
                    a
                } else {
                    b
                }
            })
            .collect();
        let n = cyc.len();
        let start = cyc.iter().position(|d| *d == seen[0]);
        let ok = start.is_some_and(|s| (0..4).all(|k| seen[k] == cyc[(s + k) % n]));
        if !ok {
            return bad(format!("vertex {} does not follow the cyclic order of {img}", tv.id));
        }
    }
    Ok(covered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fatgraph::{family_xn, two_holed_torus_example, FatGraph, VertexRecord};
    use crate::seifert_piece::build_piece;
    use std::collections::BTreeMap;

    fn piece(g: &FatGraph) -> SeifertPiece {
        build_piece(g, Sign::Plus, 10.0).unwrap()
    }

    fn tree_size(r: u32) -> usize {
        1 + 4 * (3usize.pow(r) - 1) / 2
    }

    #[test]
    fn radius_zero_ball() {
        let b = unfold_tree(&piece(&two_holed_torus_example()), 0).unwrap();
        assert_eq!(b.interior_vertex_count(), 1);
        assert_eq!(b.lozenges.len(), 4);
        assert_eq!(b.vertices[0].quadrants.iter().flatten().count(), 4);
        assert_eq!(b.interior_lozenges().count(), 0);
    }

    #[test]
    fn ball_growth() {
        for g in [two_holed_torus_example(), family_xn(1).unwrap()] {
            let p = piece(&g);
            for r in 0..=4 {
                let b = unfold_tree(&p, r).unwrap();
                assert_eq!(b.interior_vertex_count(), tree_size(r as u32));
                assert_eq!(b.lozenges.len(), tree_size(r as u32 + 1) - 1);
            }
        }
    }

    #[test]
    fn fold_back_recovers_graph() {
        for g in [two_holed_torus_example(), family_xn(1).unwrap()] {
            let p = piece(&g);
            let b = unfold_tree(&p, 3).unwrap();
            let covered = fold_back(&b, &p).unwrap();
            // breadth-first edge distance from the root vertex bounds coverage
            let topo = g.topo();
            let mut dist = vec![usize::MAX; g.vertex_count()];
            dist[0] = 0;
            let mut q = VecDeque::from([0usize]);
            while let Some(v) = q.pop_front() {
                for d in g.darts_at(v) {
                    let w = topo.vertex_of[topo.alpha[d]];
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        q.push_back(w);
                    }
                }
            }
            let want: BTreeSet<usize> = (0..g.edge_count())
                .filter(|&e| {
                    let [a, b] = g.edges()[e];
                    let va = topo.vertex_of[g.dart_index(a).unwrap()];
                    let vb = topo.vertex_of[g.dart_index(b).unwrap()];
                    dist[va].min(dist[vb]) <= 3
                })
                .collect();
            assert_eq!(covered, want);
        }
    }

    #[test]
    fn fold_back_rejects_tampering() {
        let p = piece(&two_holed_torus_example());
        let mut b = unfold_tree(&p, 2).unwrap();
        b.vertices[0].image = Some(1);
        assert!(fold_back(&b, &p).is_err());
    }

    #[test]
    fn regular_pieces_are_scalloped_trees() {
        for g in [two_holed_torus_example(), family_xn(1).unwrap(), family_xn(2).unwrap()] {
            let p = piece(&g);
            for r in 2..=4 {
                assert!(is_tree_of_scalloped(&unfold_tree(&p, r).unwrap()));
            }
        }
    }

    #[test]
    fn cone_vertices_lift_to_four_quadrants() {
        // annulus with one cone vertex and one regular 2-valent stand-in is not
        // buildable; use two cone vertices
        let g = FatGraph::new(
            vec![VertexRecord { id: 0, darts: vec![0, 1] }, VertexRecord { id: 1, darts: vec![2, 3] }],
            vec![[0, 3], [1, 2]],
            BTreeMap::from([(0, VertexMarking::Cone), (1, VertexMarking::Cone)]),
            None,
        )
        .unwrap();
        let p = piece(&g);
        let b = unfold_tree(&p, 3).unwrap();
        assert_eq!(b.interior_vertex_count(), tree_size(3));
        assert!(is_tree_of_scalloped(&b));
        fold_back(&b, &p).unwrap();
        let r = FatGraph::new(
            g.vertices().to_vec(),
            g.edges().to_vec(),
            BTreeMap::from([(0, VertexMarking::ReflectorEnd), (1, VertexMarking::Cone)]),
            None,
        )
        .unwrap();
        assert_eq!(unfold_tree(&piece(&r), 1), Err(OrbitError::UnsupportedMarking(0)));
    }

    fn path_ball() -> FatTreeBall {
        // a path of lozenges whose interior corners use only two quadrants
        let kinds = [SideKind::Stable, SideKind::Unstable, SideKind::Stable, SideKind::Unstable];
        let n = 6;
        let vertices = (0..n)
            .map(|i| {
                let mut q = [None; 4];
                if i > 0 {
                    q[0] = Some(i - 1);
                }
                if i + 1 < n {
                    q[1] = Some(i);
                }
                TreeVertex { id: i, image: None, depth: i, frontier: i + 1 == n, quadrants: q, half_leaves: kinds }
            })
            .collect();
        FatTreeBall::from_spec(BallSpec {
            radius: n - 2,
            root: 0,
            vertices,
            edges: (0..n - 1).map(|i| [i, i + 1]).collect(),
        })
        .unwrap()
    }

    #[test]
    fn path_is_not_scalloped() {
        let b = path_ball();
        assert!(!is_tree_of_scalloped(&b));
        // only the stable sides at quadrant boundary 0 are shared
        let l = &b.lozenges[2];
        assert_eq!(l.slot(0, SideKind::Stable), SideSlot::Shared(1));
        assert_eq!(l.slot(0, SideKind::Unstable), SideSlot::Free);
    }

    #[test]
    fn frontier_lozenges_are_ignored() {
        let p = piece(&two_holed_torus_example());
        let b = unfold_tree(&p, 2).unwrap();
        let frontier: Vec<_> = b.lozenges.iter().filter(|l| !b.is_interior(l.id)).collect();
        assert!(!frontier.is_empty());
        assert!(frontier.iter().any(|l| l.slots.contains(&SideSlot::Free)));
        assert!(is_tree_of_scalloped(&b));
    }

    #[test]
    fn malformed_specs() {
        let mut b = path_ball();
        let spec = |b: &FatTreeBall| BallSpec {
            radius: b.radius,
            root: b.root,
            vertices: b.vertices.clone(),
            edges: b.lozenges.iter().map(|l| l.corners).collect(),
        };
        let mut s = spec(&b);
        s.vertices[1].half_leaves = [SideKind::Stable; 4];
        assert!(FatTreeBall::from_spec(s).is_err());
        let mut s = spec(&b);
        s.edges.push([0, 2]);
        assert!(FatTreeBall::from_spec(s).is_err());
        b.vertices[2].quadrants[3] = Some(1);
        assert!(FatTreeBall::from_spec(spec(&b)).is_err());
    }

    #[test]
    fn two_lines_through_each_interior_lozenge() {
        for g in [two_holed_torus_example(), family_xn(1).unwrap()] {
            let b = unfold_tree(&piece(&g), 3).unwrap();
            let mut count = 0;
            for l in b.interior_lozenges() {
                let [s, u] = scalloped_lines_through(l.id, &b).unwrap();
                assert_eq!((s.kind, u.kind), (SideKind::Stable, SideKind::Unstable));
                assert!(s.lozenges.len() >= 3 && u.lozenges.len() >= 3);
                let a: BTreeSet<_> = s.lozenges.iter().collect();
                let c: BTreeSet<_> = u.lozenges.iter().collect();
                assert_eq!(a.intersection(&c).collect::<Vec<_>>(), vec![&&l.id]);
                assert_eq!(a.len(), s.lozenges.len());
                count += 1;
            }
            assert!(count > 0);
        }
    }

    #[test]
    fn consecutive_line_members_share_a_side() {
        let b = unfold_tree(&piece(&family_xn(1).unwrap()), 3).unwrap();
        for l in b.interior_lozenges() {
            for line in scalloped_lines_through(l.id, &b).unwrap() {
                for w in line.lozenges.windows(2) {
                    let a = &b.lozenges[w[0]];
                    let shared = (0..2).any(|c| a.slot(c, line.kind) == SideSlot::Shared(w[1]));
                    assert!(shared);
                }
                // corners alternate: three consecutive lozenges never share a corner
                for w in line.lozenges.windows(3) {
                    let cs = |i: usize| b.lozenges[i].corners;
                    let common = cs(w[0]).iter().filter(|c| cs(w[1]).contains(c) && cs(w[2]).contains(c)).count();
                    assert_eq!(common, 0);
                }
            }
        }
    }

    #[test]
    fn not_interior() {
        let b = unfold_tree(&piece(&two_holed_torus_example()), 1).unwrap();
        let edge = b.lozenges.iter().find(|l| !b.is_interior(l.id)).unwrap().id;
        assert_eq!(scalloped_lines_through(edge, &b), Err(OrbitError::NotInterior(edge)));
        assert_eq!(scalloped_lines_through(999, &b), Err(OrbitError::NotInterior(999)));
    }

    #[test]
    fn ball_json_round_trip() {
        let b = unfold_tree(&piece(&two_holed_torus_example()), 2).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<FatTreeBall>(&s).unwrap(), b);
    }
}
