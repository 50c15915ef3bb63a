//! Ribbon graphs with an In/Out partition of their boundary faces.
//!
//! A [`FatGraph`] is given by vertices carrying a cyclic (counter-clockwise)
//! list of darts and a perfect matching of darts into edges. Boundary faces are
//! the orbits of `φ = σ ∘ α`, where `σ` rotates a dart to its successor at its
//! vertex and `α` swaps the two darts of an edge; the face of a dart is the one
//! on its right when the dart is traversed away from its vertex.

mod automorphism;
mod families;
mod json;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use automorphism::{
    automorphisms, isomorphisms, FatGraphAutomorphism, FatGraphIsomorphism, OrientationFlag, RoleFlag,
};
pub use families::{family_xn, lattice_quotient_graph, special_vertex, two_holed_torus_example, XN_GRID_WIDTH};
pub use json::FatGraphJson;

pub type DartId = u32;
pub type VertexId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FatGraphError {
    #[error("malformed graph: {0}")]
    MalformedGraph(String),
    #[error("lattice vectors {0:?} and {1:?} are linearly dependent")]
    DegenerateLattice((i64, i64), (i64, i64)),
    #[error("invalid face roles: {0}")]
    InvalidRoles(String),
    #[error("invalid family parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexMarking {
    Regular,
    Cone,
    ReflectorEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    In,
    Out,
}

impl Role {
    pub fn opposite(self) -> Role {
        match self {
            Role::In => Role::Out,
            Role::Out => Role::In,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::In => write!(f, "in"),
            Role::Out => write!(f, "out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: VertexId,
    pub darts: Vec<DartId>,
}

/// One side of an edge. Side 0 is the side carried by the edge's smaller dart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeSide {
    pub edge: usize,
    pub side: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryFace {
    pub index: usize,
    /// Darts in tracing order, starting from the least dart of the face.
    pub darts: Vec<DartId>,
    pub cells: Vec<EdgeSide>,
    pub role: Option<Role>,
}

impl BoundaryFace {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OddValence { vertex: VertexId, valence: usize },
    SidesOnSameFace { edge: usize, face: usize },
    SidesSameRole { edge: usize },
    NoInOutPartition { edge: usize },
    OddFaceLength { face: usize, length: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OddValence { vertex, valence } => {
                write!(f, "vertex {vertex} has odd valence {valence}")
            }
            Violation::SidesOnSameFace { edge, face } => {
                write!(f, "both sides of edge {edge} lie on face {face}")
            }
            Violation::SidesSameRole { edge } => {
                write!(f, "both sides of edge {edge} carry the same role")
            }
            Violation::NoInOutPartition { edge } => {
                write!(f, "no in/out partition exists (conflict at edge {edge})")
            }
            Violation::OddFaceLength { face, length } => {
                write!(f, "face {face} has odd length {length}")
            }
        }
    }
}

/// Dense index tables derived from the defining data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Topology {
    pub darts: Vec<DartId>,
    pub alpha: Vec<usize>,
    pub sigma: Vec<usize>,
    pub sigma_inv: Vec<usize>,
    pub vertex_of: Vec<usize>,
    pub edge_of: Vec<usize>,
    pub face_of: Vec<usize>,
    pub faces: Vec<Vec<usize>>,
    pub role_conflict: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FatGraph {
    vertices: Vec<VertexRecord>,
    edges: Vec<[DartId; 2]>,
    markings: Vec<VertexMarking>,
    roles: Option<Vec<Role>>,
    topo: Topology,
}

impl FatGraph {
    /// Builds a graph, canonicalizing vertex order (by id), the rotation of
    /// each cyclic list (least dart first) and the edge list. When `roles` is
    /// `None` the In/Out partition is derived, with the face through the
    /// least dart of each component marked In.
    pub fn new(
        vertices: Vec<VertexRecord>,
        edges: Vec<[DartId; 2]>,
        markings: BTreeMap<VertexId, VertexMarking>,
        roles: Option<Vec<Role>>,
    ) -> Result<FatGraph, FatGraphError> {
        let mut vertices = vertices;
        vertices.sort_by_key(|v| v.id);
        for w in vertices.windows(2) {
            if w[0].id == w[1].id {
                return Err(FatGraphError::MalformedGraph(format!("duplicate vertex id {}", w[0].id)));
            }
        }
        for v in &mut vertices {
            if v.darts.is_empty() {
                return Err(FatGraphError::MalformedGraph(format!("vertex {} has no darts", v.id)));
            }
            let k = v.darts.iter().enumerate().min_by_key(|(_, d)| **d).map(|(i, _)| i).unwrap_or(0);
            v.darts.rotate_left(k);
        }
        for id in markings.keys() {
            if vertices.binary_search_by_key(id, |v| v.id).is_err() {
                return Err(FatGraphError::MalformedGraph(format!("marking for unknown vertex {id}")));
            }
        }
        let markings: Vec<VertexMarking> =
            vertices.iter().map(|v| markings.get(&v.id).copied().unwrap_or(VertexMarking::Regular)).collect();

        let mut edges: Vec<[DartId; 2]> =
            edges.into_iter().map(|[a, b]| if a <= b { [a, b] } else { [b, a] }).collect();
        edges.sort();

        let topo = Topology::build(&vertices, &edges)?;
        if let Some(r) = &roles {
            if r.len() != topo.faces.len() {
                return Err(FatGraphError::InvalidRoles(format!(
                    "{} roles supplied for {} faces",
                    r.len(),
                    topo.faces.len()
                )));
            }
        }
        let mut topo = topo;
        let roles = match roles {
            Some(r) => Some(r),
            None => {
                let (derived, conflict) = derive_roles(&topo);
                topo.role_conflict = conflict;
                derived
            }
        };
        Ok(FatGraph { vertices, edges, markings, roles, topo })
    }

    /// Same graph with explicit face roles.
    pub fn with_roles(&self, roles: Vec<Role>) -> Result<FatGraph, FatGraphError> {
        FatGraph::new(self.vertices.clone(), self.edges.clone(), self.marking_map(), Some(roles))
    }

    pub fn vertices(&self) -> &[VertexRecord] {
        &self.vertices
    }

    pub fn edges(&self) -> &[[DartId; 2]] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn dart_count(&self) -> usize {
        self.topo.darts.len()
    }

    pub fn face_count(&self) -> usize {
        self.topo.faces.len()
    }

    pub fn markings(&self) -> &[VertexMarking] {
        &self.markings
    }

    pub fn marking_map(&self) -> BTreeMap<VertexId, VertexMarking> {
        self.vertices
            .iter()
            .zip(&self.markings)
            .filter(|(_, m)| **m != VertexMarking::Regular)
            .map(|(v, m)| (v.id, *m))
            .collect()
    }

    pub fn valence(&self, vertex_index: usize) -> usize {
        self.vertices[vertex_index].darts.len()
    }

    pub fn vertex_index(&self, id: VertexId) -> Option<usize> {
        self.vertices.binary_search_by_key(&id, |v| v.id).ok()
    }

    /// Face roles, indexed like [`FatGraph::trace_boundary_faces`]. `None` when
    /// no In/Out partition exists and none was supplied.
    pub fn face_roles(&self) -> Option<&[Role]> {
        self.roles.as_deref()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64
    }

    /// Genus of the closed surface obtained by capping every boundary face.
    pub fn genus(&self) -> i64 {
        (2 - self.euler_characteristic() - self.face_count() as i64) / 2
    }

    pub fn connected_components(&self) -> usize {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for d in self.darts_at(v) {
                    let w = self.topo.vertex_of[self.topo.alpha[d]];
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    /// Boundary faces in canonical order (by least dart), each traced from its
    /// least dart.
    pub fn trace_boundary_faces(&self) -> Vec<BoundaryFace> {
        self.topo
            .faces
            .iter()
            .enumerate()
            .map(|(i, cyc)| BoundaryFace {
                index: i,
                darts: cyc.iter().map(|&d| self.topo.darts[d]).collect(),
                cells: cyc.iter().map(|&d| self.edge_side_of_index(d)).collect(),
                role: self.roles.as_ref().map(|r| r[i]),
            })
            .collect()
    }

    /// Checks even valence, the In/Out alternation across every edge and even
    /// face lengths.
    pub fn validate_admissible(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        for (v, rec) in self.vertices.iter().enumerate() {
            if !self.valence(v).is_multiple_of(2) {
                out.push(Violation::OddValence { vertex: rec.id, valence: self.valence(v) });
            }
        }
        let mut same_face = BTreeSet::new();
        for (e, &[a, _]) in self.edges.iter().enumerate() {
            let ia = self.dart_index(a).expect("edge dart indexed");
            let fa = self.topo.face_of[ia];
            let fb = self.topo.face_of[self.topo.alpha[ia]];
            if fa == fb {
                same_face.insert(e);
                out.push(Violation::SidesOnSameFace { edge: e, face: fa });
            }
        }
        match &self.roles {
            Some(roles) => {
                for (e, &[a, _]) in self.edges.iter().enumerate() {
                    if same_face.contains(&e) {
                        continue;
                    }
                    let ia = self.dart_index(a).expect("edge dart indexed");
                    let fa = self.topo.face_of[ia];
                    let fb = self.topo.face_of[self.topo.alpha[ia]];
                    if roles[fa] == roles[fb] {
                        out.push(Violation::SidesSameRole { edge: e });
                    }
                }
            }
            None => {
                if same_face.is_empty() {
                    let edge = self.topo.role_conflict.unwrap_or(0);
                    out.push(Violation::NoInOutPartition { edge });
                }
            }
        }
        for (i, f) in self.topo.faces.iter().enumerate() {
            if f.len() % 2 != 0 {
                out.push(Violation::OddFaceLength { face: i, length: f.len() });
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.validate_admissible().is_ok()
    }

    /// All cyclic orders reversed.
    pub fn reversed(&self) -> FatGraph {
        let vertices = self
            .vertices
            .iter()
            .map(|v| {
                let mut d = v.darts.clone();
                d[1..].reverse();
                VertexRecord { id: v.id, darts: d }
            })
            .collect();
        FatGraph::new(vertices, self.edges.clone(), self.marking_map(), None)
            .expect("reversal keeps the graph well formed")
    }

    // ---- dense-index helpers shared with the rest of the crate ----

    pub(crate) fn topo(&self) -> &Topology {
        &self.topo
    }

    pub fn dart_ids(&self) -> &[DartId] {
        &self.topo.darts
    }

    pub fn dart_index(&self, d: DartId) -> Option<usize> {
        self.topo.darts.binary_search(&d).ok()
    }

    pub(crate) fn darts_at(&self, vertex_index: usize) -> impl Iterator<Item = usize> + '_ {
        self.vertices[vertex_index].darts.iter().map(move |d| self.dart_index(*d).expect("vertex dart indexed"))
    }

    pub(crate) fn edge_side_of_index(&self, d: usize) -> EdgeSide {
        let e = self.topo.edge_of[d];
        let side = if self.edges[e][0] == self.topo.darts[d] { 0 } else { 1 };
        EdgeSide { edge: e, side }
    }

    /// Dart index carrying the given edge side.
    pub(crate) fn dart_of_side(&self, s: EdgeSide) -> usize {
        self.dart_index(self.edges[s.edge][s.side as usize]).expect("edge dart indexed")
    }

    /// Face index on the given side of an edge.
    pub fn face_of_side(&self, s: EdgeSide) -> usize {
        self.topo.face_of[self.dart_of_side(s)]
    }

    /// Role of the face on the given side of an edge.
    pub fn role_of_side(&self, s: EdgeSide) -> Option<Role> {
        self.roles.as_ref().map(|r| r[self.face_of_side(s)])
    }

    /// Faces met at the corners of a vertex, in cyclic order. The corner
    /// between dart `k` and dart `k+1` is the face of dart `k+1`.
    pub fn corner_faces(&self, vertex_index: usize) -> Vec<usize> {
        let darts: Vec<usize> = self.darts_at(vertex_index).collect();
        let n = darts.len();
        (0..n).map(|k| self.topo.face_of[darts[(k + 1) % n]]).collect()
    }
}

impl Topology {
    fn build(vertices: &[VertexRecord], edges: &[[DartId; 2]]) -> Result<Topology, FatGraphError> {
        let mut darts: Vec<DartId> = vertices.iter().flat_map(|v| v.darts.iter().copied()).collect();
        darts.sort_unstable();
        for w in darts.windows(2) {
            if w[0] == w[1] {
                return Err(FatGraphError::MalformedGraph(format!("dart {} appears twice in cyclic orders", w[0])));
            }
        }
        let n = darts.len();
        let index: HashMap<DartId, usize> = darts.iter().enumerate().map(|(i, d)| (*d, i)).collect();

        let mut alpha = vec![usize::MAX; n];
        let mut edge_of = vec![usize::MAX; n];
        for (e, &[a, b]) in edges.iter().enumerate() {
            if a == b {
                return Err(FatGraphError::MalformedGraph(format!("edge {e} pairs dart {a} with itself")));
            }
            let ia =
                *index.get(&a).ok_or_else(|| FatGraphError::MalformedGraph(format!("edge dart {a} has no vertex")))?;
            let ib =
                *index.get(&b).ok_or_else(|| FatGraphError::MalformedGraph(format!("edge dart {b} has no vertex")))?;
            if alpha[ia] != usize::MAX || alpha[ib] != usize::MAX {
                return Err(FatGraphError::MalformedGraph(format!(
                    "dart {} lies on two edges",
                    if alpha[ia] != usize::MAX { a } else { b }
                )));
            }
            alpha[ia] = ib;
            alpha[ib] = ia;
            edge_of[ia] = e;
            edge_of[ib] = e;
        }
        if let Some(i) = alpha.iter().position(|&a| a == usize::MAX) {
            return Err(FatGraphError::MalformedGraph(format!("dangling dart {}", darts[i])));
        }

        let mut sigma = vec![0; n];
        let mut sigma_inv = vec![0; n];
        let mut vertex_of = vec![0; n];
        for (v, rec) in vertices.iter().enumerate() {
            let k = rec.darts.len();
            for j in 0..k {
                let a = index[&rec.darts[j]];
                let b = index[&rec.darts[(j + 1) % k]];
                sigma[a] = b;
                sigma_inv[b] = a;
                vertex_of[a] = v;
            }
        }

        let mut face_of = vec![usize::MAX; n];
        let mut faces = Vec::new();
        for start in 0..n {
            if face_of[start] != usize::MAX {
                continue;
            }
            let id = faces.len();
            let mut cyc = Vec::new();
            let mut d = start;
            while face_of[d] == usize::MAX {
                face_of[d] = id;
                cyc.push(d);
                d = sigma[alpha[d]];
            }
            faces.push(cyc);
        }
        Ok(Topology { darts, alpha, sigma, sigma_inv, vertex_of, edge_of, face_of, faces, role_conflict: None })
    }
}

/// Two-colours the faces so that the sides of every edge differ. Returns the
/// first conflicting edge when impossible.
fn derive_roles(topo: &Topology) -> (Option<Vec<Role>>, Option<usize>) {
    let nf = topo.faces.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nf];
    for d in 0..topo.darts.len() {
        adj[topo.face_of[d]].push((topo.face_of[topo.alpha[d]], topo.edge_of[d]));
    }
    let mut role: Vec<Option<Role>> = vec![None; nf];
    let mut conflict = None;
    for s in 0..nf {
        if role[s].is_some() {
            continue;
        }
        role[s] = Some(Role::In);
        let mut stack = vec![s];
        while let Some(f) = stack.pop() {
            let r = role[f].expect("coloured");
            for &(g, e) in &adj[f] {
                match role[g] {
                    None => {
                        role[g] = Some(r.opposite());
                        stack.push(g);
                    }
                    Some(rg) if rg == r => {
                        conflict = Some(conflict.map_or(e, |c: usize| c.min(e)));
                    }
                    _ => {}
                }
            }
        }
    }
    if conflict.is_some() {
        (None, conflict)
    } else {
        (Some(role.into_iter().map(|r| r.expect("coloured")).collect()), None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vr(id: VertexId, darts: &[DartId]) -> VertexRecord {
        VertexRecord { id, darts: darts.to_vec() }
    }

    /// Independent face tracer walking explicit edge sides with linear scans.
    fn naive_face_count(g: &FatGraph) -> usize {
        let mut used = BTreeSet::new();
        let mut faces = 0;
        let all: Vec<DartId> = g.dart_ids().to_vec();
        for &start in &all {
            if used.contains(&start) {
                continue;
            }
            faces += 1;
            let mut d = start;
            while used.insert(d) {
                let other = g
                    .edges()
                    .iter()
                    .find_map(|&[a, b]| {
                        if a == d {
                            Some(b)
                        } else if b == d {
                            Some(a)
                        } else {
                            None
                        }
                    })
                    .unwrap();
                let v = g.vertices().iter().find(|v| v.darts.contains(&other)).unwrap();
                let pos = v.darts.iter().position(|&x| x == other).unwrap();
                d = v.darts[(pos + 1) % v.darts.len()];
            }
        }
        faces
    }

    #[test]
    fn theta_graph_has_odd_valence() {
        let g = FatGraph::new(
            vec![vr(0, &[0, 1, 2]), vr(1, &[3, 4, 5])],
            vec![[0, 3], [1, 5], [2, 4]],
            BTreeMap::new(),
            None,
        )
        .unwrap();
        let errs = g.validate_admissible().unwrap_err();
        assert!(errs.contains(&Violation::OddValence { vertex: 0, valence: 3 }));
        assert!(errs.contains(&Violation::OddValence { vertex: 1, valence: 3 }));
    }

    #[test]
    fn loop_with_both_sides_on_one_face() {
        // interleaved loops at one vertex: a one-holed torus with a single face
        let g = FatGraph::new(vec![vr(0, &[0, 1, 2, 3])], vec![[0, 2], [1, 3]], BTreeMap::new(), None).unwrap();
        assert_eq!(g.face_count(), 1);
        let errs = g.validate_admissible().unwrap_err();
        assert!(errs.contains(&Violation::SidesOnSameFace { edge: 0, face: 0 }));
        assert!(errs.contains(&Violation::SidesOnSameFace { edge: 1, face: 0 }));
    }

    #[test]
    fn single_loop_has_odd_faces() {
        let g = FatGraph::new(vec![vr(0, &[0, 1])], vec![[0, 1]], BTreeMap::new(), None).unwrap();
        // an annulus: two faces of length one
        assert_eq!(g.face_count(), 2);
        let errs = g.validate_admissible().unwrap_err();
        assert!(errs.iter().all(|v| matches!(v, Violation::OddFaceLength { .. })));
    }

    #[test]
    fn dangling_darts_are_malformed() {
        let err = FatGraph::new(vec![vr(0, &[0, 1, 2, 3])], vec![[0, 1]], BTreeMap::new(), None).unwrap_err();
        assert!(matches!(err, FatGraphError::MalformedGraph(_)));
        let err = FatGraph::new(vec![vr(0, &[0, 1])], vec![[0, 1], [1, 7]], BTreeMap::new(), None).unwrap_err();
        assert!(matches!(err, FatGraphError::MalformedGraph(_)));
    }

    #[test]
    fn rotation_is_canonicalized() {
        let a = FatGraph::new(vec![vr(0, &[2, 3, 0, 1])], vec![[0, 2], [1, 3]], BTreeMap::new(), None).unwrap();
        let b = FatGraph::new(vec![vr(0, &[0, 1, 2, 3])], vec![[2, 0], [3, 1]], BTreeMap::new(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_holed_torus_faces_and_euler() {
        let g = two_holed_torus_example();
        assert!(g.is_admissible());
        let faces = g.trace_boundary_faces();
        assert_eq!(faces.len(), 2);
        assert_eq!(g.euler_characteristic(), -2);
        assert_eq!(g.genus(), 1);
        assert_eq!(faces.iter().map(|f| f.len()).sum::<usize>(), 2 * g.edge_count());
        assert_ne!(faces[0].role, faces[1].role);
    }

    #[test]
    fn faces_partition_edge_sides() {
        for g in [two_holed_torus_example(), family_xn(1).unwrap(), family_xn(2).unwrap()] {
            let mut seen = BTreeSet::new();
            for f in g.trace_boundary_faces() {
                for c in f.cells {
                    assert!(seen.insert(c));
                }
            }
            assert_eq!(seen.len(), 2 * g.edge_count());
        }
    }

    #[test]
    fn xn_face_count_matches_naive_tracer() {
        for n in 1..=3 {
            let g = family_xn(n).unwrap();
            assert_eq!(g.face_count(), naive_face_count(&g));
        }
        assert_eq!(naive_face_count(&family_xn(1).unwrap()), 22);
    }

    #[test]
    fn supplied_roles_are_checked() {
        let g = two_holed_torus_example();
        let bad = g.with_roles(vec![Role::In, Role::In]).unwrap();
        assert_eq!(bad.validate_admissible().unwrap_err().len(), g.edge_count());
        let swapped = g.with_roles(vec![Role::Out, Role::In]).unwrap();
        assert!(swapped.is_admissible());
        assert!(g.with_roles(vec![Role::In]).is_err());
    }

    #[test]
    fn corner_faces_alternate_roles() {
        let g = family_xn(1).unwrap();
        let roles = g.face_roles().unwrap();
        for v in 0..g.vertex_count() {
            let c = g.corner_faces(v);
            for k in 0..c.len() {
                assert_ne!(roles[c[k]], roles[c[(k + 1) % c.len()]]);
            }
        }
    }
}
