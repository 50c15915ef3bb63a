//! Periodic Seifert pieces assembled from one model block per fatgraph edge.
//!
//! Block `e` sits over edge `e` with its incoming face on the In side of the
//! edge. For a dart `d`, the end of block `e(d)` at the vertex of `d` is `α₁`
//! when the face on the right of `d` is In and `α₂` otherwise. Neighbouring
//! blocks around a vertex are glued with the `z` coordinate negated, so each
//! block carries a frame sign `ε_e` relating its `z` to the fiber coordinate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fatgraph::{EdgeSide, FatGraph, FatGraphJson, Role, VertexId, VertexMarking, Violation};
use crate::model_block::{BlockField, OrbitEnd, Sign};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PieceError {
    #[error("fatgraph is not admissible: {0:?}")]
    NotAdmissible(Vec<Violation>),
    #[error("vertex {vertex} ({marking:?}) has valence {valence}")]
    InvalidValence { vertex: VertexId, marking: VertexMarking, valence: usize },
    #[error("z-flip parity fails at vertex {vertex}")]
    InconsistentOrientation { vertex: VertexId },
    #[error("shear parameter must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("malformed piece document: {0}")]
    Malformed(String),
}

/// How the two half-faces meeting at a corner of a vertex are identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerGluing {
    /// `z ↦ −z`
    Flip,
    /// `z ↦ −z + 1/2`
    FlipHalfShift,
    /// each half-face glued to itself by `z ↦ z + 1/2`
    SelfHalfShift,
}

impl CornerGluing {
    /// The action on `z` as `(sign, shift in halves)`.
    fn action(self) -> (Sign, u8) {
        match self {
            CornerGluing::Flip => (Sign::Minus, 0),
            CornerGluing::FlipHalfShift => (Sign::Minus, 1),
            CornerGluing::SelfHalfShift => (Sign::Plus, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CornerRecord {
    /// Position `k` of the corner between darts `k` and `k + 1`.
    pub corner: usize,
    pub face: usize,
    pub gluing: CornerGluing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexModel {
    pub vertex: VertexId,
    pub marking: VertexMarking,
    pub corners: Vec<CornerRecord>,
}

impl VertexModel {
    /// Composite action on `z` of going once around the corners, as
    /// `(sign, shift mod 1 in halves)`.
    pub fn monodromy(&self) -> (Sign, u8) {
        self.corners.iter().fold((Sign::Plus, 0), |(s, h), c| {
            let (cs, ch) = c.gluing.action();
            // z ↦ cs·(s·z + h/2) + ch/2
            let h = if cs == Sign::Minus { (2 - h) % 2 } else { h };
            (cs * s, (h + ch) % 2)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    Stable,
    Unstable,
}

/// A closed leaf of the boundary lamination of a torus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedLeaf {
    pub vertex: VertexId,
    pub kind: LeafKind,
    pub class: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryTorus {
    pub face: usize,
    pub cells: Vec<EdgeSide>,
    pub role: Role,
    /// Loop class `ℓ` and fiber class `f`.
    pub h1_basis: [[i64; 2]; 2],
    pub leaves: Vec<ClosedLeaf>,
}

pub const LOOP_CLASS: [i64; 2] = [1, 0];
pub const FIBER_CLASS: [i64; 2] = [0, 1];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpineAnnulus {
    pub edge: usize,
    pub alpha1: VertexId,
    pub alpha2: VertexId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpineOrbit {
    pub vertex: VertexId,
    pub direction: Sign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spine {
    pub annuli: Vec<SpineAnnulus>,
    pub orbits: Vec<SpineOrbit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeifertPiece {
    graph: FatGraph,
    lambda: f64,
    block_sign: Sign,
    frame: Vec<Sign>,
    orbit_dir: Vec<Sign>,
    vertex_models: Vec<VertexModel>,
    boundary: Vec<BoundaryTorus>,
}

fn required_valence(m: VertexMarking) -> usize {
    match m {
        VertexMarking::Regular => 4,
        VertexMarking::Cone | VertexMarking::ReflectorEnd => 2,
    }
}

pub fn build_piece(g: &FatGraph, block_sign: Sign, lambda: f64) -> Result<SeifertPiece, PieceError> {
    if BlockField::new(block_sign, lambda).is_err() {
        return Err(PieceError::InvalidLambda(lambda));
    }
    g.validate_admissible().map_err(PieceError::NotAdmissible)?;
    for (v, rec) in g.vertices().iter().enumerate() {
        let m = g.markings()[v];
        if g.valence(v) != required_valence(m) {
            return Err(PieceError::InvalidValence { vertex: rec.id, marking: m, valence: g.valence(v) });
        }
    }
    let roles = g.face_roles().expect("admissible graphs carry roles");
    let topo = g.topo();
    let frame = edge_frame(g)?;

    let mut orbit_sign = Vec::with_capacity(g.vertex_count());
    for (v, rec) in g.vertices().iter().enumerate() {
        let mut r = None;
        for d in g.darts_at(v) {
            let end = if roles[topo.face_of[d]] == Role::In { Sign::Minus } else { Sign::Plus };
            let this = end * frame[topo.edge_of[d]];
            match r {
                None => r = Some(this),
                Some(prev) if prev != this => return Err(PieceError::InconsistentOrientation { vertex: rec.id }),
                _ => {}
            }
        }
        orbit_sign.push(r.expect("vertex has darts"));
    }
    let orbit_dir = orbit_sign.iter().map(|r| block_sign * *r).collect();

    let vertex_models = g
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, rec)| {
            let m = g.markings()[v];
            let faces = g.corner_faces(v);
            let corners = faces
                .iter()
                .enumerate()
                .map(|(k, &f)| {
                    // the stable half-faces (In corners) always use the plain flip
                    let gluing = match (m, roles[f]) {
                        (VertexMarking::Regular, _) | (_, Role::In) => CornerGluing::Flip,
                        (VertexMarking::Cone, Role::Out) => CornerGluing::FlipHalfShift,
                        (VertexMarking::ReflectorEnd, Role::Out) => CornerGluing::SelfHalfShift,
                    };
                    CornerRecord { corner: k, face: f, gluing }
                })
                .collect();
            VertexModel { vertex: rec.id, marking: m, corners }
        })
        .collect();

    let boundary = g
        .trace_boundary_faces()
        .into_iter()
        .map(|f| {
            let role = f.role.expect("roles present");
            let kind = match role {
                Role::In => LeafKind::Stable,
                Role::Out => LeafKind::Unstable,
            };
            let leaves = f
                .darts
                .iter()
                .map(|d| ClosedLeaf {
                    vertex: g.vertices()[topo.vertex_of[g.dart_index(*d).expect("indexed")]].id,
                    kind,
                    class: FIBER_CLASS,
                })
                .collect();
            BoundaryTorus { face: f.index, cells: f.cells, role, h1_basis: [LOOP_CLASS, FIBER_CLASS], leaves }
        })
        .collect();

    Ok(SeifertPiece { graph: g.clone(), lambda, block_sign, frame, orbit_dir, vertex_models, boundary })
}

/// Frame signs `ε_e` with `ε` differing on consecutive darts at every vertex;
/// the least edge of each component gets `+1`.
fn edge_frame(g: &FatGraph) -> Result<Vec<Sign>, PieceError> {
    let topo = g.topo();
    let ne = g.edge_count();
    let mut adj: Vec<Vec<(usize, VertexId)>> = vec![Vec::new(); ne];
    for (v, rec) in g.vertices().iter().enumerate() {
        let darts: Vec<usize> = g.darts_at(v).collect();
        let k = darts.len();
        for j in 0..k {
            let a = topo.edge_of[darts[j]];
            let b = topo.edge_of[darts[(j + 1) % k]];
            if a == b {
                return Err(PieceError::InconsistentOrientation { vertex: rec.id });
            }
            adj[a].push((b, rec.id));
            adj[b].push((a, rec.id));
        }
    }
    let mut frame: Vec<Option<Sign>> = vec![None; ne];
    for s in 0..ne {
        if frame[s].is_some() {
            continue;
        }
        frame[s] = Some(Sign::Plus);
        let mut stack = vec![s];
        while let Some(e) = stack.pop() {
            let fe = frame[e].expect("set");
            for &(o, vertex) in &adj[e] {
                match frame[o] {
                    None => {
                        frame[o] = Some(-fe);
                        stack.push(o);
                    }
                    Some(fo) if fo == fe => return Err(PieceError::InconsistentOrientation { vertex }),
                    _ => {}
                }
            }
        }
    }
    Ok(frame.into_iter().map(|s| s.expect("set")).collect())
}

/// Same piece with every block's field flipped.
pub fn flip_piece(p: &SeifertPiece) -> SeifertPiece {
    SeifertPiece { block_sign: -p.block_sign, orbit_dir: p.orbit_dir.iter().map(|s| -*s).collect(), ..p.clone() }
}

/// In-cell to out-cell pairs, one per block.
pub fn piece_transit(p: &SeifertPiece) -> Vec<(EdgeSide, EdgeSide)> {
    (0..p.graph.edge_count())
        .map(|e| {
            let s0 = EdgeSide { edge: e, side: 0 };
            let s1 = EdgeSide { edge: e, side: 1 };
            if p.graph.role_of_side(s0) == Some(Role::In) {
                (s0, s1)
            } else {
                (s1, s0)
            }
        })
        .collect()
}

pub fn spine(p: &SeifertPiece) -> Spine {
    let g = &p.graph;
    let topo = g.topo();
    let annuli = g
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| {
            let ia = g.dart_index(a).expect("indexed");
            let ib = g.dart_index(b).expect("indexed");
            let (d1, d2) = if p.end_of_dart(ia) == OrbitEnd::Alpha1 { (ia, ib) } else { (ib, ia) };
            SpineAnnulus {
                edge: e,
                alpha1: g.vertices()[topo.vertex_of[d1]].id,
                alpha2: g.vertices()[topo.vertex_of[d2]].id,
            }
        })
        .collect();
    let orbits =
        g.vertices().iter().zip(&p.orbit_dir).map(|(v, d)| SpineOrbit { vertex: v.id, direction: *d }).collect();
    Spine { annuli, orbits }
}

impl SeifertPiece {
    pub fn graph(&self) -> &FatGraph {
        &self.graph
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn block_sign(&self) -> Sign {
        self.block_sign
    }

    pub fn block_field(&self) -> BlockField {
        BlockField::new(self.block_sign, self.lambda).expect("checked at build")
    }

    /// Direction of the vertical orbit at each vertex (vertex order).
    pub fn orbit_dir(&self) -> &[Sign] {
        &self.orbit_dir
    }

    /// Orbit direction divided by the block sign; independent of flips.
    pub fn orbit_parity(&self) -> Vec<Sign> {
        self.orbit_dir.iter().map(|d| *d * self.block_sign).collect()
    }

    /// Frame sign of each block.
    pub fn frame(&self) -> &[Sign] {
        &self.frame
    }

    pub fn vertex_models(&self) -> &[VertexModel] {
        &self.vertex_models
    }

    pub fn boundary_tori(&self) -> &[BoundaryTorus] {
        &self.boundary
    }

    pub fn tori_with_role(&self, role: Role) -> impl Iterator<Item = &BoundaryTorus> + '_ {
        self.boundary.iter().filter(move |t| t.role == role)
    }

    /// Whether every vertex is a 4-valent regular vertex.
    pub fn is_regular(&self) -> bool {
        self.graph.markings().iter().all(|m| *m == VertexMarking::Regular)
    }

    /// Which end of its block the vertex of dart index `d` is.
    pub(crate) fn end_of_dart(&self, d: usize) -> OrbitEnd {
        let roles = self.graph.face_roles().expect("roles present");
        if roles[self.graph.topo().face_of[d]] == Role::In {
            OrbitEnd::Alpha1
        } else {
            OrbitEnd::Alpha2
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PieceJson::from(self)).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<SeifertPiece, PieceError> {
        let j: PieceJson = serde_json::from_str(s).map_err(|e| PieceError::Malformed(e.to_string()))?;
        SeifertPiece::try_from(j)
    }
}

/// Serialized piece: the defining data plus the derived boundary tori.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceJson {
    #[serde(default = "schema")]
    pub schema_version: u32,
    pub fatgraph: FatGraphJson,
    pub block_sign: Sign,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_tori: Option<Vec<BoundaryTorus>>,
}

fn schema() -> u32 {
    SCHEMA_VERSION
}

impl From<&SeifertPiece> for PieceJson {
    fn from(p: &SeifertPiece) -> Self {
        PieceJson {
            schema_version: SCHEMA_VERSION,
            fatgraph: FatGraphJson::from(&p.graph),
            block_sign: p.block_sign,
            lambda: p.lambda,
            boundary_tori: Some(p.boundary.clone()),
        }
    }
}

impl TryFrom<PieceJson> for SeifertPiece {
    type Error = PieceError;

    fn try_from(j: PieceJson) -> Result<Self, PieceError> {
        if j.schema_version != SCHEMA_VERSION {
            return Err(PieceError::Malformed(format!("unsupported schema version {}", j.schema_version)));
        }
        let g = FatGraph::try_from(j.fatgraph).map_err(|e| PieceError::Malformed(e.to_string()))?;
        let p = build_piece(&g, j.block_sign, j.lambda)?;
        if let Some(tori) = j.boundary_tori {
            if tori != p.boundary {
                return Err(PieceError::Malformed("boundary tori disagree with the fatgraph".to_string()));
            }
        }
        Ok(p)
    }
}
