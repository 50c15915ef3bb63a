//! Whole-manifold flows: pieces glued along boundary tori.
//!
//! A gluing sends an Out torus of one piece to an In torus of some piece by an
//! integer matrix acting on the `(ℓ, f)` bases of the two tori. Periodic orbits
//! that cross the tori are tracked through the transit graph on annulus
//! cells; itineraries are its simple cycles, recorded one block at a time.

mod construction;
mod equivalence;
mod json;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fatgraph::{EdgeSide, FatGraphError, Role, VertexId, VertexMarking};
use crate::model_block::Sign;
use crate::orbit_combinatorics::SignVector;
use crate::seifert_piece::{flip_piece, piece_transit, PieceError, SeifertPiece};

pub use construction::{check_construction_7_3, construction_7_3, special_tori, ConstructionViolation};
pub use equivalence::{
    orbit_equivalence_search, replay_certificate, EquivalenceCertificate, FlowDirection, PieceMap, ReplayError,
    SearchOutcome,
};
pub use json::{FlowJson, GluingJson, PieceEntryJson};

pub type Matrix = [[i64; 2]; 2];

/// `f ↦ ℓ`, `ℓ ↦ f`.
pub const SWAP_MATRIX: Matrix = [[0, 1], [1, 0]];

pub fn det(a: &Matrix) -> i64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Inverse of a unimodular matrix.
pub fn inverse(a: &Matrix) -> Option<Matrix> {
    let d = det(a);
    if d.abs() != 1 {
        return None;
    }
    Some([[d * a[1][1], -d * a[0][1]], [-d * a[1][0], d * a[0][0]]])
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

/// Image of the fiber class is `±f`.
pub fn preserves_fiber(a: &Matrix) -> bool {
    a[0][1] == 0 && a[1][1].abs() == 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TorusRef {
    pub piece: usize,
    pub torus: usize,
}

impl fmt::Display for TorusRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "piece {} torus {}", self.piece, self.torus)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Gluing {
    /// An Out torus.
    pub from: TorusRef,
    /// An In torus.
    pub to: TorusRef,
    pub matrix: Matrix,
}

/// Gluings kept sorted by source torus; a gluing's id is its position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GluingSpec {
    gluings: Vec<Gluing>,
}

impl GluingSpec {
    pub fn new(mut gluings: Vec<Gluing>) -> GluingSpec {
        gluings.sort();
        GluingSpec { gluings }
    }

    pub fn gluings(&self) -> &[Gluing] {
        &self.gluings
    }

    pub fn len(&self) -> usize {
        self.gluings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gluings.is_empty()
    }

    pub fn from_torus(&self, t: TorusRef) -> Option<(usize, &Gluing)> {
        self.gluings.iter().enumerate().find(|(_, g)| g.from == t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GluingViolation {
    FiberGluedToFiber { gluing: usize },
    NonUnimodular { gluing: usize, det: i64 },
    UnknownTorus { torus: TorusRef },
    RoleMismatch { torus: TorusRef, expected: Role },
    TorusReused { torus: TorusRef },
    UnmatchedTorus { torus: TorusRef },
    NonOrientable { gluing: usize },
}

impl fmt::Display for GluingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GluingViolation::FiberGluedToFiber { gluing } => {
                write!(f, "gluing {gluing} sends the fiber to ±fiber")
            }
            GluingViolation::NonUnimodular { gluing, det } => {
                write!(f, "gluing {gluing} has determinant {det}")
            }
            GluingViolation::UnknownTorus { torus } => write!(f, "{torus} does not exist"),
            GluingViolation::RoleMismatch { torus, expected } => {
                write!(f, "{torus} should be an {expected} torus")
            }
            GluingViolation::TorusReused { torus } => write!(f, "{torus} is glued twice"),
            GluingViolation::UnmatchedTorus { torus } => write!(f, "{torus} is not glued"),
            GluingViolation::NonOrientable { gluing } => {
                write!(f, "gluing {gluing} closes an orientation-reversing cycle")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error("invalid gluing: {}", join(.0))]
    InvalidGluing(Vec<GluingViolation>),
    #[error("piece {0} is not built from 4-valent regular vertices")]
    UnsupportedPiece(usize),
    #[error("piece index {0} out of range")]
    PieceOutOfRange(usize),
    #[error(transparent)]
    Piece(#[from] PieceError),
    #[error(transparent)]
    Graph(#[from] FatGraphError),
    #[error("graph {0} has no vertex fixed by all automorphisms")]
    MissingSpecialVertex(usize),
    #[error("no pairing of the remaining tori satisfies the constraints")]
    NoValidPairing,
    #[error("flows are not built on the same pieces")]
    IncomparableManifolds,
    #[error("flows do not share pieces and gluings up to flips")]
    IncomparableFlows,
    #[error("malformed flow document: {0}")]
    Malformed(String),
}

fn join(v: &[GluingViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Checks roles, the perfect matching of tori, unimodularity, the fiber
/// condition and global orientability.
pub fn validate_gluing(pieces: &[SeifertPiece], spec: &GluingSpec) -> Result<(), Vec<GluingViolation>> {
    let mut out = Vec::new();
    let mut used = BTreeSet::new();
    let role_of = |t: TorusRef| pieces.get(t.piece).and_then(|p| p.boundary_tori().get(t.torus)).map(|b| b.role);
    for (gid, g) in spec.gluings.iter().enumerate() {
        for (t, want) in [(g.from, Role::Out), (g.to, Role::In)] {
            match role_of(t) {
                None => out.push(GluingViolation::UnknownTorus { torus: t }),
                Some(r) if r != want => out.push(GluingViolation::RoleMismatch { torus: t, expected: want }),
                _ => {}
            }
            if !used.insert(t) {
                out.push(GluingViolation::TorusReused { torus: t });
            }
        }
        let d = det(&g.matrix);
        if d.abs() != 1 {
            out.push(GluingViolation::NonUnimodular { gluing: gid, det: d });
        } else if preserves_fiber(&g.matrix) {
            out.push(GluingViolation::FiberGluedToFiber { gluing: gid });
        }
    }
    for (pi, p) in pieces.iter().enumerate() {
        for ti in 0..p.boundary_tori().len() {
            let t = TorusRef { piece: pi, torus: ti };
            if !used.contains(&t) {
                out.push(GluingViolation::UnmatchedTorus { torus: t });
            }
        }
    }
    if let Some(gid) = orientation_conflict(pieces.len(), spec) {
        out.push(GluingViolation::NonOrientable { gluing: gid });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Looks for piece orientations `ε` with `det(A)·ε_from·ε_to = −1` on every
/// gluing; returns the first gluing that cannot be satisfied.
fn orientation_conflict(n: usize, spec: &GluingSpec) -> Option<usize> {
    let mut adj: Vec<Vec<(usize, i64, usize)>> = vec![Vec::new(); n];
    for (gid, g) in spec.gluings.iter().enumerate() {
        let d = det(&g.matrix);
        if d.abs() != 1 || g.from.piece >= n || g.to.piece >= n {
            continue;
        }
        // ε_to = −d·ε_from
        adj[g.from.piece].push((g.to.piece, -d, gid));
        adj[g.to.piece].push((g.from.piece, -d, gid));
    }
    let mut eps = vec![0i64; n];
    let mut worst: Option<usize> = None;
    for s in 0..n {
        if eps[s] != 0 {
            continue;
        }
        eps[s] = 1;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &(w, rel, gid) in &adj[v] {
                if eps[w] == 0 {
                    eps[w] = rel * eps[v];
                    stack.push(w);
                } else if eps[w] != rel * eps[v] {
                    worst = Some(worst.map_or(gid, |x| x.min(gid)));
                }
            }
        }
    }
    worst
}

/// An annulus cell: one side of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub piece: usize,
    pub edge: usize,
    pub side: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitGraph {
    pub cells: Vec<Cell>,
    /// Sorted successor lists, by cell index.
    pub arcs: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GluedFlow {
    pieces: Vec<SeifertPiece>,
    gluing: GluingSpec,
    signs: SignVector,
    seed: Option<u64>,
}

pub fn build_flow(pieces: Vec<SeifertPiece>, spec: GluingSpec) -> Result<GluedFlow, AssemblyError> {
    for (i, p) in pieces.iter().enumerate() {
        if !p.is_regular() {
            return Err(AssemblyError::UnsupportedPiece(i));
        }
    }
    validate_gluing(&pieces, &spec).map_err(AssemblyError::InvalidGluing)?;
    let signs = SignVector(pieces.iter().map(|p| p.block_sign()).collect());
    Ok(GluedFlow { pieces, gluing: spec, signs, seed: None })
}

/// Glues the `k`-th Out torus of a single piece to its `k`-th In torus by
/// [`SWAP_MATRIX`].
pub fn self_glued_flow(piece: SeifertPiece) -> Result<GluedFlow, AssemblyError> {
    let tori = piece.boundary_tori();
    let outs = (0..tori.len()).filter(|t| tori[*t].role == Role::Out);
    let ins = (0..tori.len()).filter(|t| tori[*t].role == Role::In);
    let gluings = outs
        .zip(ins)
        .map(|(o, i)| Gluing {
            from: TorusRef { piece: 0, torus: o },
            to: TorusRef { piece: 0, torus: i },
            matrix: SWAP_MATRIX,
        })
        .collect();
    build_flow(vec![piece], GluingSpec::new(gluings))
}

impl GluedFlow {
    pub fn pieces(&self) -> &[SeifertPiece] {
        &self.pieces
    }

    pub fn gluing(&self) -> &GluingSpec {
        &self.gluing
    }

    pub fn signs(&self) -> &SignVector {
        &self.signs
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> GluedFlow {
        self.seed = seed;
        self
    }

    /// Same pieces (up to flips) and same gluings.
    pub fn same_underlying(&self, other: &GluedFlow) -> bool {
        self.same_pieces(other) && self.gluing == other.gluing
    }

    fn same_pieces(&self, other: &GluedFlow) -> bool {
        self.pieces.len() == other.pieces.len()
            && self.pieces.iter().zip(&other.pieces).all(|(a, b)| a.graph() == b.graph() && a.lambda() == b.lambda())
    }

    /// The torus containing a cell.
    pub fn torus_of(&self, c: Cell) -> usize {
        let g = self.pieces[c.piece].graph();
        g.face_of_side(EdgeSide { edge: c.edge, side: c.side })
    }

    pub fn transit_graph(&self) -> TransitGraph {
        let mut cells = Vec::new();
        for (pi, p) in self.pieces.iter().enumerate() {
            for e in 0..p.graph().edge_count() {
                for side in 0..2 {
                    cells.push(Cell { piece: pi, edge: e, side });
                }
            }
        }
        let index: BTreeMap<Cell, usize> = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        // in-cells of each torus
        let mut in_cells: BTreeMap<TorusRef, Vec<usize>> = BTreeMap::new();
        for (pi, p) in self.pieces.iter().enumerate() {
            for (a, _) in piece_transit(p) {
                let c = Cell { piece: pi, edge: a.edge, side: a.side };
                let t = TorusRef { piece: pi, torus: self.torus_of(c) };
                in_cells.entry(t).or_default().push(index[&c]);
            }
        }
        let mut arcs = vec![Vec::new(); cells.len()];
        for (pi, p) in self.pieces.iter().enumerate() {
            for (a, b) in piece_transit(p) {
                let ca = index[&Cell { piece: pi, edge: a.edge, side: a.side }];
                let cb_cell = Cell { piece: pi, edge: b.edge, side: b.side };
                let cb = index[&cb_cell];
                arcs[ca].push(cb);
                let t = TorusRef { piece: pi, torus: self.torus_of(cb_cell) };
                if let Some((_, g)) = self.gluing.from_torus(t) {
                    arcs[cb].extend(in_cells.get(&g.to).into_iter().flatten().copied());
                }
            }
        }
        for a in &mut arcs {
            a.sort_unstable();
            a.dedup();
        }
        TransitGraph { cells, arcs }
    }
}

/// Strong connectivity of the transit graph.
pub fn check_transitive(f: &GluedFlow) -> bool {
    let t = f.transit_graph();
    let n = t.cells.len();
    if n == 0 {
        return true;
    }
    let mut rev = vec![Vec::new(); n];
    for (a, succ) in t.arcs.iter().enumerate() {
        for &b in succ {
            rev[b].push(a);
        }
    }
    let reach = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut q = VecDeque::from([0]);
        while let Some(v) = q.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    q.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(&t.arcs) && reach(&rev)
}

/// One block crossed by a periodic orbit, and the gluing it leaves through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Step {
    pub piece: usize,
    pub edge: usize,
    pub gluing: usize,
}

/// A cyclic step sequence rotated to start at its least step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Itinerary(pub Vec<Step>);

impl Itinerary {
    /// Rotates to the least rotation.
    pub fn canonical(steps: Vec<Step>) -> Itinerary {
        let n = steps.len();
        let best = (0..n)
            .min_by(|&a, &b| {
                let ra = steps[a..].iter().chain(&steps[..a]);
                let rb = steps[b..].iter().chain(&steps[..b]);
                ra.cmp(rb)
            })
            .unwrap_or(0);
        let mut s = steps;
        s.rotate_left(best);
        Itinerary(s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

type Block = (usize, usize);

/// Block-level successor lists: block `(piece, edge)` leads to every block
/// whose in-cell lies on the torus its out-cell is glued to.
fn block_graph(f: &GluedFlow) -> (Vec<Block>, Vec<Vec<Block>>) {
    let mut blocks = Vec::new();
    for (pi, p) in f.pieces.iter().enumerate() {
        for e in 0..p.graph().edge_count() {
            blocks.push((pi, e));
        }
    }
    let index: BTreeMap<(usize, usize), usize> = blocks.iter().enumerate().map(|(i, b)| (*b, i)).collect();
    let transit: Vec<Vec<(EdgeSide, EdgeSide)>> = f.pieces.iter().map(piece_transit).collect();
    let mut entering: BTreeMap<TorusRef, Vec<usize>> = BTreeMap::new();
    for (pi, t) in transit.iter().enumerate() {
        for (a, _) in t {
            let torus = f.pieces[pi].graph().face_of_side(*a);
            entering.entry(TorusRef { piece: pi, torus }).or_default().push(index[&(pi, a.edge)]);
        }
    }
    let succ = blocks
        .iter()
        .map(|&(pi, e)| {
            let out = transit[pi][e].1;
            let torus = f.pieces[pi].graph().face_of_side(out);
            match f.gluing.from_torus(TorusRef { piece: pi, torus }) {
                Some((gid, g)) => entering.get(&g.to).into_iter().flatten().map(|&b| (b, gid)).collect(),
                None => Vec::new(),
            }
        })
        .collect();
    (blocks, succ)
}

/// All simple cyclic itineraries with at most `max_len` blocks.
pub fn periodic_itineraries(f: &GluedFlow, max_len: usize) -> BTreeSet<Itinerary> {
    let (blocks, succ) = block_graph(f);
    let mut out = BTreeSet::new();
    let mut on_path = vec![false; blocks.len()];
    let mut path: Vec<(usize, usize)> = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        start: usize,
        v: usize,
        succ: &[Vec<(usize, usize)>],
        blocks: &[(usize, usize)],
        max_len: usize,
        on_path: &mut [bool],
        path: &mut Vec<(usize, usize)>,
        out: &mut BTreeSet<Itinerary>,
    ) {
        for &(w, gid) in &succ[v] {
            if w == start {
                let mut steps: Vec<Step> =
                    path.iter().map(|&(b, g)| Step { piece: blocks[b].0, edge: blocks[b].1, gluing: g }).collect();
                steps.push(Step { piece: blocks[v].0, edge: blocks[v].1, gluing: gid });
                out.insert(Itinerary::canonical(steps));
            } else if w > start && !on_path[w] && path.len() + 1 < max_len {
                on_path[w] = true;
                path.push((v, gid));
                dfs(start, w, succ, blocks, max_len, on_path, path, out);
                path.pop();
                on_path[w] = false;
            }
        }
    }

    if max_len == 0 {
        return out;
    }
    for s in 0..blocks.len() {
        on_path[s] = true;
        dfs(s, s, &succ, &blocks, max_len, &mut on_path, &mut path, &mut out);
        on_path[s] = false;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HomotopyWitness {
    /// A vertical orbit class present in only one flow.
    VerticalClass { piece: usize, vertex: VertexId, marking: VertexMarking },
    /// An itinerary present in `first` but not the other flow, or vice versa.
    Itinerary { itinerary: Itinerary, in_first: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum HomotopyVerdict {
    Equal,
    Differs { witness: HomotopyWitness },
}

/// Compares unoriented vertical orbit classes and itinerary sets up to
/// `max_len`.
pub fn free_homotopy_compare(f1: &GluedFlow, f2: &GluedFlow, max_len: usize) -> Result<HomotopyVerdict, AssemblyError> {
    if !f1.same_pieces(f2) {
        return Err(AssemblyError::IncomparableManifolds);
    }
    let vertical = |f: &GluedFlow| -> BTreeSet<(usize, VertexId, VertexMarking)> {
        f.pieces
            .iter()
            .enumerate()
            .flat_map(|(pi, p)| p.graph().vertices().iter().zip(p.graph().markings()).map(move |(v, m)| (pi, v.id, *m)))
            .collect()
    };
    let (v1, v2) = (vertical(f1), vertical(f2));
    if let Some(&(piece, vertex, marking)) = v1.symmetric_difference(&v2).next() {
        return Ok(HomotopyVerdict::Differs { witness: HomotopyWitness::VerticalClass { piece, vertex, marking } });
    }
    let (i1, i2) = (periodic_itineraries(f1, max_len), periodic_itineraries(f2, max_len));
    if let Some(it) = i1.symmetric_difference(&i2).next() {
        return Ok(HomotopyVerdict::Differs {
            witness: HomotopyWitness::Itinerary { itinerary: it.clone(), in_first: i1.contains(it) },
        });
    }
    Ok(HomotopyVerdict::Equal)
}

/// Flips piece `i`; gluings are untouched.
pub fn apply_flip(f: &GluedFlow, i: usize) -> Result<GluedFlow, AssemblyError> {
    let p = f.pieces.get(i).ok_or(AssemblyError::PieceOutOfRange(i))?;
    if !p.is_regular() {
        return Err(AssemblyError::UnsupportedPiece(i));
    }
    let mut g = f.clone();
    g.pieces[i] = flip_piece(p);
    g.signs = g.signs.negated_at(i);
    Ok(g)
}

/// Flips every piece whose sign in `target` differs from the flow's.
pub fn flip_to(f: &GluedFlow, target: &[Sign]) -> Result<GluedFlow, AssemblyError> {
    let mut g = f.clone();
    for (i, s) in target.iter().enumerate() {
        if *s != g.signs.0[i] {
            g = apply_flip(&g, i)?;
        }
    }
    Ok(g)
}

/// Groups flows by sign vector after checking they share free-homotopy data.
/// Classes are listed by first member.
pub fn classify(flows: &[GluedFlow], max_len: usize) -> Result<Vec<Vec<usize>>, AssemblyError> {
    let Some(first) = flows.first() else {
        return Ok(Vec::new());
    };
    for f in &flows[1..] {
        if !first.same_underlying(f) {
            return Err(AssemblyError::IncomparableFlows);
        }
        match free_homotopy_compare(first, f, max_len) {
            Ok(HomotopyVerdict::Equal) => {}
            _ => return Err(AssemblyError::IncomparableFlows),
        }
    }
    let mut classes: Vec<(SignVector, Vec<usize>)> = Vec::new();
    for (i, f) in flows.iter().enumerate() {
        match classes.iter_mut().find(|(s, _)| s == f.signs()) {
            Some((_, members)) => members.push(i),
            None => classes.push((f.signs().clone(), vec![i])),
        }
    }
    Ok(classes.into_iter().map(|(_, m)| m).collect())
}
