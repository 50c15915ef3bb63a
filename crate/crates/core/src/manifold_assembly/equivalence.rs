//! Orbit equivalences between glued flows that respect the piece structure.
//!
//! A candidate consists of a global flow direction `τ`, a matching `π` of
//! pieces and, per piece, a fatgraph isomorphism `a_i` with surface
//! orientation `o_i` and a fiber direction `δ_i`. Orbit directions force
//! `δ_i`: the orbit over `v` with direction `d(v)` must land on the orbit over
//! `a_i(v)` with direction `τ·δ_i·d(v)`. On boundary tori the map acts by
//! `D_i = diag(o_i, δ_i)` in `(ℓ, f)` coordinates, and gluings must be carried
//! to gluings: `A ↦ D_j·A·D_i` when `τ` preserves the flow, and
//! `A ↦ D_i·A⁻¹·D_j` (with source and target exchanged) when it reverses it.
//! Twisting along tori is not modelled.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{inverse, GluedFlow, Gluing, Matrix, TorusRef};
use crate::fatgraph::{isomorphisms, DartId, EdgeSide, FatGraph, FatGraphIsomorphism, OrientationFlag, RoleFlag};
use crate::model_block::Sign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDirection {
    Preserve,
    Reverse,
}

impl FlowDirection {
    pub fn as_sign(self) -> Sign {
        match self {
            FlowDirection::Preserve => Sign::Plus,
            FlowDirection::Reverse => Sign::Minus,
        }
    }

    fn role_flag(self) -> RoleFlag {
        match self {
            FlowDirection::Preserve => RoleFlag::Keep,
            FlowDirection::Reverse => RoleFlag::Swap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceMap {
    pub source: usize,
    pub target: usize,
    pub isomorphism: FatGraphIsomorphism,
    /// Whether the fiber direction is kept (`+1`) or reversed.
    pub fiber: Sign,
}

impl PieceMap {
    fn orientation(&self) -> Sign {
        match self.isomorphism.orientation {
            OrientationFlag::Preserving => Sign::Plus,
            OrientationFlag::Reversing => Sign::Minus,
        }
    }

    fn boundary_action(&self) -> Matrix {
        [[self.orientation().as_int(), 0], [0, self.fiber.as_int()]]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceCertificate {
    pub direction: FlowDirection,
    /// One entry per source piece, in source order.
    pub pieces: Vec<PieceMap>,
}

type CertKey = (FlowDirection, Vec<Sign>, Vec<OrientationFlag>, Vec<usize>, Vec<Vec<DartId>>);

impl EquivalenceCertificate {
    /// Canonical order: direction, fiber flags, orientation flags, piece
    /// matching, dart images.
    pub fn sort_key(&self) -> CertKey {
        (
            self.direction,
            self.pieces.iter().map(|m| m.fiber).collect(),
            self.pieces.iter().map(|m| m.isomorphism.orientation).collect(),
            self.pieces.iter().map(|m| m.target).collect(),
            self.pieces.iter().map(|m| m.isomorphism.dart_images()).collect(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found { certificate: EquivalenceCertificate },
    Exhausted,
}

impl SearchOutcome {
    pub fn certificate(&self) -> Option<&EquivalenceCertificate> {
        match self {
            SearchOutcome::Found { certificate } => Some(certificate),
            SearchOutcome::Exhausted => None,
        }
    }
}

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    super::mat_mul(a, b)
}

/// The gluing of the second flow that a candidate requires in place of `g`.
fn transport_gluing(g: &Gluing, direction: FlowDirection, src: (&PieceMap, usize), dst: (&PieceMap, usize)) -> Gluing {
    let (ms, ts) = src;
    let (md, td) = dst;
    let from = TorusRef { piece: ms.target, torus: ts };
    let to = TorusRef { piece: md.target, torus: td };
    match direction {
        FlowDirection::Preserve => {
            Gluing { from, to, matrix: mat_mul(&md.boundary_action(), &mat_mul(&g.matrix, &ms.boundary_action())) }
        }
        FlowDirection::Reverse => Gluing {
            from: to,
            to: from,
            matrix: mat_mul(
                &ms.boundary_action(),
                &mat_mul(&inverse(&g.matrix).expect("unimodular"), &md.boundary_action()),
            ),
        },
    }
}

struct Candidate {
    map: PieceMap,
}

/// Candidate piece maps `i → j` for one flow direction.
fn candidates(f1: &GluedFlow, f2: &GluedFlow, i: usize, j: usize, direction: FlowDirection) -> Vec<Candidate> {
    let (p, q) = (&f1.pieces()[i], &f2.pieces()[j]);
    let (g, h) = (p.graph(), q.graph());
    let (par_p, par_q) = (p.orbit_parity(), q.orbit_parity());
    let tau = direction.as_sign();
    isomorphisms(g, h, true, true)
        .into_iter()
        .filter(|a| a.roles == direction.role_flag())
        .filter_map(|a| {
            // δ = τ·s·s'·r(v)·r'(a v), which must not depend on v
            let mut delta = None;
            for (vi, v) in g.vertices().iter().enumerate() {
                let w = h.vertex_index(a.image_of_vertex(v.id)?)?;
                let d = tau * p.block_sign() * q.block_sign() * par_p[vi] * par_q[w];
                if delta.is_some_and(|x| x != d) {
                    return None;
                }
                delta = Some(d);
            }
            Some(Candidate { map: PieceMap { source: i, target: j, isomorphism: a, fiber: delta? } })
        })
        .collect()
}

/// Searches piece-respecting orbit equivalences from `f1` to `f2` and returns
/// the least certificate in canonical order.
pub fn orbit_equivalence_search(f1: &GluedFlow, f2: &GluedFlow) -> SearchOutcome {
    let k = f1.pieces().len();
    if k != f2.pieces().len() || f1.gluing().len() != f2.gluing().len() {
        return SearchOutcome::Exhausted;
    }
    if k == 0 {
        return SearchOutcome::Found {
            certificate: EquivalenceCertificate { direction: FlowDirection::Preserve, pieces: Vec::new() },
        };
    }
    let targets: HashSet<Gluing> = f2.gluing().gluings().iter().cloned().collect();

    let mut branches = Vec::new();
    for direction in [FlowDirection::Preserve, FlowDirection::Reverse] {
        let table: Vec<Vec<Vec<Candidate>>> =
            (0..k).map(|i| (0..k).map(|j| candidates(f1, f2, i, j, direction)).collect()).collect();
        branches.push((direction, table));
    }

    let found: Vec<EquivalenceCertificate> = branches
        .par_iter()
        .flat_map_iter(|(direction, table)| {
            let mut out = Vec::new();
            let mut chosen: Vec<Option<&Candidate>> = vec![None; k];
            let mut used = vec![false; k];
            search(f1, &targets, *direction, table, 0, &mut chosen, &mut used, &mut out);
            out
        })
        .collect();

    match found.into_iter().min_by_key(|c| c.sort_key()) {
        Some(certificate) => SearchOutcome::Found { certificate },
        None => SearchOutcome::Exhausted,
    }
}

#[allow(clippy::too_many_arguments)]
fn search<'a>(
    f1: &GluedFlow,
    targets: &HashSet<Gluing>,
    direction: FlowDirection,
    table: &'a [Vec<Vec<Candidate>>],
    i: usize,
    chosen: &mut Vec<Option<&'a Candidate>>,
    used: &mut Vec<bool>,
    out: &mut Vec<EquivalenceCertificate>,
) {
    let k = chosen.len();
    if i == k {
        out.push(EquivalenceCertificate {
            direction,
            pieces: chosen.iter().map(|c| c.expect("assigned").map.clone()).collect(),
        });
        return;
    }
    for j in 0..k {
        if used[j] {
            continue;
        }
        for cand in &table[i][j] {
            chosen[i] = Some(cand);
            if consistent_so_far(f1, targets, direction, chosen, i) {
                used[j] = true;
                search(f1, targets, direction, table, i + 1, chosen, used, out);
                used[j] = false;
            }
            chosen[i] = None;
        }
    }
}

/// Checks every gluing whose two pieces are assigned and one of them is `i`.
fn consistent_so_far(
    f1: &GluedFlow,
    targets: &HashSet<Gluing>,
    direction: FlowDirection,
    chosen: &[Option<&Candidate>],
    i: usize,
) -> bool {
    f1.gluing().gluings().iter().all(|g| {
        if g.from.piece != i && g.to.piece != i {
            return true;
        }
        let (Some(cs), Some(cd)) = (chosen[g.from.piece], chosen[g.to.piece]) else {
            return true;
        };
        let (Some(ts), Some(td)) =
            (cs.map.isomorphism.image_of_face(g.from.torus), cd.map.isomorphism.image_of_face(g.to.torus))
        else {
            return false;
        };
        targets.contains(&transport_gluing(g, direction, (&cs.map, ts), (&cd.map, td)))
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("certificate has {0} piece maps for {1} pieces")]
    PieceCount(usize, usize),
    #[error("piece targets are not a permutation")]
    NotAPermutation,
    #[error("piece {0}: the dart map is not a fatgraph isomorphism ({1})")]
    NotAnIsomorphism(usize, String),
    #[error("piece {0}: the role flag does not match the flow direction")]
    RoleFlag(usize),
    #[error("piece {piece}: torus {torus} has no image torus")]
    TorusImage { piece: usize, torus: usize },
    #[error("piece {piece}: orbit over vertex {vertex} lands with the wrong direction")]
    OrbitDirection { piece: usize, vertex: u32 },
    #[error("piece {0}: transported sign disagrees")]
    Sign(usize),
    #[error("gluings are not carried onto the second flow's gluings")]
    Gluings,
    #[error("the map is orientation preserving on some pieces and reversing on others")]
    Orientation,
}

/// Side of the edge carried by each dart, keyed by dart id.
fn dart_sides(g: &FatGraph) -> HashMap<DartId, EdgeSide> {
    let mut m = HashMap::new();
    for (e, pair) in g.edges().iter().enumerate() {
        for (side, d) in pair.iter().enumerate() {
            m.insert(*d, EdgeSide { edge: e, side: side as u8 });
        }
    }
    m
}

/// Checks a dart bijection against the defining data of two graphs only.
fn check_isomorphism(g: &FatGraph, h: &FatGraph, a: &FatGraphIsomorphism) -> Result<(), String> {
    let map: HashMap<DartId, DartId> = a.darts.iter().copied().collect();
    let gd: BTreeSet<DartId> = g.dart_ids().iter().copied().collect();
    let hd: BTreeSet<DartId> = h.dart_ids().iter().copied().collect();
    let keys: BTreeSet<DartId> = map.keys().copied().collect();
    let vals: BTreeSet<DartId> = map.values().copied().collect();
    if keys != gd || vals != hd || map.len() != gd.len() {
        return Err("not a bijection of darts".into());
    }
    let partner =
        |gr: &FatGraph| -> HashMap<DartId, DartId> { gr.edges().iter().flat_map(|&[x, y]| [(x, y), (y, x)]).collect() };
    let (pg, ph) = (partner(g), partner(h));
    for (d, e) in &map {
        if map[&pg[d]] != ph[e] {
            return Err(format!("edge of dart {d} not preserved"));
        }
    }
    let hpos: HashMap<DartId, (usize, usize)> = h
        .vertices()
        .iter()
        .enumerate()
        .flat_map(|(vi, v)| v.darts.iter().enumerate().map(move |(k, d)| (*d, (vi, k))))
        .collect();
    for (vi, v) in g.vertices().iter().enumerate() {
        let imgs: Vec<DartId> = v.darts.iter().map(|d| map[d]).collect();
        let (wi, k0) = hpos[&imgs[0]];
        let w = &h.vertices()[wi];
        if w.darts.len() != imgs.len() {
            return Err(format!("valence differs at vertex {}", v.id));
        }
        let n = imgs.len();
        for (k, img) in imgs.iter().enumerate() {
            let pos = match a.orientation {
                OrientationFlag::Preserving => (k0 + k) % n,
                OrientationFlag::Reversing => (k0 + n - k % n) % n,
            };
            if w.darts[pos] != *img {
                return Err(format!("cyclic order at vertex {} not preserved", v.id));
            }
        }
        if g.markings()[vi] != h.markings()[wi] {
            return Err(format!("marking of vertex {} not preserved", v.id));
        }
        if a.image_of_vertex(v.id) != Some(w.id) {
            return Err(format!("vertex map disagrees at {}", v.id));
        }
    }
    Ok(())
}

/// Image torus of every torus of `g`, found by matching cell sets.
fn torus_images(g: &FatGraph, h: &FatGraph, a: &FatGraphIsomorphism) -> Vec<Option<usize>> {
    let map: HashMap<DartId, DartId> = a.darts.iter().copied().collect();
    let gsides: HashMap<EdgeSide, DartId> = dart_sides(g).into_iter().map(|(d, s)| (s, d)).collect();
    let hsides = dart_sides(h);
    let hpartner: HashMap<DartId, DartId> = h.edges().iter().flat_map(|&[x, y]| [(x, y), (y, x)]).collect();
    let hfaces: Vec<BTreeSet<EdgeSide>> =
        h.trace_boundary_faces().into_iter().map(|f| f.cells.into_iter().collect()).collect();
    g.trace_boundary_faces()
        .iter()
        .map(|f| {
            let img: BTreeSet<EdgeSide> = f
                .cells
                .iter()
                .map(|c| {
                    let d = map[&gsides[c]];
                    match a.orientation {
                        OrientationFlag::Preserving => hsides[&d],
                        // the right side of d becomes the left side of its image
                        OrientationFlag::Reversing => hsides[&hpartner[&d]],
                    }
                })
                .collect();
            hfaces.iter().position(|s| *s == img)
        })
        .collect()
}

/// Piece orientations making every gluing orientation reversing on the
/// boundary, with the least piece of each component positive.
fn piece_orientations(f: &GluedFlow) -> Vec<i64> {
    let k = f.pieces().len();
    let mut eps = vec![0i64; k];
    for s in 0..k {
        if eps[s] != 0 {
            continue;
        }
        eps[s] = 1;
        let mut changed = true;
        while changed {
            changed = false;
            for g in f.gluing().gluings() {
                let rel = -super::det(&g.matrix);
                let (a, b) = (g.from.piece, g.to.piece);
                if eps[a] != 0 && eps[b] == 0 {
                    eps[b] = rel * eps[a];
                    changed = true;
                } else if eps[b] != 0 && eps[a] == 0 {
                    eps[a] = rel * eps[b];
                    changed = true;
                }
            }
        }
    }
    eps
}

/// Replays a certificate as a transformation of `f1` and compares the result
/// with `f2`: graphs, tori, orbit directions, signs and gluings.
pub fn replay_certificate(f1: &GluedFlow, f2: &GluedFlow, c: &EquivalenceCertificate) -> Result<(), ReplayError> {
    let k = f1.pieces().len();
    if c.pieces.len() != k || f2.pieces().len() != k {
        return Err(ReplayError::PieceCount(c.pieces.len(), k));
    }
    let targets: BTreeSet<usize> = c.pieces.iter().map(|m| m.target).collect();
    if targets != (0..k).collect() || c.pieces.iter().enumerate().any(|(i, m)| m.source != i) {
        return Err(ReplayError::NotAPermutation);
    }
    let tau = c.direction.as_sign();
    let mut images = Vec::with_capacity(k);
    for (i, m) in c.pieces.iter().enumerate() {
        let (p, q) = (&f1.pieces()[i], &f2.pieces()[m.target]);
        check_isomorphism(p.graph(), q.graph(), &m.isomorphism).map_err(|e| ReplayError::NotAnIsomorphism(i, e))?;
        if m.isomorphism.roles != c.direction.role_flag() {
            return Err(ReplayError::RoleFlag(i));
        }
        let timg = torus_images(p.graph(), q.graph(), &m.isomorphism);
        for (t, img) in timg.iter().enumerate() {
            let Some(img) = img else {
                return Err(ReplayError::TorusImage { piece: i, torus: t });
            };
            let want = c.direction.role_flag().apply(p.boundary_tori()[t].role);
            if q.boundary_tori()[*img].role != want {
                return Err(ReplayError::TorusImage { piece: i, torus: t });
            }
        }
        images.push(timg.into_iter().map(|t| t.expect("checked")).collect::<Vec<_>>());

        let par_q = q.orbit_parity();
        for (vi, v) in p.graph().vertices().iter().enumerate() {
            let w = q.graph().vertex_index(m.isomorphism.image_of_vertex(v.id).expect("checked")).expect("checked");
            let moved = tau * m.fiber * p.orbit_dir()[vi];
            if moved != q.orbit_dir()[w] {
                return Err(ReplayError::OrbitDirection { piece: i, vertex: v.id });
            }
            if moved * par_q[w] != f2.signs().0[m.target] {
                return Err(ReplayError::Sign(i));
            }
        }
    }

    let mut moved: Vec<Gluing> = f1
        .gluing()
        .gluings()
        .iter()
        .map(|g| {
            let (ms, md) = (&c.pieces[g.from.piece], &c.pieces[g.to.piece]);
            transport_gluing(
                g,
                c.direction,
                (ms, images[g.from.piece][g.from.torus]),
                (md, images[g.to.piece][g.to.torus]),
            )
        })
        .collect();
    moved.sort();
    if moved != f2.gluing().gluings() {
        return Err(ReplayError::Gluings);
    }

    let (e1, e2) = (piece_orientations(f1), piece_orientations(f2));
    let character: BTreeMap<usize, i64> = c
        .pieces
        .iter()
        .enumerate()
        .map(|(i, m)| (i, m.orientation().as_int() * m.fiber.as_int() * e1[i] * e2[m.target]))
        .collect();
    for g in f1.gluing().gluings() {
        if character[&g.from.piece] != character[&g.to.piece] {
            return Err(ReplayError::Orientation);
        }
    }
    Ok(())
}
