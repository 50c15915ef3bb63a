//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use anoflip_core::fatgraph::{
    family_xn, two_holed_torus_example, DartId, FatGraph, FatGraphIsomorphism, OrientationFlag, Role, RoleFlag,
};
use anoflip_core::manifold_assembly::{
    build_flow, construction_7_3, flip_to, orbit_equivalence_search, replay_certificate, self_glued_flow, Cell,
    EquivalenceCertificate, FlowDirection, GluedFlow, Gluing, GluingSpec, Itinerary, PieceMap, Step, TorusRef,
    TransitGraph, SWAP_MATRIX,
};
use anoflip_core::seifert_piece::{build_piece, piece_transit, SeifertPiece};
use anoflip_core::Sign;
use rand::Rng;

pub fn torus_piece() -> SeifertPiece {
    build_piece(&two_holed_torus_example(), Sign::Plus, 10.0).unwrap()
}

pub fn torus_of_role(p: &SeifertPiece, role: Role) -> usize {
    p.boundary_tori().iter().position(|t| t.role == role).unwrap()
}

/// Two copies of the two-holed torus piece, each Out torus glued to the other
/// copy's In torus.
pub fn two_torus_flow() -> GluedFlow {
    let (p0, p1) = (torus_piece(), torus_piece());
    let (o, i) = (torus_of_role(&p0, Role::Out), torus_of_role(&p0, Role::In));
    let gluings = vec![
        Gluing { from: TorusRef { piece: 0, torus: o }, to: TorusRef { piece: 1, torus: i }, matrix: SWAP_MATRIX },
        Gluing { from: TorusRef { piece: 1, torus: o }, to: TorusRef { piece: 0, torus: i }, matrix: SWAP_MATRIX },
    ];
    build_flow(vec![p0, p1], GluingSpec::new(gluings)).unwrap()
}

pub fn xn_flow(ns: &[u32], seed: u64) -> GluedFlow {
    let graphs: Vec<FatGraph> = ns.iter().map(|n| family_xn(*n).unwrap()).collect();
    construction_7_3(&graphs, seed, 10.0).unwrap()
}

/// The flow together with all its flips, indexed by the bit mask of flipped
/// pieces.
pub fn all_flips(f: &GluedFlow) -> Vec<GluedFlow> {
    let k = f.pieces().len();
    (0..1usize << k)
        .map(|mask| {
            let target: Vec<Sign> =
                (0..k).map(|i| if mask >> i & 1 == 1 { -f.signs().0[i] } else { f.signs().0[i] }).collect();
            flip_to(f, &target).unwrap()
        })
        .collect()
}

pub fn random_self_glued_flow<R: Rng>(rng: &mut R, max_edges: usize) -> GluedFlow {
    let g = anoflip_core::random::random_admissible_graph(rng, max_edges, 100_000).unwrap();
    self_glued_flow(build_piece(&g, Sign::Plus, 10.0).unwrap()).unwrap()
}

/// Faces traced by walking `d ↦ next dart after α(d)` with linear scans of
/// the defining lists, each rotated to start at its least dart.
pub fn naive_faces(g: &FatGraph) -> BTreeSet<Vec<DartId>> {
    let mut used = BTreeSet::new();
    let mut out = BTreeSet::new();
    for &start in g.dart_ids() {
        if used.contains(&start) {
            continue;
        }
        let mut face = Vec::new();
        let mut d = start;
        while used.insert(d) {
            face.push(d);
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
        let k = face.iter().enumerate().min_by_key(|(_, d)| **d).unwrap().0;
        face.rotate_left(k);
        out.insert(face);
    }
    out
}

/// Simple cycles of the cell-level transit graph, rewritten as block steps.
pub fn cell_cycle_itineraries(f: &GluedFlow, max_len: usize) -> BTreeSet<Itinerary> {
    let t = f.transit_graph();
    let n = t.cells.len();
    let mut out = BTreeSet::new();
    let mut path = Vec::new();
    let mut on = vec![false; n];

    fn walk(
        start: usize,
        v: usize,
        t: &TransitGraph,
        max_cells: usize,
        path: &mut Vec<usize>,
        on: &mut [bool],
        found: &mut Vec<Vec<usize>>,
    ) {
        path.push(v);
        on[v] = true;
        for &w in &t.arcs[v] {
            if w == start {
                found.push(path.clone());
            } else if w > start && !on[w] && path.len() < max_cells {
                walk(start, w, t, max_cells, path, on, found);
            }
        }
        path.pop();
        on[v] = false;
    }

    let mut cycles = Vec::new();
    for s in 0..n {
        walk(s, s, &t, 2 * max_len, &mut path, &mut on, &mut cycles);
    }
    let in_cells: BTreeSet<Cell> = f
        .pieces()
        .iter()
        .enumerate()
        .flat_map(|(pi, p)| {
            piece_transit(p).into_iter().map(move |(a, _)| Cell { piece: pi, edge: a.edge, side: a.side })
        })
        .collect();
    for cyc in cycles {
        let start = (0..cyc.len()).find(|&k| in_cells.contains(&t.cells[cyc[k]])).unwrap();
        let mut c = cyc.clone();
        c.rotate_left(start);
        let steps: Vec<Step> = c
            .chunks(2)
            .map(|pair| {
                let out_cell = t.cells[pair[1]];
                let torus = f.torus_of(out_cell);
                let (gid, _) = f.gluing().from_torus(TorusRef { piece: out_cell.piece, torus }).unwrap();
                Step { piece: out_cell.piece, edge: out_cell.edge, gluing: gid }
            })
            .collect();
        out.insert(Itinerary::canonical(steps));
    }
    out
}

/// Every dart bijection that respects the cyclic order at each vertex (up to a
/// global reversal) and carries edges to edges.
pub type BruteIso = (Vec<(u32, u32)>, Vec<(u32, u32)>, OrientationFlag);

pub fn brute_isomorphisms(g: &FatGraph, h: &FatGraph) -> Vec<BruteIso> {
    let n = g.vertex_count();
    if n != h.vertex_count() {
        return Vec::new();
    }
    let hedge: BTreeMap<u32, u32> = h.edges().iter().flat_map(|&[a, b]| [(a, b), (b, a)]).collect();
    let gedges = g.edges();
    let mut out = Vec::new();
    for perm in permutations(n) {
        if perm.iter().enumerate().any(|(v, &w)| g.valence(v) != h.valence(w) || g.markings()[v] != h.markings()[w]) {
            continue;
        }
        let total: usize = (0..n).map(|v| g.valence(v)).product();
        for orientation in [OrientationFlag::Preserving, OrientationFlag::Reversing] {
            for code in 0..total {
                let mut c = code;
                let mut map = BTreeMap::new();
                for (v, &w) in perm.iter().enumerate() {
                    let k = g.valence(v);
                    let r = c % k;
                    c /= k;
                    let (src, dst) = (&g.vertices()[v].darts, &h.vertices()[w].darts);
                    for (j, d) in src.iter().enumerate() {
                        let pos = match orientation {
                            OrientationFlag::Preserving => (r + j) % k,
                            OrientationFlag::Reversing => (r + k - j) % k,
                        };
                        map.insert(*d, dst[pos]);
                    }
                }
                if gedges.iter().all(|&[a, b]| hedge[&map[&a]] == map[&b]) {
                    let verts = (0..n).map(|v| (g.vertices()[v].id, h.vertices()[perm[v]].id)).collect();
                    out.push((map.into_iter().collect(), verts, orientation));
                }
            }
        }
    }
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// Least valid certificate found by trying every combination of piece
/// matching, dart bijection, fiber flag and direction against the replay
/// checker.
pub fn brute_force_search(f1: &GluedFlow, f2: &GluedFlow) -> Option<EquivalenceCertificate> {
    let k = f1.pieces().len();
    if k != f2.pieces().len() {
        return None;
    }
    let mut best: Option<EquivalenceCertificate> = None;
    for direction in [FlowDirection::Preserve, FlowDirection::Reverse] {
        let roles = if direction == FlowDirection::Preserve { RoleFlag::Keep } else { RoleFlag::Swap };
        for targets in permutations(k) {
            let options: Vec<Vec<PieceMap>> = (0..k)
                .map(|i| {
                    let (g, h) = (f1.pieces()[i].graph(), f2.pieces()[targets[i]].graph());
                    brute_isomorphisms(g, h)
                        .into_iter()
                        .flat_map(|(darts, vertices, orientation)| {
                            [Sign::Plus, Sign::Minus].map(|fiber| PieceMap {
                                source: i,
                                target: targets[i],
                                isomorphism: FatGraphIsomorphism {
                                    darts: darts.clone(),
                                    vertices: vertices.clone(),
                                    faces: Vec::new(),
                                    orientation,
                                    roles,
                                },
                                fiber,
                            })
                        })
                        .collect()
                })
                .collect();
            let total: usize = options.iter().map(|o| o.len()).product();
            for code in 0..total {
                let mut c = code;
                let pieces: Vec<PieceMap> = options
                    .iter()
                    .map(|o| {
                        let m = o[c % o.len()].clone();
                        c /= o.len();
                        m
                    })
                    .collect();
                let cert = EquivalenceCertificate { direction, pieces };
                if replay_certificate(f1, f2, &cert).is_ok()
                    && best.as_ref().is_none_or(|b| cert.sort_key() < b.sort_key())
                {
                    best = Some(cert);
                }
            }
        }
    }
    best
}

pub fn assert_search_matches_brute_force(f1: &GluedFlow, f2: &GluedFlow) {
    let found = orbit_equivalence_search(f1, f2);
    let brute = brute_force_search(f1, f2);
    match (found.certificate(), brute) {
        (None, None) => {}
        (Some(c), Some(b)) => {
            replay_certificate(f1, f2, c).unwrap();
            assert_eq!(c.sort_key(), b.sort_key());
        }
        (c, b) => panic!("search {c:?} vs brute force {b:?}"),
    }
}
