//! Cyclic gluing of pieces around their special vertices.
//!
//! Piece `i` has a vertex `v_i` fixed by every automorphism of its graph. An In
//! torus `T_i` meeting the stable annulus of the orbit over `v_i` receives an
//! Out torus `T'_{i+1}` meeting the unstable annulus over `v_{i+1}`. The
//! remaining tori are paired so that no two tori touching any `v_j` are glued
//! together.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_flow, AssemblyError, GluedFlow, Gluing, GluingSpec, TorusRef, SWAP_MATRIX};
use crate::fatgraph::{special_vertex, FatGraph, Role};
use crate::model_block::Sign;
use crate::seifert_piece::{build_piece, SeifertPiece};

/// Tori of `p` meeting the orbit over vertex index `v`: the In tori at its
/// stable corners and the Out tori at its unstable corners.
pub fn special_tori(p: &SeifertPiece, v: usize) -> (Vec<usize>, Vec<usize>) {
    let g = p.graph();
    let roles = g.face_roles().expect("piece graphs carry roles");
    let faces: BTreeSet<usize> = g.corner_faces(v).into_iter().collect();
    let ins = faces.iter().copied().filter(|f| roles[*f] == Role::In).collect();
    let outs = faces.iter().copied().filter(|f| roles[*f] == Role::Out).collect();
    (ins, outs)
}

fn special_vertex_index(g: &FatGraph, i: usize) -> Result<usize, AssemblyError> {
    let v = special_vertex(g).ok_or(AssemblyError::MissingSpecialVertex(i))?;
    Ok(g.vertex_index(v).expect("vertex of g"))
}

pub fn construction_7_3(graphs: &[FatGraph], seed: u64, lambda: f64) -> Result<GluedFlow, AssemblyError> {
    let k = graphs.len();
    if k == 0 {
        return Err(AssemblyError::NoValidPairing);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pieces = Vec::with_capacity(k);
    let mut marked: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(k);
    for (i, g) in graphs.iter().enumerate() {
        let v = special_vertex_index(g, i)?;
        let p = build_piece(g, Sign::Plus, lambda)?;
        marked.push(special_tori(&p, v));
        pieces.push(p);
    }
    let mut chosen_in = Vec::with_capacity(k);
    let mut chosen_out = Vec::with_capacity(k);
    for (ins, outs) in &marked {
        let t = *ins.choose(&mut rng).ok_or(AssemblyError::NoValidPairing)?;
        let t2 = *outs.choose(&mut rng).ok_or(AssemblyError::NoValidPairing)?;
        chosen_in.push(t);
        chosen_out.push(t2);
    }
    let mut gluings: Vec<Gluing> = (0..k)
        .map(|i| Gluing {
            from: TorusRef { piece: (i + 1) % k, torus: chosen_out[(i + 1) % k] },
            to: TorusRef { piece: i, torus: chosen_in[i] },
            matrix: SWAP_MATRIX,
        })
        .collect();

    let special: BTreeSet<TorusRef> = marked
        .iter()
        .enumerate()
        .flat_map(|(i, (a, b))| a.iter().chain(b).map(move |&t| TorusRef { piece: i, torus: t }))
        .collect();
    let used: BTreeSet<TorusRef> = gluings.iter().flat_map(|g| [g.from, g.to]).collect();
    let mut outs = Vec::new();
    let mut ins = Vec::new();
    for (pi, p) in pieces.iter().enumerate() {
        for (ti, t) in p.boundary_tori().iter().enumerate() {
            let r = TorusRef { piece: pi, torus: ti };
            if used.contains(&r) {
                continue;
            }
            match t.role {
                Role::Out => outs.push(r),
                Role::In => ins.push(r),
            }
        }
    }
    if outs.len() != ins.len() {
        return Err(AssemblyError::NoValidPairing);
    }
    outs.shuffle(&mut rng);
    ins.shuffle(&mut rng);
    let allowed = |a: &TorusRef, b: &TorusRef| !(special.contains(a) && special.contains(b));
    let matching = bipartite_matching(&outs, &ins, allowed).ok_or(AssemblyError::NoValidPairing)?;
    for (o, i) in matching.into_iter().enumerate() {
        gluings.push(Gluing { from: outs[o], to: ins[i], matrix: SWAP_MATRIX });
    }
    Ok(build_flow(pieces, GluingSpec::new(gluings))?.with_seed(Some(seed)))
}

/// Perfect matching by augmenting paths; `result[i]` is the partner of
/// `left[i]`.
fn bipartite_matching<T>(left: &[T], right: &[T], allowed: impl Fn(&T, &T) -> bool) -> Option<Vec<usize>> {
    let n = left.len();
    let adj: Vec<Vec<usize>> =
        left.iter().map(|a| (0..right.len()).filter(|&j| allowed(a, &right[j])).collect()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; right.len()];

    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[u] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|w| augment(w, adj, seen, owner)) {
                owner[j] = Some(u);
                return true;
            }
        }
        false
    }

    for u in 0..n {
        let mut seen = vec![false; right.len()];
        if !augment(u, &adj, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut out = vec![0; n];
    for (j, o) in owner.iter().enumerate() {
        if let Some(u) = o {
            out[*u] = j;
        }
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstructionViolation {
    MissingSpecialVertex {
        piece: usize,
    },
    /// The cyclic gluing into the stable side of piece `piece` is absent.
    MissingCyclicGluing {
        piece: usize,
    },
    /// Two tori touching special orbits are glued outside the cycle.
    SpecialToSpecial {
        gluing: usize,
    },
}

/// Checks the special-torus constraints of a flow built by
/// [`construction_7_3`].
pub fn check_construction_7_3(f: &GluedFlow) -> Result<(), Vec<ConstructionViolation>> {
    let k = f.pieces().len();
    let mut marked = Vec::with_capacity(k);
    let mut out = Vec::new();
    for (i, p) in f.pieces().iter().enumerate() {
        match special_vertex(p.graph()) {
            Some(v) => marked.push(special_tori(p, p.graph().vertex_index(v).expect("vertex"))),
            None => {
                out.push(ConstructionViolation::MissingSpecialVertex { piece: i });
                marked.push((Vec::new(), Vec::new()));
            }
        }
    }
    if !out.is_empty() {
        return Err(out);
    }
    let is_special = |t: &TorusRef| {
        let (a, b) = &marked[t.piece];
        a.contains(&t.torus) || b.contains(&t.torus)
    };
    let mut cyclic = vec![false; k];
    for (gid, g) in f.gluing().gluings().iter().enumerate() {
        if !(is_special(&g.from) && is_special(&g.to)) {
            continue;
        }
        let i = g.to.piece;
        let ok = marked[i].0.contains(&g.to.torus)
            && g.from.piece == (i + 1) % k
            && marked[g.from.piece].1.contains(&g.from.torus)
            && !cyclic[i];
        if ok {
            cyclic[i] = true;
        } else {
            out.push(ConstructionViolation::SpecialToSpecial { gluing: gid });
        }
    }
    for (i, c) in cyclic.iter().enumerate() {
        if !c {
            out.push(ConstructionViolation::MissingCyclicGluing { piece: i });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
