//! Isomorphisms and automorphisms of fatgraphs by backtracking over dart
//! images. Fixing the image of one dart per connected component determines the
//! whole map through `α` and `σ` (or `σ⁻¹` for orientation-reversing maps), so
//! the search is linear in the number of candidate images.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DartId, FatGraph, Role, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationFlag {
    Preserving,
    Reversing,
}

impl OrientationFlag {
    pub fn compose(self, other: OrientationFlag) -> OrientationFlag {
        if self == other {
            OrientationFlag::Preserving
        } else {
            OrientationFlag::Reversing
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            OrientationFlag::Preserving => 1,
            OrientationFlag::Reversing => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleFlag {
    Keep,
    Swap,
}

impl RoleFlag {
    pub fn compose(self, other: RoleFlag) -> RoleFlag {
        if self == other {
            RoleFlag::Keep
        } else {
            RoleFlag::Swap
        }
    }

    pub fn apply(self, r: Role) -> Role {
        match self {
            RoleFlag::Keep => r,
            RoleFlag::Swap => r.opposite(),
        }
    }
}

/// A structure-preserving bijection between two fatgraphs, possibly
/// reversing every cyclic order and/or exchanging In and Out faces.
///
/// Maps are stored as `(source, image)` pairs sorted by source.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FatGraphIsomorphism {
    pub darts: Vec<(DartId, DartId)>,
    pub vertices: Vec<(VertexId, VertexId)>,
    pub faces: Vec<(usize, usize)>,
    pub orientation: OrientationFlag,
    pub roles: RoleFlag,
}

/// An isomorphism from a graph to itself.
pub type FatGraphAutomorphism = FatGraphIsomorphism;

impl FatGraphIsomorphism {
    pub fn identity(g: &FatGraph) -> FatGraphIsomorphism {
        FatGraphIsomorphism {
            darts: g.dart_ids().iter().map(|d| (*d, *d)).collect(),
            vertices: g.vertices().iter().map(|v| (v.id, v.id)).collect(),
            faces: (0..g.face_count()).map(|f| (f, f)).collect(),
            orientation: OrientationFlag::Preserving,
            roles: RoleFlag::Keep,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.orientation == OrientationFlag::Preserving
            && self.roles == RoleFlag::Keep
            && self.darts.iter().all(|(a, b)| a == b)
    }

    pub fn image_of_dart(&self, d: DartId) -> Option<DartId> {
        self.darts.binary_search_by_key(&d, |p| p.0).ok().map(|i| self.darts[i].1)
    }

    pub fn image_of_vertex(&self, v: VertexId) -> Option<VertexId> {
        self.vertices.binary_search_by_key(&v, |p| p.0).ok().map(|i| self.vertices[i].1)
    }

    pub fn image_of_face(&self, f: usize) -> Option<usize> {
        self.faces.binary_search_by_key(&f, |p| p.0).ok().map(|i| self.faces[i].1)
    }

    /// Dart images in source order; the canonical sort key.
    pub fn dart_images(&self) -> Vec<DartId> {
        self.darts.iter().map(|p| p.1).collect()
    }

    pub(crate) fn sort_key(&self) -> (OrientationFlag, RoleFlag, Vec<DartId>) {
        (self.orientation, self.roles, self.dart_images())
    }

    /// `other ∘ self`: apply `self` first.
    pub fn then(&self, other: &FatGraphIsomorphism) -> Option<FatGraphIsomorphism> {
        fn comp<K: Ord + Copy>(a: &[(K, K)], b: &[(K, K)]) -> Option<Vec<(K, K)>> {
            let m: BTreeMap<K, K> = b.iter().copied().collect();
            a.iter().map(|(s, t)| m.get(t).map(|u| (*s, *u))).collect()
        }
        Some(FatGraphIsomorphism {
            darts: comp(&self.darts, &other.darts)?,
            vertices: comp(&self.vertices, &other.vertices)?,
            faces: comp(&self.faces, &other.faces)?,
            orientation: self.orientation.compose(other.orientation),
            roles: self.roles.compose(other.roles),
        })
    }

    pub fn inverse(&self) -> FatGraphIsomorphism {
        fn inv<K: Ord + Copy>(a: &[(K, K)]) -> Vec<(K, K)> {
            let mut v: Vec<(K, K)> = a.iter().map(|(s, t)| (*t, *s)).collect();
            v.sort();
            v
        }
        FatGraphIsomorphism {
            darts: inv(&self.darts),
            vertices: inv(&self.vertices),
            faces: inv(&self.faces),
            orientation: self.orientation,
            roles: self.roles,
        }
    }

    /// Order of an automorphism (smallest `k ≥ 1` with `self^k = id`).
    pub fn order(&self) -> usize {
        let mut k = 1;
        let mut cur = self.clone();
        while !cur.is_identity() {
            cur = match cur.then(self) {
                Some(c) => c,
                None => return 0,
            };
            k += 1;
            if k > self.darts.len() * 2 + 2 {
                return 0;
            }
        }
        k
    }
}

/// All isomorphisms `g → h`, sorted by (orientation, role flag, dart images).
/// Role-swapping maps are only considered when both graphs carry roles.
pub fn isomorphisms(
    g: &FatGraph,
    h: &FatGraph,
    allow_reversal: bool,
    allow_role_swap: bool,
) -> Vec<FatGraphIsomorphism> {
    if g.dart_count() != h.dart_count() || g.vertex_count() != h.vertex_count() || g.face_count() != h.face_count() {
        return Vec::new();
    }
    let mut orientations = vec![OrientationFlag::Preserving];
    if allow_reversal {
        orientations.push(OrientationFlag::Reversing);
    }
    let mut out = Vec::new();
    for o in orientations {
        let mut partial = vec![usize::MAX; g.dart_count()];
        let mut used = vec![false; h.dart_count()];
        extend(g, h, o, &mut partial, &mut used, &mut |map| {
            for r in [RoleFlag::Keep, RoleFlag::Swap] {
                if r == RoleFlag::Swap && !allow_role_swap {
                    continue;
                }
                if let Some(iso) = finish(g, h, o, r, map) {
                    out.push(iso);
                }
            }
        });
    }
    out.sort_by_key(|a| a.sort_key());
    out.dedup();
    out
}

/// All automorphisms of `g`.
pub fn automorphisms(g: &FatGraph, allow_reversal: bool, allow_role_swap: bool) -> Vec<FatGraphAutomorphism> {
    isomorphisms(g, g, allow_reversal, allow_role_swap)
}

fn extend(
    g: &FatGraph,
    h: &FatGraph,
    o: OrientationFlag,
    map: &mut Vec<usize>,
    used: &mut Vec<bool>,
    emit: &mut dyn FnMut(&[usize]),
) {
    let Some(seed) = map.iter().position(|&m| m == usize::MAX) else {
        emit(map);
        return;
    };
    for target in 0..h.dart_count() {
        if used[target] {
            continue;
        }
        let mut assigned = Vec::new();
        if propagate(g, h, o, seed, target, map, used, &mut assigned) {
            extend(g, h, o, map, used, emit);
        }
        for d in assigned {
            used[map[d]] = false;
            map[d] = usize::MAX;
        }
    }
}

/// Extends `map` from `seed ↦ target` across the component of `seed`.
/// Records assigned darts so the caller can undo them.
#[allow(clippy::too_many_arguments)]
fn propagate(
    g: &FatGraph,
    h: &FatGraph,
    o: OrientationFlag,
    seed: usize,
    target: usize,
    map: &mut [usize],
    used: &mut [bool],
    assigned: &mut Vec<usize>,
) -> bool {
    let gt = g.topo();
    let ht = h.topo();
    let assign = |d: usize,
                  t: usize,
                  map: &mut [usize],
                  used: &mut [bool],
                  assigned: &mut Vec<usize>,
                  stack: &mut Vec<usize>|
     -> bool {
        if map[d] != usize::MAX {
            return map[d] == t;
        }
        if used[t] {
            return false;
        }
        if g.markings()[gt.vertex_of[d]] != h.markings()[ht.vertex_of[t]] {
            return false;
        }
        map[d] = t;
        used[t] = true;
        assigned.push(d);
        stack.push(d);
        true
    };
    let mut stack = Vec::new();
    if !assign(seed, target, map, used, assigned, &mut stack) {
        return false;
    }
    while let Some(d) = stack.pop() {
        let t = map[d];
        let next_t = match o {
            OrientationFlag::Preserving => ht.sigma[t],
            OrientationFlag::Reversing => ht.sigma_inv[t],
        };
        if !assign(gt.alpha[d], ht.alpha[t], map, used, assigned, &mut stack) {
            return false;
        }
        if !assign(gt.sigma[d], next_t, map, used, assigned, &mut stack) {
            return false;
        }
    }
    true
}

fn finish(g: &FatGraph, h: &FatGraph, o: OrientationFlag, r: RoleFlag, map: &[usize]) -> Option<FatGraphIsomorphism> {
    let gt = g.topo();
    let ht = h.topo();
    // The face on the right of d goes to the face on the right of m(d), or of
    // m(α d) when orientation is reversed.
    let mut faces = vec![usize::MAX; g.face_count()];
    for d in 0..g.dart_count() {
        let img = match o {
            OrientationFlag::Preserving => ht.face_of[map[d]],
            OrientationFlag::Reversing => ht.face_of[map[gt.alpha[d]]],
        };
        let f = gt.face_of[d];
        if faces[f] == usize::MAX {
            faces[f] = img;
        } else if faces[f] != img {
            return None;
        }
    }
    match (g.face_roles(), h.face_roles()) {
        (Some(rg), Some(rh)) => {
            for (f, &img) in faces.iter().enumerate() {
                if r.apply(rg[f]) != rh[img] {
                    return None;
                }
            }
        }
        _ => {
            if r == RoleFlag::Swap {
                return None;
            }
        }
    }
    let mut vertices = vec![usize::MAX; g.vertex_count()];
    for d in 0..g.dart_count() {
        vertices[gt.vertex_of[d]] = ht.vertex_of[map[d]];
    }
    Some(FatGraphIsomorphism {
        darts: (0..g.dart_count()).map(|d| (gt.darts[d], ht.darts[map[d]])).collect(),
        vertices: vertices.iter().enumerate().map(|(v, &w)| (g.vertices()[v].id, h.vertices()[w].id)).collect(),
        faces: faces.into_iter().enumerate().collect(),
        orientation: o,
        roles: r,
    })
}
