//! Inputs shared by the benchmarks under `benches/`.

use anoflip_core::fatgraph::two_holed_torus_example;
use anoflip_core::manifold_assembly::{build_flow, GluedFlow, Gluing, GluingSpec, TorusRef, SWAP_MATRIX};
use anoflip_core::seifert_piece::build_piece;
use anoflip_core::{Role, Sign};

/// Two two-holed-torus pieces, each Out torus glued to the other's In torus.
pub fn two_torus_flow() -> GluedFlow {
    let p = build_piece(&two_holed_torus_example(), Sign::Plus, 10.0).unwrap();
    let torus = |r: Role| p.boundary_tori().iter().position(|t| t.role == r).unwrap();
    let (o, i) = (torus(Role::Out), torus(Role::In));
    let gluings = vec![
        Gluing { from: TorusRef { piece: 0, torus: o }, to: TorusRef { piece: 1, torus: i }, matrix: SWAP_MATRIX },
        Gluing { from: TorusRef { piece: 1, torus: o }, to: TorusRef { piece: 0, torus: i }, matrix: SWAP_MATRIX },
    ];
    build_flow(vec![p.clone(), p], GluingSpec::new(gluings)).unwrap()
}
