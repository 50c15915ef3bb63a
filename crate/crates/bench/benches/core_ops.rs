use std::hint::black_box;

use anoflip_bench::two_torus_flow;
use anoflip_core::fatgraph::{automorphisms, family_xn};
use anoflip_core::flow_numerics::{block_transit, IntegrationConfig};
use anoflip_core::manifold_assembly::{apply_flip, construction_7_3, orbit_equivalence_search, periodic_itineraries};
use anoflip_core::model_block::HALF_PI;
use anoflip_core::seifert_piece::build_piece;
use anoflip_core::{BlockField, BlockPoint, Sign};
use criterion::{criterion_group, criterion_main, Criterion};

fn fatgraph(c: &mut Criterion) {
    let g = family_xn(3).unwrap();
    c.bench_function("trace_faces_x3", |b| b.iter(|| black_box(&g).trace_boundary_faces()));
    c.bench_function("automorphisms_x3", |b| b.iter(|| automorphisms(black_box(&g), true, true)));
    c.bench_function("build_piece_x3", |b| b.iter(|| build_piece(black_box(&g), Sign::Plus, 10.0).unwrap()));
}

fn assembly(c: &mut Criterion) {
    let graphs = [family_xn(1).unwrap(), family_xn(2).unwrap()];
    let f = construction_7_3(&graphs, 0, 10.0).unwrap();
    let g = apply_flip(&f, 1).unwrap();
    c.bench_function("construction_x1_x2", |b| b.iter(|| construction_7_3(black_box(&graphs), 0, 10.0).unwrap()));
    c.bench_function("itineraries_x1_x2_len6", |b| b.iter(|| periodic_itineraries(black_box(&f), 6)));
    c.bench_function("search_x1_x2_exhausted", |b| b.iter(|| orbit_equivalence_search(black_box(&f), &g)));
    let t = two_torus_flow();
    let u = apply_flip(&t, 0).unwrap();
    c.bench_function("search_torus_found", |b| b.iter(|| orbit_equivalence_search(black_box(&t), &u)));
}

fn numerics(c: &mut Criterion) {
    let field = BlockField::new(Sign::Plus, 10.0).unwrap();
    let entry = BlockPoint::new(0.4, -HALF_PI, 0.0).unwrap();
    let cfg = IntegrationConfig::default();
    c.bench_function("block_transit_dt1e-3", |b| b.iter(|| block_transit(&field, black_box(entry), &cfg).unwrap()));
}

criterion_group!(benches, fatgraph, assembly, numerics);
criterion_main!(benches);
