//! Combinatorial and numerical tools for Anosov flows assembled from
//! hyperbolic blocks glued along fatgraph boundaries.

pub mod fatgraph;
pub mod flow_numerics;
pub mod manifold_assembly;
pub mod model_block;
pub mod orbit_combinatorics;
pub mod random;
pub mod seifert_piece;

/// Version stamped into every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

pub use fatgraph::{FatGraph, FatGraphError, Role, VertexMarking};
pub use model_block::{BlockField, BlockPoint, Sign};
