//! `flow.json`: pieces, gluings and an optional construction seed.

use serde::{Deserialize, Serialize};

use super::{build_flow, AssemblyError, GluedFlow, Gluing, GluingSpec, Matrix, TorusRef};
use crate::fatgraph::{FatGraph, FatGraphJson};
use crate::model_block::Sign;
use crate::seifert_piece::build_piece;
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceEntryJson {
    pub fatgraph: FatGraphJson,
    pub block_sign: Sign,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GluingJson {
    pub from: [usize; 2],
    pub to: [usize; 2],
    pub matrix: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowJson {
    #[serde(default = "schema")]
    pub schema_version: u32,
    pub pieces: Vec<PieceEntryJson>,
    pub gluings: Vec<GluingJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn schema() -> u32 {
    SCHEMA_VERSION
}

impl From<&GluedFlow> for FlowJson {
    fn from(f: &GluedFlow) -> Self {
        FlowJson {
            schema_version: SCHEMA_VERSION,
            pieces: f
                .pieces()
                .iter()
                .map(|p| PieceEntryJson {
                    fatgraph: FatGraphJson::from(p.graph()),
                    block_sign: p.block_sign(),
                    lambda: p.lambda(),
                })
                .collect(),
            gluings: f
                .gluing()
                .gluings()
                .iter()
                .map(|g| GluingJson {
                    from: [g.from.piece, g.from.torus],
                    to: [g.to.piece, g.to.torus],
                    matrix: g.matrix,
                })
                .collect(),
            seed: f.seed(),
        }
    }
}

impl TryFrom<FlowJson> for GluedFlow {
    type Error = AssemblyError;

    fn try_from(j: FlowJson) -> Result<Self, AssemblyError> {
        if j.schema_version != SCHEMA_VERSION {
            return Err(AssemblyError::Malformed(format!("unsupported schema version {}", j.schema_version)));
        }
        let pieces = j
            .pieces
            .into_iter()
            .map(|p| {
                let g = FatGraph::try_from(p.fatgraph)?;
                Ok(build_piece(&g, p.block_sign, p.lambda)?)
            })
            .collect::<Result<Vec<_>, AssemblyError>>()?;
        let gluings = j
            .gluings
            .into_iter()
            .map(|g| Gluing {
                from: TorusRef { piece: g.from[0], torus: g.from[1] },
                to: TorusRef { piece: g.to[0], torus: g.to[1] },
                matrix: g.matrix,
            })
            .collect();
        Ok(build_flow(pieces, GluingSpec::new(gluings))?.with_seed(j.seed))
    }
}

impl GluedFlow {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FlowJson::from(self)).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<GluedFlow, AssemblyError> {
        let j: FlowJson = serde_json::from_str(s).map_err(|e| AssemblyError::Malformed(e.to_string()))?;
        GluedFlow::try_from(j)
    }
}
