//! Serialized form of a fatgraph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DartId, FatGraph, FatGraphError, Role, VertexId, VertexMarking, VertexRecord};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FatGraphJson {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<[DartId; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub markings: BTreeMap<VertexId, VertexMarking>,
    /// Face index to role; when present it must cover every face.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<BTreeMap<usize, Role>>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

impl From<&FatGraph> for FatGraphJson {
    fn from(g: &FatGraph) -> Self {
        FatGraphJson {
            schema_version: SCHEMA_VERSION,
            vertices: g.vertices().to_vec(),
            edges: g.edges().to_vec(),
            markings: g.marking_map(),
            roles: g.face_roles().map(|r| r.iter().copied().enumerate().collect()),
        }
    }
}

impl TryFrom<FatGraphJson> for FatGraph {
    type Error = FatGraphError;

    fn try_from(j: FatGraphJson) -> Result<Self, Self::Error> {
        if j.schema_version != SCHEMA_VERSION {
            return Err(FatGraphError::MalformedGraph(format!("unsupported schema version {}", j.schema_version)));
        }
        let roles = match j.roles {
            None => None,
            Some(m) => {
                let n = m.len();
                if m.keys().copied().ne(0..n) {
                    return Err(FatGraphError::InvalidRoles("role keys must be the face indices 0..n".to_string()));
                }
                Some(m.into_values().collect())
            }
        };
        FatGraph::new(j.vertices, j.edges, j.markings, roles)
    }
}

impl FatGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FatGraphJson::from(self)).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<FatGraph, FatGraphError> {
        let j: FatGraphJson = serde_json::from_str(s).map_err(|e| FatGraphError::MalformedGraph(e.to_string()))?;
        FatGraph::try_from(j)
    }
}
