use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kernel::KernelShape;
use super::SimError;

const CATALOG_JSON: &str = include_str!("../../data/kernels.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Prefill,
    Decode,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Prefill => "prefill",
            Stage::Decode => "decode",
        })
    }
}

impl FromStr for Stage {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prefill" => Ok(Stage::Prefill),
            "decode" => Ok(Stage::Decode),
            _ => Err(SimError::InvalidConfig(format!("unknown stage '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub name: String,
    pub hidden: u64,
    pub intermediate: u64,
    pub layers: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct StageTokens {
    prefill: u64,
    decode: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(default)]
    pub note: String,
    stages: StageTokens,
    pub models: Vec<ModelDims>,
}

/// A kernel and how many times it runs per transformer block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogKernel {
    pub shape: KernelShape,
    pub multiplicity: u64,
}

impl Default for Catalog {
    fn default() -> Self {
        serde_json::from_str(CATALOG_JSON).expect("bundled kernel catalog parses")
    }
}

impl Catalog {
    pub fn tokens(&self, stage: Stage) -> u64 {
        match stage {
            Stage::Prefill => self.stages.prefill,
            Stage::Decode => self.stages.decode,
        }
    }

    pub fn model(&self, name: &str) -> Result<&ModelDims, SimError> {
        self.models
            .iter()
            .find(|m| m.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| SimError::UnknownModel(name.to_string()))
    }

    /// BitLinear layers of one block: four attention projections, the gate and up
    /// projections, and the down projection.
    pub fn kernels(&self, model: &str, stage: Stage) -> Result<Vec<CatalogKernel>, SimError> {
        let m = self.model(model)?;
        let n = self.tokens(stage);
        Ok(vec![
            CatalogKernel {
                shape: KernelShape::new("attn_proj", m.hidden, m.hidden, n),
                multiplicity: 4,
            },
            CatalogKernel {
                shape: KernelShape::new("ffn_gate_up", m.intermediate, m.hidden, n),
                multiplicity: 2,
            },
            CatalogKernel {
                shape: KernelShape::new("ffn_down", m.hidden, m.intermediate, n),
                multiplicity: 1,
            },
        ])
    }

    /// Kernels of every catalogued model for `stage`.
    pub fn all_kernels(&self, stage: Stage) -> Vec<CatalogKernel> {
        self.models
            .iter()
            .flat_map(|m| self.kernels(&m.name, stage).expect("model is in the catalog"))
            .collect()
    }
}
