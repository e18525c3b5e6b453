//! Workload descriptions.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::units::de_dim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gemm,
    Lm,
    /// Plain feed-forward stack of GEMM layers.
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GemmSpec {
    #[serde(deserialize_with = "de_dim")]
    pub m: u64,
    #[serde(deserialize_with = "de_dim")]
    pub n: u64,
    #[serde(deserialize_with = "de_dim")]
    pub k: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmSpec {
    #[serde(deserialize_with = "de_dim")]
    pub hidden_dim: u64,
    #[serde(deserialize_with = "de_dim")]
    pub batch_size: u64,
    #[serde(deserialize_with = "de_dim")]
    pub vocab_size: u64,
    #[serde(deserialize_with = "de_dim")]
    pub num_layers: u64,
    #[serde(deserialize_with = "de_dim")]
    pub seq_len: u64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    #[serde(deserialize_with = "de_dim")]
    pub batch_size: u64,
    /// Layer widths; `widths.len() - 1` GEMM layers.
    pub widths: Vec<u64>,
    #[serde(default = "yes")]
    pub backward: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gemm: Option<GemmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lm: Option<LmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlp: Option<MlpSpec>,
    pub precision_bytes: u64,
    /// Pipeline micro-batches per iteration; defaults to the pipeline depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub microbatches: Option<u64>,
}

impl ModelSpec {
    pub fn gemm(m: u64, n: u64, k: u64, precision_bytes: u64) -> Self {
        Self {
            kind: ModelKind::Gemm,
            gemm: Some(GemmSpec { m, n, k }),
            lm: None,
            mlp: None,
            precision_bytes,
            microbatches: None,
        }
    }

    pub fn lm(spec: LmSpec, precision_bytes: u64) -> Self {
        Self {
            kind: ModelKind::Lm,
            gemm: None,
            lm: Some(spec),
            mlp: None,
            precision_bytes,
            microbatches: None,
        }
    }

    pub fn mlp(spec: MlpSpec, precision_bytes: u64) -> Self {
        Self {
            kind: ModelKind::Mlp,
            gemm: None,
            lm: None,
            mlp: Some(spec),
            precision_bytes,
            microbatches: None,
        }
    }

    /// Units a pipeline may be split across.
    pub fn num_layers(&self) -> u64 {
        match self.kind {
            ModelKind::Gemm => 1,
            ModelKind::Lm => self.lm.as_ref().map_or(0, |l| l.num_layers),
            ModelKind::Mlp => self
                .mlp
                .as_ref()
                .map_or(0, |m| m.widths.len().saturating_sub(1) as u64),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if ![1, 2, 4, 8].contains(&self.precision_bytes) {
            return Err(ConfigError::Invalid {
                field: "model.precision_bytes".into(),
                reason: format!("must be 1, 2, 4 or 8, got {}", self.precision_bytes),
            });
        }
        let dims: Vec<(&str, u64)> = match self.kind {
            ModelKind::Gemm => {
                let g = self
                    .gemm
                    .as_ref()
                    .ok_or_else(|| ConfigError::MissingField("model.gemm".into()))?;
                vec![("m", g.m), ("n", g.n), ("k", g.k)]
            }
            ModelKind::Lm => {
                let l = self
                    .lm
                    .as_ref()
                    .ok_or_else(|| ConfigError::MissingField("model.lm".into()))?;
                vec![
                    ("hidden_dim", l.hidden_dim),
                    ("batch_size", l.batch_size),
                    ("vocab_size", l.vocab_size),
                    ("num_layers", l.num_layers),
                    ("seq_len", l.seq_len),
                ]
            }
            ModelKind::Mlp => {
                let m = self
                    .mlp
                    .as_ref()
                    .ok_or_else(|| ConfigError::MissingField("model.mlp".into()))?;
                if m.widths.len() < 2 {
                    return Err(ConfigError::Invalid {
                        field: "model.mlp.widths".into(),
                        reason: "need at least two widths".into(),
                    });
                }
                let mut v = vec![("batch_size", m.batch_size)];
                v.extend(m.widths.iter().map(|&w| ("widths", w)));
                v
            }
        };
        for (f, v) in dims {
            if v == 0 {
                return Err(ConfigError::Invalid {
                    field: format!("model.{f}"),
                    reason: "must be >= 1".into(),
                });
            }
        }
        if self.microbatches == Some(0) {
            return Err(ConfigError::Invalid {
                field: "model.microbatches".into(),
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}
