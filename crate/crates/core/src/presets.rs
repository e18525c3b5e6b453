//! Shipped reference configurations and case-study technology presets.

use crate::config::{parse_document, ConfigDocument, ResolvedConfig, TechLibrary};

pub const TECH_N12_YAML: &str = include_str!("../configs/tech_n12.yaml");
pub const TEMPLATE_YAML: &str = include_str!("../configs/template.yaml");
pub const BUDGET_REFERENCE_YAML: &str = include_str!("../configs/budget_reference.yaml");
pub const BUDGET_CASE_STUDY_YAML: &str = include_str!("../configs/budget_case_study.yaml");
pub const SYSTEM_8NODE_YAML: &str = include_str!("../configs/system_8node.yaml");
pub const SYSTEM_512NODE_YAML: &str = include_str!("../configs/system_512node.yaml");
pub const MODEL_GEMM_YAML: &str = include_str!("../configs/model_gemm.yaml");
pub const MODEL_LM_YAML: &str = include_str!("../configs/model_lm.yaml");

/// Reference hardware, one 8-node package, an 8192-cubed GEMM.
pub const REFERENCE_YAML: &str = concat!(
    include_str!("../configs/tech_n12.yaml"),
    include_str!("../configs/template.yaml"),
    include_str!("../configs/budget_reference.yaml"),
    include_str!("../configs/system_8node.yaml"),
    include_str!("../configs/model_gemm.yaml"),
);

/// Case-study hardware, 512 nodes, the two-layer LSTM language model.
pub const CASE_STUDY_YAML: &str = concat!(
    include_str!("../configs/tech_n12.yaml"),
    include_str!("../configs/template.yaml"),
    include_str!("../configs/budget_case_study.yaml"),
    include_str!("../configs/system_512node.yaml"),
    include_str!("../configs/model_lm.yaml"),
);

/// Logic nodes in sweep order, starting at the reference library.
pub const LOGIC_NODES: [&str; 7] = ["N12", "N7", "N5", "N3", "N2", "N1.4", "N1"];

/// Stacked-memory generations and their per-node bandwidth in TB/s.
pub const HBM_PRESETS: [(&str, f64); 4] = [
    ("HBM2", 1.0),
    ("HBM2e", 2.0),
    ("HBM3", 2.6),
    ("HBM4", 3.3),
];

/// Inter-package network tiers and their per-link bandwidth in GB/s.
pub const NETWORK_PRESETS: [(&str, f64); 3] = [
    ("NDR-x8", 100.0),
    ("XDR-x8", 200.0),
    ("GDR-x8", 3300.0),
];

/// Intra-package link bandwidth for multi-node packages, bits/s (2 TB/s).
pub const MULTI_NODE_INTRA_LINK_BW: f64 = 16e12;

fn resolved(text: &str) -> ResolvedConfig {
    parse_document(text, true)
        .and_then(ConfigDocument::resolve)
        .expect("shipped preset is valid")
}

pub fn tech_n12() -> TechLibrary {
    parse_document(TECH_N12_YAML, true)
        .ok()
        .and_then(|d| d.tech)
        .expect("shipped preset is valid")
}

pub fn reference_config() -> ResolvedConfig {
    resolved(REFERENCE_YAML)
}

pub fn case_study_config() -> ResolvedConfig {
    resolved(CASE_STUDY_YAML)
}

/// Built-in sections that fill whatever the user's documents leave out.
pub fn reference_document() -> ConfigDocument {
    parse_document(REFERENCE_YAML, true).expect("shipped preset is valid")
}

/// Position of a logic-node label in [`LOGIC_NODES`].
pub fn logic_node_index(label: &str) -> Option<usize> {
    LOGIC_NODES.iter().position(|n| *n == label)
}

/// Scale `base` from its own node label to `label`.
pub fn logic_node(base: &TechLibrary, label: &str) -> Option<TechLibrary> {
    let from = logic_node_index(&base.compute.tech_node)?;
    let to = logic_node_index(label)?;
    Some(base.scale_logic(to as i32 - from as i32, label))
}

/// Bandwidth in TB/s for a named stacked-memory preset, or a bare number.
pub fn hbm_bandwidth_tbps(value: &str) -> Option<f64> {
    HBM_PRESETS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(value))
        .map(|(_, b)| *b)
        .or_else(|| value.parse().ok())
}

/// Bandwidth in GB/s for a named network preset, or a bare number.
pub fn network_bandwidth_gbps(value: &str) -> Option<f64> {
    NETWORK_PRESETS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(value))
        .map(|(_, b)| *b)
        .or_else(|| value.parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        let r = reference_config();
        assert_eq!(r.system.total_nodes(), 8);
        let c = case_study_config();
        assert_eq!(c.system.total_nodes(), 512);
        assert_eq!(c.budgets.power_budget, 300.0);
        assert_eq!(c.budgets.proc_chip_area_budget, 850.0);
    }

    #[test]
    fn logic_chain() {
        let base = tech_n12();
        let n1 = logic_node(&base, "N1").unwrap();
        let ratio = base.compute.nominal_area / n1.compute.nominal_area;
        assert!((ratio - 1.8f64.powi(6)).abs() / ratio < 1e-12);
        assert!(logic_node(&base, "N0").is_none());
    }

    #[test]
    fn named_bandwidths() {
        assert_eq!(hbm_bandwidth_tbps("HBM3"), Some(2.6));
        assert_eq!(hbm_bandwidth_tbps("1.5"), Some(1.5));
        assert_eq!(network_bandwidth_gbps("XDR-x8"), Some(200.0));
    }
}
