use thiserror::Error;

/// Top-level error. Each variant names the module that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("arch_gen: {0}")]
    Sizing(#[from] SizingError),
    #[error("model_graph: {0}")]
    Graph(#[from] GraphError),
    #[error("device_map: {0}")]
    Mapping(#[from] MappingError),
    #[error("perf_engine: {0}")]
    Perf(#[from] PerfError),
    #[error("search_engine: {0}")]
    Search(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("unknown key `{0}` (use --lenient to ignore)")]
    UnknownKey(String),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("strategy `{input}`: {reason} at position {position}")]
    Strategy {
        input: String,
        position: usize,
        reason: String,
    },
    #[error("section `{0}` given more than once")]
    DuplicateSection(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{component}: {reason}")]
pub struct SizingError {
    pub component: String,
    pub reason: String,
}

impl SizingError {
    pub fn new(component: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            component: component.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid dimension: {0}")]
    InvalidDim(String),
    #[error("infeasible sharding: {0}")]
    Infeasible(String),
    #[error("graph has a cycle")]
    Cycle,
    #[error("arithmetic overflow in {0}")]
    Overflow(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("strategy needs {needed} devices but the system has {available} nodes")]
    InsufficientNodes { needed: u64, available: u64 },
    #[error("routing: {0}")]
    Routing(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerfError {
    #[error("capacity: {0}")]
    Capacity(String),
    #[error("simulation: dependency cycle among tasks")]
    Cycle,
    #[error("{0}")]
    Invalid(String),
}
