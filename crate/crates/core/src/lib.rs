//! Analytical performance modeling and design-space search for distributed
//! deep-learning training systems.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`config`] parses technology, template, budget, system and model documents.
//! 2. [`arch::generate`] turns technology and budgets into concrete hardware.
//! 3. [`graph`] builds the compute graph and expands it under a parallelism strategy.
//! 4. [`mapping::map_devices`] places shards on nodes and routes their traffic.
//! 5. [`perf::predict`] times kernels with a hierarchical roofline and schedules the iteration.
//!
//! [`search`] wraps the pipeline in projected gradient descent over budget
//! fractions and in exhaustive strategy enumeration.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```text
//! cargo run -p crossflow --example predict_gemm
//! cargo run -p crossflow --example lm_case_study --release
//! cargo run -p crossflow --example hardware_search --release
//! ```

pub mod arch;
pub mod cli;
pub mod config;
pub mod error;
pub mod graph;
pub mod mapping;
pub mod perf;
pub mod presets;
pub mod report;
pub mod search;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
