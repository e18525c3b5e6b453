//! Performance prediction: tiling and roofline per kernel, routed transfer
//! times per edge, and event-driven scheduling of the iteration.

pub mod comm;
pub mod dataflow;
pub mod predict;
pub mod roofline;
pub mod schedule;
pub mod tiling;

pub use comm::{collective_edge_time, edge_time};
pub use dataflow::{reg_accesses, reuse_factor, Tile};
pub use predict::{
    memory_footprint, predict, predict_on, EdgeTiming, KernelTiming, MappingSummary, PredictOptions,
    Prediction, TimingReport, DEFAULT_TILING_SAMPLES,
};
pub use roofline::{kernel_time, roofline, LevelTraffic, RooflineProfile, COMPUTE_BOUND, MAIN_LEVEL};
pub use schedule::{Schedule, Task, TaskGraph, TraceEntry};
pub use tiling::{access_counts, compulsory_elems, level_traffic, search_tilings, TilingResult};
