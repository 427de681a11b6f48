//! FNOSeg3D network, its ablation variants, and the reference CNN.

pub mod checkpoint;
pub mod config;
pub mod network;
pub mod plan;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{Architecture, ModelConfig, Variant};
pub use network::{ForwardOutput, Heads, Model, MIN_INPUT};
pub use plan::{param_count_for, param_report, reference_count, CountRow, ParamBreakdown};
