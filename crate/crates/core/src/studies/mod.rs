//! Parameter sweeps with checkpointed per-point records, scaling fits and verdicts.

mod config;
mod fit;
mod poincare;
mod run;

pub use config::{GraphSpec, PartitionSpec, RankOneSpec, StudyConfig, StudyKind, Thresholds};
pub use fit::{fit_scaling, ScalingFit, ScalingModel};
pub use poincare::{poincare_point, poincare_probe, poincare_ratio, MacroBump, PoincareParams, PoincarePoint, PoincareReport};
pub use run::{config_hash, run_study, thread_pool, PointRecord, PointStatus, StudyResult};
