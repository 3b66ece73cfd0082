//! Discrete-event simulation of single-server scheduling when job sizes are
//! only known through noisy estimates.
//!
//! The crate provides synthetic and trace-driven workloads
//! ([`workload`]), an event-driven engine ([`engine`]), seven scheduling
//! policies including FSPE+PS ([`policy`]), evaluation metrics
//! ([`metrics`]), a fixed-step reference simulator for cross-checking
//! ([`oracle`]) and a repetition/sweep driver ([`experiment`]).
//!
//! The engine, policies and metrics are generic over [`Scalar`]; the
//! aliases below fix it to `f64`, which is what the experiments use.

pub mod engine;
pub mod experiment;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod scalar;
pub mod workload;

pub use engine::{run_observed, run_simulation, EngineError, Policy};
pub use policy::{PolicyError, PolicyKind};
pub use scalar::Scalar;
pub use workload::{JobId, SizeDist, WorkloadSpec};

pub type Time = f64;
pub type JobSpec = workload::JobSpec<f64>;
pub type Workload = workload::Workload<f64>;
pub type Allocation = engine::Allocation<f64>;
pub type CompletionRecord = engine::CompletionRecord<f64>;
pub type EngineEvent = engine::EngineEvent<f64>;
pub type FspeState = policy::FspeState<f64>;
pub type BinnedSlowdown = metrics::BinnedSlowdown<f64>;
pub type EmpiricalCdf = metrics::EmpiricalCdf<f64>;
