//! Seeded experiment pipelines. Each returns an [`ExperimentReport`] whose
//! `config` echo is enough to rerun it.

pub mod angles;
pub mod codim;
pub mod fields;
pub mod mnist;
pub mod report;
pub mod tradeoff;

pub use angles::{run_angle_histogram, AngleConfig};
pub use codim::{run_codim_sweep, CodimSweepConfig, SweepDataset};
pub use fields::{run_boundary_slices, run_gradfield, BoundarySlice, GradFieldPoint};
pub use mnist::{run_mnist_nn, MnistNnConfig, MnistRun};
pub use report::{AggregateRow, ExperimentReport, FailedJob, ResultRow};
pub use tradeoff::{run_tradeoff, TradeoffConfig};
