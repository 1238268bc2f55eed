//! End-to-end drivers: the cluster-state table, white noise, loss grids and
//! the dephased GHZ curve.

mod cluster;
pub mod config;
pub mod ghz;
pub mod loss;
pub mod noise;
pub mod table;

pub use cluster::{cluster_state, ghz_state};
pub use config::{GhzConfig, LambdaSpec, LossConfig, NoiseConfig, ScenarioConfig, TableConfig};
pub use ghz::{run_ghz_curve, GhzCurve};
pub use loss::{run_loss_grid, LossGrid};
pub use noise::{run_white_noise, show_bracket, NoiseResult};
pub use table::{run_cluster_table, ClusterTable};
