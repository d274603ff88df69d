//! Parallel physics-informed networks with bidirectional balance for transient
//! heat conduction through three-layer protective fabric.
//!
//! The numerical core is generic over the scalar type ([`Scalar`]); the aliases
//! below fix it to `f64`, which is what the solver uses throughout.

pub mod autodiff;
pub mod balance;
pub mod collocation;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fdm;
pub mod network;
pub mod physics;
pub mod scalar;
pub mod trainer;

pub use autodiff::{backward_params, forward_augmented, AffineResidual, BlockTape, DualState};
pub use balance::{calibrate, collect_initial_stats, BalanceCoefficients, ClassStats};
pub use collocation::{build_grid, CollocationSet, Segments};
pub use config::ProblemConfig;
pub use fdm::{solve_fdm, steady_state_profile, FdmGrid, MseReport, TemperatureField};
pub use experiment::{predict_field, Preset};
pub use error::{Error, Result};
pub use network::{init_kaiming, Architecture, NetworkParams, PinnModel};
pub use physics::{
    BalanceClass, EnvironmentConfig, FabricLayer, Interface, LayerId, Partition, ResidualTerm, ScaleConfig,
};
pub use scalar::Scalar;
pub use trainer::{composite_loss, train, LossBreakdown, LossEvaluator, TrainObserver, TrainOptions, TrainOutcome, TrainRecord};

pub type Dual = DualState<f64>;
pub type Network = NetworkParams<f64>;
pub type Model = PinnModel<f64>;
