//! Contrastive regression with dynamic localized repulsion.
//!
//! The crate provides kernel-weighted contrastive losses for continuous
//! labels (the localized repulsion loss plus four global baselines) with
//! analytic gradients, the epoch-dependent neighbor schedule that drives the
//! localized loss, a small rectifier encoder trained with Adam, and a
//! frozen-encoder ridge evaluation harness.

pub mod encoder;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod kernel;
pub mod losses;
pub mod optim;
pub mod schedule;
pub mod train;

pub use encoder::{Dense, Encoder, EncoderConfig, EncoderGrads};
pub use error::{Error, Result};
pub use eval::{
    generate_synthetic, load_csv, ridge_fit, run_ablation, run_benchmark, split, write_csv, AblationReport,
    BenchmarkConfig, BenchmarkReport, Dataset, MixtureComponent, Report, RidgeConfig, SyntheticSpec,
};
pub use geometry::{
    distance_matrix, l2_normalize, select_neighbors, similarity_matrix, DistanceNorm, EmbeddingBatch, NeighborSets,
    NeighborSpace, SimilarityMatrix,
};
pub use kernel::{kernel_value, positiveness_matrix, KernelKind, KernelSpec, PositivenessMatrix};
pub use losses::{
    baseline_forward, dynlocrep_forward, loss_with_gradient, pair_weights, LossConfig, LossOutput, LossVariant,
    Reduction,
};
pub use optim::{Adam, OptimConfig};
pub use schedule::{neighbors_at_epoch, ScheduleConfig};
pub use train::{train, EmbeddingSnapshot, EpochRecord, TrainConfig, TrainOutcome, Trainer};
