//! Data handling and the frozen-encoder evaluation protocol.

mod benchmark;
mod dataset;
mod metrics;
mod ridge;
mod synthetic;

pub use benchmark::{
    reference_mae, run_ablation, run_benchmark, AblationReport, BenchmarkConfig, BenchmarkReport, LabelSummary,
    MaeSummary, NormSummary, ReferenceMae, Report, RunTiming, RAW_FEATURE_BASELINE, REPORT_SCHEMA_VERSION,
    UNTRAINED_BASELINE,
};
pub use dataset::{load_csv, split, write_csv, write_embedding_header, write_embedding_rows, Dataset};
pub use metrics::{mae, mean_std};
pub use ridge::{ridge_fit, RidgeConfig, RidgeModel};
pub use synthetic::{generate_synthetic, MixtureComponent, SyntheticSpec};
