use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dynloc::{DistanceNorm, LossVariant, NeighborSpace, Reduction};

#[derive(Debug, Parser)]
#[command(
    name = "dynloc",
    version,
    about = "Contrastive regression with dynamic localized repulsion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic bimodal regression dataset as CSV
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Train an encoder on a CSV dataset
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Compare loss variants over several seeds with a ridge readout
    #[command(args_override_self = true)]
    Benchmark(BenchmarkArgs),
    /// Sweep the neighbor distance norm for dynlocrep
    #[command(args_override_self = true)]
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Flat `key = value` file; flags on the command line win
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Number of samples
    #[arg(long, default_value_t = 500)]
    pub n: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output CSV path
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Overwrite an existing output file
    #[arg(long)]
    pub force: bool,

    /// Number of feature columns
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,

    /// Feature columns that carry label signal
    #[arg(long, default_value_t = 8)]
    pub informative_dims: usize,

    /// Noise added to informative columns
    #[arg(long, default_value_t = 0.1)]
    pub noise_std: f64,
}

/// Encoder, optimizer and loss settings shared by every training command.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,

    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,

    /// Gaussian kernel bandwidth on label differences
    #[arg(long, default_value_t = 2.0)]
    pub kernel_sigma: f64,

    /// Similarity temperature
    #[arg(long, default_value_t = 0.1)]
    pub temperature: f64,

    /// Per-batch loss reduction: sum or mean
    #[arg(long, default_value_t = Reduction::Sum)]
    pub reduction: Reduction,

    /// Space in which nearest neighbors are searched: embedding or input
    #[arg(long, default_value_t = NeighborSpace::Embedding)]
    pub nn_space: NeighborSpace,

    /// Neighbor count reached at the last epoch
    #[arg(long, default_value_t = 14, value_parser = clap::value_parser!(u32).range(1..))]
    pub nn_final: u32,

    /// Epochs between neighbor count decrements
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub nn_step_size: u32,

    /// Initial learning rate
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,

    /// Factor applied to the learning rate every `lr-decay-every` epochs
    #[arg(long, default_value_t = 0.9)]
    pub lr_decay: f64,

    #[arg(long, default_value_t = 10)]
    pub lr_decay_every: usize,

    #[arg(long, default_value_t = 5e-5)]
    pub weight_decay: f64,

    /// Hidden layer widths
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    pub hidden: Vec<usize>,

    #[arg(long, default_value_t = 32)]
    pub embedding_dim: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Flat `key = value` file; flags on the command line win
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Input CSV (`id,y,f0,...`)
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// Directory for trace, checkpoint and embedding exports
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,

    /// Overwrite existing artifacts
    #[arg(long)]
    pub force: bool,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Loss: dynlocrep, yaware, threshold, exponential or rnc
    #[arg(long, default_value_t = LossVariant::DynLocRep)]
    pub loss: LossVariant,

    /// Norm used to rank neighbors: manhattan, euclidean, chebyshev or cosine
    #[arg(long, default_value_t = DistanceNorm::Manhattan)]
    pub distance_norm: DistanceNorm,

    /// Epochs after which embeddings are exported (0 is the initial encoder)
    #[arg(long, value_delimiter = ',')]
    pub export_epochs: Vec<usize>,

    #[command(flatten)]
    pub model: ModelArgs,
}

/// Dataset and readout settings shared by `benchmark` and `ablate`.
#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Input CSV; a synthetic dataset is generated when absent
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,

    /// Size of the synthetic dataset used without `--data`
    #[arg(long, default_value_t = 500)]
    pub synthetic_n: usize,

    /// Seed of the synthetic dataset used without `--data`
    #[arg(long, default_value_t = 0)]
    pub synthetic_seed: u64,

    /// Report path; printed to stdout when absent
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Overwrite an existing report
    #[arg(long)]
    pub force: bool,

    /// Seeds; each one resplits the data and reinitializes the encoder
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,

    /// Fraction of samples held out for the test MAE
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,

    /// Ridge readout penalty
    #[arg(long, default_value_t = 1.0)]
    pub ridge_lambda: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Flat `key = value` file; flags on the command line win
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Loss variants to compare
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "dynlocrep,yaware,threshold,exponential,rnc"
    )]
    pub variants: Vec<LossVariant>,

    /// Norm used to rank neighbors: manhattan, euclidean, chebyshev or cosine
    #[arg(long, default_value_t = DistanceNorm::Manhattan)]
    pub distance_norm: DistanceNorm,

    #[command(flatten)]
    pub eval: EvalArgs,

    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Flat `key = value` file; flags on the command line win
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Neighbor distance norms to sweep
    #[arg(long, value_delimiter = ',', default_value = "manhattan,euclidean,chebyshev,cosine")]
    pub norms: Vec<DistanceNorm>,

    #[command(flatten)]
    pub eval: EvalArgs,

    #[command(flatten)]
    pub model: ModelArgs,
}
