//! Multi-seed comparison of losses (and of neighbor distance norms) through
//! a frozen-encoder ridge readout.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::dataset::{split, Dataset};
use super::metrics::{mae, mean_std};
use super::ridge::{ridge_fit, RidgeConfig};
use crate::encoder::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::geometry::DistanceNorm;
use crate::losses::LossVariant;
use crate::optim::OptimConfig;
use crate::train::{train, TrainConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const RAW_FEATURE_BASELINE: &str = "raw_feature_ridge";
pub const UNTRAINED_BASELINE: &str = "untrained_encoder_ridge";

const STD_CONVENTION: &str = "population";
const SPLIT_POLICY: &str = "fresh seeded split per seed, unstratified";
const LABEL_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub variants: Vec<LossVariant>,
    pub seeds: Vec<u64>,
    pub test_fraction: f64,
    /// Template for every run; `seed` and `loss` are set per run and
    /// `export_epochs` is ignored.
    pub train: TrainConfig,
    pub optim: OptimConfig,
    pub encoder: EncoderConfig,
    pub ridge: RidgeConfig,
    /// Worker threads for independent runs. Results do not depend on it.
    #[serde(skip)]
    pub threads: usize,
}

impl BenchmarkConfig {
    pub fn new(input_dim: usize) -> Self {
        BenchmarkConfig {
            variants: LossVariant::ALL.to_vec(),
            seeds: (0..5).collect(),
            test_fraction: 0.2,
            train: TrainConfig::default(),
            optim: OptimConfig::default(),
            encoder: EncoderConfig::new(input_dim),
            ridge: RidgeConfig::default(),
            threads: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Config("at least one loss variant is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.encoder.validate()?;
        self.optim.validate()
    }
}

/// Per-seed test MAEs of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeSummary {
    pub name: String,
    pub maes: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
}

impl MaeSummary {
    fn new(name: impl Into<String>, maes: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&maes);
        MaeSummary {
            name: name.into(),
            maes,
            mean,
            std,
        }
    }
}

/// Test-side label distribution of one seed's split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub seed: u64,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Counts over equal-width bins spanning the full dataset's label range.
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub name: String,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub kind: String,
    pub dataset: String,
    pub std_convention: String,
    pub split_policy: String,
    pub config: BenchmarkConfig,
    pub variants: Vec<MaeSummary>,
    pub baselines: Vec<MaeSummary>,
    pub test_labels: Vec<LabelSummary>,
    /// Wall-clock only; excluded from reproducibility comparisons.
    pub timing: Vec<RunTiming>,
}

/// Published reference value, carried for context only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMae {
    pub mean: f64,
    pub std: f64,
    pub paper_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSummary {
    pub maes: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub reference: ReferenceMae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub schema_version: u32,
    pub kind: String,
    pub dataset: String,
    pub std_convention: String,
    pub split_policy: String,
    pub config: BenchmarkConfig,
    pub norms: BTreeMap<String, NormSummary>,
    pub test_labels: Vec<LabelSummary>,
    pub timing: Vec<RunTiming>,
}

/// Published brain-age MAEs (years) of the localized loss per neighbor norm.
pub fn reference_mae(norm: DistanceNorm) -> ReferenceMae {
    let (mean, std) = match norm {
        DistanceNorm::Manhattan => (3.724, 0.220),
        DistanceNorm::Cosine => (3.748, 0.142),
        DistanceNorm::Euclidean => (3.806, 0.154),
        DistanceNorm::Chebyshev => (3.842, 0.196),
    };
    ReferenceMae {
        mean,
        std,
        paper_reference: true,
    }
}

/// Reports serialize as pretty JSON; the numeric section leaves out timing.
pub trait Report: Serialize {
    fn to_json_pretty(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Input(e.to_string()))
    }

    fn numeric_section(&self) -> Result<serde_json::Value> {
        let mut value = serde_json::to_value(self).map_err(|e| Error::Input(e.to_string()))?;
        if let Some(map) = value.as_object_mut() {
            map.remove("timing");
        }
        Ok(value)
    }
}

impl Report for BenchmarkReport {}
impl Report for AblationReport {}

struct Job {
    name: String,
    seed_index: usize,
    method: Method,
}

enum Method {
    Trained(TrainConfig),
    RawFeatures,
    Untrained,
}

struct JobResult {
    name: String,
    seed_index: usize,
    mae: f64,
    seconds: f64,
}

fn readout_mae(
    train_x: ArrayView2<'_, f64>,
    train_y: &[f64],
    test_x: ArrayView2<'_, f64>,
    test_y: &[f64],
    ridge: &RidgeConfig,
) -> Result<f64> {
    let model = ridge_fit(train_x, train_y, ridge)?;
    mae(&model.predict(test_x)?, test_y)
}

fn run_job(job: &Job, splits: &[(Dataset, Dataset)], config: &BenchmarkConfig) -> Result<JobResult> {
    let seed = config.seeds[job.seed_index];
    let (train_set, test_set) = &splits[job.seed_index];
    let start = Instant::now();
    let value = match &job.method {
        Method::RawFeatures => readout_mae(
            train_set.features.view(),
            &train_set.labels,
            test_set.features.view(),
            &test_set.labels,
            &config.ridge,
        ),
        Method::Untrained => Encoder::init(&config.encoder, seed).and_then(|enc| {
            readout_mae(
                enc.embed_unit(train_set.features.view())?.view(),
                &train_set.labels,
                enc.embed_unit(test_set.features.view())?.view(),
                &test_set.labels,
                &config.ridge,
            )
        }),
        Method::Trained(train_config) => {
            train(train_set, train_config, &config.optim, &config.encoder).and_then(|out| {
                readout_mae(
                    out.encoder.embed_unit(train_set.features.view())?.view(),
                    &train_set.labels,
                    out.encoder.embed_unit(test_set.features.view())?.view(),
                    &test_set.labels,
                    &config.ridge,
                )
            })
        }
    };
    let mae = value.map_err(|e| Error::Run {
        variant: job.name.clone(),
        seed,
        source: Box::new(e),
    })?;
    Ok(JobResult {
        name: job.name.clone(),
        seed_index: job.seed_index,
        mae,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn label_summaries(dataset: &Dataset, seeds: &[u64], splits: &[(Dataset, Dataset)]) -> Vec<LabelSummary> {
    let lo = dataset.labels.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = dataset.labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / LABEL_BINS as f64;
    seeds
        .iter()
        .zip(splits)
        .map(|(&seed, (_, test))| {
            let (mean, std) = mean_std(&test.labels);
            let mut histogram = vec![0; LABEL_BINS];
            for &y in &test.labels {
                let bin = if width > 0.0 { ((y - lo) / width) as usize } else { 0 };
                histogram[bin.min(LABEL_BINS - 1)] += 1;
            }
            LabelSummary {
                seed,
                n: test.len(),
                mean,
                std,
                min: test.labels.iter().cloned().fold(f64::INFINITY, f64::min),
                max: test.labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                histogram,
            }
        })
        .collect()
}

/// Runs every job, on up to `threads` workers, and returns results in job order.
fn execute(jobs: &[Job], splits: &[(Dataset, Dataset)], config: &BenchmarkConfig) -> Result<Vec<JobResult>> {
    let threads = config.threads.max(1);
    if threads == 1 {
        return jobs.iter().map(|j| run_job(j, splits, config)).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| jobs.par_iter().map(|j| run_job(j, splits, config)).collect())
}

fn prepare(dataset: &Dataset, config: &BenchmarkConfig) -> Result<Vec<(Dataset, Dataset)>> {
    config.validate()?;
    if dataset.len() < 4 {
        return Err(Error::BatchTooSmall {
            min: 4,
            got: dataset.len(),
        });
    }
    config
        .seeds
        .iter()
        .map(|&seed| split(dataset, config.test_fraction, seed))
        .collect()
}

fn trained_config(config: &BenchmarkConfig, loss: LossVariant, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        loss,
        export_epochs: Vec::new(),
        ..config.train.clone()
    }
}

fn collect(results: &[JobResult], name: &str) -> Vec<f64> {
    let mut picked: Vec<_> = results.iter().filter(|r| r.name == name).collect();
    picked.sort_by_key(|r| r.seed_index);
    picked.iter().map(|r| r.mae).collect()
}

fn timings(results: &[JobResult], seeds: &[u64]) -> Vec<RunTiming> {
    results
        .iter()
        .map(|r| RunTiming {
            name: r.name.clone(),
            seed: seeds[r.seed_index],
            seconds: r.seconds,
        })
        .collect()
}

/// Trains one encoder per (variant, seed), fits a ridge readout on its
/// training-split embeddings and scores test MAE. Two reference readouts
/// are added per seed: ridge on the raw features and ridge on an untrained
/// encoder's embeddings.
pub fn run_benchmark(dataset: &Dataset, description: &str, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let splits = prepare(dataset, config)?;
    let mut jobs = Vec::new();
    for &variant in &config.variants {
        for (seed_index, &seed) in config.seeds.iter().enumerate() {
            jobs.push(Job {
                name: variant.name().to_string(),
                seed_index,
                method: Method::Trained(trained_config(config, variant, seed)),
            });
        }
    }
    for (name, kind) in [(RAW_FEATURE_BASELINE, 0), (UNTRAINED_BASELINE, 1)] {
        for seed_index in 0..config.seeds.len() {
            jobs.push(Job {
                name: name.to_string(),
                seed_index,
                method: if kind == 0 {
                    Method::RawFeatures
                } else {
                    Method::Untrained
                },
            });
        }
    }
    let results = execute(&jobs, &splits, config)?;

    let variants = config
        .variants
        .iter()
        .map(|v| MaeSummary::new(v.name(), collect(&results, v.name())))
        .collect();
    let baselines = [RAW_FEATURE_BASELINE, UNTRAINED_BASELINE]
        .into_iter()
        .map(|name| MaeSummary::new(name, collect(&results, name)))
        .collect();
    Ok(BenchmarkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: "benchmark".into(),
        dataset: description.into(),
        std_convention: STD_CONVENTION.into(),
        split_policy: SPLIT_POLICY.into(),
        config: config.clone(),
        variants,
        baselines,
        test_labels: label_summaries(dataset, &config.seeds, &splits),
        timing: timings(&results, &config.seeds),
    })
}

/// Same protocol as [`run_benchmark`] with the loss fixed to the localized
/// variant, sweeping the neighbor distance norm.
pub fn run_ablation(
    dataset: &Dataset,
    description: &str,
    config: &BenchmarkConfig,
    norms: &[DistanceNorm],
) -> Result<AblationReport> {
    if norms.is_empty() {
        return Err(Error::Config("at least one distance norm is required".into()));
    }
    let mut config = config.clone();
    config.variants = vec![LossVariant::DynLocRep];
    let splits = prepare(dataset, &config)?;
    let mut jobs = Vec::new();
    for &norm in norms {
        for (seed_index, &seed) in config.seeds.iter().enumerate() {
            let mut train_config = trained_config(&config, LossVariant::DynLocRep, seed);
            train_config.distance_norm = norm;
            jobs.push(Job {
                name: norm.name().to_string(),
                seed_index,
                method: Method::Trained(train_config),
            });
        }
    }
    let results = execute(&jobs, &splits, &config)?;
    let norms = norms
        .iter()
        .map(|&norm| {
            let summary = MaeSummary::new(norm.name(), collect(&results, norm.name()));
            (
                norm.name().to_string(),
                NormSummary {
                    maes: summary.maes,
                    mean: summary.mean,
                    std: summary.std,
                    reference: reference_mae(norm),
                },
            )
        })
        .collect();
    Ok(AblationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: "ablation".into(),
        dataset: description.into(),
        std_convention: STD_CONVENTION.into(),
        split_policy: SPLIT_POLICY.into(),
        test_labels: label_summaries(dataset, &config.seeds, &splits),
        timing: timings(&results, &config.seeds),
        config,
        norms,
    })
}
