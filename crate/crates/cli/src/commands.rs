use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use dynloc::eval::{write_embedding_header, write_embedding_rows};
use dynloc::{
    generate_synthetic, load_csv, run_ablation, run_benchmark, write_csv, AblationReport, BenchmarkConfig,
    BenchmarkReport, Dataset, EncoderConfig, KernelSpec, LossConfig, OptimConfig, Report, RidgeConfig, SyntheticSpec,
    TrainConfig, Trainer,
};
use log::info;

use crate::args::{AblateArgs, BenchmarkArgs, EvalArgs, GenerateArgs, ModelArgs, TrainArgs};
use crate::CliError;

pub const TRACE_FILE: &str = "trace.jsonl";
pub const CHECKPOINT_FILE: &str = "encoder.ckpt";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";

fn guard_overwrite(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Exists(path.to_path_buf()));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
}

fn write_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        n: args.n,
        feature_dim: args.feature_dim,
        informative_dims: args.informative_dims,
        noise_std: args.noise_std,
        ..SyntheticSpec::default()
    };
    spec.validate()?;
    guard_overwrite(&args.out, args.force)?;
    let data = generate_synthetic(&spec, args.seed)?;
    let mut out = create(&args.out)?;
    write_csv(&data, &mut out)?;
    out.flush().map_err(write_err(&args.out))?;
    info!("wrote {} samples to {}", data.len(), args.out.display());
    Ok(())
}

impl ModelArgs {
    fn apply(&self, train: &mut TrainConfig) -> Result<(), CliError> {
        train.epochs = self.epochs;
        train.batch_size = self.batch_size;
        train.loss_config = LossConfig {
            kernel: KernelSpec::gaussian(self.kernel_sigma)?,
            temperature: self.temperature,
            reduction: self.reduction,
        };
        train.nn_final = self.nn_final as usize;
        train.nn_step_size = self.nn_step_size as usize;
        train.nn_space = self.nn_space;
        Ok(())
    }

    fn optim(&self) -> OptimConfig {
        OptimConfig {
            learning_rate: self.lr,
            decay_factor: self.lr_decay,
            decay_every: self.lr_decay_every,
            weight_decay: self.weight_decay,
            ..OptimConfig::default()
        }
    }

    fn encoder(&self, input_dim: usize) -> EncoderConfig {
        EncoderConfig {
            input_dim,
            hidden: self.hidden.clone(),
            output_dim: self.embedding_dim,
        }
    }

    /// Checks everything that does not depend on the data.
    fn validate(&self, train: &TrainConfig) -> Result<(), CliError> {
        train.validate()?;
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(CliError::Usage(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        self.optim().validate()?;
        self.encoder(1).validate()?;
        Ok(())
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut config = TrainConfig {
        seed: args.seed,
        loss: args.loss,
        distance_norm: args.distance_norm,
        export_epochs: args.export_epochs.clone(),
        ..TrainConfig::default()
    };
    args.model.apply(&mut config)?;
    args.model.validate(&config)?;

    let trace_path = args.out_dir.join(TRACE_FILE);
    let checkpoint_path = args.out_dir.join(CHECKPOINT_FILE);
    let embeddings_path = args.out_dir.join(EMBEDDINGS_FILE);
    for path in [&trace_path, &checkpoint_path, &embeddings_path] {
        guard_overwrite(path, args.force)?;
    }

    let data = load_csv(&args.data)?;
    let encoder_config = args.model.encoder(data.feature_dim());
    fs::create_dir_all(&args.out_dir).map_err(write_err(&args.out_dir))?;

    let mut trainer = Trainer::new(&data, config.clone(), args.model.optim(), &encoder_config)?;
    let mut trace = create(&trace_path)?;
    info!(
        "training {} on {} samples for {} epochs ({} parameters)",
        config.loss,
        data.len(),
        config.epochs,
        trainer.encoder().parameter_count()
    );
    for _ in 0..config.epochs {
        let record = trainer.run_epoch()?;
        let line = serde_json::to_string(&record).map_err(|e| CliError::Core(dynloc::Error::Input(e.to_string())))?;
        writeln!(trace, "{line}").map_err(write_err(&trace_path))?;
        trace.flush().map_err(write_err(&trace_path))?;
        info!(
            "epoch {:>3}  lr {:.3e}  nn {:>4}  loss {:.6}",
            record.epoch,
            record.lr,
            record.nn_count.map_or_else(|| "-".to_string(), |n| n.to_string()),
            record.mean_loss
        );
    }
    let outcome = trainer.finish();

    let mut checkpoint = create(&checkpoint_path)?;
    outcome.encoder.write_checkpoint(&mut checkpoint)?;
    checkpoint.flush().map_err(write_err(&checkpoint_path))?;

    if !outcome.snapshots.is_empty() {
        let mut out = create(&embeddings_path)?;
        write_embedding_header(&mut out, outcome.encoder.output_dim())?;
        for snap in &outcome.snapshots {
            write_embedding_rows(&mut out, snap.epoch, &data.ids, &data.labels, snap.embeddings.view())?;
        }
        out.flush().map_err(write_err(&embeddings_path))?;
    }
    info!("artifacts written to {}", args.out_dir.display());
    Ok(())
}

fn load_eval_data(eval: &EvalArgs) -> Result<(Dataset, String), CliError> {
    match &eval.data {
        Some(path) => Ok((load_csv(path)?, path.display().to_string())),
        None => {
            let spec = SyntheticSpec {
                n: eval.synthetic_n,
                ..SyntheticSpec::default()
            };
            let data = generate_synthetic(&spec, eval.synthetic_seed)?;
            Ok((data, format!("synthetic(n={}, seed={})", spec.n, eval.synthetic_seed)))
        }
    }
}

fn eval_config(
    eval: &EvalArgs,
    model: &ModelArgs,
    input_dim: usize,
    threads: usize,
) -> Result<BenchmarkConfig, CliError> {
    let mut config = BenchmarkConfig::new(input_dim);
    config.seeds = eval.seeds.clone();
    config.test_fraction = eval.test_fraction;
    config.ridge = RidgeConfig {
        lambda: eval.ridge_lambda,
    };
    model.apply(&mut config.train)?;
    config.optim = model.optim();
    config.encoder = model.encoder(input_dim);
    config.threads = threads;
    Ok(config)
}

fn emit<R: Report>(report: &R, out: Option<&PathBuf>) -> Result<(), CliError> {
    let json = report.to_json_pretty()?;
    match out {
        Some(path) => {
            let mut file = create(path)?;
            writeln!(file, "{json}").map_err(write_err(path))?;
            file.flush().map_err(write_err(path))?;
            info!("report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn check_eval_args(eval: &EvalArgs, model: &ModelArgs, train: &TrainConfig) -> Result<(), CliError> {
    if eval.seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    if !(eval.test_fraction > 0.0 && eval.test_fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "test fraction must lie in (0, 1), got {}",
            eval.test_fraction
        )));
    }
    if !(eval.ridge_lambda >= 0.0 && eval.ridge_lambda.is_finite()) {
        return Err(CliError::Usage(format!(
            "ridge lambda must be non-negative, got {}",
            eval.ridge_lambda
        )));
    }
    model.validate(train)?;
    if let Some(out) = &eval.out {
        guard_overwrite(out, eval.force)?;
    }
    Ok(())
}

pub fn cmd_benchmark(args: &BenchmarkArgs, threads: usize) -> Result<BenchmarkReport, CliError> {
    if args.variants.is_empty() {
        return Err(CliError::Usage("at least one loss variant is required".into()));
    }
    let mut probe = TrainConfig {
        distance_norm: args.distance_norm,
        ..TrainConfig::default()
    };
    args.model.apply(&mut probe)?;
    check_eval_args(&args.eval, &args.model, &probe)?;

    let (data, description) = load_eval_data(&args.eval)?;
    let mut config = eval_config(&args.eval, &args.model, data.feature_dim(), threads)?;
    config.variants = args.variants.clone();
    config.train.distance_norm = args.distance_norm;
    info!(
        "benchmark on {description}: {} variants x {} seeds, {threads} thread(s)",
        config.variants.len(),
        config.seeds.len()
    );
    let report = run_benchmark(&data, &description, &config)?;
    for row in report.variants.iter().chain(&report.baselines) {
        info!("{:<24} MAE {:.3} +/- {:.3}", row.name, row.mean, row.std);
    }
    emit(&report, args.eval.out.as_ref())?;
    Ok(report)
}

pub fn cmd_ablate(args: &AblateArgs, threads: usize) -> Result<AblationReport, CliError> {
    if args.norms.is_empty() {
        return Err(CliError::Usage("at least one distance norm is required".into()));
    }
    let mut probe = TrainConfig::default();
    args.model.apply(&mut probe)?;
    check_eval_args(&args.eval, &args.model, &probe)?;

    let (data, description) = load_eval_data(&args.eval)?;
    let config = eval_config(&args.eval, &args.model, data.feature_dim(), threads)?;
    info!(
        "ablation on {description}: {} norms x {} seeds, {threads} thread(s)",
        args.norms.len(),
        config.seeds.len()
    );
    let report = run_ablation(&data, &description, &config, &args.norms)?;
    for (norm, row) in &report.norms {
        info!("{norm:<10} MAE {:.3} +/- {:.3}", row.mean, row.std);
    }
    emit(&report, args.eval.out.as_ref())?;
    Ok(report)
}
