use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use bitwise_nn::bnn::{self, BetaMode, BnnState, Phase2Options, Rebinarize, StepScaling};
use bitwise_nn::dataio::{encode, load_split, EncodedDataset, Encoding, Split};
use bitwise_nn::realnet::{self, RealNetwork, TrainConfig};
use bitwise_nn::ternarize::TernarizeSpec;
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model_file::{Model, Phase};

/// Default half-width of the uniform weight initialization.
pub const INIT_SCALE: f64 = 0.1;

fn parse_encoding(s: &str) -> Result<Encoding, String> {
    s.parse().map_err(|e: bitwise_nn::Error| e.to_string())
}

fn parse_rebinarize(s: &str) -> Result<Rebinarize, String> {
    s.parse().map_err(|e: bitwise_nn::Error| e.to_string())
}

fn parse_step_scaling(s: &str) -> Result<StepScaling, String> {
    s.parse().map_err(|e: bitwise_nn::Error| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse().map_err(|e: bitwise_nn::Error| e.to_string())
}

#[derive(Args, Clone, Debug)]
pub struct TrainRealArgs {
    /// Directory with the MNIST IDX files.
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long, value_parser = parse_encoding, default_value = "bipolar")]
    pub encoding: Encoding,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1024,1024,1024")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.99)]
    pub lr_decay: f64,
    /// Initial weights are uniform in (-s, s); biases start at zero.
    #[arg(long, default_value_t = INIT_SCALE)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    /// Keep probability of input units under dropout.
    #[arg(long, default_value_t = 0.8)]
    pub keep_input: f64,
    /// Keep probability of hidden units under dropout.
    #[arg(long, default_value_t = 0.5)]
    pub keep_hidden: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use only the first N training samples.
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Skip the per-epoch test-set evaluation.
    #[arg(long)]
    pub no_test: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug)]
pub struct TrainBnnArgs {
    /// Phase-1 (real) model to start from.
    #[arg(long, required_unless_present = "resume", conflicts_with = "resume")]
    pub init: Option<PathBuf>,
    /// Ternary model to continue training.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Must match the model's encoding when given.
    #[arg(long, value_parser = parse_encoding)]
    pub encoding: Option<Encoding>,
    /// Fraction of weights forced to zero.
    #[arg(long, default_value_t = 0.0)]
    pub sparsity: f64,
    /// Keep the initial ternarization boundaries instead of re-deriving them.
    #[arg(long)]
    pub freeze_beta: bool,
    /// Re-ternarize after every minibatch (`update`) or once per epoch (`epoch`).
    #[arg(long, value_parser = parse_rebinarize, default_value = "update")]
    pub rebinarize: Rebinarize,
    /// Per-layer learning-rate multipliers: `fan-in` or `uniform`.
    #[arg(long, value_parser = parse_step_scaling, default_value = "fan-in")]
    pub step_scaling: StepScaling,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_BNN_LR)]
    pub lr: f64,
    #[arg(long, default_value_t = DEFAULT_BNN_LR_DECAY)]
    pub lr_decay: f64,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train_limit: Option<usize>,
    #[arg(long)]
    pub no_test: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Phase-2 defaults, tuned for fan-in step scaling.
pub const DEFAULT_BNN_LR: f64 = 0.3;
pub const DEFAULT_BNN_LR_DECAY: f64 = 0.95;

#[derive(Args, Clone, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,
    /// Must match the model's encoding when given.
    #[arg(long, value_parser = parse_encoding)]
    pub encoding: Option<Encoding>,
    /// Also print the histogram of per-sample output bit errors (ternary models).
    #[arg(long)]
    pub bit_errors: bool,
    #[arg(long)]
    pub limit: Option<usize>,
}

fn load_data(dir: &Path, split: Split, encoding: Encoding, limit: Option<usize>) -> Result<EncodedDataset> {
    let mut raw = load_split(dir, split)
        .with_context(|| format!("loading {} split from {}", split.prefix(), dir.display()))?;
    if let Some(n) = limit {
        raw.truncate(n);
    }
    Ok(encode(&raw, encoding))
}

fn check_encoding(model: &Model, requested: Option<Encoding>) -> Result<()> {
    if let Some(e) = requested {
        ensure!(
            e == model.encoding(),
            "encoding mismatch: model was trained on {} inputs, {} requested",
            model.encoding(),
            e
        );
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<Model> {
    Model::load(path).with_context(|| format!("reading model {}", path.display()))
}

pub fn train_real(args: &TrainRealArgs, log: &mut dyn Write) -> Result<Model> {
    let train = load_data(&args.data_dir, Split::Train, args.encoding, args.train_limit)?;
    let test = if args.no_test {
        None
    } else {
        Some(load_data(&args.data_dir, Split::Test, args.encoding, None)?)
    };
    let mut dims = vec![train.width()];
    dims.extend(&args.hidden);
    dims.push(bitwise_nn::dataio::NUM_CLASSES);

    let mut init_rng = ChaCha8Rng::seed_from_u64(args.seed);
    init_rng.set_stream(1);
    let mut net = RealNetwork::init_uniform(&dims, args.init_scale, &mut init_rng)?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        lr: args.lr,
        lr_decay: args.lr_decay,
        batch_size: args.batch_size,
        keep_input: args.keep_input,
        keep_hidden: args.keep_hidden,
        seed: args.seed,
    };
    let mut io = Ok(());
    realnet::train_phase1(&mut net, &train, test.as_ref(), &cfg, |r| {
        if io.is_ok() {
            io = writeln!(log, "{r}");
        }
    })?;
    io?;
    let model = Model::Real {
        encoding: args.encoding,
        net,
    };
    model.save(&args.out)?;
    Ok(model)
}

pub fn train_bnn(args: &TrainBnnArgs, log: &mut dyn Write) -> Result<Model> {
    let (encoding, mut state) = match (&args.init, &args.resume) {
        (Some(path), _) => {
            let model = load_model(path)?;
            check_encoding(&model, args.encoding)?;
            match model {
                Model::Real { encoding, net } => {
                    let mode = if args.freeze_beta {
                        BetaMode::Frozen
                    } else {
                        BetaMode::Rederive
                    };
                    (encoding, BnnState::from_real(&net, TernarizeSpec::new(args.sparsity)?, mode)?)
                }
                Model::Ternary { .. } => bail!(
                    "phase mismatch: --init needs a {} model, {} is {}",
                    Phase::Real.name(),
                    path.display(),
                    Phase::Ternary.name()
                ),
            }
        }
        (None, Some(path)) => {
            let model = load_model(path)?;
            check_encoding(&model, args.encoding)?;
            match model {
                Model::Ternary { encoding, state } => (encoding, state),
                Model::Real { .. } => bail!(
                    "phase mismatch: --resume needs a {} model, {} is {}",
                    Phase::Ternary.name(),
                    path.display(),
                    Phase::Real.name()
                ),
            }
        }
        (None, None) => bail!("either --init or --resume is required"),
    };

    let train = load_data(&args.data_dir, Split::Train, encoding, args.train_limit)?;
    let test = if args.no_test {
        None
    } else {
        Some(load_data(&args.data_dir, Split::Test, encoding, None)?)
    };
    let cfg = TrainConfig {
        epochs: args.epochs,
        lr: args.lr,
        lr_decay: args.lr_decay,
        batch_size: args.batch_size,
        keep_input: 1.0,
        keep_hidden: 1.0,
        seed: args.seed,
    };
    let mut io = Ok(());
    let opts = Phase2Options {
        rebinarize: args.rebinarize,
        step_scaling: args.step_scaling,
    };
    bnn::train_phase2(&mut state, &train, test.as_ref(), &cfg, opts, |r| {
        if io.is_ok() {
            io = writeln!(log, "{r}");
        }
    })?;
    io?;
    let model = Model::Ternary { encoding, state };
    model.save(&args.out)?;
    Ok(model)
}

/// Classification error and sample count, plus the bit-error histogram for ternary models.
pub fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(f64, usize)> {
    let model = load_model(&args.model)?;
    check_encoding(&model, args.encoding)?;
    let data = load_data(&args.data_dir, args.split, model.encoding(), args.limit)?;
    let (error, n) = match &model {
        Model::Real { net, .. } => (realnet::evaluate_real(net, &data)?, data.len()),
        Model::Ternary { state, .. } => {
            let report = state.evaluate(&data)?;
            if args.bit_errors {
                let hist: Vec<String> = report.bit_errors.iter().map(usize::to_string).collect();
                writeln!(out, "bit_errors={}", hist.join(","))?;
            }
            (report.error, report.n)
        }
    };
    writeln!(out, "error={error:.6} n={n}")?;
    Ok((error, n))
}
