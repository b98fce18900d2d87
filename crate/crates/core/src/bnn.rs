//! Phase-2 training by noisy backpropagation, and bitwise inference.
//!
//! The forward pass runs entirely through ternary weights and sign activations.
//! Errors flow back through the same ternary weights,
//!
//! ```text
//! delta_j(l) = sum_i w_ij(l+1) * delta_i(l+1)
//! grad w_ij  = sum_n delta_i(n) * z_j(n)        grad b_i = sum_n delta_i(n)
//! ```
//!
//! with no derivative of the sign function anywhere, and updates land on the real
//! shadow parameters. Shadows are re-ternarized after every update by default, or
//! once per epoch with [`Rebinarize::Epoch`].
//!
//! The top layer's integer scores go through a softmax after division by
//! `sqrt(fan-in)`; the raw scores reach the hundreds and would saturate it.
//!
//! Because the deltas pass through ±1 weights undamped, their size grows with
//! every layer they cross, and the first layer's gradients end up thousands of
//! times larger than the top layer's. [`StepScaling::FanIn`] compensates by
//! reading every layer's pre-activation as divided by `sqrt(fan-in)`, the same
//! scaling the scores get. That leaves every sign unchanged and multiplies layer
//! `l`'s gradient by `1 / prod_{k >= l} sqrt(fan-in_k)`; the gradients themselves
//! are still the ones above.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bitcore::{bitwise_error, BitPlane, PreActivation, TernaryLayer};
use crate::dataio::EncodedDataset;
use crate::error::{Error, Result};
use crate::realnet::{argmax, check_dataset, softmax_rows, EpochRecord, Gradients, RealNetwork, TrainConfig};
use crate::ternarize::{network_thresholds, ternarize_with, TernarizeSpec, Thresholds};

/// When phase 2 re-ternarizes the shadow parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Rebinarize {
    /// After every minibatch update, so each step sees the current bitwise network.
    #[default]
    Update,
    /// Once at the end of each epoch; the ternary network is fixed within an epoch.
    Epoch,
}

impl std::str::FromStr for Rebinarize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "update" => Ok(Rebinarize::Update),
            "epoch" => Ok(Rebinarize::Epoch),
            other => Err(Error::Config(format!("unknown rebinarize schedule {other:?}"))),
        }
    }
}

/// Per-layer multipliers on the phase-2 learning rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StepScaling {
    /// Layer `l` steps with `lr / prod_{k >= l} sqrt(fan-in_k)`.
    #[default]
    FanIn,
    /// Every layer steps with `lr`.
    Uniform,
}

impl std::str::FromStr for StepScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fan-in" => Ok(StepScaling::FanIn),
            "uniform" => Ok(StepScaling::Uniform),
            other => Err(Error::Config(format!("unknown step scaling {other:?}"))),
        }
    }
}

/// Learning-rate multiplier of each layer under `scaling`.
pub fn layer_step_scales(layers: &[TernaryLayer], scaling: StepScaling) -> Vec<f64> {
    match scaling {
        StepScaling::Uniform => vec![1.0; layers.len()],
        StepScaling::FanIn => (0..layers.len())
            .map(|l| 1.0 / layers[l..].iter().map(|t| (t.cols() as f64).sqrt()).product::<f64>())
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Phase2Options {
    pub rebinarize: Rebinarize,
    pub step_scaling: StepScaling,
}

/// How the ternarization boundaries evolve during phase 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetaMode {
    /// Recompute every boundary from the sparsity target at each re-ternarization.
    Rederive,
    /// Keep the boundaries computed at initialization.
    Frozen,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnnState {
    ternary: Vec<TernaryLayer>,
    shadow: RealNetwork,
    spec: TernarizeSpec,
    beta_mode: BetaMode,
    thresholds: Vec<Thresholds>,
    epoch: usize,
}

impl BnnState {
    /// Ternarizes a phase-1 network and keeps its parameters as the shadow.
    pub fn from_real(net: &RealNetwork, spec: TernarizeSpec, beta_mode: BetaMode) -> Result<Self> {
        let thresholds = network_thresholds(net, spec)?;
        Ok(Self {
            ternary: ternarize_with(net, &thresholds)?,
            shadow: net.clone(),
            spec,
            beta_mode,
            thresholds,
            epoch: 0,
        })
    }

    /// Reassembles a saved state, rejecting ternary layers that disagree with the shadow.
    pub fn from_parts(
        ternary: Vec<TernaryLayer>,
        shadow: RealNetwork,
        spec: TernarizeSpec,
        beta_mode: BetaMode,
        thresholds: Vec<Thresholds>,
        epoch: usize,
    ) -> Result<Self> {
        if ternarize_with(&shadow, &thresholds)? != ternary {
            return Err(Error::Config(
                "ternary layers are not the ternarization of the shadow parameters".into(),
            ));
        }
        Ok(Self {
            ternary,
            shadow,
            spec,
            beta_mode,
            thresholds,
            epoch,
        })
    }

    pub fn ternary(&self) -> &[TernaryLayer] {
        &self.ternary
    }

    pub fn shadow(&self) -> &RealNetwork {
        &self.shadow
    }

    pub fn spec(&self) -> TernarizeSpec {
        self.spec
    }

    pub fn beta_mode(&self) -> BetaMode {
        self.beta_mode
    }

    pub fn thresholds(&self) -> &[Thresholds] {
        &self.thresholds
    }

    /// Completed phase-2 epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Re-ternarizes the shadow parameters.
    pub fn rebinarize(&mut self) -> Result<()> {
        if self.beta_mode == BetaMode::Rederive {
            self.thresholds = network_thresholds(&self.shadow, self.spec)?;
        }
        self.ternary = ternarize_with(&self.shadow, &self.thresholds)?;
        Ok(())
    }

    fn checked_rebinarize(&mut self) -> Result<()> {
        let finite = self
            .shadow
            .layers()
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Diverged {
                epoch: self.epoch,
                detail: "non-finite shadow parameter".into(),
            });
        }
        self.rebinarize()
    }

    /// Fraction of inactive weights over all layers.
    pub fn sparsity(&self) -> f64 {
        weight_sparsity(&self.ternary)
    }

    pub fn evaluate(&self, data: &EncodedDataset) -> Result<EvalReport> {
        evaluate(&self.ternary, data)
    }
}

pub fn weight_sparsity(layers: &[TernaryLayer]) -> f64 {
    let zeros: usize = layers.iter().map(TernaryLayer::zero_weights).sum();
    let total: usize = layers.iter().map(|l| l.rows() * l.cols()).sum();
    zeros as f64 / total.max(1) as f64
}

/// Per-layer pre-activations and sign outputs of one bitwise forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryForward {
    pub input: BitPlane,
    pub layers: Vec<(PreActivation, BitPlane)>,
}

impl BinaryForward {
    /// Integer class scores (top-layer pre-activations).
    pub fn scores(&self) -> &[i32] {
        self.layers.last().unwrap().0.values()
    }

    /// Sign outputs of the top layer.
    pub fn output_bits(&self) -> &BitPlane {
        &self.layers.last().unwrap().1
    }

    /// Predicted class; ties go to the lower index.
    pub fn prediction(&self) -> usize {
        argmax(self.scores())
    }
}

fn check_chain(layers: &[TernaryLayer]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::Config("network needs at least one layer".into()));
    }
    for pair in layers.windows(2) {
        if pair[1].cols() != pair[0].rows() {
            return Err(Error::dim("layer chain", pair[0].rows(), pair[1].cols()));
        }
    }
    Ok(())
}

pub fn forward_binary(layers: &[TernaryLayer], x: &BitPlane) -> Result<BinaryForward> {
    check_chain(layers)?;
    let mut out: Vec<(PreActivation, BitPlane)> = Vec::with_capacity(layers.len());
    for layer in layers {
        let input = out.last().map_or(x, |(_, z)| z);
        let step = layer.forward(input)?;
        out.push(step);
    }
    Ok(BinaryForward {
        input: x.clone(),
        layers: out,
    })
}

/// Divisor applied to integer class scores before the softmax.
pub fn score_temperature(layers: &[TernaryLayer]) -> f64 {
    (layers.last().map_or(1, TernaryLayer::cols) as f64).sqrt()
}

pub fn scaled_softmax(scores: &[i32], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = scores.iter().map(|&s| s as f64 / temperature).collect();
    let mut p = vec![0.0; logits.len()];
    softmax_rows(&logits, logits.len(), &mut p);
    p
}

/// Noisy-backprop gradients summed over the samples in `caches`.
///
/// Sums run over samples in order, and over output units in order for the
/// backpropagated errors.
pub fn backward_noisy(layers: &[TernaryLayer], caches: &[BinaryForward], labels: &[u8]) -> Result<Gradients> {
    check_chain(layers)?;
    if caches.len() != labels.len() {
        return Err(Error::dim("labels", caches.len(), labels.len()));
    }
    let classes = layers.last().unwrap().rows();
    let temperature = score_temperature(layers);
    let dense: Vec<Vec<f64>> = layers.iter().map(TernaryLayer::dense_weights).collect();
    let mut grads = Gradients {
        layers: layers
            .iter()
            .map(|l| crate::realnet::LayerGradient {
                weights: vec![0.0; l.rows() * l.cols()],
                bias: vec![0.0; l.rows()],
            })
            .collect(),
    };
    let widest = layers.iter().map(TernaryLayer::cols).max().unwrap();
    let mut z = vec![0.0; widest];

    for (n, (cache, &label)) in caches.iter().zip(labels).enumerate() {
        if cache.layers.len() != layers.len() || cache.input.len() != layers[0].cols() {
            return Err(Error::dim("forward cache", layers.len(), cache.layers.len()));
        }
        if label as usize >= classes {
            return Err(Error::LabelOutOfRange {
                index: n,
                label,
                classes,
            });
        }
        let mut delta = scaled_softmax(cache.scores(), temperature);
        delta[label as usize] -= 1.0;

        for l in (0..layers.len()).rev() {
            let (rows, cols) = (layers[l].rows(), layers[l].cols());
            let z_prev = if l == 0 { &cache.input } else { &cache.layers[l - 1].1 };
            let z = &mut z[..cols];
            z_prev.unpack_f64_into(z);

            let g = &mut grads.layers[l];
            for (i, &d) in delta.iter().enumerate() {
                g.bias[i] += d;
                let row = &mut g.weights[i * cols..(i + 1) * cols];
                for (gw, &zj) in row.iter_mut().zip(z.iter()) {
                    *gw += d * zj;
                }
            }

            if l > 0 {
                let mut prev = vec![0.0; cols];
                for (i, &d) in delta.iter().enumerate().take(rows) {
                    let w = &dense[l][i * cols..(i + 1) * cols];
                    for (p, &wij) in prev.iter_mut().zip(w) {
                        *p += wij * d;
                    }
                }
                delta = prev;
            }
        }
    }
    Ok(grads)
}

/// Outcome of bitwise evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub error: f64,
    pub n: usize,
    /// `bit_errors[k]` counts samples whose output bits disagree with the
    /// bipolar one-hot target in exactly `k` positions.
    pub bit_errors: Vec<usize>,
}

/// Bipolar one-hot target: `+1` at `label`, `-1` elsewhere.
pub fn one_hot_target(label: usize, classes: usize) -> BitPlane {
    BitPlane::from_bools((0..classes).map(|c| c == label))
}

pub fn evaluate(layers: &[TernaryLayer], data: &EncodedDataset) -> Result<EvalReport> {
    check_chain(layers)?;
    let classes = layers.last().unwrap().rows();
    check_dataset(layers[0].cols(), classes, data)?;
    let mut wrong = 0;
    let mut bit_errors = vec![0; classes + 1];
    for (i, &label) in data.labels().iter().enumerate() {
        let fwd = forward_binary(layers, data.bits(i))?;
        if fwd.prediction() != label as usize {
            wrong += 1;
        }
        let e = bitwise_error(&one_hot_target(label as usize, classes), fwd.output_bits())?;
        bit_errors[e as usize] += 1;
    }
    Ok(EvalReport {
        error: wrong as f64 / data.len().max(1) as f64,
        n: data.len(),
        bit_errors,
    })
}

/// Noisy backpropagation over minibatches.
///
/// Dropout settings in `cfg` are ignored.
pub fn train_phase2(
    state: &mut BnnState,
    train: &EncodedDataset,
    test: Option<&EncodedDataset>,
    cfg: &TrainConfig,
    opts: Phase2Options,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    let classes = state.shadow.n_classes();
    check_dataset(state.shadow.input_width(), classes, train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let scales = layer_step_scales(&state.ternary, opts.step_scaling);
    let mut steps = vec![0.0; scales.len()];

    for e in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.lr_at(e);
        let (mut loss, mut wrong) = (0.0, 0usize);
        let mut caches = Vec::with_capacity(cfg.batch_size);
        let mut labels = Vec::with_capacity(cfg.batch_size);
        for idx in order.chunks(cfg.batch_size) {
            caches.clear();
            labels.clear();
            let temperature = score_temperature(&state.ternary);
            for &i in idx {
                let fwd = forward_binary(&state.ternary, train.bits(i))?;
                let y = train.labels()[i];
                let p = scaled_softmax(fwd.scores(), temperature);
                loss -= p[y as usize].max(f64::MIN_POSITIVE).ln();
                if fwd.prediction() != y as usize {
                    wrong += 1;
                }
                caches.push(fwd);
                labels.push(y);
            }
            let grads = backward_noisy(&state.ternary, &caches, &labels)?;
            for (step, scale) in steps.iter_mut().zip(&scales) {
                *step = lr / idx.len() as f64 * scale;
            }
            state.shadow.apply_layer_steps(&grads, &steps);
            if opts.rebinarize == Rebinarize::Update {
                state.checked_rebinarize()?;
            }
        }
        if opts.rebinarize == Rebinarize::Epoch {
            state.checked_rebinarize()?;
        }
        state.epoch += 1;
        let n = train.len().max(1) as f64;
        let record = EpochRecord {
            epoch: state.epoch,
            loss: loss / n,
            train_err: wrong as f64 / n,
            test_err: test.map(|t| state.evaluate(t).map(|r| r.error)).transpose()?,
            sparsity: Some(state.sparsity()),
        };
        on_epoch(&record);
        log.push(record);
    }
    Ok(log)
}
