//! Phase-1 training: a real-valued network whose weights pass through `tanh`
//! on every forward pass, so the effective weights stay inside `(-1, 1)`.
//!
//! Hidden units use `tanh`; the top layer feeds a softmax/cross-entropy head.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::EncodedDataset;
use crate::error::{Error, Result};
use crate::linalg::{gemm, View};

/// Unconstrained parameters of one fully connected layer, row-major `rows x cols`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealLayer {
    rows: usize,
    cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl RealLayer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    pub fn from_parts(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::dim("layer weights", rows * cols, weights.len()));
        }
        if bias.len() != rows {
            return Err(Error::dim("layer bias", rows, bias.len()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    fn apply_step(&mut self, g: &LayerGradient, step: f64) {
        for (w, d) in self.weights.iter_mut().zip(&g.weights) {
            *w -= step * d;
        }
        for (b, d) in self.bias.iter_mut().zip(&g.bias) {
            *b -= step * d;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealNetwork {
    layers: Vec<RealLayer>,
}

impl RealNetwork {
    /// All-zero network for widths `dims = [K0, K1, ..., classes]`.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {dims:?}")));
        }
        Ok(Self {
            layers: dims.windows(2).map(|w| RealLayer::zeros(w[1], w[0])).collect(),
        })
    }

    /// Weights uniform in `(-scale, scale)`, biases zero.
    pub fn init_uniform<R: Rng>(dims: &[usize], scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        for layer in &mut net.layers {
            for w in &mut layer.weights {
                *w = rng.random_range(-scale..scale);
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<RealLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[1].cols != pair[0].rows {
                return Err(Error::dim("layer chain", pair[0].rows, pair[1].cols));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[RealLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [RealLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].cols
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    /// `[K0, K1, ..., classes]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(|l| l.rows))
            .collect()
    }

    /// `w -= step * g` on every parameter.
    pub fn apply_step(&mut self, grads: &Gradients, step: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.apply_step(g, step);
        }
    }

    /// Like [`apply_step`](Self::apply_step) with a separate step per layer.
    pub fn apply_layer_steps(&mut self, grads: &Gradients, steps: &[f64]) {
        for ((layer, g), &step) in self.layers.iter_mut().zip(&grads.layers).zip(steps) {
            layer.apply_step(g, step);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients summed over a minibatch.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &RealNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }
}

/// Dropout multipliers, `0` for dropped units and `1 / keep` otherwise.
///
/// `layers[0]` masks the network input and `layers[l]` the output of hidden layer `l`,
/// each stored `batch x width`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    pub layers: Vec<Vec<f64>>,
}

impl DropoutMasks {
    pub fn sample<R: Rng>(
        net: &RealNetwork,
        batch: usize,
        keep_input: f64,
        keep_hidden: f64,
        rng: &mut R,
    ) -> Self {
        let dims = net.dims();
        let layers = dims[..dims.len() - 1]
            .iter()
            .enumerate()
            .map(|(l, &width)| {
                let keep = if l == 0 { keep_input } else { keep_hidden };
                (0..batch * width)
                    .map(|_| {
                        if keep >= 1.0 || rng.random_bool(keep) {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self { layers }
    }
}

/// Everything the backward pass needs from a forward pass over one minibatch.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub batch: usize,
    /// Network input after input dropout, `batch x K0`.
    pub input: Vec<f64>,
    /// `tanh` of each layer's weights and biases.
    pub compressed: Vec<LayerGradient>,
    /// Pre-activations `a` per layer, `batch x rows`.
    pub pre: Vec<Vec<f64>>,
    /// Hidden outputs after dropout (one entry per hidden layer).
    pub hidden: Vec<Vec<f64>>,
    pub masks: Option<DropoutMasks>,
    /// Softmax of the top-layer pre-activations, `batch x classes`.
    pub probs: Vec<f64>,
}

pub(crate) fn softmax_rows(logits: &[f64], classes: usize, out: &mut [f64]) {
    for (row, dst) in logits.chunks(classes).zip(out.chunks_mut(classes)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (d, &x) in dst.iter_mut().zip(row) {
            *d = (x - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Relaxed forward pass over a minibatch `x` (`batch x K0`, row-major).
pub fn forward_compressed(
    net: &RealNetwork,
    x: &[f64],
    batch: usize,
    masks: Option<&DropoutMasks>,
) -> Result<ForwardCache> {
    let k0 = net.input_width();
    if x.len() != batch * k0 {
        return Err(Error::dim("input batch", batch * k0, x.len()));
    }
    if let Some(m) = masks {
        if m.layers.len() != net.layers.len() {
            return Err(Error::dim("dropout masks", net.layers.len(), m.layers.len()));
        }
        for (l, width) in net.dims()[..net.layers.len()].iter().enumerate() {
            if m.layers[l].len() != batch * width {
                return Err(Error::dim("dropout mask", batch * width, m.layers[l].len()));
            }
        }
    }
    let mut input = x.to_vec();
    if let Some(m) = masks {
        input.iter_mut().zip(&m.layers[0]).for_each(|(v, k)| *v *= k);
    }

    let n_layers = net.layers.len();
    let mut compressed = Vec::with_capacity(n_layers);
    let mut pre = Vec::with_capacity(n_layers);
    let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(n_layers - 1);
    for (l, layer) in net.layers.iter().enumerate() {
        let tw: Vec<f64> = layer.weights.iter().map(|w| w.tanh()).collect();
        let tb: Vec<f64> = layer.bias.iter().map(|b| b.tanh()).collect();
        let z_prev = if l == 0 { &input } else { &hidden[l - 1] };
        let mut a: Vec<f64> = (0..batch).flat_map(|_| tb.iter().copied()).collect();
        gemm(
            batch,
            layer.cols,
            layer.rows,
            1.0,
            View::rows(z_prev, layer.cols),
            View::transposed(&tw, layer.cols),
            1.0,
            &mut a,
        );
        if l + 1 < n_layers {
            let mut z: Vec<f64> = a.iter().map(|v| v.tanh()).collect();
            if let Some(m) = masks {
                z.iter_mut().zip(&m.layers[l + 1]).for_each(|(v, k)| *v *= k);
            }
            hidden.push(z);
        }
        pre.push(a);
        compressed.push(LayerGradient {
            weights: tw,
            bias: tb,
        });
    }
    let classes = net.n_classes();
    let mut probs = vec![0.0; batch * classes];
    softmax_rows(pre.last().unwrap(), classes, &mut probs);
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("softmax output"));
    }
    Ok(ForwardCache {
        batch,
        input,
        compressed,
        pre,
        hidden,
        masks: masks.cloned(),
        probs,
    })
}

fn check_labels(labels: &[u8], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::dim("labels", batch, labels.len()));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= classes) {
        return Err(Error::LabelOutOfRange {
            index,
            label,
            classes,
        });
    }
    Ok(())
}

/// Summed cross-entropy of a cached forward pass.
pub fn cross_entropy(probs: &[f64], labels: &[u8], classes: usize) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(n, &y)| -probs[n * classes + y as usize].max(f64::MIN_POSITIVE).ln())
        .sum()
}

/// Gradients of the summed cross-entropy with respect to the uncompressed parameters.
pub fn backward_compressed(net: &RealNetwork, cache: &ForwardCache, labels: &[u8]) -> Result<Gradients> {
    let batch = cache.batch;
    let classes = net.n_classes();
    check_labels(labels, batch, classes)?;
    if cache.pre.len() != net.layers.len() {
        return Err(Error::dim("forward cache layers", net.layers.len(), cache.pre.len()));
    }

    // softmax - onehot
    let mut delta = cache.probs.clone();
    for (n, &y) in labels.iter().enumerate() {
        delta[n * classes + y as usize] -= 1.0;
    }

    let mut grads = Gradients::zeros_like(net);
    for l in (0..net.layers.len()).rev() {
        let layer = &net.layers[l];
        let (rows, cols) = (layer.rows, layer.cols);
        let comp = &cache.compressed[l];
        let z_prev = if l == 0 { &cache.input } else { &cache.hidden[l - 1] };
        let g = &mut grads.layers[l];

        gemm(
            rows,
            batch,
            cols,
            1.0,
            View::transposed(&delta, rows),
            View::rows(z_prev, cols),
            0.0,
            &mut g.weights,
        );
        for (gw, tw) in g.weights.iter_mut().zip(&comp.weights) {
            *gw *= 1.0 - tw * tw;
        }
        for (i, gb) in g.bias.iter_mut().enumerate() {
            let sum: f64 = (0..batch).map(|n| delta[n * rows + i]).sum();
            *gb = sum * (1.0 - comp.bias[i] * comp.bias[i]);
        }

        if l > 0 {
            let mut prev = vec![0.0; batch * cols];
            gemm(
                batch,
                rows,
                cols,
                1.0,
                View::rows(&delta, rows),
                View::rows(&comp.weights, cols),
                0.0,
                &mut prev,
            );
            for (d, a) in prev.iter_mut().zip(&cache.pre[l - 1]) {
                let t = a.tanh();
                *d *= 1.0 - t * t;
            }
            if let Some(m) = &cache.masks {
                prev.iter_mut().zip(&m.layers[l]).for_each(|(d, k)| *d *= k);
            }
            delta = prev;
        }
    }
    Ok(grads)
}

/// Hyper-parameters shared by both training phases.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub keep_input: f64,
    pub keep_hidden: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.1,
            lr_decay: 0.99,
            batch_size: 100,
            keep_input: 0.8,
            keep_hidden: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        for keep in [self.keep_input, self.keep_hidden] {
            if !(keep > 0.0 && keep <= 1.0) {
                return Err(Error::Config(format!("keep probability must be in (0, 1], got {keep}")));
            }
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi(epoch as i32)
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's minibatches.
    pub loss: f64,
    /// Misclassification rate over the epoch's minibatches, as seen during training.
    pub train_err: f64,
    pub test_err: Option<f64>,
    pub sparsity: Option<f64>,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} loss={:.6} train_err={:.6} test_err={:.6}",
            self.epoch,
            self.loss,
            self.train_err,
            self.test_err.unwrap_or(f64::NAN)
        )?;
        if let Some(s) = self.sparsity {
            write!(f, " sparsity={s:.6}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_dataset(width: usize, classes: usize, data: &EncodedDataset) -> Result<()> {
    if data.width() != width {
        return Err(Error::dim("dataset width", width, data.width()));
    }
    check_labels(data.labels(), data.len(), classes)
}

fn fill_batch(data: &EncodedDataset, idx: &[usize], x: &mut Vec<f64>, y: &mut Vec<u8>) {
    let w = data.width();
    x.resize(idx.len() * w, 0.0);
    y.clear();
    for (n, &i) in idx.iter().enumerate() {
        data.real_input_into(i, &mut x[n * w..(n + 1) * w]);
        y.push(data.labels()[i]);
    }
}

fn count_errors(probs: &[f64], labels: &[u8], classes: usize) -> usize {
    labels
        .iter()
        .zip(probs.chunks(classes))
        .filter(|(&y, p)| argmax(p) != y as usize)
        .count()
}

/// Classification error of the real network (no dropout).
pub fn evaluate_real(net: &RealNetwork, data: &EncodedDataset) -> Result<f64> {
    check_dataset(net.input_width(), net.n_classes(), data)?;
    if data.is_empty() {
        return Ok(0.0);
    }
    let order: Vec<usize> = (0..data.len()).collect();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let mut wrong = 0;
    for idx in order.chunks(500) {
        fill_batch(data, idx, &mut x, &mut y);
        let cache = forward_compressed(net, &x, idx.len(), None)?;
        wrong += count_errors(&cache.probs, &y, net.n_classes());
    }
    Ok(wrong as f64 / data.len() as f64)
}

/// Minibatch SGD with the update `w -= lr * (summed gradient) / batch`.
pub fn train_phase1(
    net: &mut RealNetwork,
    train: &EncodedDataset,
    test: Option<&EncodedDataset>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    check_dataset(net.input_width(), net.n_classes(), train)?;
    let classes = net.n_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let use_dropout = cfg.keep_input < 1.0 || cfg.keep_hidden < 1.0;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.lr_at(epoch);
        let (mut loss, mut wrong) = (0.0, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            fill_batch(train, idx, &mut x, &mut y);
            let masks = use_dropout.then(|| {
                DropoutMasks::sample(net, idx.len(), cfg.keep_input, cfg.keep_hidden, &mut rng)
            });
            let cache = forward_compressed(net, &x, idx.len(), masks.as_ref()).map_err(|e| {
                Error::Diverged {
                    epoch,
                    detail: e.to_string(),
                }
            })?;
            loss += cross_entropy(&cache.probs, &y, classes);
            wrong += count_errors(&cache.probs, &y, classes);
            let grads = backward_compressed(net, &cache, &y)?;
            net.apply_step(&grads, lr / idx.len() as f64);
        }
        let n = train.len().max(1) as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("loss = {loss}"),
            });
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            loss: loss / n,
            train_err: wrong as f64 / n,
            test_err: test.map(|t| evaluate_real(net, t)).transpose()?,
            sparsity: None,
        };
        on_epoch(&record);
        log.push(record);
    }
    Ok(log)
}
