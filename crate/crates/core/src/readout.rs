//! Feedforward readout trained with the Manhattan rule.
//!
//! Weights live in `[-1, 1]`, the affine image of a synapse's conductance
//! range `[g_min, g_max]`. A training step never moves a weight by anything
//! other than a single device pulse: `w <- clamp(w - lr(dir) * sign(grad))`
//! where `lr(dir) = 2 / n_pulses` for the potentiation or depression branch.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{PulseDirection, SynapseParams};
use crate::error::{shape, Error, Result};
use crate::scalar::{clamp, Scalar};
use crate::seed::{rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Softmax,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    fn affine(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(|(row, &b)| {
            row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi)
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutNetwork<T> {
    layers: Vec<Layer<T>>,
    output: OutputKind,
}

impl<T: Scalar> ReadoutNetwork<T> {
    /// Network with all weights and biases at zero. `sizes` lists every layer
    /// width from input to output.
    pub fn zeros(sizes: &[usize], output: OutputKind) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(crate::error::invalid("sizes", "need at least input and output widths, all positive"));
        }
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![T::zero(); w[0] * w[1]],
                biases: vec![T::zero(); w[1]],
            })
            .collect();
        Ok(Self { layers, output })
    }

    /// Glorot-uniform weights (clipped to the device range), zero biases.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], output: OutputKind, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        for layer in &mut net.layers {
            let limit = T::lit((6.0 / (layer.inputs + layer.outputs) as f64).sqrt().min(1.0));
            for w in &mut layer.weights {
                *w = (T::unit(rng) * T::lit(2.0) - T::one()) * limit;
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer<T>>, output: OutputKind) -> Result<Self> {
        if layers.is_empty() {
            return Err(crate::error::invalid("layers", "empty"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 || l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(shape(format!("consistent layer {i}"), format!("{}x{}", l.outputs, l.inputs)));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(shape(layers[i - 1].outputs, l.inputs));
            }
            if l.weights.iter().chain(&l.biases).any(|w| !(w.abs() <= T::one())) {
                return Err(Error::Domain(format!("layer {i} has a parameter outside [-1, 1]")));
            }
        }
        Ok(Self { layers, output })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn output_kind(&self) -> OutputKind {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    /// Number of trainable parameters, weights plus biases.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| (l.inputs + 1) * l.outputs).sum()
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(shape(format!("{} inputs", self.input_dim()), format!("{} inputs", x.len())));
        }
        Ok(())
    }

    /// Pre-activations of every layer; hidden layers use ReLU.
    fn trace(&self, x: &[T]) -> Vec<Vec<T>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.affine(&act, &mut z);
            if i + 1 < self.layers.len() {
                act = z.iter().map(|&v| v.max(T::zero())).collect();
            }
            pre.push(z);
        }
        pre
    }

    fn finish(&self, z: &[T]) -> Vec<T> {
        match self.output {
            OutputKind::Identity => z.to_vec(),
            OutputKind::Softmax => softmax(z),
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let pre = self.trace(x);
        Ok(self.finish(pre.last().unwrap()))
    }

    pub fn predict_class(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    pub fn loss(&self, x: &[T], target: &Target<T>, loss: Loss) -> Result<T> {
        self.check_input(x)?;
        let pre = self.trace(x);
        let z = pre.last().unwrap();
        loss_value(self.output, z, target, loss)
    }
}

fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + z.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
    z.iter().map(|&v| v - lse).collect()
}

pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target<T> {
    Class(usize),
    Values(Vec<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `-ln softmax(z)[target]`.
    CrossEntropy,
    /// `sum (y - t)^2` over outputs.
    Mse,
}

impl FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_entropy" => Ok(Loss::CrossEntropy),
            "mse" => Ok(Loss::Mse),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

fn target_values<T: Scalar>(target: &Target<T>, dim: usize) -> Result<Vec<T>> {
    match target {
        Target::Values(v) if v.len() == dim => Ok(v.clone()),
        Target::Values(v) => Err(shape(format!("{dim} targets"), format!("{} targets", v.len()))),
        Target::Class(c) if *c < dim => {
            let mut v = vec![T::zero(); dim];
            v[*c] = T::one();
            Ok(v)
        }
        Target::Class(c) => Err(shape(format!("class < {dim}"), c)),
    }
}

fn loss_value<T: Scalar>(output: OutputKind, z: &[T], target: &Target<T>, loss: Loss) -> Result<T> {
    let t = target_values(target, z.len())?;
    Ok(match loss {
        Loss::CrossEntropy => -log_softmax(z).iter().zip(&t).map(|(&l, &ti)| ti * l).sum::<T>(),
        Loss::Mse => {
            let y = match output {
                OutputKind::Identity => z.to_vec(),
                OutputKind::Softmax => softmax(z),
            };
            y.iter().zip(&t).map(|(&a, &b)| (a - b) * (a - b)).sum()
        }
    })
}

/// `dL/dz` for the output pre-activation.
fn output_delta<T: Scalar>(output: OutputKind, z: &[T], target: &Target<T>, loss: Loss) -> Result<Vec<T>> {
    let t = target_values(target, z.len())?;
    let two = T::lit(2.0);
    Ok(match (loss, output) {
        (Loss::CrossEntropy, _) => softmax(z).iter().zip(&t).map(|(&p, &ti)| p - ti).collect(),
        (Loss::Mse, OutputKind::Identity) => z.iter().zip(&t).map(|(&y, &ti)| two * (y - ti)).collect(),
        (Loss::Mse, OutputKind::Softmax) => {
            let p = softmax(z);
            let g: Vec<T> = p.iter().zip(&t).map(|(&pi, &ti)| two * (pi - ti)).collect();
            let dot: T = g.iter().zip(&p).map(|(&a, &b)| a * b).sum();
            p.iter().zip(&g).map(|(&pi, &gi)| pi * (gi - dot)).collect()
        }
    })
}

/// Gradient structure mirroring the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &ReadoutNetwork<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: vec![T::zero(); l.weights.len()],
                    biases: vec![T::zero(); l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, &y)| *x += y);
            a.biases.iter_mut().zip(&b.biases).for_each(|(x, &y)| *x += y);
        }
    }

    pub fn scale(&mut self, c: T) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|x| *x *= c);
        }
    }

    fn matches(&self, net: &ReadoutNetwork<T>) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len()
            })
    }
}

/// Exact backpropagated gradients of `loss` at `(x, target)`, plus the loss value.
pub fn gradients<T: Scalar>(
    net: &ReadoutNetwork<T>,
    x: &[T],
    target: &Target<T>,
    loss: Loss,
) -> Result<(Gradients<T>, T)> {
    net.check_input(x)?;
    let pre = net.trace(x);
    let z_out = pre.last().unwrap();
    let value = loss_value(net.output, z_out, target, loss)?;
    let mut delta = output_delta(net.output, z_out, target, loss)?;
    let mut grads = Gradients::zeros_like(net);
    for li in (0..net.layers.len()).rev() {
        let layer = &net.layers[li];
        let input: Vec<T> = if li == 0 {
            x.to_vec()
        } else {
            pre[li - 1].iter().map(|&v| v.max(T::zero())).collect()
        };
        let g = &mut grads.layers[li];
        for (o, &d) in delta.iter().enumerate() {
            g.biases[o] = d;
            let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (gw, &xi) in row.iter_mut().zip(&input) {
                *gw = d * xi;
            }
        }
        if li > 0 {
            let mut next = vec![T::zero(); layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (n, &w) in next.iter_mut().zip(row) {
                    *n += w * d;
                }
            }
            for (n, &z) in next.iter_mut().zip(&pre[li - 1]) {
                if z <= T::zero() {
                    *n = T::zero();
                }
            }
            delta = next;
        }
    }
    Ok((grads, value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    #[default]
    Offline,
    Online,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct TrainConfig<T> {
    pub epochs: usize,
    pub batch_size: usize,
    pub mode: TrainMode,
    pub loss: Loss,
    pub noise_enabled: bool,
    pub seed: u64,
    pub synapse: SynapseParams<T>,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            mode: TrainMode::Offline,
            loss: Loss::CrossEntropy,
            noise_enabled: true,
            seed: 0,
            synapse: SynapseParams::default(),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    /// Batch size actually used: online training updates after every sample.
    pub fn effective_batch(&self) -> usize {
        match self.mode {
            TrainMode::Online => 1,
            TrainMode::Offline => self.batch_size.max(1),
        }
    }
}

/// Applies one sign-based device-pulse update to every parameter with a
/// nonzero gradient. Returns the number of parameters that moved.
pub fn manhattan_update<T: Scalar, R: Rng + ?Sized>(
    net: &mut ReadoutNetwork<T>,
    grads: &Gradients<T>,
    synapse: &SynapseParams<T>,
    noise_enabled: bool,
    rng: &mut R,
) -> Result<usize> {
    if !grads.matches(net) {
        return Err(shape("gradients shaped like the network", "mismatched gradients"));
    }
    let lr_pot = synapse.weight_step(PulseDirection::Potentiate);
    let lr_dep = synapse.weight_step(PulseDirection::Depress);
    let sigma = if noise_enabled { synapse.c2c_sigma } else { T::zero() };
    let (lo, hi) = (-T::one(), T::one());
    let mut moved = 0;
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
        let grads = g.weights.iter().chain(&g.biases);
        for (w, &gv) in params.zip(grads) {
            if gv == T::zero() || gv.is_nan() {
                continue;
            }
            // Descent: a positive gradient lowers the weight (depression).
            let step = if gv > T::zero() { -lr_dep } else { lr_pot };
            let next = clamp(*w + step * T::noise_factor(sigma, rng), lo, hi);
            if next != *w {
                moved += 1;
            }
            *w = next;
        }
    }
    Ok(moved)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss over the epoch's samples, measured before each update.
    pub loss: f64,
    /// Training accuracy for class targets, `None` for regression.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,loss,accuracy")?;
        for e in &self.epochs {
            let acc = e.accuracy.map(|a| a.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{}", e.epoch, e.loss, acc)?;
        }
        Ok(())
    }
}

pub type Sample<T> = (Vec<T>, Target<T>);

/// Stateful trainer so callers can interleave evaluation between epochs.
pub struct Trainer<T> {
    config: TrainConfig<T>,
    rng: SimRng,
    epoch: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(config: TrainConfig<T>) -> Result<Self> {
        config.synapse.validate()?;
        let rng = rng_from_seed(config.seed);
        Ok(Self { config, rng, epoch: 0 })
    }

    pub fn config(&self) -> &TrainConfig<T> {
        &self.config
    }

    /// One pass over `data`. Offline mode shuffles and updates once per batch;
    /// online mode streams samples in order and updates after each one.
    /// `on_sample` sees the pre-update loss of every sample, in stream order.
    pub fn epoch_with<F>(&mut self, net: &mut ReadoutNetwork<T>, data: &[Sample<T>], mut on_sample: F) -> Result<EpochStats>
    where
        F: FnMut(usize, T),
    {
        if data.is_empty() {
            return Err(Error::EmptyInput("training set is empty".into()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        if self.config.mode == TrainMode::Offline {
            order.shuffle(&mut self.rng);
        }
        let batch = self.config.effective_batch();
        let mut total_loss = 0.0;
        let mut correct = 0usize;
        let mut classified = 0usize;
        for chunk in order.chunks(batch) {
            let mut acc = Gradients::zeros_like(net);
            for &i in chunk {
                let (x, target) = &data[i];
                let (g, l) = gradients(net, x, target, self.config.loss)?;
                if let Target::Class(c) = target {
                    classified += 1;
                    if net.predict_class(x)? == *c {
                        correct += 1;
                    }
                }
                on_sample(i, l);
                total_loss += l.to_f64_lossy();
                acc.accumulate(&g);
            }
            manhattan_update(net, &acc, &self.config.synapse, self.config.noise_enabled, &mut self.rng)?;
        }
        self.epoch += 1;
        Ok(EpochStats {
            epoch: self.epoch,
            loss: total_loss / data.len() as f64,
            accuracy: (classified > 0).then(|| correct as f64 / classified as f64),
        })
    }

    pub fn epoch(&mut self, net: &mut ReadoutNetwork<T>, data: &[Sample<T>]) -> Result<EpochStats> {
        self.epoch_with(net, data, |_, _| {})
    }
}

/// Trains for `config.epochs` epochs and returns the per-epoch history.
pub fn train<T: Scalar>(net: &mut ReadoutNetwork<T>, data: &[Sample<T>], config: &TrainConfig<T>) -> Result<History> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    let mut trainer = Trainer::new(config.clone())?;
    let mut history = History::default();
    for _ in 0..config.epochs {
        history.epochs.push(trainer.epoch(net, data)?);
    }
    Ok(history)
}

/// Versioned JSON dump of a trained readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub network: ReadoutNetwork<T>,
}

pub const CHECKPOINT_FORMAT: &str = "memrc-readout";
pub const CHECKPOINT_VERSION: u32 = 1;

impl<T: Scalar + Serialize + serde::de::DeserializeOwned> Checkpoint<T> {
    pub fn new(network: ReadoutNetwork<T>, config_hash: impl Into<String>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config_hash: config_hash.into(),
            network,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint {} v{}", c.format, c.version)));
        }
        let network = ReadoutNetwork::from_layers(c.network.layers, c.network.output)?;
        Ok(Self { network, ..c })
    }
}
