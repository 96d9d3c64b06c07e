//! Layer composition, training loops and the audio-to-image pipeline.

use crate::backprop::{
    adam_timestep_update, hidden_delta, masked_loss, masked_loss_with_mask, output_delta,
    AdamTimeState, Hyperparams, StepLoss,
};
use crate::encoding::{encode_batch, encode_poisson, rasters_to_frames};
use crate::error::{Error, Result};
use crate::lif::{lif_forward_step, LayerStep, LifLayer, LifLayerState, NeuronConfig};
use crate::raster::{BitMatrix, SpikeRaster};
use crate::rng::{stream, Stream, StreamRng};
use crate::tensor::Matrix;

/// Samples run side by side during inference.
const INFERENCE_CHUNK: usize = 256;

/// Every knob of a training run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub alpha: f32,
    pub v_th: f32,
    /// Input spike-train duration `T`.
    pub steps: usize,
    pub lr: f32,
    pub weight_decay: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stored hidden-state duration `T_h` (audio pipeline).
    pub hidden_steps: usize,
    /// Poisson firing probability for an input of 1.0.
    pub max_rate: f32,
    /// XOR masking of the output error. Off means an all-ones mask.
    pub use_mask: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::autoencoder()
    }
}

impl TrainConfig {
    /// Image autoencoder settings: T = 15, α = 0.1, lr 5e-4, batch 100.
    pub fn autoencoder() -> Self {
        TrainConfig {
            alpha: 0.1,
            v_th: 1.0,
            steps: 15,
            lr: 5e-4,
            weight_decay: 1e-4,
            batch_size: 100,
            epochs: 1,
            seed: 0,
            hidden_steps: 15,
            max_rate: 1.0,
            use_mask: true,
        }
    }

    /// Audiocoder settings: T_audio = 60, T_h = 10, lr 5e-5, batch 50,
    /// 20 epochs.
    pub fn audiocoder() -> Self {
        TrainConfig {
            steps: 60,
            lr: 5e-5,
            batch_size: 50,
            epochs: 20,
            hidden_steps: 10,
            ..TrainConfig::autoencoder()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.neuron()?;
        self.hyperparams()?;
        if self.steps == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "steps, batch_size and epochs must all be at least 1".into(),
            ));
        }
        if self.hidden_steps == 0 || self.hidden_steps > self.steps {
            return Err(Error::Config(format!(
                "hidden_steps {} must lie in 1..={}",
                self.hidden_steps, self.steps
            )));
        }
        if !(self.max_rate > 0.0 && self.max_rate <= 1.0) {
            return Err(Error::Config(format!(
                "max_rate {} outside (0, 1]",
                self.max_rate
            )));
        }
        Ok(())
    }

    pub fn neuron(&self) -> Result<NeuronConfig> {
        NeuronConfig::new(self.alpha, self.v_th)
    }

    pub fn hyperparams(&self) -> Result<Hyperparams> {
        Hyperparams::new(self.lr, self.weight_decay)
    }
}

/// Feed-forward stack of LIF layers sharing one time axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikingNetwork {
    layers: Vec<LifLayer>,
}

impl SpikingNetwork {
    pub fn new(layers: Vec<LifLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(Error::shape(format!(
                    "layer {l} emits {} spikes but layer {} takes {}",
                    pair[0].n_out(),
                    l + 1,
                    pair[1].n_in()
                )));
            }
        }
        Ok(SpikingNetwork { layers })
    }

    /// Random fan-in-scaled weights for the given widths, e.g. `[784, 196, 784]`.
    pub fn random(topology: &[usize], neuron: NeuronConfig, rng: &mut StreamRng) -> Result<Self> {
        if topology.len() < 2 {
            return Err(Error::Config(format!(
                "topology {topology:?} has no layers"
            )));
        }
        let layers = topology
            .windows(2)
            .map(|w| LifLayer::random(w[0], w[1], neuron, rng))
            .collect::<Result<Vec<_>>>()?;
        SpikingNetwork::new(layers)
    }

    pub fn layers(&self) -> &[LifLayer] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &LifLayer {
        &self.layers[i]
    }

    pub fn into_layers(self) -> Vec<LifLayer> {
        self.layers
    }

    pub fn topology(&self) -> Vec<usize> {
        let mut t = vec![self.layers[0].n_in()];
        t.extend(self.layers.iter().map(|l| l.n_out()));
        t
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    /// Appends `other`'s layers after this network's.
    pub fn stacked(&self, other: &[LifLayer]) -> Result<SpikingNetwork> {
        let mut layers = self.layers.clone();
        layers.extend(other.iter().cloned());
        SpikingNetwork::new(layers)
    }
}

/// Per-run state of every layer in a network.
#[derive(Clone, Debug)]
pub struct NetworkState {
    pub layers: Vec<LifLayerState>,
}

impl NetworkState {
    pub fn inference(net: &SpikingNetwork, batch: usize) -> Self {
        NetworkState {
            layers: net
                .layers
                .iter()
                .map(|l| LifLayerState::new(batch, l.n_out()))
                .collect(),
        }
    }

    pub fn training(net: &SpikingNetwork, batch: usize) -> Self {
        NetworkState {
            layers: net
                .layers
                .iter()
                .map(|l| LifLayerState::with_trace(batch, l.n_out(), l.n_in()))
                .collect(),
        }
    }

    pub fn batch(&self) -> usize {
        self.layers[0].batch()
    }

    pub fn reset(&mut self) {
        self.layers.iter_mut().for_each(LifLayerState::reset);
    }
}

/// Runs one time step through every layer: layer `l`'s spikes at step `t`
/// feed layer `l + 1` at the same step.
pub fn forward_timestep(
    net: &SpikingNetwork,
    state: &mut NetworkState,
    input: &BitMatrix,
) -> Result<Vec<LayerStep>> {
    if state.layers.len() != net.layers.len() {
        return Err(Error::shape(format!(
            "state has {} layers, network has {}",
            state.layers.len(),
            net.layers.len()
        )));
    }
    let mut out: Vec<LayerStep> = Vec::with_capacity(net.layers.len());
    for (l, (layer, st)) in net.layers.iter().zip(&mut state.layers).enumerate() {
        let x = if l == 0 { input } else { &out[l - 1].spikes };
        let step = lif_forward_step(layer, st, x)?;
        out.push(step);
    }
    Ok(out)
}

/// Aggregates of one training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLog {
    pub batch_index: usize,
    pub epoch: usize,
    /// Mean over samples of the spike-count MSE between target and output.
    pub spike_mse: f64,
    /// Masked potential loss averaged over time steps.
    pub vmem_loss: f64,
    /// Fraction of zero entries in the error vector, averaged over steps.
    pub mask_sparsity: f64,
}

/// Training machinery for a two-layer network: states, traces, gradients and
/// per-batch Adam moments.
pub struct Trainer {
    state: NetworkState,
    adam: Vec<AdamTimeState>,
    grads: Vec<Matrix>,
    hp: Hyperparams,
    use_mask: bool,
}

impl Trainer {
    pub fn new(
        net: &SpikingNetwork,
        batch: usize,
        hp: Hyperparams,
        use_mask: bool,
    ) -> Result<Self> {
        if net.layers.len() != 2 {
            return Err(Error::Config(format!(
                "training supports two-layer networks, got {} layers",
                net.layers.len()
            )));
        }
        hp.validate()?;
        Ok(Trainer {
            state: NetworkState::training(net, batch),
            adam: net
                .layers
                .iter()
                .map(|l| AdamTimeState::new(l.n_out(), l.n_in()))
                .collect(),
            grads: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.n_out(), l.n_in()))
                .collect(),
            hp,
            use_mask,
        })
    }

    pub fn batch(&self) -> usize {
        self.state.batch()
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    /// Zeroes potentials, traces and Adam moments.
    pub fn begin_batch(&mut self) {
        self.state.reset();
        self.adam.iter_mut().for_each(AdamTimeState::reset);
    }

    /// One time step: forward, masked loss, deltas, trace advance and
    /// gradient extraction, Adam update, trace resets.
    pub fn step(
        &mut self,
        net: &mut SpikingNetwork,
        input: &BitMatrix,
        target: &BitMatrix,
    ) -> Result<(Vec<LayerStep>, StepLoss)> {
        let outs = forward_timestep(net, &mut self.state, input)?;
        let (hidden, output) = (&outs[0], &outs[1]);
        let v_th_out = net.layers[1].neuron.v_th;
        let loss = if self.use_mask {
            masked_loss(target, &output.spikes, &output.v_pre, v_th_out)?
        } else {
            let all = BitMatrix::ones(target.rows(), target.cols());
            masked_loss_with_mask(&all, target, &output.v_pre, v_th_out)?
        };
        if !loss.loss.is_finite() {
            return Err(Error::Numerical {
                layer: 1,
                batch: None,
                step: None,
                detail: format!("loss is {}", loss.loss),
            });
        }

        let delta2 = output_delta(&loss);
        let delta_h = hidden_delta(
            &delta2,
            &net.layers[1].weights,
            &hidden.v_pre,
            net.layers[0].neuron.v_th,
        )?;

        let [st1, st2] = &mut self.state.layers[..] else {
            unreachable!("trainer holds two layers")
        };
        let [g1, g2] = &mut self.grads[..] else {
            unreachable!("trainer holds two layers")
        };
        st2.trace.as_mut().expect("training state").step_gradient(
            net.layers[1].neuron.alpha,
            &hidden.spikes,
            &delta2,
            &output.spikes,
            g2,
        )?;
        st1.trace.as_mut().expect("training state").step_gradient(
            net.layers[0].neuron.alpha,
            input,
            &delta_h,
            &hidden.spikes,
            g1,
        )?;

        for l in [1, 0] {
            adam_timestep_update(
                &mut net.layers[l].weights,
                &self.grads[l],
                &mut self.adam[l],
                &self.hp,
                l,
            )?;
        }
        Ok((outs, loss))
    }

    /// Trains on one batch. `target(t)` yields the `[batch x n_out]` target
    /// frame for step `t`.
    pub fn train_batch<'a>(
        &mut self,
        net: &mut SpikingNetwork,
        inputs: &[BitMatrix],
        target: impl Fn(usize) -> &'a BitMatrix,
        batch_index: usize,
        epoch: usize,
    ) -> Result<BatchLog> {
        self.begin_batch();
        let batch = self.batch();
        let n_out = net.n_out();
        let mut target_counts = vec![0u32; batch * n_out];
        let mut output_counts = vec![0u32; batch * n_out];
        let (mut vmem_loss, mut sparsity) = (0.0, 0.0);

        for (t, input) in inputs.iter().enumerate() {
            let tgt = target(t);
            let (outs, loss) = self.step(net, input, tgt).map_err(|e| match e {
                Error::Numerical { layer, detail, .. } => Error::Numerical {
                    layer,
                    batch: Some(batch_index),
                    step: Some(t),
                    detail,
                },
                other => other,
            })?;
            vmem_loss += loss.loss;
            sparsity += loss.mask_sparsity;
            let out = &outs[1].spikes;
            for b in 0..batch {
                for i in tgt.ones_in_row(b) {
                    target_counts[b * n_out + i] += 1;
                }
                for i in out.ones_in_row(b) {
                    output_counts[b * n_out + i] += 1;
                }
            }
        }

        let steps = inputs.len().max(1) as f64;
        let sq: f64 = target_counts
            .iter()
            .zip(&output_counts)
            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
            .sum();
        Ok(BatchLog {
            batch_index,
            epoch,
            spike_mse: sq / (batch * n_out).max(1) as f64,
            vmem_loss: vmem_loss / steps,
            mask_sparsity: sparsity / steps,
        })
    }
}

/// Fits `net` over `n` samples in fixed order. `encode(range, rng)` returns
/// the per-step input frames of a batch and `targets(range, inputs)` its
/// per-step target frames.
#[allow(clippy::too_many_arguments)]
fn fit(
    net: &mut SpikingNetwork,
    n: usize,
    cfg: &TrainConfig,
    mut encode: impl FnMut(std::ops::Range<usize>, &mut StreamRng) -> Result<Vec<BitMatrix>>,
    targets: impl Fn(std::ops::Range<usize>, &[BitMatrix]) -> Vec<BitMatrix>,
    targets_are_inputs: bool,
    mut on_batch: impl FnMut(&BatchLog),
    mut on_epoch: impl FnMut(usize, &SpikingNetwork, &[BatchLog]) -> Result<()>,
) -> Result<Vec<BatchLog>> {
    cfg.validate()?;
    let hp = cfg.hyperparams()?;
    let mut rng = stream(cfg.seed, Stream::Encoding);
    let mut trainer: Option<Trainer> = None;
    let mut log = Vec::new();
    let mut batch_index = 0;
    for epoch in 0..cfg.epochs {
        let epoch_start = log.len();
        for start in (0..n).step_by(cfg.batch_size) {
            let range = start..(start + cfg.batch_size).min(n);
            let batch = range.len();
            if trainer.as_ref().map(Trainer::batch) != Some(batch) {
                // Drop the old traces before allocating new ones.
                drop(trainer.take());
                trainer = Some(Trainer::new(net, batch, hp, cfg.use_mask)?);
            }
            let tr = trainer.as_mut().expect("allocated above");
            let inputs = encode(range.clone(), &mut rng)?;
            let entry = if targets_are_inputs {
                tr.train_batch(net, &inputs, |t| &inputs[t], batch_index, epoch)?
            } else {
                let tgt = targets(range, &inputs);
                let period = tgt.len();
                tr.train_batch(net, &inputs, |t| &tgt[t % period], batch_index, epoch)?
            };
            on_batch(&entry);
            log.push(entry);
            batch_index += 1;
        }
        on_epoch(epoch, net, &log[epoch_start..])?;
    }
    Ok(log)
}

/// Trains an `n_in - hidden - n_in` autoencoder whose target at every step is
/// the input spike frame of that same step.
pub fn train_autoencoder<V: AsRef<[f32]>>(
    images: &[V],
    hidden: usize,
    cfg: &TrainConfig,
    on_batch: impl FnMut(&BatchLog),
) -> Result<(SpikingNetwork, Vec<BatchLog>)> {
    let width = match images.first() {
        Some(img) => img.as_ref().len(),
        None => return Err(Error::Consistency("no training images".into())),
    };
    cfg.validate()?;
    let mut net = SpikingNetwork::random(
        &[width, hidden, width],
        cfg.neuron()?,
        &mut stream(cfg.seed, Stream::Init),
    )?;
    let log = train_autoencoder_from(&mut net, images, cfg, on_batch)?;
    Ok((net, log))
}

/// Continues training an existing autoencoder.
pub fn train_autoencoder_from<V: AsRef<[f32]>>(
    net: &mut SpikingNetwork,
    images: &[V],
    cfg: &TrainConfig,
    on_batch: impl FnMut(&BatchLog),
) -> Result<Vec<BatchLog>> {
    for (i, img) in images.iter().enumerate() {
        if img.as_ref().len() != net.n_in() {
            return Err(Error::shape(format!(
                "image {i} has {} pixels, network takes {}",
                img.as_ref().len(),
                net.n_in()
            )));
        }
    }
    if net.n_in() != net.n_out() {
        return Err(Error::shape(format!(
            "autoencoder output width {} differs from input width {}",
            net.n_out(),
            net.n_in()
        )));
    }
    fit(
        net,
        images.len(),
        cfg,
        |range, rng| encode_batch(&images[range], cfg.steps, cfg.max_rate, rng),
        |_, inputs| inputs.to_vec(),
        true,
        on_batch,
        |_, _, _| Ok(()),
    )
}

/// Truncated hidden-layer spike map: the compressed cross-modal code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiddenStateMap {
    pub raster: SpikeRaster,
}

impl HiddenStateMap {
    pub fn n_hidden(&self) -> usize {
        self.raster.n_neurons()
    }

    pub fn hidden_steps(&self) -> usize {
        self.raster.steps()
    }

    /// Size of an image of `pixels` values at `bits_per_pixel` over the size
    /// of this map at one bit per entry.
    pub fn compression_ratio(&self, pixels: usize, bits_per_pixel: usize) -> f64 {
        (pixels * bits_per_pixel) as f64 / (self.n_hidden() * self.hidden_steps()) as f64
    }
}

/// Input and output rasters of one inference run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inference {
    pub input: SpikeRaster,
    pub output: SpikeRaster,
}

/// Runs each sample through `net` for `steps` steps from zero state.
///
/// Samples are encoded in order from `rng`, so a sample gets the same spikes
/// whether it runs alone or in a batch after the same predecessors.
pub fn infer<V: AsRef<[f32]> + Sync>(
    net: &SpikingNetwork,
    samples: &[V],
    steps: usize,
    max_rate: f32,
    rng: &mut StreamRng,
) -> Result<Vec<Inference>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(INFERENCE_CHUNK) {
        for (i, s) in chunk.iter().enumerate() {
            if s.as_ref().len() != net.n_in() {
                return Err(Error::shape(format!(
                    "sample {} has width {}, network takes {}",
                    out.len() + i,
                    s.as_ref().len(),
                    net.n_in()
                )));
            }
        }
        let rasters = chunk
            .iter()
            .map(|s| encode_poisson(s.as_ref(), steps, max_rate, rng))
            .collect::<Result<Vec<_>>>()?;
        let frames = rasters_to_frames(&rasters);
        let mut state = NetworkState::inference(net, chunk.len());
        let mut outputs: Vec<SpikeRaster> = (0..chunk.len())
            .map(|_| SpikeRaster::zeros(net.n_out(), steps))
            .collect();
        for (t, frame) in frames.iter().enumerate() {
            let layers = forward_timestep(net, &mut state, frame)?;
            let spikes = &layers[layers.len() - 1].spikes;
            for (b, o) in outputs.iter_mut().enumerate() {
                o.time_major_mut().copy_row_from(t, spikes, b);
            }
        }
        out.extend(
            rasters
                .into_iter()
                .zip(outputs)
                .map(|(input, output)| Inference { input, output }),
        );
    }
    Ok(out)
}

/// Runs the encoder layer alone on a Poisson-encoded image for `steps` steps
/// and keeps the first `hidden_steps` columns of its spikes.
pub fn extract_hidden_state(
    encoder: &LifLayer,
    image: &[f32],
    steps: usize,
    hidden_steps: usize,
    max_rate: f32,
    rng: &mut StreamRng,
) -> Result<HiddenStateMap> {
    let mut maps = extract_hidden_states(encoder, &[image], steps, hidden_steps, max_rate, rng)?;
    Ok(maps.pop().expect("one image in, one map out"))
}

/// Batched [`extract_hidden_state`]; identical to calling it per image in
/// order with the same `rng`.
pub fn extract_hidden_states<V: AsRef<[f32]> + Sync>(
    encoder: &LifLayer,
    images: &[V],
    steps: usize,
    hidden_steps: usize,
    max_rate: f32,
    rng: &mut StreamRng,
) -> Result<Vec<HiddenStateMap>> {
    if hidden_steps > steps {
        return Err(Error::Config(format!(
            "hidden state of {hidden_steps} steps exceeds the {steps}-step run"
        )));
    }
    let net = SpikingNetwork::new(vec![encoder.clone()])?;
    infer(&net, images, steps, max_rate, rng)?
        .into_iter()
        .map(|r| {
            Ok(HiddenStateMap {
                raster: r.output.prefix(hidden_steps)?,
            })
        })
        .collect()
}

/// Trains an `n_audio - hidden - n_code` audiocoder to reproduce each
/// sample's stored hidden-state map. The map's `T_h` columns are repeated
/// cyclically over the `cfg.steps` input steps.
///
/// `on_epoch` is called after every epoch with the network and that epoch's
/// batch logs.
pub fn train_audiocoder<V: AsRef<[f32]>>(
    audio: &[V],
    targets: &[HiddenStateMap],
    hidden: usize,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(usize, &SpikingNetwork, &[BatchLog]) -> Result<()>,
) -> Result<(SpikingNetwork, Vec<BatchLog>)> {
    if audio.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} audio samples but {} target maps",
            audio.len(),
            targets.len()
        )));
    }
    let (Some(first_audio), Some(first_map)) = (audio.first(), targets.first()) else {
        return Err(Error::Consistency("no audiocoder training pairs".into()));
    };
    let n_audio = first_audio.as_ref().len();
    let n_code = first_map.n_hidden();
    let period = first_map.hidden_steps();
    for (i, (a, m)) in audio.iter().zip(targets).enumerate() {
        if a.as_ref().len() != n_audio {
            return Err(Error::shape(format!(
                "audio sample {i} has a different width"
            )));
        }
        if m.n_hidden() != n_code || m.hidden_steps() != period {
            return Err(Error::shape(format!(
                "target map {i} has a different shape"
            )));
        }
    }
    cfg.validate()?;
    let mut net = SpikingNetwork::random(
        &[n_audio, hidden, n_code],
        cfg.neuron()?,
        &mut stream(cfg.seed, Stream::Init),
    )?;
    let log = fit(
        &mut net,
        audio.len(),
        cfg,
        |range, rng| encode_batch(&audio[range], cfg.steps, cfg.max_rate, rng),
        |range, _| {
            let rasters: Vec<SpikeRaster> =
                targets[range].iter().map(|m| m.raster.clone()).collect();
            rasters_to_frames(&rasters)
        },
        false,
        |_| {},
        on_epoch,
    )?;
    Ok((net, log))
}

/// Audio-to-image synthesis: the audiocoder's output spikes drive the frozen
/// decoder layer step by step; the decoder's spikes summed over time form the
/// image.
pub fn synthesize_image(
    audio_features: &[f32],
    audiocoder: &SpikingNetwork,
    decoder: &LifLayer,
    steps: usize,
    max_rate: f32,
    rng: &mut StreamRng,
) -> Result<Vec<f32>> {
    let mut out = synthesize_batch(&[audio_features], audiocoder, decoder, steps, max_rate, rng)?;
    Ok(out
        .pop()
        .expect("one sample in, one image out")
        .counts_f32())
}

/// Synthesizes every sample; returns the decoder's output rasters.
pub fn synthesize_batch<V: AsRef<[f32]> + Sync>(
    audio: &[V],
    audiocoder: &SpikingNetwork,
    decoder: &LifLayer,
    steps: usize,
    max_rate: f32,
    rng: &mut StreamRng,
) -> Result<Vec<SpikeRaster>> {
    let pipeline = audiocoder.stacked(std::slice::from_ref(decoder))?;
    Ok(infer(&pipeline, audio, steps, max_rate, rng)?
        .into_iter()
        .map(|r| r.output)
        .collect())
}
