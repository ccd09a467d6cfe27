//! Layer stacks for the two towers and the fusion head, with shape
//! propagation at build time and hand-chained forward/backward passes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Modality, ModelConfig, AUDIO_BLOCKS, NUM_CLASSES, TEXT_BLOCKS};
use crate::error::{Error, Result};
use crate::nn::{self, ConvLayer, DenseLayer, DropoutSpec, Mode, PoolSpec};
use crate::optim::{cross_entropy, softmax_ce_grad};
use crate::params::ParamSet;
use crate::seed;
use crate::tensor::Tensor;
use crate::text::EMBEDDING_DIM;

const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv { kernel: String, bias: String },
    Relu,
    /// Zero-pads bottom/right so a following pool cannot produce an empty map.
    PadTo { min_h: usize, min_w: usize },
    MaxPool(PoolSpec),
    Flatten,
    Dense { weight: String, bias: String },
    Dropout { rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerEntry {
    pub label: String,
    pub layer: Layer,
    pub output_shape: Vec<usize>,
}

/// A linear chain of layers with every intermediate shape resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerEntry>,
}

impl Stack {
    pub fn output_shape(&self) -> &[usize] {
        self.layers
            .last()
            .map(|l| l.output_shape.as_slice())
            .unwrap_or(&self.input_shape)
    }

    /// `(label, shape)` after every layer.
    pub fn ledger(&self) -> Vec<(&str, &[usize])> {
        self.layers
            .iter()
            .map(|l| (l.label.as_str(), l.output_shape.as_slice()))
            .collect()
    }

    /// Output shapes of the per-block pooling layers, in order.
    pub fn block_pool_shapes(&self) -> Vec<&[usize]> {
        self.layers
            .iter()
            .filter(|l| matches!(l.layer, Layer::MaxPool(_)) && l.label.contains(".block"))
            .map(|l| l.output_shape.as_slice())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
    pub is_bias: bool,
}

struct Builder<'a> {
    prefix: String,
    shape: Vec<usize>,
    input_shape: Vec<usize>,
    layers: Vec<LayerEntry>,
    specs: &'a mut Vec<ParamSpec>,
}

impl<'a> Builder<'a> {
    fn new(prefix: &str, input_shape: Vec<usize>, specs: &'a mut Vec<ParamSpec>) -> Self {
        Self {
            prefix: prefix.to_owned(),
            shape: input_shape.clone(),
            input_shape,
            layers: Vec::new(),
            specs,
        }
    }

    fn push(&mut self, label: &str, layer: Layer) {
        self.layers.push(LayerEntry {
            label: format!("{}.{label}", self.prefix),
            layer,
            output_shape: self.shape.clone(),
        });
    }

    fn param(&mut self, name: &str, shape: Vec<usize>, fan_in: usize, fan_out: usize, is_bias: bool) -> String {
        let full = format!("{}.{name}", self.prefix);
        self.specs.push(ParamSpec {
            name: full.clone(),
            shape,
            fan_in,
            fan_out,
            is_bias,
        });
        full
    }

    fn conv(&mut self, label: &str, cout: usize) {
        let cin = self.shape[2];
        let (fi, fo) = (KERNEL * KERNEL * cin, KERNEL * KERNEL * cout);
        let kernel = self.param(&format!("{label}.kernel"), vec![KERNEL, KERNEL, cin, cout], fi, fo, false);
        let bias = self.param(&format!("{label}.bias"), vec![cout], fi, fo, true);
        self.shape[2] = cout;
        self.push(label, Layer::Conv { kernel, bias });
    }

    fn relu(&mut self, label: &str) {
        self.push(label, Layer::Relu);
    }

    fn pool(&mut self, label: &str, spec: PoolSpec) {
        let (h, w) = (self.shape[0], self.shape[1]);
        if h < spec.ph || w < spec.pw {
            self.shape[0] = h.max(spec.ph);
            self.shape[1] = w.max(spec.pw);
            self.push(
                &format!("{label}_pad"),
                Layer::PadTo {
                    min_h: spec.ph,
                    min_w: spec.pw,
                },
            );
        }
        let (oh, ow) = spec
            .output_extent(self.shape[0], self.shape[1])
            .expect("padding guarantees a non-empty pool output");
        self.shape[0] = oh;
        self.shape[1] = ow;
        self.push(label, Layer::MaxPool(spec));
    }

    fn flatten(&mut self, label: &str) {
        self.shape = vec![self.shape.iter().product()];
        self.push(label, Layer::Flatten);
    }

    fn dense(&mut self, label: &str, out: usize) {
        let inp = self.shape[0];
        let weight = self.param(&format!("{label}.weight"), vec![inp, out], inp, out, false);
        let bias = self.param(&format!("{label}.bias"), vec![out], inp, out, true);
        self.shape = vec![out];
        self.push(label, Layer::Dense { weight, bias });
    }

    fn dropout(&mut self, label: &str, rate: f64) {
        self.push(label, Layer::Dropout { rate });
    }

    fn finish(self) -> Stack {
        Stack {
            input_shape: self.input_shape,
            layers: self.layers,
        }
    }
}

fn build_tower(
    config: &ModelConfig,
    prefix: &str,
    input_shape: Vec<usize>,
    blocks: &[(usize, PoolSpec)],
    specs: &mut Vec<ParamSpec>,
) -> Stack {
    let mut b = Builder::new(prefix, input_shape, specs);
    for (i, &(channels, pool)) in blocks.iter().take(config.depth).enumerate() {
        let n = i + 1;
        b.conv(&format!("block{n}.conv"), config.scaled_channels(channels));
        b.relu(&format!("block{n}.relu"));
        b.pool(&format!("block{n}.pool"), pool);
    }
    let (h, w) = (b.shape[0], b.shape[1]);
    if (h, w) != (1, 1) {
        b.pool("global_pool", PoolSpec::new(h, w));
    }
    b.flatten("flatten");
    if b.shape[0] != config.tower_output() {
        b.dense("proj", config.tower_output());
    }
    b.finish()
}

/// Audio tower over a `[mels × frames × 1]` spectrogram.
pub fn build_audio_tower(config: &ModelConfig, specs: &mut Vec<ParamSpec>) -> Result<Stack> {
    config.validate()?;
    let [h, w] = config.audio_input;
    Ok(build_tower(config, Modality::Audio.tag(), vec![h, w, 1], &AUDIO_BLOCKS, specs))
}

/// Text tower over a `[lines × words × 100]` lyrics tensor.
pub fn build_text_tower(config: &ModelConfig, specs: &mut Vec<ParamSpec>) -> Result<Stack> {
    config.validate()?;
    let g = config.text_grid;
    if g.lines < super::config::MIN_TEXT_EXTENT || g.words < super::config::MIN_TEXT_EXTENT {
        return Err(Error::config(format!("text grid {}×{} too small", g.lines, g.words)));
    }
    Ok(build_tower(
        config,
        Modality::Lyrics.tag(),
        vec![g.lines, g.words, EMBEDDING_DIM],
        &TEXT_BLOCKS,
        specs,
    ))
}

/// Dense cascade over the concatenated tower outputs, ending in class logits.
pub fn build_fusion_head(config: &ModelConfig, specs: &mut Vec<ParamSpec>) -> Result<Stack> {
    config.validate()?;
    let mut b = Builder::new("head", vec![config.fusion_width()], specs);
    for (i, width) in config.head_widths().into_iter().enumerate() {
        let n = i + 1;
        b.dense(&format!("dense{n}"), width);
        b.relu(&format!("relu{n}"));
        b.dropout(&format!("dropout{n}"), config.dropout);
    }
    b.dense("out", NUM_CLASSES);
    Ok(b.finish())
}

/// Inputs for one sample; modalities absent from the config are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct Inputs<'a> {
    pub audio: Option<&'a Tensor>,
    pub lyrics: Option<&'a Tensor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Eval,
    /// Dropout active, drawing from a stream seeded with `seed`.
    Train { seed: u64 },
}

#[derive(Debug, Clone)]
struct StackCache {
    inputs: Vec<Tensor>,
    masks: Vec<Option<Tensor>>,
}

#[derive(Debug, Clone)]
struct Cache {
    params_version: u64,
    audio: Option<StackCache>,
    text: Option<StackCache>,
    head: StackCache,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: Tensor,
    pub probs: Tensor,
    cache: Option<Cache>,
}

impl ForwardPass {
    pub fn predicted(&self) -> usize {
        self.probs.argmax()
    }
}

/// A fully resolved MoodNet variant.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: ModelConfig,
    audio: Option<Stack>,
    text: Option<Stack>,
    head: Stack,
    specs: Vec<ParamSpec>,
}

impl Network {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut specs = Vec::new();
        let audio = if config.has(Modality::Audio) {
            Some(build_audio_tower(config, &mut specs)?)
        } else {
            None
        };
        let text = if config.has(Modality::Lyrics) {
            Some(build_text_tower(config, &mut specs)?)
        } else {
            None
        };
        let head = build_fusion_head(config, &mut specs)?;
        Ok(Self {
            config: config.clone(),
            audio,
            text,
            head,
            specs,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tower(&self, modality: Modality) -> Option<&Stack> {
        match modality {
            Modality::Audio => self.audio.as_ref(),
            Modality::Lyrics => self.text.as_ref(),
        }
    }

    pub fn head(&self) -> &Stack {
        &self.head
    }

    pub fn param_specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn num_params(&self) -> usize {
        self.specs.iter().map(|s| s.shape.iter().product::<usize>()).sum()
    }

    /// Glorot-uniform weights seeded per parameter name, zero biases.
    pub fn init_params(&self) -> Result<ParamSet> {
        let mut params = ParamSet::new();
        for spec in &self.specs {
            let t = if spec.is_bias {
                Tensor::zeros(&spec.shape)?
            } else {
                let s = seed::derive(self.config.seed, &[seed::name_hash(&spec.name)]);
                nn::glorot_uniform(&spec.shape, spec.fan_in, spec.fan_out, s)?
            };
            params.insert(spec.name.clone(), t)?;
        }
        Ok(params)
    }

    /// Errors unless `params` has exactly the names and shapes this network needs.
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        if params.len() != self.specs.len() {
            return Err(Error::shape(format!(
                "network needs {} parameter tensors, got {}",
                self.specs.len(),
                params.len()
            )));
        }
        for (spec, (name, t)) in self.specs.iter().zip(params.iter()) {
            if spec.name != name || spec.shape != t.shape() {
                return Err(Error::shape(format!(
                    "parameter {name} {:?} where {} {:?} was expected",
                    t.shape(),
                    spec.name,
                    spec.shape
                )));
            }
        }
        Ok(())
    }

    pub fn forward(&self, params: &ParamSet, inputs: Inputs<'_>, mode: RunMode) -> Result<ForwardPass> {
        let train = matches!(mode, RunMode::Train { .. });
        let mut rng = match mode {
            RunMode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            RunMode::Eval => None,
        };

        let mut pieces = Vec::with_capacity(2);
        let mut audio_cache = None;
        let mut text_cache = None;
        if let Some(stack) = &self.audio {
            let x = inputs
                .audio
                .ok_or_else(|| Error::input("config expects audio but no spectrogram was given"))?;
            let (y, c) = run_stack(stack, params, x, rng.as_mut(), train)?;
            pieces.push(y);
            audio_cache = c;
        }
        if let Some(stack) = &self.text {
            let x = inputs
                .lyrics
                .ok_or_else(|| Error::input("config expects lyrics but no lyrics tensor was given"))?;
            let (y, c) = run_stack(stack, params, x, rng.as_mut(), train)?;
            pieces.push(y);
            text_cache = c;
        }
        let mut fused = pieces.remove(0);
        for p in &pieces {
            fused = fused.concat(p)?;
        }
        let (logits, head_cache) = run_stack(&self.head, params, &fused, rng.as_mut(), train)?;
        let probs = nn::softmax(&logits);
        let cache = head_cache.map(|head| Cache {
            params_version: params.version(),
            audio: audio_cache,
            text: text_cache,
            head,
        });
        Ok(ForwardPass { logits, probs, cache })
    }

    /// Gradients of the cross-entropy loss for `label` w.r.t. every parameter.
    pub fn backward(&self, params: &ParamSet, pass: &ForwardPass, label: usize) -> Result<ParamSet> {
        let cache = pass
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward needs a train-mode forward pass".into()))?;
        if cache.params_version != params.version() {
            return Err(Error::State(
                "parameters changed since the forward pass; cached activations are stale".into(),
            ));
        }
        let mut grads = params.zeros_like();
        let dlogits = softmax_ce_grad(&pass.logits, label)?;
        let dfused = back_stack(&self.head, params, &cache.head, dlogits, &mut grads)?;

        let width = self.config.tower_output();
        let mut offset = 0;
        for (stack, sc) in [(&self.audio, &cache.audio), (&self.text, &cache.text)] {
            if let (Some(stack), Some(sc)) = (stack, sc) {
                let d = Tensor::from_vec(dfused.data()[offset..offset + width].to_vec())?;
                back_stack(stack, params, sc, d, &mut grads)?;
                offset += width;
            }
        }
        Ok(grads)
    }

    /// Loss and gradients for one sample.
    pub fn loss_and_grad(
        &self,
        params: &ParamSet,
        inputs: Inputs<'_>,
        label: usize,
        dropout_seed: u64,
    ) -> Result<(f64, ParamSet)> {
        let pass = self.forward(params, inputs, RunMode::Train { seed: dropout_seed })?;
        let loss = cross_entropy(&pass.probs, label)?;
        let grads = self.backward(params, &pass, label)?;
        Ok((loss, grads))
    }

    pub fn loss(&self, params: &ParamSet, inputs: Inputs<'_>, label: usize, mode: RunMode) -> Result<f64> {
        let pass = self.forward(params, inputs, mode)?;
        cross_entropy(&pass.probs, label)
    }
}

fn run_stack(
    stack: &Stack,
    params: &ParamSet,
    x: &Tensor,
    mut rng: Option<&mut ChaCha8Rng>,
    keep: bool,
) -> Result<(Tensor, Option<StackCache>)> {
    if x.shape() != stack.input_shape.as_slice() {
        return Err(Error::shape(format!(
            "input {:?} does not match expected {:?}",
            x.shape(),
            stack.input_shape
        )));
    }
    let mut cache = keep.then(|| StackCache {
        inputs: Vec::with_capacity(stack.layers.len()),
        masks: Vec::with_capacity(stack.layers.len()),
    });
    let mut cur = x.clone();
    for entry in &stack.layers {
        let mut mask = None;
        let next = match &entry.layer {
            Layer::Conv { kernel, bias } => {
                ConvLayer::new(params.get(kernel)?, params.get(bias)?)?.forward(&cur)?
            }
            Layer::Relu => nn::relu(&cur),
            Layer::PadTo { min_h, min_w } => nn::pad_to(&cur, *min_h, *min_w)?,
            Layer::MaxPool(spec) => nn::maxpool2d_forward(&cur, *spec)?,
            Layer::Flatten => cur.flatten(),
            Layer::Dense { weight, bias } => {
                DenseLayer::new(params.get(weight)?, params.get(bias)?)?.forward(&cur)?
            }
            Layer::Dropout { rate } => match rng.as_deref_mut() {
                Some(r) => {
                    let (y, m) = nn::dropout(&cur, DropoutSpec::new(*rate, Mode::Train)?, r);
                    mask = Some(m);
                    y
                }
                None => cur.clone(),
            },
        };
        debug_assert_eq!(next.shape(), entry.output_shape.as_slice(), "{}", entry.label);
        if let Some(c) = cache.as_mut() {
            c.inputs.push(std::mem::replace(&mut cur, next));
            c.masks.push(mask);
        } else {
            cur = next;
        }
    }
    Ok((cur, cache))
}

fn back_stack(
    stack: &Stack,
    params: &ParamSet,
    cache: &StackCache,
    dout: Tensor,
    grads: &mut ParamSet,
) -> Result<Tensor> {
    let mut d = dout;
    for ((entry, x), mask) in stack.layers.iter().zip(&cache.inputs).zip(&cache.masks).rev() {
        d = match &entry.layer {
            Layer::Conv { kernel, bias } => {
                let g = ConvLayer::new(params.get(kernel)?, params.get(bias)?)?.backward(x, &d)?;
                grads.get_mut(kernel)?.add_assign(&g.dkernel)?;
                grads.get_mut(bias)?.add_assign(&g.dbias)?;
                g.dx
            }
            Layer::Relu => nn::relu_backward(x, &d)?,
            Layer::PadTo { .. } => nn::pad_to_backward(x, &d)?,
            Layer::MaxPool(spec) => nn::maxpool2d_backward(x, *spec, &d)?,
            Layer::Flatten => d.reshape(x.shape())?,
            Layer::Dense { weight, bias } => {
                let g = DenseLayer::new(params.get(weight)?, params.get(bias)?)?.backward(x, &d)?;
                grads.get_mut(weight)?.add_assign(&g.dweights)?;
                grads.get_mut(bias)?.add_assign(&g.dbias)?;
                g.dx
            }
            Layer::Dropout { .. } => match mask {
                Some(m) => nn::dropout_backward(m, &d)?,
                None => d,
            },
        };
    }
    Ok(d)
}
