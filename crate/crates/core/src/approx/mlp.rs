use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `y`. ReLU uses the zero
    /// subgradient at the kink.
    #[inline]
    fn slope_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// Weights uniform in `±√(6/(fan_in + fan_out))`, zero biases.
    ScaledUniform,
    Zeros,
}

/// Dense feed-forward network with all parameters in one flat vector.
///
/// Layer `l` stores its `fan_out × fan_in` weight matrix row-major, followed by its
/// `fan_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Gradients of `⟨upstream, f(x)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRecord {
    /// Aligned with [`Mlp::params`].
    pub params: Vec<f64>,
    pub input: Option<Vec<f64>>,
}

/// Per-layer outputs of one forward pass, kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    layers: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        &self.layers[0]
    }
}

fn layout(widths: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(widths.len() - 1);
    let mut n = 0;
    for w in widths.windows(2) {
        offsets.push(n);
        n += w[0] * w[1] + w[1];
    }
    (offsets, n)
}

impl Mlp {
    /// Network with all parameters zero.
    pub fn zeros(widths: &[usize], activations: &[Activation]) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::domain("a network needs at least input and output widths"));
        }
        if widths.contains(&0) {
            return Err(Error::domain("layer widths must be positive"));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::domain(format!(
                "{} layers need {} activations, got {}",
                widths.len() - 1,
                widths.len() - 1,
                activations.len()
            )));
        }
        let (offsets, n) = layout(widths);
        Ok(Self {
            widths: widths.to_vec(),
            activations: activations.to_vec(),
            params: vec![0.0; n],
            offsets,
        })
    }

    /// Seeded initialization.
    pub fn init(widths: &[usize], activations: &[Activation], seed: u64, scheme: InitScheme) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(widths, activations, &mut rng, scheme)
    }

    pub fn init_with<R: Rng>(
        widths: &[usize],
        activations: &[Activation],
        rng: &mut R,
        scheme: InitScheme,
    ) -> Result<Self> {
        let mut net = Self::zeros(widths, activations)?;
        if scheme == InitScheme::ScaledUniform {
            for l in 0..net.layer_count() {
                let (fan_in, fan_out) = (net.widths[l], net.widths[l + 1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let start = net.offsets[l];
                for w in &mut net.params[start..start + fan_in * fan_out] {
                    *w = rng.random_range(-bound..=bound);
                }
            }
        }
        Ok(net)
    }

    /// Multiplies the weights and biases of the last layer by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let l = self.layer_count() - 1;
        let start = self.offsets[l];
        self.params[start..].iter_mut().for_each(|p| *p *= factor);
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::domain(format!(
                "parameter vector has {} entries, network expects {}",
                params.len(),
                self.params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Offset of layer `l`'s weight block and of its bias block in the flat vector.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let w = self.offsets[l];
        (w, w + self.widths[l] * self.widths[l + 1])
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::domain(format!(
                "input has width {}, network expects {}",
                x.len(),
                self.input_width()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut trace = Trace::default();
        self.forward_trace(x, &mut trace)?;
        Ok(trace.layers.pop().unwrap())
    }

    /// Forward pass that records every layer output into `trace` (buffers are reused).
    pub fn forward_trace(&self, x: &[f64], trace: &mut Trace) -> Result<()> {
        self.check_input(x)?;
        let layers = &mut trace.layers;
        layers.resize_with(self.widths.len(), Vec::new);
        layers[0].clear();
        layers[0].extend_from_slice(x);
        for l in 0..self.layer_count() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let weights = &self.params[w_off..b_off];
            let bias = &self.params[b_off..b_off + fan_out];
            let act = self.activations[l];
            let (done, rest) = layers.split_at_mut(l + 1);
            let input = &done[l];
            let out = &mut rest[0];
            out.clear();
            for j in 0..fan_out {
                let row = &weights[j * fan_in..(j + 1) * fan_in];
                let z = bias[j] + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>();
                out.push(act.apply(z));
            }
        }
        Ok(())
    }

    /// Reverse pass over a recorded trace. Adds `scale · ∂⟨upstream, f⟩/∂θ` into
    /// `grad` and returns the input gradient when `want_input` is set.
    pub fn backward_trace(
        &self,
        trace: &Trace,
        upstream: &[f64],
        scale: f64,
        grad: &mut [f64],
        want_input: bool,
    ) -> Result<Option<Vec<f64>>> {
        if upstream.len() != self.output_width() {
            return Err(Error::domain(format!(
                "upstream has width {}, network output is {}",
                upstream.len(),
                self.output_width()
            )));
        }
        if grad.len() != self.params.len() {
            return Err(Error::domain("gradient buffer does not match the parameter vector"));
        }
        if trace.layers.len() != self.widths.len() {
            return Err(Error::domain("trace does not belong to this network"));
        }
        let mut delta: Vec<f64> = upstream.to_vec();
        let mut below = Vec::new();
        for l in (0..self.layer_count()).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let act = self.activations[l];
            let out = &trace.layers[l + 1];
            for (d, y) in delta.iter_mut().zip(out) {
                *d *= act.slope_from_output(*y);
            }
            let input = &trace.layers[l];
            for j in 0..fan_out {
                let dj = delta[j] * scale;
                if dj != 0.0 {
                    let g = &mut grad[w_off + j * fan_in..w_off + (j + 1) * fan_in];
                    for (gi, xi) in g.iter_mut().zip(input) {
                        *gi += dj * xi;
                    }
                }
                grad[b_off + j] += dj;
            }
            if l > 0 || want_input {
                let weights = &self.params[w_off..b_off];
                below.clear();
                below.resize(fan_in, 0.0);
                for j in 0..fan_out {
                    let dj = delta[j];
                    if dj != 0.0 {
                        let row = &weights[j * fan_in..(j + 1) * fan_in];
                        for (b, w) in below.iter_mut().zip(row) {
                            *b += w * dj;
                        }
                    }
                }
                std::mem::swap(&mut delta, &mut below);
            }
        }
        Ok(want_input.then_some(delta))
    }

    /// Exact gradients of `⟨upstream, forward(x)⟩` with respect to parameters and input.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<GradientRecord> {
        let mut trace = Trace::default();
        self.forward_trace(x, &mut trace)?;
        let mut params = vec![0.0; self.params.len()];
        let input = self.backward_trace(&trace, upstream, 1.0, &mut params, true)?;
        Ok(GradientRecord { params, input })
    }

    /// Gradient of `⟨upstream, f(x)⟩` with respect to the input only.
    pub fn input_gradient(&self, trace: &Trace, upstream: &[f64]) -> Result<Vec<f64>> {
        let mut scratch = vec![0.0; self.params.len()];
        Ok(self
            .backward_trace(trace, upstream, 0.0, &mut scratch, true)?
            .expect("input gradient requested"))
    }

    pub fn to_document(&self) -> MlpDocument {
        MlpDocument {
            format_version: CHECKPOINT_FORMAT_VERSION,
            widths: self.widths.clone(),
            activations: self.activations.clone(),
            params: self.params.clone(),
        }
    }

    pub fn from_document(doc: &MlpDocument) -> Result<Self> {
        if doc.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::domain(format!(
                "unsupported network format version {}",
                doc.format_version
            )));
        }
        let mut net = Self::zeros(&doc.widths, &doc.activations)?;
        net.set_params(&doc.params)?;
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("network document contains non-finite parameters"));
        }
        Ok(net)
    }
}

/// Serialized network: widths, activations and the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpDocument {
    pub format_version: u32,
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub params: Vec<f64>,
}

impl Serialize for Mlp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_document().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mlp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = MlpDocument::deserialize(d)?;
        Mlp::from_document(&doc).map_err(serde::de::Error::custom)
    }
}
