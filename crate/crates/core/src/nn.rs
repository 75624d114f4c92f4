//! Small dense Q-networks with hand-written backpropagation.
//!
//! Hidden layers use ReLU. The head is either a single linear layer or a
//! dueling pair (one value unit, one advantage unit per action) combined as
//! `Q_j = V + A_j - mean(A)`.
//!
//! Parameters are addressed as a flat list of arrays in declaration order:
//! `hidden[0].weights, hidden[0].bias, ...`, then the head (`weights, bias` for
//! a plain head, `value.weights, value.bias, advantage.weights, advantage.bias`
//! for a dueling head). Gradients, optimizer state and checkpoints share that
//! order.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero bias.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs)
                .map(|_| rng.random_range(-bound..=bound))
                .collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn check(&self) -> Result<()> {
        if self.inputs == 0 || self.outputs == 0 {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        if self.weights.len() != self.inputs * self.outputs || self.bias.len() != self.outputs {
            return Err(Error::invalid("layer parameter lengths do not match its shape"));
        }
        Ok(())
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()),
        );
    }

    /// Accumulates `scale * dL/dW` and `scale * dL/db` given `dL/dout`, and
    /// writes `dL/dx` into `grad_in` when requested.
    fn backward(
        &self,
        x: &[f64],
        grad_out: &[f64],
        scale: f64,
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        grad_in: Option<&mut Vec<f64>>,
    ) {
        for (o, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let sg = scale * g;
            grad_b[o] += sg;
            let row = &mut grad_w[o * self.inputs..(o + 1) * self.inputs];
            for (gw, xi) in row.iter_mut().zip(x) {
                *gw += sg * xi;
            }
        }
        if let Some(grad_in) = grad_in {
            grad_in.clear();
            grad_in.resize(self.inputs, 0.0);
            for (row, &g) in self.weights.chunks_exact(self.inputs).zip(grad_out) {
                if g == 0.0 {
                    continue;
                }
                for (gi, w) in grad_in.iter_mut().zip(row) {
                    *gi += g * w;
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Plain,
    Dueling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Head {
    Plain(Dense),
    Dueling { value: Dense, advantage: Dense },
}

impl Head {
    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Plain(_) => HeadKind::Plain,
            Head::Dueling { .. } => HeadKind::Dueling,
        }
    }

    fn inputs(&self) -> usize {
        match self {
            Head::Plain(layer) => layer.inputs,
            Head::Dueling { value, .. } => value.inputs,
        }
    }

    fn outputs(&self) -> usize {
        match self {
            Head::Plain(layer) => layer.outputs,
            Head::Dueling { advantage, .. } => advantage.outputs,
        }
    }
}

/// `Q_j = V + A_j - mean(A)`.
pub fn dueling_combine(value: f64, advantages: &[f64]) -> Result<Vec<f64>> {
    if advantages.is_empty() {
        return Err(Error::invalid("advantage vector is empty"));
    }
    let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
    Ok(advantages.iter().map(|a| value + (a - mean)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    hidden: Vec<Dense>,
    head: Head,
}

/// Intermediate values kept for backpropagation.
struct Trace {
    /// Input of every hidden layer, then the input of the head.
    activations: Vec<Vec<f64>>,
    /// Raw head outputs: `[q...]` or `[v, a...]`.
    head_out: Vec<f64>,
}

impl DenseNet {
    /// Randomly initialised network with ReLU hidden layers.
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        hidden: &[usize],
        outputs: usize,
        head: HeadKind,
        rng: &mut R,
    ) -> Result<Self> {
        if inputs == 0 || outputs == 0 || hidden.contains(&0) {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        let mut layers = Vec::with_capacity(hidden.len());
        let mut fan_in = inputs;
        for &width in hidden {
            layers.push(Dense::init(fan_in, width, rng));
            fan_in = width;
        }
        let head = match head {
            HeadKind::Plain => Head::Plain(Dense::init(fan_in, outputs, rng)),
            HeadKind::Dueling => Head::Dueling {
                value: Dense::init(fan_in, 1, rng),
                advantage: Dense::init(fan_in, outputs, rng),
            },
        };
        Self::from_parts(layers, head)
    }

    pub fn from_parts(hidden: Vec<Dense>, head: Head) -> Result<Self> {
        for layer in &hidden {
            layer.check()?;
        }
        for pair in hidden.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::invalid("hidden layer dimensions do not chain"));
            }
        }
        match &head {
            Head::Plain(layer) => layer.check()?,
            Head::Dueling { value, advantage } => {
                value.check()?;
                advantage.check()?;
                if value.outputs != 1 {
                    return Err(Error::invalid("value stream must have one output"));
                }
                if value.inputs != advantage.inputs {
                    return Err(Error::invalid("value and advantage streams disagree on input size"));
                }
            }
        }
        if let Some(last) = hidden.last() {
            if last.outputs != head.inputs() {
                return Err(Error::invalid("head input does not match last hidden layer"));
            }
        }
        Ok(Self { hidden, head })
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .map_or_else(|| self.head.inputs(), |layer| layer.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.head.outputs()
    }

    pub fn head_kind(&self) -> HeadKind {
        self.head.kind()
    }

    pub fn hidden(&self) -> &[Dense] {
        &self.hidden
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn parameter_count(&self) -> usize {
        self.param_arrays().iter().map(|a| a.len()).sum()
    }

    pub fn param_arrays(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.hidden {
            out.push(layer.weights.as_slice());
            out.push(layer.bias.as_slice());
        }
        match &self.head {
            Head::Plain(layer) => {
                out.push(&layer.weights);
                out.push(&layer.bias);
            }
            Head::Dueling { value, advantage } => {
                out.push(&value.weights);
                out.push(&value.bias);
                out.push(&advantage.weights);
                out.push(&advantage.bias);
            }
        }
        out
    }

    pub fn param_arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.hidden {
            out.push(&mut layer.weights);
            out.push(&mut layer.bias);
        }
        match &mut self.head {
            Head::Plain(layer) => {
                out.push(&mut layer.weights);
                out.push(&mut layer.bias);
            }
            Head::Dueling { value, advantage } => {
                out.push(&mut value.weights);
                out.push(&mut value.bias);
                out.push(&mut advantage.weights);
                out.push(&mut advantage.bias);
            }
        }
        out
    }

    /// Shapes of every layer in declaration order, as `(inputs, outputs)`.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes: Vec<_> = self.hidden.iter().map(|l| (l.inputs, l.outputs)).collect();
        match &self.head {
            Head::Plain(l) => shapes.push((l.inputs, l.outputs)),
            Head::Dueling { value, advantage } => {
                shapes.push((value.inputs, value.outputs));
                shapes.push((advantage.inputs, advantage.outputs));
            }
        }
        shapes
    }

    pub fn same_architecture(&self, other: &DenseNet) -> bool {
        self.head_kind() == other.head_kind() && self.layer_shapes() == other.layer_shapes()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut activations = Vec::with_capacity(self.hidden.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.hidden {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(activations.last().expect("input pushed"), &mut out);
            for v in &mut out {
                *v = v.max(0.0);
            }
            activations.push(out);
        }
        let last = activations.last().expect("input pushed");
        let mut head_out = Vec::new();
        match &self.head {
            Head::Plain(layer) => layer.apply(last, &mut head_out),
            Head::Dueling { value, advantage } => {
                let mut v = Vec::with_capacity(1);
                value.apply(last, &mut v);
                head_out.push(v[0]);
                let mut a = Vec::with_capacity(advantage.outputs);
                advantage.apply(last, &mut a);
                head_out.extend(a);
            }
        }
        Trace {
            activations,
            head_out,
        }
    }

    fn q_from_trace(&self, trace: &Trace) -> Vec<f64> {
        match self.head {
            Head::Plain(_) => trace.head_out.clone(),
            Head::Dueling { .. } => dueling_combine(trace.head_out[0], &trace.head_out[1..])
                .expect("advantage stream is non-empty"),
        }
    }

    /// Q-values for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.q_from_trace(&self.trace(x)))
    }

    /// Gradient of `(target - Q[action])^2` with respect to every parameter.
    pub fn td_backward(&self, x: &[f64], action: usize, target: f64) -> Result<GradientSet> {
        let mut grads = GradientSet::zeros_like(self);
        self.accumulate_td_gradient(x, action, target, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Adds `scale * d/dθ (target - Q[action])^2` into `grads` and returns `Q[action]`.
    pub fn accumulate_td_gradient(
        &self,
        x: &[f64],
        action: usize,
        target: f64,
        scale: f64,
        grads: &mut GradientSet,
    ) -> Result<f64> {
        self.check_input(x)?;
        if action >= self.output_dim() {
            return Err(Error::invalid(format!(
                "action {action} out of range for {} outputs",
                self.output_dim()
            )));
        }
        if !grads.matches(self) {
            return Err(Error::invalid("gradient set does not match network"));
        }
        let trace = self.trace(x);
        let q = self.q_from_trace(&trace)[action];
        let dq = 2.0 * (q - target);

        let n_hidden = self.hidden.len();
        let head_in = &trace.activations[n_hidden];
        let head_base = 2 * n_hidden;
        let mut grad_h = Vec::new();
        match &self.head {
            Head::Plain(layer) => {
                let mut g = vec![0.0; layer.outputs];
                g[action] = dq;
                let (w, b) = grads.pair_mut(head_base);
                layer.backward(head_in, &g, scale, w, b, Some(&mut grad_h));
            }
            Head::Dueling { value, advantage } => {
                let n = advantage.outputs as f64;
                let g_adv: Vec<f64> = (0..advantage.outputs)
                    .map(|j| dq * (f64::from(u8::from(j == action)) - 1.0 / n))
                    .collect();
                let mut from_value = Vec::new();
                let (w, b) = grads.pair_mut(head_base);
                value.backward(head_in, &[dq], scale, w, b, Some(&mut from_value));
                let (w, b) = grads.pair_mut(head_base + 2);
                advantage.backward(head_in, &g_adv, scale, w, b, Some(&mut grad_h));
                for (g, v) in grad_h.iter_mut().zip(&from_value) {
                    *g += v;
                }
            }
        }

        for i in (0..n_hidden).rev() {
            let out = &trace.activations[i + 1];
            for (g, &a) in grad_h.iter_mut().zip(out) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            let layer = &self.hidden[i];
            let grad_out = std::mem::take(&mut grad_h);
            let (w, b) = grads.pair_mut(2 * i);
            let want_input = i > 0;
            layer.backward(
                &trace.activations[i],
                &grad_out,
                scale,
                w,
                b,
                want_input.then_some(&mut grad_h),
            );
        }
        Ok(q)
    }

    /// Copies `src` parameters into `self`; both must share an architecture.
    pub fn sync_from(&mut self, src: &DenseNet) -> Result<()> {
        if !self.same_architecture(src) {
            return Err(Error::invalid("cannot sync networks with different architectures"));
        }
        self.clone_from(src);
        Ok(())
    }

    pub fn to_checkpoint(&self) -> NetCheckpoint {
        let mut layers: Vec<LayerShape> = self
            .hidden
            .iter()
            .enumerate()
            .map(|(i, l)| LayerShape {
                name: format!("hidden{i}"),
                inputs: l.inputs,
                outputs: l.outputs,
            })
            .collect();
        match &self.head {
            Head::Plain(l) => layers.push(LayerShape {
                name: "output".into(),
                inputs: l.inputs,
                outputs: l.outputs,
            }),
            Head::Dueling { value, advantage } => {
                layers.push(LayerShape {
                    name: "value".into(),
                    inputs: value.inputs,
                    outputs: value.outputs,
                });
                layers.push(LayerShape {
                    name: "advantage".into(),
                    inputs: advantage.inputs,
                    outputs: advantage.outputs,
                });
            }
        }
        NetCheckpoint {
            format: NET_FORMAT.into(),
            version: NET_FORMAT_VERSION,
            head: self.head_kind(),
            layers,
            parameters: self.param_arrays().into_iter().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &NetCheckpoint) -> Result<Self> {
        if ckpt.format != NET_FORMAT || ckpt.version != NET_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported network checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        let head_layers = match ckpt.head {
            HeadKind::Plain => 1,
            HeadKind::Dueling => 2,
        };
        if ckpt.layers.len() < head_layers || ckpt.parameters.len() != 2 * ckpt.layers.len() {
            return Err(Error::invalid("checkpoint layer list and parameters disagree"));
        }
        let mut params = ckpt.parameters.iter();
        let mut take = |shape: &LayerShape| Dense {
            inputs: shape.inputs,
            outputs: shape.outputs,
            weights: params.next().cloned().unwrap_or_default(),
            bias: params.next().cloned().unwrap_or_default(),
        };
        let split = ckpt.layers.len() - head_layers;
        let hidden: Vec<Dense> = ckpt.layers[..split].iter().map(&mut take).collect();
        let head = match ckpt.head {
            HeadKind::Plain => Head::Plain(take(&ckpt.layers[split])),
            HeadKind::Dueling => Head::Dueling {
                value: take(&ckpt.layers[split]),
                advantage: take(&ckpt.layers[split + 1]),
            },
        };
        Self::from_parts(hidden, head)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, &self.to_checkpoint())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&crate::io::read_json(path)?)
    }
}

pub const NET_FORMAT: &str = "relaylab.densenet";
pub const NET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
}

/// On-disk form of a [`DenseNet`]: header of shapes, then row-major arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetCheckpoint {
    pub format: String,
    pub version: u32,
    pub head: HeadKind,
    pub layers: Vec<LayerShape>,
    pub parameters: Vec<Vec<f64>>,
}

/// Per-parameter gradients, same layout as [`DenseNet::param_arrays`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    arrays: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            arrays: net.param_arrays().iter().map(|a| vec![0.0; a.len()]).collect(),
        }
    }

    pub fn from_arrays(arrays: Vec<Vec<f64>>) -> Self {
        Self { arrays }
    }

    pub fn arrays(&self) -> &[Vec<f64>] {
        &self.arrays
    }

    pub fn matches(&self, net: &DenseNet) -> bool {
        let params = net.param_arrays();
        params.len() == self.arrays.len()
            && params.iter().zip(&self.arrays).all(|(p, g)| p.len() == g.len())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.arrays.iter_mut().flatten() {
            *v *= factor;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.arrays.iter().flatten().copied()
    }

    fn pair_mut(&mut self, index: usize) -> (&mut [f64], &mut [f64]) {
        let (left, right) = self.arrays.split_at_mut(index + 1);
        (&mut left[index], &mut right[0])
    }
}

/// Non-centered RMSProp: `v = k v + (1 - k) g^2`, `θ -= η g / sqrt(v + ε)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub v: Vec<Vec<f64>>,
    pub kappa: f64,
    pub eta: f64,
    pub epsilon: f64,
}

impl RmsProp {
    pub const DEFAULT_KAPPA: f64 = 0.95;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(net: &DenseNet, eta: f64) -> Result<Self> {
        Self::with_constants(net, eta, Self::DEFAULT_KAPPA, Self::DEFAULT_EPSILON)
    }

    pub fn with_constants(net: &DenseNet, eta: f64, kappa: f64, epsilon: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&kappa) {
            return Err(Error::invalid("RMSProp momentum must lie in [0, 1)"));
        }
        if !(epsilon > 0.0) {
            return Err(Error::invalid("RMSProp epsilon must be positive"));
        }
        Ok(Self {
            v: net.param_arrays().iter().map(|a| vec![0.0; a.len()]).collect(),
            kappa,
            eta,
            epsilon,
        })
    }

    /// Updates `params` in place from `grads`, arrays matched by position.
    pub fn step_arrays(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) -> Result<()> {
        let shapes_match = params.len() == grads.len()
            && params.len() == self.v.len()
            && params
                .iter()
                .zip(grads)
                .zip(&self.v)
                .all(|((p, g), v)| p.len() == g.len() && p.len() == v.len());
        if !shapes_match {
            return Err(Error::invalid("parameter, gradient and accumulator shapes differ"));
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.v) {
            for ((theta, &grad), acc) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                *acc = self.kappa * *acc + (1.0 - self.kappa) * grad * grad;
                *theta -= self.eta * grad / (*acc + self.epsilon).sqrt();
            }
        }
        Ok(())
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &GradientSet) -> Result<()> {
        let mut params = net.param_arrays_mut();
        self.step_arrays(&mut params, &grads.arrays)
    }
}
