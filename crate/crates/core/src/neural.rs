//! Dense multilayer perceptrons with exact backpropagation and Adam.
//!
//! Everything runs in `f64` on batches stored as `(batch, features)` matrices.
//! A network may take a second, auxiliary input that is concatenated onto the
//! input of one hidden layer; the critic uses this to receive the action.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

mod gradcheck;
mod tensorfile;

pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport, Probe};
pub use tensorfile::{read_tensor_file, write_tensor_file, TensorSection};

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    /// Total input width, including any concatenated auxiliary input.
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Where an auxiliary input joins the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Injection {
    /// Index of the layer whose input gets the auxiliary columns appended.
    pub layer: usize,
    pub width: usize,
}

/// Weights stored `(out, in)` so that `z = x · Wᵀ + b` for row-batched `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(spec: &LayerSpec) -> Self {
        Dense {
            weights: Array2::zeros((spec.out_dim, spec.in_dim)),
            bias: Array1::zeros(spec.out_dim),
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Parameter-shaped container; used for gradients and optimizer moments.
pub type Gradients = Vec<Dense>;

#[derive(Debug, Clone)]
pub struct Mlp {
    specs: Vec<LayerSpec>,
    layers: Vec<Dense>,
    injection: Option<Injection>,
    generation: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.specs == other.specs
            && self.injection == other.injection
            && self.layers == other.layers
    }
}

/// Intermediate values of a batched forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("network has at least one layer")
    }

    /// Sign pattern of every ReLU pre-activation; used to spot kinks.
    pub fn relu_pattern(&self, specs: &[LayerSpec]) -> Vec<bool> {
        let mut out = Vec::new();
        for (spec, z) in specs.iter().zip(&self.pre) {
            if spec.activation == Activation::Relu {
                out.extend(z.iter().map(|&v| v > 0.0));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Backward {
    pub grads: Option<Gradients>,
    pub input_grad: Array2<f64>,
    pub aux_grad: Option<Array2<f64>>,
}

/// Hidden-layer and output-layer initialisation ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Hidden layers uniform in ±1/√fan_in, final layer uniform in ±`final_range`.
    Ddpg {
        final_range: f64,
    },
    /// All layers uniform in ±1/√fan_in.
    FanIn,
    Zeros,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        specs: Vec<LayerSpec>,
        injection: Option<Injection>,
        init: Init,
        rng: &mut R,
    ) -> Result<Self> {
        validate_specs(&specs, injection)?;
        let n = specs.len();
        let mut layers = Vec::with_capacity(n);
        for (i, spec) in specs.iter().enumerate() {
            let range = match init {
                Init::Zeros => 0.0,
                Init::FanIn => 1.0 / (spec.in_dim as f64).sqrt(),
                Init::Ddpg { final_range } => {
                    if i + 1 == n {
                        final_range
                    } else {
                        1.0 / (spec.in_dim as f64).sqrt()
                    }
                }
            };
            let mut dense = Dense::zeros(spec);
            if range > 0.0 {
                dense
                    .weights
                    .mapv_inplace(|_| rng.random_range(-range..=range));
                dense
                    .bias
                    .mapv_inplace(|_| rng.random_range(-range..=range));
            }
            layers.push(dense);
        }
        Ok(Mlp {
            specs,
            layers,
            injection,
            generation: next_generation(),
        })
    }

    /// Builds a network from explicit parameters.
    pub fn from_parts(
        specs: Vec<LayerSpec>,
        injection: Option<Injection>,
        layers: Vec<Dense>,
    ) -> Result<Self> {
        validate_specs(&specs, injection)?;
        if layers.len() != specs.len() {
            return Err(Error::contract("layer count does not match specs"));
        }
        for (spec, l) in specs.iter().zip(&layers) {
            if l.weights.dim() != (spec.out_dim, spec.in_dim) || l.bias.len() != spec.out_dim {
                return Err(Error::contract("parameter shape does not match layer spec"));
            }
            if l.weights
                .iter()
                .chain(l.bias.iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::contract("parameters must be finite"));
            }
        }
        Ok(Mlp {
            specs,
            layers,
            injection,
            generation: next_generation(),
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn injection(&self) -> Option<Injection> {
        self.injection
    }

    pub fn input_dim(&self) -> usize {
        let first = self.specs[0].in_dim;
        match self.injection {
            Some(inj) if inj.layer == 0 => first - inj.width,
            _ => first,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.specs[self.specs.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Mutable access to the parameters; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.generation = next_generation();
        &mut self.layers
    }

    /// Reads parameter `index` in flat order (per layer: weights row-major, then bias).
    pub fn param(&self, index: usize) -> f64 {
        let (l, within) = self.locate(index);
        let layer = &self.layers[l];
        if within < layer.weights.len() {
            let cols = layer.weights.ncols();
            layer.weights[[within / cols, within % cols]]
        } else {
            layer.bias[within - layer.weights.len()]
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (l, within) = self.locate(index);
        let layer = &mut self.layers_mut()[l];
        if within < layer.weights.len() {
            let cols = layer.weights.ncols();
            layer.weights[[within / cols, within % cols]] = value;
        } else {
            let off = layer.weights.len();
            layer.bias[within - off] = value;
        }
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            let n = layer.param_count();
            if index < n {
                return (l, index);
            }
            index -= n;
        }
        panic!("parameter index out of range");
    }

    pub fn forward(
        &self,
        input: ArrayView2<f64>,
        aux: Option<ArrayView2<f64>>,
    ) -> Result<ForwardCache> {
        if input.ncols() != self.input_dim() {
            return Err(Error::contract(format!(
                "input width {} does not match network input {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        match (self.injection, aux) {
            (Some(inj), Some(a)) => {
                if a.ncols() != inj.width || a.nrows() != input.nrows() {
                    return Err(Error::contract(format!(
                        "auxiliary input shape {:?} does not match ({}, {})",
                        a.dim(),
                        input.nrows(),
                        inj.width
                    )));
                }
            }
            (Some(_), None) => return Err(Error::contract("network expects an auxiliary input")),
            (None, Some(_)) => return Err(Error::contract("network takes no auxiliary input")),
            (None, None) => {}
        }

        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(n);
        for (i, (spec, layer)) in self.specs.iter().zip(&self.layers).enumerate() {
            let base = if i == 0 { input } else { post[i - 1].view() };
            let x = match (self.injection, aux) {
                (Some(inj), Some(a)) if inj.layer == i => {
                    concatenate(Axis(1), &[base, a]).expect("row counts checked above")
                }
                _ => base.to_owned(),
            };
            let mut z = x.dot(&layer.weights.t());
            z += &layer.bias;
            let act = spec.activation;
            let y = z.mapv(|v| act.apply(v));
            inputs.push(x);
            pre.push(z);
            post.push(y);
        }
        Ok(ForwardCache {
            generation: self.generation,
            inputs,
            pre,
            post,
        })
    }

    /// Convenience forward for a single sample.
    pub fn forward_one(&self, input: &[f64], aux: Option<&[f64]>) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::contract(e.to_string()))?;
        let a = match aux {
            Some(a) => Some(
                ArrayView2::from_shape((1, a.len()), a)
                    .map_err(|e| Error::contract(e.to_string()))?,
            ),
            None => None,
        };
        let cache = self.forward(x, a)?;
        Ok(cache.output().row(0).to_vec())
    }

    /// Gradients of `Σ output ⊙ upstream` with respect to parameters and inputs.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<Backward> {
        self.backward_impl(cache, upstream, true)
    }

    /// Like [`Mlp::backward`] but skips the parameter gradients.
    pub fn input_gradients(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<Backward> {
        self.backward_impl(cache, upstream, false)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
        want_params: bool,
    ) -> Result<Backward> {
        if cache.generation != self.generation {
            return Err(Error::contract(
                "forward cache is stale: parameters changed since the forward pass",
            ));
        }
        if upstream.dim() != cache.output().dim() {
            return Err(Error::contract(format!(
                "upstream gradient shape {:?} does not match output {:?}",
                upstream.dim(),
                cache.output().dim()
            )));
        }
        let n = self.layers.len();
        let mut grads: Vec<Dense> = Vec::with_capacity(if want_params { n } else { 0 });
        let mut aux_grad = None;
        let mut delta = upstream.to_owned();
        for i in (0..n).rev() {
            let act = self.specs[i].activation;
            let mut dz = delta;
            if act != Activation::Linear {
                Zip::from(&mut dz)
                    .and(&cache.pre[i])
                    .and(&cache.post[i])
                    .for_each(|d, &z, &y| *d *= act.derivative(z, y));
            }
            if want_params {
                grads.push(Dense {
                    weights: dz.t().dot(&cache.inputs[i]),
                    bias: dz.sum_axis(Axis(0)),
                });
            }
            let dx = dz.dot(&self.layers[i].weights);
            delta = match self.injection {
                Some(inj) if inj.layer == i => {
                    let split = dx.ncols() - inj.width;
                    aux_grad = Some(dx.slice(s![.., split..]).to_owned());
                    dx.slice(s![.., ..split]).to_owned()
                }
                _ => dx,
            };
        }
        grads.reverse();
        Ok(Backward {
            grads: want_params.then_some(grads),
            input_grad: delta,
            aux_grad,
        })
    }

    /// Moves every parameter a fraction `tau` of the way towards `online`.
    pub fn blend_from(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if self.specs != online.specs || self.injection != online.injection {
            return Err(Error::contract(
                "soft update between networks of different shape",
            ));
        }
        for (t, o) in self.layers_mut().iter_mut().zip(&online.layers) {
            Zip::from(&mut t.weights)
                .and(&o.weights)
                .for_each(|t, &o| *t += tau * (o - *t));
            Zip::from(&mut t.bias)
                .and(&o.bias)
                .for_each(|t, &o| *t += tau * (o - *t));
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Gradients {
        self.specs.iter().map(Dense::zeros).collect()
    }
}

fn validate_specs(specs: &[LayerSpec], injection: Option<Injection>) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::contract("network needs at least one layer"));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::contract(format!("layer {i} has a zero dimension")));
        }
    }
    for i in 1..specs.len() {
        let expected = specs[i - 1].out_dim
            + match injection {
                Some(inj) if inj.layer == i => inj.width,
                _ => 0,
            };
        if specs[i].in_dim != expected {
            return Err(Error::contract(format!(
                "layer {i} expects input width {expected}, spec says {}",
                specs[i].in_dim
            )));
        }
    }
    if let Some(inj) = injection {
        if inj.layer >= specs.len() || inj.width == 0 {
            return Err(Error::contract("invalid auxiliary injection point"));
        }
        if inj.layer == 0 && specs[0].in_dim <= inj.width {
            return Err(Error::contract("injection wider than first layer input"));
        }
    }
    Ok(())
}

/// Per-parameter first and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Gradients,
    pub second: Gradients,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        AdamState::with_constants(net, 0.9, 0.999, 1e-8)
    }

    pub fn with_constants(net: &Mlp, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            first: net.zeros_like(),
            second: net.zeros_like(),
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }

    fn matches(&self, net: &Mlp) -> bool {
        shapes_match(&self.first, net.layers()) && shapes_match(&self.second, net.layers())
    }
}

fn shapes_match(a: &[Dense], b: &[Dense]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.weights.dim() == y.weights.dim() && x.bias.len() == y.bias.len())
}

/// One bias-corrected Adam update of `net` along `grads`.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if !shapes_match(grads, net.layers()) || !state.matches(net) {
        return Err(Error::contract(
            "gradient or optimizer shapes do not match network",
        ));
    }
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let layers = net.layers_mut();
    for (l, layer) in layers.iter_mut().enumerate() {
        let g = &grads[l];
        let m = &mut state.first[l];
        let v = &mut state.second[l];
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        Zip::from(&mut layer.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .and(&g.weights)
            .for_each(|p, m, v, &g| update(p, m, v, g));
        Zip::from(&mut layer.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .and(&g.bias)
            .for_each(|p, m, v, &g| update(p, m, v, g));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(i: usize, o: usize, a: Activation) -> LayerSpec {
        LayerSpec {
            in_dim: i,
            out_dim: o,
            activation: a,
        }
    }

    fn single(w: Array2<f64>, act: Activation) -> Mlp {
        let (o, i) = w.dim();
        Mlp::from_parts(
            vec![spec(i, o, act)],
            None,
            vec![Dense {
                weights: w,
                bias: Array1::zeros(o),
            }],
        )
        .unwrap()
    }

    #[test]
    fn identity_linear_layer() {
        let net = single(Array2::eye(3), Activation::Linear);
        assert_eq!(
            net.forward_one(&[0.5, -2.0, 3.0], None).unwrap(),
            vec![0.5, -2.0, 3.0]
        );
    }

    #[test]
    fn relu_layer() {
        let net = single(Array2::eye(2), Activation::Relu);
        assert_eq!(net.forward_one(&[-1.0, 2.0], None).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn zero_tanh_layer() {
        let net = single(Array2::zeros((4, 3)), Activation::Tanh);
        assert_eq!(
            net.forward_one(&[1.0, 2.0, 3.0], None).unwrap(),
            vec![0.0; 4]
        );
    }

    #[test]
    fn linear_input_gradient_is_transpose_product() {
        let w = arr2(&[[1.0, 2.0, 3.0], [-1.0, 0.5, 4.0]]);
        let net = single(w.clone(), Activation::Linear);
        let x = arr2(&[[0.3, -0.2, 0.9]]);
        let cache = net.forward(x.view(), None).unwrap();
        let up = arr2(&[[2.0, -3.0]]);
        let back = net.backward(&cache, up.view()).unwrap();
        let expected = w.t().dot(&up.row(0));
        for (a, b) in back.input_grad.row(0).iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn relu_blocks_gradient_at_negative_preactivation() {
        let net = single(Array2::eye(2), Activation::Relu);
        let x = arr2(&[[-1.0, 2.0]]);
        let cache = net.forward(x.view(), None).unwrap();
        let back = net.backward(&cache, arr2(&[[1.0, 1.0]]).view()).unwrap();
        assert_eq!(back.input_grad.row(0).to_vec(), vec![0.0, 1.0]);
        let g = back.grads.unwrap();
        assert_eq!(g[0].weights.row(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let net = single(Array2::eye(2), Activation::Relu);
        assert!(net.forward_one(&[1.0, 2.0, 3.0], None).is_err());
        assert!(net.forward_one(&[1.0, 2.0], Some(&[1.0])).is_err());
        let bad = Mlp::new(
            vec![spec(3, 4, Activation::Relu), spec(5, 1, Activation::Linear)],
            None,
            Init::FanIn,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::new(
            vec![spec(2, 3, Activation::Tanh), spec(3, 1, Activation::Linear)],
            None,
            Init::FanIn,
            &mut rng,
        )
        .unwrap();
        let x = arr2(&[[0.1, 0.2]]);
        let cache = net.forward(x.view(), None).unwrap();
        let g = net
            .backward(&cache, arr2(&[[1.0]]).view())
            .unwrap()
            .grads
            .unwrap();
        let mut opt = AdamState::new(&net);
        adam_step(&mut net, &g, &mut opt, 1e-3).unwrap();
        assert!(net.backward(&cache, arr2(&[[1.0]]).view()).is_err());
    }

    fn critic_like(rng: &mut ChaCha8Rng) -> Mlp {
        Mlp::new(
            vec![
                spec(4, 8, Activation::Relu),
                spec(8 + 2, 5, Activation::Tanh),
                spec(5, 1, Activation::Linear),
            ],
            Some(Injection { layer: 1, width: 2 }),
            Init::FanIn,
            rng,
        )
        .unwrap()
    }

    #[test]
    fn injected_input_changes_output_and_gets_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = critic_like(&mut rng);
        let x = [0.2, -0.4, 0.9, 0.1];
        let a = net.forward_one(&x, Some(&[0.0, 0.0])).unwrap();
        let b = net.forward_one(&x, Some(&[0.5, -0.5])).unwrap();
        assert_ne!(a, b);
        let xs = arr2(&[x]);
        let aux = arr2(&[[0.5, -0.5]]);
        let cache = net.forward(xs.view(), Some(aux.view())).unwrap();
        let back = net.backward(&cache, arr2(&[[1.0]]).view()).unwrap();
        assert_eq!(back.aux_grad.unwrap().dim(), (1, 2));
        assert_eq!(back.input_grad.dim(), (1, 4));
    }

    #[test]
    fn same_seed_same_parameters() {
        let build = |seed| {
            Mlp::new(
                vec![spec(7, 40, Activation::Relu), spec(40, 3, Activation::Tanh)],
                None,
                Init::Ddpg { final_range: 3e-3 },
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap()
        };
        let a = build(42);
        let b = build(42);
        for i in 0..a.param_count() {
            assert_eq!(a.param(i).to_bits(), b.param(i).to_bits());
        }
        assert_ne!(a, build(43));
        let last = &a.layers()[1];
        assert!(last.weights.iter().all(|w| w.abs() <= 3e-3));
        let first = &a.layers()[0];
        let r = 1.0 / 7f64.sqrt();
        assert!(first.weights.iter().all(|w| w.abs() <= r));
    }

    #[test]
    fn flat_param_indexing_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = critic_like(&mut rng);
        let n = net.param_count();
        assert_eq!(n, 4 * 8 + 8 + 10 * 5 + 5 + 5 + 1);
        net.set_param(n - 1, 7.5);
        assert_eq!(net.layers()[2].bias[0], 7.5);
        net.set_param(0, -1.25);
        assert_eq!(net.layers()[0].weights[[0, 0]], -1.25);
        assert_eq!(net.param(0), -1.25);
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = critic_like(&mut rng);
        let before = net.clone();
        let mut opt = AdamState::new(&net);
        let zero = net.zeros_like();
        for _ in 0..5 {
            adam_step(&mut net, &zero, &mut opt, 0.1).unwrap();
        }
        assert_eq!(net, before);
        assert_eq!(opt.step, 5);
    }

    #[test]
    fn adam_without_momentum_moves_by_lr_sign() {
        let mut net = single(arr2(&[[0.0, 0.0]]), Activation::Linear);
        let mut opt = AdamState::with_constants(&net, 0.0, 0.0, 1e-8);
        let mut g = net.zeros_like();
        g[0].weights[[0, 0]] = 0.3;
        g[0].weights[[0, 1]] = -2.0;
        adam_step(&mut net, &g, &mut opt, 0.01).unwrap();
        let w = &net.layers()[0].weights;
        assert!((w[[0, 0]] + 0.01 * 0.3 / (0.3 + 1e-8)).abs() < 1e-15);
        assert!((w[[0, 1]] - 0.01 * 2.0 / (2.0 + 1e-8)).abs() < 1e-15);
        assert!((w[[0, 0]] + 0.01).abs() < 1e-9);
    }

    /// Scalar re-implementation of Adam used as the oracle.
    fn adam_scalar(g: f64, steps: usize, lr: f64) -> Vec<f64> {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut p, mut m, mut v) = (0.0, 0.0, 0.0);
        let mut out = Vec::new();
        for t in 1..=steps {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            p -= lr * mh / (vh.sqrt() + eps);
            out.push(p);
        }
        out
    }

    #[test]
    fn adam_constant_gradient_matches_scalar_oracle() {
        let oracle = adam_scalar(0.7, 200, 1e-3);
        assert!(oracle.windows(2).all(|w| w[1] < w[0]));
        let mut net = single(arr2(&[[0.0]]), Activation::Linear);
        let mut opt = AdamState::new(&net);
        let mut g = net.zeros_like();
        g[0].weights[[0, 0]] = 0.7;
        for expected in oracle {
            adam_step(&mut net, &g, &mut opt, 1e-3).unwrap();
            assert!((net.layers()[0].weights[[0, 0]] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn blend_moves_fraction_tau() {
        let mut target = single(arr2(&[[0.0, 0.0]]), Activation::Linear);
        let online = single(arr2(&[[1.0, -2.0]]), Activation::Linear);
        target.blend_from(&online, 0.01).unwrap();
        assert_eq!(target.layers()[0].weights[[0, 0]], 0.01);
        assert_eq!(target.layers()[0].weights[[0, 1]], -0.02);
        let other = single(arr2(&[[1.0]]), Activation::Linear);
        assert!(target.blend_from(&other, 0.5).is_err());
    }

    #[test]
    fn activations_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = Mlp::new(
            vec![spec(3, 6, Activation::Relu), spec(6, 4, Activation::Tanh)],
            None,
            Init::FanIn,
            &mut rng,
        )
        .unwrap();
        let x = Array2::from_shape_fn((64, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin() * 5.0);
        let cache = net.forward(x.view(), None).unwrap();
        assert!(cache.post[0].iter().all(|&v| v >= 0.0));
        assert!(cache.output().iter().all(|&v| v > -1.0 && v < 1.0));
    }
}
