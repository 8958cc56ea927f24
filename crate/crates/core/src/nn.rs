//! Dense feedforward networks with analytic gradients and an SGD loop.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Uniform};

use crate::error::{config, shape, Error, Result};
use crate::losses::{CategoricalDist, Objective, Target};
use crate::matrix::Matrix;
use crate::rng::{Rng, Stream};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => config(format!("unknown activation `{other}`")),
        }
    }

    #[inline]
    fn apply<F: Scalar>(self, z: F) -> F {
        match self {
            Activation::Relu => z.max(F::zero()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative<F: Scalar>(self, z: F, a: F) -> F {
        match self {
            Activation::Relu => {
                if z > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Tanh => F::one() - a * a,
        }
    }
}

/// Output interpretation. `Gaussian(d)` emits `d + 1` raw values: the mean
/// followed by a scalar log-variance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Head {
    Logits(usize),
    Gaussian(usize),
}

impl Head {
    pub fn output_dim(self) -> usize {
        match self {
            Head::Logits(c) => c,
            Head::Gaussian(d) => d + 1,
        }
    }

    pub fn is_classifier(self) -> bool {
        matches!(self, Head::Logits(_))
    }
}

/// Architecture description: `dims = [input, hidden.., output]`, where the
/// output entry is the class count or the regression target dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetworkSpec {
    pub dims: Vec<usize>,
    pub activation: Activation,
    pub gaussian: bool,
}

impl NetworkSpec {
    pub fn logits(dims: &[usize], activation: Activation) -> Self {
        Self { dims: dims.to_vec(), activation, gaussian: false }
    }

    pub fn gaussian(dims: &[usize], activation: Activation) -> Self {
        Self { dims: dims.to_vec(), activation, gaussian: true }
    }

    pub fn head(&self) -> Result<Head> {
        self.validate()?;
        let last = *self.dims.last().expect("validated");
        Ok(if self.gaussian { Head::Gaussian(last) } else { Head::Logits(last) })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return config(format!("need input and output dims, got {:?}", self.dims));
        }
        if let Some(i) = self.dims.iter().position(|&d| d == 0) {
            return config(format!("layer {i} has dimension 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<F> {
    /// `out × in`.
    pub weights: Matrix<F>,
    pub bias: Vec<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<F> {
    layer_dims: Vec<usize>,
    layers: Vec<Layer<F>>,
    activation: Activation,
    head: Head,
}

/// Parameter gradients laid out like [`Network::layers`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<F> {
    pub layers: Vec<Layer<F>>,
}

impl<F: Scalar> Gradients<F> {
    pub fn flatten(&self) -> Vec<F> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend_from_slice(l.weights.as_slice());
            v.extend_from_slice(&l.bias);
        }
        v
    }
}

/// Fan-in scaled uniform init, `U(−√(1/fan_in), √(1/fan_in))`, zero biases.
pub fn init_network<F: Scalar>(spec: &NetworkSpec, rng: &Rng) -> Result<Network<F>> {
    let head = spec.head()?;
    let mut layer_dims = spec.dims.clone();
    *layer_dims.last_mut().expect("validated") = head.output_dim();
    let mut rng = rng.substream(Stream::Init);
    let layers = layer_dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (1.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let data = (0..fan_in * fan_out).map(|_| F::of(dist.sample(&mut rng))).collect();
            Layer {
                weights: Matrix::from_vec(fan_out, fan_in, data).expect("sized"),
                bias: vec![F::zero(); fan_out],
            }
        })
        .collect();
    Ok(Network { layer_dims, layers, activation: spec.activation, head })
}

struct Trace<F> {
    /// Layer inputs; `inputs[0]` is the batch.
    inputs: Vec<Matrix<F>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Matrix<F>>,
    output: Matrix<F>,
}

impl<F: Scalar> Network<F> {
    /// Assemble a network from explicit layers.
    pub fn from_layers(layers: Vec<Layer<F>>, activation: Activation, head: Head) -> Result<Self> {
        if layers.is_empty() {
            return config("network without layers");
        }
        let mut layer_dims = vec![layers[0].weights.cols()];
        for (i, l) in layers.iter().enumerate() {
            if l.weights.cols() != *layer_dims.last().unwrap() || l.bias.len() != l.weights.rows() {
                return shape(format!("layer {i} does not chain with the previous layer"));
            }
            layer_dims.push(l.weights.rows());
        }
        if *layer_dims.last().unwrap() != head.output_dim() {
            return shape(format!(
                "final layer has {} outputs, head needs {}",
                layer_dims.last().unwrap(),
                head.output_dim()
            ));
        }
        Ok(Self { layer_dims, layers, activation, head })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<F> {
        let mut v = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            v.extend_from_slice(l.weights.as_slice());
            v.extend_from_slice(&l.bias);
        }
        v
    }

    pub fn set_flat_params(&mut self, params: &[F]) -> Result<()> {
        if params.len() != self.num_params() {
            return shape(format!("{} values for {} parameters", params.len(), self.num_params()));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&params[off..off + w.len()]);
            off += w.len();
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    fn check_input(&self, batch: &Matrix<F>) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return shape(format!("batch has {} features, network expects {}", batch.cols(), self.input_dim()));
        }
        Ok(())
    }

    /// Raw outputs, one row per input row. Gaussian heads give `(μ, s)` rows.
    pub fn forward(&self, batch: &Matrix<F>) -> Result<Matrix<F>> {
        self.check_input(batch)?;
        let last = self.layers.len() - 1;
        let mut x = batch.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = affine(&x, l);
            if i < last {
                let act = self.activation;
                z.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
            }
            x = z;
        }
        Ok(x)
    }

    /// Row-parallel [`forward`](Self::forward) over at most `threads` scoped
    /// threads. Output order matches input order.
    pub fn forward_par(&self, batch: &Matrix<F>, threads: usize) -> Result<Matrix<F>> {
        self.check_input(batch)?;
        let threads = threads.max(1).min(batch.rows().max(1));
        if threads == 1 {
            return self.forward(batch);
        }
        let chunk = batch.rows().div_ceil(threads);
        let parts: Vec<Result<Matrix<F>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..batch.rows())
                .step_by(chunk)
                .map(|start| {
                    let idx: Vec<usize> = (start..(start + chunk).min(batch.rows())).collect();
                    let sub = batch.select_rows(&idx);
                    s.spawn(move || self.forward(&sub))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("forward worker panicked")).collect()
        });
        let mut out = Matrix::zeros(0, 0);
        for p in parts {
            let p = p?;
            out = if out.rows() == 0 { p } else { out.vstack(&p)? };
        }
        Ok(out)
    }

    fn forward_trace(&self, batch: &Matrix<F>) -> Result<Trace<F>> {
        self.check_input(batch)?;
        let last = self.layers.len() - 1;
        let mut inputs = vec![batch.clone()];
        let mut pre = Vec::with_capacity(last);
        for (i, l) in self.layers.iter().enumerate() {
            let z = affine(inputs.last().unwrap(), l);
            if i < last {
                let act = self.activation;
                inputs.push(z.map(|v| act.apply(v)));
                pre.push(z);
            } else {
                return Ok(Trace { inputs, pre, output: z });
            }
        }
        unreachable!("network has at least one layer")
    }

    fn backward_trace(&self, trace: &Trace<F>, upstream: &Matrix<F>) -> Result<Gradients<F>> {
        if upstream.rows() != trace.output.rows() || upstream.cols() != trace.output.cols() {
            return shape(format!(
                "upstream gradient {}x{} for output {}x{}",
                upstream.rows(),
                upstream.cols(),
                trace.output.rows(),
                trace.output.cols()
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for i in (0..self.layers.len()).rev() {
            let x = &trace.inputs[i];
            let dw = delta.t_matmul(x)?;
            let mut db = vec![F::zero(); delta.cols()];
            for row in delta.iter_rows() {
                for (b, &d) in db.iter_mut().zip(row) {
                    *b = *b + d;
                }
            }
            grads.push(Layer { weights: dw, bias: db });
            if i > 0 {
                let mut next = delta.matmul(&self.layers[i].weights)?;
                let z = &trace.pre[i - 1];
                let a = &trace.inputs[i];
                for ((g, &zv), &av) in
                    next.as_mut_slice().iter_mut().zip(z.as_slice()).zip(a.as_slice())
                {
                    *g = *g * self.activation.derivative(zv, av);
                }
                delta = next;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Gradients of `Σ outputs ⊙ upstream` with respect to every parameter.
    pub fn backward(&self, batch: &Matrix<F>, upstream: &Matrix<F>) -> Result<Gradients<F>> {
        let trace = self.forward_trace(batch)?;
        self.backward_trace(&trace, upstream)
    }
}

fn affine<F: Scalar>(x: &Matrix<F>, l: &Layer<F>) -> Matrix<F> {
    let mut z = x.matmul_t(&l.weights).expect("chained shapes");
    for r in 0..z.rows() {
        for (v, &b) in z.row_mut(r).iter_mut().zip(&l.bias) {
            *v = *v + b;
        }
    }
    z
}

/// SGD with momentum and step-decayed learning rate.
///
/// Weight decay enters as an explicit `weight_decay · θ` gradient term (L2
/// coupled to the learning rate), not as a decoupled shrink.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<F> {
    pub learning_rate: F,
    pub momentum: F,
    pub weight_decay: F,
    /// `(epoch, multiplier)`: from `epoch` on, the rate is multiplied by `multiplier`.
    pub schedule: Vec<(usize, F)>,
    velocity: Vec<F>,
}

impl<F: Scalar> OptimizerState<F> {
    pub fn sgd(learning_rate: F, momentum: F, weight_decay: F) -> Result<Self> {
        Self::new(learning_rate, momentum, weight_decay, Vec::new())
    }

    pub fn new(learning_rate: F, momentum: F, weight_decay: F, schedule: Vec<(usize, F)>) -> Result<Self> {
        if !(learning_rate >= F::zero()) || !learning_rate.is_finite() {
            return config(format!("learning rate {learning_rate} must be non-negative"));
        }
        if !(momentum >= F::zero() && momentum < F::one()) {
            return config(format!("momentum {momentum} outside [0, 1)"));
        }
        if !(weight_decay >= F::zero()) {
            return config(format!("weight decay {weight_decay} must be non-negative"));
        }
        if schedule.iter().any(|&(_, m)| !(m > F::zero())) {
            return config("schedule multipliers must be positive");
        }
        Ok(Self { learning_rate, momentum, weight_decay, schedule, velocity: Vec::new() })
    }

    pub fn rate_at(&self, epoch: usize) -> F {
        self.schedule
            .iter()
            .filter(|&&(e, _)| e <= epoch)
            .fold(self.learning_rate, |lr, &(_, m)| lr * m)
    }

    pub fn velocity(&self) -> &[F] {
        &self.velocity
    }

    /// `v ← μ v − lr (g + wd θ)`, `θ ← θ + v`.
    pub fn step(&mut self, net: &mut Network<F>, grads: &Gradients<F>, epoch: usize) -> Result<()> {
        let lr = self.rate_at(epoch);
        let (mu, wd) = (self.momentum, self.weight_decay);
        if self.velocity.is_empty() {
            self.velocity = vec![F::zero(); net.num_params()];
        }
        if self.velocity.len() != net.num_params() {
            return shape("optimizer velocity does not match the network");
        }
        let mut off = 0;
        for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
            for (p, &gp) in layer
                .weights
                .as_mut_slice()
                .iter_mut()
                .chain(layer.bias.iter_mut())
                .zip(g.weights.as_slice().iter().chain(&g.bias))
            {
                let v = &mut self.velocity[off];
                *v = mu * *v - lr * (gp + wd * *p);
                *p = *p + *v;
                off += 1;
            }
        }
        Ok(())
    }
}

/// One epoch worth of training rows.
#[derive(Clone, Debug)]
pub struct Batch<F> {
    pub inputs: Matrix<F>,
    pub targets: Vec<Target<F>>,
    /// Ground-truth distributions, required only for a ground-truth blend.
    pub truth: Option<Vec<CategoricalDist<F>>>,
}

/// Supplier of training rows: a fixed dataset or a sampler that draws a
/// fresh transfer-set every epoch.
pub trait TrainingSource<F> {
    fn input_dim(&self) -> usize;

    /// Rows for the next epoch. `rng` is the sampling substream of the run.
    fn next_epoch(&mut self, rng: &mut Rng) -> Result<Batch<F>>;
}

/// A fixed set of rows reused every epoch.
pub struct FixedSource<F> {
    batch: Batch<F>,
}

impl<F: Scalar> FixedSource<F> {
    pub fn new(batch: Batch<F>) -> Result<Self> {
        if batch.inputs.rows() != batch.targets.len() {
            return shape(format!("{} inputs but {} targets", batch.inputs.rows(), batch.targets.len()));
        }
        Ok(Self { batch })
    }
}

impl<F: Scalar> TrainingSource<F> for FixedSource<F> {
    fn input_dim(&self) -> usize {
        self.batch.inputs.cols()
    }

    fn next_epoch(&mut self, _rng: &mut Rng) -> Result<Batch<F>> {
        Ok(self.batch.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
}

/// Minibatch SGD on `objective` over `source`.
///
/// Each epoch the source's rows are reshuffled from the shuffle substream and
/// cut into `batch_size` chunks (the last partial batch is kept). Returns the
/// mean loss of every epoch. Non-finite losses abort with [`Error::Numeric`].
pub fn train<F: Scalar>(
    mut net: Network<F>,
    source: &mut dyn TrainingSource<F>,
    objective: &Objective<F>,
    opt: &mut OptimizerState<F>,
    settings: TrainSettings,
    rng: &Rng,
) -> Result<(Network<F>, Vec<F>)> {
    objective.validate()?;
    if !objective.loss.accepts_head(net.head()) {
        return config(format!("{} does not apply to a {:?} head", objective.loss.name(), net.head()));
    }
    if settings.batch_size == 0 {
        return config("batch size must be positive");
    }
    if source.input_dim() != net.input_dim() {
        return shape(format!(
            "source provides {} features, network expects {}",
            source.input_dim(),
            net.input_dim()
        ));
    }
    let mut shuffle = rng.substream(Stream::Shuffle);
    let mut sampling = rng.substream(Stream::Sampling);
    let mut trace = Vec::with_capacity(settings.epochs);
    for epoch in 0..settings.epochs {
        let data = source.next_epoch(&mut sampling)?;
        let n = data.inputs.rows();
        if n == 0 || data.targets.len() != n {
            return shape(format!("epoch with {n} inputs and {} targets", data.targets.len()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle);
        let mut total = F::zero();
        for chunk in order.chunks(settings.batch_size) {
            let x = data.inputs.select_rows(chunk);
            let trace_b = net.forward_trace(&x)?;
            if !trace_b.output.is_finite() {
                return Err(Error::Numeric(format!("non-finite network output at epoch {epoch}")));
            }
            let mut upstream = Matrix::zeros(chunk.len(), net.output_dim());
            let scale = F::one() / F::of_usize(chunk.len());
            for (r, &i) in chunk.iter().enumerate() {
                let truth = data.truth.as_ref().map(|t| &t[i]);
                let lg = objective.evaluate(trace_b.output.row(r), &data.targets[i], truth)?;
                if !lg.loss.is_finite() {
                    return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}")));
                }
                total = total + lg.loss;
                for (u, g) in upstream.row_mut(r).iter_mut().zip(lg.grad) {
                    *u = g * scale;
                }
            }
            let grads = net.backward_trace(&trace_b, &upstream)?;
            opt.step(&mut net, &grads, epoch)?;
        }
        if !net.is_finite() {
            return Err(Error::Numeric(format!("non-finite parameters after epoch {epoch}")));
        }
        trace.push(total / F::of_usize(n));
    }
    Ok((net, trace))
}
