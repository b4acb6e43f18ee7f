use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{softmax_rows, ParamSet, RealMatrix};
use crate::error::{input_err, shape_err};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(T::zero()),
        }
    }

    /// Derivative expressed through the pre-activation.
    #[inline]
    fn derivative<T: Real>(self, z: T) -> T {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Dropout behaviour of a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout masks resampled on every pass.
    Train,
    /// Deterministic, no dropout.
    Eval,
    /// Dropout active for Monte-Carlo uncertainty estimates.
    McSample,
}

/// Fully connected network: hidden layers with an activation and inverted dropout,
/// followed by a linear output layer.
///
/// `weights[l]` has shape `dims[l] x dims[l + 1]`, so a batch is propagated as `X W + b`.
#[derive(Debug, Clone)]
pub struct MlpNetwork<T> {
    dims: Vec<usize>,
    weights: Vec<RealMatrix<T>>,
    biases: Vec<Vec<T>>,
    activations: Vec<Activation>,
    dropout_rate: T,
    mode: Mode,
    rng: ChaCha8Rng,
    /// Bumped by every forward pass and every parameter mutation; tapes carry the
    /// value they were produced under.
    generation: u64,
}

/// Everything `backward` needs from the forward pass that produced it.
#[derive(Debug, Clone)]
pub struct GradientTape<T> {
    generation: u64,
    input: RealMatrix<T>,
    /// Pre-activations of each hidden layer.
    pre: Vec<RealMatrix<T>>,
    /// Hidden outputs after activation and dropout (what the next layer consumes).
    hidden: Vec<RealMatrix<T>>,
    /// Inverted-dropout multipliers (0 or 1/(1-rate)) per hidden layer, when active.
    masks: Vec<Option<RealMatrix<T>>>,
}

impl<T: Real> GradientTape<T> {
    pub fn hidden(&self) -> &[RealMatrix<T>] {
        &self.hidden
    }

    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }
}

/// Parameter gradients, shaped like the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<RealMatrix<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &MlpNetwork<T>) -> Self {
        Self {
            weights: net.weights.iter().map(|w| RealMatrix::zeros(w.rows(), w.cols())).collect(),
            biases: net.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

impl<T: Real> ParamSet<T> for Gradients<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}

impl<T: Real> MlpNetwork<T> {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(
        dims: &[usize],
        activation: Activation,
        dropout_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return input_err(format!("invalid layer dimensions {dims:?}"));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return input_err(format!("dropout rate {dropout_rate} outside [0, 1)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| T::lit(rng.random_range(-limit..limit)))
                .collect();
            weights.push(RealMatrix::from_vec(fan_in, fan_out, data)?);
            biases.push(vec![T::zero(); fan_out]);
        }
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            activations: vec![activation; dims.len() - 2],
            dropout_rate: T::lit(dropout_rate),
            mode: Mode::Train,
            rng,
            generation: 0,
        })
    }

    /// Builds a network from explicit parameters.
    pub fn from_parameters(
        weights: Vec<RealMatrix<T>>,
        biases: Vec<Vec<T>>,
        activation: Activation,
        dropout_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return shape_err("need one bias vector per weight matrix");
        }
        let mut dims = vec![weights[0].rows()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.rows() != *dims.last().unwrap() {
                return shape_err(format!("layer {l} expects {} inputs, got {}", dims[l], w.rows()));
            }
            if b.len() != w.cols() {
                return shape_err(format!("layer {l} bias has {} entries, expected {}", b.len(), w.cols()));
            }
            dims.push(w.cols());
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return input_err(format!("dropout rate {dropout_rate} outside [0, 1)"));
        }
        Ok(Self {
            activations: vec![activation; dims.len() - 2],
            dims,
            weights,
            biases,
            dropout_rate: T::lit(dropout_rate),
            mode: Mode::Train,
            rng: ChaCha8Rng::seed_from_u64(seed),
            generation: 0,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn hidden_dims(&self) -> &[usize] {
        &self.dims[1..self.dims.len() - 1]
    }

    pub fn weights(&self) -> &[RealMatrix<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<T>] {
        &self.biases
    }

    pub fn dropout_rate(&self) -> T {
        self.dropout_rate
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Reseeds the instance-local dropout stream.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Forward pass in the current mode, recording a tape for [`Self::backward`].
    pub fn forward(&mut self, x: &RealMatrix<T>) -> Result<(RealMatrix<T>, GradientTape<T>)> {
        self.check_input(x)?;
        self.generation += 1;
        let dropout = self.mode != Mode::Eval && self.dropout_rate > T::zero();
        let mut rng = self.rng.clone();
        let (logits, tape) = self.propagate(x, if dropout { Some(&mut rng) } else { None });
        self.rng = rng;
        Ok((logits, GradientTape { generation: self.generation, ..tape }))
    }

    /// Deterministic eval-mode logits, irrespective of the current mode.
    pub fn predict(&self, x: &RealMatrix<T>) -> Result<RealMatrix<T>> {
        self.check_input(x)?;
        Ok(self.propagate(x, None::<&mut ChaCha8Rng>).0)
    }

    pub fn predict_proba(&self, x: &RealMatrix<T>) -> Result<RealMatrix<T>> {
        softmax_rows(&self.predict(x)?)
    }

    /// Eval-mode activations of the last hidden layer, or the input itself when the
    /// network has no hidden layer.
    pub fn embed(&self, x: &RealMatrix<T>) -> Result<RealMatrix<T>> {
        self.check_input(x)?;
        let (_, tape) = self.propagate(x, None::<&mut ChaCha8Rng>);
        Ok(tape.hidden.last().cloned().unwrap_or_else(|| x.clone()))
    }

    /// Eval-mode probabilities and last-hidden-layer embeddings from one pass.
    pub fn predict_with_embedding(&self, x: &RealMatrix<T>) -> Result<(RealMatrix<T>, RealMatrix<T>)> {
        self.check_input(x)?;
        let (logits, tape) = self.propagate(x, None::<&mut ChaCha8Rng>);
        let emb = tape.hidden.last().cloned().unwrap_or_else(|| x.clone());
        Ok((softmax_rows(&logits)?, emb))
    }

    /// `samples` softmax outputs with dropout active, drawn from a stream seeded by `seed`.
    pub fn mc_dropout_predict(
        &self,
        x: &RealMatrix<T>,
        samples: usize,
        seed: u64,
    ) -> Result<Vec<RealMatrix<T>>> {
        if samples < 2 {
            return input_err(format!("Monte-Carlo dropout needs at least 2 passes, got {samples}"));
        }
        self.check_input(x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let active = self.dropout_rate > T::zero();
        (0..samples)
            .map(|_| {
                let rng = if active { Some(&mut rng) } else { None };
                softmax_rows(&self.propagate(x, rng).0)
            })
            .collect()
    }

    /// Analytic gradients of a scalar loss given `upstream = dL/dlogits` and, optionally,
    /// extra gradients `dL/dh_l` on each hidden output (as recorded in the tape).
    pub fn backward(
        &self,
        tape: &GradientTape<T>,
        upstream: &RealMatrix<T>,
        hidden_upstream: Option<&[RealMatrix<T>]>,
    ) -> Result<Gradients<T>> {
        if tape.generation != self.generation {
            return Err(Error::State(
                "tape does not come from the latest forward pass of this network".into(),
            ));
        }
        let batch = tape.batch_size();
        if upstream.shape() != (batch, self.output_dim()) {
            return shape_err(format!(
                "upstream gradient is {}x{}, expected {}x{}",
                upstream.rows(),
                upstream.cols(),
                batch,
                self.output_dim()
            ));
        }
        let n_hidden = self.activations.len();
        if let Some(extra) = hidden_upstream {
            if extra.len() != n_hidden {
                return shape_err(format!("{} hidden gradients for {n_hidden} hidden layers", extra.len()));
            }
            for (l, g) in extra.iter().enumerate() {
                if g.shape() != tape.hidden[l].shape() {
                    return shape_err(format!("hidden gradient {l} has the wrong shape"));
                }
            }
        }

        let mut grads = Gradients::zeros_like(self);
        let mut delta = upstream.clone();
        for l in (0..self.weights.len()).rev() {
            let layer_input = if l == 0 { &tape.input } else { &tape.hidden[l - 1] };
            grads.weights[l] = layer_input.t_matmul(&delta)?;
            grads.biases[l] = delta.column_sums();
            if l == 0 {
                break;
            }
            let mut g = delta.matmul_t(&self.weights[l])?;
            if let Some(extra) = hidden_upstream {
                g = g.add(&extra[l - 1])?;
            }
            if let Some(mask) = &tape.masks[l - 1] {
                g = g.hadamard(mask)?;
            }
            let act = self.activations[l - 1];
            delta = g.zip_with(&tape.pre[l - 1], |gv, z| gv * act.derivative(z))?;
        }
        Ok(grads)
    }

    fn check_input(&self, x: &RealMatrix<T>) -> Result<()> {
        if x.cols() != self.input_dim() {
            return shape_err(format!("input has {} features, network expects {}", x.cols(), self.input_dim()));
        }
        if x.rows() == 0 {
            return input_err("empty batch");
        }
        x.ensure_finite("network input")
    }

    fn propagate<R: Rng>(&self, x: &RealMatrix<T>, mut dropout: Option<&mut R>) -> (RealMatrix<T>, GradientTape<T>) {
        let n_layers = self.weights.len();
        let keep = T::one() - self.dropout_rate;
        let keep_f64 = keep.as_f64();
        let scale = T::one() / keep;
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut hidden = Vec::with_capacity(n_layers - 1);
        let mut masks = Vec::with_capacity(n_layers - 1);
        let mut current = x.clone();
        for l in 0..n_layers {
            let mut z = current.matmul(&self.weights[l]).expect("layer shapes are consistent");
            z.add_row_broadcast(&self.biases[l]);
            if l + 1 == n_layers {
                current = z;
                break;
            }
            let act = self.activations[l];
            let mut h = z.map(|v| act.apply(v));
            let mask = dropout.as_deref_mut().map(|rng| {
                let data = (0..h.rows() * h.cols())
                    .map(|_| if rng.random::<f64>() < keep_f64 { scale } else { T::zero() })
                    .collect();
                RealMatrix::from_vec(h.rows(), h.cols(), data).expect("mask sized to layer")
            });
            if let Some(m) = &mask {
                h = h.hadamard(m).expect("mask sized to layer");
            }
            pre.push(z);
            hidden.push(h.clone());
            masks.push(mask);
            current = h;
        }
        let tape = GradientTape { generation: self.generation, input: x.clone(), pre, hidden, masks };
        (current, tape)
    }
}

impl<T: Real> ParamSet<T> for MlpNetwork<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        // any outstanding tape is stale once parameters can change
        self.generation += 1;
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::fingerprint;

    fn tiny_net() -> MlpNetwork<f64> {
        MlpNetwork::new(&[2, 3, 2], Activation::Tanh, 0.0, 7).unwrap()
    }

    #[test]
    fn zero_weights_give_bias_logits() {
        let w = vec![RealMatrix::zeros(3, 2)];
        let net_b = vec![vec![0.25, -1.5]];
        let mut net = MlpNetwork::from_parameters(w, net_b, Activation::Relu, 0.0, 0).unwrap();
        let x = RealMatrix::from_f64(2, 3, &[1., 2., 3., -4., 5., 6.]).unwrap();
        let (logits, _) = net.forward(&x).unwrap();
        assert_eq!(logits.as_slice(), &[0.25, -1.5, 0.25, -1.5]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut net =
            MlpNetwork::from_parameters(vec![RealMatrix::identity(3)], vec![vec![0.0; 3]], Activation::Tanh, 0.0, 0)
                .unwrap();
        let x = RealMatrix::from_f64(2, 3, &[1., -2., 3., 0.5, 0., 9.]).unwrap();
        assert_eq!(net.forward(&x).unwrap().0, x);
    }

    #[test]
    fn forward_rejects_bad_inputs() {
        let mut net = tiny_net();
        let wrong = RealMatrix::zeros(1, 3);
        assert!(matches!(net.forward(&wrong), Err(Error::Shape(_))));
        let nan = RealMatrix::from_f64(1, 2, &[f64::NAN, 0.0]).unwrap();
        assert!(matches!(net.forward(&nan), Err(Error::Input(_))));
    }

    #[test]
    fn eval_mode_is_bit_identical() {
        let mut net = MlpNetwork::<f64>::new(&[2, 8, 2], Activation::Relu, 0.5, 3).unwrap();
        net.set_mode(Mode::Eval);
        let x = RealMatrix::from_f64(2, 2, &[0.3, -0.1, 1.0, 2.0]).unwrap();
        let a = net.forward(&x).unwrap().0;
        let b = net.forward(&x).unwrap().0;
        assert_eq!(a, b);
        assert_eq!(a, net.predict(&x).unwrap());
    }

    #[test]
    fn train_mode_resamples_masks() {
        let mut net = MlpNetwork::<f64>::new(&[2, 32, 2], Activation::Relu, 0.5, 3).unwrap();
        let x = RealMatrix::filled(4, 2, 1.0);
        let a = net.forward(&x).unwrap().0;
        let b = net.forward(&x).unwrap().0;
        assert_ne!(a, b);
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut net = tiny_net();
        let x = RealMatrix::filled(1, 2, 0.5);
        let (_, old) = net.forward(&x).unwrap();
        let (_, fresh) = net.forward(&x).unwrap();
        let up = RealMatrix::filled(1, 2, 1.0);
        assert!(matches!(net.backward(&old, &up, None), Err(Error::State(_))));
        assert!(net.backward(&fresh, &up, None).is_ok());
        net.param_slices_mut();
        assert!(matches!(net.backward(&fresh, &up, None), Err(Error::State(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut net = tiny_net();
        let x = RealMatrix::from_f64(2, 2, &[0.1, 0.2, -0.3, 0.4]).unwrap();
        let (_, tape) = net.forward(&x).unwrap();
        let g = net.backward(&tape, &RealMatrix::zeros(2, 2), None).unwrap();
        assert!(g.param_slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn linear_layer_sum_loss_gradient() {
        // L = sum of outputs => dL/dW[i][k] = sum_b x[b][i], dL/db = batch size
        let w = RealMatrix::from_f64(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let mut net = MlpNetwork::from_parameters(vec![w], vec![vec![0.0; 2]], Activation::Tanh, 0.0, 0).unwrap();
        let x = RealMatrix::from_f64(2, 3, &[1., 2., 3., 4., 5., 6.]).unwrap();
        let (_, tape) = net.forward(&x).unwrap();
        let g = net.backward(&tape, &RealMatrix::filled(2, 2, 1.0), None).unwrap();
        assert_eq!(g.weights[0].as_slice(), &[5., 5., 7., 7., 9., 9.]);
        assert_eq!(g.biases[0], vec![2.0, 2.0]);
    }

    #[test]
    fn mc_dropout_contracts() {
        let x = RealMatrix::from_f64(3, 2, &[0.1, 0.2, 0.3, -0.4, 1.0, 0.0]).unwrap();
        let deterministic = MlpNetwork::<f64>::new(&[2, 8, 3], Activation::Relu, 0.0, 1).unwrap();
        let stack = deterministic.mc_dropout_predict(&x, 4, 9).unwrap();
        assert!(stack.windows(2).all(|w| w[0] == w[1]));

        let noisy = MlpNetwork::<f64>::new(&[2, 8, 3], Activation::Relu, 0.3, 1).unwrap();
        let a = noisy.mc_dropout_predict(&x, 5, 11).unwrap();
        let b = noisy.mc_dropout_predict(&x, 5, 11).unwrap();
        assert_eq!(a, b);
        assert!(matches!(noisy.mc_dropout_predict(&x, 1, 0), Err(Error::Input(_))));
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let mut net = tiny_net();
        let before = fingerprint(&net);
        assert_eq!(before, fingerprint(&net.clone()));
        net.param_slices_mut()[0][0] += 1e-12;
        assert_ne!(before, fingerprint(&net));
    }

    #[test]
    fn network_is_generic_over_f32() {
        let mut net = MlpNetwork::<f32>::new(&[2, 4, 2], Activation::Tanh, 0.0, 5).unwrap();
        let x = RealMatrix::<f32>::from_f64(1, 2, &[0.5, -0.5]).unwrap();
        let (logits, tape) = net.forward(&x).unwrap();
        assert!(logits.is_finite());
        let g = net.backward(&tape, &RealMatrix::filled(1, 2, 1.0), None).unwrap();
        assert!(g.is_finite());
    }
}
