use rand::Rng;

use super::objective::{
    loss_prediction_loss, mixed_scores_with_grad, regularization_loss, searchnet_loss, searchnet_loss_grad,
    soft_select_count,
};
use crate::diffcore::{Activation, Gradients, MlpNetwork, ParamSet, RealMatrix};
use crate::error::{input_err, shape_err};
use crate::{seed, Real, Result};

/// Linear projections of every hidden layer to one scalar, summed: the predicted task loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPredictionHead<T> {
    weights: Vec<Vec<T>>,
    /// Kept as a one-element buffer so it can be handed out as a slice.
    bias: Vec<T>,
}

impl<T: Real> LossPredictionHead<T> {
    pub fn new(hidden: &[usize], seed: u64) -> Self {
        let mut rng = seed::stream(seed, "loss-pred", 0);
        let weights = hidden
            .iter()
            .map(|&h| {
                let limit = (6.0 / (h + 1) as f64).sqrt();
                (0..h).map(|_| T::lit(rng.random_range(-limit..limit))).collect()
            })
            .collect();
        Self { weights, bias: vec![T::zero()] }
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    pub fn bias(&self) -> T {
        self.bias[0]
    }

    /// Predicted loss per row of the hidden activations.
    pub fn predict(&self, hidden: &[RealMatrix<T>]) -> Result<Vec<T>> {
        if hidden.len() != self.weights.len() {
            return shape_err(format!("{} hidden layers for {} projections", hidden.len(), self.weights.len()));
        }
        let n = hidden.first().map_or(0, |h| h.rows());
        let mut out = vec![self.bias[0]; n];
        for (h, w) in hidden.iter().zip(&self.weights) {
            if h.cols() != w.len() || h.rows() != n {
                return shape_err("hidden activation does not match its projection");
            }
            for (o, row) in out.iter_mut().zip(h.row_iter()) {
                *o = *o + row.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>();
            }
        }
        Ok(out)
    }
}

/// SearchNet: maps a sample to one logit per candidate strategy, plus the loss-prediction
/// head reading its hidden layers.
#[derive(Debug, Clone)]
pub struct SearchHead<T> {
    pub network: MlpNetwork<T>,
    pub loss_pred: LossPredictionHead<T>,
}

/// Gradients shaped like a [`SearchHead`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGradients<T> {
    pub network: Gradients<T>,
    pub loss_pred_weights: Vec<Vec<T>>,
    pub loss_pred_bias: Vec<T>,
}

impl<T: Real> SearchGradients<T> {
    pub fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// One window of the SearchNet update. `losses` are FitNet's per-sample task losses,
/// taken as constants.
#[derive(Debug, Clone, Copy)]
pub struct SearchBatch<'a, T> {
    pub x: &'a RealMatrix<T>,
    pub scores: &'a RealMatrix<T>,
    pub threshold: T,
    pub losses: &'a [T],
    pub pairs: &'a [(usize, usize)],
}

/// Scalars shared by both alternating objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveScales {
    pub lambda: f64,
    pub lambda_bar: f64,
    /// Query ratio `t`.
    pub t: f64,
    pub temperature: f64,
    pub margin: f64,
    pub loss_pred: bool,
}

/// Value breakdown of one SearchNet objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchStep<T> {
    /// `L_S` plus the ranking loss when the loss-prediction head is enabled.
    pub total: T,
    pub search_loss: T,
    pub rank_loss: T,
    pub alpha: T,
    pub reg: T,
    pub mixed: Vec<T>,
}

impl<T: Real> SearchHead<T> {
    /// Fresh SearchNet `input -> hidden -> strategies` (no dropout) and loss-prediction head.
    pub fn new(input_dim: usize, hidden: &[usize], strategies: usize, seed: u64) -> Result<Self> {
        if strategies == 0 {
            return input_err("SearchNet needs at least one strategy output");
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(strategies);
        let network = MlpNetwork::new(&dims, Activation::Tanh, 0.0, seed::derive_seed(seed, "searchnet", 0))?;
        Ok(Self { network, loss_pred: LossPredictionHead::new(hidden, seed) })
    }

    pub fn strategies(&self) -> usize {
        self.network.output_dim()
    }

    /// Strategy logits `Θ`, one row per sample.
    pub fn strategy_logits(&self, x: &RealMatrix<T>) -> Result<RealMatrix<T>> {
        self.network.predict(x)
    }

    /// Evaluates the SearchNet objective on one window and returns its gradients.
    pub fn objective(&mut self, batch: &SearchBatch<'_, T>, scales: &ObjectiveScales) -> Result<(SearchStep<T>, SearchGradients<T>)> {
        let n = batch.x.rows();
        if batch.scores.shape() != (n, self.strategies()) || batch.losses.len() != n {
            return shape_err("search batch components disagree in shape");
        }
        let (theta, tape) = self.network.forward(batch.x)?;
        let lambda = T::lit(scales.lambda);
        let lambda_bar = T::lit(scales.lambda_bar);
        let t = T::lit(scales.t);
        let temperature = T::lit(scales.temperature);
        let (mixed, dmix) = mixed_scores_with_grad(batch.scores, batch.threshold, &theta, lambda)?;
        let (alpha, _) = soft_select_count(&mixed, temperature);
        let reg = regularization_loss(alpha, t, n);
        let search_loss = searchnet_loss(batch.losses, &mixed, lambda_bar, reg)?;
        let ds = searchnet_loss_grad(batch.losses, &mixed, lambda_bar, t, temperature);
        let mut upstream = dmix;
        for (j, &g) in ds.iter().enumerate() {
            for v in upstream.row_mut(j) {
                *v = *v * g;
            }
        }

        let hidden = tape.hidden();
        let mut lp_weights: Vec<Vec<T>> = self.loss_pred.weights.iter().map(|w| vec![T::zero(); w.len()]).collect();
        let mut lp_bias = vec![T::zero()];
        let mut rank_loss = T::zero();
        let hidden_up = if scales.loss_pred {
            let predicted = self.loss_pred.predict(hidden)?;
            let (loss, gp) = loss_prediction_loss(&predicted, batch.losses, batch.pairs, T::lit(scales.margin))?;
            rank_loss = loss;
            lp_bias[0] = gp.iter().copied().sum();
            let mut ups = Vec::with_capacity(hidden.len());
            for ((h, w), gw) in hidden.iter().zip(&self.loss_pred.weights).zip(lp_weights.iter_mut()) {
                let mut up = RealMatrix::zeros(h.rows(), h.cols());
                for (j, &g) in gp.iter().enumerate() {
                    for ((u, &wv), (acc, &hv)) in up.row_mut(j).iter_mut().zip(w).zip(gw.iter_mut().zip(h.row(j))) {
                        *u = g * wv;
                        *acc = *acc + g * hv;
                    }
                }
                ups.push(up);
            }
            Some(ups)
        } else {
            None
        };
        let network = self.network.backward(&tape, &upstream, hidden_up.as_deref())?;
        let step = SearchStep { total: search_loss + rank_loss, search_loss, rank_loss, alpha, reg, mixed };
        Ok((step, SearchGradients { network, loss_pred_weights: lp_weights, loss_pred_bias: lp_bias }))
    }
}

impl<T: Real> ParamSet<T> for SearchHead<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        let mut out = self.network.param_slices();
        out.extend(self.loss_pred.weights.iter().map(|w| w.as_slice()));
        out.push(&self.loss_pred.bias);
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.network.param_slices_mut();
        out.extend(self.loss_pred.weights.iter_mut().map(|w| w.as_mut_slice()));
        out.push(&mut self.loss_pred.bias);
        out
    }
}

impl<T: Real> ParamSet<T> for SearchGradients<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        let mut out = self.network.param_slices();
        out.extend(self.loss_pred_weights.iter().map(|w| w.as_slice()));
        out.push(&self.loss_pred_bias);
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.network.param_slices_mut();
        out.extend(self.loss_pred_weights.iter_mut().map(|w| w.as_mut_slice()));
        out.push(&mut self.loss_pred_bias);
        out
    }
}
