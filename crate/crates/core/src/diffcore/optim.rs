use super::ParamSet;
use crate::error::{input_err, shape_err};
use crate::{Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    pub fn sgd() -> Self {
        OptimizerKind::Sgd { momentum: 0.0 }
    }
}

/// SGD (optionally with heavy-ball momentum) or bias-corrected Adam.
///
/// Moment buffers are created on the first step with the shapes of the parameter
/// set they are applied to; later steps must use the same shapes.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    kind: OptimizerKind,
    learning_rate: T,
    steps: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return input_err(format!("learning rate must be positive, got {learning_rate}"));
        }
        Ok(Self { kind, learning_rate: T::lit(learning_rate), steps: 0, first: Vec::new(), second: Vec::new() })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::sgd(), learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::adam(), learning_rate)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> T {
        self.learning_rate
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to `params` using `grads`.
    pub fn step<P, G>(&mut self, params: &mut P, grads: &G) -> Result<()>
    where
        P: ParamSet<T> + ?Sized,
        G: ParamSet<T> + ?Sized,
    {
        let g = grads.param_slices();
        {
            let p = params.param_slices();
            if p.len() != g.len() || p.iter().zip(&g).any(|(a, b)| a.len() != b.len()) {
                return shape_err("gradient buffers do not mirror parameter buffers");
            }
        }
        if self.first.is_empty() {
            self.first = g.iter().map(|s| vec![T::zero(); s.len()]).collect();
            if matches!(self.kind, OptimizerKind::Adam { .. }) {
                self.second = self.first.clone();
            }
        } else if self.first.len() != g.len() || self.first.iter().zip(&g).any(|(a, b)| a.len() != b.len()) {
            return shape_err("optimizer moments were created for a different parameter set");
        }
        self.steps += 1;
        let lr = self.learning_rate;
        let mut p = params.param_slices_mut();
        match self.kind {
            OptimizerKind::Sgd { momentum } => {
                let mu = T::lit(momentum);
                for ((ps, gs), vs) in p.iter_mut().zip(&g).zip(self.first.iter_mut()) {
                    for ((w, &dw), v) in ps.iter_mut().zip(gs.iter()).zip(vs.iter_mut()) {
                        if momentum == 0.0 {
                            *w = *w - lr * dw;
                        } else {
                            *v = mu * *v + dw;
                            *w = *w - lr * *v;
                        }
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(epsilon));
                let t = i32::try_from(self.steps).unwrap_or(i32::MAX);
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                for (((ps, gs), ms), vs) in
                    p.iter_mut().zip(&g).zip(self.first.iter_mut()).zip(self.second.iter_mut())
                {
                    for (((w, &dw), m), v) in ps.iter_mut().zip(gs.iter()).zip(ms.iter_mut()).zip(vs.iter_mut()) {
                        *m = b1 * *m + (T::one() - b1) * dw;
                        *v = b2 * *v + (T::one() - b2) * dw * dw;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A bare vector of scalars as a parameter set.
    struct Params(Vec<f64>);

    impl ParamSet<f64> for Params {
        fn param_slices(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn sgd_scalar_step() {
        let mut opt = OptimizerState::<f64>::sgd(0.1).unwrap();
        let mut theta = Params(vec![1.0]);
        opt.step(&mut theta, &Params(vec![2.0])).unwrap();
        assert!((theta.0[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for mut opt in [OptimizerState::<f64>::sgd(0.5).unwrap(), OptimizerState::<f64>::adam(0.5).unwrap()] {
            let mut theta = Params(vec![1.0, -3.0]);
            for _ in 0..3 {
                opt.step(&mut theta, &Params(vec![0.0, 0.0])).unwrap();
            }
            assert_eq!(theta.0, vec![1.0, -3.0]);
        }
    }

    #[test]
    fn adam_single_step_matches_recurrence() {
        let (lr, b1, b2, eps) = (0.01, 0.9, 0.999, 1e-8);
        let mut opt = OptimizerState::<f64>::adam(lr).unwrap();
        let mut theta = Params(vec![0.5]);
        let g = 0.3;
        opt.step(&mut theta, &Params(vec![g])).unwrap();
        // hand evaluation: m = 0.1 g, v = 0.001 g^2, m_hat = g, v_hat = g^2
        let m: f64 = (1.0 - b1) * g;
        let v: f64 = (1.0 - b2) * g * g;
        let expected = 0.5 - lr * (m / (1.0 - b1)) / ((v / (1.0 - b2)).sqrt() + eps);
        assert!((theta.0[0] - expected).abs() < 1e-15);
        assert!((theta.0[0] - (0.5 - 0.01 * 0.3 / (0.3 + 1e-8))).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut opt = OptimizerState::<f64>::sgd(0.1).unwrap();
        let mut theta = Params(vec![1.0, 2.0]);
        assert!(opt.step(&mut theta, &Params(vec![1.0])).is_err());
        opt.step(&mut theta, &Params(vec![1.0, 1.0])).unwrap();
        let mut other = Params(vec![1.0, 2.0, 3.0]);
        assert!(opt.step(&mut other, &Params(vec![0.0; 3])).is_err());
    }

    #[test]
    fn invalid_learning_rate() {
        assert!(OptimizerState::<f64>::sgd(0.0).is_err());
        assert!(OptimizerState::<f64>::adam(-1.0).is_err());
    }

    #[test]
    fn both_optimizers_descend_convex_quadratic() {
        // f(x) = sum_i c_i (x_i - a_i)^2
        let a = [1.0, -2.0, 0.5];
        let c = [1.0, 3.0, 0.2];
        let f = |x: &[f64]| x.iter().zip(&a).zip(&c).map(|((x, a), c)| c * (x - a) * (x - a)).sum::<f64>();
        for mut opt in [OptimizerState::<f64>::sgd(1e-3).unwrap(), OptimizerState::<f64>::adam(1e-3).unwrap()] {
            let mut x = Params(vec![0.0; 3]);
            let mut prev = f(&x.0);
            for _ in 0..100 {
                let g: Vec<f64> = x.0.iter().zip(&a).zip(&c).map(|((x, a), c)| 2.0 * c * (x - a)).collect();
                opt.step(&mut x, &Params(g)).unwrap();
                let now = f(&x.0);
                assert!(now < prev, "{now} !< {prev}");
                prev = now;
            }
        }
    }
}
