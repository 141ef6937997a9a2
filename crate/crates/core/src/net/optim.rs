use crate::error::{Error, Result};

use super::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerMethod {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl OptimizerMethod {
    pub const ADAM: OptimizerMethod = OptimizerMethod::Adam {
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };
}

/// Update rule plus its moment accumulators for one network.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    method: OptimizerMethod,
    learning_rate: f64,
    first_moment: Option<Gradients>,
    second_moment: Option<Gradients>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(method: OptimizerMethod, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            method,
            learning_rate,
            first_moment: None,
            second_moment: None,
            step_count: 0,
        })
    }

    /// Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerMethod::ADAM, learning_rate)
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerMethod::Sgd, learning_rate)
    }

    pub fn method(&self) -> OptimizerMethod {
        self.method
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one descent step. A non-finite gradient is rejected before any
    /// parameter is touched.
    pub fn apply_update(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if !grads.matches(net) {
            return Err(Error::InvalidArgument(
                "gradient shapes do not match the network".into(),
            ));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        let lr = self.learning_rate;
        match self.method {
            OptimizerMethod::Sgd => {
                for (w, g) in net.weights.iter_mut().zip(&grads.weights) {
                    w.scaled_add(-lr, g);
                }
                for (b, g) in net.biases.iter_mut().zip(&grads.biases) {
                    b.scaled_add(-lr, g);
                }
            }
            OptimizerMethod::Adam { beta1, beta2, epsilon } => {
                let m = self.first_moment.get_or_insert_with(|| Gradients::zeros_like(net));
                let v = self.second_moment.get_or_insert_with(|| Gradients::zeros_like(net));
                if !m.matches(net) || !v.matches(net) {
                    return Err(Error::InvalidArgument(
                        "optimizer state belongs to another network".into(),
                    ));
                }
                let t = (self.step_count + 1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
                };
                for l in 0..net.weights.len() {
                    ndarray::Zip::from(&mut net.weights[l])
                        .and(&grads.weights[l])
                        .and(&mut m.weights[l])
                        .and(&mut v.weights[l])
                        .for_each(|p, &g, m, v| update(p, g, m, v));
                    ndarray::Zip::from(&mut net.biases[l])
                        .and(&grads.biases[l])
                        .and(&mut m.biases[l])
                        .and(&mut v.biases[l])
                        .for_each(|p, &g, m, v| update(p, g, m, v));
                }
            }
        }
        self.step_count += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;
    use ndarray::array;

    fn scalar_net(w: f64) -> Mlp {
        Mlp::from_parts(
            vec![1, 1],
            vec![array![[w]]],
            vec![array![0.0]],
            Activation::Sigmoid,
            Activation::Linear,
        )
        .unwrap()
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients {
            weights: vec![array![[g]]],
            biases: vec![array![0.0]],
        }
    }

    #[test]
    fn sgd_step() {
        let mut net = scalar_net(2.0);
        let mut opt = OptimizerState::sgd(0.001).unwrap();
        opt.apply_update(&mut net, &scalar_grad(3.0)).unwrap();
        assert_eq!(net.weights()[0][[0, 0]], 2.0 - 0.001 * 3.0);
        let before = net.clone();
        opt.apply_update(&mut net, &scalar_grad(0.0)).unwrap();
        assert_eq!(net, before);
        assert_eq!(opt.step_count(), 2);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        for g in [1e-3, 0.7, -42.0] {
            let mut net = scalar_net(1.0);
            let mut opt = OptimizerState::adam(0.001).unwrap();
            opt.apply_update(&mut net, &scalar_grad(g)).unwrap();
            let moved = net.weights()[0][[0, 0]] - 1.0;
            // m̂/√v̂ = sign(g), shy of 1 only by ε/|g|
            assert!((moved + 0.001 * g.signum()).abs() < 1e-7, "g={g} moved={moved}");
        }
    }

    #[test]
    fn rejects_non_finite_and_mismatch() {
        let mut net = scalar_net(1.0);
        let mut opt = OptimizerState::adam(0.001).unwrap();
        let err = opt.apply_update(&mut net, &scalar_grad(f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(net, scalar_net(1.0));
        assert_eq!(opt.step_count(), 0);
        let other = Gradients::zeros_like(&Mlp::zeros(&[2, 1]).unwrap());
        assert!(opt.apply_update(&mut net, &other).is_err());
        assert!(OptimizerState::sgd(0.0).is_err());
        assert!(OptimizerState::adam(f64::NAN).is_err());
    }
}
