/// First-order update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    rule: Optimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    pub fn new(rule: Optimizer, lr: f64, n: usize) -> Self {
        let (m, v) = match rule {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::Adam { .. } => (vec![0.0; n], vec![0.0; n]),
        };
        Self {
            rule,
            lr,
            m,
            v,
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        match self.rule {
            Optimizer::Sgd => {
                for (p, g) in theta.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for i in 0..theta.len() {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    theta[i] -= self.lr * mh / (vh.sqrt() + eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_is_lr_sign() {
        let mut s = OptimizerState::new(Optimizer::adam(), 0.1, 2);
        let mut th = [1.0, 1.0];
        s.step(&mut th, &[3.0, -0.5]);
        assert!((th[0] - 0.9).abs() < 1e-6);
        assert!((th[1] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn sgd_descends_quadratic() {
        let mut s = OptimizerState::new(Optimizer::Sgd, 0.1, 1);
        let mut th = [4.0];
        for _ in 0..200 {
            let g = [2.0 * th[0]];
            s.step(&mut th, &g);
        }
        assert!(th[0].abs() < 1e-9);
    }
}
