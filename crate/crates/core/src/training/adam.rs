use super::params::ModelParams;

/// Adam moment estimates, one flat buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.2.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let g_all = grads.tensors();
        for (i, (_, p)) in params.tensors_mut().into_iter().enumerate() {
            let g = g_all[i].2;
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::TrainConfig;

    fn small() -> ModelParams {
        let cfg = TrainConfig {
            n: 2,
            m: 2,
            hidden_dim: 2,
            d_out: 3,
            ..TrainConfig::default()
        };
        ModelParams::init(4, 1, &cfg)
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = small();
        let before = p.clone();
        let g = p.zeros_like();
        let mut opt = OptState::new(&p);
        opt.step(&mut p, &g, 0.1);
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first step is lr · sign(g).
        let mut p = small();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.proj.w.fill(0.5);
        let mut opt = OptState::new(&p);
        opt.step(&mut p, &g, 0.01);
        let diff = &before.proj.w - &p.proj.w;
        assert!(diff.iter().all(|d| (d - 0.01).abs() < 1e-9));
        assert_eq!(p.se, before.se);
    }
}
