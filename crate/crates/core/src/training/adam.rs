use crate::network::{Trainable, ALPHA_MAX};
use crate::util::{round_f32, softplus_inv};

/// Adaptive moment estimation with bias correction.
///
/// `alpha_raw` additionally receives decoupled weight decay and is capped so
/// that `softplus(alpha_raw) <= ALPHA_MAX`. Parameters are kept exactly
/// representable in `f32` after every update.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub alpha_weight_decay: f64,
    step: u64,
    m: Trainable,
    v: Trainable,
}

impl Adam {
    pub fn new(shape: &Trainable, learning_rate: f64, alpha_weight_decay: f64) -> Self {
        let mut m = shape.clone();
        m.fill(0.0);
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            alpha_weight_decay,
            step: 0,
            v: m.clone(),
            m,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut Trainable, grads: &Trainable) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        let blocks = params
            .blocks_mut()
            .into_iter()
            .zip(grads.blocks())
            .zip(self.m.blocks_mut().into_iter().zip(self.v.blocks_mut()));
        for (((_, p), (_, g)), ((_, m), (_, v))) in blocks {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = round_f32(p[i] - lr * m_hat / (v_hat.sqrt() + eps));
            }
        }
        let a = &mut params.alpha_raw[0];
        *a -= lr * self.alpha_weight_decay * *a;
        *a = round_f32(a.min(softplus_inv(ALPHA_MAX)));
        // rounding up past the cap would break the bound
        while crate::util::softplus(*a) > ALPHA_MAX {
            *a = f32::from_bits((*a as f32).to_bits() - 1) as f64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ModelConfig, ModelParams};

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient_sign() {
        let p = ModelParams::new(ModelConfig::default()).unwrap();
        let mut t = p.trainable.clone();
        let mut g = t.clone();
        g.fill(0.0);
        g.head_b2[0] = 3.0;
        g.query[5] = -0.2;
        let mut adam = Adam::new(&t, 1e-3, 0.0);
        let before = t.clone();
        adam.update(&mut t, &g);
        assert!((t.head_b2[0] - (before.head_b2[0] - 1e-3)).abs() < 1e-6);
        assert!((t.query[5] - (before.query[5] + 1e-3)).abs() < 1e-6);
        assert_eq!(t.enc_w1, before.enc_w1);
    }

    #[test]
    fn alpha_stays_bounded() {
        let p = ModelParams::new(ModelConfig::default()).unwrap();
        let mut t = p.trainable.clone();
        let mut g = t.clone();
        g.fill(0.0);
        g.alpha_raw[0] = -1.0;
        let mut adam = Adam::new(&t, 0.5, 1e-3);
        for _ in 0..200 {
            adam.update(&mut t, &g);
            let alpha = crate::util::softplus(t.alpha_raw[0]);
            assert!(alpha > 0.0 && alpha <= ALPHA_MAX, "alpha = {alpha}");
        }
    }
}
