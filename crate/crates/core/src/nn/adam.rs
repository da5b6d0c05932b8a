use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    /// Default moment decay rates (0.9, 0.999) and epsilon 1e-8, one
    /// accumulator per tensor length in `shapes`.
    pub fn new(learning_rate: f64, shapes: &[usize]) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Shape("optimizer state, parameters and gradients differ in tensor count".into()));
        }
        for ((p, g), m) in params.iter().zip(&grads).zip(&self.first) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::Shape("tensor length mismatch in optimizer update".into()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let correct1 = 1.0 - self.beta1.powi(t);
        let correct2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / correct1;
                let v_hat = v[i] / correct2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = AdamState::new(0.01, &[3]);
        let mut p = vec![1.0, -2.0, 0.5];
        adam.update(vec![&mut p], vec![&[0.0; 3]]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_closed_form() {
        // t = 1: m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps)
        let mut adam = AdamState::new(0.001, &[1]);
        let mut p = vec![0.0];
        adam.update(vec![&mut p], vec![&[1.0]]).unwrap();
        let want = -0.001 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - want).abs() < 1e-15);
        assert!((p[0] + 0.001).abs() < 1e-10);
    }

    #[test]
    fn equal_gradients_equal_updates() {
        let mut adam = AdamState::new(0.05, &[1, 1]);
        let (mut a, mut b) = (vec![3.0], vec![-7.0]);
        adam.update(vec![&mut a, &mut b], vec![&[0.4], &[0.4]]).unwrap();
        assert!(((a[0] - 3.0) - (b[0] + 7.0)).abs() < 1e-14);
    }

    #[test]
    fn shape_mismatch() {
        let mut adam = AdamState::new(0.1, &[2]);
        let mut p = vec![0.0; 3];
        assert!(adam.update(vec![&mut p], vec![&[0.0; 3]]).is_err());
    }
}
