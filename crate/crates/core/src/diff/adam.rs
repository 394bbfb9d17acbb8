use crate::error::{Error, Result};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Adam {
    /// One moment buffer per parameter tensor, sized by `param_lens`.
    pub fn new(learning_rate: f64, param_lens: &[usize]) -> Result<Self> {
        Self::with_betas(learning_rate, 0.9, 0.999, 1e-8, param_lens)
    }

    pub fn with_betas(
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        param_lens: &[usize],
    ) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::contract(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0 < beta1 && beta1 < 1.0 && 0.0 < beta2 && beta2 < 1.0 && epsilon > 0.0) {
            return Err(Error::contract(format!(
                "invalid Adam constants beta1={beta1} beta2={beta2} epsilon={epsilon}"
            )));
        }
        Ok(Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step_count: 0,
            first_moment: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::dim(format!(
                "Adam tracks {} tensors, got {} params and {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first_moment[i].len() || g.len() != p.len() {
                return Err(Error::dim(format!(
                    "Adam tensor {i}: moments {}, param {}, grad {}",
                    self.first_moment[i].len(),
                    p.len(),
                    g.len()
                )));
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let lr = self.learning_rate;
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = b1 * m[j] + (1.0 - b1) * gj;
                v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = Adam::new(0.01, &[3]).unwrap();
        let mut w = vec![1.0, -2.0, 0.5];
        let g = vec![0.3, -7.0, 1e-3];
        adam.step(&mut [&mut w], &[&g]).unwrap();
        let deltas = [1.0 - w[0], -2.0 - w[1], 0.5 - w[2]];
        for (d, gi) in deltas.iter().zip(&g) {
            assert!((d - 0.01 * gi.signum()).abs() < 1e-6, "{d}");
        }
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut adam = Adam::new(0.1, &[2]).unwrap();
        let mut w = vec![3.0, -4.0];
        adam.step(&mut [&mut w], &[&[0.0, 0.0]]).unwrap();
        assert_eq!(w, vec![3.0, -4.0]);
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut adam = Adam::new(0.1, &[1]).unwrap();
        let mut w = vec![0.0];
        for _ in 0..100 {
            let g = [2.0 * (w[0] - 5.0)];
            adam.step(&mut [&mut w], &[&g]).unwrap();
        }
        assert!((w[0] - 5.0).abs() < 0.5, "w = {}", w[0]);
    }

    #[test]
    fn rejects_length_mismatch() {
        let mut adam = Adam::new(0.1, &[2]).unwrap();
        let mut w = vec![0.0; 3];
        assert!(matches!(
            adam.step(&mut [&mut w], &[&[0.0; 3]]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(Adam::with_betas(0.1, 1.0, 0.999, 1e-8, &[1]).is_err());
        assert!(Adam::new(0.0, &[1]).is_err());
    }
}
