//! First-order optimizers: AdaBelief, Nesterov momentum and projected
//! gradient descent on the unit sphere.
//!
//! Every optimizer is a small deterministic state machine: the same state and
//! gradient always produce the same update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_shapes(params: &[f64], grad: &[f64], buffer: usize) -> Result<()> {
    if params.len() != grad.len() || params.len() != buffer {
        return Err(Error::Dimension {
            expected: buffer,
            got: if params.len() != buffer { params.len() } else { grad.len() },
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Training("non-finite gradient".into()));
    }
    Ok(())
}

/// Clips `grad` to Euclidean norm at most `max_norm` (no-op when `None`).
pub fn clip_gradient(grad: &mut [f64], max_norm: Option<f64>) {
    if let Some(limit) = max_norm {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > limit && norm > 0.0 {
            let s = limit / norm;
            grad.iter_mut().for_each(|g| *g *= s);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBeliefConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdaBeliefConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-16,
        }
    }
}

/// AdaBelief with bias correction: the second moment tracks the squared
/// deviation of the gradient from its running mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBelief {
    pub config: AdaBeliefConfig,
    m: Vec<f64>,
    s: Vec<f64>,
    step: u64,
}

impl AdaBelief {
    pub fn new(n: usize, config: AdaBeliefConfig) -> Self {
        Self {
            config,
            m: vec![0.0; n],
            s: vec![0.0; n],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        check_shapes(params, grad, self.m.len())?;
        let AdaBeliefConfig { beta1, beta2, eps } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            let d = g - self.m[i];
            self.s[i] = beta2 * self.s[i] + (1.0 - beta2) * d * d + eps;
            let m_hat = self.m[i] / bc1;
            let s_hat = self.s[i] / bc2;
            params[i] -= lr * m_hat / (s_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Classical Nesterov momentum: `v ← μv − lr·∇f(θ + μv)`, `θ ← θ + v`.
///
/// The caller evaluates the gradient at [`Nesterov::lookahead`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nesterov {
    pub momentum: f64,
    velocity: Vec<f64>,
    step: u64,
}

pub const DEFAULT_MOMENTUM: f64 = 0.6;

impl Nesterov {
    pub fn new(n: usize, momentum: f64) -> Self {
        Self {
            momentum,
            velocity: vec![0.0; n],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// The point `θ + μv` at which the next gradient must be evaluated.
    pub fn lookahead(&self, params: &[f64]) -> Vec<f64> {
        params
            .iter()
            .zip(&self.velocity)
            .map(|(p, v)| p + self.momentum * v)
            .collect()
    }

    pub fn step(&mut self, params: &mut [f64], grad_at_lookahead: &[f64], lr: f64) -> Result<()> {
        check_shapes(params, grad_at_lookahead, self.velocity.len())?;
        self.step += 1;
        for i in 0..params.len() {
            self.velocity[i] = self.momentum * self.velocity[i] - lr * grad_at_lookahead[i];
            params[i] += self.velocity[i];
        }
        Ok(())
    }

    /// Nesterov step followed by renormalization onto the unit sphere.
    pub fn step_projected(&mut self, params: &mut [f64], grad_at_lookahead: &[f64], lr: f64) -> Result<()> {
        self.step(params, grad_at_lookahead, lr)?;
        normalize(params)
    }
}

/// Rescales `v` to unit Euclidean norm.
pub fn normalize(v: &mut [f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Training(format!("cannot normalize a vector of norm {norm}")));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(())
}

/// One gradient step followed by renormalization to the unit sphere.
pub fn projected_gradient_step(params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    check_shapes(params, grad, params.len())?;
    let norm = params.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!("projected step needs a unit vector, norm is {norm}")));
    }
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
    normalize(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn adabelief_zero_gradient_is_a_no_op() {
        let mut opt = AdaBelief::new(3, AdaBeliefConfig::default());
        let mut p = vec![0.3, -1.0, 2.0];
        opt.step(&mut p, &[0.0; 3], 0.1).unwrap();
        assert_eq!(p, vec![0.3, -1.0, 2.0]);
    }

    #[test]
    fn adabelief_first_step_closed_form() {
        let cfg = AdaBeliefConfig::default();
        for g in [0.5, -2.0, 1e-3] {
            let mut opt = AdaBelief::new(1, cfg);
            let mut p = vec![0.0];
            opt.step(&mut p, &[g], 0.01).unwrap();
            // m̂ = g, ŝ = (β1² g² (1−β2) + ε)/(1−β2).
            let s_hat = (cfg.beta1 * cfg.beta1 * g * g * (1.0 - cfg.beta2) + cfg.eps) / (1.0 - cfg.beta2);
            let expected = -0.01 * g / (s_hat.sqrt() + cfg.eps);
            assert_abs_diff_eq!(p[0], expected, epsilon = 1e-15);
            assert_abs_diff_eq!(p[0].abs(), 0.01 / cfg.beta1, epsilon = 1e-9);
        }
    }

    #[test]
    fn adabelief_minimizes_a_parabola() {
        let mut opt = AdaBelief::new(1, AdaBeliefConfig::default());
        let mut x = vec![1.0];
        for _ in 0..200 {
            let g = [2.0 * x[0]];
            opt.step(&mut x, &g, 0.1).unwrap();
        }
        assert!(x[0].abs() < 1e-2, "x = {}", x[0]);
    }

    #[test]
    fn adabelief_rejects_nan() {
        let mut opt = AdaBelief::new(1, AdaBeliefConfig::default());
        assert!(opt.step(&mut [0.0], &[f64::NAN], 0.1).is_err());
        assert!(opt.step(&mut [0.0, 1.0], &[0.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn adabelief_degenerate_hyperparameters_stay_finite() {
        let cfg = AdaBeliefConfig { beta1: 0.9, beta2: 0.9, eps: 1.0 };
        let mut opt = AdaBelief::new(2, cfg);
        let mut p = vec![1.0, -1.0];
        let mut state = 12345u64;
        for _ in 0..100 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let g = [((state >> 11) as f64 / 2f64.powi(53)) * 1e6 - 5e5, 1e-300];
            opt.step(&mut p, &g, 0.1).unwrap();
        }
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn nesterov_zero_state_zero_gradient() {
        let mut opt = Nesterov::new(2, DEFAULT_MOMENTUM);
        let mut p = vec![1.0, 2.0];
        opt.step(&mut p, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(p, vec![1.0, 2.0]);
    }

    #[test]
    fn nesterov_without_momentum_is_gradient_descent() {
        let mut opt = Nesterov::new(1, 0.0);
        let mut p = vec![1.0];
        let mut q = 1.0f64;
        for _ in 0..20 {
            let g = [2.0 * opt.lookahead(&p)[0]];
            opt.step(&mut p, &g, 0.05).unwrap();
            q -= 0.05 * 2.0 * q;
            assert_eq!(p[0], q);
        }
    }

    fn iterations_to_converge(momentum: f64) -> usize {
        let mut opt = Nesterov::new(1, momentum);
        let mut p = vec![1.0];
        for it in 1..10_000 {
            let g = [2.0 * opt.lookahead(&p)[0]];
            opt.step(&mut p, &g, 0.01).unwrap();
            if p[0].abs() < 1e-6 {
                return it;
            }
        }
        usize::MAX
    }

    #[test]
    fn nesterov_beats_plain_descent() {
        assert!(iterations_to_converge(DEFAULT_MOMENTUM) < iterations_to_converge(0.0));
    }

    #[test]
    fn projected_step_keeps_unit_norm() {
        let mut p = vec![0.6, 0.8];
        projected_gradient_step(&mut p, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(p, vec![0.6, 0.8]);
        projected_gradient_step(&mut p, &[1.0, -3.0], 0.1).unwrap();
        assert_abs_diff_eq!(p.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(projected_gradient_step(&mut [2.0, 0.0], &[0.0, 0.0], 0.1).is_err());
        assert!(projected_gradient_step(&mut [1.0, 0.0], &[10.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn projected_rayleigh_descent_finds_smallest_eigenvalue() {
        // diag(3, 1, 2) plus a coupling: smallest eigenvalue by hand.
        let m = [[3.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let exact = 2.0 - (1.0f64 + 0.25).sqrt();
        let mut v = vec![1.0 / 3f64.sqrt(); 3];
        for _ in 0..2000 {
            let mv: Vec<f64> = (0..3).map(|i| (0..3).map(|j| m[i][j] * v[j]).sum()).collect();
            let g: Vec<f64> = mv.iter().map(|x| 2.0 * x).collect();
            projected_gradient_step(&mut v, &g, 0.05).unwrap();
        }
        let value: f64 = (0..3).map(|i| (0..3).map(|j| v[i] * m[i][j] * v[j]).sum::<f64>()).sum();
        assert_abs_diff_eq!(value, exact, epsilon = 1e-10);
    }

    #[test]
    fn clipping_limits_norm() {
        let mut g = vec![3.0, 4.0];
        clip_gradient(&mut g, None);
        assert_eq!(g, vec![3.0, 4.0]);
        clip_gradient(&mut g, Some(1.0));
        assert_abs_diff_eq!(g[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 0.8, epsilon = 1e-15);
    }
}
