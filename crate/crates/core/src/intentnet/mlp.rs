//! Mean-field Gaussian Bayesian MLP and its ELBO.
//!
//! Every weight carries an independent Gaussian posterior `N(mu, exp(log_std)^2)`
//! under a zero-mean Gaussian prior. The network has no bias terms:
//!
//! ```text
//! h_0 = tanh(x · W_1)
//! h_k = tanh(h_{k-1} · W_{k+1})      (extra hidden layers)
//! y   = sigmoid(h_last · W_out)
//! p   = y / sum(y)
//! ```
//!
//! The expected log-likelihood is estimated with the reparameterization
//! `w = mu + sigma * eps`; the KL term is analytic.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::IntentNetError;
use crate::rng::Rng;

pub const DEFAULT_PRIOR_STD: f64 = 1.0;
pub const DEFAULT_INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub shape: [usize; 2],
    pub mu: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl Layer {
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalMLP {
    pub prior_std: f64,
    pub layers: Vec<Layer>,
    /// Set once the model went through training (or was loaded from a
    /// checkpoint); prediction refuses untrained models.
    #[serde(skip_serializing, default = "loaded_models_are_trained")]
    pub trained: bool,
}

fn loaded_models_are_trained() -> bool {
    true
}

/// One concrete draw of every weight matrix.
pub type Weights = Vec<Vec<f64>>;

impl VariationalMLP {
    /// Posterior initialized at `mu = 0`, `sigma = init_std`.
    pub fn new(
        input: usize,
        hidden: &[usize],
        output: usize,
        prior_std: f64,
        init_std: f64,
    ) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(output);
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                shape: [w[0], w[1]],
                mu: vec![0.0; w[0] * w[1]],
                log_std: vec![init_std.ln(); w[0] * w[1]],
            })
            .collect();
        VariationalMLP {
            prior_std,
            layers,
            trained: false,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Layer::rows)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::cols)
    }

    pub fn n_weights(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    pub fn mean_weights(&self) -> Weights {
        self.layers.iter().map(|l| l.mu.clone()).collect()
    }

    pub fn draw_noise(&self, rng: &mut Rng) -> Weights {
        self.layers
            .iter()
            .map(|l| (0..l.len()).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }

    /// `w = mu + sigma * eps`.
    pub fn weights_from_noise(&self, eps: &Weights) -> Weights {
        self.layers
            .iter()
            .zip(eps)
            .map(|(l, e)| {
                l.mu.iter()
                    .zip(&l.log_std)
                    .zip(e)
                    .map(|((m, s), e)| m + s.exp() * e)
                    .collect()
            })
            .collect()
    }

    pub fn sample_weights(&self, rng: &mut Rng) -> Weights {
        let eps = self.draw_noise(rng);
        self.weights_from_noise(&eps)
    }

    /// Analytic `KL(q || prior)` summed over all weights.
    pub fn kl(&self) -> f64 {
        let s2 = self.prior_std * self.prior_std;
        self.layers
            .iter()
            .flat_map(|l| l.mu.iter().zip(&l.log_std))
            .map(|(&m, &ls)| {
                let var = (2.0 * ls).exp();
                self.prior_std.ln() - ls + (var + m * m) / (2.0 * s2) - 0.5
            })
            .sum()
    }

    fn check_weights(&self, w: &Weights) -> Result<(), IntentNetError> {
        if w.len() != self.layers.len()
            || w.iter().zip(&self.layers).any(|(w, l)| w.len() != l.len())
        {
            return Err(IntentNetError::ShapeMismatch {
                expected: self.n_weights(),
                got: w.iter().map(Vec::len).sum(),
            });
        }
        Ok(())
    }

    /// Categorical parameter for input `x` under one weight draw.
    pub fn forward(&self, x: &[f64], w: &Weights) -> Result<Vec<f64>, IntentNetError> {
        if x.len() != self.input_dim() {
            return Err(IntentNetError::ShapeMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        self.check_weights(w)?;
        let mut scratch = Activations::new(self);
        Ok(self.forward_into(x, w, &mut scratch).to_vec())
    }

    fn forward_into<'a>(&self, x: &[f64], w: &Weights, act: &'a mut Activations) -> &'a [f64] {
        act.values[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (head, tail) = act.values.split_at_mut(k + 1);
            let input = &head[k];
            let out = &mut tail[0];
            matvec(input, &w[k], layer.cols(), out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            } else {
                out.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
        }
        let y = &act.values[last + 1];
        let total: f64 = y.iter().sum();
        act.probs
            .iter_mut()
            .zip(y)
            .for_each(|(p, v)| *p = v / total);
        &act.probs
    }

    /// Mean of [`forward`](Self::forward) over `n` posterior draws.
    pub fn predict(&self, x: &[f64], n: usize, rng: &mut Rng) -> Result<Vec<f64>, IntentNetError> {
        let draws: Vec<Weights> = (0..n).map(|_| self.sample_weights(rng)).collect();
        Ok(self
            .predict_batch(std::slice::from_ref(&x.to_vec()), &draws)?
            .remove(0))
    }

    /// Posterior-predictive means for many inputs, sharing `draws` across them.
    pub fn predict_batch(
        &self,
        xs: &[Vec<f64>],
        draws: &[Weights],
    ) -> Result<Vec<Vec<f64>>, IntentNetError> {
        if !self.trained {
            return Err(IntentNetError::UntrainedModel);
        }
        if draws.is_empty() {
            return Err(IntentNetError::EmptyInput);
        }
        for w in draws {
            self.check_weights(w)?;
        }
        let mut act = Activations::new(self);
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            if x.len() != self.input_dim() {
                return Err(IntentNetError::ShapeMismatch {
                    expected: self.input_dim(),
                    got: x.len(),
                });
            }
            let mut mean = vec![0.0; self.output_dim()];
            for w in draws {
                let p = self.forward_into(x, w, &mut act);
                mean.iter_mut().zip(p).for_each(|(m, p)| *m += p);
            }
            mean.iter_mut().for_each(|m| *m /= draws.len() as f64);
            out.push(mean);
        }
        Ok(out)
    }

    /// ELBO estimate and its gradient for fixed noise `eps`.
    ///
    /// The likelihood is summed over `batch` and rescaled by
    /// `likelihood_scale` (dataset size over batch size for minibatches; 0
    /// leaves the KL term alone).
    pub fn elbo_and_grad(
        &self,
        batch: &[(&[f64], usize)],
        eps: &Weights,
        likelihood_scale: f64,
    ) -> (f64, Gradient) {
        let w = self.weights_from_noise(eps);
        let mut grad_w: Weights = self.layers.iter().map(|l| vec![0.0; l.len()]).collect();
        let mut act = Activations::new(self);
        let mut delta: Vec<Vec<f64>> = act.values.iter().map(|v| vec![0.0; v.len()]).collect();
        let mut loglik = 0.0;
        let last = self.layers.len() - 1;
        if likelihood_scale != 0.0 {
            for &(x, y) in batch {
                self.forward_into(x, &w, &mut act);
                let out = &act.values[last + 1];
                let total: f64 = out.iter().sum();
                loglik += (out[y] / total).ln();
                // d log p_y / d z_k where s = sigmoid(z).
                let d_out = &mut delta[last + 1];
                for (k, (d, &s)) in d_out.iter_mut().zip(out.iter()).enumerate() {
                    let own = if k == y { 1.0 - s } else { 0.0 };
                    *d = likelihood_scale * (own - s * (1.0 - s) / total);
                }
                for k in (0..=last).rev() {
                    let layer = &self.layers[k];
                    let cols = layer.cols();
                    let input = &act.values[k];
                    let (lower, upper) = delta.split_at_mut(k + 1);
                    let d_z = &upper[0];
                    let g = &mut grad_w[k];
                    for (i, &xi) in input.iter().enumerate() {
                        if xi != 0.0 {
                            let row = &mut g[i * cols..(i + 1) * cols];
                            row.iter_mut().zip(d_z).for_each(|(g, d)| *g += xi * d);
                        }
                    }
                    if k > 0 {
                        let d_in = &mut lower[k];
                        let wk = &w[k];
                        for (i, d) in d_in.iter_mut().enumerate() {
                            let row = &wk[i * cols..(i + 1) * cols];
                            let s: f64 = row.iter().zip(d_z).map(|(a, b)| a * b).sum();
                            let h = input[i];
                            *d = s * (1.0 - h * h);
                        }
                    }
                }
            }
        }
        let s2 = self.prior_std * self.prior_std;
        let mut grad = Gradient {
            mu: Vec::with_capacity(self.layers.len()),
            log_std: Vec::with_capacity(self.layers.len()),
        };
        for (k, layer) in self.layers.iter().enumerate() {
            let mut gm = Vec::with_capacity(layer.len());
            let mut gs = Vec::with_capacity(layer.len());
            for j in 0..layer.len() {
                let sigma = layer.log_std[j].exp();
                let gw = grad_w[k][j];
                gm.push(gw - layer.mu[j] / s2);
                gs.push(gw * eps[k][j] * sigma - (sigma * sigma / s2 - 1.0));
            }
            grad.mu.push(gm);
            grad.log_std.push(gs);
        }
        (likelihood_scale * loglik - self.kl(), grad)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.n_weights());
        for l in &self.layers {
            v.extend_from_slice(&l.mu);
            v.extend_from_slice(&l.log_std);
        }
        v
    }

    pub fn set_params_flat(&mut self, p: &[f64]) {
        let mut off = 0;
        for l in self.layers.iter_mut() {
            let n = l.len();
            l.mu.copy_from_slice(&p[off..off + n]);
            l.log_std.copy_from_slice(&p[off + n..off + 2 * n]);
            off += 2 * n;
        }
    }
}

/// ELBO gradient with respect to the posterior parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub mu: Vec<Vec<f64>>,
    pub log_std: Vec<Vec<f64>>,
}

impl Gradient {
    /// Same layout as [`VariationalMLP::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (m, s) in self.mu.iter().zip(&self.log_std) {
            v.extend_from_slice(m);
            v.extend_from_slice(s);
        }
        v
    }

    pub fn is_finite(&self) -> bool {
        self.mu
            .iter()
            .chain(&self.log_std)
            .flatten()
            .all(|g| g.is_finite())
    }
}

/// Per-parameter adaptive step sizes (Adam), used for ascent on the ELBO.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Adam {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// Moves `params` along `grad` (ascent).
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t);
        let b2t = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            params[i] += self.learning_rate * mh / (vh.sqrt() + self.epsilon);
        }
    }
}

/// One stochastic ascent step on the ELBO. Returns the ELBO estimate at the
/// pre-update parameters.
pub fn elbo_step(
    model: &mut VariationalMLP,
    opt: &mut Adam,
    batch: &[(&[f64], usize)],
    likelihood_scale: f64,
    mc_samples: usize,
    rng: &mut Rng,
) -> Result<f64, IntentNetError> {
    let mc = mc_samples.max(1);
    let mut total = vec![0.0; 2 * model.n_weights()];
    let mut elbo = 0.0;
    for _ in 0..mc {
        let eps = model.draw_noise(rng);
        let (e, g) = model.elbo_and_grad(batch, &eps, likelihood_scale);
        if !e.is_finite() || !g.is_finite() {
            return Err(IntentNetError::NonFiniteGradient);
        }
        elbo += e / mc as f64;
        total
            .iter_mut()
            .zip(g.flat())
            .for_each(|(t, g)| *t += g / mc as f64);
    }
    let mut params = model.params_flat();
    opt.ascend(&mut params, &total);
    model.set_params_flat(&params);
    Ok(elbo)
}

struct Activations {
    values: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl Activations {
    fn new(model: &VariationalMLP) -> Self {
        let mut values = vec![vec![0.0; model.input_dim()]];
        values.extend(model.layers.iter().map(|l| vec![0.0; l.cols()]));
        Activations {
            values,
            probs: vec![0.0; model.output_dim()],
        }
    }
}

fn matvec(x: &[f64], w: &[f64], cols: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            let row = &w[i * cols..(i + 1) * cols];
            out.iter_mut().zip(row).for_each(|(o, w)| *o += xi * w);
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}
