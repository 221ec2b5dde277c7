use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::approx::{Activation, InitScheme, Mlp, MlpDocument, Trace};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal Gaussian over pre-squash actions `z`, with a network mean and
/// state-independent log standard deviations. Executed actions are `limit ⊙ tanh(z)`.
///
/// The flat parameter vector is the mean network's parameters followed by the log
/// standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    mean: Mlp,
    log_std: Vec<f64>,
    limits: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(mean: Mlp, log_std: Vec<f64>, limits: Vec<f64>) -> Result<Self> {
        if log_std.len() != mean.output_width() || limits.len() != mean.output_width() {
            return Err(Error::domain(format!(
                "policy with {} outputs needs as many log std entries ({}) and limits ({})",
                mean.output_width(),
                log_std.len(),
                limits.len()
            )));
        }
        if log_std.iter().any(|v| !v.is_finite()) || limits.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::domain("log std must be finite and limits positive"));
        }
        Ok(Self {
            mean,
            log_std,
            limits,
        })
    }

    /// Tanh hidden layers and a linear mean head.
    pub fn init(
        obs_width: usize,
        hidden: &[usize],
        limits: &[f64],
        init_log_std: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut widths = vec![obs_width];
        widths.extend_from_slice(hidden);
        widths.push(limits.len());
        let mut acts = vec![Activation::Tanh; hidden.len()];
        acts.push(Activation::Linear);
        let mut mean = Mlp::init(&widths, &acts, seed, InitScheme::ScaledUniform)?;
        mean.scale_output_layer(0.01);
        Self::new(mean, vec![init_log_std; limits.len()], limits.to_vec())
    }

    pub fn mean_net(&self) -> &Mlp {
        &self.mean
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn limits(&self) -> &[f64] {
        &self.limits
    }

    pub fn action_width(&self) -> usize {
        self.limits.len()
    }

    pub fn num_params(&self) -> usize {
        self.mean.num_params() + self.log_std.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mean.params().to_vec();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::domain(format!(
                "policy has {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let n = self.mean.num_params();
        self.mean.set_params(&params[..n])?;
        self.log_std.copy_from_slice(&params[n..]);
        Ok(())
    }

    /// Applies `delta` to the parameter vector in place.
    pub fn add_to_params(&mut self, delta: &[f64], scale: f64) {
        let n = self.mean.num_params();
        for (p, d) in self.mean.params_mut().iter_mut().zip(&delta[..n]) {
            *p += scale * d;
        }
        for (p, d) in self.log_std.iter_mut().zip(&delta[n..]) {
            *p += scale * d;
        }
    }

    pub fn mean(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.mean.forward(s)
    }

    fn check_z(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.action_width() {
            return Err(Error::domain(format!(
                "action has width {}, policy expects {}",
                z.len(),
                self.action_width()
            )));
        }
        Ok(())
    }

    /// Gaussian log-density of the pre-squash action `z`.
    pub fn log_prob(&self, s: &[f64], z: &[f64]) -> Result<f64> {
        self.check_z(z)?;
        let m = self.mean(s)?;
        Ok(self.log_prob_at_mean(&m, z))
    }

    fn log_prob_at_mean(&self, m: &[f64], z: &[f64]) -> f64 {
        let mut lp = 0.0;
        for i in 0..z.len() {
            let k = (z[i] - m[i]) * (-self.log_std[i]).exp();
            lp += -0.5 * k * k - self.log_std[i] - 0.5 * LN_2PI;
        }
        lp
    }

    /// Log-density of the executed action `a = limit ⊙ tanh(z)`, including the
    /// change-of-variables term.
    pub fn log_prob_squashed(&self, s: &[f64], z: &[f64]) -> Result<f64> {
        let lp = self.log_prob(s, z)?;
        let correction: f64 = z
            .iter()
            .zip(&self.limits)
            .map(|(z, l)| l.ln() + log_one_minus_tanh_sq(*z))
            .sum();
        Ok(lp - correction)
    }

    /// Log-density and its gradient with respect to the flat parameter vector, scaled
    /// by `scale` and added into `grad`.
    pub fn accumulate_log_prob_gradient(
        &self,
        s: &[f64],
        z: &[f64],
        scale: f64,
        trace: &mut Trace,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check_z(z)?;
        self.mean.forward_trace(s, trace)?;
        let m = trace.output().to_vec();
        let n = self.mean.num_params();
        let mut upstream = vec![0.0; z.len()];
        for i in 0..z.len() {
            let inv_var = (-2.0 * self.log_std[i]).exp();
            let diff = z[i] - m[i];
            upstream[i] = diff * inv_var;
            grad[n + i] += scale * (diff * diff * inv_var - 1.0);
        }
        self.mean.backward_trace(trace, &upstream, scale, &mut grad[..n], false)?;
        Ok(self.log_prob_at_mean(&m, z))
    }

    pub fn log_prob_gradient(&self, s: &[f64], z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.num_params()];
        let mut trace = Trace::default();
        let lp = self.accumulate_log_prob_gradient(s, z, 1.0, &mut trace, &mut grad)?;
        Ok((lp, grad))
    }

    /// Closed-form entropy of the pre-squash Gaussian.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| 0.5 * (LN_2PI + 1.0) + ls).sum()
    }

    /// Draws `z ~ N(mean(s), σ²)`.
    pub fn sample<R: Rng + ?Sized>(&self, s: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let m = self.mean(s)?;
        Ok(m.iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let e: f64 = rng.sample(StandardNormal);
                m + ls.exp() * e
            })
            .collect())
    }

    /// Executed action for a pre-squash sample.
    pub fn squash(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.limits).map(|(z, l)| l * z.tanh()).collect()
    }

    /// Deterministic action `limit ⊙ tanh(mean(s))` used for evaluation.
    pub fn greedy_action(&self, s: &[f64]) -> Result<Vec<f64>> {
        Ok(self.squash(&self.mean(s)?))
    }

    pub fn to_document(&self) -> PolicyDocument {
        PolicyDocument {
            mean: self.mean.to_document(),
            log_std: self.log_std.clone(),
            limits: self.limits.clone(),
        }
    }

    pub fn from_document(doc: &PolicyDocument) -> Result<Self> {
        Self::new(Mlp::from_document(&doc.mean)?, doc.log_std.clone(), doc.limits.clone())
    }
}

/// `ln(1 − tanh²z)`, stable for large |z|.
fn log_one_minus_tanh_sq(z: f64) -> f64 {
    let a = z.abs();
    2.0 * (std::f64::consts::LN_2 - a - (-2.0 * a).exp().ln_1p())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDocument {
    pub mean: MlpDocument,
    pub log_std: Vec<f64>,
    pub limits: Vec<f64>,
}
