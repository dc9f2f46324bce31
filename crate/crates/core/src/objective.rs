//! Agent objectives and their stochastic gradient oracles.
//!
//! Every agent `k` owns a separable quadratic
//! `f_k(x) = 1/2 sum_d a_{k,d} (x_d - x*_{k,d})^2`. Stochastic gradients add
//! zero-mean Gaussian noise with per-coordinate variance
//! `sigma_k^2 + M_k ||grad f_k(x)||^2 / d`. The gradient-proportional part is
//! split evenly over the `d` coordinates; `sigma_k^2` applies to each one.

use serde::{Deserialize, Serialize};

use crate::rng::NoiseStream;
use crate::scalar::{check_simplex, norm_sq};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticTask<T> {
    /// Diagonal of the Hessian, one entry per dimension.
    pub curvature: Vec<T>,
    /// Minimizer `x*_k`.
    pub optimum: Vec<T>,
    /// Standard deviation of the additive gradient noise at the optimum.
    pub noise_std: T,
    /// Coefficient of the gradient-norm-proportional variance term.
    #[serde(default)]
    pub noise_scale: T,
}

impl<T: Scalar> QuadraticTask<T> {
    pub fn new(curvature: Vec<T>, optimum: Vec<T>, noise_std: T) -> Result<Self> {
        let task = Self {
            curvature,
            optimum,
            noise_std,
            noise_scale: T::zero(),
        };
        task.validate()?;
        Ok(task)
    }

    /// One-dimensional task `a/2 (x - x*)^2`.
    pub fn scalar(curvature: T, optimum: T, noise_std: T) -> Result<Self> {
        Self::new(vec![curvature], vec![optimum], noise_std)
    }

    pub fn with_noise_scale(mut self, noise_scale: T) -> Result<Self> {
        self.noise_scale = noise_scale;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.curvature.is_empty() {
            return Err(Error::invalid("curvature", "empty"));
        }
        if self.curvature.len() != self.optimum.len() {
            return Err(Error::DimensionMismatch {
                expected: self.curvature.len(),
                got: self.optimum.len(),
            });
        }
        if let Some(a) = self.curvature.iter().find(|a| !(**a > T::zero()) || !a.is_finite()) {
            return Err(Error::invalid("curvature", format!("entries must be positive, got {a}")));
        }
        if self.optimum.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("optimum", "non-finite entry"));
        }
        if !(self.noise_std >= T::zero()) || !self.noise_std.is_finite() {
            return Err(Error::invalid("noise_std", format!("must be >= 0, got {}", self.noise_std)));
        }
        if !(self.noise_scale >= T::zero()) || !self.noise_scale.is_finite() {
            return Err(Error::invalid(
                "noise_scale",
                format!("must be >= 0, got {}", self.noise_scale),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.curvature.len()
    }

    /// Smoothness constant `L`: the largest curvature.
    pub fn smoothness(&self) -> T {
        self.curvature.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// PL constant `mu`: the smallest curvature.
    pub fn pl_constant(&self) -> T {
        self.curvature.iter().copied().fold(T::infinity(), T::min)
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Noiseless loss `1/2 sum a_d (x_d - x*_d)^2`. The minimum value is 0.
    pub fn eval_loss(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        Ok(self.loss_unchecked(x))
    }

    pub(crate) fn loss_unchecked(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        self.curvature
            .iter()
            .zip(&self.optimum)
            .zip(x)
            .map(|((&a, &s), &v)| half * a * (v - s) * (v - s))
            .sum()
    }

    pub fn true_gradient(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x)?;
        let mut out = vec![T::zero(); self.dim()];
        self.gradient_into(x, &mut out);
        Ok(out)
    }

    /// Writes `A (x - x*)` into `out`. Lengths are the caller's responsibility.
    pub(crate) fn gradient_into(&self, x: &[T], out: &mut [T]) {
        for (((o, &a), &s), &v) in out.iter_mut().zip(&self.curvature).zip(&self.optimum).zip(x) {
            *o = a * (v - s);
        }
    }

    /// Total noise variance `E||n||^2` at the optimum, `d sigma^2`.
    pub fn noise_var(&self) -> T {
        T::lit(self.dim() as f64) * self.noise_std * self.noise_std
    }

    /// Per-coordinate noise standard deviation given the true gradient.
    pub(crate) fn coord_noise_std(&self, grad: &[T]) -> T {
        let base = self.noise_std * self.noise_std;
        if self.noise_scale > T::zero() {
            let d = T::lit(grad.len() as f64);
            (base + self.noise_scale * norm_sq(grad) / d).sqrt()
        } else {
            self.noise_std
        }
    }

    /// Adds this task's gradient noise to `grad` in place, drawing from the
    /// stream's current window.
    pub(crate) fn perturb(&self, grad: &mut [T], stream: &mut NoiseStream) {
        let sd = self.coord_noise_std(grad);
        if sd == T::zero() {
            return;
        }
        for g in grad.iter_mut() {
            *g = *g + sd * stream.standard_normal::<T>();
        }
    }

    /// Draws `g_k(x) = grad f_k(x) + n` from the stream's current window.
    /// The caller positions the stream at the `(agent, step)` it wants.
    pub fn sample_gradient(
        &self,
        x: &[T],
        agent: usize,
        stream: &mut NoiseStream,
    ) -> Result<GradientSample<T>> {
        let mut value = self.true_gradient(x)?;
        self.perturb(&mut value, stream);
        Ok(GradientSample { value, agent })
    }
}

/// Mean estimation of `mu` from samples `z ~ N(mu, sigma^2)`, written as
/// minimizing `1/2 (x - mu)^2` with stochastic gradients `x - z`.
pub fn mean_estimation_task<T: Scalar>(mu: T, sigma: T) -> Result<QuadraticTask<T>> {
    QuadraticTask::scalar(T::one(), mu, sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample<T> {
    pub value: Vec<T>,
    pub agent: usize,
}

impl<T: Scalar> GradientSample<T> {
    pub fn new(value: Vec<T>, agent: usize) -> Self {
        Self { value, agent }
    }

    pub fn dim(&self) -> usize {
        self.value.len()
    }
}

/// Inter-agent constants for a main task and its collaborators.
///
/// `grad_scale_mismatch` (m) and the offsets `zeta_k^2` are the nominal
/// quadratic values: `m = max_{k,d} ((a_k - a_0)/a_0)^2` and
/// `zeta_k^2 = ||A_k (x*_k - x*_0)||^2`. Each alone is exact when the other
/// part vanishes. When a collaborator differs in both curvature and optimum
/// the cross term makes the pair violate the gradient-similarity inequality
/// at some points; [`SimilarityParams::certified`] returns constants that
/// satisfy it everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams<T> {
    pub smoothness: T,
    pub pl_constant: T,
    pub grad_scale_mismatch: T,
    /// `zeta^2 = sum_k tau_k zeta_k^2`.
    pub grad_offset_sq: T,
    pub per_agent_offset_sq: Vec<T>,
    pub per_agent_scale_mismatch: Vec<T>,
    pub hessian_dissimilarity: T,
    /// `M_0, M_1, ..., M_N`.
    pub noise_scales: Vec<T>,
    pub tau: Vec<T>,
}

pub fn similarity_params<T: Scalar>(
    main: &QuadraticTask<T>,
    collaborators: &[QuadraticTask<T>],
    tau: &[T],
) -> Result<SimilarityParams<T>> {
    if collaborators.is_empty() {
        return Err(Error::NoCollaborators);
    }
    main.validate()?;
    if tau.len() != collaborators.len() {
        return Err(Error::LengthMismatch {
            what: "tau",
            expected: collaborators.len(),
            got: tau.len(),
        });
    }
    check_simplex("tau", tau)?;

    let mut delta = T::zero();
    let mut offsets = Vec::with_capacity(collaborators.len());
    let mut scales = Vec::with_capacity(collaborators.len());
    for c in collaborators {
        c.validate()?;
        if c.dim() != main.dim() {
            return Err(Error::DimensionMismatch {
                expected: main.dim(),
                got: c.dim(),
            });
        }
        let mut zeta_sq = T::zero();
        let mut m_k = T::zero();
        for d in 0..main.dim() {
            let (a0, ak) = (main.curvature[d], c.curvature[d]);
            delta = delta.max((ak - a0).abs());
            let r = (ak - a0) / a0;
            m_k = m_k.max(r * r);
            let shift = ak * (c.optimum[d] - main.optimum[d]);
            zeta_sq = zeta_sq + shift * shift;
        }
        offsets.push(zeta_sq);
        scales.push(m_k);
    }
    let m = scales.iter().copied().fold(T::zero(), T::max);
    let zeta_sq = tau.iter().zip(&offsets).map(|(&t, &z)| t * z).sum();
    let mut noise_scales = vec![main.noise_scale];
    noise_scales.extend(collaborators.iter().map(|c| c.noise_scale));

    Ok(SimilarityParams {
        smoothness: main.smoothness(),
        pl_constant: main.pl_constant(),
        grad_scale_mismatch: m,
        grad_offset_sq: zeta_sq,
        per_agent_offset_sq: offsets,
        per_agent_scale_mismatch: scales,
        hessian_dissimilarity: delta,
        noise_scales,
        tau: tau.to_vec(),
    })
}

impl<T: Scalar> SimilarityParams<T> {
    /// Constants given directly, for a single collaborator with weight 1.
    /// `noise_scale` is the main agent's `M_0`.
    pub fn from_constants(
        smoothness: T,
        pl_constant: T,
        grad_scale_mismatch: T,
        grad_offset_sq: T,
        hessian_dissimilarity: T,
        noise_scale: T,
    ) -> Self {
        Self {
            smoothness,
            pl_constant,
            grad_scale_mismatch,
            grad_offset_sq,
            per_agent_offset_sq: vec![grad_offset_sq],
            per_agent_scale_mismatch: vec![grad_scale_mismatch],
            hessian_dissimilarity,
            noise_scales: vec![noise_scale, T::zero()],
            tau: vec![T::one()],
        }
    }

    /// Constants `(m, zeta_k^2)` for which
    /// `||grad f_k - grad f_0||^2 <= m ||grad f_0||^2 + zeta_k^2` holds at
    /// every point. Agents that differ only in curvature or only in optimum
    /// keep their nominal values; agents that differ in both get
    /// `(2 m_k, 2 zeta_k^2)` from `|u + v|^2 <= 2|u|^2 + 2|v|^2`.
    pub fn certified(&self) -> Self {
        let two = T::lit(2.0);
        let mut out = self.clone();
        for (k, (m_k, z_k)) in self
            .per_agent_scale_mismatch
            .iter()
            .zip(&self.per_agent_offset_sq)
            .enumerate()
        {
            if *m_k > T::zero() && *z_k > T::zero() {
                out.per_agent_scale_mismatch[k] = two * *m_k;
                out.per_agent_offset_sq[k] = two * *z_k;
            }
        }
        out.grad_scale_mismatch = out
            .per_agent_scale_mismatch
            .iter()
            .copied()
            .fold(T::zero(), T::max);
        out.grad_offset_sq = out
            .tau
            .iter()
            .zip(&out.per_agent_offset_sq)
            .map(|(&t, &z)| t * z)
            .sum();
        out
    }

    /// Combined relative-noise coefficient `M = M_0 + m sum_k tau_k M_k`
    /// used to cap WGA step sizes.
    pub fn combined_noise_scale(&self) -> T {
        let collab: T = self
            .tau
            .iter()
            .zip(self.noise_scales.iter().skip(1))
            .map(|(&t, &mk)| t * mk)
            .sum();
        self.noise_scales[0] + self.grad_scale_mismatch * collab
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamId;
    use approx::assert_relative_eq;

    fn t(a: f64, s: f64) -> QuadraticTask<f64> {
        QuadraticTask::scalar(a, s, 0.0).unwrap()
    }

    #[test]
    fn loss_examples() {
        assert_eq!(t(1.0, 0.0).eval_loss(&[0.0]).unwrap(), 0.0);
        assert_eq!(t(1.0, 0.0).eval_loss(&[2.0]).unwrap(), 2.0);
        assert_eq!(t(2.0, 2.0).eval_loss(&[0.0]).unwrap(), 4.0);
        assert!(matches!(
            t(1.0, 0.0).eval_loss(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(t(1.0, 0.0).true_gradient(&[3.0]).unwrap(), vec![3.0]);
        assert_eq!(t(2.0, 2.0).true_gradient(&[2.0]).unwrap(), vec![0.0]);
        assert_eq!(t(2.0, 2.0).true_gradient(&[0.0]).unwrap(), vec![-4.0]);
        assert!(t(2.0, 2.0).true_gradient(&[]).is_err());
    }

    #[test]
    fn f32_tasks_work() {
        let task = QuadraticTask::<f32>::scalar(2.0, 2.0, 0.0).unwrap();
        assert_eq!(task.eval_loss(&[0.0]).unwrap(), 4.0f32);
        assert_eq!(task.true_gradient(&[0.0]).unwrap(), vec![-4.0f32]);
    }

    #[test]
    fn rejects_bad_tasks() {
        assert!(QuadraticTask::scalar(0.0, 0.0, 1.0).is_err());
        assert!(QuadraticTask::scalar(-1.0, 0.0, 1.0).is_err());
        assert!(QuadraticTask::scalar(1.0, 0.0, -1.0).is_err());
        assert!(QuadraticTask::new(vec![1.0, 1.0], vec![0.0], 1.0).is_err());
        assert!(t(1.0, 0.0).with_noise_scale(-0.5).is_err());
    }

    #[test]
    fn noiseless_sample_is_exact() {
        let task = t(2.0, 2.0);
        let mut s = NoiseStream::new(3, StreamId::Agent(0), 1);
        let g = task.sample_gradient(&[0.5], 0, s.at(0)).unwrap();
        assert_eq!(g.value, vec![-3.0]);
        assert_eq!(g.agent, 0);
    }

    #[test]
    fn same_stream_position_same_sample() {
        let task = QuadraticTask::<f64>::new(vec![1.0, 3.0], vec![0.0, 1.0], 2.0).unwrap();
        let mut a = NoiseStream::new(11, StreamId::Agent(2), 2);
        let mut b = NoiseStream::new(11, StreamId::Agent(2), 2);
        let ga = task.sample_gradient(&[1.0, 1.0], 2, a.at(17)).unwrap();
        let gb = task.sample_gradient(&[1.0, 1.0], 2, b.at(17)).unwrap();
        for (x, y) in ga.value.iter().zip(&gb.value) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn mean_estimation() {
        let task = mean_estimation_task(0.0, 1.0).unwrap();
        assert_eq!(task, QuadraticTask::scalar(1.0, 0.0, 1.0).unwrap());
        let task = mean_estimation_task(-3.5, 2.0).unwrap();
        assert_eq!(task.smoothness(), 1.0);
        assert_eq!(task.pl_constant(), 1.0);
        let other = mean_estimation_task(1.5, 2.0).unwrap();
        let sim = similarity_params(&task, &[other], &[1.0]).unwrap();
        assert_relative_eq!(sim.grad_offset_sq, 25.0);
        assert_eq!(sim.grad_scale_mismatch, 0.0);
    }

    #[test]
    fn similarity_default_instance() {
        let sim = similarity_params(&t(1.0, 0.0), &[t(2.0, 2.0)], &[1.0]).unwrap();
        assert_eq!(sim.hessian_dissimilarity, 1.0);
        assert_eq!(sim.grad_offset_sq, 16.0);
        assert_eq!(sim.smoothness, 1.0);
        assert_eq!(sim.pl_constant, 1.0);
        assert_eq!(sim.grad_scale_mismatch, 1.0);
    }

    #[test]
    fn similarity_identical_copy() {
        let main = QuadraticTask::new(vec![1.0, 4.0], vec![1.0, -1.0], 1.0).unwrap();
        let sim = similarity_params(&main, &[main.clone(), main.clone()], &[0.5, 0.5]).unwrap();
        assert_eq!(sim.hessian_dissimilarity, 0.0);
        assert_eq!(sim.grad_offset_sq, 0.0);
        assert_eq!(sim.grad_scale_mismatch, 0.0);
        assert_eq!(sim.smoothness, 4.0);
        assert_eq!(sim.pl_constant, 1.0);
    }

    #[test]
    fn similarity_perpendicular_example() {
        // f_1(x) = (1 + d)/2 (x - z/(1 + d))^2
        for (d, z) in [(0.01, 100.0), (0.5, 3.0), (2.0, 0.1)] {
            let collab = t(1.0 + d, z / (1.0 + d));
            let sim = similarity_params(&t(1.0, 0.0), &[collab], &[1.0]).unwrap();
            assert_relative_eq!(sim.hessian_dissimilarity, d, max_relative = 1e-12);
            assert_relative_eq!(sim.grad_offset_sq, z * z, max_relative = 1e-12);
        }
    }

    #[test]
    fn similarity_errors() {
        assert_eq!(
            similarity_params(&t(1.0, 0.0), &[], &[]).unwrap_err(),
            Error::NoCollaborators
        );
        assert!(similarity_params(&t(1.0, 0.0), &[t(1.0, 1.0)], &[0.5]).is_err());
        let wide = QuadraticTask::new(vec![1.0, 1.0], vec![0.0, 0.0], 0.0).unwrap();
        assert!(similarity_params(&t(1.0, 0.0), &[wide], &[1.0]).is_err());
    }

    #[test]
    fn certified_doubles_only_mixed_agents() {
        let main = t(1.0, 0.0);
        let sim = similarity_params(&main, &[t(2.0, 2.0), t(1.0, 3.0), t(3.0, 0.0)], &[0.5, 0.25, 0.25])
            .unwrap();
        let c = sim.certified();
        assert_eq!(c.per_agent_offset_sq, vec![32.0, 9.0, 0.0]);
        assert_eq!(c.per_agent_scale_mismatch, vec![2.0, 0.0, 4.0]);
        assert_eq!(c.grad_scale_mismatch, 4.0);
        assert_relative_eq!(c.grad_offset_sq, 16.0 + 2.25);
    }
}
