//! Gradient combination rules.
//!
//! Every rule maps the main agent's sample `g_0` and the collaborators'
//! samples `g_1..g_N` to the pseudo-gradient used in the update
//! `x_{t+1} = x_t - eta g(x_t)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rng::NoiseStream;
use crate::scalar::check_simplex;
use crate::{Error, GradientSample, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    Alone,
    Wga,
    Bc,
    OracleBc,
}

impl Aggregator {
    pub const ALL: [Aggregator; 4] = [
        Aggregator::Alone,
        Aggregator::Wga,
        Aggregator::Bc,
        Aggregator::OracleBc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Alone => "alone",
            Aggregator::Wga => "wga",
            Aggregator::Bc => "bc",
            Aggregator::OracleBc => "oracle-bc",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Aggregator::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                Error::invalid(
                    "aggregator",
                    format!("unknown `{s}`, expected one of alone, wga, bc, oracle-bc"),
                )
            })
    }
}

fn default_beta<T: Scalar>() -> T {
    T::one()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct CollaborationWeights<T> {
    pub alpha: T,
    pub tau: Vec<T>,
    /// EMA rate of the bias estimate. Only BC reads it.
    #[serde(default = "default_beta")]
    pub beta: T,
}

impl<T: Scalar> CollaborationWeights<T> {
    pub fn new(alpha: T, tau: Vec<T>, beta: T) -> Result<Self> {
        let w = Self { alpha, tau, beta };
        w.validate()?;
        Ok(w)
    }

    /// Uniform `tau` over `n` collaborators.
    pub fn uniform(alpha: T, n: usize, beta: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoCollaborators);
        }
        Self::new(alpha, vec![T::one() / T::lit(n as f64); n], beta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::invalid(
                "alpha",
                format!("must lie in [0, 1], got {}", self.alpha),
            ));
        }
        if !(self.beta > T::zero() && self.beta <= T::one()) {
            return Err(Error::invalid(
                "beta",
                format!("must lie in (0, 1], got {}", self.beta),
            ));
        }
        check_simplex("tau", &self.tau)
    }

    /// Rejects `alpha >= 1/sqrt(m)` when `m > 0`.
    pub fn check_wga(&self, m: T) -> Result<()> {
        if m > T::zero() && self.alpha * self.alpha * m >= T::one() {
            return Err(Error::VacuousWga {
                alpha: self.alpha.to_f64_lossy(),
                m: m.to_f64_lossy(),
            });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.tau.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcState<T> {
    pub bias_estimate: Vec<T>,
    pub initialized: bool,
}

impl<T: Scalar> BcState<T> {
    /// Placeholder of the right dimension; the first round fills it.
    pub fn uninitialized(dim: usize) -> Self {
        Self {
            bias_estimate: vec![T::zero(); dim],
            initialized: false,
        }
    }

    pub fn from_estimate(bias_estimate: Vec<T>) -> Self {
        Self {
            bias_estimate,
            initialized: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.bias_estimate.len()
    }
}

fn check_inputs<T: Scalar>(
    g0: &GradientSample<T>,
    gks: &[GradientSample<T>],
    w: &CollaborationWeights<T>,
) -> Result<()> {
    if gks.len() != w.tau.len() {
        return Err(Error::LengthMismatch {
            what: "collaborator samples",
            expected: w.tau.len(),
            got: gks.len(),
        });
    }
    check_dims(g0.dim(), gks.iter().map(|g| g.dim()))
}

fn check_dims(d: usize, others: impl IntoIterator<Item = usize>) -> Result<()> {
    for got in others {
        if got != d {
            return Err(Error::DimensionMismatch { expected: d, got });
        }
    }
    Ok(())
}

/// `out = sum_k tau_k g_k`.
pub(crate) fn weighted_avg_into<T: Scalar, G: AsRef<[T]>>(gks: &[G], tau: &[T], out: &mut [T]) {
    out.iter_mut().for_each(|o| *o = T::zero());
    for (g, &t) in gks.iter().zip(tau) {
        for (o, &v) in out.iter_mut().zip(g.as_ref()) {
            *o = *o + t * v;
        }
    }
}

/// `out = (1 - alpha) g0 + alpha (avg - shift)`.
pub(crate) fn mix_into<T: Scalar>(alpha: T, g0: &[T], avg: &[T], shift: Option<&[T]>, out: &mut [T]) {
    let keep = T::one() - alpha;
    match shift {
        None => {
            for ((o, &a), &b) in out.iter_mut().zip(g0).zip(avg) {
                *o = keep * a + alpha * b;
            }
        }
        Some(c) => {
            for (((o, &a), &b), &s) in out.iter_mut().zip(g0).zip(avg).zip(c) {
                *o = keep * a + alpha * (b - s);
            }
        }
    }
}

impl<T> AsRef<[T]> for GradientSample<T> {
    fn as_ref(&self) -> &[T] {
        &self.value
    }
}

fn average<T: Scalar>(gks: &[GradientSample<T>], tau: &[T], dim: usize) -> Vec<T> {
    let mut avg = vec![T::zero(); dim];
    weighted_avg_into(gks, tau, &mut avg);
    avg
}

pub fn alone_combine<T: Scalar>(g0: &GradientSample<T>) -> Vec<T> {
    g0.value.clone()
}

pub fn wga_combine<T: Scalar>(
    g0: &GradientSample<T>,
    gks: &[GradientSample<T>],
    w: &CollaborationWeights<T>,
) -> Result<Vec<T>> {
    check_inputs(g0, gks, w)?;
    let avg = average(gks, &w.tau, g0.dim());
    let mut out = vec![T::zero(); g0.dim()];
    mix_into(w.alpha, &g0.value, &avg, None, &mut out);
    Ok(out)
}

/// Returns the corrected pseudo-gradient and the observed bias
/// `b_t = sum_k tau_k g_k - g_0`. The state is only read.
pub fn bc_combine<T: Scalar>(
    g0: &GradientSample<T>,
    gks: &[GradientSample<T>],
    w: &CollaborationWeights<T>,
    state: &BcState<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    check_inputs(g0, gks, w)?;
    check_dims(g0.dim(), [state.dim()])?;
    if !state.initialized {
        return Err(Error::invalid("state", "bias estimate is not initialized"));
    }
    let avg = average(gks, &w.tau, g0.dim());
    let mut out = vec![T::zero(); g0.dim()];
    mix_into(w.alpha, &g0.value, &avg, Some(&state.bias_estimate), &mut out);
    let bias = avg.iter().zip(&g0.value).map(|(&a, &b)| a - b).collect();
    Ok((out, bias))
}

pub(crate) fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if !(beta > T::zero() && beta <= T::one()) {
        return Err(Error::invalid("beta", format!("must lie in (0, 1], got {beta}")));
    }
    Ok(())
}

/// `c_{t+1} = (1 - beta) c_t + beta b_t`.
pub fn bc_update<T: Scalar>(state: &BcState<T>, observed_bias: &[T], beta: T) -> Result<BcState<T>> {
    check_beta(beta)?;
    check_dims(state.dim(), [observed_bias.len()])?;
    let mut next = state.bias_estimate.clone();
    ema_into(&mut next, observed_bias, beta);
    Ok(BcState::from_estimate(next))
}

pub(crate) fn ema_into<T: Scalar>(c: &mut [T], b: &[T], beta: T) {
    let keep = T::one() - beta;
    for (c, &b) in c.iter_mut().zip(b) {
        *c = keep * *c + beta * b;
    }
}

/// Draws the oracle's noisy bias `true_bias + n`, `n ~ N(0, v^2/N)` per
/// coordinate, from the stream's current window.
pub(crate) fn oracle_bias_into<T: Scalar>(
    true_bias: &[T],
    v: T,
    n: usize,
    stream: &mut NoiseStream,
    out: &mut [T],
) {
    let sd = v / T::lit(n as f64).sqrt();
    for (o, &b) in out.iter_mut().zip(true_bias) {
        *o = if sd > T::zero() {
            b + sd * stream.standard_normal::<T>()
        } else {
            b
        };
    }
}

/// `(1 - alpha) g_0 + alpha (g_avg - c_oracle)` with
/// `c_oracle = true_bias + n`, `n` Gaussian with variance `v^2/N` per
/// coordinate, drawn from `oracle_noise` at its current position.
pub fn oracle_bc_combine<T: Scalar>(
    g0: &GradientSample<T>,
    gks: &[GradientSample<T>],
    w: &CollaborationWeights<T>,
    true_bias: &[T],
    oracle_noise: &mut NoiseStream,
    v: T,
) -> Result<Vec<T>> {
    check_inputs(g0, gks, w)?;
    check_dims(g0.dim(), [true_bias.len()])?;
    if !(v >= T::zero()) {
        return Err(Error::invalid("oracle_v", format!("must be >= 0, got {v}")));
    }
    let avg = average(gks, &w.tau, g0.dim());
    let mut c = vec![T::zero(); g0.dim()];
    oracle_bias_into(true_bias, v, w.n(), oracle_noise, &mut c);
    let mut out = vec![T::zero(); g0.dim()];
    mix_into(w.alpha, &g0.value, &avg, Some(&c), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamId;

    fn s(v: &[f64]) -> GradientSample<f64> {
        GradientSample::new(v.to_vec(), 0)
    }

    fn w(alpha: f64, tau: &[f64]) -> CollaborationWeights<f64> {
        CollaborationWeights::new(alpha, tau.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn alone_is_identity() {
        assert_eq!(alone_combine(&s(&[3.0])), vec![3.0]);
        assert_eq!(alone_combine(&s(&[0.0, 0.0])), vec![0.0, 0.0]);
    }

    #[test]
    fn wga_examples() {
        assert_eq!(wga_combine(&s(&[7.0]), &[s(&[-2.0])], &w(0.0, &[1.0])).unwrap(), vec![7.0]);
        assert_eq!(wga_combine(&s(&[7.0]), &[s(&[5.0])], &w(1.0, &[1.0])).unwrap(), vec![5.0]);
        let out = wga_combine(&s(&[2.0]), &[s(&[4.0]), s(&[8.0])], &w(0.5, &[0.5, 0.5])).unwrap();
        assert_eq!(out, vec![4.0]);
        assert!(matches!(
            wga_combine(&s(&[2.0]), &[s(&[4.0])], &w(0.5, &[0.5, 0.5])),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(wga_combine(&s(&[2.0]), &[s(&[4.0, 1.0])], &w(0.5, &[1.0])).is_err());
    }

    #[test]
    fn bc_examples() {
        let st = BcState::from_estimate(vec![3.0]);
        let (g, b) = bc_combine(&s(&[1.0]), &[s(&[4.0])], &w(1.0, &[1.0]), &st).unwrap();
        assert_eq!(g, vec![1.0]);
        assert_eq!(b, vec![3.0]);

        let (g, _) = bc_combine(&s(&[1.5]), &[s(&[4.0])], &w(0.0, &[1.0]), &st).unwrap();
        assert_eq!(g, vec![1.5]);

        // exact bias and noiseless samples give back grad f_0
        let st = BcState::from_estimate(vec![-1.0, 2.0]);
        let (g, _) = bc_combine(&s(&[3.0, 1.0]), &[s(&[2.0, 3.0])], &w(0.7, &[1.0]), &st).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-15 && (g[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bc_needs_initialized_state() {
        let st = BcState::uninitialized(1);
        assert!(bc_combine(&s(&[1.0]), &[s(&[4.0])], &w(1.0, &[1.0]), &st).is_err());
    }

    #[test]
    fn bc_combine_is_pure() {
        let st = BcState::from_estimate(vec![0.25, -1.0]);
        let before = st.clone();
        let args = (s(&[1.0, 2.0]), vec![s(&[0.5, 0.5]), s(&[3.0, -2.0])], w(0.3, &[0.4, 0.6]));
        let a = bc_combine(&args.0, &args.1, &args.2, &st).unwrap();
        let b = bc_combine(&args.0, &args.1, &args.2, &st).unwrap();
        assert_eq!(a, b);
        assert_eq!(st, before);
    }

    #[test]
    fn update_examples() {
        let st = BcState::from_estimate(vec![2.0]);
        assert_eq!(bc_update(&st, &[4.0], 1.0).unwrap().bias_estimate, vec![4.0]);
        assert_eq!(bc_update(&st, &[4.0], 0.5).unwrap().bias_estimate, vec![3.0]);
        assert!(bc_update(&st, &[4.0], 0.0).is_err());
        assert!(bc_update(&st, &[4.0], 1.5).is_err());
        assert!(bc_update(&st, &[4.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn update_converges_geometrically() {
        let beta = 0.2;
        let mut st = BcState::from_estimate(vec![10.0]);
        for k in 1..=30 {
            st = bc_update(&st, &[1.0], beta).unwrap();
            let expected = 9.0 * (1.0f64 - beta).powi(k);
            assert!(((st.bias_estimate[0] - 1.0) - expected).abs() < 1e-12 * 10.0);
        }
    }

    #[test]
    fn oracle_exact_without_noise() {
        // grad f_0 = 2, grad f_1 = 5
        let mut stream = NoiseStream::new(0, StreamId::Oracle, 1);
        let out = oracle_bc_combine(
            &s(&[2.0]),
            &[s(&[5.0])],
            &w(0.6, &[1.0]),
            &[3.0],
            stream.at(0),
            0.0,
        )
        .unwrap();
        assert!((out[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn weights_validation() {
        assert!(CollaborationWeights::new(1.2, vec![1.0], 1.0).is_err());
        assert!(CollaborationWeights::new(-0.1, vec![1.0], 1.0).is_err());
        assert!(CollaborationWeights::new(0.5, vec![0.6, 0.6], 1.0).is_err());
        assert!(CollaborationWeights::new(0.5, vec![1.5, -0.5], 1.0).is_err());
        assert!(CollaborationWeights::new(0.5, vec![1.0], 0.0).is_err());
        assert!(CollaborationWeights::new(0.5, vec![0.5, 0.5 + 1e-13], 1.0).is_ok());
        let w = CollaborationWeights::new(0.6, vec![1.0], 1.0).unwrap();
        assert!(matches!(w.check_wga(4.0), Err(Error::VacuousWga { .. })));
        assert!(w.check_wga(2.0).is_ok());
        assert!(w.check_wga(0.0).is_ok());
    }

    #[test]
    fn aggregator_names_round_trip() {
        for a in Aggregator::ALL {
            assert_eq!(a.name().parse::<Aggregator>().unwrap(), a);
        }
        assert!("sgd".parse::<Aggregator>().is_err());
    }
}
