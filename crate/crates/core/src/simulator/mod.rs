//! Training loop, seeded replication and parameter sweeps.

mod oracle;
mod output;
mod replicate;

pub use oracle::{mean_dynamics_oracle, wga_fixed_point};
pub use output::{write_curve_csv, write_result_csv, write_trace_csv, RESULT_COLUMNS, TRACE_COLUMNS};
pub use replicate::{
    apply_axis, run_replicated, run_replicated_with_traces, sweep, RunResult, Stat, SweepAxis,
};

use serde::{Deserialize, Serialize};

use crate::aggregators::{ema_into, mix_into, oracle_bias_into, weighted_avg_into};
use crate::objective::similarity_params;
use crate::rng::{NoiseStream, StreamId};
use crate::schedules::DecreasingSchedule;
use crate::scalar::norm_sq;
use crate::{Aggregator, CollaborationWeights, Error, QuadraticTask, Result, Scalar};

/// Iterates beyond this magnitude count as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSize<T> {
    Constant(T),
    Decreasing(DecreasingSchedule<T>),
}

impl<T: Scalar> StepSize<T> {
    pub fn eta(&self, t: u64) -> T {
        match self {
            StepSize::Constant(eta) => *eta,
            StepSize::Decreasing(s) => s.eta(t),
        }
    }
}

/// Initial bias estimate for BC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum C0Policy {
    /// `c_0 = b_0`, the bias observed in the first round.
    #[default]
    FirstBias,
    /// Average of `S` extra first-round bias samples at `x_0`.
    WarmStart(u32),
    /// `c_0 = 0`.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RunConfig<T> {
    pub main_task: QuadraticTask<T>,
    pub collaborators: Vec<QuadraticTask<T>>,
    pub aggregator: Aggregator,
    pub weights: CollaborationWeights<T>,
    pub step_size: StepSize<T>,
    pub horizon: u64,
    pub x0: Vec<T>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub c0_policy: C0Policy,
    /// Oracle noise standard deviation `v`; only OracleBC reads it.
    #[serde(default)]
    pub oracle_v: T,
    /// Keep the iterate every this many steps; 0 keeps none.
    #[serde(default)]
    pub snapshot_stride: u64,
}

impl<T: Scalar> RunConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "T must be >= 1"));
        }
        self.main_task.validate()?;
        if self.x0.len() != self.main_task.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.main_task.dim(),
                got: self.x0.len(),
            });
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("x0", "non-finite entry"));
        }
        self.weights.validate()?;
        if self.weights.tau.len() != self.collaborators.len() {
            return Err(Error::LengthMismatch {
                what: "tau",
                expected: self.collaborators.len(),
                got: self.weights.tau.len(),
            });
        }
        let sim = similarity_params(&self.main_task, &self.collaborators, &self.weights.tau)?;
        if self.aggregator == Aggregator::Wga {
            self.weights.check_wga(sim.grad_scale_mismatch)?;
        }
        match self.step_size {
            StepSize::Constant(eta) if !(eta > T::zero()) || !eta.is_finite() => {
                return Err(Error::invalid("eta", format!("must be finite and > 0, got {eta}")));
            }
            _ => {}
        }
        if !(self.oracle_v >= T::zero()) || !self.oracle_v.is_finite() {
            return Err(Error::invalid("oracle_v", format!("must be >= 0, got {}", self.oracle_v)));
        }
        if self.c0_policy == C0Policy::WarmStart(0) {
            return Err(Error::invalid("c0_policy", "warm start needs at least one sample"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<T> {
    pub step: u64,
    pub x: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace<T> {
    /// `f_0(x_t)` for `t = 0..=T`.
    pub test_loss: Vec<T>,
    /// `||grad f_0(x_t)||^2` for `t = 0..=T`.
    pub grad_norm_sq: Vec<T>,
    pub snapshots: Vec<Snapshot<T>>,
    /// Last finite iterate.
    pub final_iterate: Vec<T>,
    /// Step at which the iterate left the finite region, if it did. The
    /// arrays stop just before it.
    pub diverged_at: Option<u64>,
}

impl<T: Scalar> Trace<T> {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// `F_T`, the test loss at the last recorded step.
    pub fn final_gap(&self) -> T {
        *self.test_loss.last().expect("trace holds step 0")
    }

    /// Mean test loss over the last 10% of the recorded steps.
    pub fn plateau_loss(&self) -> T {
        tail_mean(&self.test_loss, 0.1)
    }

    /// `(1/T) sum_{t<T} ||grad f_0(x_t)||^2` over the recorded steps.
    pub fn mean_grad_norm_sq(&self) -> T {
        let n = self.grad_norm_sq.len().saturating_sub(1).max(1);
        let s: T = self.grad_norm_sq.iter().take(n).copied().sum();
        s / T::lit(n as f64)
    }
}

/// Mean of the last `frac` of `v`, at least one element.
pub fn tail_mean<T: Scalar>(v: &[T], frac: f64) -> T {
    let k = ((v.len() as f64 * frac).floor() as usize).clamp(1, v.len().max(1));
    let s: T = v[v.len() - k..].iter().copied().sum();
    s / T::lit(k as f64)
}

struct Recorder<'a, T> {
    task: &'a QuadraticTask<T>,
    scratch: Vec<T>,
    trace: Trace<T>,
}

impl<T: Scalar> Recorder<'_, T> {
    fn record(&mut self, x: &[T]) {
        self.task.gradient_into(x, &mut self.scratch);
        self.trace.test_loss.push(self.task.loss_unchecked(x));
        self.trace.grad_norm_sq.push(norm_sq(&self.scratch));
    }
}

fn escaped<T: Scalar>(x: &[T]) -> bool {
    let limit = T::lit(DIVERGENCE_LIMIT);
    x.iter().any(|v| !v.is_finite() || v.abs() > limit)
}

/// Initial bias estimate averaged over `s` extra rounds at `x0`.
fn warm_start<T: Scalar>(cfg: &RunConfig<T>, s: u32) -> Vec<T> {
    let dim = cfg.dim();
    let n = cfg.collaborators.len();
    let mut c = vec![T::zero(); dim];
    let mut g0 = vec![T::zero(); dim];
    let mut gks = vec![vec![T::zero(); dim]; n];
    let mut avg = vec![T::zero(); dim];
    let mut s0 = NoiseStream::new(cfg.seed, StreamId::WarmStart(0), dim);
    let mut sk: Vec<_> = (1..=n)
        .map(|k| NoiseStream::new(cfg.seed, StreamId::WarmStart(k), dim))
        .collect();
    for round in 0..u64::from(s) {
        cfg.main_task.gradient_into(&cfg.x0, &mut g0);
        cfg.main_task.perturb(&mut g0, s0.at(round));
        for ((task, g), st) in cfg.collaborators.iter().zip(gks.iter_mut()).zip(sk.iter_mut()) {
            task.gradient_into(&cfg.x0, g);
            task.perturb(g, st.at(round));
        }
        weighted_avg_into(&gks, &cfg.weights.tau, &mut avg);
        for ((c, &a), &b) in c.iter_mut().zip(&avg).zip(&g0) {
            *c = *c + (a - b);
        }
    }
    let s = T::lit(f64::from(s));
    c.iter_mut().for_each(|v| *v = *v / s);
    c
}

/// Runs `T` steps of `x_{t+1} = x_t - eta_t g(x_t)`.
///
/// Agent `k`'s noise at step `t` comes from window `t` of stream
/// `(seed, Agent(k))`, so the samples do not depend on the aggregator or on
/// which other agents were sampled.
pub fn run<T: Scalar>(cfg: &RunConfig<T>) -> Result<Trace<T>> {
    cfg.validate()?;
    let dim = cfg.dim();
    let n = cfg.collaborators.len();
    let horizon = cfg.horizon;
    let agg = cfg.aggregator;
    let (alpha, beta, tau) = (cfg.weights.alpha, cfg.weights.beta, &cfg.weights.tau);

    let mut main_stream = NoiseStream::new(cfg.seed, StreamId::Agent(0), dim);
    let mut collab_streams: Vec<_> = (1..=n)
        .map(|k| NoiseStream::new(cfg.seed, StreamId::Agent(k), dim))
        .collect();
    let mut oracle_stream = NoiseStream::new(cfg.seed, StreamId::Oracle, dim);

    let mut x = cfg.x0.clone();
    let mut g0 = vec![T::zero(); dim];
    let mut gks = vec![vec![T::zero(); dim]; n];
    let mut avg = vec![T::zero(); dim];
    let mut g = vec![T::zero(); dim];
    let mut bias = vec![T::zero(); dim];
    let mut c = vec![T::zero(); dim];
    let mut prev = vec![T::zero(); dim];
    let mut c_ready = match cfg.c0_policy {
        C0Policy::FirstBias => false,
        C0Policy::Zero => true,
        C0Policy::WarmStart(s) => {
            if agg == Aggregator::Bc {
                c = warm_start(cfg, s);
            }
            true
        }
    };

    let cap = usize::try_from(horizon).unwrap_or(usize::MAX).saturating_add(1);
    let mut rec = Recorder {
        task: &cfg.main_task,
        scratch: vec![T::zero(); dim],
        trace: Trace {
            test_loss: Vec::with_capacity(cap.min(1 << 24)),
            grad_norm_sq: Vec::with_capacity(cap.min(1 << 24)),
            snapshots: Vec::new(),
            final_iterate: Vec::new(),
            diverged_at: None,
        },
    };
    rec.record(&x);
    if cfg.snapshot_stride > 0 {
        rec.trace.snapshots.push(Snapshot { step: 0, x: x.clone() });
    }

    for t in 0..horizon {
        cfg.main_task.gradient_into(&x, &mut g0);
        cfg.main_task.perturb(&mut g0, main_stream.at(t));
        if agg != Aggregator::Alone {
            for ((task, gk), st) in cfg.collaborators.iter().zip(gks.iter_mut()).zip(collab_streams.iter_mut()) {
                task.gradient_into(&x, gk);
                task.perturb(gk, st.at(t));
            }
            weighted_avg_into(&gks, tau, &mut avg);
        }
        match agg {
            Aggregator::Alone => g.copy_from_slice(&g0),
            Aggregator::Wga => mix_into(alpha, &g0, &avg, None, &mut g),
            Aggregator::Bc => {
                for ((b, &a), &v) in bias.iter_mut().zip(&avg).zip(&g0) {
                    *b = a - v;
                }
                if !c_ready {
                    c.copy_from_slice(&bias);
                    c_ready = true;
                }
                mix_into(alpha, &g0, &avg, Some(&c), &mut g);
            }
            Aggregator::OracleBc => {
                // true bias sum_k tau_k grad f_k(x) - grad f_0(x), built in `bias`
                cfg.main_task.gradient_into(&x, &mut bias);
                bias.iter_mut().for_each(|b| *b = -*b);
                for (task, &tk) in cfg.collaborators.iter().zip(tau) {
                    task.gradient_into(&x, &mut g);
                    for (b, &v) in bias.iter_mut().zip(&g) {
                        *b = *b + tk * v;
                    }
                }
                oracle_bias_into(&bias, cfg.oracle_v, n, oracle_stream.at(t), &mut c);
                mix_into(alpha, &g0, &avg, Some(&c), &mut g);
            }
        }
        let eta = cfg.step_size.eta(t);
        prev.copy_from_slice(&x);
        for (xv, &gv) in x.iter_mut().zip(&g) {
            *xv = *xv - eta * gv;
        }
        if agg == Aggregator::Bc {
            ema_into(&mut c, &bias, beta);
        }
        if escaped(&x) {
            rec.trace.diverged_at = Some(t + 1);
            x.copy_from_slice(&prev);
            break;
        }
        rec.record(&x);
        if cfg.snapshot_stride > 0 && (t + 1) % cfg.snapshot_stride == 0 {
            rec.trace.snapshots.push(Snapshot { step: t + 1, x: x.clone() });
        }
    }
    rec.trace.final_iterate = x;
    Ok(rec.trace)
}
