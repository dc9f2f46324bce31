use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run, RunConfig, StepSize, Trace};
use crate::{Error, Result, Scalar};

/// Mean and standard error over seeds; the error needs two or more seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat<T> {
    pub mean: T,
    pub se: Option<T>,
}

impl<T: Scalar> Stat<T> {
    pub fn of(values: &[T]) -> Self {
        if values.is_empty() {
            return Self {
                mean: T::nan(),
                se: None,
            };
        }
        if values.iter().all(|v| *v == values[0]) {
            return Self {
                mean: values[0],
                se: (values.len() >= 2).then(T::zero),
            };
        }
        let n = T::lit(values.len() as f64);
        let mean = values.iter().copied().sum::<T>() / n;
        let se = (values.len() >= 2).then(|| {
            let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
            (ss / (n - T::one()) / n).sqrt()
        });
        Self { mean, se }
    }

    pub fn se_or_zero(&self) -> T {
        self.se.unwrap_or(T::zero())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult<T> {
    pub seeds: Vec<u64>,
    pub diverged_seeds: Vec<u64>,
    pub final_gap: Stat<T>,
    pub mean_grad_norm_sq: Stat<T>,
    pub plateau_loss: Stat<T>,
    /// Seed-averaged test loss per step over the runs that did not diverge.
    pub mean_curve: Vec<T>,
    /// Per-seed traces, kept only on request.
    pub traces: Option<Vec<Trace<T>>>,
}

impl<T: Scalar> RunResult<T> {
    pub fn n_seeds(&self) -> usize {
        self.seeds.len()
    }

    pub fn n_diverged(&self) -> usize {
        self.diverged_seeds.len()
    }

    fn from_traces(seeds: &[u64], traces: Vec<Trace<T>>, keep: bool) -> Self {
        let mut diverged_seeds = Vec::new();
        let mut finals = Vec::new();
        let mut grads = Vec::new();
        let mut plateaus = Vec::new();
        let mut curve: Vec<T> = Vec::new();
        let mut kept = 0usize;
        for (&seed, tr) in seeds.iter().zip(&traces) {
            if tr.diverged() {
                diverged_seeds.push(seed);
                continue;
            }
            finals.push(tr.final_gap());
            grads.push(tr.mean_grad_norm_sq());
            plateaus.push(tr.plateau_loss());
            if curve.is_empty() {
                curve = tr.test_loss.clone();
            } else {
                for (c, &v) in curve.iter_mut().zip(&tr.test_loss) {
                    *c = *c + v;
                }
            }
            kept += 1;
        }
        if kept > 0 {
            let k = T::lit(kept as f64);
            curve.iter_mut().for_each(|c| *c = *c / k);
        }
        if !diverged_seeds.is_empty() {
            log::warn!("{} of {} seeds diverged: {:?}", diverged_seeds.len(), seeds.len(), diverged_seeds);
        }
        Self {
            seeds: seeds.to_vec(),
            diverged_seeds,
            final_gap: Stat::of(&finals),
            mean_grad_norm_sq: Stat::of(&grads),
            plateau_loss: Stat::of(&plateaus),
            mean_curve: curve,
            traces: keep.then_some(traces),
        }
    }
}

fn replicate<T: Scalar>(cfg: &RunConfig<T>, seeds: &[u64], keep: bool) -> Result<RunResult<T>> {
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "need at least one seed"));
    }
    cfg.validate()?;
    let traces = seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            run(&c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult::from_traces(seeds, traces, keep))
}

/// Runs `cfg` once per seed (in parallel) and aggregates in seed order.
/// Diverged seeds are reported and left out of the statistics.
pub fn run_replicated<T: Scalar>(cfg: &RunConfig<T>, seeds: &[u64]) -> Result<RunResult<T>> {
    replicate(cfg, seeds, false)
}

/// [`run_replicated`] keeping every per-seed trace.
pub fn run_replicated_with_traces<T: Scalar>(cfg: &RunConfig<T>, seeds: &[u64]) -> Result<RunResult<T>> {
    replicate(cfg, seeds, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Moves every collaborator's optimum so that `zeta_k = value`.
    Zeta,
    /// Number of averaged collaborators: the collaborator noise becomes
    /// `sigma_k / sqrt(N)`. With `couple_alpha` also sets `alpha = N/(N+1)`.
    N { couple_alpha: bool },
    Alpha,
    Beta,
    Eta,
    /// Sets every collaborator's curvature to `a_0 + delta`, keeping
    /// `A_k (x_k^* - x_0^*)` fixed.
    Delta,
    /// Sets the main noise to `value` and scales the collaborators' noise by
    /// the same factor.
    Sigma,
    T,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Zeta => "zeta",
            SweepAxis::N { .. } => "N",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Beta => "beta",
            SweepAxis::Eta => "eta",
            SweepAxis::Delta => "delta",
            SweepAxis::Sigma => "sigma",
            SweepAxis::T => "T",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "zeta" => SweepAxis::Zeta,
            "N" | "n" => SweepAxis::N { couple_alpha: false },
            "alpha" => SweepAxis::Alpha,
            "beta" => SweepAxis::Beta,
            "eta" => SweepAxis::Eta,
            "delta" => SweepAxis::Delta,
            "sigma" => SweepAxis::Sigma,
            "T" | "t" => SweepAxis::T,
            other => return Err(Error::UnknownAxis(other.to_string())),
        })
    }
}

fn positive_count<T: Scalar>(axis: SweepAxis, v: T) -> Result<u64> {
    let f = v.to_f64_lossy();
    if !(f >= 1.0) || f.fract() != 0.0 || f > u64::MAX as f64 {
        return Err(Error::invalid("sweep", format!("{axis} needs a positive integer, got {v}")));
    }
    Ok(f as u64)
}

/// `base` with `axis` set to `value`.
pub fn apply_axis<T: Scalar>(base: &RunConfig<T>, axis: SweepAxis, value: T) -> Result<RunConfig<T>> {
    let mut cfg = base.clone();
    let main = &base.main_task;
    match axis {
        SweepAxis::Zeta => {
            let per_coord = T::lit((main.dim() as f64).sqrt());
            for c in &mut cfg.collaborators {
                for d in 0..main.dim() {
                    c.optimum[d] = main.optimum[d] + value / (c.curvature[d] * per_coord);
                }
            }
        }
        SweepAxis::N { couple_alpha } => {
            let n = positive_count(axis, value)?;
            let nf = T::lit(n as f64);
            for (c, b) in cfg.collaborators.iter_mut().zip(&base.collaborators) {
                c.noise_std = b.noise_std / nf.sqrt();
            }
            if couple_alpha {
                cfg.weights.alpha = nf / (nf + T::one());
            }
        }
        SweepAxis::Alpha => cfg.weights.alpha = value,
        SweepAxis::Beta => cfg.weights.beta = value,
        SweepAxis::Eta => cfg.step_size = StepSize::Constant(value),
        SweepAxis::Delta => {
            for (c, b) in cfg.collaborators.iter_mut().zip(&base.collaborators) {
                for d in 0..main.dim() {
                    let shift = b.curvature[d] * (b.optimum[d] - main.optimum[d]);
                    c.curvature[d] = main.curvature[d] + value;
                    c.optimum[d] = main.optimum[d] + shift / c.curvature[d];
                }
            }
        }
        SweepAxis::Sigma => {
            cfg.main_task.noise_std = value;
            for c in &mut cfg.collaborators {
                c.noise_std = if main.noise_std > T::zero() {
                    c.noise_std * value / main.noise_std
                } else {
                    value
                };
            }
        }
        SweepAxis::T => cfg.horizon = positive_count(axis, value)?,
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One [`RunResult`] per value of `axis`, in input order.
pub fn sweep<T: Scalar>(
    base: &RunConfig<T>,
    axis: SweepAxis,
    values: &[T],
    seeds: &[u64],
) -> Result<Vec<(T, RunResult<T>)>> {
    values
        .iter()
        .map(|&v| Ok((v, run_replicated(&apply_axis(base, axis, v)?, seeds)?)))
        .collect()
}
