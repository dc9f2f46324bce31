//! Noisy-quadratic experiments behind the `figure` command.
//!
//! Every figure shares one scalar instance: the main objective
//! `a_0/2 (x - x_0^*)^2` with gradient noise `sigma`, and a single averaged
//! collaborator with curvature `a_0 + delta`, offset `zeta` and noise
//! `sigma / sqrt(N)`.

use collabsgd::schedules::{alpha_opt_wga_general, PlTradeoff};
use collabsgd::simulator::{run_replicated, C0Policy, RunResult, StepSize};
use collabsgd::{bounds, Aggregator, CollaborationWeights, Config, QuadraticTask, Replicated};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FIGURES: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "gainfactor", "sublinear"];

/// Step sizes tried when tuning Alone and WGA for fig2.
pub const ETA_GRID: [f64; 4] = [1e-5, 1e-4, 1e-3, 1e-2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub a0: f64,
    pub x0_star: f64,
    pub delta: f64,
    pub zeta: f64,
    pub sigma: f64,
    pub n: u64,
    pub x0: f64,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub c0: C0Policy,
}

impl Default for Instance {
    fn default() -> Self {
        Self {
            a0: 1.0,
            x0_star: 0.0,
            delta: 1.0,
            zeta: 4.0,
            sigma: 10.0,
            n: 10,
            x0: 1.0,
            horizon: 200_000,
            seeds: (0..20).collect(),
            c0: C0Policy::Zero,
        }
    }
}

impl Instance {
    pub fn a1(&self) -> f64 {
        self.a0 + self.delta
    }

    pub fn collab_alpha(&self) -> f64 {
        let n = self.n as f64;
        n / (n + 1.0)
    }

    pub fn config(&self, aggregator: Aggregator, alpha: f64, beta: f64, eta: f64) -> Result<Config, CliError> {
        let a1 = self.a1();
        let main = QuadraticTask::scalar(self.a0, self.x0_star, self.sigma)?;
        let collab = QuadraticTask::scalar(a1, self.x0_star + self.zeta / a1, self.sigma / (self.n as f64).sqrt())?;
        let cfg = Config {
            main_task: main,
            collaborators: vec![collab],
            aggregator,
            weights: CollaborationWeights::new(alpha, vec![1.0], beta)?,
            step_size: StepSize::Constant(eta),
            horizon: self.horizon,
            x0: vec![self.x0],
            seed: 0,
            c0_policy: self.c0,
            oracle_v: 0.0,
            snapshot_stride: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One seed-averaged curve of a figure.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub aggregator: Aggregator,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Swept value, if the figure sweeps one.
    pub value: Option<f64>,
    pub result: Replicated,
    pub time_to_plateau: Option<u64>,
}

impl Curve {
    fn new(label: String, cfg: &Config, value: Option<f64>, result: Replicated) -> Self {
        let eta = match cfg.step_size {
            StepSize::Constant(e) => e,
            StepSize::Decreasing(s) => s.eta(0),
        };
        let time_to_plateau = time_to_plateau(&result.mean_curve, PLATEAU_TOLERANCE);
        Self {
            label,
            aggregator: cfg.aggregator,
            eta,
            alpha: cfg.weights.alpha,
            beta: cfg.weights.beta,
            value,
            result,
            time_to_plateau,
        }
    }

    pub fn plateau(&self) -> f64 {
        self.result.plateau_loss.mean
    }

    pub fn plateau_se(&self) -> f64 {
        self.result.plateau_loss.se_or_zero()
    }
}

/// Relative band around the plateau used by [`time_to_plateau`].
pub const PLATEAU_TOLERANCE: f64 = 0.5;

/// First step after which the curve, averaged over windows of 1% of its
/// length, stays within `(1 + tol)` of the plateau (mean of the last 10%).
pub fn time_to_plateau(curve: &[f64], tol: f64) -> Option<u64> {
    if curve.len() < 100 {
        return None;
    }
    let plateau = collabsgd::simulator::tail_mean(curve, 0.1);
    let w = curve.len() / 100;
    let limit = plateau * (1.0 + tol);
    let mut last_above = None;
    for (i, chunk) in curve.chunks(w).enumerate() {
        let m = chunk.iter().sum::<f64>() / chunk.len() as f64;
        if m > limit {
            last_above = Some(i);
        }
    }
    Some(match last_above {
        None => 0,
        Some(i) => ((i + 1) * w) as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub method: Aggregator,
    pub eta: f64,
    pub plateau: f64,
    pub se: f64,
    pub n_diverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2 {
    pub alone: Curve,
    pub wga: Curve,
    pub bc: Curve,
    pub tuning: Vec<TuneRow>,
}

impl Fig2 {
    pub fn curves(&self) -> Vec<&Curve> {
        vec![&self.alone, &self.wga, &self.bc]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Params {
    pub inst: Instance,
    pub eta_grid: Vec<f64>,
    pub bc_eta: f64,
    pub bc_beta: f64,
}

impl Default for Fig2Params {
    fn default() -> Self {
        Self {
            inst: Instance::default(),
            eta_grid: ETA_GRID.to_vec(),
            bc_eta: 1e-4,
            bc_beta: 1e-4,
        }
    }
}

fn tune(
    inst: &Instance,
    agg: Aggregator,
    alpha: f64,
    grid: &[f64],
    rows: &mut Vec<TuneRow>,
) -> Result<Curve, CliError> {
    let mut best: Option<Curve> = None;
    for &eta in grid {
        let cfg = inst.config(agg, alpha, 1.0, eta)?;
        let res = run_replicated(&cfg, &inst.seeds)?;
        rows.push(TuneRow {
            method: agg,
            eta,
            plateau: res.plateau_loss.mean,
            se: res.plateau_loss.se_or_zero(),
            n_diverged: res.n_diverged(),
        });
        log::info!("tuning {agg}: eta {eta:e} plateau {:e} ({} diverged)", res.plateau_loss.mean, res.n_diverged());
        if res.n_diverged() > 0 {
            continue;
        }
        let better = best.as_ref().is_none_or(|b| res.plateau_loss.mean < b.plateau());
        if better {
            best = Some(Curve::new(agg.to_string(), &cfg, None, res));
        }
    }
    best.ok_or_else(|| CliError::Experiment(format!("every step size diverged for {agg}")))
}

/// Alone and WGA with step sizes tuned on [`Fig2Params::eta_grid`], BC with
/// a fixed step size. Both collaborative methods use `alpha = N/(N+1)`.
pub fn fig2(p: &Fig2Params) -> Result<Fig2, CliError> {
    let inst = &p.inst;
    let alpha = inst.collab_alpha();
    let mut tuning = Vec::new();
    let alone = tune(inst, Aggregator::Alone, 0.0, &p.eta_grid, &mut tuning)?;
    let wga = tune(inst, Aggregator::Wga, alpha, &p.eta_grid, &mut tuning)?;
    let cfg = inst.config(Aggregator::Bc, alpha, p.bc_beta, p.bc_eta)?;
    let bc = Curve::new("bc".into(), &cfg, None, run_replicated(&cfg, &inst.seeds)?);
    log::info!("fig2: alone eta {:e}, wga eta {:e}, bc eta {:e}", alone.eta, wga.eta, bc.eta);
    Ok(Fig2 { alone, wga, bc, tuning })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub inst: Instance,
    pub eta: f64,
    pub beta: f64,
    /// `None` couples `alpha = N/(N+1)`.
    pub alpha: Option<f64>,
    pub values: Vec<f64>,
}

impl SweepParams {
    pub fn fig3() -> Self {
        Self {
            inst: Instance::default(),
            eta: 1e-4,
            beta: 1e-4,
            alpha: None,
            values: vec![1.0, 4.0, 16.0],
        }
    }

    pub fn fig4() -> Self {
        Self {
            inst: Instance::default(),
            eta: 5e-4,
            beta: 1.0,
            alpha: Some(1e-3),
            values: vec![1.0, 4.0, 16.0, 64.0],
        }
    }

    pub fn fig5() -> Self {
        Self {
            inst: Instance::default(),
            eta: 5e-4,
            beta: 1e-4,
            alpha: None,
            values: vec![1.0, 10.0, 100.0],
        }
    }
}

fn fmt_value(v: f64) -> String {
    collabsgd::report::format_value(v)
}

/// BC over `zeta` values.
pub fn fig3(p: &SweepParams) -> Result<Vec<Curve>, CliError> {
    p.values
        .iter()
        .map(|&zeta| {
            let inst = Instance { zeta, ..p.inst.clone() };
            let alpha = p.alpha.unwrap_or_else(|| inst.collab_alpha());
            let cfg = inst.config(Aggregator::Bc, alpha, p.beta, p.eta)?;
            let res = run_replicated(&cfg, &inst.seeds)?;
            Ok(Curve::new(format!("bc_zeta{}", fmt_value(zeta)), &cfg, Some(zeta), res))
        })
        .collect()
}

/// WGA over `zeta` values, preceded by the Alone baseline at the same step
/// size.
pub fn fig4(p: &SweepParams) -> Result<Vec<Curve>, CliError> {
    let alone_cfg = p.inst.config(Aggregator::Alone, 0.0, 1.0, p.eta)?;
    let mut out = vec![Curve::new(
        "alone".into(),
        &alone_cfg,
        None,
        run_replicated(&alone_cfg, &p.inst.seeds)?,
    )];
    for &zeta in &p.values {
        let inst = Instance { zeta, ..p.inst.clone() };
        let alpha = p.alpha.unwrap_or_else(|| inst.collab_alpha());
        let cfg = inst.config(Aggregator::Wga, alpha, 1.0, p.eta)?;
        let res = run_replicated(&cfg, &inst.seeds)?;
        out.push(Curve::new(format!("wga_zeta{}", fmt_value(zeta)), &cfg, Some(zeta), res));
    }
    Ok(out)
}

/// BC over the number of averaged collaborators.
pub fn fig5(p: &SweepParams) -> Result<Vec<Curve>, CliError> {
    p.values
        .iter()
        .map(|&n| {
            if !(n >= 1.0) || n.fract() != 0.0 {
                return Err(CliError::Config(format!("N must be a positive integer, got {n}")));
            }
            let inst = Instance { n: n as u64, ..p.inst.clone() };
            let alpha = p.alpha.unwrap_or_else(|| inst.collab_alpha());
            let cfg = inst.config(Aggregator::Bc, alpha, p.beta, p.eta)?;
            let res = run_replicated(&cfg, &inst.seeds)?;
            Ok(Curve::new(format!("bc_n{n}"), &cfg, Some(n), res))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub ns: Vec<usize>,
    pub ratios: Vec<f64>,
    /// `values[i][j]` for `ns[i]`, `ratios[j]`.
    pub values: Vec<Vec<f64>>,
}

pub fn default_ns() -> Vec<usize> {
    vec![1, 2, 3, 5, 10, 20, 30, 50, 100]
}

/// `count` points from `10^lo` to `10^hi`, evenly spaced in the exponent.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![10f64.powf(lo)],
        _ => (0..count)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64))
            .collect(),
    }
}

pub fn gainfactor(ns: &[usize], ratios: &[f64]) -> Result<Grid, CliError> {
    Ok(Grid {
        ns: ns.to_vec(),
        ratios: ratios.to_vec(),
        values: bounds::gainfactor_surface(ns, ratios)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sublinear {
    pub ms: Vec<f64>,
    pub ns: Vec<usize>,
    /// `speedup[i][j]` for `ns[i]`, `ms[j]`.
    pub speedup: Vec<Vec<f64>>,
}

/// Speedup of the PL rate at the optimal `alpha` over training alone, for
/// noise-only collaborators (`zeta = 0`) with gradient mismatch `m`.
pub fn sublinear(ms: &[f64], ns: &[usize], horizon: u64) -> Result<Sublinear, CliError> {
    if let Some(m) = ms.iter().find(|m| !(**m >= 0.0)) {
        return Err(CliError::Config(format!("m must be >= 0, got {m}")));
    }
    if ns.contains(&0) {
        return Err(CliError::Config("N must be >= 1".into()));
    }
    let speedup = ns
        .iter()
        .map(|&n| {
            ms.iter()
                .map(|&m| {
                    let p = PlTradeoff {
                        m,
                        zeta_sq: 0.0,
                        sigma0_sq: 1.0,
                        sigma1_sq: 1.0,
                        mu: 1.0,
                        l: 1.0,
                        t: horizon,
                        n,
                    };
                    let a = alpha_opt_wga_general(&p);
                    log::debug!("m {m} N {n}: alpha_opt {a}");
                    p.speedup()
                })
                .collect()
        })
        .collect();
    Ok(Sublinear {
        ms: ms.to_vec(),
        ns: ns.to_vec(),
        speedup,
    })
}

/// `RunResult` of a curve, exposed for callers that only need statistics.
pub fn results(curves: &[Curve]) -> Vec<&RunResult<f64>> {
    curves.iter().map(|c| &c.result).collect()
}
