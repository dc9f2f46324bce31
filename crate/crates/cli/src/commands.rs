//! Argument parsing and command dispatch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use collabsgd::bounds::{
    bound_bc, bound_oracle_nonconvex, bound_oracle_pl, bound_wga_nonconvex, bound_wga_pl, BoundInputs,
};
use collabsgd::report::{format_value, write_grid, write_table};
use collabsgd::schedules::{
    beta_bc, eta_bc, eta_wga_nonconvex, eta_wga_pl, tau_objective, tau_qp, ScheduleInputs,
};
use collabsgd::simulator::{
    run_replicated_with_traces, sweep, write_curve_csv, write_result_csv, write_trace_csv, C0Policy,
    RunResult,
};
use collabsgd::{Aggregator, SimilarityParams};

use crate::config::{ExperimentConfig, SweepSpec, TEMPLATE};
use crate::error::CliError;
use crate::figures::{self, Curve, Instance, SweepParams};
use crate::output::{ensure_dir, resolve_out_dir, write_atomic, write_text};

#[derive(Debug, Parser)]
#[command(name = "collabsgd", version, about = "Collaborative SGD experiments on noisy quadratics")]
pub struct Cli {
    /// Worker threads for seed replication (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train with one aggregator over one or more seeds.
    Run(Box<RunArgs>),
    /// Reproduce one of the noisy-quadratic figures.
    Figure(Box<FigureArgs>),
    /// Evaluate a convergence bound.
    Bounds(Box<BoundsArgs>),
    /// Solve for the collaborator weights tau.
    Tau(TauArgs),
    /// Write or check experiment files.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConfigAction {
    /// Print a commented template.
    Template {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a file and print its normalized form.
    Check { path: PathBuf },
}

/// Seed list from `a,b,c` or `lo..hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

/// Values from `lo:hi:count` (log10) or a comma list.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid(pub Vec<f64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    parse_seed_vec(s).map(SeedList)
}

fn parse_seed_vec(s: &str) -> Result<Vec<u64>, String> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|e| format!("bad seed range start: {e}"))?;
        let hi: u64 = hi.trim().parse().map_err(|e| format!("bad seed range end: {e}"))?;
        if hi <= lo {
            return Err(format!("empty seed range {s}"));
        }
        return Ok((lo..hi).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| format!("bad seed `{p}`: {e}")))
        .collect()
}

fn parse_c0(s: &str) -> Result<C0Policy, String> {
    match s {
        "first-bias" => Ok(C0Policy::FirstBias),
        "zero" => Ok(C0Policy::Zero),
        _ => {
            let n = s
                .strip_prefix("warm-start:")
                .ok_or_else(|| format!("expected first-bias, zero or warm-start:S, got `{s}`"))?;
            let n: u32 = n.parse().map_err(|e| format!("bad warm-start count: {e}"))?;
            if n == 0 {
                return Err("warm-start needs S >= 1".into());
            }
            Ok(C0Policy::WarmStart(n))
        }
    }
}

fn parse_aggregator(s: &str) -> Result<Aggregator, String> {
    s.parse().map_err(|e: collabsgd::Error| e.to_string())
}

/// `lo:hi:count` in log10 units, or a comma list.
fn parse_grid(s: &str) -> Result<ValueGrid, String> {
    parse_grid_vec(s).map(ValueGrid)
}

fn parse_grid_vec(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].parse().map_err(|e| format!("bad grid start: {e}"))?;
        let hi: f64 = parts[1].parse().map_err(|e| format!("bad grid end: {e}"))?;
        let n: usize = parts[2].parse().map_err(|e| format!("bad grid count: {e}"))?;
        return Ok(figures::log_grid(lo, hi, n));
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad value `{p}`: {e}")))
        .collect()
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment file; replaces every inline flag below except --out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_aggregator, default_value = "bc")]
    pub aggregator: Aggregator,
    #[arg(long, default_value_t = 1.0)]
    pub a0: f64,
    #[arg(long = "x0-star", default_value_t = 0.0)]
    pub x0_star: f64,
    /// Collaborator curvature (default a0 + delta).
    #[arg(long)]
    pub a1: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Collaborator offset; its optimum is x0_star + zeta / a1.
    #[arg(long, default_value_t = 4.0)]
    pub zeta: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    /// Per-agent collaborator noise (default sigma).
    #[arg(long)]
    pub sigma1: Option<f64>,
    /// Number of agents averaged into the collaborator.
    #[arg(long = "n", default_value_t = 1)]
    pub n: u64,
    /// Collaboration weight (default N/(N+1)).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub eta: f64,
    #[arg(long = "T", alias = "horizon", default_value_t = 200_000)]
    pub horizon: u64,
    #[arg(long, default_value_t = 10.0)]
    pub x0: f64,
    /// Single seed; overrides --seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed list `a,b,c` or range `lo..hi`.
    #[arg(long, value_parser = parse_seeds, default_value = "0")]
    pub seeds: SeedList,
    /// Initial bias estimate: first-bias, zero or warm-start:S.
    #[arg(long, value_parser = parse_c0, default_value = "first-bias")]
    pub c0: C0Policy,
    #[arg(long = "oracle-v", default_value_t = 0.0)]
    pub oracle_v: f64,
    /// Keep every stride-th step in trace files.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        if let Some(path) = &self.config {
            return ExperimentConfig::load(path);
        }
        if self.n == 0 {
            return Err(CliError::Config("--n must be >= 1".into()));
        }
        let a1 = self.a1.unwrap_or(self.a0 + self.delta);
        let inst = Instance {
            a0: self.a0,
            x0_star: self.x0_star,
            delta: a1 - self.a0,
            zeta: self.zeta,
            sigma: self.sigma,
            n: self.n,
            x0: self.x0,
            horizon: self.horizon,
            seeds: self.seed.map(|s| vec![s]).unwrap_or_else(|| self.seeds.0.clone()),
            c0: self.c0,
        };
        let alpha = self.alpha.unwrap_or_else(|| inst.collab_alpha());
        let mut run = inst.config(self.aggregator, alpha, self.beta, self.eta)?;
        if let Some(s1) = self.sigma1 {
            run.collaborators[0].noise_std = s1 / (self.n as f64).sqrt();
        }
        run.oracle_v = self.oracle_v;
        let cfg = ExperimentConfig {
            run,
            seeds: inst.seeds,
            output_dir: None,
            trace_stride: self.stride,
            sweep: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureName {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Gainfactor,
    Sublinear,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    pub name: String,
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: Option<SeedList>,
    #[arg(long = "T", alias = "horizon")]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub a0: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long = "n")]
    pub n: Option<u64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_parser = parse_c0)]
    pub c0: Option<C0Policy>,
    /// Swept values (zeta for fig3/fig4, N for fig5).
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    /// Step sizes tried for Alone and WGA in fig2.
    #[arg(long = "eta-grid", value_delimiter = ',')]
    pub eta_grid: Option<Vec<f64>>,
    /// Collaborator counts for gainfactor and sublinear.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Ratios L sigma_0^2 / (mu T zeta^2) for gainfactor, `lo:hi:count` in log10 or a list.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub ratios: Option<ValueGrid>,
    /// Gradient mismatch values for sublinear.
    #[arg(long, value_delimiter = ',')]
    pub ms: Option<Vec<f64>>,
    /// Keep every stride-th step of the curves.
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    /// Also write a gnuplot script.
    #[arg(long)]
    pub gnuplot: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundKind {
    WgaNonconvex,
    WgaPl,
    Oracle,
    Bc,
    Gainfactor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundCase {
    Pl,
    Nonconvex,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(value_enum)]
    pub kind: BoundKind,
    #[arg(long = "L", default_value_t = 1.0)]
    pub l: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0)]
    pub m: f64,
    #[arg(long = "zeta-sq", default_value_t = 0.0)]
    pub zeta_sq: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Relative noise coefficient M.
    #[arg(long = "M", default_value_t = 0.0)]
    pub big_m: f64,
    #[arg(long = "T", alias = "horizon", default_value_t = 1000)]
    pub horizon: u64,
    #[arg(long = "F0", default_value_t = 1.0)]
    pub f0: f64,
    #[arg(long = "sigma0-sq", default_value_t = 1.0)]
    pub sigma0_sq: f64,
    #[arg(long = "sigma-a-sq", default_value_t = 0.0)]
    pub sigma_a_sq: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long = "v-sq", default_value_t = 0.0)]
    pub v_sq: f64,
    #[arg(long = "N", default_value_t = 1)]
    pub n: usize,
    #[arg(long = "grad0-sq", default_value_t = 0.0)]
    pub grad0_sq: f64,
    #[arg(long = "E0", default_value_t = 0.0)]
    pub e0: f64,
    /// EMA rate for bc (default: the prescribed value).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Step size (default: the prescribed value).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Recursion constant, 2 or 4 (default 2 if M = 0, else 4).
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long = "case", value_enum, default_value = "pl")]
    pub case: BoundCase,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Ratios for gainfactor, `lo:hi:count` in log10 or a list.
    #[arg(long, alias = "grid", value_parser = parse_grid, allow_hyphen_values = true)]
    pub ratios: Option<ValueGrid>,
    /// CSV file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TauArgs {
    #[arg(long = "sigmas-sq", value_delimiter = ',', required = true)]
    pub sigmas_sq: Vec<f64>,
    #[arg(long = "zetas-sq", value_delimiter = ',', required = true)]
    pub zetas_sq: Vec<f64>,
    /// Quadratic coefficient; default L / (mu T (1 - alpha^2 m)).
    #[arg(long)]
    pub coeff: Option<f64>,
    #[arg(long = "L", default_value_t = 1.0)]
    pub l: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long = "T", default_value_t = 1000)]
    pub horizon: u64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub m: f64,
}

/// Executes a parsed command, returning what it printed.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Experiment(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    }
}

fn dispatch(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Run(a) => cmd_run(&a),
        Command::Figure(a) => cmd_figure(&a),
        Command::Bounds(a) => cmd_bounds(&a),
        Command::Tau(a) => cmd_tau(&a),
        Command::Config { action } => cmd_config(action),
    }
}

fn csv_file<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn std::io::Write) -> collabsgd::Result<()>,
{
    write_atomic(path, |w| fill(w).map_err(CliError::from))
}

fn summarize(label: &str, r: &RunResult<f64>, out: &mut String) {
    let se = |s: Option<f64>| s.map(|v| format!(" +- {}", format_value(v))).unwrap_or_default();
    let _ = writeln!(
        out,
        "{label}: plateau {}{}, final gap {}{}, seeds {}",
        format_value(r.plateau_loss.mean),
        se(r.plateau_loss.se),
        format_value(r.final_gap.mean),
        se(r.final_gap.se),
        r.n_seeds(),
    );
    if r.n_diverged() > 0 {
        let _ = writeln!(out, "{label}: diverged seeds {:?}", r.diverged_seeds);
    }
}

pub fn cmd_run(a: &RunArgs) -> Result<String, CliError> {
    let exp = a.experiment()?;
    let dir = resolve_out_dir(a.out.clone().or_else(|| exp.output_dir.clone()));
    ensure_dir(&dir)?;
    let mut out = String::new();
    match &exp.sweep {
        None => run_single(&exp, &dir, &mut out)?,
        Some(spec) => run_sweep(&exp, spec, &dir, &mut out)?,
    }
    let _ = writeln!(out, "wrote {}", dir.display());
    Ok(out)
}

fn run_single(exp: &ExperimentConfig, dir: &Path, out: &mut String) -> Result<(), CliError> {
    let res = run_replicated_with_traces(&exp.run, &exp.seeds)?;
    let traces = res.traces.as_deref().unwrap_or_default();
    for (seed, tr) in exp.seeds.iter().zip(traces) {
        csv_file(&dir.join(format!("trace_seed{seed}.csv")), |w| write_trace_csv(w, tr, exp.trace_stride))?;
        let note = if tr.diverged() { " (diverged)" } else { "" };
        let _ = writeln!(
            out,
            "seed {seed}: final loss {}{note}",
            format_value(tr.plateau_loss())
        );
    }
    let label = exp.run.aggregator.to_string();
    csv_file(&dir.join("aggregate.csv"), |w| write_result_csv(w, &[(label.clone(), &res)]))?;
    csv_file(&dir.join("mean_curve.csv"), |w| write_curve_csv(w, &res.mean_curve, exp.trace_stride))?;
    summarize(&label, &res, out);
    Ok(())
}

fn run_sweep(exp: &ExperimentConfig, spec: &SweepSpec, dir: &Path, out: &mut String) -> Result<(), CliError> {
    let axis = spec.axis()?;
    let rows = sweep(&exp.run, axis, &spec.values, &exp.seeds)?;
    let labelled: Vec<(String, &RunResult<f64>)> = rows
        .iter()
        .map(|(v, r)| (format!("{axis}={}", format_value(*v)), r))
        .collect();
    for (label, r) in &labelled {
        csv_file(&dir.join(format!("{label}_mean_curve.csv")), |w| write_curve_csv(w, &r.mean_curve, exp.trace_stride))?;
        summarize(label, r, out);
    }
    csv_file(&dir.join("aggregate.csv"), |w| write_result_csv(w, &labelled))?;
    Ok(())
}

const SUMMARY_COLUMNS: [&str; 13] = [
    "curve",
    "aggregator",
    "value",
    "eta",
    "alpha",
    "beta",
    "plateau",
    "plateau_se",
    "final_gap",
    "final_gap_se",
    "time_to_plateau",
    "n_seeds",
    "n_diverged",
];

fn summary_rows(curves: &[&Curve]) -> Vec<Vec<String>> {
    let opt = |v: Option<f64>| v.map(format_value).unwrap_or_default();
    curves
        .iter()
        .map(|c| {
            let r = &c.result;
            vec![
                c.label.clone(),
                c.aggregator.to_string(),
                opt(c.value),
                format_value(c.eta),
                format_value(c.alpha),
                format_value(c.beta),
                format_value(r.plateau_loss.mean),
                opt(r.plateau_loss.se),
                format_value(r.final_gap.mean),
                opt(r.final_gap.se),
                c.time_to_plateau.map(|t| t.to_string()).unwrap_or_default(),
                r.n_seeds().to_string(),
                r.n_diverged().to_string(),
            ]
        })
        .collect()
}

fn write_curves(dir: &Path, name: &str, curves: &[&Curve], stride: usize, out: &mut String) -> Result<Vec<String>, CliError> {
    let mut files = Vec::new();
    for c in curves {
        let file = format!("{name}_{}.csv", c.label);
        csv_file(&dir.join(&file), |w| write_curve_csv(w, &c.result.mean_curve, stride))?;
        summarize(&c.label, &c.result, out);
        files.push(file);
    }
    let rows = summary_rows(curves);
    csv_file(&dir.join(format!("{name}_summary.csv")), |w| write_table(w, &SUMMARY_COLUMNS, &rows))?;
    Ok(files)
}

fn gnuplot_curves(name: &str, files: &[String]) -> String {
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset logscale y\nset xlabel 'step'\nset ylabel 'test loss'\nset terminal pngcairo size 900,600\nset output '{name}.png'\nplot "
    );
    let parts: Vec<String> = files
        .iter()
        .map(|f| format!("'{f}' using 1:2 with lines title '{}'", f.trim_end_matches(".csv")))
        .collect();
    s.push_str(&parts.join(", \\\n     "));
    s.push('\n');
    s
}

fn instance(a: &FigureArgs) -> Instance {
    let d = Instance::default();
    Instance {
        a0: a.a0.unwrap_or(d.a0),
        x0_star: d.x0_star,
        delta: a.delta.unwrap_or(d.delta),
        zeta: a.zeta.unwrap_or(d.zeta),
        sigma: a.sigma.unwrap_or(d.sigma),
        n: a.n.unwrap_or(d.n),
        x0: a.x0.unwrap_or(d.x0),
        horizon: a.horizon.unwrap_or(d.horizon),
        seeds: a.seeds.clone().map(|s| s.0).unwrap_or(d.seeds),
        c0: a.c0.unwrap_or(d.c0),
    }
}

fn sweep_params(a: &FigureArgs, mut p: SweepParams) -> SweepParams {
    p.inst = instance(a);
    p.eta = a.eta.unwrap_or(p.eta);
    p.beta = a.beta.unwrap_or(p.beta);
    if a.alpha.is_some() {
        p.alpha = a.alpha;
    }
    if let Some(v) = &a.values {
        p.values = v.clone();
    }
    p
}

pub fn cmd_figure(a: &FigureArgs) -> Result<String, CliError> {
    let name = FigureName::from_str(&a.name, true).map_err(|_| {
        CliError::Config(format!(
            "unknown figure `{}`; valid names: {}",
            a.name,
            figures::FIGURES.join(", ")
        ))
    })?;
    if a.stride == 0 {
        return Err(CliError::Config("--stride must be >= 1".into()));
    }
    let dir = resolve_out_dir(a.out.clone());
    ensure_dir(&dir)?;
    let mut out = String::new();
    let tag = figures::FIGURES[name as usize];
    let script = match name {
        FigureName::Fig2 => {
            let mut p = figures::Fig2Params {
                inst: instance(a),
                ..Default::default()
            };
            if let Some(g) = &a.eta_grid {
                p.eta_grid = g.clone();
            }
            p.bc_eta = a.eta.unwrap_or(p.bc_eta);
            p.bc_beta = a.beta.unwrap_or(p.bc_beta);
            let f = figures::fig2(&p)?;
            let files = write_curves(&dir, tag, &f.curves(), a.stride, &mut out)?;
            let rows: Vec<Vec<String>> = f
                .tuning
                .iter()
                .map(|r| {
                    vec![
                        r.method.to_string(),
                        format_value(r.eta),
                        format_value(r.plateau),
                        format_value(r.se),
                        r.n_diverged.to_string(),
                    ]
                })
                .collect();
            csv_file(&dir.join("fig2_tuning.csv"), |w| {
                write_table(w, &["method", "eta", "plateau", "se", "n_diverged"], &rows)
            })?;
            let _ = writeln!(
                out,
                "tuned eta: alone {}, wga {}; bc eta {}",
                format_value(f.alone.eta),
                format_value(f.wga.eta),
                format_value(f.bc.eta)
            );
            gnuplot_curves(tag, &files)
        }
        FigureName::Fig3 | FigureName::Fig4 | FigureName::Fig5 => {
            let curves = match name {
                FigureName::Fig3 => figures::fig3(&sweep_params(a, SweepParams::fig3()))?,
                FigureName::Fig4 => figures::fig4(&sweep_params(a, SweepParams::fig4()))?,
                _ => figures::fig5(&sweep_params(a, SweepParams::fig5()))?,
            };
            let refs: Vec<&Curve> = curves.iter().collect();
            let files = write_curves(&dir, tag, &refs, a.stride, &mut out)?;
            gnuplot_curves(tag, &files)
        }
        FigureName::Gainfactor => {
            let ns = a.ns.clone().unwrap_or_else(figures::default_ns);
            let ratios = a.ratios.clone().map(|g| g.0).unwrap_or_else(|| figures::log_grid(-3.0, 3.0, 25));
            let g = figures::gainfactor(&ns, &ratios)?;
            write_gainfactor(&dir.join("gainfactor.csv"), &g)?;
            let _ = writeln!(out, "gainfactor: {} x {} grid", ns.len(), ratios.len());
            format!(
                "set datafile separator ','\nset logscale x\nset xlabel 'L sigma_0^2 / (mu T zeta^2)'\nset ylabel 'N'\nset terminal pngcairo size 900,600\nset output 'gainfactor.png'\nplot for [col=2:{}] 'gainfactor.csv' using (column(0)):col matrix with image\n",
                ratios.len() + 1
            )
        }
        FigureName::Sublinear => {
            let ns = a.ns.clone().unwrap_or_else(|| (1..=100).collect());
            let ms = a.ms.clone().unwrap_or_else(|| vec![0.0, 0.01, 0.1, 0.5, 1.0]);
            let s = figures::sublinear(&ms, &ns, a.horizon.unwrap_or(1000))?;
            let mut header = vec!["N".to_string(), "linear".to_string()];
            header.extend(ms.iter().map(|m| format!("m={}", format_value(*m))));
            let rows: Vec<Vec<String>> = s
                .ns
                .iter()
                .zip(&s.speedup)
                .map(|(n, row)| {
                    let mut r = vec![n.to_string(), format_value(*n as f64 + 1.0)];
                    r.extend(row.iter().map(|&v| format_value(v)));
                    r
                })
                .collect();
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            csv_file(&dir.join("sublinear.csv"), |w| write_table(w, &header_refs, &rows))?;
            let _ = writeln!(out, "sublinear: {} values of N, m in {:?}", ns.len(), ms);
            format!(
                "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'N'\nset ylabel 'speedup'\nset terminal pngcairo size 900,600\nset output 'sublinear.png'\nplot 'sublinear.csv' using 1:2 with lines dashtype 2, for [col=3:{}] '' using 1:col with lines\n",
                ms.len() + 2
            )
        }
    };
    if a.gnuplot {
        write_text(&dir.join(format!("{tag}.gp")), &script)?;
    }
    let _ = writeln!(out, "wrote {}", dir.display());
    Ok(out)
}

fn write_gainfactor(path: &Path, g: &figures::Grid) -> Result<(), CliError> {
    let rows: Vec<String> = g.ns.iter().map(|n| n.to_string()).collect();
    let cols: Vec<String> = g.ratios.iter().map(|&r| format_value(r)).collect();
    csv_file(path, |w| write_grid(w, "N", &rows, &cols, &g.values))
}

fn schedule_inputs(a: &BoundsArgs) -> ScheduleInputs<f64> {
    let mut sim = SimilarityParams::from_constants(a.l, a.mu, a.m, a.zeta_sq, a.delta, a.big_m);
    sim.noise_scales = vec![a.big_m, 0.0];
    ScheduleInputs {
        sim,
        horizon: a.horizon,
        f0_gap: a.f0,
        sigma0_sq: a.sigma0_sq,
        sigma_a_sq: a.sigma_a_sq,
        alpha: a.alpha,
        oracle_var: a.v_sq,
        grad0_sq: a.grad0_sq,
        n: a.n,
    }
}

pub fn cmd_bounds(a: &BoundsArgs) -> Result<String, CliError> {
    let mut out = String::new();
    if a.kind == BoundKind::Gainfactor {
        let ns = a.ns.clone().unwrap_or_else(figures::default_ns);
        let ratios = a.ratios.clone().map(|g| g.0).unwrap_or_else(|| figures::log_grid(-3.0, 3.0, 25));
        let g = figures::gainfactor(&ns, &ratios)?;
        let path = a.out.clone().unwrap_or_else(|| resolve_out_dir(None).join("gainfactor.csv"));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        write_gainfactor(&path, &g)?;
        let _ = writeln!(out, "wrote {}", path.display());
        return Ok(out);
    }
    let sched = schedule_inputs(a);
    sched.validate()?;
    let c = a.c.unwrap_or_else(|| sched.c_const());
    let eta = match (a.eta, a.kind) {
        (Some(e), _) => e,
        (None, BoundKind::WgaNonconvex) => eta_wga_nonconvex(&sched)?,
        (None, BoundKind::WgaPl) => {
            let e = eta_wga_pl(&sched)?;
            if e > 0.0 {
                e
            } else {
                eta_wga_nonconvex(&sched)?
            }
        }
        (None, BoundKind::Oracle) => {
            let mut s = sched.clone();
            s.sigma_a_sq += s.oracle_var / s.n as f64;
            s.sim.grad_scale_mismatch = 0.0;
            s.sim.grad_offset_sq = 0.0;
            let e = eta_wga_pl(&s)?;
            if e > 0.0 && a.case == BoundCase::Pl {
                e
            } else {
                eta_wga_nonconvex(&s)?
            }
        }
        (None, _) => eta_bc(&sched)?,
    };
    let beta = match a.beta {
        Some(b) => b,
        None if a.kind == BoundKind::Bc => {
            let b = beta_bc(&sched, eta);
            if b > 0.0 {
                b
            } else if a.e0 == 0.0 || a.alpha == 0.0 {
                1.0
            } else {
                return Err(CliError::Config(
                    "the prescribed beta is 0 for delta = 0; pass --beta explicitly".into(),
                ));
            }
        }
        None => 1.0,
    };
    let inp = BoundInputs {
        sched,
        e0: a.e0,
        beta,
        eta,
        c,
    };
    let (label, value) = match (a.kind, a.case) {
        (BoundKind::WgaNonconvex, _) => ("avg_grad_norm_sq", bound_wga_nonconvex(&inp)?),
        (BoundKind::WgaPl, _) => ("final_gap", bound_wga_pl(&inp)?),
        (BoundKind::Oracle, BoundCase::Pl) => ("final_gap", bound_oracle_pl(&inp)?),
        (BoundKind::Oracle, BoundCase::Nonconvex) => ("avg_grad_norm_sq", bound_oracle_nonconvex(&inp)?),
        (BoundKind::Bc, _) => ("quarter_avg_grad_norm_sq", bound_bc(&inp)?),
        (BoundKind::Gainfactor, _) => unreachable!(),
    };
    let rows = vec![
        vec!["eta".to_string(), format_value(eta)],
        vec!["beta".to_string(), format_value(beta)],
        vec!["c".to_string(), format_value(c)],
        vec![label.to_string(), format_value(value)],
    ];
    for r in &rows {
        let _ = writeln!(out, "{} = {}", r[0], r[1]);
    }
    if let Some(path) = &a.out {
        csv_file(path, |w| write_table(w, &["quantity", "value"], &rows))?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(out)
}

pub fn cmd_tau(a: &TauArgs) -> Result<String, CliError> {
    let coeff = match a.coeff {
        Some(c) => c,
        None => {
            let margin = 1.0 - a.alpha * a.alpha * a.m;
            if !(margin > 0.0) {
                return Err(CliError::Config(format!(
                    "alpha = {} >= 1/sqrt(m) with m = {}",
                    a.alpha, a.m
                )));
            }
            a.l / (a.mu * a.horizon as f64 * margin)
        }
    };
    let tau = tau_qp(&a.sigmas_sq, &a.zetas_sq, coeff)?;
    let obj = tau_objective(&tau, &a.sigmas_sq, &a.zetas_sq, coeff);
    let weights: Vec<String> = tau.iter().map(|&t| format_value(t)).collect();
    Ok(format!(
        "tau = [{}]\nobjective = {}\n",
        weights.join(", "),
        format_value(obj)
    ))
}

fn cmd_config(action: ConfigAction) -> Result<String, CliError> {
    match action {
        ConfigAction::Template { out: None } => Ok(TEMPLATE.to_string()),
        ConfigAction::Template { out: Some(path) } => {
            write_text(&path, TEMPLATE)?;
            Ok(format!("wrote {}\n", path.display()))
        }
        ConfigAction::Check { path } => {
            let cfg = ExperimentConfig::load(&path)?;
            Ok(format!("{}: ok\n{}", path.display(), cfg.to_toml()?))
        }
    }
}
