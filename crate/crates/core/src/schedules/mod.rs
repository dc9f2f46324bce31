//! Step sizes, EMA rates and collaboration weights prescribed by the
//! convergence theory.

mod golden;
mod tau;

pub use golden::golden_section;
pub use tau::{tau_objective, tau_qp};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar, SimilarityParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInputs<T> {
    pub sim: SimilarityParams<T>,
    /// Horizon `T`.
    pub horizon: u64,
    /// `F_0 = f_0(x_0) - f_0^*`.
    pub f0_gap: T,
    pub sigma0_sq: T,
    /// `sigma_a^2 = sum_k tau_k^2 sigma_k^2`.
    pub sigma_a_sq: T,
    pub alpha: T,
    /// Oracle noise variance `v^2`.
    pub oracle_var: T,
    /// `E ||grad f_0(x_0)||^2`.
    pub grad0_sq: T,
    /// Number of collaborators `N`.
    pub n: usize,
}

impl<T: Scalar> ScheduleInputs<T> {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "T must be >= 1"));
        }
        if self.n == 0 {
            return Err(Error::NoCollaborators);
        }
        let fields = [
            ("f0_gap", self.f0_gap),
            ("sigma0_sq", self.sigma0_sq),
            ("sigma_a_sq", self.sigma_a_sq),
            ("oracle_var", self.oracle_var),
            ("grad0_sq", self.grad0_sq),
            ("smoothness", self.sim.smoothness),
            ("pl_constant", self.sim.pl_constant),
            ("grad_scale_mismatch", self.sim.grad_scale_mismatch),
            ("grad_offset_sq", self.sim.grad_offset_sq),
            ("hessian_dissimilarity", self.sim.hessian_dissimilarity),
        ];
        for (name, v) in fields {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.sim.smoothness > T::zero()) {
            return Err(Error::invalid("smoothness", "L must be > 0"));
        }
        if self.sim.pl_constant > self.sim.smoothness {
            return Err(Error::invalid("pl_constant", "mu must not exceed L"));
        }
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::invalid("alpha", format!("must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn t(&self) -> T {
        T::lit(self.horizon as f64)
    }

    /// `1 - alpha^2 m`, checked positive.
    pub fn wga_margin(&self) -> Result<T> {
        let m = self.sim.grad_scale_mismatch;
        let margin = T::one() - self.alpha * self.alpha * m;
        if m > T::zero() && !(margin > T::zero()) {
            return Err(Error::VacuousWga {
                alpha: self.alpha.to_f64_lossy(),
                m: m.to_f64_lossy(),
            });
        }
        Ok(margin)
    }

    /// `(1 - alpha)^2 sigma_0^2 + alpha^2 sigma_a^2`.
    pub fn sigma_alpha_sq(&self) -> T {
        let a = self.alpha;
        (T::one() - a) * (T::one() - a) * self.sigma0_sq + a * a * self.sigma_a_sq
    }

    /// Oracle variance `(1 - alpha)^2 sigma_0^2 + alpha^2 (sigma_a^2 + v^2 / N)`.
    pub fn sigma_oracle_sq(&self) -> T {
        let a = self.alpha;
        let extra = self.oracle_var / T::lit(self.n as f64);
        (T::one() - a) * (T::one() - a) * self.sigma0_sq + a * a * (self.sigma_a_sq + extra)
    }

    /// `2 (1 + m) E||grad f_0(x_0)||^2 + 2 zeta^2`.
    pub fn zeta_tilde_sq(&self) -> T {
        let two = T::lit(2.0);
        two * (T::one() + self.sim.grad_scale_mismatch) * self.grad0_sq
            + two * self.sim.grad_offset_sq
    }

    /// `eta_max = min(1/L, (1 - alpha^2 m) / (2 L M))`; the second term only
    /// when `M > 0`.
    pub fn eta_max(&self) -> Result<T> {
        let margin = self.wga_margin()?;
        let l = self.sim.smoothness;
        let big_m = self.sim.combined_noise_scale();
        let mut eta = T::one() / l;
        if big_m > T::zero() {
            eta = eta.min(margin / (T::lit(2.0) * l * big_m));
        }
        Ok(eta)
    }

    /// Recursion constant: 2 without relative noise, 4 with it.
    pub fn c_const(&self) -> T {
        if self.sim.combined_noise_scale() > T::zero() {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        }
    }
}

pub fn eta_wga_nonconvex<T: Scalar>(inp: &ScheduleInputs<T>) -> Result<T> {
    inp.validate()?;
    let eta_max = inp.eta_max()?;
    let var_t = inp.sigma_alpha_sq() * inp.t();
    if var_t == T::zero() {
        return Ok(eta_max);
    }
    let l = inp.sim.smoothness;
    Ok(eta_max.min((T::lit(2.0) * inp.f0_gap / (l * var_t)).sqrt()))
}

/// Returns 0 when `2 mu F_0 T / (3 L sigma~^2) <= 1`; the caller then falls
/// back to [`eta_wga_nonconvex`].
pub fn eta_wga_pl<T: Scalar>(inp: &ScheduleInputs<T>) -> Result<T> {
    inp.validate()?;
    let eta_max = inp.eta_max()?;
    let margin = inp.wga_margin()?;
    let var = inp.sigma_alpha_sq();
    if var == T::zero() {
        return Ok(eta_max);
    }
    let (l, mu, t) = (inp.sim.smoothness, inp.sim.pl_constant, inp.t());
    if mu == T::zero() {
        return Err(Error::invalid("pl_constant", "mu must be > 0 for the PL schedule"));
    }
    let arg = T::lit(2.0) * mu * inp.f0_gap * t / (T::lit(3.0) * l * var);
    let log_term = arg.max(T::one()).ln();
    Ok(eta_max.min(log_term / (margin * mu * t)))
}

/// Decreasing PL step `eta_t = c (2t + 1) / (2 mu (1 - alpha^2 m) (t + 1)^2)`
/// clamped at `eta_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecreasingSchedule<T> {
    pub c: T,
    pub mu: T,
    pub margin: T,
    pub eta_max: T,
    /// First step whose unclamped value fits under `eta_max`.
    #[serde(default)]
    pub t0: u64,
}

impl<T: Scalar> DecreasingSchedule<T> {
    pub fn new(inp: &ScheduleInputs<T>, c: T) -> Result<Self> {
        inp.validate()?;
        if c != T::lit(2.0) && c != T::lit(4.0) {
            return Err(Error::invalid("c", format!("must be 2 or 4, got {c}")));
        }
        let mu = inp.sim.pl_constant;
        if !(mu > T::zero()) {
            return Err(Error::invalid("pl_constant", "mu must be > 0 for the PL schedule"));
        }
        let margin = inp.wga_margin()?;
        let eta_max = inp.eta_max()?;
        let mut s = Self {
            c,
            mu,
            margin,
            eta_max,
            t0: 0,
        };
        s.t0 = s.first_fit();
        Ok(s)
    }

    pub fn raw(&self, t: u64) -> T {
        let t = T::lit(t as f64);
        let two = T::lit(2.0);
        self.c * (two * t + T::one()) / (two * self.mu * self.margin * (t + T::one()) * (t + T::one()))
    }

    pub fn eta(&self, t: u64) -> T {
        self.raw(t).min(self.eta_max)
    }

    // raw(t) <= eta_max  <=>  eta_max u^2 - 2 K u + K >= 0 with u = t + 1
    fn first_fit(&self) -> u64 {
        let k = (self.c / (T::lit(2.0) * self.mu * self.margin)).to_f64_lossy();
        let e = self.eta_max.to_f64_lossy();
        if k <= e {
            return 0;
        }
        let u = (k + (k * k - e * k).sqrt()) / e;
        let mut t0 = (u.ceil() as u64).saturating_sub(1);
        while t0 > 0 && self.raw(t0 - 1) <= self.eta_max {
            t0 -= 1;
        }
        while self.raw(t0) > self.eta_max {
            t0 += 1;
        }
        t0
    }
}

pub fn eta_decreasing_pl<T: Scalar>(t: u64, inp: &ScheduleInputs<T>, c: T) -> Result<T> {
    Ok(DecreasingSchedule::new(inp, c)?.eta(t))
}

/// EMA rate `min(1, (10 delta^2 (zeta~^2/T + s) / s)^{1/3} eta^{2/3})` with
/// `s = sigma_0^2 + sigma_a^2`. Returns 1 when `s = 0` and 0 (with a warning)
/// when `delta = 0`.
pub fn beta_bc<T: Scalar>(inp: &ScheduleInputs<T>, eta: T) -> T {
    let s = inp.sigma0_sq + inp.sigma_a_sq;
    if s == T::zero() {
        return T::one();
    }
    let delta = inp.sim.hessian_dissimilarity;
    if delta == T::zero() {
        log::warn!("beta formula is 0 for delta = 0: the bias estimate would stay frozen at c_0");
        return T::zero();
    }
    let ratio = T::lit(10.0) * delta * delta * (inp.zeta_tilde_sq() / inp.t() + s) / s;
    T::one().min(ratio.cbrt() * eta.powf(T::lit(2.0 / 3.0)))
}

/// `min(1/L, 1/(6 alpha^2 delta^2), sqrt(2 F_0 / (L sigma^2(alpha) T)))`.
pub fn eta_bc<T: Scalar>(inp: &ScheduleInputs<T>) -> Result<T> {
    inp.validate()?;
    let l = inp.sim.smoothness;
    let mut eta = T::one() / l;
    let ad = inp.alpha * inp.sim.hessian_dissimilarity;
    if ad > T::zero() {
        eta = eta.min(T::one() / (T::lit(6.0) * ad * ad));
    }
    let var_t = inp.sigma_alpha_sq() * inp.t();
    if var_t > T::zero() {
        eta = eta.min((T::lit(2.0) * inp.f0_gap / (l * var_t)).sqrt());
    }
    Ok(eta)
}

/// `(1 + 1/N + mu zeta^2 T / (L sigma_0^2))^{-1}`, 0 when `sigma_0^2 = 0`.
pub fn alpha_opt_wga_m0<T: Scalar>(n: usize, mu: T, l: T, zeta_sq: T, sigma0_sq: T, t: u64) -> Result<T> {
    if n == 0 {
        return Err(Error::NoCollaborators);
    }
    if sigma0_sq == T::zero() {
        return Ok(T::zero());
    }
    let n = T::lit(n as f64);
    let bias = mu * zeta_sq * T::lit(t as f64) / (l * sigma0_sq);
    let denom = T::one() + T::one() / n + bias;
    if !denom.is_finite() {
        return Err(Error::invalid("alpha_opt", "denominator is not finite"));
    }
    Ok(T::one() / denom)
}

/// `N / (N + 1 + v^2 / sigma_0^2)`, 0 when `sigma_0^2 = 0`.
pub fn alpha_opt_oracle<T: Scalar>(n: usize, v_sq: T, sigma0_sq: T) -> Result<T> {
    if n == 0 {
        return Err(Error::NoCollaborators);
    }
    if sigma0_sq == T::zero() {
        return Ok(T::zero());
    }
    let n = T::lit(n as f64);
    Ok(n / (n + T::one() + v_sq / sigma0_sq))
}

pub fn speedup_factor<T: Scalar>(alpha_opt: T) -> Result<T> {
    if !(alpha_opt >= T::zero() && alpha_opt < T::one()) {
        return Err(Error::invalid(
            "alpha_opt",
            format!("must lie in [0, 1), got {alpha_opt}"),
        ));
    }
    Ok(T::one() / (T::one() - alpha_opt))
}

/// Inputs of the PL rate trade-off minimized over `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlTradeoff<T> {
    pub m: T,
    pub zeta_sq: T,
    pub sigma0_sq: T,
    /// Noise variance of each collaborator; `sigma_a^2 = sigma_1^2 / N`.
    pub sigma1_sq: T,
    pub mu: T,
    pub l: T,
    pub t: u64,
    pub n: usize,
}

impl<T: Scalar> PlTradeoff<T> {
    /// `L sigma~^2 / (mu^2 T (1 - a^2 m)^2) + a^2 zeta^2 / (mu (1 - a^2 m))`,
    /// infinite outside `a^2 m < 1`.
    pub fn objective(&self, a: T) -> T {
        let margin = T::one() - a * a * self.m;
        if !(margin > T::zero()) {
            return T::infinity();
        }
        let sigma_a_sq = self.sigma1_sq / T::lit(self.n as f64);
        let var = (T::one() - a) * (T::one() - a) * self.sigma0_sq + a * a * sigma_a_sq;
        let t = T::lit(self.t as f64);
        self.l * var / (self.mu * self.mu * t * margin * margin)
            + a * a * self.zeta_sq / (self.mu * margin)
    }

    pub fn upper(&self) -> T {
        if self.m > T::zero() {
            T::one().min(T::one() / self.m.sqrt())
        } else {
            T::one()
        }
    }

    /// Rate at `alpha = 0` over the rate at the optimal `alpha`.
    pub fn speedup(&self) -> T {
        self.objective(T::zero()) / self.objective(alpha_opt_wga_general(self))
    }
}

/// Golden-section minimizer of [`PlTradeoff::objective`] on `(0, min(1, 1/sqrt(m)))`.
pub fn alpha_opt_wga_general<T: Scalar>(p: &PlTradeoff<T>) -> T {
    golden_section(|a| p.objective(a), T::zero(), p.upper(), T::lit(1e-10))
}
