//! Right-hand sides of the convergence guarantees with explicit constants.

use serde::{Deserialize, Serialize};

use crate::schedules::{alpha_opt_wga_m0, speedup_factor, ScheduleInputs};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs<T> {
    pub sched: ScheduleInputs<T>,
    /// `E_0 = E||c_0 - grad f_1(x_0) + grad f_0(x_0)||^2`.
    pub e0: T,
    pub beta: T,
    pub eta: T,
    /// 2 when no relative noise is present, 4 otherwise.
    pub c: T,
}

impl<T: Scalar> BoundInputs<T> {
    pub fn validate(&self) -> Result<()> {
        self.sched.validate()?;
        if self.c != T::lit(2.0) && self.c != T::lit(4.0) {
            return Err(Error::invalid("c", format!("must be 2 or 4, got {}", self.c)));
        }
        for (name, v) in [("e0", self.e0), ("beta", self.beta), ("eta", self.eta)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    fn pl_mu(&self) -> Result<T> {
        let mu = self.sched.sim.pl_constant;
        if !(mu > T::zero()) {
            return Err(Error::invalid("pl_constant", "mu must be > 0 for PL bounds"));
        }
        Ok(mu)
    }

    fn check_eta(&self, limit: T) -> Result<()> {
        if self.eta > limit {
            return Err(Error::StepTooLarge {
                eta: self.eta.to_f64_lossy(),
                limit: limit.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

/// Bound on `(1/T) sum_t E||grad f_0(x_t)||^2` for WGA:
/// `c / (1 - alpha^2 m) [F_0 / (eta_max T) + sqrt(2 L F_0 sigma~^2 / T) + alpha^2 zeta^2 / 2]`.
/// Holds for the step size of `eta_wga_nonconvex`.
pub fn bound_wga_nonconvex<T: Scalar>(inp: &BoundInputs<T>) -> Result<T> {
    inp.validate()?;
    let s = &inp.sched;
    let margin = s.wga_margin()?;
    let eta_max = s.eta_max()?;
    let t = s.t();
    let l = s.sim.smoothness;
    let a = s.alpha;
    let inner = s.f0_gap / (eta_max * t)
        + (T::lit(2.0) * l * s.f0_gap * s.sigma_alpha_sq() / t).sqrt()
        + T::lit(0.5) * a * a * s.sim.grad_offset_sq;
    Ok(inp.c / margin * inner)
}

/// Bound on `F_T` for WGA with constant step `eta <= eta_max`:
/// `(1 - 2 mu eta (1 - alpha^2 m) / c)^T F_0 + c alpha^2 zeta^2 / (4 mu (1 - alpha^2 m))
///  + c L eta sigma~^2 / (4 mu (1 - alpha^2 m))`.
pub fn bound_wga_pl<T: Scalar>(inp: &BoundInputs<T>) -> Result<T> {
    inp.validate()?;
    let s = &inp.sched;
    let margin = s.wga_margin()?;
    inp.check_eta(s.eta_max()?)?;
    let mu = inp.pl_mu()?;
    let (c, a, eta) = (inp.c, s.alpha, inp.eta);
    let four = T::lit(4.0);
    let rate = T::one() - T::lit(2.0) * mu * eta * margin / c;
    Ok(contract(rate, s.horizon) * s.f0_gap
        + c * a * a * s.sim.grad_offset_sq / (four * mu * margin)
        + c * s.sim.smoothness * eta * s.sigma_alpha_sq() / (four * mu * margin))
}

/// Bound on `F_T` under the decreasing schedule started at `t0` with
/// `F_{t0}` known: `c alpha^2 zeta^2 / (4 mu (1 - alpha^2 m))
/// + c^2 L sigma~^2 / (2 mu^2 (1 - alpha^2 m)^2 T) + t0^2 F_{t0} / T^2`.
pub fn bound_wga_pl_decreasing<T: Scalar>(inp: &BoundInputs<T>, t0: u64, f_t0: T) -> Result<T> {
    inp.validate()?;
    let s = &inp.sched;
    let margin = s.wga_margin()?;
    let mu = inp.pl_mu()?;
    let (c, a, t) = (inp.c, s.alpha, s.t());
    let t0 = T::lit(t0 as f64);
    Ok(c * a * a * s.sim.grad_offset_sq / (T::lit(4.0) * mu * margin)
        + c * c * s.sim.smoothness * s.sigma_alpha_sq() / (T::lit(2.0) * mu * mu * margin * margin * t)
        + t0 * t0 * f_t0 / (t * t))
}

fn contract<T: Scalar>(rate: T, horizon: u64) -> T {
    let rate = rate.max(T::zero());
    match i32::try_from(horizon) {
        Ok(h) => rate.powi(h),
        Err(_) => rate.powf(T::lit(horizon as f64)),
    }
}

fn eta_max_oracle<T: Scalar>(s: &ScheduleInputs<T>) -> T {
    let l = s.sim.smoothness;
    let big_m = s.sim.combined_noise_scale();
    if big_m > T::zero() {
        (T::one() / l).min(T::one() / (T::lit(2.0) * l * big_m))
    } else {
        T::one() / l
    }
}

/// Bound on `F_T` with a bias oracle and constant step:
/// `(1 - 2 mu eta / c)^T F_0 + c L eta sigma~^2 / (4 mu)` with the oracle
/// variance `sigma~^2 = (1 - alpha)^2 sigma_0^2 + alpha^2 (sigma_a^2 + v^2/N)`.
pub fn bound_oracle_pl<T: Scalar>(inp: &BoundInputs<T>) -> Result<T> {
    inp.validate()?;
    let s = &inp.sched;
    inp.check_eta(eta_max_oracle(s))?;
    let mu = inp.pl_mu()?;
    let (c, eta) = (inp.c, inp.eta);
    let rate = T::one() - T::lit(2.0) * mu * eta / c;
    Ok(contract(rate, s.horizon) * s.f0_gap
        + c * s.sim.smoothness * eta * s.sigma_oracle_sq() / (T::lit(4.0) * mu))
}

/// Bound on `(1/T) sum_t E||grad f_0(x_t)||^2` with a bias oracle:
/// `c [F_0 / (eta_max T) + sqrt(2 L F_0 sigma~^2 / T)]`.
pub fn bound_oracle_nonconvex<T: Scalar>(inp: &BoundInputs<T>) -> Result<T> {
    inp.validate()?;
    let s = &inp.sched;
    let t = s.t();
    let l = s.sim.smoothness;
    Ok(inp.c
        * (s.f0_gap / (eta_max_oracle(s) * t)
            + (T::lit(2.0) * l * s.f0_gap * s.sigma_oracle_sq() / t).sqrt()))
}

/// Largest step the BC guarantee admits, `min(1/L, 1/(6 alpha^2 delta^2))`.
pub fn eta_limit_bc<T: Scalar>(s: &ScheduleInputs<T>) -> T {
    let ad = s.alpha * s.sim.hessian_dissimilarity;
    let cap = T::one() / s.sim.smoothness;
    if ad > T::zero() {
        cap.min(T::one() / (T::lit(6.0) * ad * ad))
    } else {
        cap
    }
}

/// The five-term BC bound on `(1/(4T)) sum_t E||grad f_0(x_t)||^2`:
/// `F_0/(eta T) + 4 alpha^2 E_0/(beta T)
///  + 12 alpha^2 ((s0 + sa)(zeta~^2/T + s0 + sa))^{1/3} (delta eta)^{2/3}
///  + L sigma^2(alpha) eta / 2 + 10 alpha^2 delta^2 sigma^2(alpha) eta^2`.
pub fn bound_bc<T: Scalar>(inp: &BoundInputs<T>) -> Result<T> {
    inp.validate()?;
    let s = &inp.sched;
    inp.check_eta(eta_limit_bc(s))?;
    if !(inp.eta > T::zero()) {
        return Err(Error::invalid("eta", "must be > 0"));
    }
    if !(inp.beta > T::zero() && inp.beta <= T::one()) {
        return Err(Error::invalid("beta", format!("must lie in (0, 1], got {}", inp.beta)));
    }
    let (a, eta, t) = (s.alpha, inp.eta, s.t());
    let delta = s.sim.hessian_dissimilarity;
    let noise = s.sigma0_sq + s.sigma_a_sq;
    let var = s.sigma_alpha_sq();
    let a2 = a * a;
    let drift = (noise * (s.zeta_tilde_sq() / t + noise)).cbrt() * (delta * eta).powf(T::lit(2.0 / 3.0));
    Ok(s.f0_gap / (eta * t)
        + T::lit(4.0) * a2 * inp.e0 / (inp.beta * t)
        + T::lit(12.0) * a2 * drift
        + s.sim.smoothness * var * eta / T::lit(2.0)
        + T::lit(10.0) * a2 * delta * delta * var * eta * eta)
}

/// [`bound_bc`] scaled to bound `(1/T) sum_t E||grad f_0(x_t)||^2`.
pub fn bound_bc_grad_norm<T: Scalar>(inp: &BoundInputs<T>) -> Result<T> {
    Ok(T::lit(4.0) * bound_bc(inp)?)
}

/// Speedup `1/(1 - alpha_opt)` with the `m = 0` optimal weight, over a grid
/// of collaborator counts (rows) and ratios `L sigma_0^2 / (mu T zeta^2)`
/// (columns). A ratio of 0 means `zeta^2 -> inf`, an infinite ratio
/// `zeta^2 = 0`.
pub fn gainfactor_surface<T: Scalar>(ns: &[usize], ratios: &[T]) -> Result<Vec<Vec<T>>> {
    ns.iter()
        .map(|&n| {
            ratios
                .iter()
                .map(|&r| {
                    if !(r >= T::zero()) {
                        return Err(Error::invalid("ratio", format!("must be >= 0, got {r}")));
                    }
                    // alpha_opt with mu zeta^2 T / (L sigma_0^2) = 1/r
                    let alpha = if r == T::zero() {
                        T::zero()
                    } else if r.is_infinite() {
                        alpha_opt_wga_m0(n, T::one(), T::one(), T::zero(), T::one(), 1)?
                    } else {
                        alpha_opt_wga_m0(n, T::one(), T::one(), T::one() / r, T::one(), 1)?
                    };
                    speedup_factor(alpha)
                })
                .collect()
        })
        .collect()
}
