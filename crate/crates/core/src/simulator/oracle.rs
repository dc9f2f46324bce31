use super::RunConfig;
use crate::{Aggregator, Error, Result, Scalar};

/// Expected iterate `E[x_t]`, `t = 0..=T`, for Alone, WGA and OracleBC.
///
/// The noise is additive and zero-mean, so on quadratics the expectation
/// follows the affine recursion
/// `E x_{t+1} = E x_t - eta_t [(1 - alpha) a_0 (E x_t - x_0^*) + alpha sum_k tau_k a_k (E x_t - x_k^*)]`
/// (the oracle's pseudo-gradient has mean `grad f_0`). BC's estimate
/// depends on the noise history and has no such recursion.
pub fn mean_dynamics_oracle<T: Scalar>(cfg: &RunConfig<T>, horizon: u64) -> Result<Vec<Vec<T>>> {
    cfg.validate()?;
    let alpha = match cfg.aggregator {
        Aggregator::Alone | Aggregator::OracleBc => T::zero(),
        Aggregator::Wga => cfg.weights.alpha,
        Aggregator::Bc => {
            return Err(Error::Unsupported(
                "no closed-form mean dynamics for BC: the bias estimate couples to the noise".into(),
            ))
        }
    };
    let main = &cfg.main_task;
    let mut x = cfg.x0.clone();
    let mut out = Vec::with_capacity(usize::try_from(horizon).unwrap_or(0).saturating_add(1));
    out.push(x.clone());
    for t in 0..horizon {
        let eta = cfg.step_size.eta(t);
        #[allow(clippy::needless_range_loop)]
        for d in 0..x.len() {
            let own = main.curvature[d] * (x[d] - main.optimum[d]);
            let others: T = cfg
                .collaborators
                .iter()
                .zip(&cfg.weights.tau)
                .map(|(c, &tk)| tk * c.curvature[d] * (x[d] - c.optimum[d]))
                .sum();
            x[d] = x[d] - eta * ((T::one() - alpha) * own + alpha * others);
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// Fixed point of the WGA mean recursion,
/// `((1 - alpha) a_0 x_0^* + alpha sum_k tau_k a_k x_k^*) / ((1 - alpha) a_0 + alpha sum_k tau_k a_k)`
/// per coordinate.
pub fn wga_fixed_point<T: Scalar>(cfg: &RunConfig<T>) -> Vec<T> {
    let alpha = cfg.weights.alpha;
    let main = &cfg.main_task;
    (0..main.dim())
        .map(|d| {
            let mut num = (T::one() - alpha) * main.curvature[d] * main.optimum[d];
            let mut den = (T::one() - alpha) * main.curvature[d];
            for (c, &tk) in cfg.collaborators.iter().zip(&cfg.weights.tau) {
                num = num + alpha * tk * c.curvature[d] * c.optimum[d];
                den = den + alpha * tk * c.curvature[d];
            }
            num / den
        })
        .collect()
}
