use crate::{Error, Result, Scalar};

/// Minimizes `sum_k coeff sigma_k^2 tau_k^2 + zeta_k^2 tau_k` over the
/// probability simplex.
///
/// With `q_k = coeff sigma_k^2` the KKT conditions give
/// `tau_k = max(0, (lambda - zeta_k^2) / (2 q_k))` for `q_k > 0`. Indices with
/// `q_k = 0` can only carry mass at `lambda = zeta_k^2`, so the smallest such
/// `zeta_k^2` caps `lambda`; mass left over at the cap is split evenly over
/// the zero-curvature indices attaining it.
pub fn tau_qp<T: Scalar>(sigmas_sq: &[T], zetas_sq: &[T], coeff: T) -> Result<Vec<T>> {
    let n = sigmas_sq.len();
    if n == 0 {
        return Err(Error::NoCollaborators);
    }
    if zetas_sq.len() != n {
        return Err(Error::LengthMismatch {
            what: "zetas_sq",
            expected: n,
            got: zetas_sq.len(),
        });
    }
    let bad = |v: &T| !(*v >= T::zero()) || !v.is_finite();
    if sigmas_sq.iter().any(bad) || zetas_sq.iter().any(bad) {
        return Err(Error::invalid("tau_qp", "inputs must be finite and non-negative"));
    }
    if bad(&coeff) {
        return Err(Error::invalid("coeff", format!("must be finite and >= 0, got {coeff}")));
    }

    let two = T::lit(2.0);
    let q: Vec<T> = sigmas_sq.iter().map(|&s| coeff * s).collect();
    let cap = (0..n)
        .filter(|&k| q[k] == T::zero())
        .map(|k| zetas_sq[k])
        .fold(T::infinity(), T::min);

    let mass_at = |lambda: T| -> T {
        (0..n)
            .filter(|&k| q[k] > T::zero())
            .map(|k| ((lambda - zetas_sq[k]) / (two * q[k])).max(T::zero()))
            .sum()
    };

    let mut tau = vec![T::zero(); n];
    if cap.is_finite() && mass_at(cap) < T::one() {
        for k in 0..n {
            if q[k] > T::zero() {
                tau[k] = ((cap - zetas_sq[k]) / (two * q[k])).max(T::zero());
            }
        }
        let ties: Vec<usize> = (0..n)
            .filter(|&k| q[k] == T::zero() && zetas_sq[k] == cap)
            .collect();
        let share = (T::one() - mass_at(cap)) / T::lit(ties.len() as f64);
        for k in ties {
            tau[k] = share;
        }
    } else {
        let lambda = water_level(&q, zetas_sq);
        for k in 0..n {
            if q[k] > T::zero() {
                tau[k] = ((lambda - zetas_sq[k]) / (two * q[k])).max(T::zero());
            }
        }
    }
    let total: T = tau.iter().copied().sum();
    tau.iter_mut().for_each(|t| *t = *t / total);
    Ok(tau)
}

/// Solves `sum_{q_k > 0} max(0, (lambda - z_k) / (2 q_k)) = 1` for `lambda`.
fn water_level<T: Scalar>(q: &[T], z: &[T]) -> T {
    let two = T::lit(2.0);
    let mut idx: Vec<usize> = (0..q.len()).filter(|&k| q[k] > T::zero()).collect();
    idx.sort_by(|&a, &b| z[a].partial_cmp(&z[b]).unwrap());
    let (mut inv, mut weighted) = (T::zero(), T::zero());
    let mut lambda = T::zero();
    for (j, &k) in idx.iter().enumerate() {
        inv = inv + T::one() / (two * q[k]);
        weighted = weighted + z[k] / (two * q[k]);
        lambda = (T::one() + weighted) / inv;
        match idx.get(j + 1) {
            Some(&next) if lambda > z[next] => continue,
            _ => break,
        }
    }
    lambda
}

/// Objective value of [`tau_qp`] at `tau`.
pub fn tau_objective<T: Scalar>(tau: &[T], sigmas_sq: &[T], zetas_sq: &[T], coeff: T) -> T {
    tau.iter()
        .zip(sigmas_sq)
        .zip(zetas_sq)
        .map(|((&t, &s), &z)| coeff * s * t * t + z * t)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn symmetric_inputs_give_uniform() {
        let t = tau_qp(&[2.0; 4], &[3.0; 4], 0.5).unwrap();
        assert!(close(&t, &[0.25; 4]));
    }

    #[test]
    fn zero_coeff_picks_argmin() {
        let t = tau_qp(&[1.0, 5.0, 2.0], &[4.0, 1.0, 9.0], 0.0).unwrap();
        assert_eq!(t, vec![0.0, 1.0, 0.0]);
        let t = tau_qp(&[1.0, 5.0, 2.0], &[1.0, 1.0, 9.0], 0.0).unwrap();
        assert_eq!(t, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn two_equal_noises() {
        let t = tau_qp(&[1.0, 1.0], &[0.0, 0.0], 1.0).unwrap();
        assert!(close(&t, &[0.5, 0.5]));
    }

    #[test]
    fn inactive_index_gets_zero() {
        // lambda = 2 + 1 = 3 with only index 0 active, below z_1 = 10
        let t = tau_qp(&[1.0, 1.0], &[1.0, 10.0], 1.0).unwrap();
        assert!(close(&t, &[1.0, 0.0]));
        // both active: tau_0 - tau_1 = (z_1 - z_0) / 2 = 0.25
        let t = tau_qp(&[1.0, 1.0], &[1.0, 1.5], 1.0).unwrap();
        assert!(close(&t, &[0.625, 0.375]));
    }

    #[test]
    fn noiseless_collaborator_caps_level() {
        // index 1 has q = 0 and z = 1: index 0 only takes mass while z_0 < 1
        let t = tau_qp(&[1.0, 0.0], &[0.5, 1.0], 1.0).unwrap();
        assert!(close(&t, &[0.25, 0.75]));
        let t = tau_qp(&[1.0, 0.0], &[2.0, 1.0], 1.0).unwrap();
        assert!(close(&t, &[0.0, 1.0]));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(tau_qp::<f64>(&[], &[], 1.0).is_err());
        assert!(tau_qp(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(tau_qp(&[-1.0], &[1.0], 1.0).is_err());
        assert!(tau_qp(&[1.0], &[1.0], -1.0).is_err());
    }
}
