use crate::Scalar;

/// Minimizes a unimodal `f` on `[lo, hi]` by golden-section search and
/// returns the abscissa once the bracket is narrower than `tol`.
pub fn golden_section<T: Scalar, F: Fn(T) -> T>(f: F, lo: T, hi: T, tol: T) -> T {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        // f32 cannot always resolve the requested tolerance
        if c >= d {
            break;
        }
    }
    (a + b) / T::lit(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let x = golden_section(|x: f64| (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
    }

    #[test]
    fn boundary_minimum() {
        let x = golden_section(|x: f64| x, 0.0, 1.0, 1e-10);
        assert!(x < 1e-9);
    }

    #[test]
    fn works_in_f32() {
        let x = golden_section(|x: f32| (x - 0.7).powi(2), 0.0, 1.0, 1e-10);
        assert!((x - 0.7).abs() < 1e-3);
    }
}
