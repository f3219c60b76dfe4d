use super::{RootSettings, SolverError};
use crate::scalar::Scalar;

/// Grid resolution of the fallback bracket scan on each side of 1.
const SCAN_POINTS: usize = 256;

/// Finds the relaxation parameter: the root of `g` closest to 1.
///
/// `g(γ) = η(wⁿ + γd) − η(wⁿ)` always has the trivial root `γ = 0`; only roots
/// inside `settings.bracket` and above `gamma_min` are admissible. Newton is
/// started from `γ = 1`. If it leaves the bracket or stalls, the bracket is
/// scanned outward from 1 for the nearest sign change, which is then refined
/// by Newton steps safeguarded with bisection.
pub fn solve_gamma<T, G, D>(mut g: G, mut g_prime: D, settings: &RootSettings<T>) -> Result<T, SolverError>
where
    T: Scalar,
    G: FnMut(T) -> T,
    D: FnMut(T) -> T,
{
    settings
        .validate()
        .map_err(|reason| SolverError::RelaxationRootNotFound { reason })?;
    let (lo, hi) = settings.bracket;
    let admissible = |gamma: T| gamma > settings.gamma_min && gamma >= lo && gamma <= hi;

    // Newton from 1.
    let mut gamma = T::one();
    let mut value = g(gamma);
    for _ in 0..settings.max_iter {
        if !value.is_finite() {
            break;
        }
        if value.abs() <= settings.tol {
            let gamma = polish(&mut g, &mut g_prime, gamma, value, lo, hi);
            if admissible(gamma) {
                return Ok(gamma);
            }
            break;
        }
        let slope = g_prime(gamma);
        if slope == T::zero() || !slope.is_finite() {
            break;
        }
        let next = gamma - value / slope;
        if !(next >= lo && next <= hi) {
            break;
        }
        gamma = next;
        value = g(gamma);
    }

    let (a, b) = nearest_bracket(&mut g, settings)?;
    let gamma = bracketed_newton(&mut g, &mut g_prime, a, b, settings)?;
    if admissible(gamma) {
        Ok(gamma)
    } else {
        Err(SolverError::RelaxationRootNotFound {
            reason: format!("root {gamma} is not admissible"),
        })
    }
}

/// A few extra Newton steps after the tolerance is met, kept only while they
/// reduce `|g|`, so that γ is resolved close to rounding level.
fn polish<T: Scalar>(
    g: &mut impl FnMut(T) -> T,
    g_prime: &mut impl FnMut(T) -> T,
    mut gamma: T,
    mut value: T,
    lo: T,
    hi: T,
) -> T {
    for _ in 0..3 {
        if value == T::zero() {
            break;
        }
        let slope = g_prime(gamma);
        if slope == T::zero() || !slope.is_finite() {
            break;
        }
        let next = gamma - value / slope;
        if !(next >= lo && next <= hi) {
            break;
        }
        let next_value = g(next);
        if next_value.abs() < value.abs() {
            gamma = next;
            value = next_value;
        } else {
            break;
        }
    }
    gamma
}

/// Scans outward from 1 and returns the sign-change interval nearest to 1.
fn nearest_bracket<T: Scalar>(
    g: &mut impl FnMut(T) -> T,
    settings: &RootSettings<T>,
) -> Result<(T, T), SolverError> {
    let (lo, hi) = settings.bracket;
    let one = T::one();
    let n = T::lit(SCAN_POINTS as f64);
    let h_left = (one - lo) / n;
    let h_right = (hi - one) / n;
    let g_one = g(one);
    let mut left_prev = (one, g_one);
    let mut right_prev = (one, g_one);

    for i in 1..=SCAN_POINTS {
        let step = T::lit(i as f64);
        // Visit the nearer of the two candidates first.
        let right = one + step * h_right;
        let left = one - step * h_left;
        let mut probes = [(right, true), (left, false)];
        if h_left < h_right {
            probes.swap(0, 1);
        }
        for (gamma, is_right) in probes {
            let value = g(gamma);
            let prev = if is_right { &mut right_prev } else { &mut left_prev };
            if value.abs() <= settings.tol {
                return Ok((gamma, gamma));
            }
            if value.is_finite() && prev.1.is_finite() && value.signum() != prev.1.signum() {
                return Ok(if is_right { (prev.0, gamma) } else { (gamma, prev.0) });
            }
            *prev = (gamma, value);
        }
    }
    Err(SolverError::RelaxationRootNotFound {
        reason: format!(
            "g has no sign change in [{lo}, {hi}] and |g(1)| = {:e}",
            g_one.abs().as_f64()
        ),
    })
}

fn bracketed_newton<T: Scalar>(
    g: &mut impl FnMut(T) -> T,
    g_prime: &mut impl FnMut(T) -> T,
    mut a: T,
    mut b: T,
    settings: &RootSettings<T>,
) -> Result<T, SolverError> {
    if a == b {
        return Ok(a);
    }
    let mut g_a = g(a);
    let mut gamma = (a + b) * T::lit(0.5);
    // Bisection alone needs ~60 halvings in double precision.
    for _ in 0..settings.max_iter.max(200) {
        let value = g(gamma);
        if value.abs() <= settings.tol {
            return Ok(gamma);
        }
        if value.signum() == g_a.signum() {
            a = gamma;
            g_a = value;
        } else {
            b = gamma;
        }
        if b - a <= T::epsilon() * gamma.abs() {
            break;
        }
        let slope = g_prime(gamma);
        let newton = gamma - value / slope;
        gamma = if newton > a && newton < b && newton.is_finite() {
            newton
        } else {
            (a + b) * T::lit(0.5)
        };
    }
    Err(SolverError::RelaxationRootNotFound {
        reason: format!("bracket [{a}, {b}] collapsed above tolerance"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> RootSettings<f64> {
        RootSettings::default()
    }

    #[test]
    fn exact_quadratic_case() {
        let gamma = solve_gamma(|g| g * g - g, |g| 2.0 * g - 1.0, &settings()).unwrap();
        assert_eq!(gamma, 1.0);
    }

    #[test]
    fn squared_norm_closed_form() {
        let w = [0.8, 0.6];
        let d = [-0.19, 0.2];
        let eta = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let at = |gamma: f64| [w[0] + gamma * d[0], w[1] + gamma * d[1]];
        let g = |gamma: f64| eta(&at(gamma)) - eta(&w);
        let gp = |gamma: f64| {
            let x = at(gamma);
            2.0 * (x[0] * d[0] + x[1] * d[1])
        };
        let closed = -2.0 * (w[0] * d[0] + w[1] * d[1]) / (d[0] * d[0] + d[1] * d[1]);
        assert!(closed > 0.5 && closed < 1.5, "{closed}");
        let gamma = solve_gamma(g, gp, &settings()).unwrap();
        assert!((gamma - closed).abs() < 1e-13, "{gamma} vs {closed}");
        assert!(g(gamma).abs() <= 1e-14);
    }

    #[test]
    fn no_sign_change_is_reported() {
        let err = solve_gamma(|g| g * g + 0.1, |g| 2.0 * g, &settings()).unwrap_err();
        assert!(matches!(err, SolverError::RelaxationRootNotFound { .. }));
    }

    #[test]
    fn newton_escape_falls_back_to_nearest_bracket() {
        // Newton from 1 jumps straight to the trivial root; roots at 1 ± 0.3 and 0.
        let g = |x: f64| x * ((x - 1.0) * (x - 1.0) - 0.09);
        let gp = |x: f64| (x - 1.0) * (x - 1.0) - 0.09 + 2.0 * x * (x - 1.0);
        let gamma = solve_gamma(g, gp, &settings()).unwrap();
        assert!((gamma - 0.7).abs() < 1e-12 || (gamma - 1.3).abs() < 1e-12, "{gamma}");
    }

    #[test]
    fn nearest_root_wins() {
        // Roots at 0.6 and 1.1; Newton from 1 may land on either, the answer must be 1.1.
        let g = |x: f64| x * (x - 0.6) * (x - 1.1);
        let gp = |x: f64| (x - 0.6) * (x - 1.1) + x * (x - 1.1) + x * (x - 0.6);
        let gamma = solve_gamma(g, gp, &settings()).unwrap();
        assert!((gamma - 1.1).abs() < 1e-12, "{gamma}");
    }

    #[test]
    fn invalid_bracket_is_rejected() {
        let s = RootSettings {
            bracket: (1.1, 1.5),
            ..settings()
        };
        assert!(solve_gamma(|g| g - 1.0, |_| 1.0, &s).is_err());
    }

    proptest::proptest! {
        #[test]
        fn returned_root_meets_tolerance(root in 0.55f64..1.45, scale in 0.01f64..10.0) {
            let g = |x: f64| scale * x * (x - root);
            let gp = |x: f64| scale * (2.0 * x - root);
            let gamma = solve_gamma(g, gp, &RootSettings::default()).unwrap();
            proptest::prop_assert!(g(gamma).abs() <= 1e-14);
            proptest::prop_assert!((gamma - root).abs() < 1e-12);
        }
    }
}
