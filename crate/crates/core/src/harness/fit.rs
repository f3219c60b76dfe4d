//! Least-squares slopes on log-log data.

/// Slope of the least-squares line through `(ln x, ln y)`.
///
/// Returns `None` for fewer than two points or non-positive data.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law_exponent() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(4.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(loglog_slope(&[1.0], &[1.0]), None);
        assert_eq!(loglog_slope(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(loglog_slope(&[1.0, 2.0], &[0.0, 2.0]), None);
    }

    proptest::proptest! {
        #[test]
        fn slope_is_scale_invariant(p in -8.0f64..8.0, c in 1e-6f64..1e6, k in 1e-3f64..1e3) {
            let xs = [1.0, 0.5, 0.25, 0.125, 0.0625];
            let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(p)).collect();
            let scaled: Vec<f64> = xs.iter().map(|x| k * x).collect();
            let a = loglog_slope(&xs, &ys).unwrap();
            let b = loglog_slope(&scaled, &ys).unwrap();
            proptest::prop_assert!((a - p).abs() < 1e-9);
            proptest::prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
