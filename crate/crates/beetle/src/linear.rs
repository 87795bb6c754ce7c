//! Ordinary least squares in one variable and the Pearson correlation between
//! paired performance sequences.

use crate::error::{Error, Result};

/// Fit y = slope·x + intercept by least squares.
pub fn train_linear_map(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Config(format!(
            "x has {} points but y has {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Numeric(format!(
            "degenerate linear fit: {} point(s), need at least 2",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - x_mean) * (v - x_mean)).sum();
    if sxx == 0.0 {
        return Err(Error::Numeric(
            "degenerate linear fit: all x values are equal, slope is undefined".into(),
        ));
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(xv, yv)| (xv - x_mean) * (yv - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    Ok((slope, intercept))
}

/// Pearson correlation between two equal-length performance sequences.
pub fn performance_correlation(s_perf: &[f64], t_perf: &[f64]) -> Result<f64> {
    if s_perf.len() != t_perf.len() {
        return Err(Error::Config(format!(
            "sequences differ in length: {} vs {}",
            s_perf.len(),
            t_perf.len()
        )));
    }
    if s_perf.len() < 2 {
        return Err(Error::InsufficientData(
            "correlation needs at least 2 paired values".into(),
        ));
    }
    let n = s_perf.len() as f64;
    let s_mean = s_perf.iter().sum::<f64>() / n;
    let t_mean = t_perf.iter().sum::<f64>() / n;
    let ss: f64 = s_perf.iter().map(|v| (v - s_mean) * (v - s_mean)).sum();
    let tt: f64 = t_perf.iter().map(|v| (v - t_mean) * (v - t_mean)).sum();
    if ss == 0.0 || tt == 0.0 {
        return Err(Error::Undefined(
            "correlation is undefined when either sequence has zero variance".into(),
        ));
    }
    let st: f64 = s_perf
        .iter()
        .zip(t_perf)
        .map(|(s, t)| (s - s_mean) * (t - t_mean))
        .sum();
    Ok((st / (ss * tt).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let (slope, intercept) = train_linear_map(&x, &y).unwrap();
        assert!((slope - 2.0).abs() < 1e-9);
        assert!((intercept - 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_y_gives_zero_slope_and_mean_intercept() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [5.0, 5.0, 5.0, 5.0];
        let (slope, intercept) = train_linear_map(&x, &y).unwrap();
        assert_eq!(slope, 0.0);
        assert_eq!(intercept, 5.0);
    }

    #[test]
    fn single_point_and_constant_x_are_degenerate() {
        assert!(matches!(
            train_linear_map(&[1.0], &[2.0]),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            train_linear_map(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn residuals_are_orthogonal_to_x() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.gen_range(2..40);
            let x: Vec<f64> = (0..n).map(|i| i as f64 + rng.gen::<f64>()).collect();
            let y: Vec<f64> = x.iter().map(|v| v * rng.gen::<f64>() + rng.gen::<f64>() * 10.0).collect();
            let (slope, intercept) = train_linear_map(&x, &y).unwrap();
            let dot: f64 = x
                .iter()
                .zip(&y)
                .map(|(xv, yv)| (yv - (slope * xv + intercept)) * xv)
                .sum();
            let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(dot.abs() <= 1e-6 * y_norm.max(1.0), "residual·x = {dot}");
        }
    }

    #[test]
    fn correlation_hits_the_exact_poles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        let t: Vec<f64> = s.iter().map(|v| -v).collect();
        assert_eq!(performance_correlation(&s, &s).unwrap(), 1.0);
        assert_eq!(performance_correlation(&s, &t).unwrap(), -1.0);
    }

    #[test]
    fn correlation_matches_the_closed_form_on_a_small_pair() {
        // s=(1,2,3), t=(2,4,7): r = 15 / sqrt(6·38) = 0.9933992677987828…
        let r = performance_correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap();
        assert!((r - 15.0 / 228.0f64.sqrt()).abs() < 1e-12);
        assert!((r - 0.9933992677987828).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_undefined() {
        assert!(matches!(
            performance_correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::Undefined(_))
        ));
    }
}
