use serde::Serialize;

use crate::error::{Error, Result};

/// Exponential fit `value ≈ C e^{-rate · t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    pub c: f64,
    pub rate: f64,
    /// RMS of the log-residuals over the fitted points.
    pub residual: f64,
    pub samples_used: usize,
}

/// Least-squares line through `(x, y)`; returns `(intercept, slope, rms)`.
pub fn linear_lsq(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (intercept, slope, rms)
}

fn validate(series: &[(f64, f64)]) -> Result<()> {
    if series.len() < 10 {
        return Err(Error::FitRejected(format!(
            "need at least 10 samples, got {}",
            series.len()
        )));
    }
    if let Some((t, v)) = series.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::FitRejected(format!("nonpositive value {v} at t = {t}")));
    }
    Ok(())
}

fn fit_points(points: &[(f64, f64)]) -> FitReport {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (a, b, rms) = linear_lsq(&xs, &ys);
    FitReport {
        c: a.exp(),
        rate: -b,
        residual: rms,
        samples_used: points.len(),
    }
}

/// Log-linear least squares over the tail half of the series.
pub fn decay_fit(series: &[(f64, f64)]) -> Result<FitReport> {
    validate(series)?;
    Ok(fit_points(&series[series.len() / 2..]))
}

/// Like [`decay_fit`] but through the local maxima of the tail half, which
/// removes the modulation of underdamped oscillations. Falls back to all
/// tail points when fewer than three maxima exist.
pub fn envelope_decay_fit(series: &[(f64, f64)]) -> Result<FitReport> {
    validate(series)?;
    let tail = &series[series.len() / 2..];
    let peaks: Vec<(f64, f64)> = tail
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1)
        .map(|w| w[1])
        .collect();
    if peaks.len() < 3 {
        Ok(fit_points(tail))
    } else {
        Ok(fit_points(&peaks))
    }
}

/// Slope of `log y` against `log x`; the measured convergence order when
/// `x` is the step size.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_lsq(&lx, &ly).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_exponential() {
        let s: Vec<(f64, f64)> = (0..50).map(|i| {
            let t = i as f64 * 0.1;
            (t, 3.0 * (-2.0 * t).exp())
        }).collect();
        let f = decay_fit(&s).unwrap();
        assert_abs_diff_eq!(f.rate, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(f.c, 3.0, epsilon = 1e-8);
        assert_eq!(f.samples_used, 25);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let s: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 0.7)).collect();
        assert_eq!(decay_fit(&s).unwrap().rate, 0.0);
    }

    #[test]
    fn rejects_short_or_nonpositive() {
        let s: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 1.0)).collect();
        assert!(decay_fit(&s).is_err());
        let mut s: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 1.0)).collect();
        s[3].1 = 0.0;
        assert!(matches!(decay_fit(&s), Err(Error::FitRejected(_))));
    }

    #[test]
    fn envelope_removes_modulation() {
        let s: Vec<(f64, f64)> = (0..4000)
            .map(|i| {
                let t = i as f64 * 0.01;
                (t, (-0.5 * t).exp() * (2.0 + (3.0 * t).cos()))
            })
            .collect();
        let f = envelope_decay_fit(&s).unwrap();
        assert!((f.rate - 0.5).abs() < 1e-3, "{}", f.rate);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1e-2, 5e-3, 2.5e-3];
        let ys: Vec<f64> = xs.iter().map(|x| 7.0 * x * x).collect();
        assert_abs_diff_eq!(loglog_slope(&xs, &ys), 2.0, epsilon = 1e-12);
    }
}
