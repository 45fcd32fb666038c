//! Least-squares fitting helpers used by the measurement checkers.
//!
//! Power laws `y = C * x^m` are fitted by ordinary least squares on
//! `(ln x, ln y)` pairs; the slope estimates the exponent `m` and the
//! intercept estimates `ln C`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {need} points for a fit, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("log-log fit requires strictly positive samples, got ({x}, {y})")]
    NonPositive { x: f64, y: f64 },
}

/// Result of an ordinary least-squares line fit on `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogLogFit {
    /// Fitted exponent (slope in log-log coordinates).
    pub slope: f64,
    /// Fitted `ln C` (intercept in log-log coordinates).
    pub intercept: f64,
    /// Standard error of the slope: `sqrt(SSE / (n - 2) / Sxx)`; zero when
    /// the fit is exact or has only two points.
    pub stderr: f64,
    /// Number of samples used.
    pub n: usize,
}

impl LogLogFit {
    /// The multiplicative constant `C = exp(intercept)` of `y = C x^slope`.
    pub fn constant(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Ordinary least squares for `y = a + b x`; returns `(a, b, stderr_b)`.
fn linear_fit(pts: &[(f64, f64)]) -> Result<(f64, f64, f64), FitError> {
    let n = pts.len();
    if n < 2 {
        return Err(FitError::TooFewPoints { need: 2, got: n });
    }
    let nf = n as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in pts {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        // Degenerate abscissa: report a flat line through the mean rather
        // than NaN so constant data (e.g. box counts of a point) fits slope 0.
        return Ok((mean_y, 0.0, 0.0));
    }
    let b = sxy / sxx;
    let a = mean_y - b * mean_x;
    let stderr = if n > 2 {
        let sse: f64 = pts.iter().map(|&(x, y)| (y - a - b * x).powi(2)).sum();
        (sse.max(0.0) / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((a, b, stderr))
}

/// Fit `y = C x^m` by least squares on logs. All samples must be strictly
/// positive.
pub fn log_log_fit(pairs: &[(f64, f64)]) -> Result<LogLogFit, FitError> {
    if pairs.len() < 2 {
        return Err(FitError::TooFewPoints { need: 2, got: pairs.len() });
    }
    let mut logs = Vec::with_capacity(pairs.len());
    for &(x, y) in pairs {
        if !(x > 0.0) || !(y > 0.0) {
            return Err(FitError::NonPositive { x, y });
        }
        logs.push((x.ln(), y.ln()));
    }
    let (a, b, se) = linear_fit(&logs)?;
    Ok(LogLogFit { slope: b, intercept: a, stderr: se, n: pairs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let pairs: Vec<(f64, f64)> =
            (1..=6).map(|k| (k as f64, 3.5 * (k as f64).powf(1.75))).collect();
        let fit = log_log_fit(&pairs).unwrap();
        assert!((fit.slope - 1.75).abs() < 1e-12);
        assert!((fit.constant() - 3.5).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        assert_eq!(fit.n, 6);
    }

    #[test]
    fn stderr_grows_with_scatter() {
        let clean: Vec<(f64, f64)> = (1..=5).map(|k| (2f64.powi(k), 2f64.powi(k))).collect();
        let noisy: Vec<(f64, f64)> = clean
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (x, y * if i % 2 == 0 { 1.2 } else { 0.8 }))
            .collect();
        let f0 = log_log_fit(&clean).unwrap();
        let f1 = log_log_fit(&noisy).unwrap();
        assert!(f0.stderr < 1e-12);
        assert!(f1.stderr > 1e-3);
    }

    #[test]
    fn two_points_give_exact_secant_slope() {
        let fit = log_log_fit(&[(1.0, 2.0), (4.0, 32.0)]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert_eq!(fit.stderr, 0.0);
    }

    #[test]
    fn rejects_nonpositive_samples() {
        assert!(matches!(
            log_log_fit(&[(1.0, 1.0), (2.0, 0.0)]),
            Err(FitError::NonPositive { .. })
        ));
        assert!(matches!(
            log_log_fit(&[(-1.0, 1.0), (2.0, 1.0)]),
            Err(FitError::NonPositive { .. })
        ));
        assert!(matches!(log_log_fit(&[(1.0, 1.0)]), Err(FitError::TooFewPoints { .. })));
    }

    #[test]
    fn constant_ordinate_fits_slope_zero() {
        let pairs: Vec<(f64, f64)> = (1..=4).map(|k| (2f64.powi(k), 7.0)).collect();
        let fit = log_log_fit(&pairs).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!((fit.constant() - 7.0).abs() < 1e-12);
    }
}
