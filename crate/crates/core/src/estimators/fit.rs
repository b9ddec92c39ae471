use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{EstimatorError, EstimatorResult};

/// One `(n, Es(2^n), stderr)` entry of a fit series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: f64,
    pub es: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub stderr: f64,
    /// 95% interval for alpha.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fitted `log2 Es` at `n = 0`.
    pub intercept: f64,
    pub reduced_chi2: f64,
    pub dof: usize,
}

impl AlphaFit {
    pub fn covers(&self, alpha: f64) -> bool {
        self.ci_low <= alpha && alpha <= self.ci_high
    }
}

/// Weighted least squares of `log2 Es` on `n` with weights from the
/// delta-method variance `(stderr / (Es ln 2))^2`. The slope is `-alpha`.
/// The covariance is scaled by the reduced chi-square when that exceeds 1.
pub fn fit_alpha(series: &[SeriesPoint]) -> Result<AlphaFit, EstimatorError> {
    let pts: Vec<(f64, f64, f64)> = series
        .iter()
        .filter(|p| p.es > 0.0 && p.stderr.is_finite() && p.stderr > 0.0 && p.n.is_finite())
        .map(|p| {
            let sigma = p.stderr / (p.es * std::f64::consts::LN_2);
            (p.n, p.es.log2(), 1.0 / (sigma * sigma))
        })
        .collect();
    if pts.len() < 3 {
        return Err(EstimatorError::TooFewPoints(pts.len()));
    }
    let mut normal = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for &(x, y, w) in &pts {
        normal += w * Matrix2::new(1.0, x, x, x * x);
        rhs += w * Vector2::new(y, x * y);
    }
    let cov = normal
        .try_inverse()
        .ok_or_else(|| EstimatorError::InvalidParameter("series needs at least two distinct n".into()))?;
    let beta = cov * rhs;
    let chi2: f64 = pts.iter().map(|&(x, y, w)| w * (y - beta[0] - beta[1] * x).powi(2)).sum();
    let dof = pts.len() - 2;
    let reduced = chi2 / dof as f64;
    let scale = reduced.max(1.0);
    let stderr = (cov[(1, 1)] * scale).sqrt();
    // Student t when the scatter sets the scale, normal otherwise.
    let z = if reduced > 1.0 {
        StudentsT::new(0.0, 1.0, dof as f64).expect("dof > 0").inverse_cdf(0.975)
    } else {
        1.959963984540054
    };
    let alpha = -beta[1];
    Ok(AlphaFit {
        alpha,
        stderr,
        ci_low: alpha - z * stderr,
        ci_high: alpha + z * stderr,
        intercept: beta[0],
        reduced_chi2: reduced,
        dof,
    })
}

/// `num / den` with delta-method stderr. Errors when the denominator is
/// less than 5 standard errors above zero.
pub fn ratio_result(num: &EstimatorResult, den: &EstimatorResult, label: &str) -> Result<EstimatorResult, EstimatorError> {
    if !(den.estimate > 5.0 * den.stderr) || den.estimate <= 0.0 {
        return Err(EstimatorError::UnstableRatio { estimate: den.estimate, stderr: den.stderr });
    }
    let b = num.estimate / den.estimate;
    let rel_num = if num.estimate > 0.0 { num.stderr / num.estimate } else { 0.0 };
    let rel_den = den.stderr / den.estimate;
    let stderr = if num.estimate > 0.0 {
        b * (rel_num * rel_num + rel_den * rel_den).sqrt()
    } else {
        num.stderr / den.estimate
    };
    let mut r = EstimatorResult {
        label: label.to_string(),
        estimate: b,
        stderr,
        n_samples: num.n_samples + den.n_samples,
        params: Default::default(),
        seed_manifest: num.seed_manifest,
        convention: num.convention.clone(),
    };
    r.params.insert("numerator".into(), num.estimate);
    r.params.insert("numerator_stderr".into(), num.stderr);
    r.params.insert("denominator".into(), den.estimate);
    r.params.insert("denominator_stderr".into(), den.stderr);
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: f64,
    pub es: f64,
    pub es_stderr: f64,
    /// `Es(2^n) / Es(2^{n-1})` when the previous row is at `n - 1`.
    pub b_n: Option<f64>,
    pub b_n_stderr: Option<f64>,
    pub length_mean: f64,
    pub length_stderr: f64,
    pub alpha: f64,
    /// `Es(2^n) 2^{alpha n}`.
    pub es_normalized: f64,
    /// `E(M) / r^{2 - alpha}` with `r = 2^n`.
    pub length_normalized: f64,
}

/// Builds rows from `(n, Es, length)` triples sorted by `n`.
pub fn scaling_rows(runs: &[(f64, &EstimatorResult, &EstimatorResult)], alpha: f64) -> Vec<ScalingRow> {
    let mut rows: Vec<ScalingRow> = Vec::with_capacity(runs.len());
    for (k, &(n, es, len)) in runs.iter().enumerate() {
        let prev = k.checked_sub(1).map(|j| runs[j]).filter(|p| (n - p.0 - 1.0).abs() < 1e-12);
        let ratio = prev.and_then(|p| ratio_result(es, p.1, "b_n").ok());
        rows.push(ScalingRow {
            n,
            es: es.estimate,
            es_stderr: es.stderr,
            b_n: ratio.as_ref().map(|r| r.estimate),
            b_n_stderr: ratio.as_ref().map(|r| r.stderr),
            length_mean: len.estimate,
            length_stderr: len.stderr,
            alpha,
            es_normalized: es.estimate * 2f64.powf(alpha * n),
            length_normalized: len.estimate / 2f64.powf(n * (2.0 - alpha)),
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::plan::SamplingPlan;
    use crate::rng::RngStream;

    fn series(alpha: f64, sigma: f64, rng: Option<&mut RngStream>) -> Vec<SeriesPoint> {
        let mut noise = rng;
        (4..=10)
            .map(|n| {
                let n = n as f64;
                let truth = 0.9 * 2f64.powf(-alpha * n);
                let sd = sigma * truth;
                let es = match noise.as_deref_mut() {
                    Some(r) => truth + sd * gaussian(r),
                    None => truth,
                };
                SeriesPoint { n, es, stderr: sd }
            })
            .collect()
    }

    fn gaussian(r: &mut RngStream) -> f64 {
        let u1 = r.uniform().max(1e-300);
        let u2 = r.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn exact_power_law() {
        let f = fit_alpha(&series(0.38, 0.01, None)).unwrap();
        assert!((f.alpha - 0.38).abs() < 1e-6);
        assert!((f.intercept - 0.9f64.log2()).abs() < 1e-6);
        assert!(f.reduced_chi2 < 1e-12);
    }

    #[test]
    fn coverage_under_noise() {
        let mut rng = RngStream::new(77, 0);
        let covered = (0..1000).filter(|_| fit_alpha(&series(0.38, 0.02, Some(&mut rng))).unwrap().covers(0.38)).count();
        assert!(covered >= 900, "{covered}");
    }

    #[test]
    fn too_few_points() {
        let s = series(0.38, 0.01, None);
        assert!(matches!(fit_alpha(&s[..2]), Err(EstimatorError::TooFewPoints(2))));
        let mut bad = s[..3].to_vec();
        bad[0].stderr = f64::NAN;
        assert!(fit_alpha(&bad).is_err());
    }

    fn result(p: f64, se: f64) -> EstimatorResult {
        let mut r = EstimatorResult::bernoulli("x", 0, 100, SamplingPlan::new(0, 100).manifest());
        r.estimate = p;
        r.stderr = se;
        r
    }

    #[test]
    fn ratio_delta_method() {
        let r = ratio_result(&result(0.4, 0.004), &result(0.8, 0.008), "b").unwrap();
        assert!((r.estimate - 0.5).abs() < 1e-15);
        assert!((r.stderr - 0.5 * (2.0 * 1e-4f64).sqrt()).abs() < 1e-15);
        assert!(matches!(
            ratio_result(&result(0.4, 0.01), &result(0.04, 0.01), "b"),
            Err(EstimatorError::UnstableRatio { .. })
        ));
    }

    #[test]
    fn rows_recompute_from_raw_fields() {
        let es = [result(0.5, 0.01), result(0.4, 0.01), result(0.3, 0.01)];
        let len = [result(3.0, 0.1), result(9.0, 0.2), result(30.0, 0.5)];
        let runs: Vec<_> = [(1.0, 0), (2.0, 1), (4.0, 2)].iter().map(|&(n, i)| (n, &es[i], &len[i])).collect();
        let rows = scaling_rows(&runs, 0.4);
        assert_eq!(rows[0].b_n, None);
        assert!((rows[1].b_n.unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(rows[2].b_n, None);
        for r in &rows {
            assert_eq!(r.es_normalized, r.es * 2f64.powf(r.alpha * r.n));
            assert_eq!(r.length_normalized, r.length_mean / 2f64.powf(r.n * (2.0 - r.alpha)));
        }
    }
}
