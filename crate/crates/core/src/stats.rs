//! Goodness-of-fit tests used by the validation suites.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Cells with expected count below this are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof).expect("positive dof");
    1.0 - dist.cdf(statistic)
}

/// Pearson goodness of fit of `observed` counts against cell
/// probabilities `probs` (which should sum to 1). Sparse cells are pooled.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> TestOutcome {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pooled_o, mut pooled_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n * p;
        if e < MIN_EXPECTED {
            pooled_o += o as f64;
            pooled_e += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_e > 0.0 {
        stat += (pooled_o - pooled_e).powi(2) / pooled_e;
        cells += 1;
    } else if pooled_o > 0.0 {
        // Mass where the model puts none.
        return TestOutcome { statistic: f64::INFINITY, dof: cells as f64, p_value: 0.0 };
    }
    let dof = cells.saturating_sub(1) as f64;
    TestOutcome { statistic: stat, dof, p_value: chi_square_p(stat, dof) }
}

/// Chi-square test that two count vectors over the same cells come from
/// one distribution. Cells with small pooled expectation are merged.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> TestOutcome {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let (na, nb) = (na as f64, nb as f64);
    let total = na + nb;
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut pa, mut pb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        let col = x + y;
        if col * na.min(nb) / total < MIN_EXPECTED {
            pa += x;
            pb += y;
        } else {
            merged.push((x, y));
        }
    }
    if pa + pb > 0.0 {
        merged.push((pa, pb));
    }
    let mut stat = 0.0;
    for &(x, y) in &merged {
        let col = x + y;
        let ea = col * na / total;
        let eb = col * nb / total;
        if ea > 0.0 {
            stat += (x - ea).powi(2) / ea;
        }
        if eb > 0.0 {
            stat += (y - eb).powi(2) / eb;
        }
    }
    let dof = merged.len().saturating_sub(1) as f64;
    TestOutcome { statistic: stat, dof, p_value: chi_square_p(stat, dof) }
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value. On
/// discrete data the test is conservative.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestOutcome {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    TestOutcome { statistic: d, dof: ne, p_value: kolmogorov_q(lambda) }
}

/// `Q(l) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 l^2)`.
fn kolmogorov_q(l: f64) -> f64 {
    if l < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * l * l).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn gof_on_exact_counts() {
        let t = chi_square_gof(&[100, 100, 100, 100], &[0.25; 4]);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 3.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        let t = chi_square_gof(&[400, 0, 0, 0], &[0.25; 4]);
        assert!(t.p_value < 1e-10);
    }

    #[test]
    fn gof_known_value() {
        // statistic 4 with 1 dof
        let t = chi_square_gof(&[60, 40], &[0.5, 0.5]);
        assert!((t.statistic - 4.0).abs() < 1e-12);
        assert!((t.p_value - 0.045500263896).abs() < 1e-9);
    }

    #[test]
    fn gof_impossible_cell() {
        let t = chi_square_gof(&[50, 50, 1], &[0.5, 0.5, 0.0]);
        assert_eq!(t.p_value, 0.0);
    }

    #[test]
    fn homogeneity_detects_shift() {
        let same = chi_square_homogeneity(&[500, 300, 200], &[1000, 600, 400]);
        assert!(same.statistic < 1e-12);
        let diff = chi_square_homogeneity(&[500, 300, 200], &[300, 300, 400]);
        assert!(diff.p_value < 1e-6);
    }

    #[test]
    fn ks_behaviour() {
        let mut r = RngStream::new(9, 0);
        let a: Vec<f64> = (0..5000).map(|_| r.uniform()).collect();
        let b: Vec<f64> = (0..5000).map(|_| r.uniform()).collect();
        let c: Vec<f64> = (0..5000).map(|_| r.uniform().powf(1.3)).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.001);
        assert!(ks_two_sample(&a, &c).p_value < 1e-6);
        // Q(1) = 0.2699996...
        assert!((kolmogorov_q(1.0) - 0.26999967).abs() < 1e-7);
    }

    #[test]
    fn mean_stderr() {
        let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (1.6666666666666667f64 / 4.0).sqrt()).abs() < 1e-15);
    }
}
