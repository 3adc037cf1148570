//! Small statistical toolkit used by the Monte Carlo checks: moment
//! summaries, chi-square goodness of fit, two-sample Kolmogorov-Smirnov,
//! and an index-of-dispersion test for Poissonity.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Chi-square statistic and p-value for observed counts against expected
/// counts (same total). Cells with expected count zero must have zero
/// observed count.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    let mut stat = 0.0;
    let mut dof = 0i64;
    for (&o, &e) in observed.iter().zip(expected) {
        if e == 0.0 {
            assert_eq!(o, 0, "observed count in zero-probability cell");
            continue;
        }
        stat += (o as f64 - e).powi(2) / e;
        dof += 1;
    }
    dof -= 1;
    if dof <= 0 {
        return (stat, 1.0);
    }
    let dist = ChiSquared::new(dof as f64).unwrap();
    (stat, 1.0 - dist.cdf(stat))
}

/// Two-sample Kolmogorov-Smirnov distance and the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    // Kolmogorov tail sum
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
    }
    (d, p.clamp(0.0, 1.0))
}

/// Index of dispersion (variance / mean) of count data, with the normal
/// z-score of its deviation from 1 under a Poisson null.
pub fn dispersion_test(counts: &[u64]) -> (f64, f64) {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let ratio = var / mean;
    // (n-1) * ratio ~ chi-square(n-1) under Poisson; normalize
    let z = ((n - 1.0) * ratio - (n - 1.0)) / (2.0 * (n - 1.0)).sqrt();
    (ratio, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn mean_stderr_basic() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-12);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn chi_square_uniform_fair() {
        let mut rng = crate::rng::RngStream::new(1, 0).rng();
        let mut obs = [0u64; 10];
        for _ in 0..10_000 {
            obs[rng.gen_range(0..10)] += 1;
        }
        let exp = [1000.0; 10];
        let (_, p) = chi_square(&obs, &exp);
        assert!(p > 1e-4);
    }

    #[test]
    fn ks_same_vs_shifted() {
        let mut rng = crate::rng::RngStream::new(2, 0).rng();
        let a: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
        let (_, p_same) = ks_two_sample(&a, &b);
        assert!(p_same > 1e-4);
        let c: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        let (_, p_diff) = ks_two_sample(&a, &c);
        assert!(p_diff < 1e-6);
    }

    #[test]
    fn dispersion_poisson_near_one() {
        use rand_distr::{Distribution, Poisson};
        let mut rng = crate::rng::RngStream::new(3, 0).rng();
        let pois = Poisson::new(5.0).unwrap();
        let counts: Vec<u64> = (0..5000).map(|_| pois.sample(&mut rng) as u64).collect();
        let (ratio, z) = dispersion_test(&counts);
        assert!((ratio - 1.0).abs() < 0.1);
        assert!(z.abs() < 4.0);
    }
}
