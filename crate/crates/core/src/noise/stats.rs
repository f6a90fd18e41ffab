//! Two-sample statistics: empirical Wasserstein-1 and Kolmogorov-Smirnov.

use super::params::NoiseError;

/// Empirical Wasserstein-1 distance between two equal-length samples: the
/// mean absolute difference of sorted order statistics.
pub fn empirical_w1(a: &[f64], b: &[f64]) -> Result<f64, NoiseError> {
    if a.is_empty() || b.is_empty() {
        return Err(NoiseError::EmptyInput("empirical_w1"));
    }
    if a.len() != b.len() {
        return Err(NoiseError::Domain(format!(
            "empirical_w1 needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let sum: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.len() as f64)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<f64, NoiseError> {
    if a.is_empty() || b.is_empty() {
        return Err(NoiseError::EmptyInput("two_sample_ks"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (sa.len(), sb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = sa[i].min(sb[j]);
        while i < n && sa[i] <= x {
            i += 1;
        }
        while j < m && sb[j] <= x {
            j += 1;
        }
        let fa = i as f64 / n as f64;
        let fb = j as f64 / m as f64;
        d = d.max((fa - fb).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS critical value at significance `alpha`:
/// `c(alpha) sqrt((n+m)/(n m))` with `c(alpha) = sqrt(-ln(alpha/2)/2)`.
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-((alpha / 2.0).ln()) / 2.0).sqrt();
    c * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::sampler::stream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn w1_identity_and_translation() {
        let mut rng = stream(11, 0);
        let a: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        assert_eq!(empirical_w1(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        let d = empirical_w1(&a, &b).unwrap();
        assert!((d - 0.5).abs() < 1e-12, "translation gave {d}");
    }

    #[test]
    fn w1_self_distance_small_at_1e5() {
        let mut rng = stream(12, 0);
        let a: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let d = empirical_w1(&a, &b).unwrap();
        assert!(d < 0.01, "self distance {d}");
    }

    #[test]
    fn w1_rejects_empty_and_mismatched() {
        assert!(empirical_w1(&[], &[]).is_err());
        assert!(empirical_w1(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ks_detects_shift_and_accepts_same_law() {
        let mut rng = stream(13, 0);
        let a: Vec<f64> = (0..20_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..20_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let crit = ks_critical_value(0.01, a.len(), b.len());
        assert!(two_sample_ks(&a, &b).unwrap() < crit);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.1).collect();
        assert!(two_sample_ks(&a, &shifted).unwrap() > crit);
    }
}
