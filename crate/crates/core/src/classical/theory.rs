//! Gaussian-channel reference curves.

/// Tail probability of the standard normal, `Q(x) = erfc(x / sqrt(2)) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Coherent MSK bit-error reference over a Gaussian channel:
/// `Q(sqrt(2 * 10^(ebn0_db/10)))`.
pub fn theoretical_msk_ber(ebn0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

/// Inverse of [`q_function`] on (0, 0.5], by bisection.
pub fn q_inverse(p: f64) -> f64 {
    assert!(p > 0.0 && p <= 0.5, "q_inverse domain is (0, 0.5], got {p}");
    let mut lo = 0.0;
    let mut hi = 40.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_toward_half_at_low_snr() {
        assert!((theoretical_msk_ber(-60.0) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn zero_db_value() {
        // Q(sqrt(2)) ≈ 0.0786
        assert!((theoretical_msk_ber(0.0) - 0.0786).abs() < 2e-4);
    }

    #[test]
    fn nine_point_six_db_is_about_1e_minus_5() {
        let v = theoretical_msk_ber(9.6);
        assert!(v > 0.6e-5 && v < 1.4e-5, "got {v}");
    }

    #[test]
    fn q_inverse_round_trip() {
        for p in [0.4, 0.1, 1e-2, 1e-4, 1e-6] {
            let x = q_inverse(p);
            assert!((q_function(x) - p).abs() / p < 1e-9);
        }
    }
}
