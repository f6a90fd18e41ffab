//! Block Rayleigh fading and zero-forcing equalization with perfect CSI.

use rand::Rng;
use rand_distr::StandardNormal;

use super::ClassicalError;

/// Gains below this are clamped during equalization to keep the division
/// bounded; the realization records that it happened.
pub const ZF_GAIN_FLOOR: f64 = 1e-6;

/// One realization of per-block fading magnitudes.
///
/// Gains are magnitudes of a circularly-symmetric complex Gaussian with unit
/// second moment, so `E[g^2] = 1`.
#[derive(Debug, Clone)]
pub struct FadingRealization {
    gains: Vec<f64>,
    block_len: usize,
}

impl FadingRealization {
    pub fn draw(num_samples: usize, block_len: usize, rng: &mut impl Rng) -> Self {
        assert!(block_len >= 1);
        let blocks = num_samples.div_ceil(block_len);
        let gains = (0..blocks)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                ((re * re + im * im) / 2.0).sqrt()
            })
            .collect();
        FadingRealization { gains, block_len }
    }

    pub fn unit(num_samples: usize, block_len: usize) -> Self {
        FadingRealization {
            gains: vec![1.0; num_samples.div_ceil(block_len)],
            block_len,
        }
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// True when any gain sits below the equalizer clamp.
    pub fn has_clamped_gain(&self) -> bool {
        self.gains.iter().any(|&g| g < ZF_GAIN_FLOOR)
    }

    fn check_coverage(&self, n: usize) -> Result<(), ClassicalError> {
        if self.gains.len() * self.block_len < n {
            return Err(ClassicalError::Framing(format!(
                "fading covers {} samples, input has {n}",
                self.gains.len() * self.block_len
            )));
        }
        Ok(())
    }

    /// Per-block multiplication by the gain.
    pub fn apply(&self, samples: &[f64]) -> Result<Vec<f64>, ClassicalError> {
        self.check_coverage(samples.len())?;
        Ok(samples
            .iter()
            .enumerate()
            .map(|(i, &v)| v * self.gains[i / self.block_len])
            .collect())
    }

    /// Zero-forcing equalization: per-block division by the (perfectly
    /// known) gain, clamped at [`ZF_GAIN_FLOOR`].
    pub fn zf_equalize(&self, received: &[f64]) -> Result<Vec<f64>, ClassicalError> {
        self.check_coverage(received.len())?;
        Ok(received
            .iter()
            .enumerate()
            .map(|(i, &v)| v / self.gains[i / self.block_len].max(ZF_GAIN_FLOOR))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_gain_is_identity_both_ways() {
        let f = FadingRealization::unit(32, 8);
        let x: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        assert_eq!(f.apply(&x).unwrap(), x);
        assert_eq!(f.zf_equalize(&x).unwrap(), x);
    }

    #[test]
    fn equalize_inverts_apply_exactly_on_the_signal() {
        let mut rng = crate::noise::stream(41, 0);
        let f = FadingRealization::draw(64, 8, &mut rng);
        let x: Vec<f64> = (0..64).map(|i| (0.3 * i as f64).cos()).collect();
        let faded = f.apply(&x).unwrap();
        let eq = f.zf_equalize(&faded).unwrap();
        for (a, b) in x.iter().zip(&eq) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn equalized_noise_scale_is_inverse_gain() {
        // a block with gain g turns additive noise m into m/g
        let mut rng = crate::noise::stream(42, 0);
        let f = FadingRealization::draw(4096, 512, &mut rng);
        let noise: Vec<f64> = (0..4096).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let eq = f.zf_equalize(&noise).unwrap();
        for (b, &g) in f.gains().iter().enumerate() {
            let raw: f64 = noise[b * 512..(b + 1) * 512].iter().map(|v| v.abs()).sum::<f64>() / 512.0;
            let post: f64 = eq[b * 512..(b + 1) * 512].iter().map(|v| v.abs()).sum::<f64>() / 512.0;
            let ratio = post / raw;
            assert!((ratio - 1.0 / g).abs() < 1e-9, "block {b}: {ratio} vs {}", 1.0 / g);
        }
    }

    #[test]
    fn gains_have_unit_second_moment() {
        let mut rng = crate::noise::stream(43, 0);
        let f = FadingRealization::draw(200_000, 1, &mut rng);
        let m2: f64 = f.gains().iter().map(|g| g * g).sum::<f64>() / f.gains().len() as f64;
        assert!((m2 - 1.0).abs() < 0.01, "second moment {m2}");
        assert!(f.gains().iter().all(|&g| g > 0.0));
    }

    #[test]
    fn coverage_is_checked() {
        let f = FadingRealization::unit(16, 8);
        assert!(f.apply(&vec![0.0; 17]).is_err());
    }
}
