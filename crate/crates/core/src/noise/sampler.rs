//! Seeded sampling of symmetric alpha-stable and mixed Gaussian-impulsive
//! noise via the Chambers-Mallows-Stuck transform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_PI_2, PI};

use super::params::{MginParams, NoiseError, StableParams};

/// Independent substream `worker_id` of the generator seeded by `seed`.
/// Streams with distinct ids never overlap.
pub fn stream(seed: u64, worker_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker_id);
    rng
}

/// A sampled noise matrix together with the parameters and seed it came from.
#[derive(Debug, Clone)]
pub struct NoiseBatch {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    params: MginParams,
    seed: u64,
}

impl NoiseBatch {
    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        params: MginParams,
        seed: u64,
    ) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        NoiseBatch {
            rows,
            cols,
            data,
            params,
            seed,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn params(&self) -> &MginParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

#[inline]
fn uniform_open(rng: &mut impl Rng) -> f64 {
    // open (0,1): both endpoints break the CMS transform
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 && u < 1.0 {
            return u;
        }
    }
}

/// One symmetric alpha-stable draw with unit dispersion.
#[inline]
fn sas_unit(alpha: f64, rng: &mut impl Rng) -> f64 {
    let v = PI * (uniform_open(rng) - 0.5); // uniform on (-pi/2, pi/2)
    if alpha == 1.0 {
        return v.tan();
    }
    let w = -(1.0 - uniform_open(rng)).ln(); // standard exponential, > 0
    let cv = v.cos();
    let t1 = (alpha * v).sin() / cv.powf(1.0 / alpha);
    let t2 = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    t1 * t2
}

/// I.i.d. symmetric alpha-stable draws, scale `dispersion^(1/alpha)`.
pub fn sample_sas(
    params: &StableParams,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, NoiseError> {
    if count == 0 {
        return Err(NoiseError::InvalidParameter(
            "sample count must be at least 1".into(),
        ));
    }
    let c = params.scale();
    let alpha = params.alpha();
    Ok((0..count).map(|_| c * sas_unit(alpha, rng)).collect())
}

/// Elementwise sum of independent `N(0, sigma^2)` and stable draws.
///
/// With `sigma^2 = 0` the Gaussian component is skipped entirely, so the
/// output equals `sample_sas` on the same stream, sample for sample.
pub fn sample_mgin(
    params: &MginParams,
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<NoiseBatch, NoiseError> {
    if rows == 0 || cols == 0 {
        return Err(NoiseError::InvalidParameter(format!(
            "batch must be at least 1x1, got {rows}x{cols}"
        )));
    }
    let mut rng = stream(seed, 0);
    let n = rows * cols;
    let mut data = sample_sas(params.stable(), n, &mut rng)?;
    if params.sigma2() > 0.0 {
        let sd = params.sigma2().sqrt();
        for v in &mut data {
            let g: f64 = rng.sample(StandardNormal);
            *v += sd * g;
        }
    }
    debug_assert!(data.iter().all(|v| v.is_finite()));
    Ok(NoiseBatch {
        rows,
        cols,
        data,
        params: *params,
        seed,
    })
}

/// Fill a buffer with MGIN draws from an existing stream (training hot path).
pub fn fill_mgin(params: &MginParams, out: &mut [f64], rng: &mut impl Rng) {
    let c = params.stable().scale();
    let alpha = params.stable().alpha();
    let sd = params.sigma2().sqrt();
    for v in out.iter_mut() {
        let mut x = c * sas_unit(alpha, rng);
        if sd > 0.0 {
            let g: f64 = rng.sample(StandardNormal);
            x += sd * g;
        }
        *v = x;
    }
}

#[allow(dead_code)]
fn v_uniform_bounds_doc() {
    // V is strictly inside (-pi/2, pi/2) because uniform_open excludes 0 and 1,
    // so cos(V) > 0 and tan(V) is finite.
    let _ = FRAC_PI_2;
}
