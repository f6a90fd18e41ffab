//! Sample myriad and sliding myriad filter.
//!
//! The sample myriad is `argmin_beta sum_i log(k^2 + (x_i - beta)^2)`, a
//! multimodal objective, so the argmin is located by evaluating a coarse grid
//! over the sample range and bisecting the derivative inside every bracketed
//! local minimum.

use super::ClassicalError;

const GRID_POINTS: usize = 64;
const REFINE_STEPS: usize = 40;

#[inline]
fn objective(x: &[f64], k2: f64, beta: f64) -> f64 {
    // same minimizer as the log-sum: the product form saves the logs
    let mut prod = 1.0;
    for &v in x {
        let d = v - beta;
        prod *= k2 + d * d;
    }
    prod
}

#[inline]
fn derivative(x: &[f64], k2: f64, beta: f64) -> f64 {
    // d/dbeta of sum log(k^2 + (x-beta)^2)
    let mut s = 0.0;
    for &v in x {
        let d = beta - v;
        s += 2.0 * d / (k2 + d * d);
    }
    s
}

/// Myriad location estimate of one window.
pub fn sample_myriad(window: &[f64], k: f64) -> f64 {
    debug_assert!(k > 0.0);
    let k2 = k * k;
    let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-300 {
        return lo; // constant window: unique minimizer
    }
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid_vals: Vec<f64> = (0..GRID_POINTS)
        .map(|i| objective(window, k2, lo + i as f64 * step))
        .collect();

    let mut best_beta = lo;
    let mut best_val = grid_vals[0];
    let consider = |beta: f64, val: f64, best_beta: &mut f64, best_val: &mut f64| {
        if val < *best_val {
            *best_val = val;
            *best_beta = beta;
        }
    };
    consider(hi, grid_vals[GRID_POINTS - 1], &mut best_beta, &mut best_val);

    for i in 1..GRID_POINTS - 1 {
        if grid_vals[i] <= grid_vals[i - 1] && grid_vals[i] <= grid_vals[i + 1] {
            // local minimum bracketed in (i-1, i+1); bisect the derivative
            let mut a = lo + (i - 1) as f64 * step;
            let mut b = lo + (i + 1) as f64 * step;
            if derivative(window, k2, a) <= 0.0 && derivative(window, k2, b) >= 0.0 {
                for _ in 0..REFINE_STEPS {
                    let mid = 0.5 * (a + b);
                    if derivative(window, k2, mid) < 0.0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
            }
            let beta = 0.5 * (a + b);
            consider(beta, objective(window, k2, beta), &mut best_beta, &mut best_val);
            // keep the raw grid point too in case refinement drifted
            consider(
                lo + i as f64 * step,
                grid_vals[i],
                &mut best_beta,
                &mut best_val,
            );
        }
    }
    best_beta
}

/// Sliding-window myriad filter with mirror padding at the edges.
pub fn myriad_filter(samples: &[f64], window: usize, k: f64) -> Result<Vec<f64>, ClassicalError> {
    if window < 3 || window % 2 == 0 {
        return Err(ClassicalError::InvalidParameter(format!(
            "window must be odd and >= 3, got {window}"
        )));
    }
    if !(k > 0.0) {
        return Err(ClassicalError::InvalidParameter(format!(
            "linearity parameter k must be positive, got {k}"
        )));
    }
    if samples.is_empty() {
        return Err(ClassicalError::InvalidParameter("empty input".into()));
    }
    let n = samples.len();
    let h = window / 2;
    let reflect = |idx: isize| -> f64 {
        let m = (n - 1) as isize;
        let mut i = idx;
        if i < 0 {
            i = -i;
        }
        if i > m {
            i = 2 * m - i;
        }
        samples[i.clamp(0, m) as usize]
    };
    let mut buf = vec![0.0; window];
    let mut out = Vec::with_capacity(n);
    for c in 0..n as isize {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = reflect(c - h as isize + j as isize);
        }
        out.push(sample_myriad(&buf, k));
    }
    Ok(out)
}

/// Standard tuning rule for the linearity parameter under stable noise:
/// `k = sqrt(alpha / (2 - alpha)) * gamma^(1/alpha)`, for `alpha < 2`.
pub fn myriad_k(alpha: f64, dispersion: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 2.0, "tuning rule needs alpha in (0,2)");
    (alpha / (2.0 - alpha)).sqrt() * dispersion.powf(1.0 / alpha)
}
