//! Error statistics over Monte Carlo trials.

use rand::Rng;

use crate::rng::Stream;

pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// sqrt(mean e²).
pub fn rmse(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// mean (e_i / truth_i)².
pub fn nmse(errors: &[f64], truths: &[f64]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    errors.iter().zip(truths).map(|(e, t)| (e / t).powi(2)).sum::<f64>() / errors.len() as f64
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of `stat` by resampling trials with replacement.
pub fn bootstrap_se(values: &[f64], stat: impl Fn(&[f64]) -> f64, rng: &mut Stream) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut sample = vec![0.0; values.len()];
    let stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for s in sample.iter_mut() {
                *s = values[rng.random_range(0..values.len())];
            }
            stat(&sample)
        })
        .collect();
    let m = mean(&stats);
    (stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (stats.len() - 1) as f64).sqrt()
}
