use rand::Rng;
use rand_distr::StandardNormal;

/// Adds white Gaussian noise whose power sits `snr_db` below the measured
/// power of `x`. `None` returns an unchanged copy, as does an all-zero
/// input (with a warning, since no noise level can be derived from it).
pub fn augment_noise(x: &[f64], snr_db: Option<f64>, rng: &mut impl Rng) -> Vec<f64> {
    let Some(snr) = snr_db else {
        return x.to_vec();
    };
    let power = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
    if power == 0.0 {
        log::warn!("noise augmentation skipped: input has zero power");
        return x.to_vec();
    }
    let sigma = (power / 10f64.powf(snr / 10.0)).sqrt();
    x.iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}
