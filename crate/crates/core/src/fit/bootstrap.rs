use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::data::{empirical_ccdf, Dataset};
use crate::error::{Error, Result};
use crate::params::Params;

use super::{refine, FitConfig, ParamErrors};

pub const MIN_BOOTSTRAP_RESAMPLES: usize = 20;

/// Keeps bootstrap streams apart from the restart streams of the same seed.
const STREAM_BASE: u64 = 1 << 32;

/// Nonparametric bootstrap: resample `ds` with replacement in proportion to the weights,
/// refit each resample from `center`, and report the standard deviation of each parameter.
pub fn bootstrap_errors(ds: &Dataset, config: &FitConfig, center: &Params) -> Result<ParamErrors> {
    let n = ds.len();
    let equal = ds.weights().iter().all(|&w| w == ds.weights()[0]);
    let weighted = if equal {
        None
    } else {
        Some(WeightedIndex::new(ds.weights()).map_err(|e| Error::Domain(e.to_string()))?)
    };
    bootstrap_errors_with(ds, config, center, |_, rng| match &weighted {
        Some(dist) => (0..n).map(|_| dist.sample(rng)).collect(),
        None => (0..n).map(|_| rng.random_range(0..n)).collect(),
    })
}

/// [`bootstrap_errors`] with the resample indices supplied by `draw(resample, rng)`.
/// `rng` is the stream of that resample.
pub fn bootstrap_errors_with<D>(ds: &Dataset, config: &FitConfig, center: &Params, draw: D) -> Result<ParamErrors>
where
    D: Fn(usize, &mut ChaCha8Rng) -> Vec<usize> + Sync,
{
    config.validate()?;
    let total = config.bootstrap_resamples;
    if total < MIN_BOOTSTRAP_RESAMPLES {
        return Err(Error::Config(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_RESAMPLES} resamples, got {total}"
        )));
    }
    let fits: Vec<Option<[f64; 6]>> = (0..total)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(STREAM_BASE + r as u64);
            let indices = draw(r, &mut rng);
            let fitted = ds
                .resample(&indices)
                .and_then(|s| empirical_ccdf(&s))
                .and_then(|c| refine(&c, config, center));
            match fitted {
                Ok(f) if f.converged => Some(f.params.to_array()),
                _ => None,
            }
        })
        .collect();

    let good: Vec<[f64; 6]> = fits.into_iter().flatten().collect();
    let failed = total - good.len();
    if 2 * failed > total || good.len() < 2 {
        return Err(Error::UnreliableErrors { failed, total });
    }
    let mut sd = [0.0; 6];
    for (i, s) in sd.iter_mut().enumerate() {
        // shifted by the first value so identical refits give exactly zero
        let shift = good[0][i];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for v in &good {
            let d = v[i] - shift;
            sum += d;
            sum_sq += d * d;
        }
        let k = good.len() as f64;
        *s = ((sum_sq - sum * sum / k) / (k - 1.0)).max(0.0).sqrt();
    }
    Ok(ParamErrors::from_array(sd))
}
