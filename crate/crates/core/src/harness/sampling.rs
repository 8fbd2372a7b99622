use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_columns;
use crate::kernel::CommunicationKernel;
use crate::model::{mean, velocities_from_natural, Ensemble, SecondOrderEnsemble};

/// Generator family echoed into run metadata.
pub const RNG_FAMILY: &str =
    "ChaCha8 (rand_chacha 0.9), seed_from_u64(seed), stream = particle index";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sampler {
    UniformBox,
    /// Normal with mean at the interval midpoint and standard deviation a quarter of the
    /// width, rejected to the interval.
    GaussianTruncated,
    /// Two equally likely clusters in the outer quarters of the x interval, heading toward
    /// each other from the outer quarters of the velocity interval.
    TwoCluster,
    /// Headed CSV with an `x` column and a `v` or `omega` column.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub sampler: Sampler,
    pub x_range: (f64, f64),
    /// Range of the second coordinate (`v` or `omega`, depending on the target ensemble).
    pub v_range: (f64, f64),
    pub n: usize,
    pub seed: u64,
    pub zero_mean: bool,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            sampler: Sampler::UniformBox,
            x_range: (-1.0, 1.0),
            v_range: (-1.0, 1.0),
            n: 64,
            seed: 0,
            zero_mean: true,
        }
    }
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("x_range", self.x_range), ("v_range", self.v_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::BadRange(format!(
                    "{name} must be a bounded interval, got [{lo}, {hi}]"
                )));
            }
        }
        if self.n == 0 && !matches!(self.sampler, Sampler::File(_)) {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    let normal = Normal::new(0.5 * (lo + hi), 0.25 * (hi - lo)).expect("positive width");
    loop {
        let s = normal.sample(rng);
        if (lo..=hi).contains(&s) {
            return s;
        }
    }
}

/// Particle `i` is drawn from its own stream, so the first `N` particles of a larger sample
/// coincide with an `N`-particle sample of the same seed.
fn draw(spec: &InitSpec, i: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(i as u64);
    match spec.sampler {
        Sampler::UniformBox => (
            uniform(&mut rng, spec.x_range),
            uniform(&mut rng, spec.v_range),
        ),
        Sampler::GaussianTruncated => (
            truncated_normal(&mut rng, spec.x_range),
            truncated_normal(&mut rng, spec.v_range),
        ),
        Sampler::TwoCluster => {
            let right = rng.random_bool(0.5);
            let quarter = |(lo, hi): (f64, f64), upper: bool| {
                let q = 0.25 * (hi - lo);
                if upper {
                    (hi - q, hi)
                } else {
                    (lo, lo + q)
                }
            };
            let x = uniform(&mut rng, quarter(spec.x_range, right));
            let v = uniform(&mut rng, quarter(spec.v_range, !right));
            (x, v)
        }
        Sampler::File(_) => unreachable!("file input is not sampled"),
    }
}

/// Raw columns before any centering.
pub fn sample_columns(spec: &InitSpec, second_column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let (mut x, mut y) = match &spec.sampler {
        Sampler::File(path) => read_columns(path, second_column)?,
        _ => (0..spec.n).map(|i| draw(spec, i)).unzip(),
    };
    if spec.zero_mean && !x.is_empty() {
        let (mx, my) = (mean(&x), mean(&y));
        x.iter_mut().for_each(|a| *a -= mx);
        y.iter_mut().for_each(|a| *a -= my);
    }
    Ok((x, y))
}

/// Deterministic initial ensemble; the second sampled coordinate becomes `v` or `omega`
/// according to the ensemble type.
pub fn sample_initial<E: Ensemble>(spec: &InitSpec) -> Result<E> {
    let (x, y) = sample_columns(spec, E::SECOND_COLUMN)?;
    E::from_columns(x, y)
}

/// Second-order state whose natural velocities are ordered like the positions. The
/// first-order flow then never reorders particles, so the singular system has no collision.
pub fn sample_order_preserving(
    spec: &InitSpec,
    kernel: &CommunicationKernel,
) -> Result<SecondOrderEnsemble> {
    let (mut x, mut w) = sample_columns(spec, "omega")?;
    x.sort_by(f64::total_cmp);
    w.sort_by(f64::total_cmp);
    let v = velocities_from_natural(&x, &w, kernel);
    SecondOrderEnsemble::new(x, v)
}
