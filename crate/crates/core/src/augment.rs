//! Random time-series augmentations producing the second training view.
//!
//! Each call picks one transform uniformly from the configured family (or
//! applies all of them in order when composition is enabled). All transforms
//! preserve the series length and are pure functions of the rng state.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Augmentation {
    /// Add i.i.d. N(0, sigma^2) noise to every value.
    Jitter { sigma: f64 },
    /// Multiply the whole series by exp(N(0, sigma_s^2)).
    Scaling { sigma: f64 },
    /// Split into `parts` contiguous segments and permute them.
    SegmentPermute { parts: usize },
    /// Circular shift by up to max_frac * m steps either way.
    TimeShift { max_frac: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub family: Vec<Augmentation>,
    /// Apply every family member in order instead of picking one.
    pub compose: bool,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            family: vec![
                Augmentation::Jitter { sigma: 0.1 },
                Augmentation::Scaling { sigma: 0.1 },
                Augmentation::SegmentPermute { parts: 4 },
            ],
            compose: false,
        }
    }
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.family.is_empty() {
            return Err(Error::Config("augmentation family is empty".into()));
        }
        for t in &self.family {
            match *t {
                Augmentation::Jitter { sigma } | Augmentation::Scaling { sigma } => {
                    if sigma <= 0.0 {
                        return Err(Error::Config(format!("augmentation sigma must be > 0, got {sigma}")));
                    }
                }
                Augmentation::SegmentPermute { parts } => {
                    if parts < 2 {
                        return Err(Error::Config(format!("segment-permute needs parts >= 2, got {parts}")));
                    }
                }
                Augmentation::TimeShift { max_frac } => {
                    if !(max_frac > 0.0 && max_frac < 0.5) {
                        return Err(Error::Config(format!(
                            "time-shift max_frac must be in (0, 0.5), got {max_frac}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Apply one randomly selected transform (or the whole family when
/// composing). The input must have at least 4 points.
pub fn augment(x: &[f64], spec: &AugmentationSpec, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if spec.family.is_empty() {
        return Err(Error::Config("augmentation family is empty".into()));
    }
    if x.len() < 4 {
        return Err(Error::Config(format!(
            "augment needs series length >= 4, got {}",
            x.len()
        )));
    }
    if spec.compose {
        let mut out = x.to_vec();
        for t in &spec.family {
            out = apply(&out, *t, rng);
        }
        Ok(out)
    } else {
        let pick = rng.gen_range(0..spec.family.len());
        Ok(apply(x, spec.family[pick], rng))
    }
}

fn apply(x: &[f64], t: Augmentation, rng: &mut impl Rng) -> Vec<f64> {
    match t {
        Augmentation::Jitter { sigma } => jitter(x, sigma, rng),
        Augmentation::Scaling { sigma } => scaling(x, sigma, rng),
        Augmentation::SegmentPermute { parts } => segment_permute(x, parts, rng),
        Augmentation::TimeShift { max_frac } => time_shift(x, max_frac, rng),
    }
}

pub fn jitter(x: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("non-negative sigma");
    x.iter().map(|v| v + noise.sample(rng)).collect()
}

pub fn scaling(x: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("non-negative sigma");
    let factor = noise.sample(rng).exp();
    x.iter().map(|v| v * factor).collect()
}

pub fn segment_permute(x: &[f64], parts: usize, rng: &mut impl Rng) -> Vec<f64> {
    let m = x.len();
    let parts = parts.clamp(2, m);
    // Segment boundaries as even as possible.
    let base = m / parts;
    let extra = m % parts;
    let mut segments: Vec<&[f64]> = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        segments.push(&x[start..start + len]);
        start += len;
    }
    segments.shuffle(rng);
    segments.concat()
}

pub fn time_shift(x: &[f64], max_frac: f64, rng: &mut impl Rng) -> Vec<f64> {
    let m = x.len();
    let max_shift = ((m as f64) * max_frac).floor() as i64;
    let shift = rng.gen_range(-max_shift..=max_shift);
    let shift = shift.rem_euclid(m as i64) as usize;
    let mut out = Vec::with_capacity(m);
    out.extend_from_slice(&x[m - shift..]);
    out.extend_from_slice(&x[..m - shift]);
    out
}
