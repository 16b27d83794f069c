//! Metric behaviour under controlled corruption of a reference summary.
//!
//! A perturbation with a given seed shuffles the summary (and the replacement
//! pool) once and then edits a prefix, so perturbations of one trial at
//! increasing fractions are nested.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{evaluate, MatchMode};
use crate::model::{Summary, Video};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    Delete,
    Replace,
}

impl FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delete" => Ok(PerturbMode::Delete),
            "replace" => Ok(PerturbMode::Replace),
            other => Err(Error::InvalidArgument(format!("unknown perturbation mode '{other}'"))),
        }
    }
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbMode::Delete => "delete",
            PerturbMode::Replace => "replace",
        })
    }
}

/// Where replacement shots come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplacePool {
    /// Any shot of the same video.
    #[default]
    Video,
    /// Shots some user picked for the same query.
    Users,
}

impl FromStr for ReplacePool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "video" => Ok(ReplacePool::Video),
            "users" => Ok(ReplacePool::Users),
            other => Err(Error::InvalidArgument(format!("unknown replacement pool '{other}'"))),
        }
    }
}

/// `round(fraction · n)`, halves away from zero.
pub fn perturbed_count(fraction: f64, n: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("fraction must lie in [0, 1], got {fraction}")));
    }
    Ok((fraction * n as f64).round() as usize)
}

fn shuffled(items: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v = items.to_vec();
    v.shuffle(rng);
    v
}

/// Removes `round(fraction · |s|)` uniformly chosen shots.
pub fn perturb_delete(s: &Summary, fraction: f64, seed: u64) -> Result<Summary> {
    let k = perturbed_count(fraction, s.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = shuffled(s.shots(), &mut rng);
    Ok(s.with_shots(order[k..].iter().copied()))
}

/// Swaps `round(fraction · |s|)` uniformly chosen shots for uniform draws
/// from `pool ∖ s`.
pub fn perturb_replace(s: &Summary, fraction: f64, pool: &[usize], seed: u64) -> Result<Summary> {
    let k = perturbed_count(fraction, s.len())?;
    let mut candidates: Vec<usize> = pool.iter().copied().filter(|&p| !s.contains(p)).collect();
    candidates.sort_unstable();
    candidates.dedup();
    if candidates.len() < k {
        return Err(Error::InsufficientPool(format!(
            "replacing {k} shots needs {k} outside the summary, pool has {}",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = shuffled(s.shots(), &mut rng);
    let fresh = shuffled(&candidates, &mut rng);
    Ok(s.with_shots(order[k..].iter().chain(&fresh[..k]).copied()))
}

/// One row of the perturbation curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub fraction: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub trials: usize,
}

/// A reference summary, its video and its replacement pool.
#[derive(Clone, Debug)]
pub struct CurveInput<'a> {
    pub video: &'a Video,
    pub reference: &'a Summary,
    pub pool: Vec<usize>,
}

impl<'a> CurveInput<'a> {
    /// Pool of every shot of the video.
    pub fn whole_video(video: &'a Video, reference: &'a Summary) -> Self {
        Self {
            video,
            reference,
            pool: (0..video.len()).collect(),
        }
    }
}

/// Seed of trial `trial` on reference `index`; shared across fractions.
pub fn trial_seed(seed: u64, index: usize, trial: usize) -> u64 {
    let mut x = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (trial as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mean P / R / F1 of perturbed summaries against their originals, per
/// fraction, over `trials` trials of every input.
pub fn curve_experiment(
    inputs: &[CurveInput<'_>],
    fractions: &[f64],
    trials: usize,
    mode: PerturbMode,
    seed: u64,
) -> Result<Vec<CurveRow>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no reference summaries to perturb".into()));
    }
    fractions
        .iter()
        .map(|&fraction| {
            let jobs: Vec<(usize, usize)> = (0..inputs.len()).flat_map(|i| (0..trials).map(move |t| (i, t))).collect();
            let scores: Vec<(f64, f64, f64)> = jobs
                .par_iter()
                .map(|&(i, t)| {
                    let input = &inputs[i];
                    let s = trial_seed(seed, i, t);
                    let perturbed = match mode {
                        PerturbMode::Delete => perturb_delete(input.reference, fraction, s)?,
                        PerturbMode::Replace => perturb_replace(input.reference, fraction, &input.pool, s)?,
                    };
                    let r = evaluate(&perturbed, input.reference, input.video, MatchMode::Count)?;
                    Ok((r.precision, r.recall, r.f1))
                })
                .collect::<Result<_>>()?;
            let n = scores.len() as f64;
            Ok(CurveRow {
                fraction,
                mean_precision: scores.iter().map(|s| s.0).sum::<f64>() / n,
                mean_recall: scores.iter().map(|s| s.1).sum::<f64>() / n,
                mean_f1: scores.iter().map(|s| s.2).sum::<f64>() / n,
                trials,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Shot;

    fn video(n: usize) -> Video {
        Video::new("v", (0..n).map(|i| Shot::tagged([i])).collect(), 10)
    }

    #[test]
    fn zero_fraction_is_identity() {
        let s = Summary::new("v", [1, 4, 7]);
        assert_eq!(perturb_delete(&s, 0.0, 3).unwrap(), s);
        assert_eq!(perturb_replace(&s, 0.0, &[0, 2], 3).unwrap(), s);
    }

    #[test]
    fn half_deletion_halves_recall() {
        let v = video(20);
        let s = Summary::new("v", 0..10);
        for seed in 0..20 {
            let p = perturb_delete(&s, 0.5, seed).unwrap();
            assert_eq!(p.len(), 5);
            let r = evaluate(&p, &s, &v, MatchMode::Count).unwrap();
            assert_eq!(r.recall, 0.5);
            assert_eq!(r.precision, 1.0);
        }
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(perturbed_count(0.5, 5).unwrap(), 3);
        assert_eq!(perturbed_count(0.5, 3).unwrap(), 2);
        assert_eq!(perturbed_count(0.25, 2).unwrap(), 1);
        assert_eq!(perturbed_count(0.1, 4).unwrap(), 0);
        assert!(perturbed_count(1.5, 4).is_err());
    }

    #[test]
    fn identically_tagged_replacements_keep_f1() {
        let v = Video::new("v", (0..12).map(|_| Shot::tagged([3, 5])).collect(), 6);
        let s = Summary::new("v", [0, 1, 2, 3]);
        let p = perturb_replace(&s, 0.5, &(0..12).collect::<Vec<_>>(), 9).unwrap();
        assert_ne!(p, s);
        assert_eq!(evaluate(&p, &s, &v, MatchMode::Count).unwrap().f1, 1.0);
    }

    #[test]
    fn replace_needs_enough_pool() {
        let s = Summary::new("v", [0, 1, 2, 3]);
        let err = perturb_replace(&s, 1.0, &[0, 1, 9], 0).unwrap_err();
        assert_eq!(err.kind(), "insufficient_pool");
    }

    #[test]
    fn nested_across_fractions() {
        let s = Summary::new("v", 0..10);
        let small = perturb_delete(&s, 0.2, 5).unwrap();
        let large = perturb_delete(&s, 0.6, 5).unwrap();
        assert!(large.shots().iter().all(|&x| small.contains(x)));
    }

    #[test]
    fn zero_fraction_curve_is_perfect() {
        let v = video(30);
        let s = Summary::new("v", [2, 5, 9]);
        let rows = curve_experiment(&[CurveInput::whole_video(&v, &s)], &[0.0], 4, PerturbMode::Replace, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].mean_precision, rows[0].mean_recall, rows[0].mean_f1), (1.0, 1.0, 1.0));
    }
}
