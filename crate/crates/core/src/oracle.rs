//! Oracle summaries: greedy aggregation of several reference summaries into
//! the one with the highest summed F1 agreement.
//!
//! The greedy starts from the shots every reference shares and repeatedly adds
//! the candidate with the largest marginal gain
//! `G(i) = Σ_u F1(y ∪ {i}, y_u) − Σ_u F1(y, y_u)`, stopping once no candidate
//! has a positive gain.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{evaluate, MatchMode};
use crate::model::{Summary, Video};

/// Where the greedy draws candidate shots from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidatePool {
    /// Shots chosen by at least one reference.
    #[default]
    Union,
    /// Every shot of the video.
    All,
}

impl FromStr for CandidatePool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(CandidatePool::Union),
            "all" => Ok(CandidatePool::All),
            other => Err(Error::InvalidArgument(format!("unknown candidate pool '{other}'"))),
        }
    }
}

impl fmt::Display for CandidatePool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidatePool::Union => "union",
            CandidatePool::All => "all",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleStep {
    pub shot: usize,
    pub gain: f64,
    /// Mean F1 against the references after adding `shot`.
    pub mean_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleTrace {
    pub video: String,
    pub initial: Vec<usize>,
    pub initial_mean_f1: f64,
    pub steps: Vec<OracleStep>,
    #[serde(rename = "final")]
    pub final_shots: Vec<usize>,
}

fn check_same_video(refs: &[&Summary]) -> Result<()> {
    let first = refs
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one reference summary is required".into()))?;
    if let Some(other) = refs.iter().find(|r| r.video != first.video) {
        return Err(Error::VideoMismatch {
            expected: first.video.clone(),
            actual: other.video.clone(),
        });
    }
    Ok(())
}

/// Shots shared by every reference.
pub fn common_shots(refs: &[&Summary]) -> Result<Summary> {
    check_same_video(refs)?;
    let first = refs[0];
    let shared = first
        .shots()
        .iter()
        .copied()
        .filter(|&s| refs[1..].iter().all(|r| r.contains(s)));
    Ok(first.with_shots(shared))
}

fn summed_f1(candidate: &Summary, refs: &[&Summary], video: &Video) -> Result<f64> {
    refs.iter()
        .map(|r| evaluate(candidate, r, video, MatchMode::Count).map(|e| e.f1))
        .sum()
}

/// `G(i)` for adding `shot` to `current`. Negative when the shot hurts.
pub fn marginal_gain(current: &Summary, shot: usize, refs: &[&Summary], video: &Video) -> Result<f64> {
    check_same_video(refs)?;
    if current.contains(shot) {
        return Err(Error::InvalidArgument(format!("shot {shot} is already in the summary")));
    }
    let grown = current.with_shots(current.shots().iter().copied().chain([shot]));
    Ok(summed_f1(&grown, refs, video)? - summed_f1(current, refs, video)?)
}

/// Greedy oracle summary of `refs` on `video`.
pub fn build_oracle(
    refs: &[&Summary],
    video: &Video,
    pool: CandidatePool,
) -> Result<(Summary, OracleTrace)> {
    let seed = common_shots(refs)?;
    for r in refs {
        r.check_against(video)?;
    }
    let n_refs = refs.len() as f64;

    let mut candidates: Vec<usize> = match pool {
        CandidatePool::Union => {
            let mut all: Vec<usize> = refs.iter().flat_map(|r| r.shots().iter().copied()).collect();
            all.sort_unstable();
            all.dedup();
            all
        }
        CandidatePool::All => (0..video.len()).collect(),
    };
    candidates.retain(|&s| !seed.contains(s));

    let mut current = seed.clone();
    let mut current_sum = summed_f1(&current, refs, video)?;
    let initial_mean_f1 = current_sum / n_refs;
    let mut steps = Vec::new();

    while !candidates.is_empty() {
        let scored: Vec<(usize, f64)> = candidates
            .par_iter()
            .map(|&shot| {
                let grown = current.with_shots(current.shots().iter().copied().chain([shot]));
                summed_f1(&grown, refs, video).map(|s| (shot, s))
            })
            .collect::<Result<_>>()?;

        // candidates are ascending, so the first maximum has the smallest index
        let mut best: Option<(usize, usize, f64)> = None;
        for (pos, &(shot, sum)) in scored.iter().enumerate() {
            if best.is_none_or(|(_, _, b)| sum > b) {
                best = Some((pos, shot, sum));
            }
        }
        let Some((pos, shot, sum)) = best else { break };
        let gain = sum - current_sum;
        if gain <= 0.0 {
            break;
        }
        current = current.with_shots(current.shots().iter().copied().chain([shot]));
        current_sum = sum;
        candidates.remove(pos);
        steps.push(OracleStep {
            shot,
            gain,
            mean_f1: sum / n_refs,
        });
    }

    let mut oracle = current;
    oracle.user = Some("oracle".into());
    let trace = OracleTrace {
        video: video.id.clone(),
        initial: seed.shots().to_vec(),
        initial_mean_f1,
        steps,
        final_shots: oracle.shots().to_vec(),
    };
    Ok((oracle, trace))
}
