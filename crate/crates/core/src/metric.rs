//! Semantic evaluation of a summary against reference summaries.
//!
//! Two shots are compared by the intersection-over-union of their concept
//! tags. Two summaries are aligned by an exact maximum-weight bipartite
//! matching over those IOU weights, and the matched quantity drives
//! precision, recall and F1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{SemanticVector, Summary, Video};

/// IOU of two tag sets. Two empty sets score 0.
pub fn iou(a: &SemanticVector, b: &SemanticVector) -> f64 {
    let union = a.union_len(b);
    if union == 0 {
        return 0.0;
    }
    a.intersection_len(b) as f64 / union as f64
}

/// What the matched quantity `m` in `P = m/|sys|`, `R = m/|ref|` counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Number of matched pairs with strictly positive IOU.
    #[default]
    Count,
    /// Sum of matched IOU weights.
    Weight,
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Count => "count",
            MatchMode::Weight => "weight",
        })
    }
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(MatchMode::Count),
            "weight" => Ok(MatchMode::Weight),
            other => Err(Error::InvalidArgument(format!("unknown match mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub system: usize,
    pub reference: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mode: MatchMode,
    /// Shot-index pairs of the optimal matching (positive weight only).
    #[serde(skip)]
    pub matched_pairs: Vec<MatchedPair>,
    #[serde(skip)]
    pub matching_weight: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// IOU weights between the shots of `sys` (rows) and `reference` (columns).
pub fn similarity_matrix(sys: &Summary, reference: &Summary, video: &Video) -> Result<Mat> {
    sys.check_against(video)?;
    reference.check_against(video)?;
    Ok(Mat::from_fn(sys.len(), reference.len(), |i, j| {
        iou(
            &video.shots[sys.shots()[i]].tags,
            &video.shots[reference.shots()[j]].tags,
        )
    }))
}

/// Optimal matching as `(row, col, weight)` triples plus its total weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize, f64)>,
    pub weight: f64,
}

/// Exact maximum-weight bipartite matching on a non-negative rectangular
/// matrix. The matrix is padded to square with zeros and solved as a
/// minimum-cost assignment with the O(n³) shortest augmenting path method.
///
/// Among maximum-weight matchings, one with the most positive-weight pairs is
/// returned, so the pair count is a function of the matrix alone. Zero-weight
/// pairs are dropped from the result.
pub fn max_weight_matching(w: &Mat) -> Result<Matching> {
    if let Some(bad) = w.as_slice().iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "matching weights must be finite and non-negative, found {bad}"
        )));
    }
    let (r, c) = w.shape();
    let n = r.max(c);
    if r == 0 || c == 0 {
        return Ok(Matching {
            pairs: Vec::new(),
            weight: 0.0,
        });
    }
    let weight_at = |i: usize, j: usize| if i < r && j < c { w[(i, j)] } else { 0.0 };
    let first = min_cost_assignment(n, |i, j| -weight_at(i, j));
    let positive = |a: &[usize]| (0..r).filter(|&i| weight_at(i, a[i]) > 0.0).count();

    let assignment = if positive(&first.assignment) == r.min(c) {
        first.assignment
    } else {
        // Edges tight under the optimal duals are exactly those usable by some
        // maximum-weight matching; maximize the positive pairs among them.
        let tight = |i: usize, j: usize| {
            let reduced = -weight_at(i, j) - first.row_potential[i] - first.col_potential[j];
            reduced.abs() <= TIGHT_TOLERANCE
        };
        let penalty = (n + 1) as f64;
        let second = min_cost_assignment(n, |i, j| match (tight(i, j), weight_at(i, j) > 0.0) {
            (false, _) => penalty,
            (true, true) => -1.0,
            (true, false) => 0.0,
        });
        second.assignment
    };

    let mut pairs = Vec::new();
    let mut weight = 0.0;
    for (i, &j) in assignment.iter().enumerate().take(r) {
        if j < c && w[(i, j)] > 0.0 {
            pairs.push((i, j, w[(i, j)]));
            weight += w[(i, j)];
        }
    }
    Ok(Matching { pairs, weight })
}

const TIGHT_TOLERANCE: f64 = 1e-9;

struct Assignment {
    /// Column assigned to each row.
    assignment: Vec<usize>,
    row_potential: Vec<f64>,
    col_potential: Vec<f64>,
}

/// Shortest augmenting path assignment on an `n × n` cost function. The
/// returned potentials satisfy `cost(i, j) − u_i − v_j ≥ 0` with equality on
/// the assignment.
fn min_cost_assignment(n: usize, cost: impl Fn(usize, usize) -> f64) -> Assignment {
    // 1-based potentials; index 0 is the virtual source column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    Assignment {
        assignment,
        row_potential: u[1..].to_vec(),
        col_potential: v[1..].to_vec(),
    }
}

/// Precision, recall and F1 of `sys` against a single reference summary.
pub fn evaluate(sys: &Summary, reference: &Summary, video: &Video, mode: MatchMode) -> Result<EvalReport> {
    let w = similarity_matrix(sys, reference, video)?;
    let matching = max_weight_matching(&w)?;
    let matched = match mode {
        MatchMode::Count => matching.pairs.len() as f64,
        MatchMode::Weight => matching.weight,
    };
    let (precision, recall) = if sys.is_empty() || reference.is_empty() {
        (0.0, 0.0)
    } else {
        (matched / sys.len() as f64, matched / reference.len() as f64)
    };
    let matched_pairs = matching
        .pairs
        .iter()
        .map(|&(i, j, weight)| MatchedPair {
            system: sys.shots()[i],
            reference: reference.shots()[j],
            weight,
        })
        .collect();
    Ok(EvalReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        mode,
        matched_pairs,
        matching_weight: matching.weight,
    })
}

/// Mean of the per-reference precision, recall and F1.
pub fn evaluate_multi<'a, I>(sys: &Summary, refs: I, video: &Video, mode: MatchMode) -> Result<EvalReport>
where
    I: IntoIterator<Item = &'a Summary>,
{
    let (mut p, mut r, mut f, mut w, mut n) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for reference in refs {
        let report = evaluate(sys, reference, video, mode)?;
        p += report.precision;
        r += report.recall;
        f += report.f1;
        w += report.matching_weight;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument("evaluate_multi needs at least one reference".into()));
    }
    let n = n as f64;
    Ok(EvalReport {
        precision: p / n,
        recall: r / n,
        f1: f / n,
        mode,
        matched_pairs: Vec::new(),
        matching_weight: w / n,
    })
}
