use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::likelihood::Forward;
use super::params::ModelParams;
use crate::error::Result;
use crate::linalg::{Lu, Mat};
use crate::model::{Query, Summary, Video};

/// Segments up to this size are solved by enumerating every subset.
pub const EXACT_LIMIT: usize = 12;

/// Chosen shots per segment.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub per_segment: Vec<Vec<usize>>,
}

impl Selection {
    pub fn shots(&self) -> Vec<usize> {
        self.per_segment.iter().flatten().copied().collect()
    }

    pub fn to_summary(&self, video: &str) -> Summary {
        Summary::new(video, self.shots())
    }
}

/// Kernel over the candidates conditioned on the `prev` positions (Schur
/// complement). Its principal minors equal `det(L_{y ∪ prev}) / det(L_prev)`.
/// `None` when `L_prev` is singular.
fn conditioned(l: &Mat, prev: &[usize], cand: &[usize]) -> Option<Mat> {
    let l_cc = l.principal(cand);
    if prev.is_empty() {
        return Some(l_cc);
    }
    let lu = Lu::new(&l.principal(prev));
    if lu.is_singular() || lu.logdet().0 <= 0.0 {
        return None;
    }
    let mut out = l_cc;
    // X = L_prev⁻¹ L_{prev,c}, column by column
    let cols: Vec<Vec<f64>> = cand
        .iter()
        .map(|&c| lu.solve(&prev.iter().map(|&p| l[(p, c)]).collect::<Vec<_>>()))
        .collect::<Option<_>>()?;
    for (a, &ca) in cand.iter().enumerate() {
        for (b, col) in cols.iter().enumerate() {
            let s: f64 = prev.iter().zip(col).map(|(&p, x)| l[(ca, p)] * x).sum();
            out[(a, b)] -= s;
        }
    }
    Some(out)
}

fn log_minor(m: &Mat, idx: &[usize]) -> f64 {
    let (sign, value) = Lu::new(&m.principal(idx)).logdet();
    if sign > 0.0 {
        value
    } else {
        f64::NEG_INFINITY
    }
}

/// Larger score first, then smaller set, then lexicographic.
fn prefer(a: (f64, &[usize]), b: (f64, &[usize])) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.len().cmp(&b.1.len()))
        .then(a.1.cmp(b.1))
}

/// Scores subsets of positions `0..m` of the candidate set.
struct Scorer {
    cond: Option<Mat>,
    l: Mat,
    prev: Vec<usize>,
    cand: Vec<usize>,
}

impl Scorer {
    fn new(k: &Kernel, y_prev: &[usize], candidates: &[usize]) -> Result<Self> {
        let prev = k.positions(y_prev)?;
        let cand = k.positions(candidates)?;
        Ok(Self {
            cond: conditioned(&k.l, &prev, &cand),
            l: k.l.clone(),
            prev,
            cand,
        })
    }

    fn score(&self, subset: &[usize]) -> f64 {
        match &self.cond {
            Some(c) => log_minor(c, subset),
            None => {
                let mut idx = self.prev.clone();
                idx.extend(subset.iter().map(|&i| self.cand[i]));
                log_minor(&self.l, &idx)
            }
        }
    }
}

/// Subset of `candidates` maximizing `det(L_{y ∪ y_prev})`, by enumeration.
pub fn exact_map_subset(k: &Kernel, y_prev: &[usize], candidates: &[usize]) -> Result<Vec<usize>> {
    let scorer = Scorer::new(k, y_prev, candidates)?;
    let m = candidates.len();
    let mut best: (f64, Vec<usize>) = (scorer.score(&[]), Vec::new());
    for mask in 1u64..1 << m {
        let subset: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let value = scorer.score(&subset);
        if prefer((value, &subset), (best.0, &best.1)) == Ordering::Less {
            best = (value, subset);
        }
    }
    Ok(best.1.into_iter().map(|i| candidates[i]).collect())
}

/// Greedy ascent: add the candidate that most increases the determinant,
/// stop once none does.
pub fn greedy_map_subset(k: &Kernel, y_prev: &[usize], candidates: &[usize]) -> Result<Vec<usize>> {
    let scorer = Scorer::new(k, y_prev, candidates)?;
    let mut chosen: Vec<usize> = Vec::new();
    let mut current = scorer.score(&chosen);
    loop {
        let mut best: Option<(f64, usize)> = None;
        for i in (0..candidates.len()).filter(|i| !chosen.contains(i)) {
            let mut trial = chosen.clone();
            trial.push(i);
            trial.sort_unstable();
            let value = scorer.score(&trial);
            if best.is_none_or(|(b, _)| value > b) {
                best = Some((value, i));
            }
        }
        match best {
            Some((value, i)) if value > current => {
                chosen.push(i);
                chosen.sort_unstable();
                current = value;
            }
            _ => break,
        }
    }
    Ok(chosen.into_iter().map(|i| candidates[i]).collect())
}

/// Exact for up to [`EXACT_LIMIT`] candidates, greedy beyond.
pub fn map_subset(k: &Kernel, y_prev: &[usize], candidates: &[usize]) -> Result<Vec<usize>> {
    if candidates.len() <= EXACT_LIMIT {
        exact_map_subset(k, y_prev, candidates)
    } else {
        greedy_map_subset(k, y_prev, candidates)
    }
}

/// Sequential MAP summary of `v` for query `q`.
pub fn summarize(p: &ModelParams, v: &Video, q: &Query) -> Result<Selection> {
    let fwd = Forward::new(p, v, q)?;
    let mut prev: Vec<usize> = Vec::new();
    let mut per_segment = Vec::new();
    for seg in v.segments() {
        let cand: Vec<usize> = seg.clone().collect();
        let ground: Vec<usize> = prev.iter().copied().chain(seg).collect();
        let k = fwd.kernel(p, ground)?;
        let y_t = map_subset(&k, &prev, &cand)?;
        per_segment.push(y_t.clone());
        prev = y_t;
    }
    Ok(Selection { per_segment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::det;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_kernel(rng: &mut ChaCha8Rng, n: usize, rank: usize, lambda: f64) -> Kernel {
        let z: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..rank).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let refs: Vec<&[f64]> = z.iter().map(Vec::as_slice).collect();
        Kernel::from_embeddings(&refs, (0..n).collect(), lambda).unwrap()
    }

    #[test]
    fn jitter_only_kernel_selects_nothing() {
        let k = Kernel::new(
            Mat::from_fn(4, 4, |i, j| if i == j { 1e-6 } else { 0.0 }),
            vec![0, 1, 2, 3],
        )
        .unwrap();
        assert!(exact_map_subset(&k, &[], &[0, 1, 2, 3]).unwrap().is_empty());
        assert!(greedy_map_subset(&k, &[], &[0, 1, 2, 3]).unwrap().is_empty());
    }

    #[test]
    fn unit_identity_ties_break_to_empty() {
        let k = Kernel::new(Mat::identity(3), vec![0, 1, 2]).unwrap();
        assert!(exact_map_subset(&k, &[], &[0, 1, 2]).unwrap().is_empty());
    }

    #[test]
    fn dominant_orthogonal_shots_are_selected() {
        // shots 1 and 3 have norm 3 along orthogonal axes, the rest are tiny
        let z = [
            vec![0.01, 0.0, 0.0],
            vec![3.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.02],
            vec![0.0, 3.0, 0.0],
        ];
        let refs: Vec<&[f64]> = z.iter().map(Vec::as_slice).collect();
        let k = Kernel::from_embeddings(&refs, vec![0, 1, 2, 3], 1e-6).unwrap();
        assert_eq!(exact_map_subset(&k, &[], &[0, 1, 2, 3]).unwrap(), vec![1, 3]);
        assert_eq!(greedy_map_subset(&k, &[], &[0, 1, 2, 3]).unwrap(), vec![1, 3]);
    }

    #[test]
    fn exact_matches_direct_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let n_prev = rng.random_range(0..4);
            let m = rng.random_range(1..=8);
            let rank = rng.random_range(2..8);
            let k = random_kernel(&mut rng, n_prev + m, rank, 1e-3);
            let prev: Vec<usize> = (0..n_prev).collect();
            let cand: Vec<usize> = (n_prev..n_prev + m).collect();
            let got = exact_map_subset(&k, &prev, &cand).unwrap();

            let mut best = (f64::MIN, Vec::new());
            for mask in 0u32..1 << m {
                let y: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| cand[i]).collect();
                let idx: Vec<usize> = prev.iter().chain(&y).copied().collect();
                let d = det(&k.l.principal(&idx));
                if d > best.0 {
                    best = (d, y);
                }
            }
            assert_eq!(got, best.1);
        }
    }

    #[test]
    fn greedy_never_beats_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..40 {
            let m = rng.random_range(1..=8);
            let k = random_kernel(&mut rng, m + 2, 4, 1e-2);
            let cand: Vec<usize> = (2..m + 2).collect();
            let value = |y: &[usize]| {
                let idx: Vec<usize> = [0, 1].iter().chain(y).copied().collect();
                det(&k.l.principal(&idx))
            };
            let exact = exact_map_subset(&k, &[0, 1], &cand).unwrap();
            let greedy = greedy_map_subset(&k, &[0, 1], &cand).unwrap();
            assert!(value(&greedy) <= value(&exact) * (1.0 + 1e-12));
        }
    }
}
