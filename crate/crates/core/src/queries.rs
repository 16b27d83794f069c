//! Concept-pair queries built from per-shot tag statistics.
//!
//! A concept is *present* in a video when it is tagged in at least
//! `t_presence` shots. Every concept pair falls in exactly one scenario:
//!
//! | scenario | predicate                                        |
//! |----------|--------------------------------------------------|
//! | i        | both present, tagged together in some shot       |
//! | ii       | both present, never tagged together              |
//! | iii      | exactly one present                              |
//! | iv       | neither present                                  |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Query, Scenario, Video};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConceptStats {
    n_concepts: usize,
    frequency: Vec<usize>,
    /// Row-major `n × n` joint shot counts; the diagonal is the frequency.
    cooccurrence: Vec<usize>,
    t_presence: usize,
}

impl ConceptStats {
    pub fn n_concepts(&self) -> usize {
        self.n_concepts
    }

    pub fn frequency(&self, c: usize) -> usize {
        self.frequency[c]
    }

    pub fn cooccurrence(&self, a: usize, b: usize) -> usize {
        self.cooccurrence[a * self.n_concepts + b]
    }

    pub fn t_presence(&self) -> usize {
        self.t_presence
    }

    pub fn is_present(&self, c: usize) -> bool {
        self.frequency[c] >= self.t_presence
    }

    pub fn scenario_of(&self, a: usize, b: usize) -> Scenario {
        match (self.is_present(a), self.is_present(b)) {
            (true, true) if self.cooccurrence(a, b) > 0 => Scenario::I,
            (true, true) => Scenario::II,
            (true, false) | (false, true) => Scenario::III,
            (false, false) => Scenario::IV,
        }
    }
}

/// Exact concept frequencies and pairwise joint counts over all shots.
pub fn compute_stats(video: &Video, n_concepts: usize, t_presence: usize) -> Result<ConceptStats> {
    if t_presence == 0 {
        return Err(Error::InvalidArgument("t_presence must be >= 1".into()));
    }
    let mut frequency = vec![0; n_concepts];
    let mut cooccurrence = vec![0; n_concepts * n_concepts];
    for (i, shot) in video.shots.iter().enumerate() {
        let tags = shot.tags.as_slice();
        if let Some(&c) = tags.iter().find(|&&c| c >= n_concepts) {
            return Err(Error::validation(
                format!("video '{}' shot {i}", video.id),
                format!("concept index {c} out of range ({n_concepts})"),
            ));
        }
        for &a in tags {
            frequency[a] += 1;
            for &b in tags {
                cooccurrence[a * n_concepts + b] += 1;
            }
        }
    }
    Ok(ConceptStats {
        n_concepts,
        frequency,
        cooccurrence,
        t_presence,
    })
}

/// `f1·f2 / (f1 + f2)`, used to rank present-but-never-joint pairs.
pub fn harmonic_score(f1: usize, f2: usize) -> Result<f64> {
    if f1 == 0 && f2 == 0 {
        return Err(Error::InvalidArgument("harmonic score of two zero frequencies".into()));
    }
    let (a, b) = (f1 as f64, f2 as f64);
    Ok(a * b / (a + b))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedPair {
    /// `(low, high)` concept indices; for scenario iii the present concept
    /// may be either one.
    pub pair: (usize, usize),
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScenarioPools {
    /// Weighted by joint shot count, descending.
    pub joint: Vec<WeightedPair>,
    /// Weighted by harmonic score, descending.
    pub disjoint: Vec<WeightedPair>,
    /// Weighted by the present concept's frequency, descending.
    pub one_present: Vec<WeightedPair>,
    /// Pairs of absent concepts, uniform weight.
    pub absent: Vec<WeightedPair>,
}

impl ScenarioPools {
    pub fn get(&self, scenario: Scenario) -> &[WeightedPair] {
        match scenario {
            Scenario::I => &self.joint,
            Scenario::II => &self.disjoint,
            Scenario::III => &self.one_present,
            Scenario::IV => &self.absent,
        }
    }
}

fn sort_descending(pool: &mut [WeightedPair]) {
    // stable: equal weights keep lexicographic pair order
    pool.sort_by(|a, b| b.weight.total_cmp(&a.weight));
}

/// Candidate pairs for each scenario. The scenario-iii pool is complete here;
/// the exclusion of concepts already used by scenarios i and ii is applied
/// during selection in [`build_queries`].
pub fn scenario_pools(stats: &ConceptStats) -> ScenarioPools {
    let mut pools = ScenarioPools::default();
    let n = stats.n_concepts;
    for a in 0..n {
        for b in a + 1..n {
            let pair = (a, b);
            match stats.scenario_of(a, b) {
                Scenario::I => pools.joint.push(WeightedPair {
                    pair,
                    weight: stats.cooccurrence(a, b) as f64,
                }),
                Scenario::II => pools.disjoint.push(WeightedPair {
                    pair,
                    weight: harmonic_score(stats.frequency(a), stats.frequency(b))
                        .expect("present concepts have positive frequency"),
                }),
                Scenario::III => {
                    let present = if stats.is_present(a) { a } else { b };
                    pools.one_present.push(WeightedPair {
                        pair,
                        weight: stats.frequency(present) as f64,
                    })
                }
                Scenario::IV => pools.absent.push(WeightedPair { pair, weight: 1.0 }),
            }
        }
    }
    sort_descending(&mut pools.joint);
    sort_descending(&mut pools.disjoint);
    sort_descending(&mut pools.one_present);
    pools
}

/// Requested number of queries per scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioCounts(pub [usize; 4]);

impl Default for ScenarioCounts {
    fn default() -> Self {
        ScenarioCounts([15, 15, 15, 1])
    }
}

impl ScenarioCounts {
    pub fn get(&self, scenario: Scenario) -> usize {
        self.0[scenario.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl std::str::FromStr for ScenarioCounts {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("bad scenario counts '{s}': {e}")))?;
        let counts: [usize; 4] = parts
            .try_into()
            .map_err(|_| Error::InvalidArgument(format!("expected four counts, got '{s}'")))?;
        Ok(ScenarioCounts(counts))
    }
}

/// Draws `count` items without replacement, each draw proportional to the
/// remaining weights.
fn weighted_sample<R: Rng>(rng: &mut R, mut pool: Vec<WeightedPair>, count: usize) -> Vec<WeightedPair> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count && !pool.is_empty() {
        let total: f64 = pool.iter().map(|p| p.weight).sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = pool.len() - 1;
        for (i, p) in pool.iter().enumerate() {
            acc += p.weight;
            if target < acc {
                chosen = i;
                break;
            }
        }
        out.push(pool.remove(chosen));
    }
    out
}

/// Scenario-labelled queries for one video, deterministic given `seed`.
///
/// Query ids are `"{video}-q{n}"` numbered from `first_id`.
pub fn build_queries(
    video: &Video,
    n_concepts: usize,
    counts: ScenarioCounts,
    t_presence: usize,
    seed: u64,
) -> Result<Vec<Query>> {
    build_queries_numbered(video, n_concepts, counts, t_presence, seed, 0)
}

pub fn build_queries_numbered(
    video: &Video,
    n_concepts: usize,
    counts: ScenarioCounts,
    t_presence: usize,
    seed: u64,
    first_id: usize,
) -> Result<Vec<Query>> {
    let stats = compute_stats(video, n_concepts, t_presence)?;
    let pools = scenario_pools(&stats);

    let shortfalls: Vec<String> = Scenario::ALL
        .iter()
        .filter(|&&s| pools.get(s).len() < counts.get(s))
        .map(|&s| format!("scenario {s}: requested {}, available {}", counts.get(s), pools.get(s).len()))
        .collect();
    if !shortfalls.is_empty() {
        return Err(Error::InsufficientPool(format!(
            "video '{}': {}",
            video.id,
            shortfalls.join("; ")
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<(Scenario, (usize, usize))> = Vec::with_capacity(counts.total());

    for scenario in [Scenario::I, Scenario::II] {
        for p in weighted_sample(&mut rng, pools.get(scenario).to_vec(), counts.get(scenario)) {
            picked.push((scenario, p.pair));
        }
    }

    // Prefer scenario-iii pairs whose present concept no earlier query used;
    // fall back to the rest only when the fresh ones run out.
    let used: Vec<bool> = {
        let mut used = vec![false; n_concepts];
        for &(_, (a, b)) in &picked {
            used[a] = true;
            used[b] = true;
        }
        used
    };
    let present_of = |(a, b): (usize, usize)| if stats.is_present(a) { a } else { b };
    let (fresh, reused): (Vec<WeightedPair>, Vec<WeightedPair>) = pools
        .one_present
        .iter()
        .partition(|p| !used[present_of(p.pair)]);
    let want = counts.get(Scenario::III);
    let mut third = weighted_sample(&mut rng, fresh, want);
    let missing = want - third.len();
    third.extend(weighted_sample(&mut rng, reused, missing));
    picked.extend(third.into_iter().map(|p| (Scenario::III, p.pair)));

    for p in weighted_sample(&mut rng, pools.absent.clone(), counts.get(Scenario::IV)) {
        picked.push((Scenario::IV, p.pair));
    }

    Ok(picked
        .into_iter()
        .enumerate()
        .map(|(i, (scenario, (a, b)))| {
            Query::new(
                format!("{}-q{}", video.id, first_id + i),
                video.id.clone(),
                [a, b],
                Some(scenario),
            )
        })
        .collect())
}

/// Scenario of a concept-pair query on `video`.
pub fn classify_query(video: &Video, query: &Query, t_presence: usize) -> Result<Scenario> {
    let &[a, b] = query.concepts.as_slice() else {
        return Err(Error::InvalidArgument(format!(
            "query '{}' has {} concepts; classification needs a pair",
            query.id,
            query.concepts.len()
        )));
    };
    if t_presence == 0 {
        return Err(Error::InvalidArgument("t_presence must be >= 1".into()));
    }
    let (mut fa, mut fb, mut joint) = (0, 0, 0);
    for shot in &video.shots {
        let (ha, hb) = (shot.tags.contains(a), shot.tags.contains(b));
        fa += ha as usize;
        fb += hb as usize;
        joint += (ha && hb) as usize;
    }
    Ok(match (fa >= t_presence, fb >= t_presence) {
        (true, true) if joint > 0 => Scenario::I,
        (true, true) => Scenario::II,
        (true, false) | (false, true) => Scenario::III,
        (false, false) => Scenario::IV,
    })
}
