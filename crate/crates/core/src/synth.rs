//! Synthetic datasets with planted query relevance.
//!
//! Each video draws a few disjoint concept groups ("scenes") from the
//! dictionary. Shots follow a Markov chain over scenes and carry tags from
//! their scene, with tags persisting between consecutive shots. One salient
//! concept, shared by every video, is sprinkled over all scenes. Frame
//! features are noisy per-frame visibility indicators of the shot's tags.
//!
//! Simulated users keep a shot with probability `p_rel` when its tags meet
//! the query, and with probability `p_ctx` when it shows the salient concept.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConceptDictionary, Dataset, Query, SemanticVector, Shot, Summary, Video};
use crate::queries::{build_queries_numbered, ScenarioCounts};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dictionary_size: usize,
    pub videos: usize,
    pub segments_per_video: usize,
    pub shots_per_segment: usize,
    pub frames_per_shot: usize,
    /// Extra pure-noise feature dimensions after the concept dimensions.
    pub noise_dims: usize,
    /// Concept groups per video; shots draw their tags from one group.
    pub scene_groups: usize,
    pub group_size: usize,
    /// Probability that the next shot stays in the current scene.
    pub scene_persistence: f64,
    /// Probability that a tag carries over to the next shot of the scene.
    pub tag_persistence: f64,
    pub min_tags: usize,
    pub max_tags: usize,
    /// Probability that a shot also carries the salient concept.
    pub salient_rate: f64,
    /// Probability that a tagged concept shows in a given frame.
    pub visibility: f64,
    pub noise_sigma: f64,
    pub users: usize,
    pub p_rel: f64,
    pub p_ctx: f64,
    pub query_counts: ScenarioCounts,
    pub t_presence: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dictionary_size: 20,
            videos: 4,
            segments_per_video: 12,
            shots_per_segment: 10,
            frames_per_shot: 8,
            noise_dims: 6,
            scene_groups: 3,
            group_size: 4,
            scene_persistence: 0.85,
            tag_persistence: 0.7,
            min_tags: 1,
            max_tags: 5,
            salient_rate: 0.15,
            visibility: 0.6,
            noise_sigma: 0.1,
            users: 3,
            p_rel: 0.9,
            p_ctx: 0.2,
            query_counts: ScenarioCounts::default(),
            t_presence: 1,
            seed: 0,
        }
    }
}

const MAX_ATTEMPTS: usize = 50;

impl SynthConfig {
    pub fn feature_dim(&self) -> usize {
        self.dictionary_size + self.noise_dims
    }

    pub fn validate(&self) -> Result<()> {
        let probabilities = [
            ("scene_persistence", self.scene_persistence),
            ("tag_persistence", self.tag_persistence),
            ("salient_rate", self.salient_rate),
            ("visibility", self.visibility),
            ("p_rel", self.p_rel),
            ("p_ctx", self.p_ctx),
        ];
        for (name, p) in probabilities {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        let counts = [
            ("videos", self.videos),
            ("segments_per_video", self.segments_per_video),
            ("shots_per_segment", self.shots_per_segment),
            ("frames_per_shot", self.frames_per_shot),
            ("scene_groups", self.scene_groups),
            ("group_size", self.group_size),
            ("min_tags", self.min_tags),
            ("users", self.users),
            ("t_presence", self.t_presence),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if self.min_tags > self.max_tags {
            return Err(Error::InvalidArgument("min_tags exceeds max_tags".into()));
        }
        if 1 + self.scene_groups * self.group_size > self.dictionary_size {
            return Err(Error::InvalidArgument(format!(
                "{} groups of {} plus the salient concept do not fit a dictionary of {}",
                self.scene_groups, self.group_size, self.dictionary_size
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Tags per shot, scene by scene.
fn generate_tags(cfg: &SynthConfig, groups: &[Vec<usize>], salient: usize, rng: &mut ChaCha8Rng) -> Vec<SemanticVector> {
    let n = cfg.segments_per_video * cfg.shots_per_segment;
    let mut scene = rng.random_range(0..groups.len());
    let mut prev: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && !rng.random_bool(cfg.scene_persistence) {
            scene = rng.random_range(0..groups.len());
            prev.clear();
        }
        let group = &groups[scene];
        let want = rng.random_range(cfg.min_tags..=cfg.max_tags.min(group.len()).max(cfg.min_tags));
        let mut tags: Vec<usize> = prev
            .iter()
            .copied()
            .filter(|c| group.contains(c) && rng.random_bool(cfg.tag_persistence))
            .take(want)
            .collect();
        let mut fresh: Vec<usize> = group.iter().copied().filter(|c| !tags.contains(c)).collect();
        fresh.shuffle(rng);
        tags.extend(fresh.into_iter().take(want.saturating_sub(tags.len())));
        if tags.len() < cfg.max_tags && rng.random_bool(cfg.salient_rate) {
            tags.push(salient);
        }
        prev = tags.clone();
        out.push(SemanticVector::new(tags));
    }
    out
}

fn frames_for(cfg: &SynthConfig, tags: &SemanticVector, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..cfg.frames_per_shot)
        .map(|_| {
            let mut f: Vec<f64> = (0..cfg.feature_dim()).map(|_| noise.sample(rng)).collect();
            for &c in tags.as_slice() {
                if rng.random_bool(cfg.visibility) {
                    f[c] += 1.0;
                }
            }
            f
        })
        .collect()
}

/// One simulated user's summary of `video` for `query`.
pub fn simulate_user(
    cfg: &SynthConfig,
    video: &Video,
    query: &Query,
    salient: usize,
    user: usize,
    rng: &mut impl Rng,
) -> Summary {
    let shots = video.shots.iter().enumerate().filter_map(|(i, shot)| {
        let p = if shot.tags.intersects(&query.concepts) {
            cfg.p_rel
        } else if shot.tags.contains(salient) {
            cfg.p_ctx
        } else {
            0.0
        };
        (p > 0.0 && rng.random_bool(p)).then_some(i)
    });
    Summary::new(video.id.clone(), shots)
        .with_query(query.id.clone())
        .with_user(format!("u{user}"))
}

/// The concept every synthetic video treats as contextually important.
pub fn salient_concept(cfg: &SynthConfig) -> usize {
    (ChaCha8Rng::seed_from_u64(cfg.seed).next_u64() % cfg.dictionary_size as u64) as usize
}

/// Synthetic dataset, deterministic given `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let dictionary = ConceptDictionary::new((0..cfg.dictionary_size).map(|i| format!("concept{i:02}")))?;
    let salient = salient_concept(cfg);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    master.set_stream(1);

    let mut videos = Vec::new();
    let mut queries = Vec::new();
    let mut user_summaries = Vec::new();
    for v in 0..cfg.videos {
        let id = format!("v{}", v + 1);
        let mut last_err = None;
        let mut built = None;
        for _ in 0..MAX_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
            let others: Vec<usize> = (0..cfg.dictionary_size).filter(|&c| c != salient).collect();
            let chosen: Vec<usize> = others
                .choose_multiple(&mut rng, cfg.scene_groups * cfg.group_size)
                .copied()
                .collect();
            let groups: Vec<Vec<usize>> = chosen.chunks(cfg.group_size).map(<[usize]>::to_vec).collect();
            let tags = generate_tags(cfg, &groups, salient, &mut rng);
            let shots: Vec<Shot> = tags
                .into_iter()
                .map(|t| {
                    let frames = frames_for(cfg, &t, &noise, &mut rng);
                    Shot { tags: t, frames }
                })
                .collect();
            let video = Video::new(id.clone(), shots, cfg.shots_per_segment);
            match build_queries_numbered(&video, cfg.dictionary_size, cfg.query_counts, cfg.t_presence, rng.next_u64(), 1) {
                Ok(qs) => {
                    built = Some((video, qs, rng));
                    break;
                }
                Err(e @ Error::InsufficientPool(_)) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        let Some((video, qs, mut rng)) = built else {
            return Err(last_err.expect("at least one attempt"));
        };
        for q in &qs {
            for u in 0..cfg.users {
                user_summaries.push(simulate_user(cfg, &video, q, salient, u, &mut rng));
            }
        }
        videos.push(video);
        queries.extend(qs);
    }

    let dataset = Dataset {
        dictionary,
        videos,
        queries,
        user_summaries,
        oracle_summaries: None,
    };
    dataset.validate()?;
    Ok(dataset)
}
