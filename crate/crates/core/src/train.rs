//! Likelihood training of the sequential DPP.
//!
//! Plain minibatch SGD (gradient ascent on the mean log-likelihood) with
//! norm clipping. The parameters of the epoch with the best validation F1 are
//! returned.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{evaluate_multi, MatchMode};
use crate::model::{Dataset, Query, Shot, Summary, Video};
use crate::oracle::{build_oracle, CandidatePool};
use crate::seqdpp::{grad_log_likelihood, seq_log_likelihood, summarize, Ablation, Dims, ModelParams, ParamGrads};

/// Which summaries the likelihood is maximized on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainTarget {
    /// One oracle summary per query, built on the fly when absent.
    #[default]
    Oracle,
    /// Every user summary as its own example.
    Users,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Query-video pairs per minibatch.
    pub batch_size: usize,
    pub h: usize,
    pub h_o: usize,
    pub h_l: usize,
    pub lambda: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub ablation: Ablation,
    pub clip_norm: f64,
    pub target: TrainTarget,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 4,
            h: 16,
            h_o: 16,
            h_l: 16,
            lambda: 1e-6,
            init_scale: 0.1,
            seed: 0,
            ablation: Ablation::default(),
            clip_norm: 5.0,
            target: TrainTarget::Oracle,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("init_scale", self.init_scale),
            ("clip_norm", self.clip_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("h", self.h),
            ("h_o", self.h_o),
            ("h_l", self.h_l),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Freshly initialized parameters for a dataset's feature shapes.
    pub fn init_params(&self, d: &Dataset) -> Result<ModelParams> {
        self.validate()?;
        let video = d
            .videos
            .iter()
            .find(|v| v.has_frames())
            .ok_or_else(|| Error::MissingFrames("no video in the dataset has frame features".into()))?;
        let dims = Dims {
            d_f: video.frame_dim().unwrap_or(0),
            d_q: d.dictionary.len(),
            k: video.frames_per_shot().unwrap_or(0),
            h: self.h,
            h_o: self.h_o,
            h_l: self.h_l,
        };
        ModelParams::random(dims, self.lambda, self.ablation, self.init_scale, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's minibatches, each taken before its update.
    pub train_log_likelihood: f64,
    pub val_precision: f64,
    pub val_recall: f64,
    pub val_f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub selected_epoch: usize,
}

/// Mean precision / recall / F1 of model summaries against user summaries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pairs: usize,
}

/// Partitions `d` by video into `(train, val, test)`.
pub fn split_leave_one_out(d: &Dataset, test_video: &str, val_video: &str) -> Result<(Dataset, Dataset, Dataset)> {
    if d.videos.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out needs at least 3 videos, got {}",
            d.videos.len()
        )));
    }
    if test_video == val_video {
        return Err(Error::InvalidArgument("test and validation video must differ".into()));
    }
    for id in [test_video, val_video] {
        if d.video(id).is_none() {
            return Err(Error::InvalidArgument(format!("unknown video '{id}'")));
        }
    }
    let train: HashSet<&str> = d
        .videos
        .iter()
        .map(|v| v.id.as_str())
        .filter(|&id| id != test_video && id != val_video)
        .collect();
    Ok((
        subset(d, |id| train.contains(id)),
        subset(d, |id| id == val_video),
        subset(d, |id| id == test_video),
    ))
}

/// Videos accepted by `keep`, with their queries and summaries.
pub fn subset(d: &Dataset, keep: impl Fn(&str) -> bool) -> Dataset {
    let summaries = |list: &[Summary]| list.iter().filter(|s| keep(&s.video)).cloned().collect::<Vec<_>>();
    Dataset {
        dictionary: d.dictionary.clone(),
        videos: d.videos.iter().filter(|v| keep(&v.id)).cloned().collect(),
        queries: d.queries.iter().filter(|q| keep(&q.video)).cloned().collect(),
        user_summaries: summaries(&d.user_summaries),
        oracle_summaries: d.oracle_summaries.as_deref().map(summaries),
    }
}

struct Example<'a> {
    video: &'a Video,
    query: &'a Query,
    target: Summary,
}

fn examples<'a>(d: &'a Dataset, target: TrainTarget) -> Result<Vec<Example<'a>>> {
    let mut out = Vec::new();
    for query in &d.queries {
        let video = d
            .video(&query.video)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown video '{}'", query.video)))?;
        let users = d.user_summaries_for(&query.id);
        let targets = match target {
            TrainTarget::Users => users.into_iter().cloned().collect(),
            TrainTarget::Oracle => match d.oracle_for(&query.id) {
                Some(o) => vec![o.clone()],
                None if users.is_empty() => Vec::new(),
                None => vec![build_oracle(&users, video, CandidatePool::Union)?.0],
            },
        };
        if targets.is_empty() {
            return Err(Error::InvalidArgument(format!("query '{}' has no reference summary", query.id)));
        }
        out.extend(targets.into_iter().map(|target| Example { video, query, target }));
    }
    Ok(out)
}

/// Scores `summarize` against the user summaries of every query in `d`.
pub fn evaluate_model(p: &ModelParams, d: &Dataset) -> Result<SplitScore> {
    let scores: Vec<(f64, f64, f64)> = d
        .queries
        .par_iter()
        .filter_map(|q| {
            let refs = d.user_summaries_for(&q.id);
            if refs.is_empty() {
                return None;
            }
            Some((|| {
                let video = d
                    .video(&q.video)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown video '{}'", q.video)))?;
                let system = summarize(p, video, q)?.to_summary(&video.id);
                let r = evaluate_multi(&system, refs, video, MatchMode::Count)?;
                Ok((r.precision, r.recall, r.f1))
            })())
        })
        .collect::<Result<_>>()?;
    let n = scores.len();
    if n == 0 {
        return Ok(SplitScore::default());
    }
    let mean = |f: fn(&(f64, f64, f64)) -> f64| scores.iter().map(f).sum::<f64>() / n as f64;
    Ok(SplitScore {
        precision: mean(|s| s.0),
        recall: mean(|s| s.1),
        f1: mean(|s| s.2),
        pairs: n,
    })
}

/// Mean log-likelihood and mean gradient over a batch, summed in batch order.
fn batch_gradient(p: &ModelParams, batch: &[&Example<'_>]) -> Result<(f64, ParamGrads)> {
    let parts: Vec<(f64, ParamGrads)> = batch
        .par_iter()
        .map(|e| grad_log_likelihood(p, e.video, e.query, &e.target))
        .collect::<Result<_>>()?;
    let mut total = p.zero_grads();
    let mut ll = 0.0;
    for (l, g) in &parts {
        ll += l;
        total.add(g);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok((ll / n, total))
}

/// Trains on `d_train`, selecting the epoch by F1 on `d_val`.
pub fn train(d_train: &Dataset, d_val: &Dataset, cfg: &TrainConfig) -> Result<(ModelParams, TrainHistory)> {
    let mut params = cfg.init_params(d_train)?;
    let data = examples(d_train, cfg.target)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set has no query-video pairs".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut ll_sum = 0.0;
        let mut n_batches = 0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Example<'_>> = chunk.iter().map(|&i| &data[i]).collect();
            let (ll, mut grads) = batch_gradient(&params, &batch)?;
            if !ll.is_finite() || !grads.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss at epoch {epoch}, batch {}", b + 1)));
            }
            let norm = grads.norm();
            if norm > cfg.clip_norm {
                grads.scale(cfg.clip_norm / norm);
            }
            params.apply(cfg.learning_rate, &grads);
            ll_sum += ll;
            n_batches += 1;
        }

        let val = evaluate_model(&params, d_val)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_log_likelihood: ll_sum / n_batches as f64,
            val_precision: val.precision,
            val_recall: val.recall,
            val_f1: val.f1,
        });
        if best.as_ref().is_none_or(|(f1, _)| val.f1 > *f1) {
            best = Some((val.f1, params.clone()));
            history.selected_epoch = epoch;
        }
    }
    let (_, params) = best.expect("at least one epoch");
    Ok((params, history))
}

/// Mean training log-likelihood of `p` on `d`.
pub fn mean_log_likelihood(p: &ModelParams, d: &Dataset, target: TrainTarget) -> Result<f64> {
    let data = examples(d, target)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("no query-video pairs".into()));
    }
    let lls: Vec<f64> = data
        .par_iter()
        .map(|e| seq_log_likelihood(p, e.video, e.query, &e.target))
        .collect::<Result<_>>()?;
    Ok(lls.iter().sum::<f64>() / lls.len() as f64)
}

/// Random instance used by [`gradient_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub d_f: usize,
    pub d_q: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub h: usize,
    pub n_shots: usize,
    pub segment_size: usize,
    /// Cap on selected shots per segment; keeps minors within the kernel rank.
    pub max_selected: usize,
    pub lambda: f64,
    pub init_scale: f64,
    pub step: f64,
    pub ablation: Ablation,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            d_f: 5,
            d_q: 4,
            k: 3,
            h: 4,
            n_shots: 6,
            segment_size: 3,
            max_selected: 2,
            lambda: 1e-6,
            init_scale: 1.0,
            step: 1e-5,
            ablation: Ablation::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCheck {
    pub name: String,
    pub entries: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub log_likelihood: f64,
    pub max_rel_error: f64,
    pub matrices: Vec<MatrixCheck>,
}

/// Error of one entry relative to `max(|analytic|, |numeric|, 1e-3)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// A random video, query and summary with the shapes of `cfg`.
pub fn random_instance(cfg: &GradCheckConfig, seed: u64) -> Result<(ModelParams, Video, Query, Summary)> {
    let dims = Dims::uniform(cfg.d_f, cfg.d_q, cfg.k, cfg.h);
    let params = ModelParams::random(dims, cfg.lambda, cfg.ablation, cfg.init_scale, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let shots = (0..cfg.n_shots)
        .map(|_| Shot {
            tags: crate::model::SemanticVector::new([rng.random_range(0..cfg.d_q)]),
            frames: (0..cfg.k)
                .map(|_| (0..cfg.d_f).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect(),
        })
        .collect();
    let video = Video::new("check", shots, cfg.segment_size);
    let a = rng.random_range(0..cfg.d_q);
    let b = (a + 1 + rng.random_range(0..cfg.d_q.max(2) - 1)) % cfg.d_q.max(1);
    let query = Query::new("check-q", "check", [a, b], None);
    let mut chosen = Vec::new();
    for seg in video.segments() {
        let mut shots: Vec<usize> = seg.collect();
        shots.shuffle(&mut rng);
        let take = rng.random_range(0..=cfg.max_selected.min(shots.len()));
        chosen.extend_from_slice(&shots[..take]);
    }
    let summary = Summary::new("check", chosen);
    Ok((params, video, query, summary))
}

/// Central finite differences of the log-likelihood against its analytic
/// gradient, over every parameter entry of a random instance.
pub fn gradient_check(cfg: &GradCheckConfig, seed: u64) -> Result<GradCheckReport> {
    let (params, video, query, summary) = random_instance(cfg, seed)?;
    let (ll, grads) = grad_log_likelihood(&params, &video, &query, &summary)?;
    let f = |p: &ModelParams| seq_log_likelihood(p, &video, &query, &summary);

    let mut matrices = Vec::new();
    for (name, analytic) in grads.matrices() {
        if name == "D" && params.ablation.no_emb_d {
            continue;
        }
        let mut check = MatrixCheck {
            name: name.to_string(),
            entries: analytic.as_slice().len(),
            max_abs_error: 0.0,
            max_rel_error: 0.0,
        };
        for idx in 0..analytic.as_slice().len() {
            let shifted = |delta: f64| {
                let mut p = params.clone();
                let m = match name {
                    "A" => &mut p.a,
                    "B" => &mut p.b,
                    "C" => &mut p.c,
                    _ => &mut p.d,
                };
                m.as_mut_slice()[idx] += delta;
                f(&p)
            };
            let numeric = (shifted(cfg.step)? - shifted(-cfg.step)?) / (2.0 * cfg.step);
            let a = analytic.as_slice()[idx];
            check.max_abs_error = check.max_abs_error.max((a - numeric).abs());
            check.max_rel_error = check.max_rel_error.max(relative_error(a, numeric));
        }
        matrices.push(check);
    }
    let max_rel_error = matrices.iter().map(|m| m.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        seed,
        log_likelihood: ll,
        max_rel_error,
        matrices,
    })
}
