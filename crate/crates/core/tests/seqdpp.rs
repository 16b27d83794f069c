use qfvs::linalg::{det, Mat};
use qfvs::seqdpp::{
    encode_shot, grad_log_likelihood, query_vector, seq_log_likelihood, summarize, Ablation, Dims, Kernel,
    ModelParams,
};
use qfvs::{Query, Shot, Summary, Video};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_video(rng: &mut ChaCha8Rng, n: usize, seg: usize, k: usize, d_f: usize) -> Video {
    let shots = (0..n)
        .map(|i| Shot {
            tags: qfvs::SemanticVector::new([i % 3]),
            frames: (0..k).map(|_| (0..d_f).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        })
        .collect();
    Video::new("v", shots, seg)
}

fn small_params(lambda: f64, seed: u64) -> ModelParams {
    ModelParams::random(Dims::uniform(5, 4, 3, 4), lambda, Ablation::default(), 1.0, seed).unwrap()
}

fn query() -> Query {
    Query::new("q", "v", [0, 2], None)
}

#[test]
fn chain_probabilities_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..5 {
        let p = small_params(1e-3, seed);
        let v = random_video(&mut rng, 6, 3, 3, 5);
        let total: f64 = (0u32..64)
            .map(|mask| {
                let s = Summary::new("v", (0..6).filter(|i| mask >> i & 1 == 1));
                seq_log_likelihood(&p, &v, &query(), &s).unwrap().exp()
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }
}

#[test]
fn identity_kernel_gives_uniform_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut p = small_params(1.0, 3);
    p.d = Mat::zeros(4, 4);
    let v = random_video(&mut rng, 5, 5, 3, 5);
    for shots in [vec![], vec![1], vec![0, 2, 4], vec![0, 1, 2, 3, 4]] {
        let ll = seq_log_likelihood(&p, &v, &query(), &Summary::new("v", shots)).unwrap();
        assert!((ll + 5.0 * 2f64.ln()).abs() < 1e-12, "{ll}");
    }
}

#[test]
fn untouched_concepts_do_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p = small_params(1e-3, 4);
    let v = random_video(&mut rng, 6, 3, 3, 5);
    let s = Summary::new("v", [1, 4]);
    let before = seq_log_likelihood(&p, &v, &query(), &s).unwrap();
    // query {0, 2} never reads columns 1 and 3 of C
    for i in 0..4 {
        p.c[(i, 1)] += 7.0;
        p.c[(i, 3)] -= 3.0;
    }
    assert_eq!(seq_log_likelihood(&p, &v, &query(), &s).unwrap(), before);
}

fn finite_difference_error(p: &ModelParams, v: &Video, s: &Summary) -> f64 {
    let (_, grads) = grad_log_likelihood(p, v, &query(), s).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for which in 0..4 {
        let len = grads.matrices()[which].1.as_slice().len();
        for idx in 0..len {
            let eval = |delta: f64| {
                let mut q = p.clone();
                let m = [&mut q.a, &mut q.b, &mut q.c, &mut q.d][which].as_mut_slice();
                m[idx] += delta;
                seq_log_likelihood(&q, v, &query(), s).unwrap()
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let analytic = grads.matrices()[which].1.as_slice()[idx];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3));
        }
    }
    worst
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20 {
        let p = small_params(1e-6, seed);
        let v = random_video(&mut rng, 6, 3, 3, 5);
        let s = Summary::new("v", [0, 2, 4]);
        let err = finite_difference_error(&p, &v, &s);
        assert!(err <= 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn ablated_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (no_attention, no_emb_d) in [(true, false), (false, true), (true, true)] {
        let ablation = Ablation { no_attention, no_emb_d };
        let p = ModelParams::random(Dims::uniform(5, 4, 3, 4), 1e-3, ablation, 1.0, 9).unwrap();
        let v = random_video(&mut rng, 6, 3, 3, 5);
        let s = Summary::new("v", [1, 3]);
        let (_, grads) = grad_log_likelihood(&p, &v, &query(), &s).unwrap();
        if no_emb_d {
            assert!(grads.d.as_slice().iter().all(|&x| x == 0.0));
        }
        let err = finite_difference_error(&p, &v, &s);
        assert!(err <= 1e-4, "{ablation:?}: {err}");
    }
}

#[test]
fn symmetric_critical_point_has_zero_gradient() {
    // four identical shots, two selected: d/da of the likelihood vanishes
    // for every shot norm a exactly when lambda = k / (n - k) = 1
    let frame = vec![0.4, -0.3, 0.8, 0.1, 0.6];
    let shots: Vec<Shot> = (0..4)
        .map(|_| Shot {
            tags: qfvs::SemanticVector::new([0]),
            frames: vec![frame.clone(); 3],
        })
        .collect();
    let v = Video::new("v", shots, 4);
    let s = Summary::new("v", [0, 1]);

    let p = small_params(1.0, 11);
    let (_, g) = grad_log_likelihood(&p, &v, &query(), &s).unwrap();
    for (name, m) in g.matrices() {
        assert!(m.as_slice().iter().all(|x| x.abs() < 1e-12), "{name}");
    }

    let p = small_params(0.5, 11);
    let (_, g) = grad_log_likelihood(&p, &v, &query(), &s).unwrap();
    assert!(g.d.frobenius_sq() > 1e-6);
}

#[test]
fn query_pathway_needs_memory_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut p = small_params(1e-3, 12);
    p.a = Mat::zeros(4, 5);
    let v = random_video(&mut rng, 6, 3, 3, 5);
    let (_, g) = grad_log_likelihood(&p, &v, &query(), &Summary::new("v", [2, 3])).unwrap();
    assert!(g.c.as_slice().iter().all(|&x| x == 0.0));
    assert!(g.a.frobenius_sq() > 0.0);
}

#[test]
fn zero_jitter_rank_deficiency_is_an_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = ModelParams::random(
        Dims {
            h_l: 1,
            ..Dims::uniform(5, 4, 3, 4)
        },
        0.0,
        Ablation::default(),
        1.0,
        13,
    )
    .unwrap();
    let v = random_video(&mut rng, 6, 3, 3, 5);
    let err = seq_log_likelihood(&p, &v, &query(), &Summary::new("v", [0, 1])).unwrap_err();
    assert_eq!(err.kind(), "numerical");
    assert!(seq_log_likelihood(&p, &v, &query(), &Summary::new("v", [0])).is_ok());
}

#[test]
fn missing_frames_and_bad_summaries_are_rejected() {
    let p = small_params(1e-3, 14);
    let tagged = Video::new("v", (0..4).map(|i| Shot::tagged([i])).collect(), 2);
    let err = seq_log_likelihood(&p, &tagged, &query(), &Summary::new("v", [0])).unwrap_err();
    assert_eq!(err.kind(), "missing_frames");
    assert_eq!(summarize(&p, &tagged, &query()).unwrap_err().kind(), "missing_frames");

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let v = random_video(&mut rng, 4, 2, 3, 5);
    let err = seq_log_likelihood(&p, &v, &query(), &Summary::new("v", [9])).unwrap_err();
    assert_eq!(err.kind(), "index_out_of_range");
    let err = seq_log_likelihood(&p, &v, &query(), &Summary::new("w", [0])).unwrap_err();
    assert_eq!(err.kind(), "video_mismatch");
}

/// Per-segment argmax of `det(L_{y ∪ prev})`, recomputed from scratch.
fn brute_force_summary(p: &ModelParams, v: &Video, q: &Query) -> Vec<Vec<usize>> {
    let q_vec = query_vector(p, q).unwrap();
    let z: Vec<Vec<f64>> = v
        .shots
        .iter()
        .map(|s| p.d.matvec(&encode_shot(p, &s.frames, &q_vec).unwrap().o))
        .collect();
    let mut prev: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for seg in v.segments() {
        let ground: Vec<usize> = prev.iter().copied().chain(seg.clone()).collect();
        let refs: Vec<&[f64]> = ground.iter().map(|&i| z[i].as_slice()).collect();
        let k = Kernel::from_embeddings(&refs, ground.clone(), p.lambda).unwrap();
        let m = seg.len();
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for mask in 0u32..1 << m {
            let y: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| seg.start + i).collect();
            let idx: Vec<usize> = prev.iter().chain(&y).map(|s| k.position(*s).unwrap()).collect();
            let d = det(&k.l.principal(&idx));
            let better = d > best.0 || (d == best.0 && (y.len(), &y) < (best.1.len(), &best.1));
            if better {
                best = (d, y);
            }
        }
        prev = best.1.clone();
        out.push(best.1);
    }
    out
}

#[test]
fn summarize_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut selected = 0;
    for seed in 0..10 {
        let p = ModelParams::random(Dims::uniform(5, 4, 3, 6), 1e-4, Ablation::default(), 3.0, seed).unwrap();
        let v = random_video(&mut rng, 20, 7, 3, 5);
        let got = summarize(&p, &v, &query()).unwrap();
        assert_eq!(got.per_segment, brute_force_summary(&p, &v, &query()), "seed {seed}");
        assert_eq!(got.per_segment.len(), 3);
        selected += got.shots().len();
    }
    assert!(selected > 0);
}

#[test]
fn tiny_embeddings_select_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let p = ModelParams::random(Dims::uniform(5, 4, 3, 4), 1e-6, Ablation::default(), 1e-6, 16).unwrap();
    let v = random_video(&mut rng, 12, 4, 3, 5);
    let sel = summarize(&p, &v, &query()).unwrap();
    assert!(sel.shots().is_empty());
    assert!(sel.to_summary("v").is_empty());
}

#[test]
fn checkpoint_round_trips_exactly() {
    let dir = tempfile::TempDir::new().unwrap();
    let path = dir.path().join("ckpt.json");
    for ablation in [Ablation::default(), Ablation { no_attention: true, no_emb_d: true }] {
        let p = ModelParams::random(Dims::uniform(7, 5, 2, 3), 1e-6, ablation, 0.1, 17).unwrap();
        p.save(&path).unwrap();
        let back = ModelParams::load(&path).unwrap();
        assert_eq!(back, p);
        let text = std::fs::read_to_string(&path).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["dims"]["K"], 2);
        // identity D under no_emb_D spans o = [B f; u], h_o + h wide
        assert_eq!(json["dims"]["h_L"], if ablation.no_emb_d { 6 } else { 3 });
        assert_eq!(json["A"].as_array().unwrap().len(), 3 * 7);
        assert_eq!(json["seed"], 17);
    }
}

#[test]
fn malformed_checkpoints_are_rejected() {
    let p = small_params(1e-6, 18);
    let mut json: serde_json::Value = serde_json::from_str(&p.to_checkpoint_json()).unwrap();
    json["B"].as_array_mut().unwrap().pop();
    let err = ModelParams::from_checkpoint_json(&json.to_string()).unwrap_err();
    assert_eq!(err.kind(), "dimension");

    let mut json: serde_json::Value = serde_json::from_str(&p.to_checkpoint_json()).unwrap();
    json["lambda"] = serde_json::json!(-1.0);
    let err = ModelParams::from_checkpoint_json(&json.to_string()).unwrap_err();
    assert_eq!(err.kind(), "invalid_argument");

    assert_eq!(ModelParams::from_checkpoint_json("{").unwrap_err().kind(), "parse");
}
