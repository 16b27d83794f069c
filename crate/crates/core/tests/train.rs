use std::collections::HashSet;

use qfvs::seqdpp::Ablation;
use qfvs::synth::{generate, SynthConfig};
use qfvs::train::{
    evaluate_model, gradient_check, mean_log_likelihood, split_leave_one_out, subset, train, GradCheckConfig,
    TrainConfig, TrainTarget,
};
use qfvs::Dataset;

fn four_videos() -> Dataset {
    generate(&SynthConfig {
        segments_per_video: 6,
        seed: 21,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        h: 6,
        h_o: 6,
        h_l: 6,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn ids(d: &Dataset) -> Vec<&str> {
    d.videos.iter().map(|v| v.id.as_str()).collect()
}

#[test]
fn leave_one_out_keeps_two_for_training() {
    let d = four_videos();
    let (train, val, test) = split_leave_one_out(&d, "v4", "v3").unwrap();
    assert_eq!(ids(&train), ["v1", "v2"]);
    assert_eq!(ids(&val), ["v3"]);
    assert_eq!(ids(&test), ["v4"]);

    let mut seen = HashSet::new();
    for part in [&train, &val, &test] {
        let videos: HashSet<&str> = ids(part).into_iter().collect();
        for q in &part.queries {
            assert!(videos.contains(q.video.as_str()));
            assert!(seen.insert(q.id.clone()), "query {} in two splits", q.id);
        }
        assert!(part.user_summaries.iter().all(|s| videos.contains(s.video.as_str())));
        part.validate().unwrap();
    }
    assert_eq!(seen.len(), d.queries.len());
    let summaries = train.user_summaries.len() + val.user_summaries.len() + test.user_summaries.len();
    assert_eq!(summaries, d.user_summaries.len());
}

#[test]
fn rotation_tests_every_video_once() {
    let d = four_videos();
    let names = ids(&d);
    let mut tested = Vec::new();
    for i in 0..4 {
        let (test_id, val_id) = (names[i], names[(i + 1) % 4]);
        let (train, _, test) = split_leave_one_out(&d, test_id, val_id).unwrap();
        assert_eq!(train.videos.len(), 2);
        tested.extend(ids(&test).into_iter().map(str::to_string));
    }
    tested.sort();
    assert_eq!(tested, ["v1", "v2", "v3", "v4"]);
}

#[test]
fn split_errors() {
    let d = four_videos();
    assert_eq!(split_leave_one_out(&d, "v1", "v1").unwrap_err().kind(), "invalid_argument");
    assert_eq!(split_leave_one_out(&d, "v9", "v1").unwrap_err().kind(), "invalid_argument");
    let two = subset(&d, |id| id == "v1" || id == "v2");
    assert_eq!(split_leave_one_out(&two, "v1", "v2").unwrap_err().kind(), "invalid_argument");
}

#[test]
fn full_batch_ascent_never_decreases_likelihood() {
    let d = four_videos();
    let mut toy = subset(&d, |id| id == "v1");
    toy.queries.truncate(2);
    let keep: HashSet<String> = toy.queries.iter().map(|q| q.id.clone()).collect();
    toy.user_summaries.retain(|s| keep.contains(s.query.as_deref().unwrap()));

    let cfg = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 2,
        epochs: 50,
        init_scale: 1.0,
        ..quick(50)
    };
    let (_, history) = train(&toy, &toy, &cfg).unwrap();
    let lls: Vec<f64> = history.epochs.iter().map(|e| e.train_log_likelihood).collect();
    assert_eq!(lls.len(), 50);
    for w in lls.windows(2) {
        assert!(w[1] >= w[0], "{} then {}", w[0], w[1]);
    }
    assert!(lls[49] > lls[0]);
}

#[test]
fn training_is_deterministic() {
    let d = four_videos();
    let (train_d, val_d, _) = split_leave_one_out(&d, "v4", "v3").unwrap();
    let (p1, h1) = train(&train_d, &val_d, &quick(2)).unwrap();
    let (p2, h2) = train(&train_d, &val_d, &quick(2)).unwrap();
    assert_eq!(p1, p2);
    assert_eq!(h1, h2);
    let other = TrainConfig { seed: 4, ..quick(2) };
    assert_ne!(train(&train_d, &val_d, &other).unwrap().0, p1);
}

#[test]
fn selected_epoch_reproduces_validation_score() {
    let d = four_videos();
    let (train_d, val_d, _) = split_leave_one_out(&d, "v1", "v2").unwrap();
    let (params, history) = train(&train_d, &val_d, &quick(6)).unwrap();
    let best = history
        .epochs
        .iter()
        .map(|e| e.val_f1)
        .fold(f64::NEG_INFINITY, f64::max);
    let first_best = history.epochs.iter().find(|e| e.val_f1 == best).unwrap().epoch;
    assert_eq!(history.selected_epoch, first_best);
    assert_eq!(evaluate_model(&params, &val_d).unwrap().f1, best);
}

#[test]
fn ablations_train_to_valid_parameters() {
    let d = four_videos();
    let (train_d, val_d, _) = split_leave_one_out(&d, "v3", "v2").unwrap();
    for (no_attention, no_emb_d) in [(true, false), (false, true)] {
        let cfg = TrainConfig {
            ablation: Ablation { no_attention, no_emb_d },
            ..quick(2)
        };
        let (p, h) = train(&train_d, &val_d, &cfg).unwrap();
        p.validate().unwrap();
        assert_eq!(h.epochs.len(), 2);
        assert_eq!(p.output_dim(), if no_attention { 12 } else { 6 });
        if no_emb_d {
            assert_eq!(p.d, qfvs::linalg::Mat::identity(6));
        }
    }
}

#[test]
fn user_targets_are_supported() {
    let d = four_videos();
    let (train_d, val_d, _) = split_leave_one_out(&d, "v3", "v2").unwrap();
    let cfg = TrainConfig {
        target: TrainTarget::Users,
        ..quick(1)
    };
    let (p, _) = train(&train_d, &val_d, &cfg).unwrap();
    let users = mean_log_likelihood(&p, &train_d, TrainTarget::Users).unwrap();
    let oracle = mean_log_likelihood(&p, &train_d, TrainTarget::Oracle).unwrap();
    assert!(users.is_finite() && oracle.is_finite());
}

#[test]
fn empty_or_invalid_training_is_rejected() {
    let d = four_videos();
    let mut empty = subset(&d, |id| id == "v1");
    empty.queries.clear();
    empty.user_summaries.clear();
    assert_eq!(train(&empty, &empty, &quick(1)).unwrap_err().kind(), "invalid_argument");
    let bad = TrainConfig {
        learning_rate: 0.0,
        ..quick(1)
    };
    assert_eq!(train(&d, &d, &bad).unwrap_err().kind(), "invalid_argument");
}

#[test]
fn gradient_check_reports() {
    let report = gradient_check(&GradCheckConfig::default(), 0).unwrap();
    let names: Vec<&str> = report.matrices.iter().map(|m| m.name.as_str()).collect();
    assert_eq!(names, ["A", "B", "C", "D"]);
    assert_eq!(report.matrices[0].entries, 4 * 5);
    assert!(report.max_rel_error <= 1e-4);

    let conditioned = GradCheckConfig {
        lambda: 1e-3,
        ..GradCheckConfig::default()
    };
    for seed in 0..5 {
        let r = gradient_check(&conditioned, seed).unwrap();
        assert!(r.max_rel_error <= 1e-6, "seed {seed}: {}", r.max_rel_error);
    }
}
