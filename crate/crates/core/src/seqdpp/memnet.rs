use serde::{Deserialize, Serialize};

use super::params::{ModelParams, ParamGrads};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};

/// Query-conditioned representation of one shot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotEncoding {
    pub o: Vec<f64>,
    /// Softmax weights over the shot's frames.
    pub attention: Vec<f64>,
}

/// Per-query quantities shared by every shot: `u = C·q` and `w = Aᵀu`, so
/// that the attention logit of frame `f` is `uᵀ(A·f) = w·f`.
#[derive(Clone, Debug)]
pub(crate) struct QueryState {
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

impl QueryState {
    pub fn new(p: &ModelParams, q_vec: &[f64]) -> Result<Self> {
        if q_vec.len() != p.dims.d_q {
            return Err(Error::Dimension {
                context: "query vector",
                expected: p.dims.d_q,
                actual: q_vec.len(),
            });
        }
        if q_vec.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite query vector".into()));
        }
        let u = p.c.matvec(q_vec);
        let w = p.a.t_matvec(&u);
        Ok(Self {
            q: q_vec.to_vec(),
            u,
            w,
        })
    }
}

pub(crate) fn check_frames(p: &ModelParams, frames: &[Vec<f64>]) -> Result<()> {
    if frames.len() != p.dims.k {
        return Err(Error::Dimension {
            context: "frames per shot",
            expected: p.dims.k,
            actual: frames.len(),
        });
    }
    for f in frames {
        if f.len() != p.dims.d_f {
            return Err(Error::Dimension {
                context: "frame feature",
                expected: p.dims.d_f,
                actual: f.len(),
            });
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite frame feature".into()));
        }
    }
    Ok(())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Attention-weighted mean frame `Σ_k p_k f_k`.
fn pooled_frame(frames: &[Vec<f64>], attention: &[f64]) -> Vec<f64> {
    let mut pooled = vec![0.0; frames[0].len()];
    for (f, &pk) in frames.iter().zip(attention) {
        axpy(pk, f, &mut pooled);
    }
    pooled
}

pub(crate) fn encode_with(p: &ModelParams, state: &QueryState, frames: &[Vec<f64>]) -> Result<ShotEncoding> {
    check_frames(p, frames)?;
    let attention = if p.ablation.no_attention {
        vec![1.0 / frames.len() as f64; frames.len()]
    } else {
        let logits: Vec<f64> = frames.iter().map(|f| dot(&state.w, f)).collect();
        softmax(&logits)
    };
    // Σ p_k B f_k = B Σ p_k f_k
    let mut o = p.b.matvec(&pooled_frame(frames, &attention));
    if p.ablation.no_attention {
        o.extend_from_slice(&state.u);
    }
    Ok(ShotEncoding { o, attention })
}

/// Encodes one shot's frames against the query indicator `q_vec`.
pub fn encode_shot(p: &ModelParams, frames: &[Vec<f64>], q_vec: &[f64]) -> Result<ShotEncoding> {
    encode_with(p, &QueryState::new(p, q_vec)?, frames)
}

/// Back-propagates `g_o = ∂ℓ/∂o` into `grads.a`, `grads.b` and the query
/// embedding gradient `g_u`. `C` is handled once per query by the caller.
pub(crate) fn backprop_shot(
    p: &ModelParams,
    state: &QueryState,
    frames: &[Vec<f64>],
    enc: &ShotEncoding,
    g_o: &[f64],
    grads: &mut ParamGrads,
    g_u: &mut [f64],
) {
    let h_o = p.dims.h_o;
    let pooled = pooled_frame(frames, &enc.attention);
    grads.b.add_outer(1.0, &g_o[..h_o], &pooled);

    if p.ablation.no_attention {
        axpy(1.0, &g_o[h_o..], g_u);
        return;
    }

    // dp_k = g_o · B f_k = (Bᵀ g_o) · f_k
    let g_pooled = p.b.t_matvec(&g_o[..h_o]);
    let dp: Vec<f64> = frames.iter().map(|f| dot(&g_pooled, f)).collect();
    let mean = dot(&enc.attention, &dp);
    let mut g_w = vec![0.0; p.dims.d_f];
    for ((f, &pk), &dpk) in frames.iter().zip(&enc.attention).zip(&dp) {
        axpy(pk * (dpk - mean), f, &mut g_w);
    }
    // w = Aᵀu
    grads.a.add_outer(1.0, &state.u, &g_w);
    let du = p.a.matvec(&g_w);
    axpy(1.0, &du, g_u);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdpp::{Ablation, Dims};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(seed: u64) -> ModelParams {
        ModelParams::random(Dims::uniform(5, 4, 3, 4), 1e-6, Ablation::default(), 1.0, seed).unwrap()
    }

    fn frames(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Vec<Vec<f64>> {
        (0..k).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn identical_frames_give_uniform_attention() {
        let p = params(1);
        let f = vec![0.3, -0.2, 0.9, 0.1, 0.5];
        let enc = encode_shot(&p, &vec![f.clone(); 3], &[1.0, 0.0, 1.0, 0.0]).unwrap();
        for a in &enc.attention {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
        let expect = p.b.matvec(&f);
        for (x, y) in enc.o.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_attention_picks_one_frame() {
        let mut p = params(2);
        // u = C q = e_0, w = Aᵀ e_0 = e_0
        p.c = crate::linalg::Mat::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 });
        p.a = crate::linalg::Mat::from_fn(4, 5, |i, j| if i == j { 1.0 } else { 0.0 });
        let frames = vec![
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![50.0, 1.0, 2.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
        ];
        let enc = encode_shot(&p, &frames, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        // 1 - 1e-20 rounds to 1 in f64, so check the remaining mass
        assert!(enc.attention[0] + enc.attention[2] < 1e-20);
        let expect = p.b.matvec(&frames[1]);
        for (x, y) in enc.o.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_matches_naive_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..20 {
            let p = params(seed);
            let fr = frames(&mut rng, 3, 5);
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(0..2) as f64).collect();
            let enc = encode_shot(&p, &fr, &q).unwrap();
            let u = p.c.matvec(&q);
            let logits: Vec<f64> = fr.iter().map(|f| dot(&u, &p.a.matvec(f))).collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            for (a, l) in enc.attention.iter().zip(&logits) {
                assert!((a - l.exp() / z).abs() < 1e-12);
            }
            assert!((enc.attention.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = params(4);
        let fr = frames(&mut rng, 3, 5);
        let q = [1.0, 0.0, 1.0, 0.0];
        let enc = encode_shot(&p, &fr, &q).unwrap();
        let rev: Vec<Vec<f64>> = fr.iter().rev().cloned().collect();
        let enc_rev = encode_shot(&p, &rev, &q).unwrap();
        for k in 0..3 {
            assert!((enc.attention[k] - enc_rev.attention[2 - k]).abs() < 1e-15);
        }
    }

    #[test]
    fn no_attention_appends_query_embedding() {
        let ablation = Ablation {
            no_attention: true,
            no_emb_d: false,
        };
        let p = ModelParams::random(Dims::uniform(5, 4, 3, 4), 1e-6, ablation, 1.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fr = frames(&mut rng, 3, 5);
        let q = [0.0, 1.0, 1.0, 0.0];
        let enc = encode_shot(&p, &fr, &q).unwrap();
        assert_eq!(enc.o.len(), 8);
        assert_eq!(&enc.o[4..], p.c.matvec(&q).as_slice());
        assert!(enc.attention.iter().all(|&a| a == 1.0 / 3.0));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let p = params(6);
        let err = encode_shot(&p, &vec![vec![0.0; 5]; 2], &[0.0; 4]).unwrap_err();
        assert_eq!(err.kind(), "dimension");
        let err = encode_shot(&p, &vec![vec![0.0; 5]; 3], &[0.0; 3]).unwrap_err();
        assert_eq!(err.kind(), "dimension");
        let err = encode_shot(&p, &[vec![f64::NAN; 5], vec![0.0; 5], vec![0.0; 5]], &[0.0; 4]).unwrap_err();
        assert_eq!(err.kind(), "numerical");
    }
}
