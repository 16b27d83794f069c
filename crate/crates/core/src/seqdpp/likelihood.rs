use super::kernel::{embed, Kernel};
use super::memnet::{backprop_shot, encode_with, QueryState, ShotEncoding};
use super::params::{ModelParams, ParamGrads};
use crate::error::{Error, Result};
use crate::linalg::{axpy, Lu, Mat};
use crate::model::{Query, Summary, Video};

/// Binary indicator of `q` with the model's query dimension.
pub fn query_vector(p: &ModelParams, q: &Query) -> Result<Vec<f64>> {
    let mut v = vec![0.0; p.dims.d_q];
    for &c in &q.concepts {
        if c >= v.len() {
            return Err(Error::IndexOutOfRange {
                context: "query concept",
                index: c,
                len: v.len(),
            });
        }
        v[c] = 1.0;
    }
    Ok(v)
}

/// Encodings and kernel embeddings of every shot of a video for one query.
pub(crate) struct Forward {
    pub state: QueryState,
    pub encodings: Vec<ShotEncoding>,
    pub z: Vec<Vec<f64>>,
}

impl Forward {
    pub fn new(p: &ModelParams, v: &Video, q: &Query) -> Result<Self> {
        if !v.has_frames() {
            return Err(Error::MissingFrames(v.id.clone()));
        }
        let state = QueryState::new(p, &query_vector(p, q)?)?;
        let encodings = v
            .shots
            .iter()
            .map(|s| encode_with(p, &state, &s.frames))
            .collect::<Result<Vec<_>>>()?;
        let z = encodings.iter().map(|e| embed(p, &e.o)).collect();
        Ok(Self { state, encodings, z })
    }

    /// Kernel over `ground` (video shot indices).
    pub fn kernel(&self, p: &ModelParams, ground: Vec<usize>) -> Result<Kernel> {
        let refs: Vec<&[f64]> = ground.iter().map(|&i| self.z[i].as_slice()).collect();
        Kernel::from_embeddings(&refs, ground, p.lambda)
    }
}

fn positive_logdet(lu: &Lu, what: &str, v: &Video, t: usize, lambda: f64) -> Result<f64> {
    let (sign, value) = lu.logdet();
    if sign > 0.0 {
        Ok(value)
    } else {
        Err(Error::Numerical(format!(
            "{what} determinant is not positive at segment {t} of video {} (lambda = {lambda})",
            v.id
        )))
    }
}

fn evaluate_pair(p: &ModelParams, v: &Video, q: &Query, s: &Summary, want_grad: bool) -> Result<(f64, Option<ParamGrads>)> {
    s.check_against(v)?;
    let fwd = Forward::new(p, v, q)?;
    let h_l = p.dims.h_l;
    let mut dz = if want_grad { vec![vec![0.0; h_l]; v.len()] } else { Vec::new() };
    let mut total = 0.0;
    let mut prev: Vec<usize> = Vec::new();

    for (t, seg) in v.segments().into_iter().enumerate() {
        let y_t: Vec<usize> = s.shots().iter().copied().filter(|x| seg.contains(x)).collect();
        let ground: Vec<usize> = prev.iter().copied().chain(seg.clone()).collect();
        let k = fwd.kernel(p, ground)?;
        let prev_pos: Vec<usize> = (0..prev.len()).collect();
        let joint: Vec<usize> = prev_pos
            .iter()
            .copied()
            .chain(y_t.iter().map(|&x| prev.len() + x - seg.start))
            .collect();

        let lu_num = Lu::new(&k.l.principal(&joint));
        let lu_den = Lu::new(&k.normalizer(&prev_pos));
        total += positive_logdet(&lu_num, "selection", v, t, p.lambda)?
            - positive_logdet(&lu_den, "normalizer", v, t, p.lambda)?;

        if want_grad {
            let inv_num = lu_num.inverse().ok_or_else(|| Error::Numerical("singular selection minor".into()))?;
            let inv_den = lu_den.inverse().ok_or_else(|| Error::Numerical("singular normalizer".into()))?;
            // ∂ℓ/∂L = inv(L_Y) embedded at the selected positions − inv(L + I_t)
            let n = k.len();
            let mut g = Mat::zeros(n, n);
            g.add_scaled(-1.0, &inv_den);
            for (a, &ja) in joint.iter().enumerate() {
                for (b, &jb) in joint.iter().enumerate() {
                    g[(ja, jb)] += inv_num[(a, b)];
                }
            }
            for i in 0..n {
                let shot_i = k.ground_set[i];
                for j in 0..n {
                    let w = g[(i, j)] + g[(j, i)];
                    if w != 0.0 {
                        let zj = &fwd.z[k.ground_set[j]];
                        axpy(w, zj, &mut dz[shot_i]);
                    }
                }
            }
        }
        prev = y_t;
    }

    if !want_grad {
        return Ok((total, None));
    }

    let mut grads = p.zero_grads();
    let mut g_u = vec![0.0; p.dims.h];
    for (i, shot) in v.shots.iter().enumerate() {
        let enc = &fwd.encodings[i];
        let g_o = if p.ablation.no_emb_d {
            dz[i].clone()
        } else {
            grads.d.add_outer(1.0, &dz[i], &enc.o);
            p.d.t_matvec(&dz[i])
        };
        backprop_shot(p, &fwd.state, &shot.frames, enc, &g_o, &mut grads, &mut g_u);
    }
    grads.c.add_outer(1.0, &g_u, &fwd.state.q);
    if p.ablation.no_emb_d {
        grads.d.scale(0.0);
    }
    Ok((total, Some(grads)))
}

/// `Σ_t log P(y_t | y_{t-1})` of summary `s` for query `q` on `v`.
pub fn seq_log_likelihood(p: &ModelParams, v: &Video, q: &Query, s: &Summary) -> Result<f64> {
    evaluate_pair(p, v, q, s, false).map(|(ll, _)| ll)
}

/// Log-likelihood together with its gradient for `A`, `B`, `C` and `D`.
pub fn grad_log_likelihood(p: &ModelParams, v: &Video, q: &Query, s: &Summary) -> Result<(f64, ParamGrads)> {
    let (ll, grads) = evaluate_pair(p, v, q, s, true)?;
    Ok((ll, grads.expect("gradient requested")))
}
