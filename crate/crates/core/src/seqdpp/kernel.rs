use super::memnet::ShotEncoding;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::linalg::{dot, Lu, Mat};

/// DPP kernel over an ordered ground set of shot indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub l: Mat,
    pub ground_set: Vec<usize>,
}

impl Kernel {
    pub fn new(l: Mat, ground_set: Vec<usize>) -> Result<Self> {
        if !l.is_square() || l.rows() != ground_set.len() {
            return Err(Error::Dimension {
                context: "kernel",
                expected: ground_set.len(),
                actual: l.rows(),
            });
        }
        if !l.is_finite() {
            return Err(Error::Numerical("non-finite kernel entry".into()));
        }
        Ok(Self { l, ground_set })
    }

    /// Gram kernel `L_ij = z_iᵀz_j + λ[i=j]` over `ground_set`.
    pub fn from_embeddings(z: &[&[f64]], ground_set: Vec<usize>, lambda: f64) -> Result<Self> {
        let n = z.len();
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(z[i], z[j]);
                l[(i, j)] = v;
                l[(j, i)] = v;
            }
            l[(i, i)] += lambda;
        }
        Self::new(l, ground_set)
    }

    pub fn len(&self) -> usize {
        self.ground_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ground_set.is_empty()
    }

    /// Position of `shot` in the ground set.
    pub fn position(&self, shot: usize) -> Result<usize> {
        self.ground_set
            .iter()
            .position(|&g| g == shot)
            .ok_or(Error::IndexOutOfRange {
                context: "kernel ground set",
                index: shot,
                len: self.ground_set.len(),
            })
    }

    pub fn positions(&self, shots: &[usize]) -> Result<Vec<usize>> {
        shots.iter().map(|&s| self.position(s)).collect()
    }

    /// `log det` of the principal minor on ground-set positions `pos`;
    /// `-inf` when the minor is singular or not positive.
    pub fn log_minor(&self, pos: &[usize]) -> f64 {
        let (sign, value) = Lu::new(&self.l.principal(pos)).logdet();
        if sign > 0.0 {
            value
        } else {
            f64::NEG_INFINITY
        }
    }

    /// `L + I_t`, with `I_t` the identity zeroed at the conditioning positions.
    pub fn normalizer(&self, prev_pos: &[usize]) -> Mat {
        let mut m = self.l.clone();
        for i in 0..self.len() {
            if !prev_pos.contains(&i) {
                m[(i, i)] += 1.0;
            }
        }
        m
    }
}

/// `z = D·o`, or `o` itself when the kernel embedding is ablated.
pub(crate) fn embed(p: &ModelParams, o: &[f64]) -> Vec<f64> {
    if p.ablation.no_emb_d {
        o.to_vec()
    } else {
        p.d.matvec(o)
    }
}

/// Kernel over the given encodings, ground set `0..n`.
pub fn build_kernel(p: &ModelParams, encodings: &[ShotEncoding]) -> Result<Kernel> {
    if encodings.is_empty() {
        return Err(Error::InvalidArgument("kernel needs at least one encoding".into()));
    }
    let o_dim = p.output_dim();
    if let Some(bad) = encodings.iter().find(|e| e.o.len() != o_dim) {
        return Err(Error::Dimension {
            context: "shot encoding",
            expected: o_dim,
            actual: bad.o.len(),
        });
    }
    let z: Vec<Vec<f64>> = encodings.iter().map(|e| embed(p, &e.o)).collect();
    let refs: Vec<&[f64]> = z.iter().map(Vec::as_slice).collect();
    Kernel::from_embeddings(&refs, (0..encodings.len()).collect(), p.lambda)
}

fn split_positions(k: &Kernel, y_t: &[usize], y_prev: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let prev_pos = k.positions(y_prev)?;
    let t_pos = k.positions(y_t)?;
    if let Some(&s) = y_t.iter().find(|s| y_prev.contains(s)) {
        return Err(Error::InvalidArgument(format!(
            "shot {s} is both selected and conditioned on"
        )));
    }
    Ok((t_pos, prev_pos))
}

/// `log P(y_t | y_prev)`; `-inf` when the numerator minor is singular.
pub fn log_cond_prob(k: &Kernel, y_t: &[usize], y_prev: &[usize]) -> Result<f64> {
    let (t_pos, prev_pos) = split_positions(k, y_t, y_prev)?;
    let mut joint = prev_pos.clone();
    joint.extend_from_slice(&t_pos);
    let numerator = k.log_minor(&joint);
    let (sign, denominator) = Lu::new(&k.normalizer(&prev_pos)).logdet();
    if sign <= 0.0 {
        return Err(Error::Numerical("conditional normalizer is not positive".into()));
    }
    Ok(numerator - denominator)
}

/// `det(L_{y_t ∪ y_prev}) / det(L + I_t)`.
pub fn cond_prob(k: &Kernel, y_t: &[usize], y_prev: &[usize]) -> Result<f64> {
    log_cond_prob(k, y_t, y_prev).map(f64::exp)
}
