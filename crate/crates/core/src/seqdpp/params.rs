use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Layer sizes of the summarizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Frame feature dimension.
    pub d_f: usize,
    /// Query indicator dimension (dictionary size).
    pub d_q: usize,
    /// Frames per shot.
    #[serde(rename = "K")]
    pub k: usize,
    /// Memory / query embedding size.
    pub h: usize,
    /// Shot representation size.
    pub h_o: usize,
    /// Kernel embedding size.
    #[serde(rename = "h_L")]
    pub h_l: usize,
}

impl Dims {
    /// Same size for all three embeddings.
    pub fn uniform(d_f: usize, d_q: usize, k: usize, h: usize) -> Self {
        Self {
            d_f,
            d_q,
            k,
            h,
            h_o: h,
            h_l: h,
        }
    }
}

/// Component ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Uniform attention over frames, with the query embedding appended to
    /// the shot representation.
    #[serde(default)]
    pub no_attention: bool,
    /// Kernel built directly on shot representations, `L_ij = o_iᵀ o_j`.
    #[serde(default, rename = "no_emb_D")]
    pub no_emb_d: bool,
}

/// Embedding matrices of the memory network and the DPP kernel.
///
/// * `a`: `h × d_f`, frames to memory vectors
/// * `b`: `h_o × d_f`, frames to output vectors
/// * `c`: `h × d_q`, query to internal state
/// * `d`: `h_L × o_dim`, shot representation to kernel embedding
///
/// `o_dim` is `h_o`, or `h_o + h` under [`Ablation::no_attention`]. Under
/// [`Ablation::no_emb_d`], `d` is the identity and stays fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    pub lambda: f64,
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub ablation: Ablation,
    pub seed: u64,
}

impl ModelParams {
    /// Entries uniform in `[-scale, scale]`, divided by `√fan_in`.
    pub fn random(dims: Dims, lambda: f64, ablation: Ablation, scale: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o_dim = output_dim(&dims, ablation);
        let mut init = |rows: usize, cols: usize| {
            let s = scale / (cols as f64).sqrt();
            Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0) * s)
        };
        let a = init(dims.h, dims.d_f);
        let b = init(dims.h_o, dims.d_f);
        let c = init(dims.h, dims.d_q);
        let (d, dims) = if ablation.no_emb_d {
            (Mat::identity(o_dim), Dims { h_l: o_dim, ..dims })
        } else {
            (init(dims.h_l, o_dim), dims)
        };
        let params = Self {
            dims,
            lambda,
            a,
            b,
            c,
            d,
            ablation,
            seed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn output_dim(&self) -> usize {
        output_dim(&self.dims, self.ablation)
    }

    pub fn validate(&self) -> Result<()> {
        let Dims { d_f, d_q, h, h_o, h_l, .. } = self.dims;
        let o_dim = self.output_dim();
        let check = |name: &'static str, m: &Mat, rows: usize, cols: usize| -> Result<()> {
            if m.shape() != (rows, cols) {
                return Err(Error::Dimension {
                    context: name,
                    expected: rows * cols,
                    actual: m.rows() * m.cols(),
                });
            }
            if !m.is_finite() {
                return Err(Error::Numerical(format!("non-finite entry in {name}")));
            }
            Ok(())
        };
        check("A", &self.a, h, d_f)?;
        check("B", &self.b, h_o, d_f)?;
        check("C", &self.c, h, d_q)?;
        check("D", &self.d, h_l, o_dim)?;
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn zero_grads(&self) -> ParamGrads {
        ParamGrads {
            a: Mat::zeros(self.a.rows(), self.a.cols()),
            b: Mat::zeros(self.b.rows(), self.b.cols()),
            c: Mat::zeros(self.c.rows(), self.c.cols()),
            d: Mat::zeros(self.d.rows(), self.d.cols()),
        }
    }

    /// `self += step · grads`; `D` stays fixed under `no_emb_D`.
    pub fn apply(&mut self, step: f64, grads: &ParamGrads) {
        self.a.add_scaled(step, &grads.a);
        self.b.add_scaled(step, &grads.b);
        self.c.add_scaled(step, &grads.c);
        if !self.ablation.no_emb_d {
            self.d.add_scaled(step, &grads.d);
        }
    }

    pub fn to_checkpoint_json(&self) -> String {
        let file = CheckpointFile {
            dims: self.dims,
            lambda: self.lambda,
            a: self.a.as_slice().to_vec(),
            b: self.b.as_slice().to_vec(),
            c: self.c.as_slice().to_vec(),
            d: self.d.as_slice().to_vec(),
            seed: self.seed,
            ablation: self.ablation,
        };
        let mut out = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
        out.push('\n');
        out
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "checkpoint".into(),
            message: e.to_string(),
        })?;
        let dims = file.dims;
        let o_dim = output_dim(&dims, file.ablation);
        let mat = |name: &'static str, data: Vec<f64>, rows: usize, cols: usize| {
            if data.len() != rows * cols {
                return Err(Error::Dimension {
                    context: name,
                    expected: rows * cols,
                    actual: data.len(),
                });
            }
            Ok(Mat::from_vec(rows, cols, data))
        };
        let params = Self {
            a: mat("A", file.a, dims.h, dims.d_f)?,
            b: mat("B", file.b, dims.h_o, dims.d_f)?,
            c: mat("C", file.c, dims.h, dims.d_q)?,
            d: mat("D", file.d, dims.h_l, o_dim)?,
            dims,
            lambda: file.lambda,
            ablation: file.ablation,
            seed: file.seed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_json(&text)
    }
}

fn output_dim(dims: &Dims, ablation: Ablation) -> usize {
    if ablation.no_attention {
        dims.h_o + dims.h
    } else {
        dims.h_o
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    dims: Dims,
    lambda: f64,
    #[serde(rename = "A")]
    a: Vec<f64>,
    #[serde(rename = "B")]
    b: Vec<f64>,
    #[serde(rename = "C")]
    c: Vec<f64>,
    #[serde(rename = "D")]
    d: Vec<f64>,
    seed: u64,
    #[serde(default)]
    ablation: Ablation,
}

/// Gradients with the same shapes as the parameter matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl ParamGrads {
    pub fn add(&mut self, other: &ParamGrads) {
        self.a.add_scaled(1.0, &other.a);
        self.b.add_scaled(1.0, &other.b);
        self.c.add_scaled(1.0, &other.c);
        self.d.add_scaled(1.0, &other.d);
    }

    pub fn scale(&mut self, alpha: f64) {
        self.a.scale(alpha);
        self.b.scale(alpha);
        self.c.scale(alpha);
        self.d.scale(alpha);
    }

    pub fn norm(&self) -> f64 {
        (self.a.frobenius_sq() + self.b.frobenius_sq() + self.c.frobenius_sq() + self.d.frobenius_sq())
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn matrices(&self) -> [(&'static str, &Mat); 4] {
        [("A", &self.a), ("B", &self.b), ("C", &self.c), ("D", &self.d)]
    }
}
