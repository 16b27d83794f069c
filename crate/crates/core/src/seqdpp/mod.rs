//! Memory-network sequential DPP.
//!
//! Each shot's frames are attended by the query through a memory network,
//! giving a query-conditioned representation `o`. Shots in a segment, plus
//! the shots picked in the previous segment, form the ground set of a
//! conditional DPP with Gram kernel `L = (D·O)ᵀ(D·O) + λI`.

mod inference;
mod kernel;
mod likelihood;
mod memnet;
mod params;

pub use inference::{exact_map_subset, greedy_map_subset, map_subset, summarize, Selection, EXACT_LIMIT};
pub use kernel::{build_kernel, cond_prob, log_cond_prob, Kernel};
pub use likelihood::{grad_log_likelihood, query_vector, seq_log_likelihood};
pub use memnet::{encode_shot, softmax, ShotEncoding};
pub use params::{Ablation, Dims, ModelParams, ParamGrads};
