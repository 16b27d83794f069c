//! Query-focused video summarization.
//!
//! * [`metric`]: concept-IOU similarity, exact bipartite matching and the
//!   precision / recall / F1 built on it.
//! * [`oracle`]: greedy aggregation of several user summaries into one.
//! * [`queries`]: scenario-labelled concept-pair queries from tag statistics.
//! * [`seqdpp`]: a memory-network parameterized sequential conditional DPP,
//!   with its log-likelihood, analytic gradients and MAP inference.
//! * [`train`]: likelihood training with leave-one-video-out splits.
//! * [`synth`] and [`perturb`]: synthetic datasets with planted structure and
//!   metric perturbation experiments.

pub mod error;
pub mod linalg;
pub mod metric;
pub mod model;
pub mod oracle;
pub mod perturb;
pub mod queries;
pub mod seqdpp;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use metric::{evaluate, evaluate_multi, iou, max_weight_matching, EvalReport, MatchMode};
pub use model::{
    indicator_vector, load_dataset, save_dataset, segments, ConceptDictionary, Dataset, Query,
    Scenario, SemanticVector, Shot, Summary, Video,
};
