//! Model-aware K-center selection over pre-computed embeddings.
//!
//! Given a seed set of feature vectors and a larger unlabeled pool, this
//! crate picks a budget-sized subset of the pool that favours hard samples
//! (high expected contrastive loss), rejects samples far from the seed
//! distribution, and spreads the picks out with farthest-first K-center
//! greedy.
//!
//! The crate is `no_std` with `alloc`. Enable the `parallel` feature to
//! spread the per-row loops over a rayon pool; results do not depend on the
//! number of workers.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

mod error;
mod math;
mod par;

pub mod contrastive;
pub mod diagnostics;
pub mod embedding;
pub mod metric;
pub mod prototypes;
pub mod selection;
pub mod synth;

pub use contrastive::{
    ecle, repeat_losses, simclr_loss, EcleOptions, LossTable, NegativeBank, ViewLossInputs,
};
pub use diagnostics::{
    compare_strategies, pca_2d, phi_metric, selection_diagnostics, Comparison, Group,
    GroupPartition, SelectionDiagnostics, StrategyRow,
};
pub use embedding::{DatasetRole, EmbeddingSet, Points, Stacked};
pub use error::{Error, Result, Warning};
pub use metric::{distance, nearest_distances, standardize, Distance, Standardized};
pub use prototypes::{kmeans, PrototypeSet};
pub use selection::{
    evaluate_objective, kcenter_exact, kcenter_greedy, mak_select, plain_kcenter_select,
    proximity_scores, random_select, ExactCover, ObjectiveTerms, Scoring, SelectionConfig,
    SelectionResult, Strategy, Terms,
};
pub use synth::{generate_mixture, CANONICAL_BUDGET, LossMode, Mixture, MixtureSpec, OodSpec, SizeProfile, SyntheticLossModel};
