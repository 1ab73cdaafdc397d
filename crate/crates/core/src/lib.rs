//! Evidential multi-view classification with conflict-aware discount fusion.
//!
//! Each view of a sample gets its own small network that outputs non-negative
//! *evidence* over the classes. Evidence defines a Dirichlet distribution
//! (`α = e + 1`) and, through subjective logic, an opinion with an explicit
//! uncertainty mass. Per-view opinions are fused — either by Dempster's rule
//! or by a reliability-discounted aggregation with learnable per-view weights
//! — and the whole stack trains end-to-end against an evidential objective
//! (expected cross-entropy plus an annealed regularizer that flattens
//! misleading evidence). Missing views are filled by class-center imputation
//! before training and by nearest-center matching at test time.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`] — `ln Γ`, digamma, trigamma, finite-difference checks;
//! * [`opinion`] — evidence, Dirichlet parameters, opinions;
//! * [`fusion`] — Dempster's rule (restricted and general set-based forms),
//!   discount aggregation, learnable fusion weights;
//! * [`data`] — the multi-view dataset container, JSON-lines serialization,
//!   synthetic generation, masking and corruption;
//! * [`impute`] — class-center imputation for train and test;
//! * [`mlp`] — per-view evidence networks with manual backprop;
//! * [`loss`] — the evidential objective and its analytic gradients;
//! * [`train`] — Adam training loop, prediction, evaluation;
//! * [`par`] — rayon-backed data parallelism behind the `parallel` feature.

pub mod data;
pub mod error;
pub mod fusion;
pub mod impute;
pub mod loss;
pub mod mlp;
pub mod numerics;
pub mod opinion;
pub mod par;
pub mod train;

pub use error::{Error, Result};
pub use opinion::{DirichletParams, Evidence, Opinion};
