//! Federated structure learning for dynamic Bayesian networks.
//!
//! A DBN over `d` variables with autoregressive order `p` is parameterized by
//! an intra-slice weighted adjacency matrix `W` (constrained to a DAG) and
//! stacked inter-slice lag matrices `A = [A₁ᵀ; …; A_pᵀ]`. This crate learns
//! both from time series horizontally partitioned across `K` clients, without
//! pooling raw data:
//!
//! - [`fdbnl`] — consensus-ADMM learning of a single global model for
//!   homogeneous clients;
//! - [`pfdbnl`] — personalized variant: per-client models coupled to the
//!   global one through a proximal term, with partial participation;
//! - [`baselines`] — centralized augmented-Lagrangian solver plus
//!   average/best/pooled comparison strategies;
//! - [`datagen`] — seeded ground-truth graphs, SVAR simulation, lagged design
//!   matrices, client partitioning;
//! - [`metrics`] — SHD/TPR/FDR, client means, AUROC/AUPR over combined scores;
//! - [`numkit`] — the shared dense kernels.
//!
//! Everything numeric is generic over the floating-point [`Scalar`]; the `*64`
//! aliases fix `f64`, which the experiment CLI uses throughout.

pub mod baselines;
pub mod datagen;
pub mod dbn;
pub mod error;
pub mod fdbnl;
pub mod mat;
pub mod metrics;
pub mod numkit;
pub mod pfdbnl;
mod scalar;
mod split;

pub use error::{Error, Result};
pub use mat::Mat;
pub use scalar::Scalar;

pub type Mat64 = Mat<f64>;
pub type WeightedDbn64 = dbn::WeightedDbn<f64>;
pub type ClientDataset64 = datagen::ClientDataset<f64>;
pub type GenConfig = datagen::GenConfig;
pub type FdbnlFit64 = fdbnl::FdbnlFit<f64>;
pub type PfdbnlFit64 = pfdbnl::PfdbnlFit<f64>;
