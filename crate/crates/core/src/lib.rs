//! Differentially private decentralized consensus ADMM.
//!
//! Agents hold disjoint shards of a logistic-regression training set and
//! cooperate over an undirected graph. Three training loops are provided:
//! plain ADMM, PP-ADMM (Gaussian objective and output perturbation with an
//! inexact local solver), and IPP-ADMM (PP-ADMM whose broadcasts are gated by
//! the sparse vector technique). Privacy loss is tracked under zCDP.

pub mod accountant;
pub mod data;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod solver;
pub mod svt;
pub mod topology;

pub use error::{Error, Result};
