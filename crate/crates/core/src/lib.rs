//! Research-leadership flow analysis.
//!
//! The crate turns bibliographic records into directed, weighted flow
//! networks between institutions, derives dyadic proximity measures
//! (geographic, cognitive, institutional, social, economic), and estimates
//! the determinants of leadership flows with censored and count regression
//! models. A synthetic-data module generates corpora and regression samples
//! from known processes so every estimator can be checked against ground
//! truth.

pub mod corpus;
pub mod econometrics;
pub mod leadership;
pub mod proximity;
pub mod synth;
pub mod topicmodel;
