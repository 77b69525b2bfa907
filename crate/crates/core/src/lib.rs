//! Event-triggered diffusion cubature information filtering for distributed
//! target tracking, with consensus and diffusion baselines, Monte-Carlo
//! metrics, TUM trajectory ingestion, and a command-line front end.

pub mod cli;
pub mod config;
pub mod estimator;
pub mod fusion;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod pipeline;
pub mod replay;
pub mod report;
pub mod scenario;
pub mod trajio;
