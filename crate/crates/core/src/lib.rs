//! Multisite computation-offloading toolkit.
//!
//! Profiles heterogeneous compute nodes (mobile-class, cloudlet, remote
//! cloud), scores them with a composite offloading-score model, partitions a
//! divisible text-search task proportionally across eligible nodes, and
//! executes it in several offloading modes over either an analytic link
//! model or a real framed-TCP transport.

pub mod decision;
pub mod domain;
pub mod harness;
pub mod net;
pub mod orchestrator;
pub mod profiler;
pub mod rng;
pub mod workload;
