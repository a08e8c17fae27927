//! Multi-sensor extended-target tracking with Poisson multi-Bernoulli
//! filters.
//!
//! Each sensor runs an independent tracker whose posterior is a PMB density:
//! a Poisson point process for targets not yet detected plus one Bernoulli
//! component per detected target. Target extents are star-convex contours
//! modeled by a Gaussian process over support angles and estimated with an
//! EKF; measurement rates carry conjugate gamma densities. Posteriors from
//! several sensors are combined by weighted Kullback-Leibler averaging with
//! a minimum-divergence fusion map, so the system degrades gracefully when
//! sensors only partially share a field of view.
//!
//! The crate also ships the supporting pieces needed to exercise the
//! tracker end to end: a planar Lidar-style simulator, a rectangular
//! min-cost assignment solver, DBSCAN clustering for measurement cells, and
//! the GOSPA / IOU evaluation metrics.

pub mod assignment;
pub mod dbscan;
pub mod ekf;
pub mod error;
pub mod filter;
pub mod fusion;
pub mod gp;
pub mod metrics;
pub mod rfs;
pub mod rng;
pub mod sector;
pub mod sim;

pub use error::{Error, Result};
