//! Scenario simulator and experiment runner for the `etpmb` tracking
//! library: TOML scenario configuration, Monte-Carlo orchestration over
//! independent / fusion / centralized filter variants, and CSV reporting.

pub mod config;
pub mod experiment;
pub mod report;
