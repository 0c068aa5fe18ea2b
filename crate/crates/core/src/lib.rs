//! Deterministic simulator and benchmark harness for check-to-use races in
//! browser-driving agents.
//!
//! An agent observes a page, spends planning latency deciding, then acts —
//! while the page keeps evolving on its own schedule. This crate reproduces
//! that whole loop at desk scale on a virtual clock: a simplified page model
//! with hit-testing, timed mutation schedules, a monitoring channel for
//! pre-execution validation, scripted agent policies, a bundled scenario
//! suite with oracles, and a closed-form + Monte Carlo model of the residual
//! attack window left after validation.

pub mod agent;
pub mod harness;
pub mod monitor;
pub mod mutation;
pub mod page;
pub mod rng;
pub mod runner;
pub mod scenario;
pub mod stress;
