//! Experiment runner library for the graphical mean curvature flow solver.
//!
//! The binary wires named, reproducible experiments over the solver crate:
//! existence and perturbation pipelines, kernel-bound certification,
//! contraction measurement, norm self-tests, and oracle cross-validation.
//! Everything an experiment asserts lands in its JSON summary; outputs are
//! written atomically and are byte-identical across reruns with the same
//! configuration and seed.

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;
