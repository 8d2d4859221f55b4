//! Performance modeling toolkit for a multi-domain network slicing
//! orchestration system.
//!
//! The crate has four layers:
//!
//! - [`qna`]: a scenario-agnostic analytic engine for open networks of
//!   G/G/m queues (decomposition with two-moment flow descriptors).
//! - [`nsos`]: the orchestration-system model built on top of it — entity
//!   visit ratios, transition probabilities, instance expansion and the
//!   fork/join composition of the end-to-end response time.
//! - [`dimensioning`]: a marginal-allocation greedy that finds the minimum
//!   number of cores meeting a mean-response-time objective, plus the
//!   exhaustive-search oracle it is validated against.
//! - [`des`] and [`drp`]: a discrete-event simulator that replays the
//!   orchestration call flow, and the closed-loop auto-scaler (prediction,
//!   dimensioning, boot delays, reactive triggers and request policing)
//!   evaluated inside it.

#![forbid(unsafe_code)]

pub mod des;
pub mod dimensioning;
pub mod drp;
mod linalg;
pub mod nsos;
pub mod qna;
