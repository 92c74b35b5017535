//! Air traffic flow assignment for multi-layer urban air mobility networks,
//! balancing demand fulfillment against community noise increase and energy
//! use under capacity constraints.
//!
//! The pipeline: NPD-regression acoustics ([`acoustics`]) feed a
//! link-to-community noise impact matrix ([`exposure`]); the corridor network
//! and its incidence matrices ([`network`]), the mission energy model
//! ([`energy`]), and fairness-threshold welfare objectives ([`welfare`])
//! assemble into a nonconvex flow-assignment problem solved by a
//! convex-concave procedure over linear programs ([`optimizer`], [`lp`]).
//! Parameter sweeps, Pareto filtering, and design comparisons live in
//! [`harness`]; scenario files, synthetic scenario generation, and exports in
//! [`scenario`], [`synth`], and [`export`].

pub mod acoustics;
pub mod energy;
pub mod exposure;
pub mod export;
pub mod geom;
pub mod harness;
pub mod lp;
pub mod matrix;
pub mod network;
pub mod optimizer;
pub mod scenario;
pub mod synth;
pub mod welfare;
