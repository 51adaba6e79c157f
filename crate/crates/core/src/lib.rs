//! Design and analysis toolkit for a modular force-feedback hand exoskeleton: linkage
//! sizing against a planar finger model, transmission and actuation models, softness
//! rendering, task replays and the statistics used to evaluate the device.
//!
//! Geometry, kinematics, the linkage search, the transmission maps and the softness
//! controller are generic over [`scalar::Real`] (`f32` or `f64`). Anthropometry, latency
//! sampling, simulation and statistics use `f64`. The aliases below fix the generic types to
//! `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anthro;
pub mod config;
pub mod controller;
pub mod error;
pub mod geometry;
pub mod handmodel;
pub mod linksearch;
pub mod scalar;
pub mod sim;
pub mod stats;
pub mod transmission;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point = geometry::Point2<f64>;
pub type FingerSpec = handmodel::FingerSpec<f64>;
pub type JointAngles = handmodel::JointAngles<f64>;
pub type JointRange = handmodel::JointRange<f64>;
pub type FingerPose = handmodel::FingerPose<f64>;
pub type LinkageConfig = linksearch::LinkageConfig<f64>;
pub type SearchOptions = linksearch::SearchOptions<f64>;
pub type Verdict = linksearch::Verdict<f64>;
pub type FeasibilityCell = linksearch::FeasibilityCell<f64>;
pub type FeasibilityGrid = linksearch::FeasibilityGrid<f64>;
pub type BevelMap = transmission::BevelMap<f64>;
pub type PulleyState = transmission::PulleyState<f64>;
pub type SoftnessParams = controller::SoftnessParams<f64>;
pub type SoftnessLevel = controller::SoftnessLevel<f64>;
pub type SoftnessLevels = controller::SoftnessLevels<f64>;
