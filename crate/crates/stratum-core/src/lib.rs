//! Lifecycle management for ML analytics pipelines across cloud-fog-edge
//! topologies: a declarative pipeline language, constraint validation,
//! cost-minimal placement, deterministic deployment manifests, and a
//! closed-loop elasticity simulation.

pub mod codegen;
pub mod controller;
pub mod lang;
pub mod placement;
pub mod registry;
pub mod sim;
pub mod topology;
pub mod validate;
