//! Desk-scale simulator and evaluation harness for LLM-driven attentive
//! support in human-robot group interaction.

pub mod actions;
pub mod agent;
pub mod evalsuite;
pub mod geometry;
pub mod num;
pub mod scene;
pub mod tools;
pub mod transcript;

pub use num::Scalar;

pub type Vec3 = geometry::Vec3<f64>;
pub type BoundingVolume = geometry::BoundingVolume<f64>;
pub type Scene = scene::SceneGraph<f64>;
pub type SceneDocument = scene::SceneDocument<f64>;
pub type SceneChange = scene::SceneChange<f64>;
pub type ActionVariation = actions::ActionVariation<f64>;
pub type ActionOutcome = actions::ActionOutcome<f64>;
