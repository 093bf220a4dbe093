//! Preference generators and popularity models.

pub mod models;
pub mod popularity;
pub mod seed;

pub use models::{BuiltInstance, ModelDescriptor, ModelSpec, WeightSpec};
pub use popularity::{GaussianModel, LogWeights, PopularityModel, RmQw};
pub use seed::{StreamKey, StreamRng};
