//! Hybrid neural/physical relighting of articulated hand meshes.
//!
//! A physically based branch computes texel-aligned diffuse and specular
//! shading features from refined geometry and a GGX BRDF. A neural branch
//! turns those features into gain and bias maps through a convolutional
//! network with no bias terms and no activations on the lighting path, so
//! the rendered image is exactly linear in the light intensities. Anything
//! trained on point lights therefore relights correctly under environment
//! maps, which are just large light sets.

pub mod config;
pub mod geometry;
pub mod image_io;
pub mod linearnet;
pub mod math;
pub mod pipeline;
pub mod scalar;
pub mod shading;
pub mod synthdata;
pub mod training;
pub mod tensor;

pub use scalar::Scalar;

pub type Tensor32 = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type Graph32 = tensor::Graph<f32>;
pub type Graph64 = tensor::Graph<f64>;
