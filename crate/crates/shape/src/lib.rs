//! Object-category shape modelling for dual-arm grasping.
//!
//! A canonical point cloud is registered non-rigidly to training instances
//! ([`cpd`]), the resulting deformation fields are compressed into a linear
//! latent space ([`space`]), and novel partial observations are explained by
//! a latent vector plus a rigid pose ([`infer`]). Grasp poses annotated on
//! the canonical model follow the inferred deformation ([`grasp`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod cpd;
pub mod error;
pub mod grasp;
pub mod infer;
pub mod pca;
pub mod pose;
pub mod space;
pub mod synthetic;

pub use cloud::PointCloud;
pub use cpd::{cpd_register, CpdParams, DeformationField, KernelBasis};
pub use error::{Error, Result};
pub use grasp::{warp_grasp_poses, warp_pose, GraspPoses};
pub use infer::{infer_latent, InferenceParams, LatentDescriptor, Weighting};
pub use pca::{pca_em, Pca, PcaParams};
pub use pose::{estimate_initial_pose, estimate_pose_against, estimate_upright_pose};
pub use space::{build_from_fields, build_shape_space, ShapeSpace, DEFAULT_COMPONENTS};
