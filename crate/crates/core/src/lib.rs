// Index loops over pixel grids and small matrices read better than iterator
// chains here.
#![allow(clippy::needless_range_loop)]

//! Spatio-temporal tube proposals for moving objects in video.
//!
//! The pipeline: per-frame motion-boundary maps from optical flow, geodesic
//! figure-ground proposals on those maps, dense point trajectories linked
//! through the flow, sparse trajectory affinities from maximum velocity
//! differences, random-walker label propagation to extend per-frame proposals
//! into trajectory clusters, supervoxel projection to binary pixel tubes, and
//! center-surround scoring, ranking and evaluation of the resulting pool.

pub mod affinity;
pub mod boundaries;
pub mod config;
pub mod error;
pub mod metrics;
pub mod mops;
pub mod objectness;
pub mod pipeline;
pub mod randomwalk;
pub mod trajectories;
pub mod tubes;
pub mod videoio;

pub use error::{Error, Result};
pub use videoio::{BoundingBox, FlowField, Frame, MaskFrame};
