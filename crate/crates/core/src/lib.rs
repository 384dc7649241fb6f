//! Simulation of Earth-Moon clock networks under two architectures: a
//! broadcast hierarchy (ensemble time pushed to dependent nodes) and a
//! transactional one (atomic bilateral comparisons feeding an offset graph).

// `!(x > y)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod broadcastnet;
pub mod clockmodels;
pub mod coordmodels;
pub mod corrections;
pub mod ensemble;
pub mod error;
pub mod finetune;
pub mod relkinematics;
pub mod trace;
pub mod transactnet;
pub mod truth;
pub mod vec3;

pub use error::{Error, Result};
pub use vec3::Vec3;
