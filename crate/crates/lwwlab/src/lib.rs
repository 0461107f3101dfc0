//! Exact enumeration, loop measures, heaps of cycles and lace-expansion
//! coefficients for the loop-weighted walk.

pub mod analysis;
pub mod enumerate;
pub mod error;
pub mod expansion;
pub mod heaps;
pub mod laces;
pub mod oracle;
pub mod sampling;
pub mod series;
pub mod verify;
pub mod walk;

pub use error::{LwwError, Result};
pub use series::{Q, SpatialSeries, ZSeries};
pub use walk::{GraphCtx, LoopActivity, Point, Walk};
