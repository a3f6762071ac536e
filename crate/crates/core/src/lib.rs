//! Lighting-invariant template matching with Asplund's double-sided probing
//! distance in the logarithmic image processing (LIP) model.
//!
//! * [`lip`]: bounded grey-scale arithmetic (transmittance, addition,
//!   scalar multiplication, LIP logarithm).
//! * [`metrics`]: Asplund distances for grey, colour and multivariate values
//!   and regions, with or without a tolerance to outliers.
//! * [`probe_map`]: sliding-window distance maps.
//! * [`matching`]: regional minima, h-minima, match extraction and overlays.
//! * [`io`]: PGM/PPM/PNG images, PFM maps and match lists.
//! * [`synth`]: synthetic scenes and perturbations (relighting, drift, noise).
//!
//! The guide in `book/` walks through the model; its code blocks are compiled
//! and run as doctests of this crate.

pub mod error;
pub mod image;
pub mod io;
pub mod lip;
pub mod matching;
pub mod metrics;
pub mod probe_map;
pub mod synth;

pub use crate::error::{Error, Result};
pub use crate::image::{Image, Rect, Region};
pub use crate::lip::GrayScale;
pub use crate::matching::{Match, MatchParams, MatchSet};
pub use crate::metrics::{ProbeBounds, Tolerance, TolerantDistance};
pub use crate::probe_map::{distance_map, distance_map_tol, map_minimum, DistanceMap, MapEngine, Probe, ProbeShape};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lip-model.md")]
    mod lip_model {}
    #[doc = include_str!("../../../book/src/asplund-distance.md")]
    mod asplund_distance {}
    #[doc = include_str!("../../../book/src/tolerance.md")]
    mod tolerance {}
    #[doc = include_str!("../../../book/src/distance-maps.md")]
    mod distance_maps {}
    #[doc = include_str!("../../../book/src/matching.md")]
    mod matching {}
    #[doc = include_str!("../../../book/src/synthetic-scenes.md")]
    mod synthetic_scenes {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    mod file_formats {}
}
