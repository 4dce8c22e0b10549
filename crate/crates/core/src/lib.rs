//! Point-cloud instance grouping from semantic labels only.
//!
//! The crate covers the algorithmic (non-neural) half of a weakly supervised
//! instance segmentation pipeline:
//!
//! * [`cluster`]: semantic-consistent BFS clustering and size-band sample selection,
//! * [`objectness`]: multilevel shape-aware objectness labels and recomposed scenes,
//! * [`signals`]: oracle stand-ins for network outputs, noise, and the training losses,
//! * [`aoia`]: asymmetric core/boundary inference with influence maps,
//! * [`eval`]: AP / mAP / precision / recall over instance clusterings,
//! * [`pcio`]: the text file formats every stage reads and writes.
//!
//! With the default `parallel` feature the heavy loops run on rayon; without
//! it every operation falls back to a sequential path with identical output.

pub mod aoia;
pub mod cli;
pub mod cluster;
pub mod error;
pub mod eval;
pub mod objectness;
pub mod pcio;
pub mod reduce;
pub mod shapes;
pub mod signals;
pub mod spatial;

mod parallel;

pub use error::{Error, Result};
pub use pcio::{CategoryConfig, Cluster, Clustering, LabeledCloud, ScoreMatrix, SignalSet};

/// A point in meters.
pub type Point3 = [f64; 3];

#[inline]
pub(crate) fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub(crate) fn dist(a: &Point3, b: &Point3) -> f64 {
    dist2(a, b).sqrt()
}
