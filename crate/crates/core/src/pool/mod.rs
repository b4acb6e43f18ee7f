//! Datasets and the labeled/unlabeled pool.

mod dataset;
pub mod io;
mod labeled;
mod synth;

pub use dataset::{Dataset, Standardizer};
pub use io::{load_csv, load_idx_pair};
pub use labeled::{DataPool, SplitPair};
pub use synth::{blob_centers, make_blobs, make_interleaved_blobs, make_two_moons};
