//! Ingestion, encoding, and splitting of claim records.
//!
//! The pipeline is: [`load_csv`] (or [`synth_generate`]) produces rows,
//! [`split_stratified`] assigns them to train/validation/test before any
//! statistic is fitted, [`fit_encoding`] learns per-feature encodings from
//! the training rows alone, and [`transform`] maps every row into the
//! [0,1] feature matrix the models consume. [`save_snapshot`] persists the
//! result with a content hash so later stages can verify provenance.

mod dataset;
mod encode;
mod snapshot;
mod synth;
mod table;

pub use dataset::{split_stratified, Dataset, SplitIndices};
pub use encode::{
    fit_encoding, infer_kinds, transform, FeatureEncoding, FeatureKind, FeatureMeta,
    TransformReport,
};
pub use snapshot::{load_snapshot, save_snapshot, Snapshot};
pub use synth::{synth_generate, SynthConfig};
pub use table::{load_csv, RawTable};
