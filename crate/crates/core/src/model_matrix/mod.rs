//! Tabular ingestion and the centered `(y, X, S)` design.

mod encode;
mod raw;
mod schema;
mod synth;

pub use encode::{encode, BlockEncoding, ColumnEncoding, Encoder, ModelMatrices, ResponseEncoding};
pub use raw::{load_csv, load_csv_columns, read_csv, read_csv_columns, Column, RawDataset};
pub use schema::{ResolvedSchema, ScaleFlags, Schema};
pub use synth::{
    example_schema, synth_example, EXAMPLE_CORRELATION, LINEAR_COEFFICIENTS, LINEAR_NOISE_SD,
    LOGISTIC_COEFFICIENTS, LOGISTIC_INTERCEPT,
};
