//! Configuration parsing, file formats and run manifests.

pub mod config;
pub mod manifest;
pub mod snapshot;
pub mod timeseries;

pub use config::{config_to_json, parse_config};
pub use manifest::{RunCommand, RunManifest, MANIFEST_FILE};
pub use snapshot::{read_snapshot, write_snapshot};
pub use timeseries::{read_timeseries, write_timeseries, TimeseriesRow, TIMESERIES_HEADER};
