//! Configuration parsing and result persistence.

pub mod config;
pub mod output;

pub use config::{parse_config, serialize_config, ParsedConfig};
pub use output::{
    digest_file, write_manifest, write_outputs, write_scan_csv, write_summary_json, FileDigest,
    RunManifest,
};
