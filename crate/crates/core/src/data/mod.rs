//! Track files, dataset manifests and the synthetic multi-domain generator.

mod manifest;
mod synthetic;
mod track_csv;

pub use manifest::{ClipEntry, Dataset, DatasetManifest, MANIFEST_VERSION};
pub use synthetic::{generate_clips, generate_dataset, oracle_classify, oracle_residuals, DomainMap, DomainSpec, GeneratedClip};
pub use track_csv::{parse_track, read_track, track_to_csv, write_track};
