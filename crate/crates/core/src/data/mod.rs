//! CSV ingestion, split conventions, windowing and synthetic datasets.

mod dataset;
mod registry;
mod scenario;
mod synthetic;
mod windows;

pub use dataset::{load_csv, read_csv, SeriesDataset, Split, SplitConvention};
pub use registry::{dataset_registry, known_datasets, DatasetInfo};
pub use scenario::{gen_scenario, ScenarioKind, ScenarioSpec};
pub use synthetic::{gen_synthetic, Sinusoid, SyntheticKind, SyntheticSpec, Waveform, AMPLITUDE_RANGE, DEFAULT_SLOPE, FREQ_BAND};
pub use windows::{
    assemble_rows, make_pair, segment, window_origins, window_refs, windows, Direction, DirectionPolicy, WindowPair,
    WindowRef,
};
