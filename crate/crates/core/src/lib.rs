//! Two-color multiphoton photoemission from nanotips: channel-resolved
//! perturbative amplitudes, direct few-level propagation, experiment
//! campaigns and their analysis.
//!
//! Units throughout: eV, fs, nm, V/nm (fields), W/cm² (intensities),
//! degrees (polarization angles), e·nm (dipoles).

// `!(x > 0)` style checks are meant to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod dyson;
pub mod error;
pub mod grid;
pub mod io;
pub mod levels;
pub mod pulse;
pub mod scalar;
pub mod scans;
pub mod tdse;
pub mod units;

pub use dyson::{ChannelAmplitude, ChannelSpec, FringeParams};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use levels::{FinalStates, LevelSystem};
pub use pulse::{PulseSpec, TwoColorField};
pub use scalar::Real;
pub use scans::{ScanConfig, ScanResult};
pub use tdse::StateVector;
pub use units::{TipSpec, UnitSystem};

/// Double-precision aliases.
pub type Pulse = PulseSpec<f64>;
pub type Field = TwoColorField<f64>;
pub type Levels = LevelSystem<f64>;
pub type Grid = TimeGrid<f64>;
pub type Tip = TipSpec<f64>;
pub type Config = ScanConfig<f64>;
pub type Scan = ScanResult<f64>;
pub type Amplitude = ChannelAmplitude<f64>;

/// Single-precision aliases.
pub type Pulse32 = PulseSpec<f32>;
pub type Field32 = TwoColorField<f32>;
pub type Levels32 = LevelSystem<f32>;
pub type Grid32 = TimeGrid<f32>;
