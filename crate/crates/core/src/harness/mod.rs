//! Monte Carlo drivers: packet loss rate sweeps, singleton micro-experiments
//! and CSV output.

mod output;
mod settings;
mod singleton;
mod stats;
mod sweep;

pub use output::{emit_analysis_csv, emit_csv, emit_singleton_csv, read_analysis_csv, read_csv, read_singleton_csv};
pub use settings::{parse_ka_range, Settings};
pub use singleton::{run_singleton_experiment, SingletonRecord, SingletonSpec, SlotModel};
pub use stats::{wilson_interval, Z_95};
pub use sweep::{run_plr_sweep, run_plr_sweep_with_workers, PlrRecord, SweepSpec};
