//! File formats and run configuration: operator cache, checkpoints, time
//! series, CSV tables.

mod binary;
pub mod cache;
pub mod checkpoint;
pub mod config;
pub mod series;
pub mod table;

pub use cache::{load_operators, read_operators, save_operators, write_operators, CacheHeader};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{RunConfig, SeedKind};
pub use series::{fmt_f64, read_frames, read_frames_csv, write_frame, write_frame_csv, Frame};
pub use table::{Cell, Table};
