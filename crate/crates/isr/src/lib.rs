//! File formats, run manifests, experiment drivers and the `isr` command line over `isr-core`.

use std::time::Instant;

pub mod ablate;
pub mod cli;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod verify;

pub use error::{Error, Result};

/// Wall-clock time since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl isr_core::trainer::Clock for WallClock {
    fn elapsed_ms(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}
