//! Spiking neural resonators for FMCW radar range–angle estimation.
//!
//! The crate is `no_std` (with `alloc`) and holds every numerical piece of
//! the pipeline:
//!
//! ```text
//! Scene ──synthesize──▶ ChirpFrame ──▶ dendritic projection ──▶ RF resonator grid
//!                              │                                     │
//!                              ▼                                     ▼
//!                           ft_map                      envelope / gradient ──▶ spike codec
//!                              │                                     │
//!                              └───────────▶ RangeAngleMap ◀─────────┘
//!                                                │
//!                                         CA-CFAR ──▶ score / SNR
//! ```
//!
//! File formats, thread-parallel drivers and the command line live in the
//! companion `resonet` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cfar;
pub mod codec;
pub mod dft;
mod error;
pub mod eval;
pub mod pipeline;
pub mod resonator;
pub mod signal;
pub mod sweep;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
