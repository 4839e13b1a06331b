//! Fast 2-D complex Gabor filter banks and Gaussian-windowed localized
//! sliding DFTs.
//!
//! Every 2-D filter here is evaluated as two 1-D stages. Each stage
//! demodulates its input with a per-coordinate cosine/sine table, smooths the
//! two resulting real signals with a 1-D Gaussian, and remodulates. The bank
//! scheduler then reuses the horizontal intermediate of orientation `θ` for
//! `π − θ` through complex conjugation, and the sliding-DFT scheduler reuses
//! horizontal intermediates across the whole rectangular frequency grid.
//!
//! Modules:
//!
//! * [`image`] / [`io`]: image containers, PGM and GBNK container I/O.
//! * [`smoothing`]: the pluggable 1-D Gaussian engine (recursive, FIR, box).
//! * [`gabor`]: single-filter horizontal and vertical stages.
//! * [`bank`]: filter-bank scheduling with and without conjugate reuse.
//! * [`sdft`]: the Gaussian-windowed 2-D localized sliding DFT.
//! * [`oracle`]: brute-force references used as ground truth.
//! * [`metrics`]: SER, operation counters and complexity fits.
//! * [`bench`]: timing and counting sweeps shared by the CLI and the tests.

pub mod bank;
pub mod bench;
pub mod cli;
pub mod error;
pub mod gabor;
pub mod image;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod sdft;
pub mod smoothing;
mod stage;

pub use crate::bank::{
    compute_bank, compute_bank_noreuse, conjugate_image, vertical_stage_conjugate, BankOutput,
    BankSpec, SigmaRule,
};
pub use crate::error::{Error, Result};
pub use crate::gabor::{gabor_filter, horizontal_stage, vertical_stage, GaborParams, HorizontalStage};
pub use crate::image::{ComplexImage, RealImage};
pub use crate::metrics::{OpCounters, Part};
pub use crate::sdft::{sdft_bin, sdft_full, sdft_horizontal, SdftOutput, SdftSpec};
pub use crate::smoothing::{make_coeffs, smooth_1d, smooth_pair_1d, GaussianCoeffs, SmootherKind};
