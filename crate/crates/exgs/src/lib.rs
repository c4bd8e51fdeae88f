//! Gaussian-splat scene compression.
//!
//! The pipeline: score how much each splat contributes across a set of views
//! ([`significance`]), prune to a fraction of the original count under
//! per-voxel coverage guarantees ([`prune`]), optionally re-amplify the
//! survivors' opacities to compensate for removed mass, quantize everything
//! to binary16 and pack into an XZ container ([`codec`]). A tile-based CPU
//! rasterizer ([`render`]), PSNR/SSIM metrics ([`metrics`]), and a harmonic
//! hole-filler ([`restore`]) close the loop for end-to-end evaluation, and
//! [`synth`] fabricates seeded scenes so nothing here needs a dataset.
//!
//! Scenes travel as binary little-endian PLY ([`ply`]); compressed scenes as
//! the 20-byte-header container described in [`codec`]. All public
//! operations are deterministic: for fixed inputs they produce identical
//! bytes regardless of thread count (the pool is sized by `EXGS_THREADS`).

pub mod cli;
pub mod codec;
pub mod error;
pub mod img;
pub mod metrics;
pub mod model;
pub mod ply;
pub mod prune;
pub mod render;
pub mod restore;
pub mod rig;
pub mod significance;
pub mod synth;

mod fsutil;
mod parallel;

pub use error::{Error, Result};
pub use model::{Camera, Gaussian, GaussianCloud};

/// Splitmix64, fixed here so test fixtures never change behind our back.
#[cfg(test)]
pub(crate) struct TestRng(u64);

#[cfg(test)]
impl TestRng {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 24-bit resolution.
    pub fn unit(&mut self) -> f32 {
        (self.next() >> 40) as f32 / 16_777_216.0
    }
}

#[cfg(test)]
pub(crate) fn synth_test_rng(seed: u64) -> TestRng {
    TestRng(seed)
}
