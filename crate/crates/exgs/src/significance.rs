//! Per-Gaussian significance: how much each splat matters across a set of
//! training views.
//!
//! For every ray (pixel) of every view, a splat that passes the alpha
//! threshold before blending terminates receives a credit weighted by the
//! transmittance in front of it; see [`ScoreMode`] for the two credit
//! definitions. Credits are accumulated in f64 per view, then summed over
//! views in order, so scores are reproducible for any worker count. A
//! Gaussian no ray ever hits scores exactly 0.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::{Camera, GaussianCloud};
use crate::render::{render, render_reference, RenderConfig, ScoreMode};

const FORMAT: &str = "scores";

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceVector {
    scores: Vec<f32>,
    views_used: u32,
    mode: ScoreMode,
}

impl SignificanceVector {
    pub fn new(scores: Vec<f32>, views_used: u32, mode: ScoreMode) -> Self {
        SignificanceVector {
            scores,
            views_used,
            mode,
        }
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn views_used(&self) -> u32 {
        self.views_used
    }

    pub fn mode(&self) -> ScoreMode {
        self.mode
    }
}

fn accumulate(
    cloud: &GaussianCloud,
    cameras: &[Camera],
    mode: ScoreMode,
    reference: bool,
) -> Result<SignificanceVector> {
    if cameras.is_empty() {
        return Err(Error::invalid("significance needs at least one camera"));
    }
    let cfg = RenderConfig {
        tally: Some(mode),
        ..RenderConfig::default()
    };
    let mut total = vec![0.0f64; cloud.count()];
    for cam in cameras {
        let out = if reference {
            render_reference(cloud, cam, &cfg)?
        } else {
            render(cloud, cam, &cfg)?
        };
        let tally = out
            .per_gaussian_tally
            .expect("tally was requested in the config");
        for (acc, t) in total.iter_mut().zip(&tally) {
            *acc += t.score;
        }
    }
    Ok(SignificanceVector {
        scores: total.into_iter().map(|v| v as f32).collect(),
        views_used: cameras.len() as u32,
        mode,
    })
}

/// Scores the cloud with the tiled renderer.
pub fn compute_significance(
    cloud: &GaussianCloud,
    cameras: &[Camera],
    mode: ScoreMode,
) -> Result<SignificanceVector> {
    accumulate(cloud, cameras, mode, false)
}

/// Same definition evaluated by the exhaustive per-pixel loop, with no
/// tiling and no early exit. Kept as the correctness baseline for
/// [`compute_significance`]; the two agree to f64 summation-order rounding.
pub fn compute_significance_oracle(
    cloud: &GaussianCloud,
    cameras: &[Camera],
    mode: ScoreMode,
) -> Result<SignificanceVector> {
    accumulate(cloud, cameras, mode, true)
}

/// Flat binary score file: score count as 4-byte little-endian unsigned,
/// then that many little-endian f32 scores. Nothing else.
pub fn encode_scores(scores: &[f32]) -> Result<Vec<u8>> {
    let count = u32::try_from(scores.len()).map_err(|_| {
        Error::CapacityExceeded(format!(
            "{} scores exceed the format's u32 count field",
            scores.len()
        ))
    })?;
    let mut out = Vec::with_capacity(4 + 4 * scores.len());
    out.extend_from_slice(&count.to_le_bytes());
    for s in scores {
        out.extend_from_slice(&s.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_scores(bytes: &[u8]) -> Result<Vec<f32>> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            format: FORMAT,
            expected: 4,
            actual: bytes.len() as u64,
        });
    }
    let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as u64;
    let expected = 4 + 4 * count;
    if (bytes.len() as u64) < expected {
        return Err(Error::Truncated {
            format: FORMAT,
            expected,
            actual: bytes.len() as u64,
        });
    }
    if bytes.len() as u64 > expected {
        return Err(Error::Corrupt {
            format: FORMAT,
            reason: "trailing bytes after scores".into(),
        });
    }
    Ok(bytes[4..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_scores_bin(scores: &[f32], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_scores(scores)?)
}

pub fn read_scores_bin(path: impl AsRef<Path>) -> Result<Vec<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_scores(&bytes)
}

/// Two-column CSV (`index,score`) for eyeballing score distributions.
pub fn write_scores_csv(scores: &[f32], path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::from("index,score\n");
    for (i, s) in scores.iter().enumerate() {
        text.push_str(&format!("{i},{s}\n"));
    }
    write_atomic(path.as_ref(), text.as_bytes())
}
