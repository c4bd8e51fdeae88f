//! Classical hole filling for renders of pruned scenes: pixels whose mask
//! value is below a threshold are treated as unknown and filled by Jacobi
//! iteration of the discrete Laplace equation, with trusted pixels as the
//! Dirichlet boundary.
//!
//! Unknowns start from the mean of the trusted pixels (per channel), and
//! every iterate replaces an unknown with the average of its in-bounds
//! 4-neighbors from the previous buffer. Each iterate is therefore a convex
//! combination of boundary values, so filled pixels obey the discrete
//! maximum principle at every iteration, not just at convergence. Trusted
//! pixels are copied through bit-identically.
//!
//! Double buffering plus disjoint writes make the result independent of the
//! worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::img::{GrayBuffer, RgbBuffer};
use crate::parallel;

#[derive(Debug, Clone)]
pub struct RestoreRequest {
    pub degraded: RgbBuffer,
    /// Accumulated-opacity mask; values >= `fill_threshold` are trusted.
    pub mask: GrayBuffer,
    pub fill_threshold: f32,
    pub iterations: usize,
}

impl RestoreRequest {
    pub fn new(degraded: RgbBuffer, mask: GrayBuffer) -> Self {
        RestoreRequest {
            degraded,
            mask,
            fill_threshold: 0.5,
            iterations: 200,
        }
    }
}

#[derive(Debug)]
pub struct InpaintResult {
    pub image: RgbBuffer,
    /// True when the mask marked every pixel unknown; the input is then
    /// returned unchanged because there is no boundary to diffuse from.
    pub no_boundary: bool,
}

pub fn inpaint_baseline(req: &RestoreRequest) -> Result<InpaintResult> {
    let (w, h) = (req.degraded.width(), req.degraded.height());
    if req.mask.width() != w || req.mask.height() != h {
        return Err(Error::invalid(format!(
            "mask {}x{} does not match image {w}x{h}",
            req.mask.width(),
            req.mask.height()
        )));
    }
    if w == 0 || h == 0 {
        return Err(Error::invalid("cannot inpaint an empty image"));
    }
    if !(req.fill_threshold > 0.0 && req.fill_threshold < 1.0) {
        return Err(Error::invalid(format!(
            "fill threshold must be inside (0, 1), got {}",
            req.fill_threshold
        )));
    }
    if req.iterations == 0 {
        return Err(Error::invalid("iteration count must be at least 1"));
    }

    let (w, h) = (w as usize, h as usize);
    let npx = w * h;
    let trusted: Vec<bool> = req
        .mask
        .data()
        .iter()
        .map(|&m| m >= req.fill_threshold)
        .collect();
    let trusted_count = trusted.iter().filter(|t| **t).count();

    if trusted_count == 0 {
        log::warn!("inpaint: mask has no trusted pixels, returning input unchanged");
        return Ok(InpaintResult {
            image: req.degraded.clone(),
            no_boundary: true,
        });
    }
    if trusted_count == npx {
        return Ok(InpaintResult {
            image: req.degraded.clone(),
            no_boundary: false,
        });
    }

    // Seed unknowns with the per-channel mean of trusted pixels so every
    // Jacobi iterate stays inside the boundary's value range.
    let src = req.degraded.data();
    let mut mean = [0.0f64; 3];
    for (i, t) in trusted.iter().enumerate() {
        if *t {
            for k in 0..3 {
                mean[k] += src[3 * i + k] as f64;
            }
        }
    }
    let seed: [f32; 3] = [
        (mean[0] / trusted_count as f64) as f32,
        (mean[1] / trusted_count as f64) as f32,
        (mean[2] / trusted_count as f64) as f32,
    ];

    let mut cur = vec![0.0f32; 3 * npx];
    for i in 0..npx {
        if trusted[i] {
            cur[3 * i..3 * i + 3].copy_from_slice(&src[3 * i..3 * i + 3]);
        } else {
            cur[3 * i..3 * i + 3].copy_from_slice(&seed);
        }
    }
    let mut next = cur.clone();

    for _ in 0..req.iterations {
        {
            let prev = &cur;
            let trusted = &trusted;
            parallel::run(|| {
                next.par_chunks_mut(3 * w)
                    .enumerate()
                    .for_each(|(y, row)| {
                        for x in 0..w {
                            let i = y * w + x;
                            if trusted[i] {
                                continue; // already holds the input value
                            }
                            let mut acc = [0.0f32; 3];
                            let mut n = 0.0f32;
                            let mut add = |j: usize| {
                                acc[0] += prev[3 * j];
                                acc[1] += prev[3 * j + 1];
                                acc[2] += prev[3 * j + 2];
                                n += 1.0;
                            };
                            if x > 0 {
                                add(i - 1);
                            }
                            if x + 1 < w {
                                add(i + 1);
                            }
                            if y > 0 {
                                add(i - w);
                            }
                            if i + w < npx {
                                add(i + w);
                            }
                            // n >= 1: a 1x1 image cannot reach this branch
                            // because its only pixel being unknown means no
                            // boundary existed.
                            row[3 * x] = acc[0] / n;
                            row[3 * x + 1] = acc[1] / n;
                            row[3 * x + 2] = acc[2] / n;
                        }
                    });
            });
        }
        std::mem::swap(&mut cur, &mut next);
    }

    // Clamp only filled pixels; trusted ones were never modified.
    for i in 0..npx {
        if !trusted[i] {
            for k in 0..3 {
                cur[3 * i + k] = cur[3 * i + k].clamp(0.0, 1.0);
            }
        }
    }
    Ok(InpaintResult {
        image: RgbBuffer::from_data(w as u32, h as u32, cur)?,
        no_boundary: false,
    })
}
