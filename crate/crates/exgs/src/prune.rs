//! Voxel-guaranteed pruning: keep the highest-scoring Gaussians under a
//! global budget while guaranteeing spatial coverage, then optionally
//! amplify surviving opacities to compensate for removed mass.
//!
//! Selection is decided by three deterministic rules, applied to scores with
//! ties broken toward the lower index:
//!
//! 1. every voxel keeps its top `floor(|V| * keep_ratio)` members, at least
//!    one if the voxel has `min_voxel_count` or more members;
//! 2. if fewer than `floor(N * keep_ratio)` Gaussians are selected, the
//!    best unselected ones fill the budget globally;
//! 3. in [`BudgetMode::Exact`] the weakest selected ones are dropped back to
//!    the budget, except sole survivors of voxels covered by rule 1's
//!    guarantee.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::{activate_opacity, opacity_to_logit, GaussianCloud};

/// Spatial hash of Gaussian means over a uniform grid.
#[derive(Debug, Clone)]
pub struct VoxelIndex {
    voxel_size: f32,
    origin: [f32; 3],
    /// Member indices per voxel, in ascending index order.
    buckets: Vec<Vec<u32>>,
    coords: Vec<[i64; 3]>,
    /// Bucket id for each Gaussian.
    point_bucket: Vec<u32>,
}

impl VoxelIndex {
    pub fn voxel_size(&self) -> f32 {
        self.voxel_size
    }

    pub fn origin(&self) -> [f32; 3] {
        self.origin
    }

    pub fn voxel_count(&self) -> usize {
        self.buckets.len()
    }

    /// Voxel id containing Gaussian `i`.
    pub fn bucket_of(&self, i: usize) -> usize {
        self.point_bucket[i] as usize
    }

    pub fn members(&self, bucket: usize) -> &[u32] {
        &self.buckets[bucket]
    }

    /// Integer grid coordinate of a voxel.
    pub fn coord(&self, bucket: usize) -> [i64; 3] {
        self.coords[bucket]
    }

    /// (coordinate, members) pairs in ascending coordinate order.
    pub fn sorted_buckets(&self) -> Vec<([i64; 3], &[u32])> {
        let mut out: Vec<([i64; 3], &[u32])> = self
            .coords
            .iter()
            .zip(&self.buckets)
            .map(|(c, b)| (*c, b.as_slice()))
            .collect();
        out.sort_unstable_by_key(|(c, _)| *c);
        out
    }
}

/// Voxel edge so the scene's longest bounding-box edge spans 64 cells.
/// Falls back to 1.0 for degenerate (single-point or empty) extents.
pub fn auto_voxel_size(cloud: &GaussianCloud) -> f32 {
    let means = cloud.means();
    if means.is_empty() {
        return 1.0;
    }
    let mut lo = [f32::INFINITY; 3];
    let mut hi = [f32::NEG_INFINITY; 3];
    for p in means.chunks_exact(3) {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let longest = (0..3).map(|k| hi[k] - lo[k]).fold(0.0f32, f32::max);
    if longest > 0.0 && longest.is_finite() {
        longest / 64.0
    } else {
        1.0
    }
}

/// Assigns each Gaussian to the voxel containing its mean.
pub fn voxelize(cloud: &GaussianCloud, voxel_size: f32) -> Result<VoxelIndex> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::invalid(format!(
            "voxel size must be positive and finite, got {voxel_size}"
        )));
    }
    let means = cloud.means();
    if !means.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("cloud contains non-finite means"));
    }
    let mut origin = [0.0f32; 3];
    if !cloud.is_empty() {
        origin = [f32::INFINITY; 3];
        for p in means.chunks_exact(3) {
            for k in 0..3 {
                origin[k] = origin[k].min(p[k]);
            }
        }
    }

    let mut ids: HashMap<[i64; 3], u32> = HashMap::new();
    let mut buckets: Vec<Vec<u32>> = Vec::new();
    let mut coords: Vec<[i64; 3]> = Vec::new();
    let mut point_bucket = Vec::with_capacity(cloud.count());
    for (i, p) in means.chunks_exact(3).enumerate() {
        let mut c = [0i64; 3];
        for k in 0..3 {
            c[k] = (((p[k] - origin[k]) / voxel_size).floor()) as i64;
        }
        let id = *ids.entry(c).or_insert_with(|| {
            buckets.push(Vec::new());
            coords.push(c);
            (buckets.len() - 1) as u32
        });
        buckets[id as usize].push(i as u32);
        point_bucket.push(id);
    }
    Ok(VoxelIndex {
        voxel_size,
        origin,
        buckets,
        coords,
        point_bucket,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMode {
    /// Kept count is exactly `floor(N * keep_ratio)` unless per-voxel
    /// guarantees alone exceed it.
    Exact,
    /// Per-voxel guarantees may push the kept count above the budget.
    GuaranteedOver,
}

#[derive(Debug, Clone)]
pub struct PruneConfig {
    /// Fraction of Gaussians to keep, in (0, 1].
    pub keep_ratio: f32,
    /// Voxel edge length; `None` chooses [`auto_voxel_size`].
    pub voxel_size: Option<f32>,
    /// Voxels with at least this many members always keep one.
    pub min_voxel_count: usize,
    pub budget: BudgetMode,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            keep_ratio: 0.1,
            voxel_size: None,
            min_voxel_count: 4,
            budget: BudgetMode::Exact,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PruneOutcome {
    /// Indices into the original cloud, ascending.
    pub kept: Vec<usize>,
    pub voxel_size: f32,
    /// `floor(N * keep_ratio)`.
    pub budget: usize,
    /// Voxels whose size reached `min_voxel_count`.
    pub guaranteed_voxels: usize,
}

/// Ordering helper: prefer higher score, then lower index.
fn keep_rank(scores: &[f32]) -> impl Fn(&u32, &u32) -> std::cmp::Ordering + '_ {
    move |a, b| {
        scores[*b as usize]
            .partial_cmp(&scores[*a as usize])
            .expect("scores are finite")
            .then(a.cmp(b))
    }
}

/// Selects survivors by score under the voxel-coverage rules and returns the
/// pruned cloud plus the selection bookkeeping.
pub fn prune(
    cloud: &GaussianCloud,
    scores: &[f32],
    cfg: &PruneConfig,
) -> Result<(GaussianCloud, PruneOutcome)> {
    if scores.len() != cloud.count() {
        return Err(Error::invalid(format!(
            "{} scores for {} Gaussians",
            scores.len(),
            cloud.count()
        )));
    }
    if !scores.iter().all(|s| s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    if !(cfg.keep_ratio > 0.0 && cfg.keep_ratio <= 1.0) {
        return Err(Error::invalid(format!(
            "keep_ratio must be in (0, 1], got {}",
            cfg.keep_ratio
        )));
    }
    if cfg.min_voxel_count == 0 {
        return Err(Error::invalid("min_voxel_count must be at least 1"));
    }
    let voxel_size = match cfg.voxel_size {
        Some(v) => v,
        None => auto_voxel_size(cloud),
    };
    let index = voxelize(cloud, voxel_size)?;

    let n = cloud.count();
    let budget = (n as f64 * cfg.keep_ratio as f64).floor() as usize;
    let rank = keep_rank(scores);

    let mut selected = vec![false; n];
    let mut selected_count = 0usize;
    let mut voxel_selected = vec![0usize; index.voxel_count()];
    let mut guaranteed = vec![false; index.voxel_count()];
    let mut guaranteed_voxels = 0usize;

    // Rule 1: per-voxel quotas.
    for b in 0..index.voxel_count() {
        let members = index.members(b);
        let mut quota = (members.len() as f64 * cfg.keep_ratio as f64).floor() as usize;
        if members.len() >= cfg.min_voxel_count {
            guaranteed[b] = true;
            guaranteed_voxels += 1;
            quota = quota.max(1);
        }
        if quota == 0 {
            continue;
        }
        let mut order: Vec<u32> = members.to_vec();
        order.sort_unstable_by(&rank);
        for &i in order.iter().take(quota) {
            selected[i as usize] = true;
            selected_count += 1;
            voxel_selected[b] += 1;
        }
    }

    // Rule 2: fill to the budget with the globally best unselected.
    if selected_count < budget {
        let mut rest: Vec<u32> = (0..n as u32).filter(|&i| !selected[i as usize]).collect();
        rest.sort_unstable_by(&rank);
        for &i in rest.iter().take(budget - selected_count) {
            selected[i as usize] = true;
            selected_count += 1;
            voxel_selected[index.bucket_of(i as usize)] += 1;
        }
    }

    // Rule 3: trim overshoot, sparing sole survivors of guaranteed voxels.
    if cfg.budget == BudgetMode::Exact && selected_count > budget {
        let target = budget.max(guaranteed_voxels);
        let mut chosen: Vec<u32> = (0..n as u32).filter(|&i| selected[i as usize]).collect();
        // Drop weakest first: ascending score, higher index first on ties.
        chosen.sort_unstable_by(|a, b| rank(b, a));
        for &i in &chosen {
            if selected_count <= target {
                break;
            }
            let b = index.bucket_of(i as usize);
            if guaranteed[b] && voxel_selected[b] == 1 {
                continue;
            }
            selected[i as usize] = false;
            selected_count -= 1;
            voxel_selected[b] -= 1;
        }
    }

    let kept: Vec<usize> = (0..n).filter(|&i| selected[i]).collect();
    let pruned = cloud.gather(&kept)?;
    Ok((
        pruned,
        PruneOutcome {
            kept,
            voxel_size,
            budget,
            guaranteed_voxels,
        },
    ))
}

/// Raises survivors' opacities in voxels that lost mass:
/// `sigma' = min(0.99, 1 - (1 - sigma)^(1 + lambda * r))` with
/// `r = removed / kept` in the survivor's voxel. Never lowers an opacity;
/// `lambda = 0` (or an untouched voxel) leaves logits bit-identical.
pub fn amplify_opacity(
    pruned: &GaussianCloud,
    kept: &[usize],
    index: &VoxelIndex,
    lambda: f32,
) -> Result<GaussianCloud> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "amplification lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if kept.len() != pruned.count() {
        return Err(Error::invalid(format!(
            "{} kept indices for {} pruned Gaussians",
            kept.len(),
            pruned.count()
        )));
    }
    let total_points = index.point_bucket.len();
    let mut kept_per_voxel = vec![0u32; index.voxel_count()];
    for &i in kept {
        if i >= total_points {
            return Err(Error::invalid(format!(
                "kept index {i} out of range for voxel index over {total_points} points"
            )));
        }
        kept_per_voxel[index.bucket_of(i)] += 1;
    }

    if lambda == 0.0 {
        return Ok(pruned.clone());
    }

    let mut logits = pruned.opacity_logits().to_vec();
    for (j, &orig) in kept.iter().enumerate() {
        let b = index.bucket_of(orig);
        let total = index.members(b).len() as f64;
        let kept_here = kept_per_voxel[b] as f64;
        let removed = total - kept_here;
        let r = removed / kept_here.max(1.0);
        if r == 0.0 {
            continue;
        }
        let sigma = activate_opacity(logits[j]) as f64;
        let raw = 1.0 - (1.0 - sigma).powf(1.0 + lambda as f64 * r);
        let amplified = raw.min(0.99).max(sigma);
        if amplified > sigma {
            logits[j] = opacity_to_logit(amplified as f32);
        }
    }
    pruned.with_opacity_logits(logits)
}

/// Kept-index file: u64 count then u64 little-endian indices.
pub fn encode_indices(kept: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * kept.len());
    out.extend_from_slice(&(kept.len() as u64).to_le_bytes());
    for &i in kept {
        out.extend_from_slice(&(i as u64).to_le_bytes());
    }
    out
}

pub fn decode_indices(bytes: &[u8]) -> Result<Vec<usize>> {
    if bytes.len() < 8 {
        return Err(Error::Truncated {
            format: "indices",
            expected: 8,
            actual: bytes.len() as u64,
        });
    }
    let count = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let expected = 8 + 8 * count;
    if (bytes.len() as u64) != expected {
        return Err(Error::Truncated {
            format: "indices",
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes[8..]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect())
}

pub fn write_indices_bin(kept: &[usize], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_indices(kept))
}

pub fn read_indices_bin(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_indices(&bytes)
}
