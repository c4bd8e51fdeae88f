//! CPU rasterizer for Gaussian clouds: perspective projection of anisotropic
//! Gaussians to screen-space splats, global front-to-back depth sort, and
//! tiled alpha blending over a black background.
//!
//! Two evaluation paths share the same per-splat arithmetic:
//!
//! * [`render`] bins splats into tiles, skips splats outside their support
//!   radius, and stops blending once transmittance falls below
//!   [`TRANSMITTANCE_FLOOR`]. Tiles are processed in parallel and merged in
//!   index order, so output is bitwise reproducible for any worker count.
//! * [`render_reference`] loops over every sorted splat at every pixel with
//!   no tiling and no early exit. It is the plain evaluation of the blending
//!   sum, kept as the correctness baseline for the fast path.
//!
//! Both paths can tally per-Gaussian credits for significance scoring; see
//! [`ScoreMode`].

use nalgebra::{Matrix2x3, Matrix3, Quaternion, UnitQuaternion, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::img::{GrayBuffer, RgbBuffer};
use crate::model::{activate_opacity, sh_to_color, Camera, Gaussian, GaussianCloud};
use crate::parallel;

/// Per-splat opacity ceiling applied after the Gaussian falloff.
pub const ALPHA_CLAMP: f32 = 0.99;
/// Contributions below this alpha are skipped entirely.
pub const ALPHA_MIN: f32 = 1.0 / 255.0;
/// Blending stops once transmittance drops below this.
pub const TRANSMITTANCE_FLOOR: f32 = 1e-4;
/// Isotropic low-pass term added to every projected covariance.
pub const COV2D_DILATION: f32 = 0.3;

/// Splat support radius in units of sqrt(max eigenvalue) of the projected
/// covariance. Outside this radius alpha is provably below [`ALPHA_MIN`]
/// for any opacity < 1 (with margin for f32 rounding), so tile binning with
/// this radius never changes the blended result.
fn support_factor() -> f32 {
    (2.0 * (255.0f32.ln() + 0.1)).sqrt()
}

/// Which quantity a tally credits per evaluated splat, always weighted by
/// the transmittance in front of the splat at that pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    /// Credit the splat's own activated opacity (footprint-independent).
    Literal,
    /// Credit the blended alpha actually contributed at the pixel.
    Contribution,
}

#[derive(Debug, Clone)]
pub struct RenderConfig {
    /// Splats at camera-space depth <= this are culled.
    pub near_clip: f32,
    pub tile_size: u32,
    /// Renders wider or taller than this are rejected.
    pub max_dim: u32,
    /// When set, the output carries per-Gaussian (hits, credit) tallies.
    pub tally: Option<ScoreMode>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            near_clip: 0.01,
            tile_size: 16,
            max_dim: 4096,
            tally: None,
        }
    }
}

/// A Gaussian projected to the image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat2D {
    pub mean2d: [f32; 2],
    /// Projected covariance including the low-pass dilation.
    pub cov2d: [[f32; 2]; 2],
    /// Camera-space depth, always greater than the near clip.
    pub depth: f32,
    pub gaussian_index: usize,
}

/// Per-Gaussian accumulation across all rays of a render.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SplatTally {
    /// Rays where this splat passed the alpha threshold before termination.
    pub hits: u64,
    /// Sum of mode-dependent credits, accumulated in f64.
    pub score: f64,
}

#[derive(Debug)]
pub struct RenderOutput {
    pub color: RgbBuffer,
    /// Per-pixel 1 - T_final: total opacity accumulated along the ray.
    pub accum_opacity: GrayBuffer,
    pub per_gaussian_tally: Option<Vec<SplatTally>>,
}

/// Screen-space form used by the blending loops.
#[derive(Debug, Clone, Copy)]
struct PreSplat {
    mean: [f32; 2],
    /// Inverse of the dilated projected covariance: (a, b, c) for
    /// [[a, b], [b, c]].
    conic: [f32; 3],
    color: [f32; 3],
    opacity: f32,
    radius: f32,
    depth: f32,
    gidx: u32,
}

struct Projected {
    mean2d: [f32; 2],
    cov: [f32; 3],
    depth: f32,
}

fn world_covariance(scale_log: [f32; 3], rotation: [f32; 4]) -> Option<Matrix3<f32>> {
    if !scale_log.iter().all(|v| v.is_finite()) || !rotation.iter().all(|v| v.is_finite()) {
        return None;
    }
    let q = Quaternion::new(rotation[0], rotation[1], rotation[2], rotation[3]);
    if !(q.norm() > 0.0) {
        return None;
    }
    let r = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
    let s = Vector3::new(scale_log[0].exp(), scale_log[1].exp(), scale_log[2].exp());
    let m = r * Matrix3::from_diagonal(&s);
    let cov = m * m.transpose();
    cov.iter().all(|v| v.is_finite()).then_some(cov)
}

/// Projects one Gaussian; `None` means culled (behind the near plane,
/// degenerate parameters, or a non-finite result).
fn project_core(
    mean: [f32; 3],
    scale_log: [f32; 3],
    rotation: [f32; 4],
    cam: &Camera,
    rot_w2c: &Matrix3<f32>,
    near_clip: f32,
) -> Option<Projected> {
    if !mean.iter().all(|v| v.is_finite()) {
        return None;
    }
    let p = cam.transform_point(mean);
    let z = p[2];
    if !(z > near_clip) || !z.is_finite() {
        return None;
    }
    let inv_z = 1.0 / z;
    let u = cam.fx * p[0] * inv_z + cam.cx;
    let v = cam.fy * p[1] * inv_z + cam.cy;
    if !u.is_finite() || !v.is_finite() {
        return None;
    }
    let cov3 = world_covariance(scale_log, rotation)?;
    let j = Matrix2x3::new(
        cam.fx * inv_z,
        0.0,
        -cam.fx * p[0] * inv_z * inv_z,
        0.0,
        cam.fy * inv_z,
        -cam.fy * p[1] * inv_z * inv_z,
    );
    let jw = j * rot_w2c;
    let cov2 = jw * cov3 * jw.transpose();
    let a = cov2[(0, 0)] + COV2D_DILATION;
    let b = cov2[(0, 1)];
    let c = cov2[(1, 1)] + COV2D_DILATION;
    if !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return None;
    }
    Some(Projected {
        mean2d: [u, v],
        cov: [a, b, c],
        depth: z,
    })
}

/// Projects a single Gaussian to a screen-space splat; `None` means culled.
pub fn project_gaussian(
    g: &Gaussian,
    cam: &Camera,
    cfg: &RenderConfig,
    gaussian_index: usize,
) -> Option<Splat2D> {
    let rot = cam.rotation();
    project_core(g.mean, g.scale_log, g.rotation, cam, &rot, cfg.near_clip).map(|p| Splat2D {
        mean2d: p.mean2d,
        cov2d: [[p.cov[0], p.cov[1]], [p.cov[1], p.cov[2]]],
        depth: p.depth,
        gaussian_index,
    })
}

fn validate_dims(cam: &Camera, cfg: &RenderConfig) -> Result<()> {
    if cam.width == 0 || cam.height == 0 {
        return Err(Error::invalid("render target has zero area"));
    }
    if cam.width > cfg.max_dim || cam.height > cfg.max_dim {
        return Err(Error::invalid(format!(
            "render target {}x{} exceeds limit {}",
            cam.width, cam.height, cfg.max_dim
        )));
    }
    Ok(())
}

/// Projects, culls, and depth-sorts the whole cloud. The sort key is
/// (depth, gaussian index), which is a total order, so the result does not
/// depend on thread count.
fn prepare_splats(cloud: &GaussianCloud, cam: &Camera, cfg: &RenderConfig) -> Vec<PreSplat> {
    let n = cloud.count();
    let rot = cam.rotation();
    let means = cloud.means();
    let scales = cloud.scales_log();
    let rots = cloud.rotations();
    let logits = cloud.opacity_logits();
    let dc = cloud.sh_dc();
    let support = support_factor();

    let mut splats: Vec<PreSplat> = parallel::run(|| {
        (0..n)
            .into_par_iter()
            .filter_map(|i| {
                let opacity = activate_opacity(logits[i]);
                if !(opacity >= ALPHA_MIN) {
                    // Alpha can never reach the skip threshold anywhere.
                    return None;
                }
                let p = project_core(
                    [means[3 * i], means[3 * i + 1], means[3 * i + 2]],
                    [scales[3 * i], scales[3 * i + 1], scales[3 * i + 2]],
                    [rots[4 * i], rots[4 * i + 1], rots[4 * i + 2], rots[4 * i + 3]],
                    cam,
                    &rot,
                    cfg.near_clip,
                )?;
                let [a, b, c] = p.cov;
                let det = a * c - b * b;
                if !(det > 0.0) || !det.is_finite() {
                    return None;
                }
                let inv_det = 1.0 / det;
                let mid = 0.5 * (a + c);
                let lambda_max = mid + ((mid * mid - det).max(0.0)).sqrt();
                let radius = support * lambda_max.sqrt();
                // Cull splats whose support cannot touch the image.
                if p.mean2d[0] + radius < 0.0
                    || p.mean2d[0] - radius > cam.width as f32
                    || p.mean2d[1] + radius < 0.0
                    || p.mean2d[1] - radius > cam.height as f32
                {
                    return None;
                }
                Some(PreSplat {
                    mean: p.mean2d,
                    conic: [c * inv_det, -b * inv_det, a * inv_det],
                    color: sh_to_color([dc[3 * i], dc[3 * i + 1], dc[3 * i + 2]]),
                    opacity,
                    radius,
                    depth: p.depth,
                    gidx: i as u32,
                })
            })
            .collect()
    });
    parallel::run(|| {
        splats.par_sort_unstable_by(|x, y| {
            x.depth
                .partial_cmp(&y.depth)
                .expect("depths are finite")
                .then(x.gidx.cmp(&y.gidx))
        })
    });
    splats
}

/// Alpha of `sp` at pixel center (px, py), already clamped. The exact same
/// expression is used by the tiled and reference paths.
#[inline(always)]
fn splat_alpha(sp: &PreSplat, cx: f32, cy: f32) -> f32 {
    let dx = cx - sp.mean[0];
    let dy = cy - sp.mean[1];
    let power =
        0.5 * (sp.conic[0] * dx * dx + sp.conic[2] * dy * dy) + sp.conic[1] * dx * dy;
    (sp.opacity * (-power).exp()).min(ALPHA_CLAMP)
}

/// Tiled front-to-back alpha blending over a black background.
pub fn render(cloud: &GaussianCloud, cam: &Camera, cfg: &RenderConfig) -> Result<RenderOutput> {
    validate_dims(cam, cfg)?;
    let splats = prepare_splats(cloud, cam, cfg);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let ts = cfg.tile_size.max(1) as usize;
    let tiles_x = w.div_ceil(ts);
    let tiles_y = h.div_ceil(ts);

    // Bin splat slots per tile; iterating in sorted order keeps each bin
    // depth-sorted.
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (slot, sp) in splats.iter().enumerate() {
        let x0 = ((sp.mean[0] - sp.radius).floor().max(0.0) as usize).min(w - 1) / ts;
        let x1 = ((sp.mean[0] + sp.radius).ceil().max(0.0) as usize).min(w - 1) / ts;
        let y0 = ((sp.mean[1] - sp.radius).floor().max(0.0) as usize).min(h - 1) / ts;
        let y1 = ((sp.mean[1] + sp.radius).ceil().max(0.0) as usize).min(h - 1) / ts;
        for ty in y0..=y1 {
            for tx in x0..=x1 {
                bins[ty * tiles_x + tx].push(slot as u32);
            }
        }
    }

    struct TileOut {
        color: Vec<f32>,
        accum: Vec<f32>,
        tally: Option<Vec<SplatTally>>,
    }

    let tile_outputs: Vec<TileOut> = parallel::run(|| {
        (0..tiles_x * tiles_y)
            .into_par_iter()
            .map(|t| {
                let (tx, ty) = (t % tiles_x, t / tiles_x);
                let x0 = tx * ts;
                let y0 = ty * ts;
                let x1 = (x0 + ts).min(w);
                let y1 = (y0 + ts).min(h);
                let bin = &bins[t];
                let mut color = vec![0.0f32; 3 * (x1 - x0) * (y1 - y0)];
                let mut accum = vec![0.0f32; (x1 - x0) * (y1 - y0)];
                let mut tally = cfg
                    .tally
                    .map(|_| vec![SplatTally::default(); bin.len()]);
                let mode = cfg.tally;
                for py in y0..y1 {
                    for px in x0..x1 {
                        let cx = px as f32 + 0.5;
                        let cy = py as f32 + 0.5;
                        let mut t_rem = 1.0f32;
                        let pi = (py - y0) * (x1 - x0) + (px - x0);
                        let rgb = &mut color[3 * pi..3 * pi + 3];
                        for (pos, &slot) in bin.iter().enumerate() {
                            let sp = &splats[slot as usize];
                            let dx = cx - sp.mean[0];
                            let dy = cy - sp.mean[1];
                            if dx.abs() > sp.radius || dy.abs() > sp.radius {
                                continue;
                            }
                            let alpha = splat_alpha(sp, cx, cy);
                            if alpha < ALPHA_MIN {
                                continue;
                            }
                            if let (Some(tl), Some(mode)) = (tally.as_mut(), mode) {
                                let credit = match mode {
                                    ScoreMode::Literal => sp.opacity as f64,
                                    ScoreMode::Contribution => alpha as f64,
                                };
                                tl[pos].hits += 1;
                                tl[pos].score += credit * t_rem as f64;
                            }
                            let weight = alpha * t_rem;
                            rgb[0] += sp.color[0] * weight;
                            rgb[1] += sp.color[1] * weight;
                            rgb[2] += sp.color[2] * weight;
                            t_rem *= 1.0 - alpha;
                            if t_rem < TRANSMITTANCE_FLOOR {
                                break;
                            }
                        }
                        accum[pi] = 1.0 - t_rem;
                    }
                }
                TileOut { color, accum, tally }
            })
            .collect()
    });

    // Merge in tile index order: pixel blocks are disjoint, and per-Gaussian
    // credits are summed in a fixed order so results are thread-independent.
    let mut color = RgbBuffer::new(cam.width, cam.height);
    let mut accum = GrayBuffer::new(cam.width, cam.height);
    let mut global_tally = cfg
        .tally
        .map(|_| vec![SplatTally::default(); cloud.count()]);
    for (t, out) in tile_outputs.iter().enumerate() {
        let (tx, ty) = (t % tiles_x, t / tiles_x);
        let x0 = tx * ts;
        let y0 = ty * ts;
        let x1 = (x0 + ts).min(w);
        let y1 = (y0 + ts).min(h);
        let tw = x1 - x0;
        for py in y0..y1 {
            let src = (py - y0) * tw;
            for px in x0..x1 {
                let s = src + (px - x0);
                color.set_pixel(px as u32, py as u32, [
                    out.color[3 * s],
                    out.color[3 * s + 1],
                    out.color[3 * s + 2],
                ]);
                accum.set(px as u32, py as u32, out.accum[s]);
            }
        }
        if let (Some(global), Some(local)) = (global_tally.as_mut(), out.tally.as_ref()) {
            for (pos, &slot) in bins[t].iter().enumerate() {
                let g = splats[slot as usize].gidx as usize;
                global[g].hits += local[pos].hits;
                global[g].score += local[pos].score;
            }
        }
    }

    Ok(RenderOutput {
        color,
        accum_opacity: accum,
        per_gaussian_tally: global_tally,
    })
}

/// Untiled exhaustive evaluation of the blending sum: every sorted splat is
/// considered at every pixel and blending never stops early. Tally credits
/// still cease once transmittance crosses [`TRANSMITTANCE_FLOOR`], matching
/// the definition used for significance scores.
pub fn render_reference(
    cloud: &GaussianCloud,
    cam: &Camera,
    cfg: &RenderConfig,
) -> Result<RenderOutput> {
    validate_dims(cam, cfg)?;
    let splats = prepare_splats(cloud, cam, cfg);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut color = RgbBuffer::new(cam.width, cam.height);
    let mut accum = GrayBuffer::new(cam.width, cam.height);
    let mut tally = cfg
        .tally
        .map(|_| vec![SplatTally::default(); cloud.count()]);
    for py in 0..h {
        for px in 0..w {
            let cx = px as f32 + 0.5;
            let cy = py as f32 + 0.5;
            let mut t_rem = 1.0f32;
            let mut terminated = false;
            let mut rgb = [0.0f32; 3];
            for sp in &splats {
                let alpha = splat_alpha(sp, cx, cy);
                if alpha < ALPHA_MIN {
                    continue;
                }
                if !terminated {
                    if let (Some(tl), Some(mode)) = (tally.as_mut(), cfg.tally) {
                        let credit = match mode {
                            ScoreMode::Literal => sp.opacity as f64,
                            ScoreMode::Contribution => alpha as f64,
                        };
                        let entry = &mut tl[sp.gidx as usize];
                        entry.hits += 1;
                        entry.score += credit * t_rem as f64;
                    }
                }
                let weight = alpha * t_rem;
                rgb[0] += sp.color[0] * weight;
                rgb[1] += sp.color[1] * weight;
                rgb[2] += sp.color[2] * weight;
                t_rem *= 1.0 - alpha;
                if t_rem < TRANSMITTANCE_FLOOR {
                    terminated = true;
                }
            }
            color.set_pixel(px as u32, py as u32, rgb);
            accum.set(px as u32, py as u32, 1.0 - t_rem);
        }
    }
    Ok(RenderOutput {
        color,
        accum_opacity: accum,
        per_gaussian_tally: tally,
    })
}

/// Accumulated-opacity mask of the cloud from one camera.
pub fn render_visibility_mask(cloud: &GaussianCloud, cam: &Camera) -> Result<GrayBuffer> {
    Ok(render(cloud, cam, &RenderConfig::default())?.accum_opacity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::opacity_to_logit;

    fn look_origin_camera(width: u32, height: u32, f: f32, dist: f32) -> Camera {
        // Camera at (0, 0, -dist) looking down +z toward the origin.
        Camera::new(
            width,
            height,
            f,
            f,
            width as f32 / 2.0,
            height as f32 / 2.0,
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, dist],
                [0.0, 0.0, 0.0, 1.0],
            ],
        )
        .unwrap()
    }

    fn single(mean: [f32; 3], scale: f32, logit: f32, dc: [f32; 3]) -> GaussianCloud {
        GaussianCloud::new(
            0,
            mean.to_vec(),
            vec![scale.ln(); 3],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![logit],
            dc.to_vec(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn projection_on_axis_point() {
        let cam = look_origin_camera(64, 64, 100.0, 5.0);
        let cloud = single([0.0, 0.0, 0.0], 0.1, 0.0, [0.0; 3]);
        let g = cloud.gaussian(0);
        let s = project_gaussian(&g, &cam, &RenderConfig::default(), 0).unwrap();
        assert!((s.mean2d[0] - 32.0).abs() < 1e-4);
        assert!((s.mean2d[1] - 32.0).abs() < 1e-4);
        assert!((s.depth - 5.0).abs() < 1e-5);
        // (f * s / z)^2 + dilation = (100 * 0.1 / 5)^2 + 0.3 = 4.3
        assert!((s.cov2d[0][0] - 4.3).abs() < 1e-3, "got {}", s.cov2d[0][0]);
        assert!((s.cov2d[1][1] - 4.3).abs() < 1e-3);
        assert!(s.cov2d[0][1].abs() < 1e-4);
        assert_eq!(s.cov2d[0][1], s.cov2d[1][0]);
    }

    #[test]
    fn projection_culls_behind_camera() {
        let cam = look_origin_camera(64, 64, 100.0, 5.0);
        let cloud = single([0.0, 0.0, -10.0], 0.1, 0.0, [0.0; 3]);
        let g = cloud.gaussian(0);
        assert!(project_gaussian(&g, &cam, &RenderConfig::default(), 0).is_none());
        // Just behind the near plane.
        let cloud = single([0.0, 0.0, -4.995], 0.1, 0.0, [0.0; 3]);
        let g = cloud.gaussian(0);
        assert!(project_gaussian(&g, &cam, &RenderConfig::default(), 0).is_none());
    }

    #[test]
    fn empty_cloud_renders_black() {
        let cam = look_origin_camera(8, 8, 10.0, 2.0);
        let out = render(&GaussianCloud::empty(0), &cam, &RenderConfig::default()).unwrap();
        assert!(out.color.data().iter().all(|&v| v == 0.0));
        assert!(out.accum_opacity.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn centered_splat_hits_alpha_clamp() {
        let cam = look_origin_camera(33, 33, 100.0, 5.0);
        // Large footprint, opacity logit far in saturation: alpha clamps.
        let cloud = single([0.0, 0.0, 0.0], 1.0, 12.0, [1.0, 0.0, 0.0]);
        let out = render(&cloud, &cam, &RenderConfig::default()).unwrap();
        // Principal point 16.5 = center of pixel (16,16).
        let a = out.accum_opacity.at(16, 16);
        assert!((a - 0.99).abs() < 1e-4, "accum {a}");
        let px = out.color.pixel(16, 16);
        let c = sh_to_color([1.0, 0.0, 0.0]);
        assert!((px[0] - 0.99 * c[0]).abs() < 1e-4);
    }

    #[test]
    fn two_layer_blend_matches_closed_form() {
        let cam = look_origin_camera(33, 33, 100.0, 5.0);
        // Front splat at z=0 (depth 5), back at z=1 (depth 6), both alpha
        // 0.5 at the center pixel, big enough to be locally flat.
        let front = [0.0f32, 0.0, 0.0];
        let back = [0.0f32, 0.0, 1.0];
        let cloud = GaussianCloud::new(
            0,
            [front, back].concat(),
            vec![(4.0f32).ln(); 6],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0],
            // Front renders red-ish, back blue-ish.
            vec![2.0, -2.0, -2.0, -2.0, -2.0, 2.0],
            vec![],
        )
        .unwrap();
        let out = render(&cloud, &cam, &RenderConfig::default()).unwrap();
        let a = out.accum_opacity.at(16, 16);
        // Alpha at the exact center is 0.5 for both: accum = 1-(0.5)^2.
        assert!((a - 0.75).abs() < 2e-3, "accum {a}");
        let cf = sh_to_color([2.0, -2.0, -2.0]);
        let cb = sh_to_color([-2.0, -2.0, 2.0]);
        let px = out.color.pixel(16, 16);
        for k in 0..3 {
            let want = 0.5 * cf[k] + 0.25 * cb[k];
            assert!((px[k] - want).abs() < 2e-3, "ch{k}: {} vs {want}", px[k]);
        }
    }

    #[test]
    fn depth_order_uses_index_tiebreak() {
        let cam = look_origin_camera(17, 17, 50.0, 5.0);
        // Two coincident splats; index order decides who is in front.
        let mk = |first_red: bool| {
            let dc = if first_red {
                vec![3.0, -3.0, -3.0, -3.0, -3.0, 3.0]
            } else {
                vec![-3.0, -3.0, 3.0, 3.0, -3.0, -3.0]
            };
            let cloud = GaussianCloud::new(
                0,
                vec![0.0; 6],
                vec![(2.0f32).ln(); 6],
                vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
                vec![2.0, 2.0],
                dc,
                vec![],
            )
            .unwrap();
            render(&cloud, &cam, &RenderConfig::default()).unwrap()
        };
        let red_first = mk(true);
        let blue_first = mk(false);
        let p1 = red_first.color.pixel(8, 8);
        let p2 = blue_first.color.pixel(8, 8);
        assert!(p1[0] > p1[2], "index 0 wins the depth tie");
        assert!(p2[2] > p2[0]);
        assert!((p1[0] - p2[2]).abs() < 1e-6, "symmetry between the two runs");
    }

    #[test]
    fn tiled_matches_reference_on_random_clouds() {
        let mut rng = crate::synth_test_rng(7);
        for round in 0..20 {
            let n = 1 + (rng.next() % 60) as usize;
            let mut means = Vec::new();
            let mut scales = Vec::new();
            let mut rots = Vec::new();
            let mut logits = Vec::new();
            let mut dc = Vec::new();
            for _ in 0..n {
                for _ in 0..3 {
                    means.push(rng.unit() * 3.0 - 1.5);
                    scales.push((0.02 + rng.unit() * 0.4).ln());
                    dc.push(rng.unit() * 4.0 - 2.0);
                }
                let q = [
                    rng.unit() * 2.0 - 1.0,
                    rng.unit() * 2.0 - 1.0,
                    rng.unit() * 2.0 - 1.0,
                    rng.unit() * 2.0 - 1.0,
                ];
                let norm = (q.iter().map(|v| v * v).sum::<f32>()).sqrt();
                if norm < 1e-3 {
                    rots.extend_from_slice(&[1.0, 0.0, 0.0, 0.0]);
                } else {
                    rots.extend_from_slice(&q);
                }
                logits.push(opacity_to_logit(0.05 + rng.unit() * 0.4));
            }
            let cloud = GaussianCloud::new(0, means, scales, rots, logits, dc, vec![]).unwrap();
            let cam = look_origin_camera(48, 40, 60.0, 5.0);
            let cfg = RenderConfig {
                tile_size: 16,
                ..RenderConfig::default()
            };
            let fast = render(&cloud, &cam, &cfg).unwrap();
            let slow = render_reference(&cloud, &cam, &cfg).unwrap();
            let max_c = fast
                .color
                .data()
                .iter()
                .zip(slow.color.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            let max_a = fast
                .accum_opacity
                .data()
                .iter()
                .zip(slow.accum_opacity.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            assert!(max_c <= 1e-5, "round {round}: color mismatch {max_c}");
            assert!(max_a <= 1e-5, "round {round}: accum mismatch {max_a}");
        }
    }

    #[test]
    fn adding_a_gaussian_never_decreases_accum() {
        let cam = look_origin_camera(32, 32, 40.0, 4.0);
        let base = single([0.2, -0.1, 0.0], 0.3, 0.5, [1.0, 0.0, 0.0]);
        let more = GaussianCloud::new(
            0,
            vec![0.2, -0.1, 0.0, -0.3, 0.2, 0.5],
            vec![(0.3f32).ln(); 6],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.5, 1.0],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            vec![],
        )
        .unwrap();
        let a = render(&base, &cam, &RenderConfig::default()).unwrap();
        let b = render(&more, &cam, &RenderConfig::default()).unwrap();
        for (x, y) in a.accum_opacity.data().iter().zip(b.accum_opacity.data()) {
            assert!(y - x >= -1e-6);
        }
    }

    #[test]
    fn render_rejects_oversized_targets() {
        let cam = Camera::new(
            5000,
            8,
            10.0,
            10.0,
            2500.0,
            4.0,
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 2.0],
                [0.0, 0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        let err = render(&GaussianCloud::empty(0), &cam, &RenderConfig::default());
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn repeated_renders_are_bitwise_identical() {
        let cam = look_origin_camera(40, 40, 50.0, 5.0);
        let cloud = GaussianCloud::new(
            0,
            vec![0.0, 0.0, 0.0, 0.3, 0.1, 0.5, -0.4, -0.2, 1.0],
            vec![(0.25f32).ln(); 9],
            vec![1.0, 0.0, 0.0, 0.0].repeat(3),
            vec![0.5, 1.0, -0.5],
            vec![1.0, 0.5, 0.0, -0.5, 1.0, 0.3, 0.2, -1.0, 2.0],
            vec![],
        )
        .unwrap();
        let cfg = RenderConfig {
            tally: Some(ScoreMode::Literal),
            ..RenderConfig::default()
        };
        let a = render(&cloud, &cam, &cfg).unwrap();
        let b = render(&cloud, &cam, &cfg).unwrap();
        assert_eq!(a.color.data(), b.color.data());
        assert_eq!(a.accum_opacity.data(), b.accum_opacity.data());
        let ta = a.per_gaussian_tally.unwrap();
        let tb = b.per_gaussian_tally.unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn accum_equals_one_minus_transmittance() {
        let cam = look_origin_camera(24, 24, 30.0, 4.0);
        let cloud = GaussianCloud::new(
            0,
            vec![0.0, 0.0, 0.0, 0.1, 0.0, 0.4],
            vec![(0.5f32).ln(); 6],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.8],
            vec![0.0; 6],
            vec![],
        )
        .unwrap();
        let out = render_reference(&cloud, &cam, &RenderConfig::default()).unwrap();
        // Recompute 1 - prod(1 - alpha_i) per pixel from the splat list.
        let cfg = RenderConfig::default();
        let rotm = cam.rotation();
        let mut splats = Vec::new();
        for i in 0..cloud.count() {
            let g = cloud.gaussian(i);
            if let Some(p) =
                project_core(g.mean, g.scale_log, g.rotation, &cam, &rotm, cfg.near_clip)
            {
                let det = p.cov[0] * p.cov[2] - p.cov[1] * p.cov[1];
                let inv = 1.0 / det;
                splats.push(PreSplat {
                    mean: p.mean2d,
                    conic: [p.cov[2] * inv, -p.cov[1] * inv, p.cov[0] * inv],
                    color: [0.5; 3],
                    opacity: activate_opacity(cloud.opacity_logits()[i]),
                    radius: 1e9,
                    depth: p.depth,
                    gidx: i as u32,
                });
            }
        }
        for py in 0..24u32 {
            for px in 0..24u32 {
                let mut t = 1.0f32;
                for sp in &splats {
                    let a = splat_alpha(sp, px as f32 + 0.5, py as f32 + 0.5);
                    if a >= ALPHA_MIN {
                        t *= 1.0 - a;
                    }
                }
                let want = 1.0 - t;
                let got = out.accum_opacity.at(px, py);
                assert!((got - want).abs() <= 1e-6, "({px},{py}): {got} vs {want}");
            }
        }
    }
}
