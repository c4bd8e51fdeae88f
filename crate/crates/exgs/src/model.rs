//! Scene model: Gaussian clouds, cameras, and the activation functions that
//! turn stored (pre-activation) parameters into physical quantities.
//!
//! Storage convention follows the common 3DGS checkpoint layout: scales are
//! kept as logarithms, opacities as logits, colors as spherical-harmonic
//! coefficients. Quaternions are stored (w, x, y, z) and normalized on use,
//! so `q` and `-q` describe the same rotation.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Zeroth-order spherical harmonic basis constant, 1 / (2 * sqrt(pi)).
pub const SH_C0: f32 = 0.282_094_791_773_878_14;

/// Maximum spherical-harmonic degree this crate handles.
pub const MAX_SH_DEGREE: u8 = 3;

/// One splat, in storage (pre-activation) parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: [f32; 3],
    pub scale_log: [f32; 3],
    /// Quaternion (w, x, y, z); any nonzero norm, normalized on use.
    pub rotation: [f32; 4],
    pub opacity_logit: f32,
    pub sh_dc: [f32; 3],
    /// Higher-order SH coefficients, `3 * ((d+1)^2 - 1)` values.
    pub sh_rest: Vec<f32>,
}

/// Number of `sh_rest` components per Gaussian for a given degree.
pub fn sh_rest_dim(sh_degree: u8) -> usize {
    let d = sh_degree as usize;
    3 * ((d + 1) * (d + 1) - 1)
}

/// Structure-of-arrays collection of Gaussians with a uniform SH degree.
///
/// Field lengths are locked to the count at construction: means/sh_dc/scales
/// hold `3n`, rotations `4n`, opacity logits `n`, and sh_rest
/// `n * sh_rest_dim(degree)` values. Component values are not range-checked
/// here; operations that require finiteness check it themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    sh_degree: u8,
    means: Vec<f32>,
    scales_log: Vec<f32>,
    rotations: Vec<f32>,
    opacity_logits: Vec<f32>,
    sh_dc: Vec<f32>,
    sh_rest: Vec<f32>,
}

impl GaussianCloud {
    pub fn new(
        sh_degree: u8,
        means: Vec<f32>,
        scales_log: Vec<f32>,
        rotations: Vec<f32>,
        opacity_logits: Vec<f32>,
        sh_dc: Vec<f32>,
        sh_rest: Vec<f32>,
    ) -> Result<Self> {
        if sh_degree > MAX_SH_DEGREE {
            return Err(Error::invalid(format!(
                "sh_degree {sh_degree} exceeds maximum {MAX_SH_DEGREE}"
            )));
        }
        let n = opacity_logits.len();
        let expect = |name: &str, got: usize, want: usize| -> Result<()> {
            if got != want {
                return Err(Error::invalid(format!(
                    "{name} has {got} components, expected {want} for {n} Gaussians"
                )));
            }
            Ok(())
        };
        expect("means", means.len(), 3 * n)?;
        expect("scales_log", scales_log.len(), 3 * n)?;
        expect("rotations", rotations.len(), 4 * n)?;
        expect("sh_dc", sh_dc.len(), 3 * n)?;
        expect("sh_rest", sh_rest.len(), n * sh_rest_dim(sh_degree))?;
        Ok(GaussianCloud {
            sh_degree,
            means,
            scales_log,
            rotations,
            opacity_logits,
            sh_dc,
            sh_rest,
        })
    }

    pub fn empty(sh_degree: u8) -> Self {
        GaussianCloud::new(sh_degree, vec![], vec![], vec![], vec![], vec![], vec![])
            .expect("empty cloud is always consistent")
    }

    pub fn count(&self) -> usize {
        self.opacity_logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn sh_degree(&self) -> u8 {
        self.sh_degree
    }

    pub fn means(&self) -> &[f32] {
        &self.means
    }

    pub fn scales_log(&self) -> &[f32] {
        &self.scales_log
    }

    pub fn rotations(&self) -> &[f32] {
        &self.rotations
    }

    pub fn opacity_logits(&self) -> &[f32] {
        &self.opacity_logits
    }

    pub fn sh_dc(&self) -> &[f32] {
        &self.sh_dc
    }

    pub fn sh_rest(&self) -> &[f32] {
        &self.sh_rest
    }

    pub fn mean(&self, i: usize) -> [f32; 3] {
        [self.means[3 * i], self.means[3 * i + 1], self.means[3 * i + 2]]
    }

    /// Copy of Gaussian `i`. Panics if out of range.
    pub fn gaussian(&self, i: usize) -> Gaussian {
        let rd = sh_rest_dim(self.sh_degree);
        Gaussian {
            mean: self.mean(i),
            scale_log: [
                self.scales_log[3 * i],
                self.scales_log[3 * i + 1],
                self.scales_log[3 * i + 2],
            ],
            rotation: [
                self.rotations[4 * i],
                self.rotations[4 * i + 1],
                self.rotations[4 * i + 2],
                self.rotations[4 * i + 3],
            ],
            opacity_logit: self.opacity_logits[i],
            sh_dc: [self.sh_dc[3 * i], self.sh_dc[3 * i + 1], self.sh_dc[3 * i + 2]],
            sh_rest: self.sh_rest[i * rd..(i + 1) * rd].to_vec(),
        }
    }

    /// New cloud containing the listed Gaussians, in the order given.
    pub fn gather(&self, indices: &[usize]) -> Result<GaussianCloud> {
        let n = self.count();
        let rd = sh_rest_dim(self.sh_degree);
        let mut means = Vec::with_capacity(3 * indices.len());
        let mut scales = Vec::with_capacity(3 * indices.len());
        let mut rots = Vec::with_capacity(4 * indices.len());
        let mut logits = Vec::with_capacity(indices.len());
        let mut dc = Vec::with_capacity(3 * indices.len());
        let mut rest = Vec::with_capacity(rd * indices.len());
        for &i in indices {
            if i >= n {
                return Err(Error::invalid(format!(
                    "gather index {i} out of range for {n} Gaussians"
                )));
            }
            means.extend_from_slice(&self.means[3 * i..3 * i + 3]);
            scales.extend_from_slice(&self.scales_log[3 * i..3 * i + 3]);
            rots.extend_from_slice(&self.rotations[4 * i..4 * i + 4]);
            logits.push(self.opacity_logits[i]);
            dc.extend_from_slice(&self.sh_dc[3 * i..3 * i + 3]);
            rest.extend_from_slice(&self.sh_rest[rd * i..rd * (i + 1)]);
        }
        GaussianCloud::new(self.sh_degree, means, scales, rots, logits, dc, rest)
    }

    /// Same Gaussians with all higher-order SH coefficients dropped.
    pub fn truncate_sh(&self) -> GaussianCloud {
        GaussianCloud {
            sh_degree: 0,
            means: self.means.clone(),
            scales_log: self.scales_log.clone(),
            rotations: self.rotations.clone(),
            opacity_logits: self.opacity_logits.clone(),
            sh_dc: self.sh_dc.clone(),
            sh_rest: vec![],
        }
    }

    /// Replaces the opacity logits wholesale (length must match).
    pub fn with_opacity_logits(&self, logits: Vec<f32>) -> Result<GaussianCloud> {
        if logits.len() != self.count() {
            return Err(Error::invalid(format!(
                "expected {} opacity logits, got {}",
                self.count(),
                logits.len()
            )));
        }
        let mut out = self.clone();
        out.opacity_logits = logits;
        Ok(out)
    }
}

/// World-space 3x3 covariance from stored scale/rotation: R S S^T R^T with
/// S = diag(exp(scale_log)) and R from the normalized quaternion.
///
/// The result is bitwise symmetric and positive semi-definite up to rounding.
pub fn activate_covariance(g: &Gaussian) -> Result<Matrix3<f32>> {
    if !g.scale_log.iter().all(|v| v.is_finite()) || !g.rotation.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("non-finite scale or rotation component"));
    }
    let q = Quaternion::new(g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]);
    if q.norm() == 0.0 {
        return Err(Error::invalid("zero-norm rotation quaternion"));
    }
    let r = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
    let s = Vector3::new(g.scale_log[0].exp(), g.scale_log[1].exp(), g.scale_log[2].exp());
    let m = r.into_inner() * Matrix3::from_diagonal(&s);
    let cov = m * m.transpose();
    if !cov.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("covariance overflow: scale_log too large"));
    }
    Ok(cov)
}

/// Sigmoid opacity activation. Strictly inside (0, 1) in exact arithmetic;
/// f32 saturates to 0 or 1 for |logit| beyond roughly 17.
pub fn activate_opacity(logit: f32) -> f32 {
    1.0 / (1.0 + (-logit).exp())
}

/// Inverse of [`activate_opacity`]. Input is clamped away from {0, 1} so the
/// result stays finite.
pub fn opacity_to_logit(opacity: f32) -> f32 {
    let p = opacity.clamp(1e-7, 1.0 - 1e-7);
    (p / (1.0 - p)).ln()
}

/// View-independent RGB from the DC spherical-harmonic coefficients:
/// `clamp(SH_C0 * dc + 0.5, 0, 1)` per channel.
pub fn sh_to_color(sh_dc: [f32; 3]) -> [f32; 3] {
    [
        (SH_C0 * sh_dc[0] + 0.5).clamp(0.0, 1.0),
        (SH_C0 * sh_dc[1] + 0.5).clamp(0.0, 1.0),
        (SH_C0 * sh_dc[2] + 0.5).clamp(0.0, 1.0),
    ]
}

/// Pinhole camera with an OpenCV-style frame: x right, y down, z forward;
/// points with camera-space z > 0 are in front.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub width: u32,
    pub height: u32,
    pub fx: f32,
    pub fy: f32,
    pub cx: f32,
    pub cy: f32,
    /// Row-major rigid transform; rows 0..3 are [R | t], row 3 is [0 0 0 1].
    pub world_to_camera: [[f32; 4]; 4],
}

impl Camera {
    pub fn new(
        width: u32,
        height: u32,
        fx: f32,
        fy: f32,
        cx: f32,
        cy: f32,
        world_to_camera: [[f32; 4]; 4],
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("camera image dimensions must be positive"));
        }
        if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::invalid("focal lengths must be positive and finite"));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(Error::invalid("principal point must be finite"));
        }
        let flat: Vec<f32> = world_to_camera.iter().flatten().copied().collect();
        if !flat.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("world_to_camera must be finite"));
        }
        let bottom = world_to_camera[3];
        if !(bottom[0] == 0.0 && bottom[1] == 0.0 && bottom[2] == 0.0 && bottom[3] == 1.0) {
            return Err(Error::invalid("world_to_camera bottom row must be [0,0,0,1]"));
        }
        let r = Matrix3::from_fn(|i, j| world_to_camera[i][j]);
        let gram = r.transpose() * r;
        let dev = (gram - Matrix3::identity()).abs().max();
        if dev > 1e-4 {
            return Err(Error::invalid(format!(
                "world_to_camera rotation is not orthonormal (max deviation {dev:.2e})"
            )));
        }
        if r.determinant() < 0.0 {
            return Err(Error::invalid("world_to_camera rotation is a reflection"));
        }
        Ok(Camera {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            world_to_camera,
        })
    }

    /// Rotation block of the world-to-camera transform.
    pub fn rotation(&self) -> Matrix3<f32> {
        Matrix3::from_fn(|i, j| self.world_to_camera[i][j])
    }

    /// World point to camera space.
    pub fn transform_point(&self, p: [f32; 3]) -> [f32; 3] {
        let m = &self.world_to_camera;
        let mut out = [0.0f32; 3];
        for (i, row) in m.iter().take(3).enumerate() {
            out[i] = row[0] * p[0] + row[1] * p[1] + row[2] * p[2] + row[3];
        }
        out
    }
}
