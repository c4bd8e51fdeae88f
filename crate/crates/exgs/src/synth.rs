//! Synthetic scene and camera-rig generation for tests, examples, and
//! benchmarks. Everything here is seeded: the same spec always produces the
//! same cloud, bit for bit, on every platform.
//!
//! The generator is pinned by name so other implementations can reproduce
//! the fixtures: xoshiro256** seeded through splitmix64 (the standard
//! `seed_from_u64` expansion), with uniform floats taken as the top 24 bits
//! of each output word divided by 2^24.

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::model::{sh_rest_dim, Camera, GaussianCloud, SH_C0};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Splats on the six inner faces of a box, degree-3 harmonics, smoothly
    /// varying colors. Quantized payloads compress noticeably, which makes
    /// this the default scene for end-to-end ratio checks.
    TexturedRoom,
    /// Independent random splats in a ball, direct color only. Nearly
    /// incompressible; useful as the adversarial counterpart.
    RandomBlob,
    /// Regular lattice in the z = 0 plane with identity rotations. Every
    /// attribute is predictable in closed form.
    PlanarGrid,
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub count: usize,
    pub seed: u64,
    /// Edge length of the region the scene occupies, centered on the origin.
    pub extent: f32,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, count: usize) -> Self {
        SynthSpec {
            kind,
            count,
            seed: 7,
            extent: 10.0,
        }
    }
}

struct SeededRng(Xoshiro256StarStar);

impl SeededRng {
    fn new(seed: u64) -> Self {
        SeededRng(Xoshiro256StarStar::seed_from_u64(seed))
    }

    /// Uniform in [0, 1) with 24-bit resolution, so the value is exact in
    /// f32 and platform-independent.
    fn unit(&mut self) -> f32 {
        (self.0.next_u64() >> 40) as f32 / 16_777_216.0
    }

    fn range(&mut self, lo: f32, hi: f32) -> f32 {
        lo + (hi - lo) * self.unit()
    }
}

pub fn make_scene(spec: &SynthSpec) -> Result<GaussianCloud> {
    if spec.count == 0 {
        return Err(Error::invalid("scene must contain at least one Gaussian"));
    }
    if !(spec.extent > 0.0 && spec.extent.is_finite()) {
        return Err(Error::invalid(format!(
            "scene extent must be positive and finite, got {}",
            spec.extent
        )));
    }
    match spec.kind {
        SynthKind::TexturedRoom => textured_room(spec),
        SynthKind::RandomBlob => random_blob(spec),
        SynthKind::PlanarGrid => planar_grid(spec),
    }
}

fn textured_room(spec: &SynthSpec) -> Result<GaussianCloud> {
    let n = spec.count;
    let e = spec.extent;
    let half = e / 2.0;
    let rest_dim = sh_rest_dim(3);
    let mut rng = SeededRng::new(spec.seed);

    let mut means = Vec::with_capacity(3 * n);
    let mut scales = Vec::with_capacity(3 * n);
    let mut rots = Vec::with_capacity(4 * n);
    let mut logits = Vec::with_capacity(n);
    let mut dc = Vec::with_capacity(3 * n);
    let mut rest = Vec::with_capacity(rest_dim * n);

    for i in 0..n {
        let face = i % 6;
        // In-face coordinates in [0, 1).
        let fu = rng.unit();
        let fv = rng.unit();
        let u = -half + e * fu;
        let v = -half + e * fv;
        let jitter = e * 0.002 * (rng.unit() - 0.5);
        let (pos, axis) = match face {
            0 => ([half + jitter, u, v], 0),
            1 => ([-half + jitter, u, v], 0),
            2 => ([u, half + jitter, v], 1),
            3 => ([u, -half + jitter, v], 1),
            4 => ([u, v, half + jitter], 2),
            _ => ([u, v, -half + jitter], 2),
        };
        means.extend_from_slice(&pos);

        // Plate-like: wide in the face plane, thin along the face normal.
        // Every axis draws its own size so the quantized payload carries
        // realistic entropy instead of repeated constants.
        let mut s = [
            (e * rng.range(0.004, 0.008)).ln(),
            (e * rng.range(0.004, 0.008)).ln(),
            (e * rng.range(0.004, 0.008)).ln(),
        ];
        s[axis] = (e * rng.range(0.0003, 0.0009)).ln();
        scales.extend_from_slice(&s);

        // Near-identity rotation with mild jitter so the field is exercised
        // without destroying the plate alignment.
        let (jx, jy, jz) = (
            0.2 * (rng.unit() - 0.5),
            0.2 * (rng.unit() - 0.5),
            0.2 * (rng.unit() - 0.5),
        );
        let norm = (1.0 + jx * jx + jy * jy + jz * jz).sqrt();
        rots.extend_from_slice(&[1.0 / norm, jx / norm, jy / norm, jz / norm]);

        logits.push(rng.range(0.5, 3.0));

        let f = face as f32;
        let color = [
            0.5 + 0.4 * (std::f32::consts::TAU * (2.0 * fu + fv) + 1.1 * f).sin(),
            0.5 + 0.4 * (std::f32::consts::TAU * (fu + 3.0 * fv) + 2.3 * f + 2.0).sin(),
            0.5 + 0.4 * (std::f32::consts::TAU * (2.0 * fu + 2.0 * fv) + 3.7 * f + 4.0).sin(),
        ];
        for c in color {
            let c = c.clamp(0.02, 0.98) + 0.04 * (rng.unit() - 0.5);
            dc.push((c - 0.5) / SH_C0);
        }

        // Higher bands fall off in amplitude and vary smoothly across the
        // face, like baked view-dependent shading would.
        for coeff in 0..rest_dim / 3 {
            let amp = match coeff {
                0..=2 => 0.25,
                3..=7 => 0.12,
                _ => 0.06,
            };
            for ch in 0..3 {
                let phase = 4.0 * fu + 2.5 * fv + 0.7 * coeff as f32 + 1.3 * ch as f32 + 0.5 * f;
                rest.push(amp * phase.sin());
            }
        }
    }

    GaussianCloud::new(3, means, scales, rots, logits, dc, rest)
}

fn random_blob(spec: &SynthSpec) -> Result<GaussianCloud> {
    let n = spec.count;
    let half = spec.extent / 2.0;
    let mut rng = SeededRng::new(spec.seed);

    let mut means = Vec::with_capacity(3 * n);
    let mut scales = Vec::with_capacity(3 * n);
    let mut rots = Vec::with_capacity(4 * n);
    let mut logits = Vec::with_capacity(n);
    let mut dc = Vec::with_capacity(3 * n);

    for _ in 0..n {
        // Rejection-sample the ball; sequential use keeps it deterministic.
        let p = loop {
            let p = [
                rng.range(-half, half),
                rng.range(-half, half),
                rng.range(-half, half),
            ];
            if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= half * half {
                break p;
            }
        };
        means.extend_from_slice(&p);
        for _ in 0..3 {
            scales.push((spec.extent * rng.range(0.005, 0.025)).ln());
        }
        let q = loop {
            let q = [
                rng.unit() - 0.5,
                rng.unit() - 0.5,
                rng.unit() - 0.5,
                rng.unit() - 0.5,
            ];
            let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            if norm > 1e-3 {
                break [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm];
            }
        };
        rots.extend_from_slice(&q);
        logits.push(rng.range(-2.0, 3.0));
        for _ in 0..3 {
            dc.push((rng.unit() - 0.5) / SH_C0);
        }
    }

    GaussianCloud::new(0, means, scales, rots, logits, dc, vec![])
}

fn planar_grid(spec: &SynthSpec) -> Result<GaussianCloud> {
    let n = spec.count;
    let half = spec.extent / 2.0;
    let side = (n as f64).sqrt().ceil() as usize;
    let spacing = if side > 1 {
        spec.extent / (side - 1) as f32
    } else {
        0.0
    };

    let mut means = Vec::with_capacity(3 * n);
    let mut scales = Vec::with_capacity(3 * n);
    let mut rots = Vec::with_capacity(4 * n);
    let mut logits = Vec::with_capacity(n);
    let mut dc = Vec::with_capacity(3 * n);

    let sigma = if side > 1 {
        (spacing * 0.4).ln()
    } else {
        (spec.extent * 0.1).ln()
    };
    for i in 0..n {
        let row = i / side;
        let col = i % side;
        let x = if side > 1 { -half + col as f32 * spacing } else { 0.0 };
        let y = if side > 1 { -half + row as f32 * spacing } else { 0.0 };
        means.extend_from_slice(&[x, y, 0.0]);
        scales.extend_from_slice(&[sigma, sigma, sigma]);
        rots.extend_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        logits.push(2.0);
        let c = [
            0.5 + 0.45 * ((row + col) % 2) as f32,
            0.5,
            0.95 - 0.45 * ((row + col) % 2) as f32,
        ];
        for ch in c {
            dc.push((ch - 0.5) / SH_C0);
        }
    }

    GaussianCloud::new(0, means, scales, rots, logits, dc, vec![])
}

/// Cameras on a horizontal circle of the given radius around `target`, all
/// aimed at it. The look direction is the camera z axis, matching the
/// renderer's forward convention, so `target` lands on the principal point.
pub fn make_orbit_cameras(
    count: usize,
    target: [f32; 3],
    radius: f32,
    width: u32,
    height: u32,
    focal: f32,
) -> Result<Vec<Camera>> {
    if count == 0 {
        return Err(Error::invalid("camera count must be at least 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!(
            "orbit radius must be positive and finite, got {radius}"
        )));
    }
    let mut cams = Vec::with_capacity(count);
    for i in 0..count {
        let theta = std::f32::consts::TAU * i as f32 / count as f32;
        let eye = [
            target[0] + radius * theta.cos(),
            target[1],
            target[2] + radius * theta.sin(),
        ];
        let zf = normalize([
            target[0] - eye[0],
            target[1] - eye[1],
            target[2] - eye[2],
        ]);
        // The orbit is horizontal, so the look direction is never parallel
        // to the world up axis.
        let xf = normalize(cross(zf, [0.0, 1.0, 0.0]));
        let yf = cross(zf, xf);
        let r = [xf, yf, zf];
        let t = [
            -(r[0][0] * eye[0] + r[0][1] * eye[1] + r[0][2] * eye[2]),
            -(r[1][0] * eye[0] + r[1][1] * eye[1] + r[1][2] * eye[2]),
            -(r[2][0] * eye[0] + r[2][1] * eye[1] + r[2][2] * eye[2]),
        ];
        cams.push(Camera::new(
            width,
            height,
            focal,
            focal,
            width as f32 / 2.0,
            height as f32 / 2.0,
            [
                [r[0][0], r[0][1], r[0][2], t[0]],
                [r[1][0], r[1][1], r[1][2], t[1]],
                [r[2][0], r[2][1], r[2][2], t[2]],
                [0.0, 0.0, 0.0, 1.0],
            ],
        )?);
    }
    Ok(cams)
}

fn cross(a: [f32; 3], b: [f32; 3]) -> [f32; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f32; 3]) -> [f32; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}
