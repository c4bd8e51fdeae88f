//! Camera rig files: a hand-writable JSON list of pinhole cameras.
//!
//! ```json
//! {"cameras": [{"width": 640, "height": 480, "fx": 500.0, "fy": 500.0,
//!               "cx": 320.0, "cy": 240.0, "world_to_camera": [16 numbers]}]}
//! ```
//!
//! `world_to_camera` is row-major. Parsing failures are format errors;
//! cameras that parse but violate the pose invariants (orthonormal rotation,
//! positive focals) surface as invalid-parameter errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::model::Camera;

#[derive(Serialize, Deserialize)]
struct RigFile {
    cameras: Vec<RigCamera>,
}

#[derive(Serialize, Deserialize)]
struct RigCamera {
    width: u32,
    height: u32,
    fx: f32,
    fy: f32,
    cx: f32,
    cy: f32,
    world_to_camera: Vec<f32>,
}

pub fn parse_rig(bytes: &[u8]) -> Result<Vec<Camera>> {
    let file: RigFile = serde_json::from_slice(bytes).map_err(|e| Error::Format {
        format: "rig",
        reason: e.to_string(),
    })?;
    let mut cams = Vec::with_capacity(file.cameras.len());
    for (i, c) in file.cameras.iter().enumerate() {
        if c.world_to_camera.len() != 16 {
            return Err(Error::Format {
                format: "rig",
                reason: format!(
                    "camera {i}: world_to_camera has {} entries, expected 16",
                    c.world_to_camera.len()
                ),
            });
        }
        let m = &c.world_to_camera;
        let rows = [
            [m[0], m[1], m[2], m[3]],
            [m[4], m[5], m[6], m[7]],
            [m[8], m[9], m[10], m[11]],
            [m[12], m[13], m[14], m[15]],
        ];
        cams.push(Camera::new(c.width, c.height, c.fx, c.fy, c.cx, c.cy, rows)?);
    }
    Ok(cams)
}

pub fn load_rig(path: &Path) -> Result<Vec<Camera>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_rig(&bytes)
}

pub fn rig_to_json(cameras: &[Camera]) -> Vec<u8> {
    let file = RigFile {
        cameras: cameras
            .iter()
            .map(|c| RigCamera {
                width: c.width,
                height: c.height,
                fx: c.fx,
                fy: c.fy,
                cx: c.cx,
                cy: c.cy,
                world_to_camera: c.world_to_camera.iter().flatten().copied().collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("rig serialization cannot fail");
    out.push(b'\n');
    out
}

pub fn save_rig(path: &Path, cameras: &[Camera]) -> Result<()> {
    fsutil::write_atomic(path, &rig_to_json(cameras))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Camera> {
        crate::synth::make_orbit_cameras(3, [0.0, 1.0, 2.0], 4.0, 320, 240, 280.0).unwrap()
    }

    #[test]
    fn roundtrip_preserves_cameras() {
        let cams = sample();
        let json = rig_to_json(&cams);
        let back = parse_rig(&json).unwrap();
        assert_eq!(back.len(), cams.len());
        for (a, b) in cams.iter().zip(&back) {
            assert_eq!(a.width, b.width);
            assert_eq!(a.height, b.height);
            assert_eq!(a.fx.to_bits(), b.fx.to_bits());
            assert_eq!(a.world_to_camera, b.world_to_camera);
        }
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rig.json");
        let cams = sample();
        save_rig(&path, &cams).unwrap();
        let back = load_rig(&path).unwrap();
        assert_eq!(back.len(), 3);
    }

    #[test]
    fn hand_written_fixture_parses() {
        let json = br#"{
            "cameras": [{
                "width": 64, "height": 48,
                "fx": 50.0, "fy": 50.0, "cx": 32.0, "cy": 24.0,
                "world_to_camera": [1,0,0,0, 0,1,0,0, 0,0,1,5, 0,0,0,1]
            }]
        }"#;
        let cams = parse_rig(json).unwrap();
        assert_eq!(cams.len(), 1);
        assert_eq!(cams[0].transform_point([0.0, 0.0, 0.0]), [0.0, 0.0, 5.0]);
    }

    #[test]
    fn malformed_json_is_format_error() {
        let err = parse_rig(b"{\"cameras\": [").unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err:?}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn wrong_matrix_length_is_format_error() {
        let json = br#"{"cameras": [{"width": 64, "height": 48, "fx": 50.0, "fy": 50.0,
            "cx": 32.0, "cy": 24.0, "world_to_camera": [1,0,0]}]}"#;
        let err = parse_rig(json).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err:?}");
    }

    #[test]
    fn invalid_pose_is_invariant_error() {
        // Rotation block scaled by 2 is not orthonormal.
        let json = br#"{"cameras": [{"width": 64, "height": 48, "fx": 50.0, "fy": 50.0,
            "cx": 32.0, "cy": 24.0,
            "world_to_camera": [2,0,0,0, 0,2,0,0, 0,0,2,0, 0,0,0,1]}]}"#;
        let err = parse_rig(json).unwrap_err();
        assert_eq!(err.exit_code(), 4, "{err:?}");
    }

    #[test]
    fn empty_rig_is_allowed_by_parser() {
        let cams = parse_rig(b"{\"cameras\": []}").unwrap();
        assert!(cams.is_empty());
    }
}
