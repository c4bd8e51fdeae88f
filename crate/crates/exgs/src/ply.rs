//! Binary little-endian PLY import/export in the layout 3DGS training
//! pipelines emit.
//!
//! A degree-d cloud stores, per vertex: position, a zeroed normal, 3 DC
//! spherical-harmonic coefficients, `3*((d+1)^2-1)` higher-order
//! coefficients named `f_rest_*`, an opacity logit, 3 log scales, and a
//! quaternion. Properties may appear in any order on input; unknown scalar
//! properties are skipped with a warning. Output always uses the canonical
//! order, so a canonical file round-trips byte-identically.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::{sh_rest_dim, GaussianCloud, MAX_SH_DEGREE};

const FORMAT: &str = "ply";

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dst {
    Mean(u8),
    Normal,
    ShDc(u8),
    ShRest(u16),
    Opacity,
    Scale(u8),
    Rot(u8),
    Ignore,
}

struct PropAction {
    size: usize,
    dst: Dst,
}

fn scalar_size(ty: &str) -> Option<usize> {
    match ty {
        "char" | "int8" | "uchar" | "uint8" => Some(1),
        "short" | "int16" | "ushort" | "uint16" => Some(2),
        "int" | "int32" | "uint" | "uint32" | "float" | "float32" => Some(4),
        "double" | "float64" | "int64" | "uint64" => Some(8),
        _ => None,
    }
}

fn is_f32_type(ty: &str) -> bool {
    ty == "float" || ty == "float32"
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: FORMAT,
        reason: reason.into(),
    }
}

fn unsupported(reason: impl Into<String>) -> Error {
    Error::Unsupported {
        format: FORMAT,
        reason: reason.into(),
    }
}

/// Splits the ASCII header from `bytes`, returning (header lines, body).
fn split_header(bytes: &[u8]) -> Result<(Vec<String>, &[u8])> {
    // Header is ASCII lines terminated by '\n'; body starts right after the
    // "end_header" line.
    let mut pos = 0;
    let mut lines = Vec::new();
    while pos < bytes.len() {
        let nl = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| format_err("header not terminated by end_header"))?;
        let raw = &bytes[pos..pos + nl];
        let line = std::str::from_utf8(raw)
            .map_err(|_| format_err("non-ASCII bytes in header"))?
            .trim_end_matches('\r')
            .to_string();
        pos += nl + 1;
        let done = line.trim() == "end_header";
        lines.push(line);
        if done {
            return Ok((lines, &bytes[pos..]));
        }
        if lines.len() > 4096 {
            return Err(format_err("header exceeds 4096 lines"));
        }
    }
    Err(format_err("header not terminated by end_header"))
}

/// Parses a binary little-endian 3DGS PLY byte sequence.
pub fn load_ply(bytes: &[u8]) -> Result<GaussianCloud> {
    let (lines, body) = split_header(bytes)?;
    if lines.first().map(String::as_str) != Some("ply") {
        return Err(format_err("missing 'ply' magic line"));
    }

    let mut format_seen = false;
    let mut count: Option<usize> = None;
    let mut actions: Vec<PropAction> = Vec::new();
    let mut seen_names: HashSet<String> = HashSet::new();
    let mut f_rest_indices: HashSet<u16> = HashSet::new();
    let mut in_vertex = false;

    for line in &lines[1..] {
        let mut it = line.split_whitespace();
        let Some(keyword) = it.next() else { continue };
        match keyword {
            "comment" | "obj_info" => {}
            "format" => {
                let kind = it.next().unwrap_or("");
                if kind != "binary_little_endian" {
                    return Err(unsupported(format!(
                        "format '{kind}' (only binary_little_endian is supported)"
                    )));
                }
                format_seen = true;
            }
            "element" => {
                let name = it.next().unwrap_or("");
                let n: u64 = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| format_err("malformed element line"))?;
                if name == "vertex" {
                    if count.is_some() {
                        return Err(format_err("duplicate vertex element"));
                    }
                    count = Some(n as usize);
                    in_vertex = true;
                } else {
                    in_vertex = false;
                    if n > 0 {
                        return Err(unsupported(format!(
                            "non-vertex element '{name}' with {n} entries"
                        )));
                    }
                }
            }
            "property" => {
                if !in_vertex {
                    continue; // property of an ignored zero-count element
                }
                let ty = it.next().unwrap_or("");
                if ty == "list" {
                    return Err(unsupported("list properties (mesh data) on vertices"));
                }
                let name = it
                    .next()
                    .ok_or_else(|| format_err("property without a name"))?
                    .to_string();
                let size = scalar_size(ty)
                    .ok_or_else(|| format_err(format!("unknown property type '{ty}'")))?;
                if !seen_names.insert(name.clone()) {
                    return Err(format_err(format!("duplicate property '{name}'")));
                }
                let dst = classify_property(&name, &mut f_rest_indices);
                if dst != Dst::Ignore && dst != Dst::Normal && !is_f32_type(ty) {
                    return Err(unsupported(format!(
                        "property '{name}' has type '{ty}', expected float"
                    )));
                }
                if dst == Dst::Ignore {
                    log::warn!("skipping unknown PLY property '{name}'");
                }
                actions.push(PropAction { size, dst });
            }
            "end_header" => break,
            other => return Err(format_err(format!("unknown header keyword '{other}'"))),
        }
    }

    if !format_seen {
        return Err(format_err("missing format line"));
    }
    let count = count.ok_or_else(|| Error::MissingProperties {
        format: FORMAT,
        missing: vec!["element vertex".to_string()],
    })?;

    let sh_degree = sh_degree_from_rest_count(f_rest_indices.len(), &f_rest_indices)?;
    check_required(&seen_names, sh_degree)?;

    let stride: usize = actions.iter().map(|a| a.size).sum();
    let expected = count as u64 * stride as u64;
    if (body.len() as u64) < expected {
        return Err(Error::Truncated {
            format: FORMAT,
            expected,
            actual: body.len() as u64,
        });
    }
    if body.len() as u64 > expected {
        log::warn!(
            "ignoring {} trailing bytes after vertex data",
            body.len() as u64 - expected
        );
    }

    let rd = sh_rest_dim(sh_degree);
    let mut means = vec![0.0f32; 3 * count];
    let mut scales = vec![0.0f32; 3 * count];
    let mut rots = vec![0.0f32; 4 * count];
    let mut logits = vec![0.0f32; count];
    let mut dc = vec![0.0f32; 3 * count];
    let mut rest = vec![0.0f32; rd * count];

    let mut off = 0usize;
    for i in 0..count {
        for a in &actions {
            if let Dst::Ignore | Dst::Normal = a.dst {
                off += a.size;
                continue;
            }
            let v = f32::from_le_bytes(body[off..off + 4].try_into().unwrap());
            off += 4;
            match a.dst {
                Dst::Mean(k) => means[3 * i + k as usize] = v,
                Dst::ShDc(k) => dc[3 * i + k as usize] = v,
                Dst::ShRest(k) => rest[rd * i + k as usize] = v,
                Dst::Opacity => logits[i] = v,
                Dst::Scale(k) => scales[3 * i + k as usize] = v,
                Dst::Rot(k) => rots[4 * i + k as usize] = v,
                Dst::Ignore | Dst::Normal => unreachable!(),
            }
        }
    }

    GaussianCloud::new(sh_degree, means, scales, rots, logits, dc, rest)
}

fn classify_property(name: &str, f_rest: &mut HashSet<u16>) -> Dst {
    match name {
        "x" => return Dst::Mean(0),
        "y" => return Dst::Mean(1),
        "z" => return Dst::Mean(2),
        "nx" | "ny" | "nz" => return Dst::Normal,
        "f_dc_0" => return Dst::ShDc(0),
        "f_dc_1" => return Dst::ShDc(1),
        "f_dc_2" => return Dst::ShDc(2),
        "opacity" => return Dst::Opacity,
        "scale_0" => return Dst::Scale(0),
        "scale_1" => return Dst::Scale(1),
        "scale_2" => return Dst::Scale(2),
        "rot_0" => return Dst::Rot(0),
        "rot_1" => return Dst::Rot(1),
        "rot_2" => return Dst::Rot(2),
        "rot_3" => return Dst::Rot(3),
        _ => {}
    }
    if let Some(idx) = name.strip_prefix("f_rest_") {
        if let Ok(k) = idx.parse::<u16>() {
            if k < sh_rest_dim(MAX_SH_DEGREE) as u16 && f_rest.insert(k) {
                return Dst::ShRest(k);
            }
        }
    }
    Dst::Ignore
}

fn sh_degree_from_rest_count(n: usize, indices: &HashSet<u16>) -> Result<u8> {
    let degree = match n {
        0 => 0,
        9 => 1,
        24 => 2,
        45 => 3,
        other => {
            return Err(unsupported(format!(
                "{other} f_rest properties do not form a complete SH tier (expected 0, 9, 24, or 45)"
            )))
        }
    };
    let missing: Vec<String> = (0..n as u16)
        .filter(|k| !indices.contains(k))
        .map(|k| format!("f_rest_{k}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingProperties {
            format: FORMAT,
            missing,
        });
    }
    Ok(degree)
}

fn check_required(seen: &HashSet<String>, _sh_degree: u8) -> Result<()> {
    let required = [
        "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
        "rot_0", "rot_1", "rot_2", "rot_3",
    ];
    let missing: Vec<String> = required
        .iter()
        .filter(|n| !seen.contains(**n))
        .map(|n| n.to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingProperties {
            format: FORMAT,
            missing,
        })
    }
}

/// Property names in canonical output order for a given degree.
fn canonical_properties(sh_degree: u8) -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in 0..sh_rest_dim(sh_degree) {
        names.push(format!("f_rest_{k}"));
    }
    for n in ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
        names.push(n.to_string());
    }
    names
}

/// Serializes a cloud in canonical binary little-endian layout. Normals are
/// written as zeros.
pub fn save_ply(cloud: &GaussianCloud) -> Vec<u8> {
    let n = cloud.count();
    let props = canonical_properties(cloud.sh_degree());
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {n}\n"));
    for p in &props {
        header.push_str(&format!("property float {p}\n"));
    }
    header.push_str("end_header\n");

    let stride = 4 * props.len();
    let mut out = Vec::with_capacity(header.len() + stride * n);
    out.extend_from_slice(header.as_bytes());

    let rd = sh_rest_dim(cloud.sh_degree());
    let (means, dc, rest) = (cloud.means(), cloud.sh_dc(), cloud.sh_rest());
    let (logits, scales, rots) = (cloud.opacity_logits(), cloud.scales_log(), cloud.rotations());
    let push = |v: f32, out: &mut Vec<u8>| out.extend_from_slice(&v.to_le_bytes());
    for i in 0..n {
        for k in 0..3 {
            push(means[3 * i + k], &mut out);
        }
        for _ in 0..3 {
            push(0.0, &mut out); // normals carry no information
        }
        for k in 0..3 {
            push(dc[3 * i + k], &mut out);
        }
        for k in 0..rd {
            push(rest[rd * i + k], &mut out);
        }
        push(logits[i], &mut out);
        for k in 0..3 {
            push(scales[3 * i + k], &mut out);
        }
        for k in 0..4 {
            push(rots[4 * i + k], &mut out);
        }
    }
    out
}

pub fn load_ply_file(path: impl AsRef<Path>) -> Result<GaussianCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_ply(&bytes)
}

pub fn save_ply_file(cloud: &GaussianCloud, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &save_ply(cloud))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Builds a canonical degree-3 body for one vertex, byte by byte.
    fn one_vertex_fixture() -> (Vec<u8>, Vec<f32>) {
        let mut header = String::from("ply\nformat binary_little_endian 1.0\nelement vertex 1\n");
        for p in canonical_properties(3) {
            header.push_str(&format!("property float {p}\n"));
        }
        header.push_str("end_header\n");
        let mut values: Vec<f32> = (0..62).map(|i| i as f32 * 0.5 - 3.0).collect();
        // Zero normals: the canonical writer always emits zeros there, so
        // only such fixtures can round-trip byte-identically.
        for v in &mut values[3..6] {
            *v = 0.0;
        }
        let mut bytes = header.into_bytes();
        for v in &values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        (bytes, values)
    }

    #[test]
    fn parses_single_vertex_degree3() {
        let (bytes, values) = one_vertex_fixture();
        let header_len = bytes.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        assert_eq!(bytes.len() - header_len, 248, "one degree-3 vertex is 248 bytes");
        let cloud = load_ply(&bytes).unwrap();
        assert_eq!(cloud.count(), 1);
        assert_eq!(cloud.sh_degree(), 3);
        assert_eq!(cloud.mean(0), [values[0], values[1], values[2]]);
        assert_eq!(cloud.sh_dc(), &values[6..9]);
        assert_eq!(cloud.sh_rest(), &values[9..54]);
        assert_eq!(cloud.opacity_logits(), &[values[54]]);
        assert_eq!(cloud.scales_log(), &values[55..58]);
        assert_eq!(cloud.rotations(), &values[58..62]);
    }

    #[test]
    fn canonical_roundtrip_is_byte_identical() {
        let (bytes, _) = one_vertex_fixture();
        let cloud = load_ply(&bytes).unwrap();
        assert_eq!(save_ply(&cloud), bytes);
    }

    #[test]
    fn body_size_is_248_per_vertex_at_degree3() {
        let cloud = load_ply(&one_vertex_fixture().0).unwrap();
        let many = cloud.gather(&vec![0; 1000]).unwrap();
        let bytes = save_ply(&many);
        let header_len = bytes
            .windows(11)
            .position(|w| w == b"end_header\n")
            .unwrap()
            + 11;
        assert_eq!(bytes.len() - header_len, 248_000);
    }

    #[test]
    fn truncated_body_reports_expected_and_actual() {
        let (mut bytes, _) = one_vertex_fixture();
        let header_end = bytes.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        // Claim two vertices but provide one vertex of data.
        let header = String::from_utf8(bytes[..header_end].to_vec()).unwrap();
        let patched = header.replace("element vertex 1", "element vertex 2");
        let body = bytes.split_off(header_end);
        let mut two = patched.into_bytes();
        two.extend_from_slice(&body);
        match load_ply(&two) {
            Err(Error::Truncated { expected, actual, .. }) => {
                assert_eq!(expected, 496);
                assert_eq!(actual, 248);
            }
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_property_is_a_schema_error() {
        let (bytes, _) = one_vertex_fixture();
        let text = String::from_utf8(bytes[..bytes.len() - 248].to_vec()).unwrap();
        let without = text.replace("property float opacity\n", "");
        let mut broken = without.into_bytes();
        broken.extend_from_slice(&bytes[bytes.len() - 248..bytes.len() - 4]);
        match load_ply(&broken) {
            Err(Error::MissingProperties { missing, .. }) => {
                assert_eq!(missing, vec!["opacity".to_string()]);
            }
            other => panic!("expected MissingProperties, got {other:?}"),
        }
    }

    #[test]
    fn ascii_and_garbage_are_rejected() {
        let ascii = b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(load_ply(ascii), Err(Error::Unsupported { .. })));
        assert!(matches!(load_ply(b"not a ply\n"), Err(Error::Format { .. })));
        assert!(matches!(load_ply(b""), Err(Error::Format { .. })));
        let big_endian = b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(load_ply(big_endian), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn empty_cloud_roundtrip() {
        let empty = GaussianCloud::empty(2);
        let bytes = save_ply(&empty);
        let back = load_ply(&bytes).unwrap();
        assert_eq!(back.count(), 0);
        assert_eq!(back.sh_degree(), 2);
        assert!(bytes.ends_with(b"end_header\n"));
    }

    #[test]
    fn unknown_scalar_properties_are_skipped() {
        let mut header = String::from("ply\nformat binary_little_endian 1.0\nelement vertex 1\n");
        header.push_str("property float x\nproperty float y\nproperty float z\n");
        header.push_str("property double custom_weight\n"); // unknown, 8 bytes
        header.push_str("property float f_dc_0\nproperty float f_dc_1\nproperty float f_dc_2\n");
        header.push_str("property float opacity\n");
        header.push_str("property float scale_0\nproperty float scale_1\nproperty float scale_2\n");
        header.push_str("property float rot_0\nproperty float rot_1\nproperty float rot_2\nproperty float rot_3\n");
        header.push_str("end_header\n");
        let mut bytes = header.into_bytes();
        for v in [1.0f32, 2.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&7.5f64.to_le_bytes());
        for v in [0.1f32, 0.2, 0.3, 0.9, -1.0, -2.0, -3.0, 1.0, 0.0, 0.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let cloud = load_ply(&bytes).unwrap();
        assert_eq!(cloud.count(), 1);
        assert_eq!(cloud.sh_degree(), 0);
        assert_eq!(cloud.mean(0), [1.0, 2.0, 3.0]);
        assert_eq!(cloud.opacity_logits(), &[0.9]);
    }

    #[test]
    fn partial_sh_tier_is_rejected() {
        let mut header = String::from("ply\nformat binary_little_endian 1.0\nelement vertex 0\n");
        for p in ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"] {
            header.push_str(&format!("property float {p}\n"));
        }
        for k in 0..7 {
            header.push_str(&format!("property float f_rest_{k}\n"));
        }
        for p in ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
            header.push_str(&format!("property float {p}\n"));
        }
        header.push_str("end_header\n");
        assert!(matches!(
            load_ply(header.as_bytes()),
            Err(Error::Unsupported { .. })
        ));
    }

    fn arb_cloud() -> impl Strategy<Value = GaussianCloud> {
        (0u8..=3, 0usize..12).prop_flat_map(|(degree, n)| {
            let rd = sh_rest_dim(degree);
            (
                proptest::collection::vec(-10.0f32..10.0, 3 * n),
                proptest::collection::vec(-2.0f32..2.0, 3 * n),
                proptest::collection::vec(-1.0f32..1.0, 4 * n),
                proptest::collection::vec(-5.0f32..5.0, n),
                proptest::collection::vec(-2.0f32..2.0, 3 * n),
                proptest::collection::vec(-1.0f32..1.0, rd * n),
                Just(degree),
            )
                .prop_map(|(m, s, r, o, d, h, degree)| {
                    GaussianCloud::new(degree, m, s, r, o, d, h).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn roundtrip_preserves_all_components(cloud in arb_cloud()) {
            let back = load_ply(&save_ply(&cloud)).unwrap();
            prop_assert_eq!(back, cloud);
        }
    }
}
