//! The `.exgs` container: spherical harmonics truncated to the DC band,
//! every remaining attribute quantized to binary16, and the payload packed
//! with XZ (LZMA2). The entropy stage is strictly lossless, so decoding
//! reproduces the binary16 quantization bit for bit.
//!
//! Layout (all little-endian):
//!
//! ```text
//! offset size  field
//! 0      4     magic "EXGS"
//! 4      2     version (1)
//! 6      2     flags: bit 0 = XZ payload, bit 1 = raw payload
//! 8      4     Gaussian count
//! 12     1     SH degree of the stored attributes (always 0 for now)
//! 13     7     reserved, zero
//! 20     ...   payload: means, sh_dc, opacity logits, log scales,
//!              quaternions; each array complete before the next, 14
//!              binary16 values per Gaussian (28 bytes)
//! ```
//!
//! Raw payloads exist so pathological (incompressible) inputs never grow:
//! whichever of the two encodings is smaller wins.

use std::io::Read;

use half::f16;
use lzma_rust2::{XzOptions, XzReader, XzWriter};

use crate::error::{Error, Result};
use crate::model::GaussianCloud;

pub const MAGIC: [u8; 4] = *b"EXGS";
pub const VERSION: u16 = 1;
pub const FLAG_XZ: u16 = 0b01;
pub const FLAG_RAW: u16 = 0b10;
pub const HEADER_LEN: usize = 20;
/// Bytes per Gaussian in the payload: 14 binary16 components.
pub const GAUSSIAN_PAYLOAD_BYTES: usize = 28;

const FORMAT: &str = "exgs";
const XZ_PRESET: u32 = 6;

fn corrupt(reason: impl Into<String>) -> Error {
    Error::Corrupt {
        format: FORMAT,
        reason: reason.into(),
    }
}

/// The exact information the container keeps: SH truncated to degree 0 and
/// every component passed through binary16 (round-to-nearest-even).
/// `decompress(compress(c))` equals this, bit for bit.
pub fn quantize_half(cloud: &GaussianCloud) -> GaussianCloud {
    let through = |v: &f32| f16::from_f32(*v).to_f32();
    let dc = cloud.truncate_sh();
    GaussianCloud::new(
        0,
        dc.means().iter().map(through).collect(),
        dc.scales_log().iter().map(through).collect(),
        dc.rotations().iter().map(through).collect(),
        dc.opacity_logits().iter().map(through).collect(),
        dc.sh_dc().iter().map(through).collect(),
        vec![],
    )
    .expect("quantization preserves array lengths")
}

fn payload_bytes(cloud: &GaussianCloud) -> Vec<u8> {
    let n = cloud.count();
    let mut out = Vec::with_capacity(GAUSSIAN_PAYLOAD_BYTES * n);
    let arrays: [&[f32]; 5] = [
        cloud.means(),
        cloud.sh_dc(),
        cloud.opacity_logits(),
        cloud.scales_log(),
        cloud.rotations(),
    ];
    for arr in arrays {
        for v in arr {
            out.extend_from_slice(&f16::from_f32(*v).to_le_bytes());
        }
    }
    out
}

fn xz_compress(payload: &[u8]) -> Result<Vec<u8>> {
    let mut writer = XzWriter::new(Vec::new(), XzOptions::with_preset(XZ_PRESET))
        .map_err(|e| corrupt(format!("xz encoder setup failed: {e}")))?;
    std::io::Write::write_all(&mut writer, payload)
        .map_err(|e| corrupt(format!("xz encoding failed: {e}")))?;
    writer
        .finish()
        .map_err(|e| corrupt(format!("xz encoding failed: {e}")))
}

/// Encodes a cloud into the container. High-order SH coefficients are
/// dropped; everything else survives at binary16 precision.
pub fn compress(cloud: &GaussianCloud) -> Result<Vec<u8>> {
    let n = cloud.count();
    if n > u32::MAX as usize {
        return Err(Error::CapacityExceeded(format!(
            "{n} Gaussians exceed the u32 container limit"
        )));
    }
    let payload = payload_bytes(cloud);
    let packed = xz_compress(&payload)?;
    let (flags, body) = if packed.len() < payload.len() {
        (FLAG_XZ, packed)
    } else {
        (FLAG_RAW, payload)
    };

    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.push(0); // SH degree of the stored payload
    out.extend_from_slice(&[0u8; 7]);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Decodes a container produced by [`compress`].
pub fn decompress(bytes: &[u8]) -> Result<GaussianCloud> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            format: FORMAT,
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Format {
            format: FORMAT,
            reason: "bad magic".into(),
        });
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            format: FORMAT,
            found: version as u32,
            expected: VERSION as u32,
        });
    }
    let flags = u16::from_le_bytes(bytes[6..8].try_into().unwrap());
    if flags != FLAG_XZ && flags != FLAG_RAW {
        return Err(corrupt(format!("invalid flags {flags:#06x}")));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let sh_degree = bytes[12];
    if sh_degree != 0 {
        return Err(corrupt(format!("unexpected payload SH degree {sh_degree}")));
    }
    if bytes[13..20] != [0u8; 7] {
        return Err(corrupt("reserved header bytes are not zero"));
    }

    let body = &bytes[HEADER_LEN..];
    let expected = count * GAUSSIAN_PAYLOAD_BYTES;
    let payload: Vec<u8> = if flags == FLAG_RAW {
        if body.len() < expected {
            return Err(Error::Truncated {
                format: FORMAT,
                expected: (HEADER_LEN + expected) as u64,
                actual: bytes.len() as u64,
            });
        }
        if body.len() > expected {
            return Err(corrupt("trailing bytes after raw payload"));
        }
        body.to_vec()
    } else {
        let mut out = Vec::with_capacity(expected);
        let mut reader = XzReader::new(body, false).take(expected as u64 + 1);
        reader
            .read_to_end(&mut out)
            .map_err(|e| corrupt(format!("xz decoding failed: {e}")))?;
        if out.len() != expected {
            return Err(corrupt(format!(
                "payload decodes to {} bytes, expected {expected}",
                out.len()
            )));
        }
        out
    };

    let mut halves = payload
        .chunks_exact(2)
        .map(|c| f16::from_le_bytes(c.try_into().unwrap()).to_f32());
    let mut take = |k: usize| -> Vec<f32> { halves.by_ref().take(k).collect() };
    let means = take(3 * count);
    let sh_dc = take(3 * count);
    let logits = take(count);
    let scales = take(3 * count);
    let rots = take(4 * count);
    GaussianCloud::new(0, means, scales, rots, logits, sh_dc, vec![])
}

/// Size comparison between a source file and its compressed form.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RatioReport {
    pub original_bytes: u64,
    pub compressed_bytes: u64,
    /// original / compressed.
    pub ratio: f64,
    /// Sizes in megabytes (1 MB = 10^6 bytes).
    pub original_mb: f64,
    pub compressed_mb: f64,
}

pub fn ratio_report(original_bytes: u64, compressed_bytes: u64) -> Result<RatioReport> {
    if original_bytes == 0 || compressed_bytes == 0 {
        return Err(Error::invalid("sizes must be positive to form a ratio"));
    }
    Ok(RatioReport {
        original_bytes,
        compressed_bytes,
        ratio: original_bytes as f64 / compressed_bytes as f64,
        original_mb: original_bytes as f64 / 1e6,
        compressed_mb: compressed_bytes as f64 / 1e6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sh_rest_dim;
    use proptest::prelude::*;

    fn zero_cloud(n: usize, degree: u8) -> GaussianCloud {
        GaussianCloud::new(
            degree,
            vec![0.0; 3 * n],
            vec![0.0; 3 * n],
            [1.0f32, 0.0, 0.0, 0.0].repeat(n),
            vec![0.0; n],
            vec![0.0; 3 * n],
            vec![0.0; n * sh_rest_dim(degree)],
        )
        .unwrap()
    }

    /// Values whose binary16 encodings are uniform random bit patterns
    /// (finite ones), so the packed payload has no structure to squeeze.
    fn noise_cloud(n: usize, seed: u64) -> GaussianCloud {
        let mut rng = crate::synth_test_rng(seed);
        let mut v = |k: usize| -> Vec<f32> {
            (0..k)
                .map(|_| loop {
                    let bits = (rng.next() & 0xFFFF) as u16;
                    if bits & 0x7C00 != 0x7C00 {
                        break f16::from_bits(bits).to_f32();
                    }
                })
                .collect()
        };
        GaussianCloud::new(0, v(3 * n), v(3 * n), v(4 * n), v(n), v(3 * n), vec![]).unwrap()
    }

    #[test]
    fn empty_cloud_is_exactly_a_header() {
        let bytes = compress(&GaussianCloud::empty(0)).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        let mut want = Vec::new();
        want.extend_from_slice(b"EXGS");
        want.extend_from_slice(&1u16.to_le_bytes());
        want.extend_from_slice(&FLAG_RAW.to_le_bytes());
        want.extend_from_slice(&0u32.to_le_bytes());
        want.extend_from_slice(&[0u8; 8]);
        assert_eq!(bytes, want);
        let back = decompress(&bytes).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.sh_degree(), 0);
    }

    #[test]
    fn payload_is_28_bytes_per_gaussian() {
        // Noise is incompressible, so the container stores it raw and the
        // total is exactly header + 28 * n.
        let cloud = noise_cloud(1000, 5);
        let bytes = compress(&cloud).unwrap();
        let flags = u16::from_le_bytes(bytes[6..8].try_into().unwrap());
        assert_eq!(flags, FLAG_RAW);
        assert_eq!(bytes.len(), HEADER_LEN + 28_000);
        assert_eq!(decompress(&bytes).unwrap(), quantize_half(&cloud));
    }

    #[test]
    fn structured_payload_takes_the_xz_branch() {
        let cloud = zero_cloud(1000, 0);
        let bytes = compress(&cloud).unwrap();
        let flags = u16::from_le_bytes(bytes[6..8].try_into().unwrap());
        assert_eq!(flags, FLAG_XZ);
        assert!(bytes.len() < HEADER_LEN + 28_000 / 10);
        let back = decompress(&bytes).unwrap();
        assert_eq!(back, quantize_half(&cloud));
    }

    #[test]
    fn roundtrip_equals_half_quantization_for_small_counts() {
        for n in [0usize, 1, 7, 1000] {
            for degree in [0u8, 3] {
                let mut cloud = zero_cloud(n, degree);
                if n > 0 {
                    // Make values non-trivial, including extremes.
                    let mut logits = vec![0.0f32; n];
                    logits[0] = 87.5;
                    if n > 1 {
                        logits[1] = -87.5;
                    }
                    cloud = cloud.with_opacity_logits(logits).unwrap();
                }
                let back = decompress(&compress(&cloud).unwrap()).unwrap();
                assert_eq!(back, quantize_half(&cloud), "count {n} degree {degree}");
                assert_eq!(back.sh_degree(), 0);
            }
        }
    }

    #[test]
    fn sh_is_truncated_on_compress() {
        let mut cloud = zero_cloud(3, 3);
        assert_eq!(cloud.sh_rest().len(), 3 * 45);
        cloud = cloud.with_opacity_logits(vec![1.0, 2.0, 3.0]).unwrap();
        let back = decompress(&compress(&cloud).unwrap()).unwrap();
        assert_eq!(back.sh_degree(), 0);
        assert!(back.sh_rest().is_empty());
        // DC band survives quantization.
        assert_eq!(back.sh_dc(), quantize_half(&cloud).sh_dc());
    }

    #[test]
    fn corruption_is_reported_not_panicked() {
        let good = compress(&noise_cloud(20, 9)).unwrap();

        let mut bad = good.clone();
        bad[0] = b'Z';
        assert!(matches!(decompress(&bad), Err(Error::Format { .. })));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(
            decompress(&bad),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));

        let mut bad = good.clone();
        bad[6] = 0x03; // both flag bits
        assert!(matches!(decompress(&bad), Err(Error::Corrupt { .. })));

        let mut bad = good.clone();
        bad[15] = 1; // reserved byte
        assert!(matches!(decompress(&bad), Err(Error::Corrupt { .. })));

        let short = &good[..good.len() - 1];
        assert!(decompress(short).is_err());
        assert!(matches!(
            decompress(&good[..10]),
            Err(Error::Truncated { .. })
        ));

        // Flip a byte inside an XZ payload: checksum must catch it.
        let xz = compress(&zero_cloud(500, 0)).unwrap();
        assert_eq!(u16::from_le_bytes(xz[6..8].try_into().unwrap()), FLAG_XZ);
        let mut bad = xz.clone();
        let mid = HEADER_LEN + (bad.len() - HEADER_LEN) / 2;
        bad[mid] ^= 0xFF;
        assert!(matches!(decompress(&bad), Err(Error::Corrupt { .. })));

        // Truncated XZ payload.
        let cut = &xz[..xz.len() - 5];
        assert!(matches!(decompress(cut), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn ratio_report_values() {
        let r = ratio_report(354_770_000, 3_310_000).unwrap();
        assert!(((r.ratio * 10.0).round() / 10.0 - 107.2).abs() < 1e-9);
        assert!((r.original_mb - 354.77).abs() < 1e-9);
        assert!((r.compressed_mb - 3.31).abs() < 1e-9);

        let r = ratio_report(1000, 1000).unwrap();
        assert_eq!(r.ratio, 1.0);

        let r = ratio_report(248_000, 28_020).unwrap();
        assert!(((r.ratio * 100.0).round() / 100.0 - 8.85).abs() < 1e-9);

        assert!(ratio_report(0, 10).is_err());
        assert!(ratio_report(10, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn roundtrip_is_exactly_half_quantization(
            n in 0usize..40,
            degree in 0u8..=3,
            seed in 0u64..1000,
        ) {
            let mut rng = crate::synth_test_rng(seed);
            let mut v = |k: usize, scale: f32| -> Vec<f32> {
                (0..k).map(|_| (rng.unit() - 0.5) * scale).collect()
            };
            let cloud = GaussianCloud::new(
                degree,
                v(3 * n, 1000.0),
                v(3 * n, 30.0),
                v(4 * n, 2.0),
                v(n, 200.0),
                v(3 * n, 10.0),
                v(n * sh_rest_dim(degree), 2.0),
            )
            .unwrap();
            let back = decompress(&compress(&cloud).unwrap()).unwrap();
            prop_assert_eq!(back, quantize_half(&cloud));
        }
    }
}
