//! Packs a scene into the .exgs container and back, reporting sizes and
//! verifying the round trip is exactly the binary16 quantization of the
//! input, nothing more lossy.
//!
//! Usage: cargo run --example compress_roundtrip [out_dir]

use anyhow::{ensure, Result};
use exgs::codec::{compress, decompress, quantize_half, ratio_report};
use exgs::synth::{make_scene, SynthKind, SynthSpec};

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "exgs_demo".into());
    std::fs::create_dir_all(&out)?;

    let mut spec = SynthSpec::new(SynthKind::TexturedRoom, 5000);
    spec.seed = 27;
    let cloud = make_scene(&spec)?;
    let ply_path = format!("{out}/roundtrip.ply");
    exgs::ply::save_ply_file(&cloud, &ply_path)?;
    let ply_bytes = std::fs::metadata(&ply_path)?.len();

    let encoded = compress(&cloud)?;
    let exgs_path = format!("{out}/roundtrip.exgs");
    std::fs::write(&exgs_path, &encoded)?;

    let report = ratio_report(ply_bytes, encoded.len() as u64)?;
    println!(
        "{} gaussians: {:.2} MB ply -> {:.2} MB exgs ({:.2}x)",
        cloud.count(),
        report.original_mb,
        report.compressed_mb,
        report.ratio
    );

    let decoded = decompress(&encoded)?;
    let expected = quantize_half(&cloud);
    ensure!(decoded.count() == expected.count());
    let same = decoded
        .means()
        .iter()
        .zip(expected.means())
        .chain(decoded.scales_log().iter().zip(expected.scales_log()))
        .chain(decoded.rotations().iter().zip(expected.rotations()))
        .chain(decoded.opacity_logits().iter().zip(expected.opacity_logits()))
        .chain(decoded.sh_dc().iter().zip(expected.sh_dc()))
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure!(same, "decoded cloud deviates from binary16 quantization");
    println!("round trip is bit-exact against half-precision quantization");
    println!("container: {exgs_path}");
    Ok(())
}
