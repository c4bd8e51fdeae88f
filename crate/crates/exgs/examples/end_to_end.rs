//! The whole pipeline as library calls: synthesize, score, prune with
//! opacity amplification, compress, then measure what the compressed and
//! restored renders lose against the original.
//!
//! Usage: cargo run --example end_to_end [out_dir]

use anyhow::Result;
use exgs::codec::{compress, decompress, ratio_report};
use exgs::metrics::quality;
use exgs::prune::{amplify_opacity, prune, voxelize, PruneConfig};
use exgs::render::{render, RenderConfig, ScoreMode};
use exgs::restore::{inpaint_baseline, RestoreRequest};
use exgs::significance::compute_significance;
use exgs::synth::{make_orbit_cameras, make_scene, SynthKind, SynthSpec};

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "exgs_demo".into());
    std::fs::create_dir_all(&out)?;

    let mut spec = SynthSpec::new(SynthKind::TexturedRoom, 30_000);
    spec.seed = 57;
    let cloud = make_scene(&spec)?;
    let ply_path = format!("{out}/scene.ply");
    exgs::ply::save_ply_file(&cloud, &ply_path)?;
    let cams = make_orbit_cameras(3, [0.0, 0.0, 0.0], 14.0, 320, 240, 270.0)?;

    let sig = compute_significance(&cloud, &cams, ScoreMode::Literal)?;
    let cfg = PruneConfig {
        keep_ratio: 0.1,
        ..PruneConfig::default()
    };
    let (pruned, outcome) = prune(&cloud, sig.scores(), &cfg)?;
    let index = voxelize(&cloud, outcome.voxel_size)?;
    let survivors = amplify_opacity(&pruned, &outcome.kept, &index, 1.0)?;

    let encoded = compress(&survivors)?;
    std::fs::write(format!("{out}/scene.exgs"), &encoded)?;
    let report = ratio_report(std::fs::metadata(&ply_path)?.len(), encoded.len() as u64)?;
    println!(
        "{} -> {} gaussians, {:.2} MB -> {:.2} MB ({:.2}x)",
        cloud.count(),
        survivors.count(),
        report.original_mb,
        report.compressed_mb,
        report.ratio
    );

    let decoded = decompress(&encoded)?;
    let rc = RenderConfig::default();
    for (i, cam) in cams.iter().enumerate() {
        let reference = render(&cloud, cam, &rc)?;
        let degraded = render(&decoded, cam, &rc)?;
        let restored = inpaint_baseline(&RestoreRequest::new(
            degraded.color.clone(),
            degraded.accum_opacity.clone(),
        ))?;
        let q_deg = quality(&reference.color, &degraded.color)?;
        let q_res = quality(&reference.color, &restored.image)?;
        println!(
            "view {i}: compressed {:.2} dB / {:.4}, restored {:.2} dB / {:.4}",
            q_deg.psnr, q_deg.ssim, q_res.psnr, q_res.ssim
        );
    }
    println!("artifacts in {out}/");
    Ok(())
}
