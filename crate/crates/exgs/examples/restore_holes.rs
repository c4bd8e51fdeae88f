//! Shows the restoration baseline earning its keep: prune a scene hard,
//! render it, then fill the low-confidence pixels by harmonic
//! interpolation and compare both against the unpruned render.
//!
//! Usage: cargo run --example restore_holes [out_dir]

use anyhow::Result;
use exgs::metrics::quality;
use exgs::prune::{prune, PruneConfig};
use exgs::render::{render, RenderConfig, ScoreMode};
use exgs::restore::{inpaint_baseline, RestoreRequest};
use exgs::significance::compute_significance;
use exgs::synth::{make_orbit_cameras, make_scene, SynthKind, SynthSpec};

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "exgs_demo".into());
    std::fs::create_dir_all(&out)?;

    let mut spec = SynthSpec::new(SynthKind::TexturedRoom, 20_000);
    spec.seed = 43;
    let cloud = make_scene(&spec)?;
    let cams = make_orbit_cameras(3, [0.0, 0.0, 0.0], 14.0, 320, 240, 270.0)?;

    let sig = compute_significance(&cloud, &cams, ScoreMode::Literal)?;
    let cfg = PruneConfig {
        keep_ratio: 0.03,
        ..PruneConfig::default()
    };
    let (sparse, outcome) = prune(&cloud, sig.scores(), &cfg)?;
    println!(
        "kept {} of {} gaussians; holes are expected",
        outcome.kept.len(),
        cloud.count()
    );

    let rc = RenderConfig::default();
    let cam = &cams[0];
    let reference = render(&cloud, cam, &rc)?;
    let degraded = render(&sparse, cam, &rc)?;

    let req = RestoreRequest::new(degraded.color.clone(), degraded.accum_opacity.clone());
    let restored = inpaint_baseline(&req)?;

    degraded.color.save_png(format!("{out}/degraded.png"))?;
    degraded
        .accum_opacity
        .save_png(format!("{out}/confidence.png"))?;
    restored.image.save_png(format!("{out}/restored.png"))?;
    reference.color.save_png(format!("{out}/reference.png"))?;

    let before = quality(&reference.color, &degraded.color)?;
    let after = quality(&reference.color, &restored.image)?;
    println!(
        "against the unpruned render: {:.2} dB / ssim {:.4} before fill, {:.2} dB / ssim {:.4} after",
        before.psnr, before.ssim, after.psnr, after.ssim
    );
    println!("images in {out}/");
    Ok(())
}
