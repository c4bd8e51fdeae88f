//! Scores a scene's Gaussians by their rendered contribution, then prunes
//! at several keep ratios and shows how the voxel coverage rules hold the
//! sparse regions together.
//!
//! Usage: cargo run --example score_and_prune [out_dir]

use anyhow::Result;
use exgs::prune::{prune, voxelize, PruneConfig};
use exgs::render::ScoreMode;
use exgs::significance::compute_significance;
use exgs::synth::{make_orbit_cameras, make_scene, SynthKind, SynthSpec};

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "exgs_demo".into());
    std::fs::create_dir_all(&out)?;

    let mut spec = SynthSpec::new(SynthKind::TexturedRoom, 8000);
    spec.seed = 15;
    let cloud = make_scene(&spec)?;
    let cams = make_orbit_cameras(4, [0.0, 0.0, 0.0], 14.0, 320, 240, 260.0)?;

    let sig = compute_significance(&cloud, &cams, ScoreMode::Contribution)?;
    let mut order: Vec<usize> = (0..cloud.count()).collect();
    order.sort_by(|&a, &b| sig.scores()[b].partial_cmp(&sig.scores()[a]).unwrap());
    println!(
        "scored {} gaussians over {} views; top scores {:?}",
        sig.len(),
        sig.views_used(),
        &order[..5]
            .iter()
            .map(|&i| (i, sig.scores()[i]))
            .collect::<Vec<_>>()
    );

    for keep_ratio in [0.05, 0.1, 0.3] {
        let cfg = PruneConfig {
            keep_ratio,
            ..PruneConfig::default()
        };
        let (pruned, outcome) = prune(&cloud, sig.scores(), &cfg)?;
        let index = voxelize(&cloud, outcome.voxel_size)?;
        println!(
            "ratio {keep_ratio}: kept {} (budget {}), {} voxels with a guaranteed seat, voxel edge {:.3}",
            pruned.count(),
            outcome.budget,
            outcome.guaranteed_voxels,
            index.voxel_size()
        );
        if keep_ratio == 0.1 {
            let path = format!("{out}/pruned_10pct.ply");
            exgs::ply::save_ply_file(&pruned, &path)?;
            println!("  wrote {path}");
        }
    }
    Ok(())
}
