//! Generates each built-in synthetic scene plus an orbit camera rig and
//! writes them to disk, ready for the other examples or the CLI.
//!
//! Usage: cargo run --example synthesize_scenes [out_dir]

use anyhow::Result;
use exgs::synth::{make_orbit_cameras, make_scene, SynthKind, SynthSpec};

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "exgs_demo".into());
    std::fs::create_dir_all(&out)?;

    for (kind, name) in [
        (SynthKind::TexturedRoom, "room"),
        (SynthKind::RandomBlob, "blob"),
        (SynthKind::PlanarGrid, "grid"),
    ] {
        let mut spec = SynthSpec::new(kind, 4000);
        spec.seed = 9;
        let cloud = make_scene(&spec)?;
        let path = format!("{out}/{name}.ply");
        exgs::ply::save_ply_file(&cloud, &path)?;
        let bytes = std::fs::metadata(&path)?.len();
        println!(
            "{name}: {} gaussians, sh degree {}, {:.2} MB at {path}",
            cloud.count(),
            cloud.sh_degree(),
            bytes as f64 / 1e6
        );
    }

    let cams = make_orbit_cameras(6, [0.0, 0.0, 0.0], 14.0, 640, 480, 520.0)?;
    let rig = format!("{out}/rig.json");
    exgs::rig::save_rig(rig.as_ref(), &cams)?;
    println!("rig: {} cameras orbiting the origin at {rig}", cams.len());
    Ok(())
}
