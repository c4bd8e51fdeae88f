//! Command-line surface. Every subcommand is a thin wrapper over the library
//! and is deterministic: the same inputs and flags produce bitwise-identical
//! output files regardless of worker count.
//!
//! Exit codes: 0 success, 2 usage error (from the argument parser), 3 I/O or
//! format error, 4 parameter or invariant violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::codec;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::img::{GrayBuffer, RgbBuffer};
use crate::metrics::{self, QualityReport};
use crate::model::GaussianCloud;
use crate::ply;
use crate::prune::{self, BudgetMode, PruneConfig};
use crate::render::{render, RenderConfig, ScoreMode};
use crate::restore::{inpaint_baseline, RestoreRequest};
use crate::rig;
use crate::significance;

#[derive(Parser)]
#[command(
    name = "exgs",
    version,
    about = "Compress Gaussian-splat scenes by significance-guided pruning"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Literal,
    Contribution,
}

impl From<ModeArg> for ScoreMode {
    fn from(m: ModeArg) -> ScoreMode {
        match m {
            ModeArg::Literal => ScoreMode::Literal,
            ModeArg::Contribution => ScoreMode::Contribution,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BudgetArg {
    Exact,
    GuaranteedOver,
}

impl From<BudgetArg> for BudgetMode {
    fn from(b: BudgetArg) -> BudgetMode {
        match b {
            BudgetArg::Exact => BudgetMode::Exact,
            BudgetArg::GuaranteedOver => BudgetMode::GuaranteedOver,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Print Gaussian count, harmonic degree, and file size of a scene.
    Info { scene: PathBuf },

    /// Score each Gaussian's visual contribution across a camera rig.
    Score {
        scene: PathBuf,
        /// Camera rig JSON.
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Literal)]
        mode: ModeArg,
        /// Binary score file to write.
        #[arg(short, long)]
        output: PathBuf,
        /// Also write an index,score CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },

    /// Keep the highest-scoring fraction of a scene under voxel coverage
    /// rules, optionally amplifying survivors' opacities.
    Prune {
        scene: PathBuf,
        /// Score file produced by `score`.
        #[arg(long)]
        scores: PathBuf,
        /// Fraction of Gaussians to keep, in (0, 1].
        #[arg(long)]
        ratio: f32,
        /// Voxel edge length in world units.
        #[arg(long, conflicts_with = "voxel_auto")]
        voxel_size: Option<f32>,
        /// Derive the voxel size from the scene extent (the default).
        #[arg(long)]
        voxel_auto: bool,
        /// Voxels with at least this many members always keep one.
        #[arg(long, default_value_t = 4)]
        min_count: usize,
        #[arg(long, value_enum, default_value_t = BudgetArg::Exact)]
        budget: BudgetArg,
        /// Opacity amplification strength; 0 disables.
        #[arg(long, default_value_t = 0.0)]
        amplify: f32,
        #[arg(short, long)]
        output: PathBuf,
    },

    /// Quantize to binary16 and pack into a .exgs container.
    Compress {
        scene: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },

    /// Expand a .exgs container back into a PLY scene.
    Decompress {
        scene: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },

    /// Render one view of a scene (.ply or .exgs) to a PNG.
    Render {
        scene: PathBuf,
        /// Camera rig JSON, optionally with a view index: rig.json#2.
        #[arg(long)]
        camera: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the accumulated-opacity mask here.
        #[arg(long)]
        mask: Option<PathBuf>,
    },

    /// Fill low-confidence pixels of a render by harmonic interpolation.
    Restore {
        degraded: PathBuf,
        /// Grayscale confidence mask; bright pixels are trusted.
        #[arg(long)]
        mask: PathBuf,
        /// Pixels with mask below this are filled.
        #[arg(long, default_value_t = 0.5)]
        threshold: f32,
        /// Jacobi sweeps to run.
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(short, long)]
        output: PathBuf,
    },

    /// Compare two images and write a PSNR/SSIM report.
    Eval {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Resize both images to WxH before comparing (default: native).
        #[arg(long)]
        resize: Option<String>,
    },

    /// Full chain: score, prune, amplify, compress, render, mask, restore,
    /// and evaluate against renders of the unpruned scene.
    Pipeline {
        scene: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        /// Fraction of Gaussians to keep, in (0, 1].
        #[arg(long)]
        ratio: f32,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Literal)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = BudgetArg::Exact)]
        budget: BudgetArg,
        #[arg(long, default_value_t = 0.0)]
        amplify: f32,
        #[arg(long)]
        voxel_size: Option<f32>,
        #[arg(long, default_value_t = 4)]
        min_count: usize,
    },
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Info { scene } => info(&scene),
        Cmd::Score {
            scene,
            cameras,
            mode,
            output,
            csv,
        } => score(&scene, &cameras, mode.into(), &output, csv.as_deref()),
        Cmd::Prune {
            scene,
            scores,
            ratio,
            voxel_size,
            voxel_auto: _,
            min_count,
            budget,
            amplify,
            output,
        } => prune_cmd(
            &scene,
            &scores,
            PruneConfig {
                keep_ratio: ratio,
                voxel_size,
                min_voxel_count: min_count,
                budget: budget.into(),
            },
            amplify,
            &output,
        ),
        Cmd::Compress { scene, output } => compress(&scene, &output),
        Cmd::Decompress { scene, output } => decompress(&scene, &output),
        Cmd::Render {
            scene,
            camera,
            output,
            mask,
        } => render_cmd(&scene, &camera, &output, mask.as_deref()),
        Cmd::Restore {
            degraded,
            mask,
            threshold,
            iters,
            output,
        } => restore_cmd(&degraded, &mask, threshold, iters, &output),
        Cmd::Eval {
            a,
            b,
            output,
            resize,
        } => eval(&a, &b, &output, resize.as_deref()),
        Cmd::Pipeline {
            scene,
            cameras,
            ratio,
            output,
            mode,
            budget,
            amplify,
            voxel_size,
            min_count,
        } => pipeline(
            &scene,
            &cameras,
            mode.into(),
            PruneConfig {
                keep_ratio: ratio,
                voxel_size,
                min_voxel_count: min_count,
                budget: budget.into(),
            },
            amplify,
            &output,
        ),
    }
}

/// Loads a scene from either container, deciding by content, not extension.
fn load_scene(path: &Path) -> Result<GaussianCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&codec::MAGIC) {
        codec::decompress(&bytes)
    } else {
        ply::load_ply(&bytes)
    }
}

fn file_size(path: &Path) -> Result<u64> {
    Ok(std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len())
}

fn info(scene: &Path) -> Result<()> {
    let cloud = load_scene(scene)?;
    let bytes = file_size(scene)?;
    println!("count: {}", cloud.count());
    println!("sh_degree: {}", cloud.sh_degree());
    println!("size_bytes: {bytes}");
    println!("size_mb: {:.2}", bytes as f64 / 1e6);
    Ok(())
}

fn score(
    scene: &Path,
    cameras: &Path,
    mode: ScoreMode,
    output: &Path,
    csv: Option<&Path>,
) -> Result<()> {
    let cloud = ply::load_ply_file(scene)?;
    let cams = rig::load_rig(cameras)?;
    let sig = significance::compute_significance(&cloud, &cams, mode)?;
    significance::write_scores_bin(sig.scores(), output)?;
    if let Some(csv) = csv {
        significance::write_scores_csv(sig.scores(), csv)?;
    }
    log::info!(
        "scored {} gaussians over {} views",
        cloud.count(),
        cams.len()
    );
    Ok(())
}

fn prune_cmd(
    scene: &Path,
    scores_path: &Path,
    cfg: PruneConfig,
    amplify: f32,
    output: &Path,
) -> Result<()> {
    let cloud = ply::load_ply_file(scene)?;
    let scores = significance::read_scores_bin(scores_path)?;
    let (pruned, outcome) = prune::prune(&cloud, &scores, &cfg)?;
    let result = if amplify > 0.0 {
        let index = prune::voxelize(&cloud, outcome.voxel_size)?;
        prune::amplify_opacity(&pruned, &outcome.kept, &index, amplify)?
    } else {
        pruned
    };
    ply::save_ply_file(&result, output)?;
    println!(
        "kept {} of {} (budget {}, voxel size {})",
        outcome.kept.len(),
        cloud.count(),
        outcome.budget,
        outcome.voxel_size
    );
    Ok(())
}

fn compress(scene: &Path, output: &Path) -> Result<()> {
    let cloud = ply::load_ply_file(scene)?;
    let bytes = codec::compress(&cloud)?;
    write_atomic(output, &bytes)?;
    let report = codec::ratio_report(file_size(scene)?, bytes.len() as u64)?;
    println!(
        "{:.2}x ({:.2} MB -> {:.2} MB)",
        report.ratio, report.original_mb, report.compressed_mb
    );
    Ok(())
}

fn decompress(scene: &Path, output: &Path) -> Result<()> {
    let bytes = std::fs::read(scene).map_err(|e| Error::io(scene, e))?;
    let cloud = codec::decompress(&bytes)?;
    ply::save_ply_file(&cloud, output)?;
    println!("decoded {} gaussians", cloud.count());
    Ok(())
}

/// Splits `rig.json#i` into path and view index; a bare path means view 0.
fn parse_camera_ref(spec: &str) -> Result<(PathBuf, usize)> {
    match spec.rsplit_once('#') {
        None => Ok((PathBuf::from(spec), 0)),
        Some((path, frag)) => {
            let idx = frag.parse::<usize>().map_err(|_| {
                Error::invalid(format!("camera fragment {frag:?} is not a view index"))
            })?;
            Ok((PathBuf::from(path), idx))
        }
    }
}

fn render_cmd(scene: &Path, camera: &str, output: &Path, mask: Option<&Path>) -> Result<()> {
    let (rig_path, idx) = parse_camera_ref(camera)?;
    let cams = rig::load_rig(&rig_path)?;
    let cam = cams.get(idx).ok_or_else(|| {
        Error::invalid(format!(
            "camera index {idx} out of range, rig has {} cameras",
            cams.len()
        ))
    })?;
    let cloud = load_scene(scene)?;
    let out = render(&cloud, cam, &RenderConfig::default())?;
    out.color.save_png(output)?;
    if let Some(mask) = mask {
        out.accum_opacity.save_png(mask)?;
    }
    Ok(())
}

fn restore_cmd(
    degraded: &Path,
    mask: &Path,
    threshold: f32,
    iters: usize,
    output: &Path,
) -> Result<()> {
    let req = RestoreRequest {
        degraded: RgbBuffer::load_png(degraded)?,
        mask: GrayBuffer::load_png(mask)?,
        fill_threshold: threshold,
        iterations: iters,
    };
    let out = inpaint_baseline(&req)?;
    out.image.save_png(output)?;
    Ok(())
}

fn parse_dims(spec: &str) -> Result<(u32, u32)> {
    let err = || Error::invalid(format!("resize spec {spec:?} is not WxH"));
    let (w, h) = spec.split_once('x').ok_or_else(err)?;
    let w = w.parse::<u32>().map_err(|_| err())?;
    let h = h.parse::<u32>().map_err(|_| err())?;
    if w == 0 || h == 0 {
        return Err(err());
    }
    Ok((w, h))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports always serialize");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn eval(a: &Path, b: &Path, output: &Path, resize: Option<&str>) -> Result<()> {
    let mut img_a = RgbBuffer::load_png(a)?;
    let mut img_b = RgbBuffer::load_png(b)?;
    if let Some(spec) = resize {
        let (w, h) = parse_dims(spec)?;
        img_a = img_a.resize(w, h)?;
        img_b = img_b.resize(w, h)?;
    }
    let q = metrics::quality(&img_a, &img_b)?;
    write_json(&q, output)?;
    println!("psnr: {:.4} dB  ssim: {:.6}", q.psnr, q.ssim);
    Ok(())
}

#[derive(Serialize)]
struct ViewMetrics {
    view: usize,
    /// Decoded render versus the unpruned render.
    compressed: QualityReport,
    /// Hole-filled render versus the unpruned render.
    restored: QualityReport,
}

#[derive(Serialize)]
struct MeanMetrics {
    compressed_psnr: f64,
    compressed_ssim: f64,
    restored_psnr: f64,
    restored_ssim: f64,
}

#[derive(Serialize)]
struct MetricsFile {
    schema: u32,
    compression: codec::RatioReport,
    views: Vec<ViewMetrics>,
    mean: MeanMetrics,
}

fn pipeline(
    scene: &Path,
    cameras: &Path,
    mode: ScoreMode,
    cfg: PruneConfig,
    amplify: f32,
    outdir: &Path,
) -> Result<()> {
    let cloud = ply::load_ply_file(scene)?;
    let original_bytes = file_size(scene)?;
    let cams = rig::load_rig(cameras)?;
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;

    log::info!("scoring {} gaussians over {} views", cloud.count(), cams.len());
    let sig = significance::compute_significance(&cloud, &cams, mode)?;

    let (pruned, outcome) = prune::prune(&cloud, sig.scores(), &cfg)?;
    log::info!(
        "kept {} of {} (budget {})",
        outcome.kept.len(),
        cloud.count(),
        outcome.budget
    );
    let index = prune::voxelize(&cloud, outcome.voxel_size)?;
    let survivors = prune::amplify_opacity(&pruned, &outcome.kept, &index, amplify)?;
    ply::save_ply_file(&survivors, outdir.join("pruned.ply"))?;

    let exgs = codec::compress(&survivors)?;
    write_atomic(&outdir.join("scene.exgs"), &exgs)?;
    let compression = codec::ratio_report(original_bytes, exgs.len() as u64)?;
    let decoded = codec::decompress(&exgs)?;

    let rc = RenderConfig::default();
    let mut views = Vec::with_capacity(cams.len());
    for (i, cam) in cams.iter().enumerate() {
        let reference = render(&cloud, cam, &rc)?;
        let degraded = render(&decoded, cam, &rc)?;
        degraded
            .color
            .save_png(outdir.join(format!("render_{i:03}.png")))?;
        degraded
            .accum_opacity
            .save_png(outdir.join(format!("mask_{i:03}.png")))?;
        let req = RestoreRequest::new(degraded.color.clone(), degraded.accum_opacity.clone());
        let restored = inpaint_baseline(&req)?;
        restored
            .image
            .save_png(outdir.join(format!("restored_{i:03}.png")))?;
        views.push(ViewMetrics {
            view: i,
            compressed: metrics::quality(&reference.color, &degraded.color)?,
            restored: metrics::quality(&reference.color, &restored.image)?,
        });
        log::info!("view {i} done");
    }

    let n = views.len().max(1) as f64;
    let mean = MeanMetrics {
        compressed_psnr: views.iter().map(|v| v.compressed.psnr).sum::<f64>() / n,
        compressed_ssim: views.iter().map(|v| v.compressed.ssim).sum::<f64>() / n,
        restored_psnr: views.iter().map(|v| v.restored.psnr).sum::<f64>() / n,
        restored_ssim: views.iter().map(|v| v.restored.ssim).sum::<f64>() / n,
    };
    let report = MetricsFile {
        schema: 1,
        compression,
        views,
        mean,
    };
    write_json(&report, &outdir.join("metrics.json"))?;
    println!(
        "ratio: {:.2}x  mean psnr: {:.2} dB  mean ssim: {:.4}",
        report.compression.ratio, report.mean.compressed_psnr, report.mean.compressed_ssim
    );
    Ok(())
}
