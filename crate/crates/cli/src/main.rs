use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gmmap::bench::{bench_sweep, render_summary, summarize, BenchConfig};
use gmmap::eval::{build_ground_truth, model_bytes, render_table, ReportRow};
use gmmap::io::{
    convert, export_ply, import_ply, load_manifest, load_model, save_model, transform_cloud,
    CameraIntrinsics, Manifest,
};
use gmmap::synth::{build_dataset, RenderNoise, SceneKind};
use gmmap::{compute_metrics, reconstruct, MapperState, ObservedFrame, RunConfig};

#[derive(Parser)]
#[command(name = "gmmap", version, about = "Incremental multimodal mapping with Gaussian mixtures")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the default configuration as TOML.
    InitConfig {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Build a model from a manifest of posed frames.
    Map(MapArgs),
    /// Sample a model into a PLY point cloud.
    Reconstruct(ReconstructArgs),
    /// Score a reconstruction against ground truth.
    Eval(EvalArgs),
    /// Time relevant-subset scoring with and without the spatial hash.
    Bench(BenchArgs),
    /// Render a synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Build a manifest from a TUM or Redwood/ICL-NUIM sequence.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration; missing keys take defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Mode-seeking bandwidth.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Pixel decimation when loading frames.
    #[arg(long)]
    decimation: Option<u32>,
    /// Hash cell size in meters.
    #[arg(long)]
    resolution: Option<f64>,
    /// Fixed relevance threshold instead of calibration.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,
    /// Score relevance with the full 4D density.
    #[arg(long)]
    full_4d: bool,
    /// Score relevance against every component.
    #[arg(long)]
    no_submap: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.bandwidth {
            cfg.sogmm.bandwidth = v;
        }
        if let Some(v) = self.decimation {
            cfg.load.decimation = v;
        }
        if let Some(v) = self.resolution {
            cfg.hash.resolution = v;
        }
        if self.phi.is_some() {
            cfg.mapper.phi = self.phi;
        }
        if self.full_4d {
            cfg.mapper.use_marginal = false;
        }
        if self.no_submap {
            cfg.mapper.use_submap = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Frame manifest (or `paths.manifest`).
    #[arg(long, short)]
    manifest: Option<PathBuf>,
    /// Output model (or `paths.model`).
    #[arg(long, short = 'o')]
    model: Option<PathBuf>,
    /// Per-frame JSON lines; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Process at most this many frames.
    #[arg(long)]
    max_frames: Option<usize>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, short)]
    model: Option<PathBuf>,
    /// Output PLY (or `paths.output`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Predicted cloud as PLY.
    #[arg(long, conflicts_with = "samples")]
    pred: Option<PathBuf>,
    /// Model to reconstruct from, and whose size fills the Mem. column.
    #[arg(long, short)]
    model: Option<PathBuf>,
    /// Sample count when reconstructing from `--model`.
    #[arg(long)]
    samples: Option<usize>,
    /// Ground truth as PLY, used as is.
    #[arg(long, conflicts_with = "manifest")]
    gt: Option<PathBuf>,
    /// Ground truth from the frames of a manifest, voxel filtered.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Precision and recall distance, meters.
    #[arg(long)]
    thresh: Option<f64>,
    #[arg(long, default_value = "gmmap")]
    method: String,
    /// Parameter label; defaults to the bandwidth.
    #[arg(long)]
    param: Option<String>,
    /// Print the row as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Frame manifest; a synthetic corridor is rendered when omitted.
    #[arg(long, short)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "corridor")]
    scene: SceneKind,
    #[arg(long, default_value_t = 50)]
    frames: usize,
    /// Hash resolutions to sweep.
    #[arg(long, value_delimiter = ',')]
    resolutions: Option<Vec<f64>>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Per-frame JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "room")]
    scene: SceneKind,
    #[arg(long, default_value_t = 20)]
    frames: usize,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Depth noise standard deviation, meters.
    #[arg(long, default_value_t = 0.005)]
    depth_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write noise-free frames under `clean`.
    #[arg(long)]
    clean: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceFormat {
    /// TUM RGB-D: depth.txt, rgb.txt and groundtruth.txt under the root.
    Tum,
    /// Redwood / ICL-NUIM: a .log trajectory plus depth and color folders.
    Log,
}

#[derive(Args)]
struct ConvertArgs {
    format: SourceFormat,
    /// Sequence root directory.
    #[arg(long)]
    root: PathBuf,
    /// `.log` trajectory, relative to the root.
    #[arg(long, default_value = "trajectory.log")]
    trajectory: PathBuf,
    #[arg(long, default_value = "depth")]
    depth_dir: PathBuf,
    #[arg(long, default_value = "image")]
    color_dir: PathBuf,
    /// fx fy cx cy width height depth_scale. Defaults to VGA Kinect values
    /// with scale 5000 for TUM and 1000 otherwise.
    #[arg(long, num_args = 7, allow_hyphen_values = true)]
    intrinsics: Option<Vec<f64>>,
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::InitConfig { out } => init_config(out),
        Command::Map(a) => map(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
        Command::Convert(a) => convert_cmd(a),
    }
}

fn required(arg: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    match arg.or_else(|| fallback.clone()) {
        Some(p) => Ok(p),
        None => bail!("no {what} given on the command line or in the configuration"),
    }
}

fn init_config(out: Option<PathBuf>) -> Result<()> {
    let text = RunConfig::default().to_toml()?;
    match out {
        Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn world_frame(manifest: &Manifest, k: usize, decimation: u32) -> Result<ObservedFrame> {
    let f = manifest
        .load_frame(k, decimation)
        .with_context(|| format!("loading frame {k}"))?;
    Ok(ObservedFrame::new(transform_cloud(&f.cloud, &f.pose), f.depths)?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn map(a: MapArgs) -> Result<()> {
    let cfg = a.overrides.resolve()?;
    let manifest_path = required(a.manifest, &cfg.paths.manifest, "manifest")?;
    let model_path = required(a.model, &cfg.paths.model, "model path")?;
    let manifest = load_manifest(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
    let n = a.max_frames.map_or(manifest.frames.len(), |m| m.min(manifest.frames.len()));

    let mut reports = output(a.report.as_deref())?;
    let mut state = MapperState::new(cfg.hash.clone())?;
    for k in 0..n {
        let frame = world_frame(&manifest, k, cfg.load.decimation)?;
        let r = state.process_frame(&frame, &cfg.mapper, &cfg.sogmm)?;
        writeln!(reports, "{}", serde_json::to_string(&r)?)?;
    }
    reports.flush()?;
    let Some(model) = state.global() else {
        bail!("no frame produced a model");
    };
    save_model(model, &model_path)?;
    log::info!(
        "{} components from {n} frames, {} points left in the cache, wrote {}",
        model.len(),
        state.cache().len(),
        model_path.display()
    );
    Ok(())
}

fn reconstruct_cmd(a: ReconstructArgs) -> Result<()> {
    let mut cfg = a.overrides.resolve()?;
    let model_path = required(a.model, &cfg.paths.model, "model")?;
    let out = required(a.out, &cfg.paths.output, "output path")?;
    if let Some(s) = a.samples {
        cfg.inference.total_samples = s;
    }
    if let Some(s) = a.seed {
        cfg.inference.rng_seed = s;
    }
    let model = load_model(&model_path).with_context(|| format!("reading {}", model_path.display()))?;
    let cloud = reconstruct(&model, &cfg.inference)?;
    export_ply(&cloud, &out)?;
    log::info!("{} points from {} components, wrote {}", cloud.len(), model.len(), out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut cfg = a.overrides.resolve()?;
    if let Some(s) = a.samples {
        cfg.inference.total_samples = s;
    }
    let model_path = a.model.or(cfg.paths.model.clone());
    let model = model_path
        .as_ref()
        .map(|p| load_model(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let pred = match (&a.pred, &model) {
        (Some(p), _) => import_ply(p).with_context(|| format!("reading {}", p.display()))?,
        (None, Some(m)) => reconstruct(m, &cfg.inference)?,
        (None, None) => bail!("eval needs --pred or --model"),
    };
    let gt = match (&a.gt, a.manifest.as_ref().or(cfg.paths.manifest.as_ref())) {
        (Some(p), _) => import_ply(p).with_context(|| format!("reading {}", p.display()))?,
        (None, Some(m)) => {
            let manifest = load_manifest(m).with_context(|| format!("reading {}", m.display()))?;
            let frames = (0..manifest.frames.len())
                .map(|k| {
                    let f = manifest.load_frame(k, cfg.eval.gt_decimation)?;
                    Ok((f.cloud, f.pose))
                })
                .collect::<Result<Vec<_>>>()?;
            build_ground_truth(&frames, cfg.eval.gt_voxel)?
        }
        (None, None) => bail!("eval needs --gt or --manifest"),
    };
    let mut report = compute_metrics(&pred, &gt, a.thresh.unwrap_or(cfg.eval.dist_thresh))?;
    report.model_bytes = model.as_ref().map(model_bytes);
    let row = ReportRow {
        method: a.method,
        param: a.param.unwrap_or_else(|| cfg.sogmm.bandwidth.to_string()),
        report,
    };
    if a.json {
        println!("{}", serde_json::to_string(&row)?);
    } else {
        print!("{}", render_table(&[row]));
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let cfg = a.overrides.resolve()?;
    let mut bcfg = BenchConfig::default();
    if let Some(r) = a.resolutions {
        bcfg.resolutions = r;
    }
    if let Some(r) = a.repeats {
        bcfg.repeats = r;
    }
    let frames = match a.manifest.or(cfg.paths.manifest.clone()) {
        Some(p) => {
            let manifest = load_manifest(&p).with_context(|| format!("reading {}", p.display()))?;
            let n = a.frames.min(manifest.frames.len());
            (0..n)
                .map(|k| world_frame(&manifest, k, cfg.load.decimation))
                .collect::<Result<Vec<_>>>()?
        }
        None => {
            let ds = build_dataset(a.scene, a.frames)?;
            (0..a.frames)
                .map(|k| {
                    let (cloud, depths) = ds.world_frame(k, &RenderNoise::default(), cfg.load.decimation)?;
                    Ok(ObservedFrame::new(cloud, depths)?)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let rows = bench_sweep(&frames, &cfg.hash, &cfg.mapper, &cfg.sogmm, &bcfg)?;
    if let Some(p) = &a.out {
        let mut w = output(Some(p))?;
        for r in &rows {
            writeln!(w, "{}", serde_json::to_string(r)?)?;
        }
        w.flush()?;
    }
    print!("{}", render_summary(&summarize(&rows)));
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let ds = build_dataset(a.scene, a.frames)?;
    let noise = RenderNoise {
        depth_sigma: a.depth_sigma,
        seed: a.seed,
    };
    println!("{}", ds.write(&a.out, "frames", &noise)?.display());
    if a.clean {
        println!("{}", ds.write(&a.out, "clean", &RenderNoise::none())?.display());
    }
    Ok(())
}

/// Sorted regular files of a directory.
fn list_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let e = e?;
        if e.file_type()?.is_file() {
            out.push(e.path());
        }
    }
    out.sort();
    Ok(out)
}

fn convert_cmd(a: ConvertArgs) -> Result<()> {
    let intrinsics = match &a.intrinsics {
        Some(v) => CameraIntrinsics {
            fx: v[0],
            fy: v[1],
            cx: v[2],
            cy: v[3],
            width: v[4] as u32,
            height: v[5] as u32,
            depth_scale: v[6],
        },
        None => CameraIntrinsics {
            depth_scale: match a.format {
                SourceFormat::Tum => 5000.0,
                SourceFormat::Log => 1000.0,
            },
            ..gmmap::synth::vga_intrinsics()
        },
    };
    intrinsics.validate()?;
    let read = |name: &Path| {
        let p = a.root.join(name);
        fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
    };
    let manifest = match a.format {
        SourceFormat::Tum => convert::tum_manifest(
            &read(Path::new("depth.txt"))?,
            &read(Path::new("rgb.txt"))?,
            &read(Path::new("groundtruth.txt"))?,
            &a.root,
            intrinsics,
        )?,
        SourceFormat::Log => convert::log_manifest(
            &read(&a.trajectory)?,
            list_dir(&a.root.join(&a.depth_dir))?,
            list_dir(&a.root.join(&a.color_dir))?,
            intrinsics,
        )?,
    };
    manifest.save(&a.out)?;
    log::info!("{} frames, wrote {}", manifest.frames.len(), a.out.display());
    Ok(())
}
