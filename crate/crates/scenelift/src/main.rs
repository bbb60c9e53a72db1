use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use scenelift::app::{self, RenderOptions};
use scenelift::error::{exit, Error, Result};
use scenelift::files::{load_profile, read_structured, PipelineConfig};
use scenelift_core::composite::BlendConfig;
use scenelift_core::geometry::RigidTransform;
use scenelift_core::placement::PlacementConfig;
use scenelift_core::render::{RenderSettings, Shading};
use scenelift_core::synth::{synth_scene, Preset};

#[derive(Parser)]
#[command(name = "scenelift", version, about = "Single-view metric scene recovery and compositing")]
struct Cli {
    /// Worker threads for per-object registration and frame blending (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover a scene file from one RGB-D view, instance masks and object meshes.
    Recover(RecoverArgs),
    /// Sample robot base placements for a recovered scene.
    PlaceRobot(PlaceArgs),
    /// Composite rendered frames over the real background image.
    Blend(BlendArgs),
    /// Render a scene file from its camera.
    Render(RenderArgs),
    /// Write a synthetic scene with ground truth as recover-ready inputs.
    Synth(SynthArgs),
    /// Synthesize, recover and compare against ground truth.
    Roundtrip(RoundtripArgs),
    /// Look up physical properties for an object category.
    Props(PropsArgs),
}

#[derive(Args)]
struct RecoverArgs {
    /// TOML or JSON pipeline config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    depth: Option<PathBuf>,
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long)]
    ground_mask: Option<PathBuf>,
    #[arg(long)]
    background_image: Option<PathBuf>,
    #[arg(long)]
    mesh_dir: Option<PathBuf>,
    #[arg(long)]
    categories: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// RANSAC inlier threshold (meters).
    #[arg(long)]
    ransac_threshold: Option<f64>,
    #[arg(long)]
    ransac_iterations: Option<usize>,
    #[arg(long)]
    icp_iterations: Option<usize>,
    /// Use the plane primitive instead of building a background mesh.
    #[arg(long)]
    plane_primitive: bool,
    /// Extra category → properties table (TOML or JSON).
    #[arg(long)]
    property_table: Option<PathBuf>,
    /// Remote property estimator URL (else $SCENELIFT_PROPERTY_ENDPOINT).
    #[arg(long)]
    property_endpoint: Option<String>,
}

impl RecoverArgs {
    fn into_config(self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let p = &mut cfg.paths;
        let set = |slot: &mut Option<PathBuf>, v: Option<PathBuf>| {
            if v.is_some() {
                *slot = v;
            }
        };
        set(&mut p.image, self.image);
        set(&mut p.depth, self.depth);
        set(&mut p.intrinsics, self.intrinsics);
        set(&mut p.masks, self.masks);
        set(&mut p.ground_mask, self.ground_mask);
        set(&mut p.background_image, self.background_image);
        set(&mut p.mesh_dir, self.mesh_dir);
        set(&mut p.categories, self.categories);
        set(&mut p.output, self.output);
        set(&mut cfg.properties.table, self.property_table);
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.ransac_threshold {
            cfg.ransac.inlier_distance = t;
        }
        if let Some(n) = self.ransac_iterations {
            cfg.ransac.iterations = n;
        }
        if let Some(n) = self.icp_iterations {
            cfg.icp.max_iterations = n;
        }
        if self.plane_primitive {
            cfg.background.use_plane_primitive = true;
        }
        if self.property_endpoint.is_some() {
            cfg.properties.endpoint = self.property_endpoint;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct PlaceArgs {
    scene: PathBuf,
    /// Preset name (tabletop-arm, humanoid) or a profile file.
    #[arg(long, default_value = "tabletop-arm")]
    profile: String,
    /// Candidates written into the scene file.
    #[arg(short, long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `robot_from_camera` transform (JSON/TOML) for a robot-mounted camera.
    #[arg(long)]
    camera_to_robot: Option<PathBuf>,
    /// Updated scene file (default: overwrite the input).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Full candidate list (default: placements.json next to the scene).
    #[arg(long)]
    list: Option<PathBuf>,
}

#[derive(Args)]
struct BlendArgs {
    scene: PathBuf,
    /// Directory of `NNNNNN_color.png` / `NNNNNN_depth.pfm` frames.
    frames: PathBuf,
    #[arg(long)]
    background_image: PathBuf,
    /// Real-scene depth; rendered from the scene's background geometry when omitted.
    #[arg(long)]
    background_depth: Option<PathBuf>,
    /// Occlusion margin (meters).
    #[arg(long, default_value_t = BlendConfig::default().epsilon)]
    epsilon: f64,
    #[arg(long)]
    export_masks: bool,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    scene: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Skip the background geometry.
    #[arg(long)]
    objects_only: bool,
    /// Add a proxy robot at the scene's first placement.
    #[arg(long)]
    robot: bool,
    /// Flat-shade with per-item colors instead of mesh colors.
    #[arg(long)]
    flat: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "tabletop-basic")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian depth noise sigma (meters).
    #[arg(long, default_value_t = 0.0)]
    depth_noise: f64,
    /// Also write this many frames of a proxy robot for `blend`.
    #[arg(long, default_value_t = 0)]
    frames: usize,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct RoundtripArgs {
    #[arg(long, default_value = "tabletop-basic")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    depth_noise: f64,
    /// Working directory for generated inputs and outputs (kept).
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct PropsArgs {
    category: String,
    #[arg(long)]
    context: Option<String>,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    /// Mesh for a mass estimate, with --scale.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Recover(a) => {
            let cfg = a.into_config()?;
            let out = app::run_recover(&cfg)?;
            let d = &out.recovery.diagnostics;
            for w in &d.warnings {
                warn!("{w}");
            }
            info!(
                "recovered {} object(s), plane inliers {}/{}",
                out.recovery.scene.objects.len(),
                d.plane_inliers,
                d.plane_candidates
            );
            emit(&out.output.join("scene.json").display());
        }
        Command::PlaceRobot(a) => {
            let profile = load_profile(&a.profile)?;
            let calib: Option<RigidTransform> = a.camera_to_robot.as_deref().map(read_structured).transpose()?;
            let cfg = PlacementConfig {
                n_samples: a.samples,
                margin: a.margin,
                seed: a.seed,
            };
            let scene_out = a.output.clone().unwrap_or_else(|| a.scene.clone());
            let list_out = a.list.clone().unwrap_or_else(|| sibling(&a.scene, "placements.json"));
            let list = app::run_place_robot(&a.scene, &profile, &cfg, a.n, calib, &scene_out, &list_out)?;
            info!("{} placement candidate(s)", list.candidates.len());
            emit(&list_out.display());
        }
        Command::Blend(a) => {
            let cfg = BlendConfig {
                epsilon: a.epsilon,
                export_masks: a.export_masks,
            };
            let meta = app::run_blend(
                &a.scene,
                &a.frames,
                &a.background_image,
                a.background_depth.as_deref(),
                &cfg,
                &a.output,
            )?;
            info!("blended {} frame(s)", meta.frames);
            emit(&a.output.display());
        }
        Command::Render(a) => {
            let cam = app::scene_camera(&a.scene)?;
            let (w, h) = cam.intrinsics.dims();
            let settings = RenderSettings {
                shading: if a.flat { Shading::Flat } else { Shading::Textured },
                ..RenderSettings::sized(w, h)
            };
            let r = app::render_scene(
                &a.scene,
                &RenderOptions {
                    settings: Some(settings),
                    objects_only: a.objects_only,
                    with_robot: a.robot,
                },
            )?;
            app::write_render(&a.output, &r)?;
            emit(&a.output.display());
        }
        Command::Synth(a) => {
            let s = synth_scene(Preset::parse(&a.preset)?, a.seed, a.depth_noise)?;
            app::write_synth(&s, &a.output, a.frames)?;
            emit(&a.output.join("config.toml").display());
        }
        Command::Roundtrip(a) => {
            let report = app::run_roundtrip(Preset::parse(&a.preset)?, a.seed, a.depth_noise, &a.output)?;
            emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
            if !report.passed {
                warn!("round trip outside tolerances");
            }
        }
        Command::Props(a) => {
            let mesh = a.mesh.as_deref().map(|p| (p, a.scale));
            let out = app::run_props(&a.category, a.context, a.table.as_deref(), a.endpoint.as_deref(), mesh)?;
            emit(&serde_json::to_string_pretty(&out).expect("props serialize"));
        }
    }
    Ok(())
}

/// Prints a result line; a closed pipe (e.g. `| head`) is not an error.
fn emit(s: &dyn std::fmt::Display) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{s}");
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new("")).join(name)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::OK as u8 });
        }
    };
    let level = ["warn", "info", "debug", "trace"][usize::from(cli.verbose.min(3))];
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(Error::Config(format!("thread pool: {e}"))),
        },
        None => run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

