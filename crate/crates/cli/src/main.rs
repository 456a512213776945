use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use meshcompose::geometry::load_mesh;
use meshcompose::metrics::{intersection_report, DEFAULT_SAMPLES};
use meshcompose::pipeline::{
    compose, generate_synthetic_scene, refinement_loop, ComposedScene, Editor, ExternalEditor, MockEditor, PairReport,
    SceneSpec, SyntheticKind,
};
use meshcompose::registration::{global_to_local_align, registrar_from_id, AlignConfig, AlignDirection};
use meshcompose::rng::derive_seed;
use meshcompose::sdf::{bake_sdf_with_stats, save_sdf, DEFAULT_PADDING, DEFAULT_RESOLUTION};

#[derive(Parser)]
#[command(name = "meshcompose", version, about = "Register, compose and check triangle mesh scenes")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Cmd,
}

/// Parameter overrides shared by every subcommand.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// SDF grid samples along the longest axis.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Collision margin in model units.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long = "beta-max", global = true)]
    beta_max: Option<f64>,
    #[arg(long = "k-max", global = true)]
    k_max: Option<usize>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
}

impl Overrides {
    fn apply(&self, spec: &mut SceneSpec) {
        let p = &mut spec.params;
        if let Some(s) = self.seed {
            p.seed = s;
        }
        if let Some(r) = self.resolution {
            p.sdf_resolution = r;
        }
        if let Some(e) = self.epsilon {
            p.collision.epsilon = Some(e);
        }
        if let Some(b) = self.beta_max {
            p.collision.beta_max = b;
        }
        if let Some(k) = self.k_max {
            p.collision.k_max = k;
        }
        if let Some(l) = self.lambda {
            p.collision.lambda = l;
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    AssetToGuidance,
    GuidanceToAsset,
}

#[derive(Subcommand)]
enum Cmd {
    /// Align a source mesh to guidance geometry and print the transform.
    Register {
        src: PathBuf,
        guidance: PathBuf,
        /// Surface samples per mesh.
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = Direction::GuidanceToAsset)]
        direction: Direction,
        /// `ppf-ransac` or `external:<command>`.
        #[arg(long, default_value = "ppf-ransac")]
        registrar: String,
        /// Write the full alignment record here as well.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Bake a signed distance grid from a closed mesh.
    BakeSdf {
        mesh: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Padding around the mesh box, as a fraction of its longest side.
        #[arg(long, default_value_t = DEFAULT_PADDING)]
        padding: f64,
    },
    /// Compose the scene described by a scene file.
    Compose {
        scene: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Run the refinement loop even if the scene file leaves it off.
        #[arg(long)]
        refine: bool,
        /// Write one optimisation trace CSV per placed object here.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Intersection metrics for two meshes, or for every pair of a composed scene.
    Metrics {
        a: PathBuf,
        b: Option<PathBuf>,
        /// Monte Carlo samples for the volume ratio.
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        n: usize,
        /// Treat `a` as composed scene output and report all pairs.
        #[arg(long)]
        against_scene: bool,
    },
    /// Write a synthetic scene with known ground truth.
    GenSynthetic {
        #[arg(long)]
        kind: SyntheticKind,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 2)]
        objects: usize,
    },
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load_scene(path: &Path) -> Result<ComposedScene> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ComposedScene::from_json(&text)?)
}

fn scene_metrics(scene: &ComposedScene, n: usize, seed: u64) -> Result<Vec<PairReport>> {
    let mut placed = Vec::new();
    for o in &scene.objects {
        if let Some(t) = &o.transform {
            let m = load_mesh(&o.asset_mesh_path).with_context(|| format!("object '{}'", o.id))?;
            placed.push((o.id.clone(), m.transformed(t)));
        }
    }
    let mut out = Vec::new();
    let k = placed.len();
    for i in 0..k {
        for j in i + 1..k {
            let report = intersection_report(&placed[i].1, &placed[j].1, n, derive_seed(seed, (i * k + j) as u64))?;
            out.push(PairReport { a: placed[i].0.clone(), b: placed[j].0.clone(), report });
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    let ov = &cli.overrides;
    match cli.command {
        Cmd::Register { src, guidance, samples, direction, registrar, output } => {
            let source = load_mesh(&src)?;
            let guide = load_mesh(&guidance)?;
            let config = AlignConfig {
                sample_n: samples,
                seed: ov.seed.unwrap_or(0),
                direction: match direction {
                    Direction::AssetToGuidance => AlignDirection::AssetToGuidance,
                    Direction::GuidanceToAsset => AlignDirection::GuidanceToAsset,
                },
                ..AlignConfig::default()
            };
            let registrar = registrar_from_id(&registrar)?;
            let alignment = global_to_local_align(&source, &guide, &config, registrar.as_ref())?;
            if let Some(path) = output {
                write_json(&path, &alignment)?;
            }
            print_json(&alignment.result.transform)?;
            eprintln!(
                "rmse {:.6e} after {} iterations{}",
                alignment.result.final_rmse,
                alignment.result.iterations_run,
                if alignment.result.converged { "" } else { " (not converged)" }
            );
        }
        Cmd::BakeSdf { mesh, output, padding } => {
            let m = load_mesh(&mesh)?;
            let (grid, stats) = bake_sdf_with_stats(&m, ov.resolution.unwrap_or(DEFAULT_RESOLUTION), padding)?;
            save_sdf(&grid, &output)?;
            let d = grid.dims();
            eprintln!(
                "{}x{}x{} grid, spacing {:.6e}, sign disagreement {:.4}%",
                d[0],
                d[1],
                d[2],
                grid.spacing(),
                100.0 * stats.disagreement_rate
            );
        }
        Cmd::Compose { scene, output, refine, traces } => {
            let mut spec = SceneSpec::load(&scene)?;
            ov.apply(&mut spec);
            spec.validate()?;
            let mut composed = compose(&spec)?;
            if refine || spec.refinement.enabled {
                let timeout = Duration::from_secs_f64(spec.refinement.editor_timeout_secs);
                let mut editor: Box<dyn Editor> = match &spec.refinement.editor {
                    Some(cmd) => Box::new(ExternalEditor::new(cmd, timeout)?),
                    None => Box::new(MockEditor::default()),
                };
                composed = refinement_loop(composed, &spec, editor.as_mut())?;
            }
            std::fs::write(&output, composed.to_json()? + "\n").with_context(|| format!("writing {}", output.display()))?;
            if let Some(dir) = traces {
                std::fs::create_dir_all(&dir)?;
                for o in &composed.objects {
                    if let Some(trace) = &o.optimization {
                        std::fs::write(dir.join(format!("{}.csv", o.id)), trace.to_csv())?;
                    }
                }
            }
            for o in composed.objects.iter().filter(|o| o.error.is_some()) {
                eprintln!("object '{}' not placed: {}", o.id, o.error.as_deref().unwrap_or_default());
            }
            eprintln!(
                "anchor '{}', max r_volume {:.4e}, max penetration {:.4e} (epsilon {:.4e})",
                composed.anchor_id,
                composed.max_r_volume(),
                composed.max_penetration(),
                composed.epsilon
            );
        }
        Cmd::Metrics { a, b, n, against_scene } => {
            let seed = ov.seed.unwrap_or(0);
            if against_scene {
                if b.is_some() {
                    bail!("--against-scene takes a single composed scene file");
                }
                print_json(&scene_metrics(&load_scene(&a)?, n, seed)?)?;
            } else {
                let Some(b) = b else { bail!("metrics needs two meshes, or --against-scene") };
                print_json(&intersection_report(&load_mesh(&a)?, &load_mesh(&b)?, n, seed)?)?;
            }
        }
        Cmd::GenSynthetic { kind, output, objects } => {
            let case = generate_synthetic_scene(kind, ov.seed.unwrap_or(0), objects, &output)?;
            eprintln!("wrote {}", case.spec_path.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        for cause in e.chain().skip(1) {
            eprintln!("  caused by: {cause}");
        }
        std::process::exit(1);
    }
}
