//! `placekit` command-line front end.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use placekit_core::bench::{
    evaluate_submission, generate_dataset, read_jsonl, solve_baseline, write_jsonl, BenchmarkExample, CandidateOrder, GenConfig, Prediction,
};
use placekit_core::constraints::{evaluate_prompt, Constraint, ThresholdConfig};
use placekit_core::geometry::Vec3;
use placekit_core::masks::{lift_to_center_frame, FORMAT_VERSION};
use placekit_core::prompts::{parse_prompt, render_prompt, TemplateLibrary};
use placekit_core::scene::{
    export_asset, export_scene, generate_synthetic_scene, ingest_asset, ingest_scene, load_asset_dir, load_scene_dir, Asset, IngestOptions,
    Placement, SceneModel, SynthSceneSpec,
};

const CONFIG_ENV: &str = "PLACEKIT_CONFIG";
const MANIFEST_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "placekit", about = "Language-guided 3D asset placement: data generation, checking and scoring", disable_version_flag = true)]
struct Cli {
    /// Threshold config (JSON). Defaults to $PLACEKIT_CONFIG, then built-in values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print engine and file-format versions.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic room (and optional cuboid assets) to disk.
    Synth(SynthArgs),
    /// Generate a verified dataset: manifest plus one mask per example.
    Gen(GenArgs),
    /// Check one placement against a prompt.
    Check(CheckArgs),
    /// Score a submission against a manifest.
    Eval(EvalArgs),
    /// Run the rule-based baseline over a manifest.
    Solve(SolveArgs),
    /// Render or parse prompts.
    #[command(subcommand)]
    Prompt(PromptCommand),
    /// Distribution report for a manifest.
    Stats(StatsArgs),
}

#[derive(Args)]
struct Jobs {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// Room spec (JSON). Without it a random room is drawn from --seed.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest room side for random rooms, meters.
    #[arg(long, default_value_t = 8.0)]
    max_extent: f64,
    #[arg(long, default_value_t = 8)]
    max_items: usize,
    /// Number of random rooms, seeds seed..seed+count.
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Also write a cuboid asset, as `ID:WxDxH` in meters. Repeatable.
    #[arg(long = "cuboid-asset")]
    cuboid_assets: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    assets: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Distribution config (JSON). Without it the benchmark proportions are scaled to --examples.
    #[arg(long)]
    gen_config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    examples: usize,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct CheckArgs {
    /// Scene mesh (PLY).
    #[arg(long)]
    scene: PathBuf,
    /// Scene annotation (JSON).
    #[arg(long)]
    anno: PathBuf,
    /// Asset mesh (PLY); its sidecar defaults to the same path with a .json extension.
    #[arg(long)]
    asset: PathBuf,
    #[arg(long)]
    asset_meta: Option<PathBuf>,
    #[arg(long)]
    prompt: String,
    /// Asset center, `x,y,z`.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    t: Vec3,
    /// Yaw in radians.
    #[arg(long, allow_hyphen_values = true)]
    yaw: f64,
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    submission: PathBuf,
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    assets: PathBuf,
    /// Write metrics here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Distance,
    Center,
    Random,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    assets: PathBuf,
    #[arg(long, value_enum, default_value_t = Order::Distance)]
    order: Order,
    /// Seed for `--order random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the submission here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Subcommand)]
enum PromptCommand {
    /// Render a constraint list (JSON array) to text.
    Render {
        #[arg(long)]
        constraints: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Parse prompt text back to constraints.
    Parse {
        #[arg(long)]
        text: String,
        /// Anchor classes, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with = "anno")]
        vocab: Vec<String>,
        /// Take the anchor classes from a scene annotation instead.
        #[arg(long)]
        anno: Option<PathBuf>,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    manifest: PathBuf,
}

fn parse_vec3(s: &str) -> std::result::Result<Vec3, String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| e.to_string())?;
    match v[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected x,y,z, got `{s}`")),
    }
}

fn load_config(path: Option<&Path>) -> Result<ThresholdConfig> {
    let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    match path.map(Path::to_path_buf).or(env) {
        Some(p) => {
            log::info!("threshold config: {}", p.display());
            Ok(ThresholdConfig::load(&p).with_context(|| format!("loading config {}", p.display()))?)
        }
        None => Ok(ThresholdConfig::default()),
    }
}

fn load_library(path: Option<&Path>) -> Result<TemplateLibrary> {
    Ok(match path {
        Some(p) => TemplateLibrary::load(p).with_context(|| format!("loading templates {}", p.display()))?,
        None => TemplateLibrary::builtin(),
    })
}

/// Runs `f` on a pool of `jobs` threads, or the global pool.
fn with_jobs<T: Send>(jobs: &Jobs, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs.jobs {
        Some(0) => bail!("--jobs must be at least 1"),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
        None => Ok(f()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn write_json_file<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load_world(scenes: &Path, assets: &Path) -> Result<(HashMap<String, SceneModel>, HashMap<String, Asset>)> {
    let s = load_scene_dir(scenes, &IngestOptions::default()).with_context(|| format!("loading scenes from {}", scenes.display()))?;
    let a = load_asset_dir(assets).with_context(|| format!("loading assets from {}", assets.display()))?;
    log::info!("loaded {} scenes and {} assets", s.len(), a.len());
    Ok((
        s.into_iter().map(|s| (s.scene_id.clone(), s)).collect(),
        a.into_iter().map(|a| (a.asset_id.clone(), a)).collect(),
    ))
}

fn cuboid_asset(spec: &str) -> Result<Asset> {
    let (id, dims) = spec.split_once(':').ok_or_else(|| anyhow!("cuboid asset `{spec}` must look like ID:WxDxH"))?;
    let d: Vec<f64> = dims.split('x').map(str::parse).collect::<std::result::Result<_, _>>().with_context(|| format!("bad size in `{spec}`"))?;
    let [w, dp, h] = d[..] else { bail!("cuboid asset `{spec}` needs three sizes") };
    Ok(Asset::cuboid(id, Vec3::new(w, dp, h))?)
}

fn synth(args: &SynthArgs) -> Result<()> {
    let specs: Vec<SynthSceneSpec> = match (&args.spec, args.seed) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            vec![serde_json::from_str(&text).map_err(placekit_core::Error::from)?]
        }
        (None, Some(seed)) => (seed..seed + args.count).map(|s| SynthSceneSpec::random(s, args.max_extent, args.max_items)).collect(),
        (None, None) => bail!("synth needs --spec or --seed"),
    };
    let mut written = Vec::new();
    for spec in &specs {
        let scene = generate_synthetic_scene(spec)?;
        let (mesh, anno) = export_scene(&scene, &args.out)?;
        eprintln!("{}: {} anchors, {} points", scene.scene_id, scene.anchors.len(), scene.points.len());
        written.push(serde_json::json!({ "scene_id": scene.scene_id, "mesh": mesh, "annotation": anno }));
    }
    for spec in &args.cuboid_assets {
        let asset = cuboid_asset(spec)?;
        let (mesh, side) = export_asset(&asset, &args.out.join("assets"))?;
        written.push(serde_json::json!({ "asset_id": asset.asset_id, "mesh": mesh, "sidecar": side }));
    }
    print_json(&written)
}

fn gen(args: &GenArgs, cfg: &ThresholdConfig) -> Result<bool> {
    let scenes = load_scene_dir(&args.scenes, &IngestOptions::default())?;
    let assets = load_asset_dir(&args.assets)?;
    let gen_cfg = match &args.gen_config {
        Some(p) => {
            let g: GenConfig = serde_json::from_str(&std::fs::read_to_string(p)?).map_err(placekit_core::Error::from)?;
            g.validate()?;
            g
        }
        None => GenConfig::table1(args.examples)?,
    };
    let lib = TemplateLibrary::builtin();
    eprintln!("generating {} examples from {} scenes and {} assets", gen_cfg.example_count(), scenes.len(), assets.len());
    let out = with_jobs(&args.jobs, || generate_dataset(&scenes, &assets, &gen_cfg, &lib, cfg, args.seed))??;
    out.write(&args.out)?;
    let (groups, counts) = out.histogram();
    eprintln!("wrote {} examples to {} (groups {groups:?}, sizes {counts:?})", out.examples.len(), args.out.display());
    if !out.failures.is_empty() {
        eprintln!("{} examples failed; see failures.json", out.failures.len());
    }
    Ok(out.failures.is_empty())
}

fn check(args: &CheckArgs, cfg: &ThresholdConfig) -> Result<()> {
    let scene = ingest_scene(&args.scene, &args.anno, &IngestOptions::default())?;
    let meta = args.asset_meta.clone().unwrap_or_else(|| args.asset.with_extension("json"));
    let asset = ingest_asset(&args.asset, &meta)?;
    let lib = load_library(args.templates.as_deref())?;
    let constraints = parse_prompt(&args.prompt, &lib, &scene.anchor_vocabulary())?;
    let p = Placement::new(args.t, args.yaw)?;
    let report = evaluate_prompt(&scene, &asset, &p, &constraints, cfg);
    eprintln!("complete: {}, language: {}", report.complete_ok, report.language_ok);
    print_json(&report)
}

fn eval(args: &EvalArgs, cfg: &ThresholdConfig) -> Result<()> {
    let examples: Vec<BenchmarkExample> = read_jsonl(&args.manifest)?;
    let preds: Vec<Prediction> = read_jsonl(&args.submission)?;
    let (scenes, assets) = load_world(&args.scenes, &args.assets)?;
    let report = with_jobs(&args.jobs, || evaluate_submission(&examples, &scenes, &assets, &preds, cfg))??;
    eprintln!("examples: {}", report.examples);
    eprintln!("global constraint accuracy: {}", report.constraints);
    eprintln!("complete placement success: {}", report.complete);
    eprintln!("language adherence success: {}", report.language);
    for (g, c) in &report.group_counts {
        eprintln!("  {}: {c}", g.name());
    }
    match &args.out {
        Some(p) => write_json_file(p, &report),
        None => print_json(&report),
    }
}

fn solve(args: &SolveArgs, cfg: &ThresholdConfig) -> Result<()> {
    use rayon::prelude::*;
    let examples: Vec<BenchmarkExample> = read_jsonl(&args.manifest)?;
    let (scenes, assets) = load_world(&args.scenes, &args.assets)?;
    let order = match args.order {
        Order::Distance => CandidateOrder::DistanceToInvalid,
        Order::Center => CandidateOrder::CenterOut,
        Order::Random => CandidateOrder::Random { seed: args.seed },
    };
    let preds: Vec<Result<Prediction>> = with_jobs(&args.jobs, || {
        examples
            .par_iter()
            .map(|ex| {
                let scene = scenes.get(&ex.scene_id).ok_or_else(|| anyhow!("unknown scene `{}`", ex.scene_id))?;
                let asset = assets.get(&ex.asset_id).ok_or_else(|| anyhow!("unknown asset `{}`", ex.asset_id))?;
                let p = match solve_baseline(scene, asset, &ex.constraints, cfg, order) {
                    Ok(p) => p,
                    Err(placekit_core::Error::NoSolution(why)) => {
                        // keep the submission complete; the fallback is scored like any other guess
                        log::warn!("{}: no verified placement ({why}); using the first scene point", ex.example_id);
                        lift_to_center_frame(scene.points[0].position, asset, 0.0)
                    }
                    Err(e) => return Err(e.into()),
                };
                Ok(Prediction {
                    example_id: ex.example_id.clone(),
                    t: p.t.to_array(),
                    yaw: p.yaw,
                })
            })
            .collect()
    })?;
    let preds = preds.into_iter().collect::<Result<Vec<_>>>()?;
    eprintln!("solved {} examples", preds.len());
    match &args.out {
        Some(p) => Ok(write_jsonl(p, &preds)?),
        None => {
            let mut out = std::io::stdout().lock();
            for p in &preds {
                serde_json::to_writer(&mut out, p)?;
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn prompt(cmd: &PromptCommand) -> Result<()> {
    match cmd {
        PromptCommand::Render { constraints, seed, templates } => {
            let cs: Vec<Constraint> = serde_json::from_str(constraints).map_err(placekit_core::Error::from)?;
            let text = render_prompt(&cs, &load_library(templates.as_deref())?, *seed)?;
            println!("{text}");
            Ok(())
        }
        PromptCommand::Parse { text, vocab, anno, templates } => {
            let vocab = match anno {
                Some(p) => {
                    let a: placekit_core::scene::io::AnnotationFile =
                        serde_json::from_str(&std::fs::read_to_string(p)?).map_err(placekit_core::Error::from)?;
                    let mut v: Vec<String> = a.anchors.into_iter().map(|r| r.class).collect();
                    v.sort();
                    v.dedup();
                    v
                }
                None => vocab.clone(),
            };
            let cs = parse_prompt(text, &load_library(templates.as_deref())?, &vocab)?;
            print_json(&cs)
        }
    }
}

fn stats(args: &StatsArgs) -> Result<()> {
    let examples: Vec<BenchmarkExample> = read_jsonl(&args.manifest)?;
    let mut groups: BTreeMap<&str, usize> = BTreeMap::new();
    let mut relationships: BTreeMap<&str, usize> = BTreeMap::new();
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut scenes: BTreeMap<&str, usize> = BTreeMap::new();
    for ex in &examples {
        *sizes.entry(ex.constraints.len()).or_default() += 1;
        *scenes.entry(ex.scene_id.as_str()).or_default() += 1;
        for c in &ex.constraints {
            *groups.entry(c.group().name()).or_default() += 1;
            *relationships.entry(c.relationship()).or_default() += 1;
        }
    }
    eprintln!("{} examples, {} constraints", examples.len(), groups.values().sum::<usize>());
    print_json(&serde_json::json!({
        "examples": examples.len(),
        "constraints_per_example": sizes,
        "groups": groups,
        "relationships": relationships,
        "examples_per_scene": scenes,
    }))
}

/// 1 for input/validation problems, 2 for I/O failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<placekit_core::Error>() {
            return if e.is_io() { 2 } else { 1 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> Result<bool> {
    if cli.version {
        println!(
            "placekit {} (engine {}, mask format v{FORMAT_VERSION}, manifest format v{MANIFEST_VERSION})",
            env!("CARGO_PKG_VERSION"),
            placekit_core::VERSION
        );
        return Ok(true);
    }
    let Some(command) = cli.command else {
        bail!("no subcommand given; see --help");
    };
    let cfg = load_config(cli.config.as_deref())?;
    match command {
        Command::Synth(a) => synth(&a)?,
        Command::Gen(a) => return gen(&a, &cfg),
        Command::Check(a) => check(&a, &cfg)?,
        Command::Eval(a) => eval(&a, &cfg)?,
        Command::Solve(a) => solve(&a, &cfg)?,
        Command::Prompt(c) => prompt(&c)?,
        Command::Stats(a) => stats(&a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
