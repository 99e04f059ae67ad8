use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use packroute::bench::decompose::{decompose_primitive, fill_ratio};
use packroute::bench::enumerate::{enumerate_discrete_optima, DEFAULT_NODE_BUDGET};
use packroute::bench::generators::{generate, with_control_points, SUITE};
use packroute::bench::run::{run_benchmark, Framework, RunConfig};
use packroute::bench::scene::{load_result, load_scene, replay, save_result, save_scene, write_json, ResultFile, ResultPayload};
use packroute::bench::shapes::Primitive;
use packroute::frameworks::{GaOptions, InitMethod};
use packroute::problem::ObjectiveWeights;
use packroute::ProblemSpec;

#[derive(Parser)]
#[command(name = "packroute", version, about = "Placement and routing of sphere-decomposed bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct RunArgs {
    /// nested, atc or soi.
    #[arg(long, default_value = "nested")]
    framework: String,
    /// random, es, ga or manual.
    #[arg(long, default_value = "random")]
    init: String,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Objective preset f1..f4; keeps the scene's weights when omitted.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "PACKROUTE_JOBS", default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scene file.
    Solve {
        scene: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Result file; defaults to `<scene>.result.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark suite: `analytical`, `priorwork`, or one benchmark
    /// name (cuboid2, lshape4, unique, priorwork3, aircraft, ...).
    Bench {
        suite: String,
        #[arg(long, default_value_t = 20)]
        spheres: usize,
        /// Control points per route for the analytical benchmarks.
        #[arg(long, default_value_t = 0)]
        control_points: usize,
        #[command(flatten)]
        run: RunArgs,
        /// Directory for result files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-evaluate a result file and check it against its stored values.
    Validate { result: PathBuf },
    /// Decompose a primitive (cuboid(w,h,d), cube(s), lshape, double_lshape).
    Decompose {
        shape: String,
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count grid layouts that reach a benchmark's optimum.
    Enumerate {
        benchmark: String,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
    },
    /// Write a benchmark as a scene file.
    Generate {
        benchmark: String,
        #[arg(long, default_value_t = 20)]
        spheres: usize,
        #[arg(long, default_value_t = 0)]
        control_points: usize,
        out: PathBuf,
    },
}

fn run_config(spec: &ProblemSpec, args: &RunArgs) -> Result<RunConfig> {
    let framework = Framework::parse(&args.framework).with_context(|| format!("unknown framework `{}`", args.framework))?;
    let init = match args.init.as_str() {
        "random" => InitMethod::Random,
        "es" => InitMethod::EquallySpaced,
        "ga" => InitMethod::Genetic(GaOptions::default()),
        "manual" => {
            let x0 = spec
                .initial
                .clone()
                .or_else(|| spec.certificate.clone())
                .context("manual init needs `initial` or `certificate` in the scene")?;
            InitMethod::Manual { x0 }
        }
        other => bail!("unknown init method `{other}`"),
    };
    Ok(RunConfig {
        framework,
        init,
        restarts: args.restarts,
        seed: args.seed,
        jobs: args.jobs.max(1),
        ..RunConfig::default()
    })
}

fn apply_preset(spec: &mut ProblemSpec, preset: &Option<String>) -> Result<()> {
    if let Some(p) = preset {
        spec.weights = ObjectiveWeights::preset(p)?;
    }
    Ok(())
}

fn default_out(scene: &Path) -> PathBuf {
    let stem = scene.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    scene.with_file_name(format!("{stem}.result.json"))
}

fn summary_line(name: &str, r: &packroute::bench::run::BenchmarkResult) -> String {
    let b = &r.best;
    let mut line = format!(
        "{name:<16} f={:<12.6} volume={:<10.5} routing={:<10.5} violation={:<9.2e} converged={} feasible={}",
        b.f, r.best_volume, r.best_routing_length, b.max_violation, b.converged, b.feasible
    );
    if let Some(g) = r.gap {
        line.push_str(&format!(" gap=({:+.4}, {:+.4})", g.volume, g.routing_length));
    }
    line
}

fn bench_specs(suite: &str, spheres: usize, control_points: usize) -> Result<Vec<ProblemSpec>> {
    let names: Vec<String> = match suite {
        "analytical" => SUITE.iter().map(|s| s.to_string()).collect(),
        "priorwork" => ["priorwork3", "priorwork4", "priorwork6"].iter().map(|s| s.to_string()).collect(),
        other => vec![other.to_string()],
    };
    names
        .iter()
        .map(|n| {
            let spec = generate(n, spheres)?;
            if control_points > 0 && spec.known_optimum.is_some() {
                Ok(with_control_points(spec, control_points)?)
            } else {
                Ok(spec)
            }
        })
        .collect()
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { scene, run, out } => {
            let mut spec = load_scene(&scene)?;
            apply_preset(&mut spec, &run.preset)?;
            let cfg = run_config(&spec, &run)?;
            let result = run_benchmark(&spec, &cfg)?;
            println!("{}", summary_line(&spec.name, &result));
            let ok = result.best.converged && result.best.feasible;
            let out = out.unwrap_or_else(|| default_out(&scene));
            save_result(&out, &ResultFile::new(spec, ResultPayload::Benchmark(Box::new(result)))?)?;
            println!("wrote {}", out.display());
            Ok(ok)
        }
        Command::Bench {
            suite,
            spheres,
            control_points,
            run,
            out,
        } => {
            let specs = bench_specs(&suite, spheres, control_points)?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let mut ok = true;
            for mut spec in specs {
                apply_preset(&mut spec, &run.preset)?;
                let cfg = run_config(&spec, &run)?;
                let result = run_benchmark(&spec, &cfg)?;
                println!("{}", summary_line(&spec.name, &result));
                ok &= result.best.converged && result.best.feasible;
                if let Some(dir) = &out {
                    let path = dir.join(format!("{}.result.json", spec.name));
                    let name = spec.name.clone();
                    save_result(&path, &ResultFile::new(spec, ResultPayload::Benchmark(Box::new(result)))?)?;
                    log::info!("{name}: wrote {}", path.display());
                }
            }
            Ok(ok)
        }
        Command::Validate { result } => {
            let file = load_result(&result)?;
            let r = replay(&file, 1e-6)?;
            let report = file.result.report();
            println!(
                "stored f={:.17e} replayed f={:.17e} identical={} violation={:.3e} feasible={} converged={}",
                r.stored_f, r.replayed_f, r.identical, r.max_violation, r.feasible, report.converged
            );
            Ok(r.identical && r.feasible && report.converged)
        }
        Command::Decompose { shape, n, out } => {
            let prim = Primitive::parse(&shape).with_context(|| format!("cannot parse shape `{shape}`"))?;
            let body = decompose_primitive(prim.name(), prim, n)?;
            println!(
                "{}: {} spheres, fill ratio {:.4}, largest radius {:.4}",
                prim.name(),
                body.spheres.len(),
                fill_ratio(&prim, &body.spheres),
                body.spheres.iter().map(|s| s.radius).fold(0.0, f64::max)
            );
            if let Some(path) = out {
                write_json(&path, &body)?;
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Enumerate { benchmark, budget } => {
            let spec = generate(&benchmark, 1)?;
            let r = enumerate_discrete_optima(&spec, budget)?;
            println!(
                "{}: {} layouts ({} up to rotation), {} search nodes",
                r.benchmark, r.count, r.count_up_to_rotation, r.nodes
            );
            if let (Some(reference), Some(m)) = (r.reference_count, r.matches_reference()) {
                if !m {
                    println!("note: published count is {reference}; counting conventions differ");
                }
            }
            Ok(true)
        }
        Command::Generate {
            benchmark,
            spheres,
            control_points,
            out,
        } => {
            let mut spec = generate(&benchmark, spheres)?;
            if control_points > 0 {
                spec = with_control_points(spec, control_points)?;
            }
            save_scene(&out, &spec)?;
            println!("wrote {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
