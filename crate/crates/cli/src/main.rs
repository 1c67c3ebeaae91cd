mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spatial_core::{Error, Thresholds};

/// Batch pipeline over scene files: graphs, free-space placement, QA
/// generation, reward scoring and benchmark evaluation.
#[derive(Parser, Debug)]
#[command(name = "spatial", version, about, allow_negative_numbers = true)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,

    /// Print the threshold table (after overrides) and exit.
    #[arg(long, global = true)]
    show_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Weight of the process rewards in the total.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Minimum IoU for a box match.
    #[arg(long, global = true)]
    iou_threshold: Option<f64>,

    /// Occupancy grid cell edge in meters.
    #[arg(long, global = true)]
    cell_size: Option<f64>,

    /// Any other threshold, as NAME=VALUE. Repeatable.
    #[arg(long = "threshold", value_name = "NAME=VALUE", global = true)]
    thresholds: Vec<String>,
}

impl Overrides {
    fn apply(&self) -> spatial_core::Result<Thresholds> {
        let mut t = Thresholds::default();
        for kv in &self.thresholds {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("--threshold expects NAME=VALUE, got `{kv}`")))?;
            t.set(k.trim(), v)?;
        }
        let named = [
            ("alpha", self.alpha),
            ("iou_threshold", self.iou_threshold),
            ("cell_size_m", self.cell_size),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                t.set(k, &v.to_string())?;
            }
        }
        Ok(t)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate relation predicates over a scene and write its graph.
    BuildGraph {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated relation names; all relations when omitted.
        #[arg(long, value_delimiter = ',')]
        relations: Vec<String>,
    },
    /// Run one free-space query and write the region summary.
    SampleFreeSpace {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        relation: String,
        /// One target id, or two for `between`.
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<String>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate QA pairs for one or more scenes.
    GenQa {
        /// Scene file. Repeatable.
        #[arg(long = "scene")]
        scenes: Vec<PathBuf>,
        /// Directory whose `*.json` files are all scenes.
        #[arg(long)]
        scenes_dir: Option<PathBuf>,
        /// Comma-separated family names; all families when omitted.
        #[arg(long, value_delimiter = ',')]
        families: Vec<String>,
        #[arg(long)]
        seed: u64,
        /// Items per family per scene.
        #[arg(long, default_value_t = 4)]
        per_family: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write a point benchmark (samples, masks, reward ground truth,
        /// reference predictions) into this directory.
        #[arg(long)]
        bench_out: Option<PathBuf>,
    },
    /// Score model responses against ground truth.
    Score {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Standardize totals over consecutive groups of this size. Without
        /// it, rows are grouped by `group_id` when present.
        #[arg(long)]
        group_size: Option<usize>,
    },
    /// Score point predictions against benchmark masks.
    Evaluate {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write procedural tabletop scenes with depth maps and masks.
    SynthScene {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        min_objects: usize,
        #[arg(long, default_value_t = 10)]
        max_objects: usize,
    },
}

/// A well-formed request the inputs cannot satisfy.
#[derive(Debug)]
pub struct Unsatisfiable(pub String);

impl std::fmt::Display for Unsatisfiable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Unsatisfiable {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Unsatisfiable>().is_some() {
        return 3;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::Usage(_)
            | Error::Validation { .. }
            | Error::Configuration(_)
            | Error::Io { .. }
            | Error::Json { .. }
            | Error::JsonLine { .. }
            | Error::Image { .. }
            | Error::UnknownObject(_)
            | Error::MissingAnnotation { .. }
            | Error::InvalidQuery(_)
            | Error::OutOfBounds { .. },
        ) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let t = cli.overrides.apply()?;
    if cli.show_defaults {
        for (k, v) in t.rows() {
            println!("{k:<28} {v}");
        }
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Error::Usage("no command given; see --help".into()).into());
    };
    match command {
        Command::BuildGraph { scene, out, relations } => commands::build_graph(&scene, &out, &relations, &t),
        Command::SampleFreeSpace {
            scene,
            relation,
            targets,
            seed,
            out,
        } => commands::sample_free_space(&scene, &relation, &targets, seed, &out, &t),
        Command::GenQa {
            scenes,
            scenes_dir,
            families,
            seed,
            per_family,
            out,
            bench_out,
        } => commands::gen_qa(
            &commands::GenQaArgs {
                scenes,
                scenes_dir,
                families,
                seed,
                per_family,
                out,
                bench_out,
            },
            &t,
        ),
        Command::Score {
            responses,
            gt,
            out,
            group_size,
        } => commands::score(&responses, &gt, &out, group_size, &t),
        Command::Evaluate {
            benchmark,
            predictions,
            out,
        } => commands::evaluate(&benchmark, &predictions, &out),
        Command::SynthScene {
            seed,
            count,
            out,
            min_objects,
            max_objects,
        } => commands::synth_scene(seed, count, &out, min_objects, max_objects),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
