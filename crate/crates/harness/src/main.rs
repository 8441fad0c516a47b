use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use gil_core::datasetgen::{
    generate_dataset, load, split, write_dataset, DatasetError, DEFAULT_TEST, DEFAULT_TRAIN,
};
use gil_core::intentnet::{
    train, write_log_csv, Head, ModelVariant, TrainConfig, DEFAULT_POSTERIOR_SAMPLES,
    DEFAULT_THRESHOLD,
};
use gil_core::usersim::TableLevel;
use gil_harness::episode::{self, EpisodeSpec, GestureSource, ModelSource};
use gil_harness::experiment::{run_curve, run_grid, write_curve_csv, write_grid_csv, CURVE_COUNTS};
use gil_harness::{ExperimentSpec, Provenance};

#[derive(Parser)]
#[command(name = "gil", version, about = "Gesture-to-intent experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic observation dataset.
    Generate {
        #[arg(long, default_value = "D1", value_parser = parse_level)]
        level: TableLevel,
        /// Number of records.
        #[arg(short = 'n', long, default_value_t = DEFAULT_TRAIN + DEFAULT_TEST)]
        records: usize,
        #[arg(long, env = "GIL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train both heads of one model and save them.
    Train {
        #[arg(long, default_value = "D1", value_parser = parse_level)]
        level: TableLevel,
        #[arg(long, default_value = "M5", value_parser = parse_model)]
        model: ModelVariant,
        #[arg(long, env = "GIL_SEED", default_value_t = 0)]
        seed: u64,
        /// Train on this dataset file instead of generating one.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        sizes: Sizes,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and score every (model, dataset, seed) cell.
    Grid {
        #[arg(long, value_delimiter = ',', value_parser = parse_model)]
        model: Vec<ModelVariant>,
        #[arg(long, value_delimiter = ',', value_parser = parse_level)]
        level: Vec<TableLevel>,
        #[arg(long, env = "GIL_SEED", value_delimiter = ',', default_value = "0")]
        seed: Vec<u64>,
        #[command(flatten)]
        sizes: Sizes,
        /// Also train object heads and report joint accuracy.
        #[arg(long)]
        joint: bool,
        /// CSV file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy against training-set size.
    Curve {
        #[arg(long, default_value = "D4", value_parser = parse_level)]
        level: TableLevel,
        #[arg(long, default_value = "M5", value_parser = parse_model)]
        model: ModelVariant,
        #[arg(long, value_delimiter = ',', default_values_t = CURVE_COUNTS)]
        counts: Vec<usize>,
        #[arg(long, env = "GIL_SEED", value_delimiter = ',', default_value = "0")]
        seed: Vec<u64>,
        #[arg(long, default_value_t = DEFAULT_TEST)]
        test_size: usize,
        #[arg(long, default_value_t = TrainConfig::default().epochs)]
        epochs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hand frames to executed plan, printed step by step.
    Episode {
        /// Replay file (JSON Lines of hand frames); default is a synthetic
        /// point followed by swipe_down.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Sample the scene from this seed instead of the demo scene.
        #[arg(long)]
        scene_seed: Option<u64>,
        #[arg(long, requires = "object_model")]
        action_model: Option<PathBuf>,
        #[arg(long, requires = "action_model")]
        object_model: Option<PathBuf>,
        #[arg(long, default_value = "M5", value_parser = parse_model)]
        model: ModelVariant,
        #[arg(long, default_value = "D1", value_parser = parse_level)]
        level: TableLevel,
        #[arg(long, env = "GIL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TRAIN)]
        train_size: usize,
        #[arg(long, default_value_t = TrainConfig::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        theta: f64,
        /// Sensor noise of the synthetic hand, in mm.
        #[arg(long, default_value_t = 2.0)]
        noise: f64,
        /// Also write the detection trace as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Sizes {
    #[arg(long, default_value_t = DEFAULT_TRAIN)]
    train_size: usize,
    #[arg(long, default_value_t = DEFAULT_TEST)]
    test_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
}

fn parse_level(s: &str) -> Result<TableLevel, String> {
    TableLevel::parse(s).ok_or_else(|| format!("unknown dataset level {s:?} (expected D1..D4)"))
}

fn parse_model(s: &str) -> Result<ModelVariant, String> {
    ModelVariant::parse(s).ok_or_else(|| format!("unknown model {s:?} (expected M1..M5)"))
}

fn train_config(epochs: usize) -> TrainConfig {
    TrainConfig::default().with_epochs(epochs)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn generate(level: TableLevel, n: usize, seed: u64, out: &Path) -> Result<()> {
    if n == 0 {
        return Err(DatasetError::TooFewRecords { needed: 1, have: 0 }.into());
    }
    let d = generate_dataset(level, n, seed)?;
    write_dataset(
        &d,
        BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?),
    )?;
    println!("{} records, table hash {}", d.len(), d.table_hash);
    Ok(())
}

fn train_cmd(
    level: TableLevel,
    model: ModelVariant,
    seed: u64,
    data: Option<&Path>,
    sizes: &Sizes,
    out: &Path,
) -> Result<()> {
    let d = match data {
        Some(p) => load(p).with_context(|| format!("reading {}", p.display()))?,
        None => generate_dataset(level, sizes.train_size + sizes.test_size, seed)?,
    };
    let (tr, te) = split(&d, sizes.train_size, sizes.test_size)?;
    std::fs::create_dir_all(out)?;
    for head in [Head::Action, Head::Object] {
        let name = match head {
            Head::Action => "action",
            Head::Object => "object",
        };
        let cfg = train_config(sizes.epochs).with_seed(gil_core::rng::derive_seed_str(
            seed,
            &format!("{name}-head"),
        ));
        let t = train(&tr, model, head, &cfg)?;
        t.model.save(&out.join(format!("{name}.json")))?;
        let mut log = BufWriter::new(File::create(out.join(format!("{name}_log.csv")))?);
        Provenance::new("train")
            .with("model", model.name())
            .with("dataset", d.level)
            .with("seed", seed)
            .with("table_hash", &d.table_hash)
            .with("train_config", serde_json::to_string(&cfg)?)
            .write(&mut log)?;
        write_log_csv(&t.log, &mut log)?;
        let acc = t.model.evaluate(&te, DEFAULT_POSTERIOR_SAMPLES, seed)?;
        println!(
            "{name} head: best epoch {}, test balanced accuracy {acc:.4}",
            t.best_epoch
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Generate {
            level,
            records,
            seed,
            out,
        } => generate(level, records, seed, &out),
        Command::Train {
            level,
            model,
            seed,
            data,
            sizes,
            out,
        } => train_cmd(level, model, seed, data.as_deref(), &sizes, &out),
        Command::Grid {
            model,
            level,
            seed,
            sizes,
            joint,
            out,
        } => {
            let defaults = ExperimentSpec::default();
            let spec = ExperimentSpec {
                models: if model.is_empty() {
                    defaults.models
                } else {
                    model
                },
                datasets: if level.is_empty() {
                    defaults.datasets
                } else {
                    level
                },
                seeds: seed,
                train_size: sizes.train_size,
                test_size: sizes.test_size,
                train: train_config(sizes.epochs),
                joint,
                ..defaults
            };
            let cells = run_grid(&spec)?;
            write_grid_csv(&cells, &spec.provenance("grid"), output(out.as_deref())?)?;
            let failed = cells.iter().filter(|c| c.result.is_err()).count();
            if failed > 0 {
                bail!("{failed} of {} cells failed", cells.len());
            }
            Ok(())
        }
        Command::Curve {
            level,
            model,
            counts,
            seed,
            test_size,
            epochs,
            out,
        } => {
            let spec = ExperimentSpec {
                models: vec![model],
                datasets: vec![level],
                seeds: seed,
                train_size: counts.iter().copied().max().unwrap_or(0),
                test_size,
                train: train_config(epochs),
                ..ExperimentSpec::default()
            };
            let points = run_curve(model, level, &counts, &spec)?;
            let prov = spec
                .provenance("curve")
                .with("counts", format!("{counts:?}"));
            write_curve_csv(&points, &prov, output(out.as_deref())?)?;
            Ok(())
        }
        Command::Episode {
            replay,
            scene_seed,
            action_model,
            object_model,
            model,
            level,
            seed,
            train_size,
            epochs,
            theta,
            noise,
            out,
        } => {
            let gestures = match replay {
                Some(p) => GestureSource::Replay(p),
                None => GestureSource::Synthetic {
                    steps: episode::demo_steps(),
                    noise_mm: noise,
                    seed,
                },
            };
            let models = match (action_model, object_model) {
                (Some(action), Some(object)) => ModelSource::Files { action, object },
                _ => ModelSource::Train {
                    variant: model,
                    level,
                    train_size,
                    train: train_config(epochs),
                },
            };
            let spec = EpisodeSpec {
                gestures,
                scene_seed,
                models,
                theta,
                seed,
                ..EpisodeSpec::default()
            };
            let report = episode::run(&spec)?;
            print!("{}", episode::render(&report));
            if let Some(p) = out {
                std::fs::write(&p, &report.trace_csv)
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
