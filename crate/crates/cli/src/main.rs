//! `spnet`: dataset generation, two-stage training, evaluation, inference,
//! weight-map export and gradient checks.
//!
//! Failures print one JSON line `{"error": <kind>, "message": <text>}` to stderr
//! and exit with status 2 (usage) or 1 (anything else).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spnet::checkpoint::{self, CheckpointManifest};
use spnet::config::{ModelKind, RunConfig};
use spnet::data::{io::write_labels, Dataset, DatasetManifest, SceneSpec};
use spnet::gradcheck::op_cases;
use spnet::metrics::{ConfusionMatrix, ZeroDenominator};
use spnet::pipeline::{run_stage1, run_stage2, stage_dir};
use spnet::{pgm, sptn, Error, LabelMap, Result, Shape, Tensor32};

#[derive(Parser)]
#[command(name = "spnet", version, about = "Mixture-of-experts and adaptive-aggregation segmentation networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic texture-vs-shape dataset.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 512)]
        train: usize,
        #[arg(long, default_value_t = 64)]
        val: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        canvas: usize,
        #[arg(long, default_value_t = 5)]
        classes: usize,
    },
    /// Train stage 1, stage 2, or both.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        stage: StageArg,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Stage-1 checkpoint to start stage 2 from (default `<out>/stage1`).
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Compute metrics over a dataset split.
    Eval {
        #[arg(long, required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "val")]
        split: String,
        /// Write the metrics JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score the ground truth against itself instead of a model.
        #[arg(long)]
        oracle: bool,
        /// Count classes with a zero denominator as 0 instead of skipping them.
        #[arg(long)]
        count_empty_classes: bool,
    },
    /// Label one SPTN image.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Output SPLB label file.
        #[arg(long)]
        out: PathBuf,
        /// Optional SPTN file for the per-class probabilities.
        #[arg(long)]
        probs: Option<PathBuf>,
    },
    /// Export gate maps (MoE) or level weight maps (AHFA) as PGM files.
    DumpGates {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference gradient checks.
    Gradcheck {
        #[arg(long, default_value = "all")]
        op: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&Error::Usage(e.to_string())),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    let message = e.to_string().lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ");
    eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": message }));
    ExitCode::from(if matches!(e, Error::Usage(_)) { 2 } else { 1 })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { out, train, val, seed, canvas, classes } => {
            let scene = SceneSpec { canvas, classes, seed, ..SceneSpec::default() };
            scene.validate()?;
            Dataset::write_all(&out, &DatasetManifest::standard(scene, train, val))?;
            log::info!("wrote {train} train and {val} val scenes to {}", out.display());
            Ok(())
        }
        Command::Train { config, seed, out, stage, model, dataset, from } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if let Some(m) = model {
                cfg.model = ModelKind::parse(&m)?;
            }
            if out.is_some() {
                cfg.paths.out = out;
            }
            if dataset.is_some() {
                cfg.paths.dataset = dataset;
            }
            let out = cfg.paths.out.clone().ok_or_else(|| Error::Usage("no output directory (--out or paths.out)".into()))?;
            let root = cfg.paths.dataset.clone().ok_or_else(|| Error::Usage("no dataset (--dataset or paths.dataset)".into()))?;
            let (data, _) = Dataset::load(&root, "train")?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let path = out.join("config.json");
            fs::write(&path, serde_json::to_string_pretty(&cfg)?).map_err(|e| Error::io(&path, e))?;
            let from = from.unwrap_or_else(|| stage_dir(&out, 1));
            if matches!(stage, StageArg::One | StageArg::Both) {
                let rows = run_stage1(&cfg, &data, &out)?;
                log::info!("stage 1 done, final loss {:.5}", rows.last().map_or(f64::NAN, |r| r.loss));
            }
            if matches!(stage, StageArg::Two | StageArg::Both) {
                let rows = run_stage2(&cfg, &data, &from, &out)?;
                log::info!("stage 2 done, final loss {:.5}", rows.last().map_or(f64::NAN, |r| r.loss));
            }
            Ok(())
        }
        Command::Eval { checkpoint, dataset, split, out, oracle, count_empty_classes } => {
            let (data, manifest) = Dataset::load(&dataset, &split)?;
            let cm = if oracle {
                let mut cm = ConfusionMatrix::new(manifest.classes);
                for l in &data.labels {
                    cm.accumulate(l.labels(), l.labels(), l.ignore)?;
                }
                cm
            } else {
                let model = checkpoint::load::<f32>(checkpoint.as_ref().expect("required by clap"))?;
                spnet::train::evaluate(&model, &data)?
            };
            let policy = if count_empty_classes { ZeroDenominator::CountAsZero } else { ZeroDenominator::Exclude };
            let text = serde_json::to_string_pretty(&cm.metrics(policy)?)?;
            match out {
                Some(p) => fs::write(&p, text).map_err(|e| Error::io(&p, e)),
                None => {
                    println!("{text}");
                    Ok(())
                }
            }
        }
        Command::Infer { checkpoint, image, out, probs } => {
            let model = checkpoint::load::<f32>(&checkpoint)?;
            let x = read_image(&image)?;
            let p = model.predict(&x)?;
            let s = x.shape();
            let labels = LabelMap::new(Shape::new(1, 1, s.height(), s.width()), p.labels, spnet::labels::DEFAULT_IGNORE)?;
            write_labels(&out, &labels)?;
            if let Some(path) = probs {
                sptn::write(path, &p.probs)?;
            }
            Ok(())
        }
        Command::DumpGates { checkpoint, image, out } => {
            let manifest = CheckpointManifest::read(&checkpoint)?;
            let model = checkpoint::load::<f32>(&checkpoint)?;
            let x = read_image(&image)?;
            let maps = model.weight_maps(&x)?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let count = maps.len();
            for (name, map) in maps {
                pgm::write(out.join(format!("{name}.pgm")), &map)?;
            }
            log::info!("wrote {} weight maps of {} to {}", count, manifest.model, out.display());
            Ok(())
        }
        Command::Gradcheck { op, seed } => {
            let cases: Vec<_> = op_cases().into_iter().filter(|c| op == "all" || c.name == op).collect();
            if cases.is_empty() {
                let names: Vec<_> = op_cases().iter().map(|c| c.name).collect();
                return Err(Error::Usage(format!("unknown op {op:?}; known: all, {}", names.join(", "))));
            }
            let mut failed = Vec::new();
            for case in cases {
                let r = (case.run)(seed)?;
                let status = if r.passed() { "pass" } else { "fail" };
                println!("{}\t{status}\tcoords={}\tmax_rel_err={:.3e}", r.op, r.coordinates, r.max_rel_error);
                if !r.passed() {
                    failed.push(r.op);
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Contract(format!("gradient check failed for {}", failed.join(", "))))
            }
        }
    }
}

fn read_image(path: &Path) -> Result<Tensor32> {
    let x: Tensor32 = sptn::read(path)?;
    let s = x.shape();
    if s.batch() != 1 || s.channels() != 3 {
        return Err(Error::Data(format!("{}: expected a (1, 3, H, W) image, got {s}", path.display())));
    }
    Ok(x)
}
