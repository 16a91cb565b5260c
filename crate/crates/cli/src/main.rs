use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cei_cli::fixture::{write_fixture, FixtureSpec, FixtureTarget};
use cei_cli::inspect::{cmd_inspect, write_inspection};
use cei_cli::manifest::{AugmentSpec, Initialization, RunManifest};
use cei_cli::report::{default_report_path, RunReport};
use cei_cli::retarget::Pipeline;
use cei_cli::{cmd_augment, cmd_retarget, cmd_validate};
use cei_core::dataset::{write_demonstration, DatasetIndex, IndexEntry};
use cei_core::robot::load_embodiment;
use clap::{Args, Parser, Subcommand};
use log::warn;

#[derive(Parser)]
#[command(
    name = "cei",
    version,
    about = "Retarget manipulation demonstrations across robot embodiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Retarget every demo of a dataset onto the target embodiment.
    Retarget(RunArgs),
    /// Retarget once per anchor and grid offset.
    Augment(RunArgs),
    /// Check a dataset's invariants and print a JSON report.
    Validate(ValidateArgs),
    /// Dump one frame's geometry as ASCII PLY.
    Inspect(InspectArgs),
    /// Write fixture robots, a source dataset and a run manifest.
    Fixture(FixtureArgs),
    /// Turn a JSON-lines recording into a one-demo source dataset.
    Ingest(IngestArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Run manifest; flags below override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Source embodiment manifest.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Target embodiment manifest.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Input dataset directory.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output dataset directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report path, default `<out>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long)]
    w2: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Robot masking distance in meters.
    #[arg(long)]
    tau: Option<f64>,
    /// Points per synthesized observation.
    #[arg(long)]
    points: Option<usize>,
    /// Initialize each demo with elite-based sampling.
    #[arg(long)]
    eis: bool,
    #[arg(long, default_value_t = 1000)]
    eis_samples: usize,
    #[arg(long, default_value_t = 0.1)]
    eis_frac: f64,
    #[arg(long)]
    anchors_file: Option<PathBuf>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    grid_range: Option<f64>,
}

impl RunArgs {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = match &self.manifest {
            Some(p) => RunManifest::load(p)?,
            None => match (&self.source, &self.target, &self.input, &self.out) {
                (Some(s), Some(t), Some(i), Some(o)) => RunManifest::new(s.clone(), t.clone(), i.clone(), o.clone()),
                _ => bail!("without --manifest, --source, --target, --input and --out are required"),
            },
        };
        macro_rules! set {
            ($flag:expr, $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        set!(self.source, m.source);
        set!(self.target, m.target);
        set!(self.input, m.input);
        set!(self.out, m.output);
        set!(self.seed, m.seed);
        set!(self.workers, m.workers);
        set!(self.lambda, m.alignment.metric.lambda);
        set!(self.w1, m.alignment.w1);
        set!(self.w2, m.alignment.w2);
        set!(self.max_steps, m.alignment.max_steps);
        set!(self.patience, m.alignment.patience);
        set!(self.tau, m.synthesis.tau);
        set!(self.points, m.synthesis.output_size);
        if self.eis {
            m.initialization = Initialization::Eis {
                samples: self.eis_samples,
                fraction: self.eis_frac,
            };
        }
        if self.anchors_file.is_some() || self.grid_n.is_some() || self.grid_range.is_some() {
            let a = m.augmentation.get_or_insert(AugmentSpec {
                anchors_file: PathBuf::new(),
                grid_n: 1,
                grid_range: 0.0,
                knee: 0.8,
            });
            set!(self.anchors_file, a.anchors_file);
            set!(self.grid_n, a.grid_n);
            set!(self.grid_range, a.grid_range);
        }
        Ok(m)
    }
}

#[derive(Args)]
struct ValidateArgs {
    dataset: PathBuf,
    /// Embodiment manifest to check names, dof split and limits against.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    points: usize,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    demo: String,
    #[arg(long, default_value_t = 0)]
    frame: usize,
    /// Output PLY file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 25)]
    demos: usize,
    #[arg(long, default_value_t = 4)]
    duplicate: usize,
    #[arg(long, default_value_t = 105)]
    length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FixtureTarget::ThreeFinger)]
    target: FixtureTarget,
}

#[derive(Args)]
struct IngestArgs {
    /// JSON-lines log, one `{"frame", "joints", "points"}` object per line.
    #[arg(long)]
    log: PathBuf,
    /// Embodiment manifest of the recording robot.
    #[arg(long)]
    source: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    id: String,
}

fn finish_run(report: RunReport, path: Option<PathBuf>) -> Result<ExitCode> {
    let path = path.unwrap_or_else(|| default_report_path(&report.output));
    report.write(&path)?;
    println!(
        "{}: {} ok, {} failed, {} frames, {:.1}s; report {}",
        report.command,
        report.succeeded,
        report.failed,
        report.frames,
        report.wall_clock,
        path.display()
    );
    Ok(if report.failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Retarget(a) => finish_run(cmd_retarget(a.manifest()?)?, a.report),
        Command::Augment(a) => finish_run(cmd_augment(a.manifest()?)?, a.report),
        Command::Validate(a) => {
            let e = a.target.as_deref().map(load_embodiment).transpose()?.map(|(e, _)| e);
            let report = cmd_validate(&a.dataset, e.as_ref(), a.points);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Inspect(a) => {
            let p = Pipeline::new(RunManifest::load(&a.manifest)?)?;
            let dump = cmd_inspect(&p, &a.demo, a.frame)?;
            write_inspection(&dump, &a.demo, a.frame, &a.out)?;
            println!(
                "{} vertices, {} edges -> {}",
                dump.points.len(),
                dump.edges.len(),
                a.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Fixture(a) => {
            let spec = FixtureSpec {
                demos: a.demos,
                duplicate: a.duplicate,
                length: a.length,
                seed: a.seed,
                target: a.target,
            };
            let path = write_fixture(&a.out, &spec)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Ingest(a) => {
            let (e, m) = load_embodiment(&a.source)?;
            let got = cei_core::dataset::ingest_recorded_log(&a.log, &e, &m.workspace, &a.id)
                .with_context(|| format!("ingesting {}", a.log.display()))?;
            for w in &got.warnings {
                warn!("{w}");
            }
            let sum = write_demonstration(&got.demo, &a.out.join(&a.id))?;
            let mut index = DatasetIndex::read(&a.out).unwrap_or_else(|_| DatasetIndex::new());
            index.demos.retain(|d| d.id != a.id);
            index.demos.push(IndexEntry {
                id: a.id.clone(),
                path: a.id.clone().into(),
                embodiment: got.demo.embodiment.clone(),
                length: got.demo.len(),
                checksum: sum,
            });
            index.write(&a.out)?;
            println!("{}: {} frames, {} warnings", a.id, got.demo.len(), got.warnings.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
