use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advlens::augment::AugmentKind;
use advlens::dataset::{is_image_file, load_classification_manifest, load_detection_manifest, DatasetManifest};
use advlens::enhance::{apply_enhancement, EnhanceKind, SsrConfig};
use advlens::error::{Error, Result};
use advlens::image::{load_image, save_png};
use advlens::metrics::StatsAccumulator;
use advlens::protocol::{BackendCommand, BackendSession, InferenceBackend};
use advlens::runner::{
    average_reports, delta_report, run_matrix, write_delta_csv, write_metric_csv, MatrixConfig, MatrixReport,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use walkdir::WalkDir;

#[derive(Parser, Debug)]
#[command(
    name = "advlens",
    version,
    about = "Adverse-condition augmentation, enhancement and evaluation harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Apply one augment to every image under a directory.
    Augment {
        #[arg(long)]
        kind: AugmentKind,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply one enhancement to every image under a directory.
    Enhance {
        #[arg(long)]
        kind: EnhanceKind,
        #[arg(long, default_value_t = SsrConfig::<f64>::DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pooled pixel mean/std per augment × enhancement, as CSV.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "identity,dark,overexpose,fog,dark-rainy"
        )]
        augments: Vec<AugmentKind>,
        #[arg(long, value_delimiter = ',', default_value = "none,he,rx")]
        enhancements: Vec<EnhanceKind>,
        #[arg(long, default_value_t = SsrConfig::<f64>::DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Evaluate a single augment/enhancement cell.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "identity")]
        augment: AugmentKind,
        #[arg(long, default_value = "none")]
        enhancement: EnhanceKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate the full augment × enhancement matrix.
    Matrix {
        #[command(flatten)]
        data: DataArgs,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "identity,dark,overexpose,fog,dark-rainy"
        )]
        augments: Vec<AugmentKind>,
        #[arg(long, value_delimiter = ',', default_value = "none,he,rx")]
        enhancements: Vec<EnhanceKind>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Delta table from one or more saved matrix reports (JSON).
    Report {
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Average all inputs cell by cell under this model name first.
        #[arg(long)]
        average: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Sampling {
    /// Evaluate a seeded random subset of this many samples.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Classification root or index file; image root for detection.
    #[arg(long)]
    dataset: PathBuf,
    /// COCO-style annotation file; selects the detection task.
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[command(flatten)]
    sampling: Sampling,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, env = "ADVLENS_BACKEND")]
    backend: String,
    #[arg(long, default_value_t = SsrConfig::<f64>::DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Augment { kind, input, out } => map_tree(&input, &out, |img| Ok(kind.apply(img))),
        Command::Enhance {
            kind,
            sigma,
            input,
            out,
        } => {
            let cfg = SsrConfig::new(sigma)?;
            map_tree(&input, &out, |img| Ok(apply_enhancement(img, kind, &cfg)))
        }
        Command::Stats {
            dataset,
            augments,
            enhancements,
            sigma,
            out,
            sampling,
        } => {
            let cfg = SsrConfig::new(sigma)?;
            let mut files = image_files(&dataset)?;
            if let Some(limit) = sampling.limit {
                files = subsample_paths(files, limit, sampling.seed);
            }
            stats_table(&files, &augments, &enhancements, &cfg, open_out(out.as_deref())?)
        }
        Command::Eval {
            data,
            augment,
            enhancement,
            run,
        } => run_and_write(&data, vec![augment], vec![enhancement], &run),
        Command::Matrix {
            data,
            augments,
            enhancements,
            run,
        } => run_and_write(&data, augments, enhancements, &run),
        Command::Report {
            input,
            average,
            format,
            out,
        } => {
            let reports = input
                .iter()
                .map(|p| Ok(serde_json::from_reader(std::io::BufReader::new(File::open(p)?))?))
                .collect::<Result<Vec<MatrixReport>>>()?;
            let reports = match average {
                Some(name) => vec![average_reports(&reports, &name)?],
                None => reports,
            };
            let mut w = open_out(out.as_deref())?;
            match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    for (i, r) in reports.iter().enumerate() {
                        let mut part = Vec::new();
                        write_delta_csv(&r.model, &delta_report(r)?, &mut part)?;
                        // one header for the whole table
                        let skip = if i == 0 {
                            0
                        } else {
                            part.iter().position(|&b| b == b'\n').map_or(0, |p| p + 1)
                        };
                        buf.extend_from_slice(&part[skip..]);
                    }
                    w.write_all(&buf)?;
                }
                Format::Json => {
                    let tables = reports
                        .iter()
                        .map(|r| Ok(serde_json::json!({ "model": r.model, "deltas": delta_report(r)? })))
                        .collect::<Result<Vec<_>>>()?;
                    serde_json::to_writer_pretty(&mut w, &tables)?;
                    writeln!(w)?;
                }
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn image_files(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.is_dir() {
        return Err(Error::InvalidParameter(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        if entry.file_type().is_file() && is_image_file(entry.path()) {
            files.push(entry.into_path());
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(files)
}

fn subsample_paths(files: Vec<PathBuf>, limit: usize, seed: u64) -> Vec<PathBuf> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if limit >= files.len() {
        return files;
    }
    let mut idx: Vec<usize> = (0..files.len()).collect();
    idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(limit);
    idx.sort_unstable();
    idx.into_iter().map(|i| files[i].clone()).collect()
}

/// Transform every image below `input` and write it as PNG at the mirrored
/// path below `output`.
fn map_tree(
    input: &Path,
    output: &Path,
    f: impl Fn(&advlens::ImageU8) -> Result<advlens::ImageU8> + Sync,
) -> Result<()> {
    let files = image_files(input)?;
    files.par_iter().try_for_each(|path| {
        let rel = path.strip_prefix(input).expect("walked below input");
        let dest = output.join(rel).with_extension("png");
        save_png(&f(&load_image(path)?)?, &dest)
    })?;
    log::info!("wrote {} image(s) to {}", files.len(), output.display());
    Ok(())
}

fn stats_table(
    files: &[PathBuf],
    augments: &[AugmentKind],
    enhancements: &[EnhanceKind],
    cfg: &SsrConfig,
    out: Box<dyn Write>,
) -> Result<()> {
    let conditions: Vec<(AugmentKind, EnhanceKind)> = augments
        .iter()
        .flat_map(|&a| enhancements.iter().map(move |&e| (a, e)))
        .collect();
    // per-image partial accumulators, merged in file order for reproducible bits
    let partials = files
        .par_iter()
        .map(|path| {
            let img = load_image(path)?;
            Ok(conditions
                .iter()
                .map(|&(a, e)| {
                    let mut acc = StatsAccumulator::<f64>::default();
                    acc.push_image(&apply_enhancement(&a.apply(&img), e, cfg));
                    acc
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(out);
    w.write_record(["augment", "enhancement", "images", "mean", "std"])?;
    for (ci, &(a, e)) in conditions.iter().enumerate() {
        let mut acc = StatsAccumulator::<f64>::default();
        for p in &partials {
            acc.merge(&p[ci]);
        }
        let s = acc.finish()?;
        w.write_record([
            a.name(),
            e.name(),
            &files.len().to_string(),
            &format!("{:.6}", s.mean),
            &format!("{:.6}", s.std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn load_manifest(data: &DataArgs) -> Result<DatasetManifest> {
    let manifest = match &data.annotations {
        Some(ann) => load_detection_manifest(ann, &data.dataset)?,
        None => load_classification_manifest(&data.dataset)?,
    };
    Ok(match data.sampling.limit {
        Some(limit) => manifest.subsample(limit, data.sampling.seed),
        None => manifest,
    })
}

fn run_and_write(
    data: &DataArgs,
    augments: Vec<AugmentKind>,
    enhancements: Vec<EnhanceKind>,
    run: &RunArgs,
) -> Result<()> {
    if run.workers == 0 {
        return Err(Error::InvalidParameter("--workers must be at least 1".into()));
    }
    let ssr = SsrConfig::new(run.sigma)?;
    let command = BackendCommand::parse(&run.backend)?;
    let manifest = load_manifest(data)?;
    let launcher = || -> Result<Box<dyn InferenceBackend>> { Ok(Box::new(BackendSession::launch(&command)?)) };
    let cfg = MatrixConfig {
        augments,
        enhancements,
        ssr,
        workers: run.workers,
        record_checksums: false,
    };
    let report = run_matrix(&manifest, &launcher, &cfg)?;
    for c in report.failed_cells() {
        log::warn!(
            "cell {}/{} failed: {}",
            c.augment,
            c.enhancement,
            c.error.as_deref().unwrap_or_default()
        );
    }
    let mut w = open_out(run.out.as_deref())?;
    match run.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
        Format::Csv => write_metric_csv(&report, &mut w)?,
    }
    w.flush()?;
    Ok(())
}
