//! The `gazeval` command line.
//!
//! Every failure prints exactly one JSON line to stderr and exits with the
//! code of its [`ErrorKind`](crate::ErrorKind): 2 for parse and usage
//! errors, 3 for configuration errors, 4 for I/O errors.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{Config, CONFIG_ENV};
use crate::error::{Error, Result};
use crate::fixation::{detect_fixations, read_fixations_jsonl, write_fixations_jsonl, FixationFileHeader, Scanpath};
use crate::ingest::{parse_gaze_stream, Task};
use crate::metrics::{cc, ioc_fixation, ioc_scanpath, kld, overlap, sim, IocMethod, IocResult};
use crate::report::{build_report, ReportOptions, StudyInputs};
use crate::saliency::{
    attention_map, coverage, entropy, gaze_mask, read_pgm, write_map_pgm, write_mask_pgm,
    AttentionMap, MapSidecar, Normalization,
};
use crate::sim::{simulate_study, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "gazeval", version, about = "Gaze-based evaluation of reader studies")]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Output format for metric rows.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for the simulator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Diagnosis,
    Vtt,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Diagnosis => Task::Diagnosis,
            TaskArg::Vtt => Task::Vtt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormArg {
    Raw,
    MaxOne,
    SumOne,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect fixations in a gaze CSV and write them as JSON Lines.
    Fixations {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the input file stem.
        #[arg(long)]
        stimulus_id: Option<String>,
        #[arg(long, default_value = "unknown")]
        reader_id: String,
        #[arg(long, value_enum, default_value_t = TaskArg::Diagnosis)]
        task: TaskArg,
    },
    /// Build an attention map (and optionally its gaze mask) from fixations.
    Saliency {
        #[arg(long = "in")]
        input: PathBuf,
        /// Map as plain PGM; a JSON sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = NormArg::MaxOne)]
        normalize: NormArg,
    },
    /// Compare two fixation files or two PGM maps: CC, KLD, SIM and IoU.
    Metrics {
        a: PathBuf,
        b: PathBuf,
    },
    /// Inter-observer congruency of several fixation files for one stimulus.
    Ioc {
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
    },
    /// Run the whole pipeline and write the report tables.
    Report {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        gaze: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        skip_bad_trials: bool,
    },
    /// Generate a synthetic study.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        /// Simulator settings (JSON); defaults to the bundled study.
        #[arg(long)]
        sim_config: Option<PathBuf>,
    },
}

/// One output row of `metrics`, `saliency` and `ioc`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub metric: String,
    pub stimulus_id: String,
    pub scope: String,
    /// Absent when the metric is undefined (e.g. CC of a constant map).
    pub value: Option<f64>,
    pub params_hash: String,
}

fn write_rows(out: &mut impl Write, rows: &[MetricRow], format: Format) -> Result<()> {
    let io = |e: std::io::Error| Error::io(Path::new("<stdout>"), e);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["metric", "stimulus_id", "scope", "value", "params_hash"])
                .map_err(|e| Error::Schema(e.to_string()))?;
            for r in rows {
                w.write_record([
                    r.metric.as_str(),
                    &r.stimulus_id,
                    &r.scope,
                    &r.value.map(|v| v.to_string()).unwrap_or_default(),
                    &r.params_hash,
                ])
                .map_err(|e| Error::Schema(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
            out.write_all(&bytes).map_err(io)
        }
        Format::Json => {
            for r in rows {
                let line = serde_json::to_string(r).expect("rows serialize");
                writeln!(out, "{line}").map_err(io)?;
            }
            Ok(())
        }
    }
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn read_scanpath(path: &Path) -> Result<Scanpath> {
    read_fixations_jsonl(open(path)?).map(|(_, sp)| sp)
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// A map plus the stimulus it belongs to.
fn load_map(path: &Path, config: &Config) -> Result<(String, AttentionMap)> {
    if is_pgm(path) {
        Ok((stem(path), read_pgm(open(path)?)?.to_map()))
    } else {
        let sp = read_scanpath(path)?;
        let map = attention_map(sp.fixations(), &config.saliency, &config.geometry);
        Ok((sp.stimulus_id, map))
    }
}

fn cmd_metrics(a: &Path, b: &Path, config: &Config) -> Result<Vec<MetricRow>> {
    let (stimulus_id, ma) = load_map(a, config)?;
    let (_, mb) = load_map(b, config)?;
    let hash = config.params_hash();
    let pa = ma.normalize(Normalization::SumOne);
    let pb = mb.normalize(Normalization::SumOne);
    let iou = overlap(&gaze_mask(&ma, &config.saliency), &gaze_mask(&mb, &config.saliency))?.iou();
    let defined = !(pa.degenerate || pb.degenerate);
    let cc_v = match cc(&ma, &mb) {
        Ok(v) => Some(v),
        Err(Error::ConstantMap) => None,
        Err(e) => return Err(e),
    };
    let kld_v = if defined { Some(kld(&pa.map, &pb.map, &config.metrics)?) } else { None };
    let sim_v = if defined { Some(sim(&pa.map, &pb.map)?) } else { None };
    Ok([("cc", cc_v), ("kld", kld_v), ("sim", sim_v), ("iou", Some(iou))]
        .into_iter()
        .map(|(metric, value)| MetricRow {
            metric: metric.into(),
            stimulus_id: stimulus_id.clone(),
            scope: "pair".into(),
            value,
            params_hash: hash.clone(),
        })
        .collect())
}

fn cmd_ioc(inputs: &[PathBuf], config: &Config) -> Result<Vec<MetricRow>> {
    let scanpaths: Vec<Scanpath> = inputs.iter().map(|p| read_scanpath(p)).collect::<Result<_>>()?;
    let stimulus_id = scanpaths[0].stimulus_id.clone();
    let hash = config.params_hash();
    let results: Vec<IocResult> = vec![
        ioc_fixation(&scanpaths, &config.metrics, &config.saliency, &config.geometry)?,
        ioc_scanpath(&scanpaths, IocMethod::Dtw, &config.metrics, &config.geometry)?,
        ioc_scanpath(&scanpaths, IocMethod::Levenshtein, &config.metrics, &config.geometry)?,
    ];
    Ok(results
        .iter()
        .flat_map(|r| {
            let metric = format!("ioc_{}", r.method.to_string().to_lowercase());
            let stimulus_id = stimulus_id.clone();
            let hash = hash.clone();
            r.per_observer_scores.iter().map(move |(reader, &score)| MetricRow {
                metric: metric.clone(),
                stimulus_id: stimulus_id.clone(),
                scope: reader.clone(),
                value: Some(score),
                params_hash: hash.clone(),
            })
        })
        .collect())
}

fn execute(cli: Cli, stdout: &mut impl Write, stderr: &mut impl Write) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    config.validate()?;
    let hash = config.params_hash();
    match cli.command {
        Command::Fixations {
            input,
            out,
            stimulus_id,
            reader_id,
            task,
        } => {
            let stream = parse_gaze_stream(open(&input)?, &config.geometry)?;
            let fixations = detect_fixations(&stream, &config.fixation, &config.geometry)?;
            let header = FixationFileHeader {
                stimulus_id: stimulus_id.unwrap_or_else(|| stem(&input)),
                reader_id,
                task: task.into(),
                params_hash: hash,
                params: config.fixation,
            };
            let mut w = create(&out)?;
            write_fixations_jsonl(&mut w, &header, &fixations)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&out, e))
        }
        Command::Saliency {
            input,
            out,
            mask,
            normalize,
        } => {
            let sp = read_scanpath(&input)?;
            let raw = attention_map(sp.fixations(), &config.saliency, &config.geometry);
            let mode = match normalize {
                NormArg::Raw => Normalization::Raw,
                NormArg::MaxOne => Normalization::MaxOne,
                NormArg::SumOne => Normalization::SumOne,
            };
            let map = match mode {
                Normalization::Raw => raw.clone(),
                m => raw.normalize(m).map,
            };
            let mut w = create(&out)?;
            write_map_pgm(&mut w, &map)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&out, e))?;
            let sidecar = MapSidecar {
                normalization: map.normalization(),
                params_hash: hash.clone(),
                source: input.display().to_string(),
            };
            let sidecar_path = PathBuf::from(format!("{}.json", out.display()));
            fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n")
                .map_err(|e| Error::io(&sidecar_path, e))?;
            let gm = gaze_mask(&raw, &config.saliency);
            if let Some(mask_path) = mask {
                let mut w = create(&mask_path)?;
                write_mask_pgm(&mut w, &gm)
                    .and_then(|_| w.flush())
                    .map_err(|e| Error::io(&mask_path, e))?;
            }
            let sum_one = raw.normalize(Normalization::SumOne);
            let h = if sum_one.degenerate { None } else { Some(entropy(&sum_one.map)?) };
            let row = |metric: &str, value| MetricRow {
                metric: metric.into(),
                stimulus_id: sp.stimulus_id.clone(),
                scope: sp.reader_id.clone(),
                value,
                params_hash: hash.clone(),
            };
            write_rows(stdout, &[row("coverage", Some(coverage(&gm))), row("entropy", h)], cli.format)
        }
        Command::Metrics { a, b } => write_rows(stdout, &cmd_metrics(&a, &b, &config)?, cli.format),
        Command::Ioc { inputs } => write_rows(stdout, &cmd_ioc(&inputs, &config)?, cli.format),
        Command::Report {
            sessions,
            catalog,
            gaze,
            out,
            skip_bad_trials,
        } => {
            let inputs = StudyInputs::load(&sessions, &catalog, &gaze)?;
            let options = ReportOptions {
                jobs: cli.jobs,
                skip_bad_trials,
            };
            let report = build_report(&inputs, &config, &options)?;
            report.write_to(&out)?;
            let skipped = report.inputs.skipped_trials.len();
            if skipped > 0 {
                let _ = writeln!(stderr, "warning: skipped {skipped} bad trial(s); see report.json");
            }
            Ok(())
        }
        Command::Simulate { out, sim_config } => {
            let mut sc = match sim_config {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str::<SimConfig>(&text).map_err(|e| Error::Config(format!("simulator: {e}")))?
                }
                None => SimConfig::bundled(),
            };
            if let Some(seed) = cli.seed {
                sc.seed = seed;
            }
            simulate_study(&sc, &config.geometry)?.write_to(&out)
        }
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    exit_code: u8,
    message: String,
}

fn report_error(stderr: &mut impl Write, kind: &str, code: u8, message: String) -> ExitCode {
    let line = ErrorLine {
        error: kind,
        exit_code: code,
        message: message.replace('\n', " "),
    };
    let _ = writeln!(stderr, "{}", serde_json::to_string(&line).expect("error line serializes"));
    ExitCode::from(code)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return report_error(stderr, "usage", 2, first.to_string());
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            report_error(stderr, kind.as_str(), kind.exit_code(), e.to_string())
        }
    }
}
