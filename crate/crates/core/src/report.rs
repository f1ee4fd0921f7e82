//! The full pipeline: sessions and gaze files in, study tables out.
//!
//! Trials are analysed in parallel but every aggregate is reduced in a fixed
//! order (sessions by file name, trials in manifest order, stimuli and readers
//! by id), so the output is byte-identical for any number of worker threads.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::fixation::{detect_fixations, Scanpath, Selector};
use crate::ingest::{
    parse_catalog, parse_gaze_stream, parse_session_manifest, Authenticity, Catalog, Session,
    Task, TrialRecord,
};
use crate::metrics::{
    cc, ioc_fixation, ioc_scanpath, kld, overlap, sim, IocMethod, IocResult,
};
use crate::saliency::{attention_map, bias_map, coverage, entropy, gaze_mask, GazeMask, Normalization};
use crate::study::{
    agreement_rates, mean_std, paired_t_test, per_pathology_vtt, summary_stats, voting, vtt_score,
    AgreementRates, Tally, VoteOutcome, VoteResult, VttScore,
};

/// File names written by [`StudyReport::write_to`].
pub const REPORT_FILES: [&str; 6] = [
    "table1.csv",
    "table2.csv",
    "table3.csv",
    "table4.csv",
    "ttests.csv",
    "report.json",
];

const TYPES: [Authenticity; 2] = [Authenticity::Real, Authenticity::Synthetic];
const TASKS: [Task; 2] = [Task::Diagnosis, Task::Vtt];

/// Everything the pipeline reads.
#[derive(Debug, Clone)]
pub struct StudyInputs {
    pub catalog: Catalog,
    /// Ordered by manifest file name.
    pub sessions: Vec<Session>,
    /// Relative gaze file paths resolve against this directory.
    pub gaze_dir: PathBuf,
}

impl StudyInputs {
    /// Loads every `*.json` manifest in `sessions_dir` plus the catalog.
    pub fn load(sessions_dir: &Path, catalog_path: &Path, gaze_dir: &Path) -> Result<Self> {
        let open = |p: &Path| fs::File::open(p).map_err(|e| Error::io(p, e));
        let catalog = parse_catalog(open(catalog_path)?)?;
        let mut paths: Vec<PathBuf> = fs::read_dir(sessions_dir)
            .map_err(|e| Error::io(sessions_dir, e))?
            .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(sessions_dir, e)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut sessions = Vec::with_capacity(paths.len());
        for p in &paths {
            let session = parse_session_manifest(open(p)?).map_err(|e| match e {
                Error::Schema(m) => Error::Schema(format!("{}: {m}", p.display())),
                other => other,
            })?;
            sessions.push(session);
        }
        Ok(StudyInputs {
            catalog,
            sessions,
            gaze_dir: gaze_dir.to_path_buf(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReportOptions {
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Drop failing trials with a warning instead of aborting.
    pub skip_bad_trials: bool,
}

/// A trial left out of the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedTrial {
    pub reader_id: String,
    pub stimulus_id: String,
    pub task: Task,
    pub error: String,
}

struct TrialAnalysis {
    trial: TrialRecord,
    authenticity: Authenticity,
    scanpath: Scanpath,
    mask: GazeMask,
    coverage: f64,
    entropy: Option<f64>,
    clamped: usize,
    lost: usize,
}

fn analyse(trial: &TrialRecord, inputs: &StudyInputs, config: &Config) -> Result<TrialAnalysis> {
    let authenticity = inputs.catalog.get(&trial.stimulus_id)?.authenticity;
    let path = inputs.gaze_dir.join(&trial.gaze_file);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let stream = parse_gaze_stream(std::io::BufReader::new(file), &config.geometry)?;
    let fixations = detect_fixations(&stream, &config.fixation, &config.geometry)?;
    let map = attention_map(&fixations, &config.saliency, &config.geometry);
    let mask = gaze_mask(&map, &config.saliency);
    let normalized = map.normalize(Normalization::SumOne);
    let entropy = if normalized.degenerate {
        None
    } else {
        Some(entropy(&normalized.map)?)
    };
    Ok(TrialAnalysis {
        authenticity,
        scanpath: Scanpath::new(
            trial.stimulus_id.clone(),
            trial.reader_id.clone(),
            trial.task,
            fixations,
        )?,
        coverage: coverage(&mask),
        mask,
        entropy,
        clamped: stream.clamped(),
        lost: stream.lost(),
        trial: trial.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub task: Task,
    #[serde(rename = "type")]
    pub kind: Authenticity,
    pub n_trials: usize,
    pub duration_s_mean: Option<f64>,
    pub duration_s_std: Option<f64>,
    pub vtt_accuracy_mean: Option<f64>,
    pub vtt_accuracy_std: Option<f64>,
    pub diagnostic_agreement_mean: Option<f64>,
    pub diagnostic_agreement_std: Option<f64>,
    pub gaze_coverage_mean: Option<f64>,
    pub gaze_coverage_std: Option<f64>,
    pub params_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub selector: Selector,
    pub task: Task,
    pub cc: Option<f64>,
    /// KL divergence of the real bias map from the synthetic one.
    pub kld: Option<f64>,
    pub sim: Option<f64>,
    pub real_scanpaths: usize,
    pub synthetic_scanpaths: usize,
    pub degenerate: bool,
    pub params_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table3Row {
    pub method: IocMethod,
    pub task: Task,
    #[serde(rename = "type")]
    pub kind: Authenticity,
    pub n: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub median: Option<f64>,
    pub std_dev: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
    pub params_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table4Row {
    pub pathology: String,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub params_hash: String,
}

/// Real versus synthetic, paired by reader.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestRow {
    pub comparison: String,
    pub task: Task,
    pub n_pairs: usize,
    pub mean_real: Option<f64>,
    pub mean_synthetic: Option<f64>,
    pub t_statistic: Option<f64>,
    pub df: Option<usize>,
    pub p_value: Option<f64>,
    pub params_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanStd {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl MeanStd {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        let finite = |v: f64| v.is_finite().then_some(v);
        MeanStd {
            n: values.len(),
            mean: finite(mean),
            std: finite(std),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedAttentionPair {
    pub reader_id: String,
    pub stimulus_id: String,
    pub iou: f64,
    /// Both masks empty.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedAttention {
    pub summary: MeanStd,
    pub pairs: Vec<SharedAttentionPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Voting {
    pub accuracy: Option<f64>,
    pub ties: usize,
    pub results: Vec<VoteResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VttSummary {
    pub sensitivity: MeanStd,
    pub specificity: MeanStd,
    pub per_reader: Vec<VttScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathologyBreakdown {
    pub pathology: String,
    pub per_reader: BTreeMap<String, Tally>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StimulusIoc {
    pub stimulus_id: String,
    pub task: Task,
    pub results: Vec<IocResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KldConvention {
    pub epsilon: f64,
    pub log_base: &'static str,
    pub direction: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSummary {
    pub readers: usize,
    pub stimuli: usize,
    pub trials: usize,
    pub analysed_trials: usize,
    pub clamped_samples: usize,
    pub lost_samples: usize,
    pub skipped_trials: Vec<SkippedTrial>,
}

/// Every table plus the supporting detail, as written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub params_hash: String,
    pub config: Config,
    pub kld: KldConvention,
    pub inputs: InputSummary,
    pub table1: Vec<Table1Row>,
    pub table2: Vec<Table2Row>,
    pub table3: Vec<Table3Row>,
    pub table4: Vec<Table4Row>,
    pub ttests: Vec<TTestRow>,
    pub agreement: BTreeMap<String, AgreementRates>,
    pub vtt: VttSummary,
    pub voting: Voting,
    pub shared_attention: SharedAttention,
    pub pathology_per_reader: Vec<PathologyBreakdown>,
    pub ioc: Vec<StimulusIoc>,
}

/// Runs the pipeline.
pub fn build_report(inputs: &StudyInputs, config: &Config, options: &ReportOptions) -> Result<StudyReport> {
    config.validate()?;
    let run = || build(inputs, config, options);
    match options.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn build(inputs: &StudyInputs, config: &Config, options: &ReportOptions) -> Result<StudyReport> {
    let mut readers = std::collections::BTreeSet::new();
    for s in &inputs.sessions {
        if !readers.insert(s.reader.reader_id.as_str()) {
            return Err(Error::Schema(format!(
                "reader {} has more than one session",
                s.reader.reader_id
            )));
        }
    }
    let all_trials: Vec<&TrialRecord> = inputs.sessions.iter().flat_map(|s| &s.trials).collect();
    if all_trials.is_empty() {
        return Err(Error::NoTrials);
    }
    let hash = config.params_hash();

    let outcomes: Vec<Result<TrialAnalysis>> = all_trials
        .par_iter()
        .map(|t| analyse(t, inputs, config))
        .collect();
    let mut analysed = Vec::with_capacity(outcomes.len());
    let mut skipped = Vec::new();
    for (trial, outcome) in all_trials.iter().zip(outcomes) {
        match outcome {
            Ok(a) => analysed.push(a),
            Err(e) if options.skip_bad_trials => skipped.push(SkippedTrial {
                reader_id: trial.reader_id.clone(),
                stimulus_id: trial.stimulus_id.clone(),
                task: trial.task,
                error: e.to_string(),
            }),
            Err(e) => {
                return Err(Error::Trial {
                    reader_id: trial.reader_id.clone(),
                    stimulus_id: trial.stimulus_id.clone(),
                    task: trial.task.to_string(),
                    source: Box::new(e),
                })
            }
        }
    }
    if analysed.is_empty() {
        return Err(Error::NoTrials);
    }

    let scored: Vec<TrialRecord> = analysed.iter().map(|a| a.trial.clone()).collect();
    let of_task = |task: Task| -> Vec<TrialRecord> {
        scored.iter().filter(|t| t.task == task).cloned().collect()
    };
    let diagnosis = of_task(Task::Diagnosis);
    let vtt = of_task(Task::Vtt);
    let agreement = agreement_rates(&diagnosis, &inputs.catalog)?;
    let vtt_scores = vtt_score(&vtt, &inputs.catalog)?;
    let votes = voting(&vtt, &inputs.catalog)?;
    let pathology = per_pathology_vtt(&vtt, &inputs.catalog)?;

    let table1 = table1(&analysed, &agreement, &vtt_scores, &hash);
    let table2 = table2(&analysed, config, &hash)?;
    let (table3, ioc) = table3(&analysed, config, &hash)?;
    let table4 = pathology
        .values()
        .map(|p| Table4Row {
            pathology: p.pathology.clone(),
            accuracy: p.accuracy(),
            correct: p.overall.hits,
            total: p.overall.total,
            params_hash: hash.clone(),
        })
        .collect();
    let ttests = ttests(&analysed, &agreement, &vtt_scores, &hash)?;

    let sens: Vec<f64> = vtt_scores.values().filter_map(|s| s.sensitivity).collect();
    let spec: Vec<f64> = vtt_scores.values().filter_map(|s| s.specificity).collect();
    let correct_votes = votes.iter().filter(|v| v.outcome == VoteOutcome::Correct).count();

    Ok(StudyReport {
        params_hash: hash,
        config: *config,
        kld: KldConvention {
            epsilon: config.metrics.kld_epsilon,
            log_base: "e",
            direction: "real||synthetic",
        },
        inputs: InputSummary {
            readers: inputs.sessions.len(),
            stimuli: inputs.catalog.len(),
            trials: all_trials.len(),
            analysed_trials: analysed.len(),
            clamped_samples: analysed.iter().map(|a| a.clamped).sum(),
            lost_samples: analysed.iter().map(|a| a.lost).sum(),
            skipped_trials: skipped,
        },
        table1,
        table2,
        table3,
        table4,
        ttests,
        agreement,
        vtt: VttSummary {
            sensitivity: MeanStd::of(&sens),
            specificity: MeanStd::of(&spec),
            per_reader: vtt_scores.into_values().collect(),
        },
        voting: Voting {
            accuracy: (!votes.is_empty()).then(|| correct_votes as f64 / votes.len() as f64),
            ties: votes.iter().filter(|v| v.tie).count(),
            results: votes,
        },
        shared_attention: shared_attention(&analysed)?,
        pathology_per_reader: pathology
            .into_values()
            .map(|p| PathologyBreakdown {
                pathology: p.pathology,
                per_reader: p.per_reader,
            })
            .collect(),
        ioc,
    })
}

fn cell(analysed: &[TrialAnalysis], task: Task, kind: Authenticity) -> impl Iterator<Item = &TrialAnalysis> {
    analysed
        .iter()
        .filter(move |a| a.trial.task == task && a.authenticity == kind)
}

fn table1(
    analysed: &[TrialAnalysis],
    agreement: &BTreeMap<String, AgreementRates>,
    vtt_scores: &BTreeMap<String, VttScore>,
    hash: &str,
) -> Vec<Table1Row> {
    let mut rows = Vec::new();
    for task in TASKS {
        for kind in TYPES {
            let trials: Vec<&TrialAnalysis> = cell(analysed, task, kind).collect();
            let durations = MeanStd::of(&trials.iter().map(|a| a.trial.duration_s).collect::<Vec<_>>());
            let coverages = MeanStd::of(&trials.iter().map(|a| a.coverage).collect::<Vec<_>>());
            // Accuracy and agreement are per-reader rates, summarised across readers.
            let (vtt_acc, agree) = match task {
                Task::Vtt => {
                    let rates: Vec<f64> = vtt_scores
                        .values()
                        .filter_map(|s| match kind {
                            Authenticity::Real => s.specificity,
                            Authenticity::Synthetic => s.sensitivity,
                        })
                        .collect();
                    (Some(MeanStd::of(&rates)), None)
                }
                Task::Diagnosis => {
                    let rates: Vec<f64> = agreement
                        .values()
                        .filter_map(|r| match kind {
                            Authenticity::Real => r.real.rate(),
                            Authenticity::Synthetic => r.synthetic.rate(),
                        })
                        .collect();
                    (None, Some(MeanStd::of(&rates)))
                }
            };
            rows.push(Table1Row {
                task,
                kind,
                n_trials: trials.len(),
                duration_s_mean: durations.mean,
                duration_s_std: durations.std,
                vtt_accuracy_mean: vtt_acc.as_ref().and_then(|m| m.mean),
                vtt_accuracy_std: vtt_acc.as_ref().and_then(|m| m.std),
                diagnostic_agreement_mean: agree.as_ref().and_then(|m| m.mean),
                diagnostic_agreement_std: agree.as_ref().and_then(|m| m.std),
                gaze_coverage_mean: coverages.mean,
                gaze_coverage_std: coverages.std,
                params_hash: hash.to_string(),
            });
        }
    }
    rows
}

fn table2(analysed: &[TrialAnalysis], config: &Config, hash: &str) -> Result<Vec<Table2Row>> {
    let jobs: Vec<(Selector, Task)> = Selector::ALL
        .iter()
        .flat_map(|&s| TASKS.iter().map(move |&t| (s, t)))
        .collect();
    jobs.par_iter()
        .map(|&(selector, task)| {
            let cohort = |kind| -> Vec<Scanpath> {
                cell(analysed, task, kind).map(|a| a.scanpath.clone()).collect()
            };
            let (real, synthetic) = (cohort(Authenticity::Real), cohort(Authenticity::Synthetic));
            let p = bias_map(&real, selector, &config.saliency, &config.geometry);
            let q = bias_map(&synthetic, selector, &config.saliency, &config.geometry);
            let count = |v: &[Scanpath]| v.iter().filter(|s| !s.is_empty()).count();
            let degenerate = p.degenerate || q.degenerate;
            let (cc_v, kld_v, sim_v) = if degenerate {
                (None, None, None)
            } else {
                let cc_v = match cc(&p.map, &q.map) {
                    Ok(v) => Some(v),
                    Err(Error::ConstantMap) => None,
                    Err(e) => return Err(e),
                };
                (cc_v, Some(kld(&p.map, &q.map, &config.metrics)?), Some(sim(&p.map, &q.map)?))
            };
            Ok(Table2Row {
                selector,
                task,
                cc: cc_v,
                kld: kld_v,
                sim: sim_v,
                real_scanpaths: count(&real),
                synthetic_scanpaths: count(&synthetic),
                degenerate,
                params_hash: hash.to_string(),
            })
        })
        .collect()
}

fn table3(analysed: &[TrialAnalysis], config: &Config, hash: &str) -> Result<(Vec<Table3Row>, Vec<StimulusIoc>)> {
    // (stimulus, task) -> scanpaths in reader order
    let mut groups: BTreeMap<(String, Task), (Authenticity, Vec<Scanpath>)> = BTreeMap::new();
    for a in analysed {
        groups
            .entry((a.trial.stimulus_id.clone(), a.trial.task))
            .or_insert_with(|| (a.authenticity, Vec::new()))
            .1
            .push(a.scanpath.clone());
    }
    let groups: Vec<_> = groups.into_iter().collect();
    let per_stimulus: Vec<(Authenticity, StimulusIoc)> = groups
        .into_par_iter()
        .filter_map(|((stimulus_id, task), (kind, mut paths))| {
            paths.sort_by(|a, b| a.reader_id.cmp(&b.reader_id));
            if paths.len() < 2 {
                return None;
            }
            let mut results = Vec::new();
            let fixation = ioc_fixation(&paths, &config.metrics, &config.saliency, &config.geometry);
            let mut push = |r: Result<IocResult>| -> Result<()> {
                match r {
                    Ok(r) => results.push(r),
                    Err(Error::TooFewObservers(_)) => {}
                    Err(e) => return Err(e),
                }
                Ok(())
            };
            let outcome = push(fixation)
                .and_then(|_| push(ioc_scanpath(&paths, IocMethod::Dtw, &config.metrics, &config.geometry)))
                .and_then(|_| push(ioc_scanpath(&paths, IocMethod::Levenshtein, &config.metrics, &config.geometry)));
            Some(outcome.map(|_| (kind, StimulusIoc { stimulus_id, task, results })))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for method in IocMethod::ALL {
        for task in TASKS {
            for kind in TYPES {
                let scores: Vec<f64> = per_stimulus
                    .iter()
                    .filter(|(k, s)| *k == kind && s.task == task)
                    .flat_map(|(_, s)| s.results.iter().filter(|r| r.method == method))
                    .flat_map(|r| r.per_observer_scores.values().copied())
                    .collect();
                let stats = summary_stats(&scores).ok();
                rows.push(Table3Row {
                    method,
                    task,
                    kind,
                    n: scores.len(),
                    mean: stats.map(|s| s.mean),
                    min: stats.map(|s| s.min),
                    max: stats.map(|s| s.max),
                    median: stats.map(|s| s.median),
                    std_dev: stats.map(|s| s.std_dev),
                    q25: stats.map(|s| s.q25),
                    q75: stats.map(|s| s.q75),
                    params_hash: hash.to_string(),
                });
            }
        }
    }
    Ok((rows, per_stimulus.into_iter().map(|(_, s)| s).collect()))
}

fn per_reader_mean(
    analysed: &[TrialAnalysis],
    task: Task,
    kind: Authenticity,
    value: impl Fn(&TrialAnalysis) -> Option<f64>,
) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for a in cell(analysed, task, kind) {
        if let Some(v) = value(a) {
            acc.entry(a.trial.reader_id.clone()).or_default().push(v);
        }
    }
    acc.into_iter().map(|(k, v)| (k, mean_std(&v).0)).collect()
}

fn ttest_row(comparison: &str, task: Task, real: &BTreeMap<String, f64>, synthetic: &BTreeMap<String, f64>, hash: &str) -> Result<TTestRow> {
    let (x, y): (Vec<f64>, Vec<f64>) = real
        .iter()
        .filter_map(|(r, &v)| synthetic.get(r).map(|&w| (v, w)))
        .unzip();
    let test = if x.len() >= 2 { Some(paired_t_test(&x, &y)?) } else { None };
    let mean = |v: &[f64]| MeanStd::of(v).mean;
    Ok(TTestRow {
        comparison: comparison.to_string(),
        task,
        n_pairs: x.len(),
        mean_real: mean(&x),
        mean_synthetic: mean(&y),
        t_statistic: test.map(|t| t.t_statistic).filter(|t| t.is_finite()),
        df: test.map(|t| t.degrees_of_freedom),
        p_value: test.map(|t| t.p_value),
        params_hash: hash.to_string(),
    })
}

fn ttests(
    analysed: &[TrialAnalysis],
    agreement: &BTreeMap<String, AgreementRates>,
    vtt_scores: &BTreeMap<String, VttScore>,
    hash: &str,
) -> Result<Vec<TTestRow>> {
    let rates = |f: &dyn Fn(&AgreementRates) -> Option<f64>| -> BTreeMap<String, f64> {
        agreement.iter().filter_map(|(k, r)| f(r).map(|v| (k.clone(), v))).collect()
    };
    let scores = |f: &dyn Fn(&VttScore) -> Option<f64>| -> BTreeMap<String, f64> {
        vtt_scores.iter().filter_map(|(k, s)| f(s).map(|v| (k.clone(), v))).collect()
    };
    let mut rows = vec![
        ttest_row(
            "diagnostic_agreement",
            Task::Diagnosis,
            &rates(&|r| r.real.rate()),
            &rates(&|r| r.synthetic.rate()),
            hash,
        )?,
        ttest_row(
            "vtt_accuracy",
            Task::Vtt,
            &scores(&|s| s.specificity),
            &scores(&|s| s.sensitivity),
            hash,
        )?,
    ];
    type Metric = fn(&TrialAnalysis) -> Option<f64>;
    let metrics: [(&str, Metric); 3] = [
        ("entropy", |a| a.entropy),
        ("gaze_coverage", |a| Some(a.coverage)),
        ("duration_s", |a| Some(a.trial.duration_s)),
    ];
    for (name, f) in metrics {
        for task in TASKS {
            rows.push(ttest_row(
                name,
                task,
                &per_reader_mean(analysed, task, Authenticity::Real, f),
                &per_reader_mean(analysed, task, Authenticity::Synthetic, f),
                hash,
            )?);
        }
    }
    Ok(rows)
}

fn shared_attention(analysed: &[TrialAnalysis]) -> Result<SharedAttention> {
    let mut by_key: BTreeMap<(&str, &str), [Option<&GazeMask>; 2]> = BTreeMap::new();
    for a in analysed {
        let slot = match a.trial.task {
            Task::Diagnosis => 0,
            Task::Vtt => 1,
        };
        by_key
            .entry((a.trial.reader_id.as_str(), a.trial.stimulus_id.as_str()))
            .or_default()[slot] = Some(&a.mask);
    }
    let mut pairs = Vec::new();
    for ((reader, stimulus), masks) in by_key {
        if let [Some(d), Some(v)] = masks {
            let o = overlap(d, v)?;
            pairs.push(SharedAttentionPair {
                reader_id: reader.to_string(),
                stimulus_id: stimulus.to_string(),
                iou: o.iou(),
                degenerate: o.is_degenerate(),
            });
        }
    }
    Ok(SharedAttention {
        summary: MeanStd::of(&pairs.iter().map(|p| p.iou).collect::<Vec<_>>()),
        pairs,
    })
}

fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Schema(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Schema(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl StudyReport {
    pub fn table1_csv(&self) -> Result<String> {
        csv_string(&self.table1)
    }

    pub fn table2_csv(&self) -> Result<String> {
        csv_string(&self.table2)
    }

    pub fn table3_csv(&self) -> Result<String> {
        csv_string(&self.table3)
    }

    pub fn table4_csv(&self) -> Result<String> {
        csv_string(&self.table4)
    }

    pub fn ttests_csv(&self) -> Result<String> {
        csv_string(&self.ttests)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Writes the five tables and `report.json` into `dir`, creating it if
    /// needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let contents = [
            self.table1_csv()?,
            self.table2_csv()?,
            self.table3_csv()?,
            self.table4_csv()?,
            self.ttests_csv()?,
            self.to_json(),
        ];
        for (name, text) in REPORT_FILES.iter().zip(contents) {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
