//! Task scoring: diagnostic agreement, real-or-synthetic votes, majority
//! voting and the per-pathology breakdown.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Answer, Authenticity, Catalog, StimulusRecord, Task, TrialRecord};

/// Group name for synthetic stimuli without gold findings.
pub const NORMAL_GROUP: &str = "Normal";

/// A hit count over a number of trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub hits: usize,
    pub total: usize,
}

impl Tally {
    pub fn record(&mut self, hit: bool) {
        self.hits += usize::from(hit);
        self.total += 1;
    }

    /// `hits / total`, absent when there were no trials.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }
}

fn require_task(trial: &TrialRecord, task: Task) -> Result<()> {
    if trial.task != task {
        return Err(Error::TaskMismatch {
            expected: task.to_string(),
            got: trial.task.to_string(),
        });
    }
    Ok(())
}

fn vote(trial: &TrialRecord) -> Result<Authenticity> {
    require_task(trial, Task::Vtt)?;
    match &trial.answer {
        Answer::AuthenticityVote(v) => Ok(*v),
        Answer::FindingLabels(_) => Err(Error::AnswerMismatch {
            stimulus_id: trial.stimulus_id.clone(),
            task: trial.task.to_string(),
        }),
    }
}

/// Whether a diagnosis agrees with the gold findings.
///
/// A pathology-bearing image agrees when the reader names at least one of its
/// findings; a normal image agrees only when the reader names none.
pub fn diagnostic_agreement(trial: &TrialRecord, gold: &StimulusRecord) -> Result<bool> {
    require_task(trial, Task::Diagnosis)?;
    let Answer::FindingLabels(found) = &trial.answer else {
        return Err(Error::AnswerMismatch {
            stimulus_id: trial.stimulus_id.clone(),
            task: trial.task.to_string(),
        });
    };
    Ok(if gold.pathology_labels.is_empty() {
        found.is_empty()
    } else {
        !found.is_disjoint(&gold.pathology_labels)
    })
}

/// Per-reader agreement tallies split by stimulus class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementRates {
    pub real: Tally,
    pub synthetic: Tally,
    pub all: Tally,
}

/// Diagnostic agreement per reader. Every trial must be a diagnosis trial.
pub fn agreement_rates(
    trials: &[TrialRecord],
    catalog: &Catalog,
) -> Result<BTreeMap<String, AgreementRates>> {
    let mut out: BTreeMap<String, AgreementRates> = BTreeMap::new();
    for trial in trials {
        let gold = catalog.get(&trial.stimulus_id)?;
        let hit = diagnostic_agreement(trial, gold)?;
        let rates = out.entry(trial.reader_id.clone()).or_default();
        match gold.authenticity {
            Authenticity::Real => rates.real.record(hit),
            Authenticity::Synthetic => rates.synthetic.record(hit),
        }
        rates.all.record(hit);
    }
    Ok(out)
}

/// Confusion counts of one reader's real-or-synthetic votes. Synthetic is the
/// positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VttScore {
    pub reader_id: String,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: Option<f64>,
    /// `TP / (TP + FN)`; absent without synthetic trials.
    pub sensitivity: Option<f64>,
    /// `TN / (TN + FP)`; absent without real trials.
    pub specificity: Option<f64>,
}

impl VttScore {
    fn from_counts(reader_id: String, tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        VttScore {
            reader_id,
            tp,
            tn,
            fp,
            fn_,
            accuracy: ratio(tp + tn, tp + tn + fp + fn_),
            sensitivity: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Confusion matrix per reader. Every trial must be a VTT trial.
pub fn vtt_score(trials: &[TrialRecord], catalog: &Catalog) -> Result<BTreeMap<String, VttScore>> {
    let mut counts: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    for trial in trials {
        let v = vote(trial)?;
        let truth = catalog.get(&trial.stimulus_id)?.authenticity;
        let c = counts.entry(trial.reader_id.clone()).or_default();
        let slot = match (truth, v) {
            (Authenticity::Synthetic, Authenticity::Synthetic) => 0,
            (Authenticity::Real, Authenticity::Real) => 1,
            (Authenticity::Real, Authenticity::Synthetic) => 2,
            (Authenticity::Synthetic, Authenticity::Real) => 3,
        };
        c[slot] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(id, [tp, tn, fp, fn_])| (id.clone(), VttScore::from_counts(id, tp, tn, fp, fn_)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoteOutcome {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteResult {
    pub stimulus_id: String,
    pub real_votes: usize,
    pub synthetic_votes: usize,
    pub tie: bool,
    pub outcome: VoteOutcome,
}

/// One vote per reader on a single stimulus; the majority label is compared
/// with the truth. An exact tie counts as incorrect.
pub fn majority_vote(trials: &[TrialRecord], catalog: &Catalog) -> Result<VoteResult> {
    let first = trials.first().ok_or(Error::NoTrials)?;
    let stimulus_id = &first.stimulus_id;
    let mut real_votes = 0;
    let mut synthetic_votes = 0;
    for trial in trials {
        if &trial.stimulus_id != stimulus_id {
            return Err(Error::Schema(format!(
                "majority vote mixes stimuli {stimulus_id} and {}",
                trial.stimulus_id
            )));
        }
        match vote(trial)? {
            Authenticity::Real => real_votes += 1,
            Authenticity::Synthetic => synthetic_votes += 1,
        }
    }
    let truth = catalog.get(stimulus_id)?.authenticity;
    let tie = real_votes == synthetic_votes;
    let majority = if synthetic_votes > real_votes {
        Authenticity::Synthetic
    } else {
        Authenticity::Real
    };
    let outcome = if !tie && majority == truth {
        VoteOutcome::Correct
    } else {
        VoteOutcome::Incorrect
    };
    Ok(VoteResult {
        stimulus_id: stimulus_id.clone(),
        real_votes,
        synthetic_votes,
        tie,
        outcome,
    })
}

/// Majority vote on every stimulus that has VTT trials, in stimulus order.
pub fn voting(trials: &[TrialRecord], catalog: &Catalog) -> Result<Vec<VoteResult>> {
    let mut by_stimulus: BTreeMap<&str, Vec<TrialRecord>> = BTreeMap::new();
    for trial in trials {
        by_stimulus
            .entry(trial.stimulus_id.as_str())
            .or_default()
            .push(trial.clone());
    }
    by_stimulus
        .values()
        .map(|group| majority_vote(group, catalog))
        .collect()
}

/// VTT accuracy on synthetic stimuli sharing one gold finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologyAccuracy {
    pub pathology: String,
    /// Over all trials of the group.
    pub overall: Tally,
    pub per_reader: BTreeMap<String, Tally>,
}

impl PathologyAccuracy {
    pub fn accuracy(&self) -> f64 {
        self.overall.rate().expect("groups are never empty")
    }
}

/// Per-pathology VTT accuracy over synthetic stimuli.
///
/// A stimulus with several findings counts towards each; one without
/// findings counts towards [`NORMAL_GROUP`]. Accuracy averages over trials.
pub fn per_pathology_vtt(
    trials: &[TrialRecord],
    catalog: &Catalog,
) -> Result<BTreeMap<String, PathologyAccuracy>> {
    let mut out: BTreeMap<String, PathologyAccuracy> = BTreeMap::new();
    for trial in trials {
        let v = vote(trial)?;
        let gold = catalog.get(&trial.stimulus_id)?;
        if gold.authenticity != Authenticity::Synthetic {
            continue;
        }
        let correct = v == Authenticity::Synthetic;
        let normal: BTreeSet<String> = [NORMAL_GROUP.to_string()].into();
        let groups = if gold.pathology_labels.is_empty() {
            &normal
        } else {
            &gold.pathology_labels
        };
        for group in groups {
            let entry = out.entry(group.clone()).or_insert_with(|| PathologyAccuracy {
                pathology: group.clone(),
                overall: Tally::default(),
                per_reader: BTreeMap::new(),
            });
            entry.overall.record(correct);
            entry
                .per_reader
                .entry(trial.reader_id.clone())
                .or_default()
                .record(correct);
        }
    }
    Ok(out)
}
