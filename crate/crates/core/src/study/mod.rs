//! Study-level scoring and statistics.

mod scoring;
mod stats;

pub use scoring::{
    agreement_rates, diagnostic_agreement, majority_vote, per_pathology_vtt, voting, vtt_score,
    AgreementRates, PathologyAccuracy, Tally, VoteOutcome, VoteResult, VttScore, NORMAL_GROUP,
};
pub use stats::{
    ln_gamma, mean_std, paired_t_test, quantile_sorted, regularized_incomplete_beta,
    student_t_two_sided_p, summary_stats, SummaryStats, TTestResult,
};
