use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use gazeval::config::Config;
use gazeval::ingest::ScreenGeometry;
use gazeval::report::{build_report, ReportOptions, StudyInputs};
use gazeval::sim::{simulate_study, SimConfig};
use gazeval::Error;

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn write_study(config: &SimConfig, root: &Path) {
    simulate_study(config, &ScreenGeometry::default())
        .unwrap()
        .write_to(root)
        .unwrap();
}

fn inputs(root: &Path) -> StudyInputs {
    StudyInputs::load(&root.join("sessions"), &root.join("catalog.json"), &root.join("gaze")).unwrap()
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_gazeval");
    for name in ["a", "b"] {
        let out = Command::new(bin)
            .args(["simulate", "--seed", "42", "--out"])
            .arg(dir.path().join(name))
            .env_remove("GAZEVAL_CONFIG")
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let a = tree(&dir.path().join("a"));
    assert_eq!(a.len(), 1 + 4 + 2 * 64);
    assert_eq!(a, tree(&dir.path().join("b")));

    let out = Command::new(bin)
        .args(["simulate", "--seed", "7", "--out"])
        .arg(dir.path().join("c"))
        .env_remove("GAZEVAL_CONFIG")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_ne!(a, tree(&dir.path().join("c")));
}

#[test]
fn report_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    write_study(&SimConfig::bundled(), dir.path());
    let inputs = inputs(dir.path());
    let config = Config::default();
    let one = build_report(&inputs, &config, &ReportOptions { jobs: Some(1), skip_bad_trials: false }).unwrap();
    let many = build_report(&inputs, &config, &ReportOptions { jobs: Some(3), skip_bad_trials: false }).unwrap();
    assert_eq!(one.to_json(), many.to_json());
    assert_eq!(one.table3_csv().unwrap(), many.table3_csv().unwrap());
}

#[test]
fn perfect_voters_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let config = SimConfig {
        vtt_correct_rate: 1.0,
        diagnosis_correct_rate: 1.0,
        ..SimConfig::bundled()
    };
    write_study(&config, dir.path());
    let report = build_report(&inputs(dir.path()), &Config::default(), &ReportOptions::default()).unwrap();
    assert_eq!(report.vtt.per_reader.len(), 4);
    for s in &report.vtt.per_reader {
        assert_eq!(s.accuracy, Some(1.0), "{s:?}");
    }
    assert_eq!(report.voting.accuracy, Some(1.0));
    for rates in report.agreement.values() {
        assert_eq!(rates.all.rate(), Some(1.0));
    }
    assert!(report.table4.iter().all(|r| r.accuracy == 1.0));
}

#[test]
fn bad_trials_abort_or_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    write_study(&SimConfig::bundled(), dir.path());
    fs::write(dir.path().join("gaze/r02/s003_VTT.csv"), "not,a,gaze,file\n").unwrap();
    let inputs = inputs(dir.path());
    let config = Config::default();

    match build_report(&inputs, &config, &ReportOptions::default()) {
        Err(Error::Trial { reader_id, stimulus_id, task, .. }) => {
            assert_eq!((reader_id.as_str(), stimulus_id.as_str(), task.as_str()), ("r02", "s003", "VTT"));
        }
        other => panic!("expected a trial error, got {other:?}"),
    }

    let report = build_report(&inputs, &config, &ReportOptions { jobs: None, skip_bad_trials: true }).unwrap();
    assert_eq!(report.inputs.skipped_trials.len(), 1);
    assert_eq!(report.inputs.analysed_trials, 63);

    let out = Command::new(env!("CARGO_BIN_EXE_gazeval"))
        .arg("report")
        .arg("--skip-bad-trials")
        .arg("--sessions")
        .arg(dir.path().join("sessions"))
        .arg("--catalog")
        .arg(dir.path().join("catalog.json"))
        .arg("--gaze")
        .arg(dir.path().join("gaze"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .env_remove("GAZEVAL_CONFIG")
        .output()
        .unwrap();
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("skipped 1 bad trial"), "{stderr}");
}

#[test]
fn unknown_stimulus_names_the_trial() {
    let dir = tempfile::tempdir().unwrap();
    write_study(&SimConfig::bundled(), dir.path());
    fs::write(dir.path().join("catalog.json"), "[]").unwrap();
    let err = build_report(&inputs(dir.path()), &Config::default(), &ReportOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Trial { .. }), "{err:?}");
    assert!(err.to_string().contains("unknown stimulus"), "{err}");
}
