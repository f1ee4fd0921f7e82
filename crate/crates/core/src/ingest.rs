//! Input artifacts: raw binocular gaze streams, session manifests, stimulus
//! catalogs, and the screen geometry the gaze coordinates live in.
//!
//! Everything here is strict-schema. Unknown JSON fields are rejected and the
//! gaze CSV header must match exactly.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The exact header line of a gaze CSV file.
pub const GAZE_CSV_HEADER: [&str; 7] = ["t_ms", "lx", "ly", "rx", "ry", "lvalid", "rvalid"];

/// A position in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }
}

/// Physical description of the display frame that gaze coordinates refer to.
///
/// Attention-map grids span this whole frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenGeometry {
    pub width_px: f64,
    pub height_px: f64,
    pub width_cm: f64,
    pub height_cm: f64,
    pub viewing_distance_cm: f64,
}

impl Default for ScreenGeometry {
    /// A 24" 1920x1080 monitor viewed from 80 cm.
    fn default() -> Self {
        ScreenGeometry {
            width_px: 1920.0,
            height_px: 1080.0,
            width_cm: 53.1,
            height_cm: 29.9,
            viewing_distance_cm: 80.0,
        }
    }
}

impl ScreenGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("width_px", self.width_px),
            ("height_px", self.height_px),
            ("width_cm", self.width_cm),
            ("height_cm", self.height_cm),
            ("viewing_distance_cm", self.viewing_distance_cm),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "geometry.{name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Centimeters per pixel along x.
    pub fn pitch_x_cm(&self) -> f64 {
        self.width_cm / self.width_px
    }

    /// Centimeters per pixel along y.
    pub fn pitch_y_cm(&self) -> f64 {
        self.height_cm / self.height_px
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x < self.width_px && p.y >= 0.0 && p.y < self.height_px
    }

    /// Clamps `p` into `[0, width_px) x [0, height_px)`.
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(0.0, self.width_px.next_down()),
            p.y.clamp(0.0, self.height_px.next_down()),
        )
    }
}

/// One timestamped binocular sample. An eye is `None` when the tracker
/// flagged it invalid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t_ms: i64,
    pub left: Option<Point>,
    pub right: Option<Point>,
}

impl GazeSample {
    /// Both eyes invalid (blink or track loss).
    pub fn is_lost(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }
}

/// Single gaze point of a binocular sample: the mean of both eyes, or the one
/// valid eye when the other was lost.
pub fn cyclopean(sample: &GazeSample) -> Option<Point> {
    match (sample.left, sample.right) {
        (Some(l), Some(r)) => Some(l.midpoint(r)),
        (Some(p), None) | (None, Some(p)) => Some(p),
        (None, None) => None,
    }
}

/// Time-ordered samples of one recording.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleStream {
    samples: Vec<GazeSample>,
    clamped: usize,
}

impl SampleStream {
    /// Builds a stream from samples already known to be valid. Timestamps must
    /// be strictly increasing.
    pub fn from_samples(samples: Vec<GazeSample>) -> Result<Self> {
        for (i, pair) in samples.windows(2).enumerate() {
            if pair[1].t_ms <= pair[0].t_ms {
                return Err(Error::NonMonotoneTime {
                    line: i as u64 + 2,
                    t_ms: pair[1].t_ms,
                    prev_ms: pair[0].t_ms,
                });
            }
        }
        Ok(SampleStream {
            samples,
            clamped: 0,
        })
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of eye coordinates that fell outside the screen and were clamped.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Number of samples with both eyes invalid.
    pub fn lost(&self) -> usize {
        self.samples.iter().filter(|s| s.is_lost()).count()
    }

    pub fn cyclopean_points(&self) -> Vec<Option<Point>> {
        self.samples.iter().map(cyclopean).collect()
    }
}

/// Parses a gaze CSV (`t_ms,lx,ly,rx,ry,lvalid,rvalid`).
///
/// Coordinates of an eye flagged invalid are ignored and may be left empty.
/// Valid coordinates outside the screen are clamped and counted.
pub fn parse_gaze_stream<R: Read>(input: R, geometry: &ScreenGeometry) -> Result<SampleStream> {
    geometry.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);

    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::Empty("gaze stream")),
        Some(rec) => rec.map_err(|e| csv_error(e, 1))?,
    };
    if header.iter().ne(GAZE_CSV_HEADER.iter().copied()) {
        return Err(Error::Malformed {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                GAZE_CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut samples = Vec::new();
    let mut clamped = 0;
    let mut prev: Option<i64> = None;
    for rec in records {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != GAZE_CSV_HEADER.len() {
            return Err(Error::Malformed {
                line,
                message: format!("expected 7 fields, found {}", rec.len()),
            });
        }
        let t_ms: i64 = rec[0].trim().parse().map_err(|_| Error::Malformed {
            line,
            message: format!("t_ms `{}` is not an integer", &rec[0]),
        })?;
        if let Some(prev_ms) = prev {
            if t_ms <= prev_ms {
                return Err(Error::NonMonotoneTime {
                    line,
                    t_ms,
                    prev_ms,
                });
            }
        }
        prev = Some(t_ms);

        let lvalid = parse_flag(&rec[5], "lvalid", line)?;
        let rvalid = parse_flag(&rec[6], "rvalid", line)?;
        let mut eye = |valid: bool, xs: &str, ys: &str, name: &str| -> Result<Option<Point>> {
            if !valid {
                return Ok(None);
            }
            let p = Point::new(
                parse_coord(xs, name, line)?,
                parse_coord(ys, name, line)?,
            );
            if geometry.contains(p) {
                Ok(Some(p))
            } else {
                clamped += 1;
                Ok(Some(geometry.clamp(p)))
            }
        };
        let left = eye(lvalid, &rec[1], &rec[2], "left")?;
        let right = eye(rvalid, &rec[3], &rec[4], "right")?;
        samples.push(GazeSample { t_ms, left, right });
    }

    if samples.is_empty() {
        return Err(Error::Empty("gaze stream"));
    }
    Ok(SampleStream { samples, clamped })
}

/// Writes samples in the gaze CSV format. Invalid eyes get empty coordinates.
pub fn write_gaze_stream<W: Write>(out: W, samples: &[GazeSample]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GAZE_CSV_HEADER)?;
    let coord = |p: Option<Point>, f: fn(Point) -> f64| p.map(|p| f(p).to_string()).unwrap_or_default();
    for s in samples {
        w.write_record([
            s.t_ms.to_string(),
            coord(s.left, |p| p.x),
            coord(s.left, |p| p.y),
            coord(s.right, |p| p.x),
            coord(s.right, |p| p.y),
            u8::from(s.left.is_some()).to_string(),
            u8::from(s.right.is_some()).to_string(),
        ])?;
    }
    w.flush()
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::Malformed {
        line,
        message: e.to_string(),
    }
}

fn parse_flag(field: &str, name: &str, line: u64) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Malformed {
            line,
            message: format!("{name} must be 0 or 1, found `{other}`"),
        }),
    }
}

fn parse_coord(field: &str, eye: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Malformed {
            line,
            message: format!("{eye} eye coordinate `{field}` is not a finite number"),
        })
}

/// Whether an image is a real acquisition or machine-generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Authenticity {
    Real,
    Synthetic,
}

impl fmt::Display for Authenticity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Authenticity::Real => "Real",
            Authenticity::Synthetic => "Synthetic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusRecord {
    pub stimulus_id: String,
    pub authenticity: Authenticity,
    /// Gold-standard findings. Empty means a normal image.
    pub pathology_labels: BTreeSet<String>,
}

/// Stimuli keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    stimuli: BTreeMap<String, StimulusRecord>,
}

impl Catalog {
    pub fn new(records: impl IntoIterator<Item = StimulusRecord>) -> Result<Self> {
        let mut stimuli = BTreeMap::new();
        for rec in records {
            if stimuli.contains_key(&rec.stimulus_id) {
                return Err(Error::DuplicateStimulus(rec.stimulus_id));
            }
            stimuli.insert(rec.stimulus_id.clone(), rec);
        }
        Ok(Catalog { stimuli })
    }

    pub fn get(&self, stimulus_id: &str) -> Result<&StimulusRecord> {
        self.stimuli
            .get(stimulus_id)
            .ok_or_else(|| Error::UnknownStimulus(stimulus_id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &StimulusRecord> {
        self.stimuli.values()
    }

    pub fn len(&self) -> usize {
        self.stimuli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stimuli.is_empty()
    }

    pub fn to_json(&self) -> String {
        let records: Vec<&StimulusRecord> = self.stimuli.values().collect();
        serde_json::to_string_pretty(&records).expect("catalog serializes")
    }
}

/// Parses a stimulus catalog: a JSON array of stimulus records.
pub fn parse_catalog<R: Read>(input: R) -> Result<Catalog> {
    let records: Vec<StimulusRecord> =
        serde_json::from_reader(input).map_err(|e| Error::Schema(e.to_string()))?;
    Catalog::new(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum YearsBand {
    #[serde(rename = "0-9")]
    UnderTen,
    #[serde(rename = "10-19")]
    TenToNineteen,
    #[serde(rename = "20+")]
    TwentyPlus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReaderProfile {
    pub reader_id: String,
    pub specialties: BTreeSet<String>,
    pub years_experience_band: YearsBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    Diagnosis,
    #[serde(rename = "VTT")]
    Vtt,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Diagnosis => "Diagnosis",
            Task::Vtt => "VTT",
        })
    }
}

/// What the reader answered. The variant must match the trial's task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Answer {
    FindingLabels(BTreeSet<String>),
    AuthenticityVote(Authenticity),
}

impl Answer {
    pub fn task(&self) -> Task {
        match self {
            Answer::FindingLabels(_) => Task::Diagnosis,
            Answer::AuthenticityVote(_) => Task::Vtt,
        }
    }
}

/// One reader viewing one stimulus under one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub reader_id: String,
    pub stimulus_id: String,
    pub task: Task,
    pub gaze_file: PathBuf,
    pub duration_s: f64,
    pub answer: Answer,
}

/// A parsed session manifest: one reader and their trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub reader: ReaderProfile,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    reader: ReaderDoc,
    trials: Vec<TrialDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReaderDoc {
    id: String,
    specialties: BTreeSet<String>,
    years_band: YearsBand,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialDoc {
    stimulus_id: String,
    task: Task,
    gaze_file: PathBuf,
    duration_s: f64,
    answer: Answer,
}

impl Session {
    /// Serializes back to the manifest JSON schema.
    pub fn to_manifest_json(&self) -> String {
        let doc = ManifestDoc {
            reader: ReaderDoc {
                id: self.reader.reader_id.clone(),
                specialties: self.reader.specialties.clone(),
                years_band: self.reader.years_experience_band,
            },
            trials: self
                .trials
                .iter()
                .map(|t| TrialDoc {
                    stimulus_id: t.stimulus_id.clone(),
                    task: t.task,
                    gaze_file: t.gaze_file.clone(),
                    duration_s: t.duration_s,
                    answer: t.answer.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("manifest serializes")
    }
}

/// Parses a session manifest and checks every trial invariant. Gaze files are
/// not opened.
pub fn parse_session_manifest<R: Read>(input: R) -> Result<Session> {
    let doc: ManifestDoc =
        serde_json::from_reader(input).map_err(|e| Error::Schema(e.to_string()))?;
    if doc.reader.id.is_empty() {
        return Err(Error::Schema("reader.id must be non-empty".into()));
    }

    let reader = ReaderProfile {
        reader_id: doc.reader.id,
        specialties: doc.reader.specialties,
        years_experience_band: doc.reader.years_band,
    };

    let mut seen = HashSet::new();
    let mut trials = Vec::with_capacity(doc.trials.len());
    for t in doc.trials {
        if t.answer.task() != t.task {
            return Err(Error::AnswerMismatch {
                stimulus_id: t.stimulus_id,
                task: t.task.to_string(),
            });
        }
        if !(t.duration_s.is_finite() && t.duration_s >= 0.0) {
            return Err(Error::Schema(format!(
                "trial {}: duration_s must be a non-negative number, got {}",
                t.stimulus_id, t.duration_s
            )));
        }
        if !seen.insert((t.stimulus_id.clone(), t.task)) {
            return Err(Error::DuplicateTrial {
                reader_id: reader.reader_id.clone(),
                stimulus_id: t.stimulus_id,
                task: t.task.to_string(),
            });
        }
        trials.push(TrialRecord {
            reader_id: reader.reader_id.clone(),
            stimulus_id: t.stimulus_id,
            task: t.task,
            gaze_file: t.gaze_file,
            duration_s: t.duration_s,
            answer: t.answer,
        });
    }

    Ok(Session { reader, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> ScreenGeometry {
        ScreenGeometry::default()
    }

    const HEADER: &str = "t_ms,lx,ly,rx,ry,lvalid,rvalid\n";

    #[test]
    fn parses_well_formed_rows() {
        let csv = format!("{HEADER}0,100,200,110,220,1,1\n2,101,201,111,221,1,1\n4,102,202,112,222,1,1\n");
        let stream = parse_gaze_stream(csv.as_bytes(), &geom()).unwrap();
        assert_eq!(stream.len(), 3);
        assert_eq!(stream.samples()[2].t_ms, 4);
        assert_eq!(stream.samples()[0].left, Some(Point::new(100.0, 200.0)));
    }

    #[test]
    fn written_stream_parses_back() {
        let samples = vec![
            GazeSample { t_ms: 0, left: Some(Point::new(100.25, 200.5)), right: Some(Point::new(110.0, 220.0)) },
            GazeSample { t_ms: 2, left: None, right: Some(Point::new(0.1 + 0.2, 7.0)) },
            GazeSample { t_ms: 4, left: None, right: None },
        ];
        let mut buf = Vec::new();
        write_gaze_stream(&mut buf, &samples).unwrap();
        let stream = parse_gaze_stream(buf.as_slice(), &geom()).unwrap();
        assert_eq!(stream.samples(), samples.as_slice());
    }

    #[test]
    fn backward_time_names_the_line() {
        let csv = format!("{HEADER}0,1,1,1,1,1,1\n4,1,1,1,1,1,1\n2,1,1,1,1,1,1\n");
        match parse_gaze_stream(csv.as_bytes(), &geom()) {
            Err(Error::NonMonotoneTime { line, t_ms, prev_ms }) => {
                assert_eq!((line, t_ms, prev_ms), (4, 2, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_flag_propagates() {
        let csv = format!("{HEADER}0,,,50,60,0,1\n");
        let stream = parse_gaze_stream(csv.as_bytes(), &geom()).unwrap();
        let s = stream.samples()[0];
        assert_eq!(s.left, None);
        assert_eq!(s.right, Some(Point::new(50.0, 60.0)));
        assert!(!s.is_lost());
    }

    #[test]
    fn lost_rows_are_kept() {
        let csv = format!("{HEADER}0,0,0,0,0,0,0\n2,5,5,5,5,1,1\n");
        let stream = parse_gaze_stream(csv.as_bytes(), &geom()).unwrap();
        assert_eq!(stream.len(), 2);
        assert_eq!(stream.lost(), 1);
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = format!("{HEADER}0,1,1,1,1,1,1\n2,abc,1,1,1,1,1\n");
        match parse_gaze_stream(csv.as_bytes(), &geom()) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let csv = format!("{HEADER}0,1,1,1,1,1\n");
        assert!(matches!(
            parse_gaze_stream(csv.as_bytes(), &geom()),
            Err(Error::Malformed { line: 2, .. })
        ));
        let csv = format!("{HEADER}0,1,1,1,1,2,1\n");
        assert!(matches!(
            parse_gaze_stream(csv.as_bytes(), &geom()),
            Err(Error::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn empty_and_bad_header() {
        assert!(matches!(
            parse_gaze_stream("".as_bytes(), &geom()),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            parse_gaze_stream(HEADER.as_bytes(), &geom()),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            parse_gaze_stream("t,lx,ly,rx,ry,lvalid,rvalid\n".as_bytes(), &geom()),
            Err(Error::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn out_of_bounds_is_clamped_and_counted() {
        let csv = format!("{HEADER}0,-3,20,1925,1080,1,1\n");
        let stream = parse_gaze_stream(csv.as_bytes(), &geom()).unwrap();
        assert_eq!(stream.clamped(), 2);
        let s = stream.samples()[0];
        assert_eq!(s.left.unwrap(), Point::new(0.0, 20.0));
        let r = s.right.unwrap();
        assert!(geom().contains(r));
        assert!(r.x > 1919.99 && r.y > 1079.99);
    }

    #[test]
    fn cyclopean_cases() {
        let both = GazeSample {
            t_ms: 0,
            left: Some(Point::new(100.0, 200.0)),
            right: Some(Point::new(110.0, 220.0)),
        };
        assert_eq!(cyclopean(&both), Some(Point::new(105.0, 210.0)));
        let one = GazeSample {
            t_ms: 0,
            left: None,
            right: Some(Point::new(50.0, 60.0)),
        };
        assert_eq!(cyclopean(&one), Some(Point::new(50.0, 60.0)));
        let none = GazeSample {
            t_ms: 0,
            left: None,
            right: None,
        };
        assert_eq!(cyclopean(&none), None);
    }

    const MANIFEST: &str = r#"{
        "reader": {"id": "r1", "specialties": ["Body Imaging"], "years_band": "10-19"},
        "trials": [
            {"stimulus_id": "s1", "task": "Diagnosis", "gaze_file": "r1_s1_dx.csv",
             "duration_s": 12.5, "answer": {"finding_labels": ["cardiomegaly"]}},
            {"stimulus_id": "s1", "task": "VTT", "gaze_file": "r1_s1_vtt.csv",
             "duration_s": 4.0, "answer": {"authenticity_vote": "Synthetic"}}
        ]
    }"#;

    #[test]
    fn parses_two_trial_manifest() {
        let session = parse_session_manifest(MANIFEST.as_bytes()).unwrap();
        assert_eq!(session.reader.reader_id, "r1");
        assert_eq!(session.reader.years_experience_band, YearsBand::TenToNineteen);
        assert_eq!(session.trials.len(), 2);
        assert_eq!(session.trials[1].task, Task::Vtt);
        assert_eq!(
            session.trials[1].answer,
            Answer::AuthenticityVote(Authenticity::Synthetic)
        );
        assert!(session.trials.iter().all(|t| t.reader_id == "r1"));
    }

    #[test]
    fn vtt_with_findings_is_a_mismatch() {
        let bad = MANIFEST.replace(
            r#"{"authenticity_vote": "Synthetic"}"#,
            r#"{"finding_labels": []}"#,
        );
        let err = parse_session_manifest(bad.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::AnswerMismatch { .. }));
        assert!(err.to_string().contains("answer variant mismatch"));
    }

    #[test]
    fn duplicate_trial_rejected() {
        let bad = MANIFEST.replace(r#""task": "VTT""#, r#""task": "Diagnosis""#).replace(
            r#"{"authenticity_vote": "Synthetic"}"#,
            r#"{"finding_labels": []}"#,
        );
        let err = parse_session_manifest(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate trial"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = MANIFEST.replace(r#""years_band": "10-19""#, r#""years_band": "10-19", "age": 40"#);
        assert!(matches!(
            parse_session_manifest(bad.as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn negative_duration_rejected() {
        let bad = MANIFEST.replace("12.5", "-1");
        assert!(matches!(
            parse_session_manifest(bad.as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn catalog_parses_and_rejects_duplicates() {
        let json = r#"[
            {"stimulus_id": "a", "authenticity": "Real", "pathology_labels": []},
            {"stimulus_id": "b", "authenticity": "Synthetic", "pathology_labels": ["Pneumonia"]}
        ]"#;
        let cat = parse_catalog(json.as_bytes()).unwrap();
        assert_eq!(cat.len(), 2);
        assert_eq!(cat.get("b").unwrap().authenticity, Authenticity::Synthetic);
        assert!(matches!(cat.get("zz"), Err(Error::UnknownStimulus(_))));
        let dup = r#"[
            {"stimulus_id": "a", "authenticity": "Real", "pathology_labels": []},
            {"stimulus_id": "a", "authenticity": "Real", "pathology_labels": []}
        ]"#;
        assert!(matches!(
            parse_catalog(dup.as_bytes()),
            Err(Error::DuplicateStimulus(_))
        ));
    }

    fn label() -> impl Strategy<Value = String> {
        "[a-z_]{1,10}"
    }

    fn trial_doc() -> impl Strategy<Value = (String, bool, f64, BTreeSet<String>, bool)> {
        (
            "[a-z0-9]{1,6}",
            any::<bool>(),
            0.0f64..1e4,
            proptest::collection::btree_set(label(), 0..4),
            any::<bool>(),
        )
    }

    proptest! {
        #[test]
        fn manifest_round_trips(
            id in "[a-z0-9]{1,8}",
            specialties in proptest::collection::btree_set(label(), 0..3),
            docs in proptest::collection::vec(trial_doc(), 0..6),
        ) {
            let mut trials = Vec::new();
            let mut seen = HashSet::new();
            for (stim, vtt, dur, labels, vote) in docs {
                let task = if vtt { Task::Vtt } else { Task::Diagnosis };
                if !seen.insert((stim.clone(), task)) {
                    continue;
                }
                let answer = if vtt {
                    Answer::AuthenticityVote(if vote { Authenticity::Real } else { Authenticity::Synthetic })
                } else {
                    Answer::FindingLabels(labels)
                };
                trials.push(TrialRecord {
                    reader_id: id.clone(),
                    gaze_file: PathBuf::from(format!("{stim}.csv")),
                    stimulus_id: stim,
                    task,
                    duration_s: dur,
                    answer,
                });
            }
            let session = Session {
                reader: ReaderProfile {
                    reader_id: id,
                    specialties,
                    years_experience_band: YearsBand::TwentyPlus,
                },
                trials,
            };
            let reparsed = parse_session_manifest(session.to_manifest_json().as_bytes()).unwrap();
            prop_assert_eq!(reparsed, session);
        }

        #[test]
        fn cyclopean_of_equal_eyes_is_exact(x in 0.0f64..1920.0, y in 0.0f64..1080.0) {
            let p = Point::new(x, y);
            let s = GazeSample { t_ms: 0, left: Some(p), right: Some(p) };
            prop_assert_eq!(cyclopean(&s), Some(p));
        }

        #[test]
        fn parsed_coordinates_are_in_bounds(
            rows in proptest::collection::vec((-100.0f64..2100.0, -100.0f64..1200.0, any::<bool>()), 1..30)
        ) {
            let g = geom();
            let mut csv = HEADER.to_string();
            for (i, (x, y, valid)) in rows.iter().enumerate() {
                csv.push_str(&format!("{},{x},{y},{x},{y},{},1\n", i * 2, u8::from(*valid)));
            }
            let stream = parse_gaze_stream(csv.as_bytes(), &g).unwrap();
            for s in stream.samples() {
                for p in [s.left, s.right].into_iter().flatten() {
                    prop_assert!(g.contains(p));
                }
            }
        }
    }
}
