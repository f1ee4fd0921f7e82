//! Velocity/acceleration fixation detection over cyclopean gaze streams.
//!
//! Per-sample angular velocity and acceleration come from central differences
//! over the valid (cyclopean) samples, with one-sided differences at the ends.
//! A sample is fixation-class when its velocity is below
//! [`FixationParams::velocity_threshold`] and the magnitude of its acceleration
//! is below [`FixationParams::acceleration_threshold`].
//!
//! The central-difference stencil smears a saccade over the samples on either
//! side of it. Those edge samples are handed back to the neighbouring fixation
//! when the single-step velocity connecting them to it is below the velocity
//! threshold, so fixation boundaries land on the actual saccade interval.
//!
//! Runs may bridge invalid samples (blinks, track loss) as long as the time
//! between the valid samples on either side is at most
//! [`FixationParams::merge_gap_ms`]. Runs shorter than
//! [`FixationParams::min_duration_ms`] are dropped.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Point, SampleStream, ScreenGeometry, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixationParams {
    /// Degrees per second.
    pub velocity_threshold: f64,
    /// Degrees per second squared.
    pub acceleration_threshold: f64,
    pub min_duration_ms: f64,
    pub merge_gap_ms: f64,
}

impl Default for FixationParams {
    fn default() -> Self {
        FixationParams {
            velocity_threshold: 30.0,
            acceleration_threshold: 8000.0,
            min_duration_ms: 50.0,
            merge_gap_ms: 75.0,
        }
    }
}

impl FixationParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("velocity_threshold", self.velocity_threshold),
            ("acceleration_threshold", self.acceleration_threshold),
            ("min_duration_ms", self.min_duration_ms),
            ("merge_gap_ms", self.merge_gap_ms),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "fixation.{name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationEvent {
    pub centroid: Point,
    pub onset_ms: i64,
    pub duration_ms: i64,
}

impl FixationEvent {
    pub fn end_ms(&self) -> i64 {
        self.onset_ms + self.duration_ms
    }
}

/// Fixations of one reader on one stimulus under one task, in temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct Scanpath {
    pub stimulus_id: String,
    pub reader_id: String,
    pub task: Task,
    fixations: Vec<FixationEvent>,
}

impl Scanpath {
    /// Fails unless fixations are ordered by onset and do not overlap.
    pub fn new(
        stimulus_id: impl Into<String>,
        reader_id: impl Into<String>,
        task: Task,
        fixations: Vec<FixationEvent>,
    ) -> Result<Self> {
        for pair in fixations.windows(2) {
            if pair[1].onset_ms < pair[0].end_ms() || pair[1].onset_ms <= pair[0].onset_ms {
                return Err(Error::Schema(format!(
                    "fixation at {} ms overlaps or precedes fixation at {} ms",
                    pair[1].onset_ms, pair[0].onset_ms
                )));
            }
        }
        Ok(Scanpath {
            stimulus_id: stimulus_id.into(),
            reader_id: reader_id.into(),
            task,
            fixations,
        })
    }

    pub fn fixations(&self) -> &[FixationEvent] {
        &self.fixations
    }

    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }
}

/// Angle in degrees subtended at the eye by two screen points, with the gaze
/// axis taken as normal to the screen.
pub fn visual_angle(p1: Point, p2: Point, geometry: &ScreenGeometry) -> f64 {
    let dx = (p1.x - p2.x) * geometry.pitch_x_cm();
    let dy = (p1.y - p2.y) * geometry.pitch_y_cm();
    dx.hypot(dy).atan2(geometry.viewing_distance_cm).to_degrees()
}

/// Screen distance in pixels (along x) that subtends `degrees` at the eye.
pub fn degrees_to_px_x(degrees: f64, geometry: &ScreenGeometry) -> f64 {
    geometry.viewing_distance_cm * degrees.to_radians().tan() / geometry.pitch_x_cm()
}

/// Screen distance in pixels (along y) that subtends `degrees` at the eye.
pub fn degrees_to_px_y(degrees: f64, geometry: &ScreenGeometry) -> f64 {
    geometry.viewing_distance_cm * degrees.to_radians().tan() / geometry.pitch_y_cm()
}

fn central_rates(values_at: impl Fn(usize, usize) -> f64, times: &[f64]) -> Vec<f64> {
    let n = times.len();
    (0..n)
        .map(|k| {
            let (a, b) = if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            values_at(a, b) / (times[b] - times[a])
        })
        .collect()
}

/// Detects fixations in a sample stream.
pub fn detect_fixations(
    stream: &SampleStream,
    params: &FixationParams,
    geometry: &ScreenGeometry,
) -> Result<Vec<FixationEvent>> {
    params.validate()?;
    geometry.validate()?;

    let (t_ms, points): (Vec<i64>, Vec<Point>) = stream
        .samples()
        .iter()
        .zip(stream.cyclopean_points())
        .filter_map(|(s, p)| p.map(|p| (s.t_ms, p)))
        .unzip();
    match points.len() {
        0 => return Err(Error::NoValidSamples),
        1 => return Err(Error::StreamTooShort { valid: 1 }),
        _ => {}
    }
    let n = points.len();
    let secs: Vec<f64> = t_ms.iter().map(|&t| t as f64 / 1000.0).collect();

    let velocity = central_rates(
        |a, b| visual_angle(points[a], points[b], geometry),
        &secs,
    );
    let acceleration = central_rates(|a, b| velocity[b] - velocity[a], &secs);

    let step_velocity = |k: usize| -> f64 {
        visual_angle(points[k], points[k + 1], geometry) / (secs[k + 1] - secs[k])
    };
    let within_gap = |k: usize| -> bool { (t_ms[k + 1] - t_ms[k]) as f64 <= params.merge_gap_ms };
    let quiet_step = |k: usize| within_gap(k) && step_velocity(k) < params.velocity_threshold;

    let core: Vec<bool> = (0..n)
        .map(|k| {
            velocity[k] < params.velocity_threshold
                && acceleration[k].abs() < params.acceleration_threshold
        })
        .collect();

    // Hand smeared edge samples back to the adjacent fixation.
    let mut member = core.clone();
    for k in 0..n - 1 {
        if member[k] && !member[k + 1] && quiet_step(k) {
            member[k + 1] = true;
        }
    }
    for k in (0..n - 1).rev() {
        if member[k + 1] && !member[k] && quiet_step(k) {
            member[k] = true;
        }
    }

    let joined = |k: usize| -> bool {
        member[k]
            && member[k + 1]
            && within_gap(k)
            && ((core[k] && core[k + 1]) || step_velocity(k) < params.velocity_threshold)
    };

    let mut fixations = Vec::new();
    let mut k = 0;
    while k < n {
        if !member[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < n && joined(k) {
            k += 1;
        }
        let end = k;
        k += 1;

        let duration_ms = t_ms[end] - t_ms[start];
        if (duration_ms as f64) < params.min_duration_ms {
            continue;
        }
        fixations.push(FixationEvent {
            centroid: geometry.clamp(weighted_centroid(&points[start..=end], &t_ms[start..=end])),
            onset_ms: t_ms[start],
            duration_ms,
        });
    }
    Ok(fixations)
}

/// Mean position with each sample weighted by the time it represents: half
/// the interval to each neighbour inside the run.
fn weighted_centroid(points: &[Point], t_ms: &[i64]) -> Point {
    let n = points.len();
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let before = if i > 0 { t_ms[i] - t_ms[i - 1] } else { 0 };
        let after = if i + 1 < n { t_ms[i + 1] - t_ms[i] } else { 0 };
        let w = (before + after) as f64 / 2.0;
        sx += w * points[i].x;
        sy += w * points[i].y;
        sw += w;
    }
    if sw > 0.0 {
        Point::new(sx / sw, sy / sw)
    } else {
        let inv = 1.0 / n as f64;
        Point::new(
            points.iter().map(|p| p.x).sum::<f64>() * inv,
            points.iter().map(|p| p.y).sum::<f64>() * inv,
        )
    }
}

/// Picks one fixation out of a scanpath by temporal role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Selector {
    First,
    Last,
    Longest,
    Shortest,
}

impl Selector {
    pub const ALL: [Selector; 4] = [
        Selector::First,
        Selector::Last,
        Selector::Longest,
        Selector::Shortest,
    ];
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selector::First => "First",
            Selector::Last => "Last",
            Selector::Longest => "Longest",
            Selector::Shortest => "Shortest",
        })
    }
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Selector::ALL
            .into_iter()
            .find(|sel| sel.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown selector `{s}`")))
    }
}

/// Duration ties resolve to the earlier fixation.
pub fn select_fixation(scanpath: &Scanpath, selector: Selector) -> Result<&FixationEvent> {
    let fixations = scanpath.fixations();
    let first = fixations.first().ok_or(Error::EmptyScanpath)?;
    let picked = match selector {
        Selector::First => first,
        Selector::Last => fixations.last().unwrap_or(first),
        Selector::Longest => fixations
            .iter()
            .fold(first, |best, f| if f.duration_ms > best.duration_ms { f } else { best }),
        Selector::Shortest => fixations
            .iter()
            .fold(first, |best, f| if f.duration_ms < best.duration_ms { f } else { best }),
    };
    Ok(picked)
}

/// First line of a fixation JSON Lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixationFileHeader {
    pub stimulus_id: String,
    pub reader_id: String,
    pub task: Task,
    pub params_hash: String,
    pub params: FixationParams,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixationLine {
    x: f64,
    y: f64,
    onset_ms: i64,
    duration_ms: i64,
}

pub fn write_fixations_jsonl<W: Write>(
    mut out: W,
    header: &FixationFileHeader,
    fixations: &[FixationEvent],
) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for f in fixations {
        let line = FixationLine {
            x: f.centroid.x,
            y: f.centroid.y,
            onset_ms: f.onset_ms,
            duration_ms: f.duration_ms,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a fixation JSON Lines file into its header and scanpath.
pub fn read_fixations_jsonl<R: BufRead>(input: R) -> Result<(FixationFileHeader, Scanpath)> {
    let mut lines = input.lines().enumerate();
    let header: FixationFileHeader = match lines.next() {
        None => return Err(Error::Empty("fixation file")),
        Some((_, line)) => {
            let line = line.map_err(|e| Error::Malformed {
                line: 1,
                message: e.to_string(),
            })?;
            serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: 1,
                message: e.to_string(),
            })?
        }
    };
    let mut fixations = Vec::new();
    for (i, line) in lines {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let f: FixationLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        fixations.push(FixationEvent {
            centroid: Point::new(f.x, f.y),
            onset_ms: f.onset_ms,
            duration_ms: f.duration_ms,
        });
    }
    let scanpath = Scanpath::new(
        header.stimulus_id.clone(),
        header.reader_id.clone(),
        header.task,
        fixations,
    )?;
    Ok((header, scanpath))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::GazeSample;
    use proptest::prelude::*;

    /// 40 px per cm and 1 px pitch = 0.025 cm.
    fn geom() -> ScreenGeometry {
        ScreenGeometry {
            width_px: 4000.0,
            height_px: 2000.0,
            width_cm: 100.0,
            height_cm: 50.0,
            viewing_distance_cm: 80.0,
        }
    }

    fn stream_at_500hz(points: &[Point]) -> SampleStream {
        let samples = points
            .iter()
            .enumerate()
            .map(|(i, &p)| GazeSample {
                t_ms: i as i64 * 2,
                left: Some(p),
                right: Some(p),
            })
            .collect();
        SampleStream::from_samples(samples).unwrap()
    }

    #[test]
    fn visual_angle_matches_exact_formula() {
        let g = geom();
        let a = Point::new(100.0, 100.0);
        assert_eq!(visual_angle(a, a, &g), 0.0);

        let b = Point::new(200.0, 100.0);
        let expected = (2.5f64 / 80.0).atan().to_degrees();
        let got = visual_angle(a, b, &g);
        assert!((got - expected).abs() < 1e-12);
        let small_angle = (2.5f64 / 80.0).to_degrees();
        assert!((got - small_angle).abs() / small_angle < 1e-3);

        let far = ScreenGeometry {
            viewing_distance_cm: 160.0,
            ..g
        };
        assert!(visual_angle(a, b, &far) < got);
    }

    #[test]
    fn constant_position_is_one_fixation() {
        let p = Point::new(1000.0, 500.0);
        let stream = stream_at_500hz(&vec![p; 250]);
        let fix = detect_fixations(&stream, &FixationParams::default(), &geom()).unwrap();
        assert_eq!(fix.len(), 1);
        assert!((498..=500).contains(&fix[0].duration_ms));
        assert_eq!(fix[0].onset_ms, 0);
        assert_eq!(fix[0].centroid, p);
    }

    #[test]
    fn ten_degree_jump_splits_into_two() {
        let g = geom();
        // 10 degrees at 80 cm: 80 * tan(10deg) cm, 40 px per cm.
        let jump_px = 80.0 * 10f64.to_radians().tan() * 40.0;
        let a = Point::new(500.0, 1000.0);
        let b = Point::new(500.0 + jump_px, 1000.0);
        assert!((visual_angle(a, b, &g) - 10.0).abs() < 1e-9);
        // Central velocity at either side of the jump: 10 deg over 4 ms,
        // i.e. 2500 deg/s, far above threshold.

        let mut pts = vec![a; 125];
        pts.extend(vec![b; 125]);
        let fix = detect_fixations(&stream_at_500hz(&pts), &FixationParams::default(), &g).unwrap();
        assert_eq!(fix.len(), 2);
        assert!((fix[0].centroid.x - a.x).abs() < 1e-9 && fix[0].centroid.y == a.y);
        assert!((fix[1].centroid.x - b.x).abs() < 1e-9 && fix[1].centroid.y == b.y);
        assert_eq!((fix[0].onset_ms, fix[0].duration_ms), (0, 248));
        assert_eq!((fix[1].onset_ms, fix[1].duration_ms), (250, 248));
    }

    #[test]
    fn supra_threshold_noise_has_no_fixations() {
        let g = geom();
        // Alternate between two points 0.2 degrees apart: every single step
        // moves 0.2 deg in 2 ms (100 deg/s). Use a zig-zag that never returns
        // to the same spot so central differences are large too.
        let step_px = 80.0 * 0.2f64.to_radians().tan() * 40.0;
        let pts: Vec<Point> = (0..200)
            .map(|i| Point::new(100.0 + i as f64 * step_px, 1000.0 + (i % 2) as f64 * step_px))
            .collect();
        // Central velocity lower bound: 2 steps along x over 4 ms.
        let v_min = visual_angle(pts[0], pts[2], &g) / 0.004;
        assert!(v_min > 30.0);
        let fix = detect_fixations(&stream_at_500hz(&pts), &FixationParams::default(), &g).unwrap();
        assert!(fix.is_empty());
    }

    #[test]
    fn blink_gap_is_bridged_but_long_gap_is_not() {
        let g = geom();
        let p = Point::new(800.0, 800.0);
        let mut samples: Vec<GazeSample> = (0..100)
            .map(|i| GazeSample {
                t_ms: i * 2,
                left: Some(p),
                right: Some(p),
            })
            .collect();
        // 40 ms blink in the middle.
        for s in &mut samples[40..60] {
            s.left = None;
            s.right = None;
        }
        let stream = SampleStream::from_samples(samples.clone()).unwrap();
        let fix = detect_fixations(&stream, &FixationParams::default(), &g).unwrap();
        assert_eq!(fix.len(), 1);
        assert_eq!(fix[0].duration_ms, 198);

        let strict = FixationParams {
            merge_gap_ms: 10.0,
            ..FixationParams::default()
        };
        let fix = detect_fixations(&stream, &strict, &g).unwrap();
        assert_eq!(fix.len(), 2);
    }

    #[test]
    fn short_runs_are_dropped() {
        let p = Point::new(800.0, 800.0);
        let fix = detect_fixations(
            &stream_at_500hz(&vec![p; 20]),
            &FixationParams::default(),
            &geom(),
        )
        .unwrap();
        assert!(fix.is_empty());
    }

    #[test]
    fn too_short_and_all_invalid() {
        let g = geom();
        let one = SampleStream::from_samples(vec![GazeSample {
            t_ms: 0,
            left: Some(Point::new(1.0, 1.0)),
            right: None,
        }])
        .unwrap();
        assert!(matches!(
            detect_fixations(&one, &FixationParams::default(), &g),
            Err(Error::StreamTooShort { valid: 1 })
        ));
        let lost = SampleStream::from_samples(
            (0..5)
                .map(|i| GazeSample {
                    t_ms: i,
                    left: None,
                    right: None,
                })
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            detect_fixations(&lost, &FixationParams::default(), &g),
            Err(Error::NoValidSamples)
        ));
    }

    fn fix(onset: i64, dur: i64) -> FixationEvent {
        FixationEvent {
            centroid: Point::new(onset as f64, 0.0),
            onset_ms: onset,
            duration_ms: dur,
        }
    }

    fn path(f: Vec<FixationEvent>) -> Scanpath {
        Scanpath::new("s", "r", Task::Diagnosis, f).unwrap()
    }

    #[test]
    fn selectors() {
        let sp = path(vec![fix(0, 120), fix(200, 300), fix(600, 80)]);
        assert_eq!(select_fixation(&sp, Selector::First).unwrap().onset_ms, 0);
        assert_eq!(select_fixation(&sp, Selector::Last).unwrap().onset_ms, 600);
        assert_eq!(select_fixation(&sp, Selector::Longest).unwrap().onset_ms, 200);
        assert_eq!(select_fixation(&sp, Selector::Shortest).unwrap().onset_ms, 600);

        let single = path(vec![fix(10, 100)]);
        for sel in Selector::ALL {
            assert_eq!(select_fixation(&single, sel).unwrap().onset_ms, 10);
        }

        let tied = path(vec![fix(0, 100), fix(200, 100)]);
        assert_eq!(select_fixation(&tied, Selector::Longest).unwrap().onset_ms, 0);
        assert_eq!(select_fixation(&tied, Selector::Shortest).unwrap().onset_ms, 0);

        assert!(matches!(
            select_fixation(&path(vec![]), Selector::First),
            Err(Error::EmptyScanpath)
        ));
    }

    #[test]
    fn scanpath_rejects_overlap() {
        assert!(Scanpath::new("s", "r", Task::Vtt, vec![fix(0, 100), fix(50, 10)]).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let header = FixationFileHeader {
            stimulus_id: "s1".into(),
            reader_id: "r1".into(),
            task: Task::Vtt,
            params_hash: "abc".into(),
            params: FixationParams::default(),
        };
        let fixations = vec![fix(0, 120), fix(300, 90)];
        let mut buf = Vec::new();
        write_fixations_jsonl(&mut buf, &header, &fixations).unwrap();
        let (h, sp) = read_fixations_jsonl(buf.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(sp.fixations(), fixations.as_slice());
    }

    #[test]
    fn invalid_params_rejected() {
        let p = FixationParams {
            velocity_threshold: -1.0,
            ..FixationParams::default()
        };
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }

    /// Random walk: slow drift with occasional jumps.
    fn walk() -> impl Strategy<Value = Vec<Point>> {
        proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0u8..20), 30..300).prop_map(|steps| {
            let mut p = Point::new(2000.0, 1000.0);
            steps
                .into_iter()
                .map(|(dx, dy, jump)| {
                    let scale = if jump == 0 { 60.0 } else { 1.0 };
                    p = Point::new(
                        (p.x + dx * scale).clamp(500.0, 3500.0),
                        (p.y + dy * scale).clamp(500.0, 1500.0),
                    );
                    p
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn output_is_ordered_and_long_enough(pts in walk()) {
            let params = FixationParams::default();
            let fix = detect_fixations(&stream_at_500hz(&pts), &params, &geom()).unwrap();
            for f in &fix {
                prop_assert!(f.duration_ms as f64 >= params.min_duration_ms);
                prop_assert!(geom().contains(f.centroid));
            }
            for pair in fix.windows(2) {
                prop_assert!(pair[1].onset_ms > pair[0].end_ms());
            }
        }

        #[test]
        fn detection_is_deterministic(pts in walk()) {
            let s = stream_at_500hz(&pts);
            let a = detect_fixations(&s, &FixationParams::default(), &geom()).unwrap();
            let b = detect_fixations(&s, &FixationParams::default(), &geom()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn raising_velocity_threshold_never_loses_time(pts in walk(), lo in 5.0f64..60.0, extra in 0.0f64..200.0) {
            let s = stream_at_500hz(&pts);
            let total = |v: f64| -> i64 {
                let p = FixationParams { velocity_threshold: v, ..FixationParams::default() };
                detect_fixations(&s, &p, &geom()).unwrap().iter().map(|f| f.duration_ms).sum()
            };
            prop_assert!(total(lo + extra) >= total(lo));
        }

        #[test]
        fn translation_shifts_centroids(pts in walk(), dx in -400.0f64..400.0, dy in -400.0f64..400.0) {
            let g = geom();
            let moved: Vec<Point> = pts.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect();
            let a = detect_fixations(&stream_at_500hz(&pts), &FixationParams::default(), &g).unwrap();
            let b = detect_fixations(&stream_at_500hz(&moved), &FixationParams::default(), &g).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (fa, fb) in a.iter().zip(&b) {
                prop_assert_eq!(fa.onset_ms, fb.onset_ms);
                prop_assert_eq!(fa.duration_ms, fb.duration_ms);
                prop_assert!((fa.centroid.x + dx - fb.centroid.x).abs() < 1e-6);
                prop_assert!((fa.centroid.y + dy - fb.centroid.y).abs() < 1e-6);
            }
        }
    }
}
