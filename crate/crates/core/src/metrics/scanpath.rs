use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::fixation::Scanpath;
use crate::ingest::{Point, ScreenGeometry};
use crate::metrics::MetricParams;

/// Optimal DTW alignment: total cost and number of aligned pairs on the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub cost: f64,
    pub length: usize,
}

impl Alignment {
    fn cmp_key(&self, other: &Alignment) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.length.cmp(&other.length))
    }

    /// `1 - cost / (length * sqrt 2)`, clamped to [0, 1]. Points are expected
    /// in the unit square, so `sqrt 2` is the largest possible step cost.
    pub fn similarity(&self) -> f64 {
        (1.0 - self.cost / (self.length as f64 * std::f64::consts::SQRT_2)).clamp(0.0, 1.0)
    }
}

/// Classic DTW with unit steps (down, right, diagonal) and Euclidean local
/// cost. Among paths of equal total cost, the shortest one wins.
///
/// Panics if either sequence is empty.
pub fn dtw_alignment(a: &[Point], b: &[Point]) -> Alignment {
    assert!(!a.is_empty() && !b.is_empty(), "dtw of an empty sequence");
    let cols = b.len();
    let mut prev: Vec<Alignment> = Vec::with_capacity(cols);
    let mut cur: Vec<Alignment> = Vec::with_capacity(cols);
    for (i, pa) in a.iter().enumerate() {
        cur.clear();
        for (j, pb) in b.iter().enumerate() {
            let local = (pa.x - pb.x).hypot(pa.y - pb.y);
            let best = [
                (i > 0).then(|| prev[j]),
                (j > 0).then(|| cur[j - 1]),
                (i > 0 && j > 0).then(|| prev[j - 1]),
            ]
            .into_iter()
            .flatten()
            .min_by(Alignment::cmp_key);
            cur.push(match best {
                None => Alignment {
                    cost: local,
                    length: 1,
                },
                Some(b) => Alignment {
                    cost: local + b.cost,
                    length: b.length + 1,
                },
            });
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[cols - 1]
}

fn unit_points(scanpath: &Scanpath, geometry: &ScreenGeometry) -> Vec<Point> {
    scanpath
        .fixations()
        .iter()
        .map(|f| Point::new(f.centroid.x / geometry.width_px, f.centroid.y / geometry.height_px))
        .collect()
}

/// DTW similarity of two scanpaths over fixation centroids in screen
/// coordinates scaled to the unit square.
pub fn dtw_similarity(a: &Scanpath, b: &Scanpath, geometry: &ScreenGeometry) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyScanpath);
    }
    Ok(dtw_alignment(&unit_points(a, geometry), &unit_points(b, geometry)).similarity())
}

/// Region label of each fixation on a `lev_grid_w x lev_grid_h` grid over the
/// screen, row-major. Repeats are collapsed when `collapse_repeats` is set.
pub fn region_labels(scanpath: &Scanpath, params: &MetricParams, geometry: &ScreenGeometry) -> Vec<u32> {
    let cell = |v: f64, extent: f64, n: usize| -> u32 {
        let idx = (v / extent * n as f64).floor();
        idx.clamp(0.0, (n - 1) as f64) as u32
    };
    let mut labels: Vec<u32> = scanpath
        .fixations()
        .iter()
        .map(|f| {
            let col = cell(f.centroid.x, geometry.width_px, params.lev_grid_w);
            let row = cell(f.centroid.y, geometry.height_px, params.lev_grid_h);
            row * params.lev_grid_w as u32 + col
        })
        .collect();
    if params.collapse_repeats {
        labels.dedup();
    }
    labels
}

/// Levenshtein distance with unit insert, delete and substitute costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(x != y);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - d / max(|a|, |b|)` over region-label strings.
pub fn levenshtein_similarity(
    a: &Scanpath,
    b: &Scanpath,
    params: &MetricParams,
    geometry: &ScreenGeometry,
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyScanpath);
    }
    let la = region_labels(a, params, geometry);
    let lb = region_labels(b, params, geometry);
    let d = edit_distance(&la, &lb);
    Ok(1.0 - d as f64 / la.len().max(lb.len()) as f64)
}
