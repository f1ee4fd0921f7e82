use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixation::{visual_angle, Scanpath};
use crate::ingest::{Point, ScreenGeometry};
use crate::metrics::scanpath::{dtw_similarity, levenshtein_similarity};
use crate::metrics::{IocMask, MetricParams};
use crate::saliency::{attention_map, gaze_mask, SaliencyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IocMethod {
    Fixation,
    #[serde(rename = "DTW")]
    Dtw,
    Levenshtein,
}

impl IocMethod {
    pub const ALL: [IocMethod; 3] = [IocMethod::Fixation, IocMethod::Dtw, IocMethod::Levenshtein];
}

impl fmt::Display for IocMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IocMethod::Fixation => "Fixation",
            IocMethod::Dtw => "DTW",
            IocMethod::Levenshtein => "Levenshtein",
        })
    }
}

/// Per-observer congruency scores for one image. Observers without a score
/// (no fixations) are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IocResult {
    pub method: IocMethod,
    pub per_observer_scores: BTreeMap<String, f64>,
}

fn check_observers(scanpaths: &[Scanpath]) -> Result<()> {
    if scanpaths.len() < 2 {
        return Err(Error::TooFewObservers(scanpaths.len()));
    }
    let mut seen = HashSet::new();
    for sp in scanpaths {
        if !seen.insert(sp.reader_id.as_str()) {
            return Err(Error::DuplicateObserver(sp.reader_id.clone()));
        }
    }
    Ok(())
}

/// Leave-one-out fixation congruency: the fraction of an observer's fixations
/// that land inside the mask built from every other observer's fixations.
pub fn ioc_fixation(
    scanpaths: &[Scanpath],
    params: &MetricParams,
    saliency: &SaliencyParams,
    geometry: &ScreenGeometry,
) -> Result<IocResult> {
    check_observers(scanpaths)?;
    let scores: Vec<Option<f64>> = (0..scanpaths.len())
        .into_par_iter()
        .map(|o| {
            let own = scanpaths[o].fixations();
            if own.is_empty() {
                return None;
            }
            let others = scanpaths
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != o)
                .flat_map(|(_, sp)| sp.fixations().iter().copied());
            let inside = match params.ioc_mask {
                IocMask::Disc => {
                    let centers: Vec<Point> = others.map(|f| f.centroid).collect();
                    own.iter()
                        .filter(|f| {
                            centers.iter().any(|&c| {
                                visual_angle(f.centroid, c, geometry) <= params.ioc_disc_radius_deg
                            })
                        })
                        .count()
                }
                IocMask::GaussianThreshold => {
                    let others: Vec<_> = others.collect();
                    let mask = gaze_mask(&attention_map(&others, saliency, geometry), saliency);
                    own.iter()
                        .filter(|f| {
                            let x = grid_index(f.centroid.x, geometry.width_px, mask.width());
                            let y = grid_index(f.centroid.y, geometry.height_px, mask.height());
                            mask.get(x, y)
                        })
                        .count()
                }
            };
            Some(inside as f64 / own.len() as f64)
        })
        .collect();
    Ok(collect_scores(IocMethod::Fixation, scanpaths, scores))
}

fn grid_index(v: f64, extent: f64, n: usize) -> usize {
    ((v / extent * n as f64).floor()).clamp(0.0, (n - 1) as f64) as usize
}

fn collect_scores(method: IocMethod, scanpaths: &[Scanpath], scores: Vec<Option<f64>>) -> IocResult {
    let per_observer_scores = scanpaths
        .iter()
        .zip(scores)
        .filter_map(|(sp, s)| s.map(|s| (sp.reader_id.clone(), s)))
        .collect();
    IocResult {
        method,
        per_observer_scores,
    }
}

/// Scanpath congruency: each observer's mean pairwise similarity to every
/// other observer. Observers with empty scanpaths are left out of every pair
/// and get no score.
pub fn ioc_scanpath(
    scanpaths: &[Scanpath],
    method: IocMethod,
    params: &MetricParams,
    geometry: &ScreenGeometry,
) -> Result<IocResult> {
    check_observers(scanpaths)?;
    let similarity = |a: &Scanpath, b: &Scanpath| -> Result<f64> {
        match method {
            IocMethod::Dtw => dtw_similarity(a, b, geometry),
            IocMethod::Levenshtein => levenshtein_similarity(a, b, params, geometry),
            IocMethod::Fixation => Err(Error::Config(
                "fixation congruency is not a scanpath method".into(),
            )),
        }
    };

    let active: Vec<usize> = (0..scanpaths.len())
        .filter(|&i| !scanpaths[i].is_empty())
        .collect();
    if active.len() < 2 {
        return Err(Error::TooFewObservers(active.len()));
    }

    let pairs: Vec<(usize, usize)> = active
        .iter()
        .enumerate()
        .flat_map(|(k, &i)| active[k + 1..].iter().map(move |&j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| similarity(&scanpaths[i], &scanpaths[j]))
        .collect::<Result<_>>()?;

    let n = scanpaths.len();
    let mut table = vec![vec![0.0; n]; n];
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        table[i][j] = v;
        table[j][i] = v;
    }
    let denom = (active.len() - 1) as f64;
    let scores = (0..n)
        .map(|o| {
            if scanpaths[o].is_empty() {
                return None;
            }
            let total: f64 = active.iter().filter(|&&j| j != o).map(|&j| table[o][j]).sum();
            Some(total / denom)
        })
        .collect();
    Ok(collect_scores(method, scanpaths, scores))
}
