//! Attention maps and gaze masks.
//!
//! Every fixation deposits an isotropic Gaussian (isotropic in physical screen
//! space) whose standard deviation is [`SaliencyParams::sigma_deg`] of visual
//! angle and whose peak equals the fixation duration in milliseconds (or 1
//! under [`Weighting::Count`]). The grid spans the whole screen frame; cell
//! `(i, j)` samples the screen at the center of its pixel footprint.
//!
//! A gaze mask keeps the cells at or above `mask_threshold * max(map)`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixation::{degrees_to_px_x, degrees_to_px_y, select_fixation, FixationEvent, Scanpath, Selector};
use crate::ingest::ScreenGeometry;

/// Tolerance on `sum == 1` for sum-normalized maps.
pub const SUM_ONE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Deposit amplitude proportional to fixation duration.
    Duration,
    /// Every fixation deposits the same amplitude.
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaliencyParams {
    pub grid_w: usize,
    pub grid_h: usize,
    pub sigma_deg: f64,
    /// Fraction of the map maximum, in (0, 1).
    pub mask_threshold: f64,
    pub weighting: Weighting,
}

impl Default for SaliencyParams {
    fn default() -> Self {
        SaliencyParams {
            grid_w: 512,
            grid_h: 512,
            sigma_deg: 1.0,
            mask_threshold: 0.1,
            weighting: Weighting::Duration,
        }
    }
}

impl SaliencyParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_w == 0 || self.grid_h == 0 {
            return Err(Error::Config(format!(
                "saliency grid must be non-empty, got {}x{}",
                self.grid_w, self.grid_h
            )));
        }
        if !(self.sigma_deg.is_finite() && self.sigma_deg > 0.0) {
            return Err(Error::Config(format!(
                "saliency.sigma_deg must be positive, got {}",
                self.sigma_deg
            )));
        }
        if !(self.mask_threshold > 0.0 && self.mask_threshold < 1.0) {
            return Err(Error::Config(format!(
                "saliency.mask_threshold must lie in (0, 1), got {}",
                self.mask_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    Raw,
    MaxOne,
    SumOne,
}

/// Non-negative grid stored row-major (`cells[y * width + x]`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    width: usize,
    height: usize,
    cells: Vec<f64>,
    normalization: Normalization,
}

/// Result of [`AttentionMap::normalize`]. An all-zero map cannot be
/// normalized; it comes back unchanged with `degenerate` set.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub map: AttentionMap,
    pub degenerate: bool,
}

impl AttentionMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        AttentionMap {
            width,
            height,
            cells: vec![0.0; width * height],
            normalization: Normalization::Raw,
        }
    }

    /// Wraps raw cells. Fails on a length mismatch, or on negative or
    /// non-finite cells.
    pub fn from_cells(width: usize, height: usize, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::Schema(format!(
                "{} cells do not fill a {width}x{height} grid",
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::Schema(format!("attention cell {bad} is not a non-negative number")));
        }
        Ok(AttentionMap {
            width,
            height,
            cells,
            normalization: Normalization::Raw,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.cells[y * self.width + x]
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn max(&self) -> f64 {
        self.cells.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn is_all_zero(&self) -> bool {
        self.cells.iter().all(|&c| c == 0.0)
    }

    /// Multiplies every cell by `c > 0`. The result is a raw map.
    pub fn scaled(&self, c: f64) -> AttentionMap {
        AttentionMap {
            width: self.width,
            height: self.height,
            cells: self.cells.iter().map(|v| v * c).collect(),
            normalization: Normalization::Raw,
        }
    }

    /// Cellwise sum of two raw maps of equal size.
    pub fn add(&self, other: &AttentionMap) -> Result<AttentionMap> {
        check_dims(self.width, self.height, other.width, other.height)?;
        Ok(AttentionMap {
            width: self.width,
            height: self.height,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| a + b).collect(),
            normalization: Normalization::Raw,
        })
    }

    pub fn normalize(&self, mode: Normalization) -> Normalized {
        let denom = match mode {
            Normalization::Raw => {
                return Normalized {
                    map: AttentionMap {
                        normalization: Normalization::Raw,
                        ..self.clone()
                    },
                    degenerate: false,
                }
            }
            Normalization::MaxOne => self.max(),
            Normalization::SumOne => self.sum(),
        };
        if denom <= 0.0 {
            return Normalized {
                map: self.clone(),
                degenerate: true,
            };
        }
        Normalized {
            map: AttentionMap {
                width: self.width,
                height: self.height,
                cells: self.cells.iter().map(|v| v / denom).collect(),
                normalization: mode,
            },
            degenerate: false,
        }
    }

    /// Checks that this map is flagged sum-normalized and actually sums to 1.
    pub fn ensure_sum_one(&self) -> Result<()> {
        if self.normalization != Normalization::SumOne
            || (self.sum() - 1.0).abs() > SUM_ONE_TOLERANCE
        {
            return Err(Error::NotNormalized);
        }
        Ok(())
    }
}

pub(crate) fn check_dims(aw: usize, ah: usize, bw: usize, bh: usize) -> Result<()> {
    if aw != bw || ah != bh {
        return Err(Error::DimensionMismatch {
            left_w: aw,
            left_h: ah,
            right_w: bw,
            right_h: bh,
        });
    }
    Ok(())
}

/// Binarized attention map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazeMask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl GazeMask {
    pub fn from_cells(width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::Schema(format!(
                "{} cells do not fill a {width}x{height} grid",
                cells.len()
            )));
        }
        Ok(GazeMask {
            width,
            height,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Per-axis Gaussian profiles of one deposit, evaluated at cell centers.
fn gaussian_profile(center_px: f64, sigma_px: f64, cells: usize, extent_px: f64) -> Vec<f64> {
    let cell_px = extent_px / cells as f64;
    (0..cells)
        .map(|i| {
            let d = ((i as f64 + 0.5) * cell_px - center_px) / sigma_px;
            (-0.5 * d * d).exp()
        })
        .collect()
}

fn deposit(
    map: &mut AttentionMap,
    fixation: &FixationEvent,
    amplitude: f64,
    params: &SaliencyParams,
    geometry: &ScreenGeometry,
) {
    let sigma_x = degrees_to_px_x(params.sigma_deg, geometry);
    let sigma_y = degrees_to_px_y(params.sigma_deg, geometry);
    let gx = gaussian_profile(fixation.centroid.x, sigma_x, map.width, geometry.width_px);
    let gy = gaussian_profile(fixation.centroid.y, sigma_y, map.height, geometry.height_px);
    for (row, &wy) in map.cells.chunks_exact_mut(map.width).zip(&gy) {
        let a = amplitude * wy;
        if a == 0.0 {
            continue;
        }
        for (cell, &wx) in row.iter_mut().zip(&gx) {
            *cell += a * wx;
        }
    }
}

fn amplitude(fixation: &FixationEvent, weighting: Weighting) -> f64 {
    match weighting {
        Weighting::Duration => fixation.duration_ms as f64,
        Weighting::Count => 1.0,
    }
}

/// Raw attention map of a set of fixations. No fixations gives an all-zero map.
pub fn attention_map(
    fixations: &[FixationEvent],
    params: &SaliencyParams,
    geometry: &ScreenGeometry,
) -> AttentionMap {
    let mut map = AttentionMap::zeros(params.grid_w, params.grid_h);
    for f in fixations {
        deposit(&mut map, f, amplitude(f, params.weighting), params, geometry);
    }
    map
}

pub fn gaze_mask(map: &AttentionMap, params: &SaliencyParams) -> GazeMask {
    gaze_mask_at(map, params.mask_threshold)
}

/// Mask of cells at or above `threshold * max(map)`. An all-zero map gives an
/// all-false mask.
pub fn gaze_mask_at(map: &AttentionMap, threshold: f64) -> GazeMask {
    let max = map.max();
    let cells = if max > 0.0 {
        let cut = threshold * max;
        map.cells.iter().map(|&v| v >= cut).collect()
    } else {
        vec![false; map.cells.len()]
    };
    GazeMask {
        width: map.width,
        height: map.height,
        cells,
    }
}

/// Fraction of cells inside the mask.
pub fn coverage(mask: &GazeMask) -> f64 {
    if mask.cells.is_empty() {
        return 0.0;
    }
    mask.count() as f64 / mask.cells.len() as f64
}

/// Shannon entropy in bits of a sum-normalized map.
pub fn entropy(map: &AttentionMap) -> Result<f64> {
    map.ensure_sum_one()?;
    let h: f64 = map
        .cells
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum();
    // -0.0 for a point mass
    Ok((-h).max(0.0))
}

/// Aggregate map of one selected fixation per scanpath.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasMap {
    /// Sum-normalized, or raw all-zero when `degenerate`.
    pub map: AttentionMap,
    /// Empty scanpaths that were skipped.
    pub skipped: usize,
    pub degenerate: bool,
}

/// Deposits the fixation chosen by `selector` from every scanpath into one map
/// and sum-normalizes it.
///
/// Selected fixations are deposited in a canonical order so the result does
/// not depend on the order of `scanpaths`.
pub fn bias_map(
    scanpaths: &[Scanpath],
    selector: Selector,
    params: &SaliencyParams,
    geometry: &ScreenGeometry,
) -> BiasMap {
    let mut skipped = 0;
    let mut selected: Vec<FixationEvent> = Vec::with_capacity(scanpaths.len());
    for sp in scanpaths {
        match select_fixation(sp, selector) {
            Ok(f) => selected.push(*f),
            Err(_) => skipped += 1,
        }
    }
    selected.sort_by(|a, b| {
        (a.onset_ms, a.duration_ms)
            .cmp(&(b.onset_ms, b.duration_ms))
            .then(a.centroid.x.total_cmp(&b.centroid.x))
            .then(a.centroid.y.total_cmp(&b.centroid.y))
    });
    let raw = attention_map(&selected, params, geometry);
    let Normalized { map, degenerate } = raw.normalize(Normalization::SumOne);
    BiasMap {
        map,
        skipped,
        degenerate,
    }
}

/// JSON sidecar written next to an exported map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSidecar {
    pub normalization: Normalization,
    pub params_hash: String,
    pub source: String,
}

/// Plain PGM (P2) with values scaled so the map maximum is 65535.
pub fn write_map_pgm<W: Write>(mut out: W, map: &AttentionMap) -> std::io::Result<()> {
    let max = map.max();
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    writeln!(out, "P2")?;
    writeln!(out, "{} {}", map.width, map.height)?;
    writeln!(out, "65535")?;
    for row in map.cells.chunks_exact(map.width) {
        let line: Vec<String> = row
            .iter()
            .map(|v| ((v * scale).round() as u32).to_string())
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Plain PGM (P2) with values in {0, 1}.
pub fn write_mask_pgm<W: Write>(mut out: W, mask: &GazeMask) -> std::io::Result<()> {
    writeln!(out, "P2")?;
    writeln!(out, "{} {}", mask.width, mask.height)?;
    writeln!(out, "1")?;
    for row in mask.cells.chunks_exact(mask.width) {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// A decoded plain PGM image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub values: Vec<u32>,
}

impl Pgm {
    /// Values divided by `maxval`, as a raw map.
    pub fn to_map(&self) -> AttentionMap {
        let m = f64::from(self.maxval);
        AttentionMap {
            width: self.width,
            height: self.height,
            cells: self.values.iter().map(|&v| f64::from(v) / m).collect(),
            normalization: Normalization::Raw,
        }
    }

    /// Nonzero values become mask cells.
    pub fn to_mask(&self) -> GazeMask {
        GazeMask {
            width: self.width,
            height: self.height,
            cells: self.values.iter().map(|&v| v > 0).collect(),
        }
    }
}

/// Reads a plain (P2) PGM file. `#` comments are skipped.
pub fn read_pgm<R: Read>(mut input: R) -> Result<Pgm> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::Schema(format!("pgm: {e}")))?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let bad = |msg: &str| Error::Schema(format!("pgm: {msg}"));
    if tokens.next() != Some("P2") {
        return Err(bad("expected magic P2"));
    }
    let mut header = || -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("truncated header"))
    };
    let width = header()?;
    let height = header()?;
    let maxval = header()? as u32;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad("invalid dimensions or maxval"));
    }
    let values: Vec<u32> = tokens
        .map(|t| t.parse::<u32>().map_err(|_| bad("non-integer pixel")))
        .collect::<Result<_>>()?;
    if values.len() != width * height {
        return Err(bad(&format!(
            "expected {} pixels, found {}",
            width * height,
            values.len()
        )));
    }
    if values.iter().any(|&v| v > maxval) {
        return Err(bad("pixel exceeds maxval"));
    }
    Ok(Pgm {
        width,
        height,
        maxval,
        values,
    })
}
