//! Pairwise and group comparison metrics.
//!
//! * Map and mask comparisons: [`iou`], [`shared_attention`], [`cc`], [`kld`], [`sim`].
//! * Scanpath similarity: [`dtw_similarity`], [`levenshtein_similarity`].
//! * Inter-observer congruency: [`ioc_fixation`], [`ioc_scanpath`].

mod ioc;
mod maps;
mod scanpath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ioc::{ioc_fixation, ioc_scanpath, IocMethod, IocResult};
pub use maps::{cc, iou, kld, kld_lower_bound, overlap, shared_attention, sim, Overlap};
pub use scanpath::{
    dtw_alignment, dtw_similarity, edit_distance, levenshtein_similarity, region_labels, Alignment,
};

/// How the leave-one-out mask of fixation-based congruency is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IocMask {
    /// Union of discs of `ioc_disc_radius_deg` around every other fixation.
    Disc,
    /// Thresholded attention map of the other observers, built with the
    /// saliency parameters.
    GaussianThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricParams {
    /// Added to the reference distribution inside the KLD logarithm.
    pub kld_epsilon: f64,
    pub ioc_disc_radius_deg: f64,
    pub ioc_mask: IocMask,
    /// Region grid used to turn fixations into labels for edit distance.
    pub lev_grid_w: usize,
    pub lev_grid_h: usize,
    /// Merge consecutive identical region labels before edit distance.
    pub collapse_repeats: bool,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            kld_epsilon: 1e-12,
            ioc_disc_radius_deg: 1.0,
            ioc_mask: IocMask::Disc,
            lev_grid_w: 5,
            lev_grid_h: 5,
            collapse_repeats: true,
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kld_epsilon.is_finite() && self.kld_epsilon > 0.0) {
            return Err(Error::Config(format!(
                "metrics.kld_epsilon must be positive, got {}",
                self.kld_epsilon
            )));
        }
        if !(self.ioc_disc_radius_deg.is_finite() && self.ioc_disc_radius_deg > 0.0) {
            return Err(Error::Config(format!(
                "metrics.ioc_disc_radius_deg must be positive, got {}",
                self.ioc_disc_radius_deg
            )));
        }
        if self.lev_grid_w == 0 || self.lev_grid_h == 0 {
            return Err(Error::Config(format!(
                "metrics.lev_grid must be at least 1x1, got {}x{}",
                self.lev_grid_w, self.lev_grid_h
            )));
        }
        Ok(())
    }
}
