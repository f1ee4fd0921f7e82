use crate::error::{Error, Result};
use crate::metrics::MetricParams;
use crate::saliency::{check_dims, AttentionMap, GazeMask};

/// Intersection and union cell counts of two masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlap {
    pub intersection: usize,
    pub union: usize,
}

impl Overlap {
    /// Two empty masks agree vacuously: IoU 1.0.
    pub fn iou(&self) -> f64 {
        if self.union == 0 {
            1.0
        } else {
            self.intersection as f64 / self.union as f64
        }
    }

    /// Both masks were empty.
    pub fn is_degenerate(&self) -> bool {
        self.union == 0
    }
}

pub fn overlap(a: &GazeMask, b: &GazeMask) -> Result<Overlap> {
    check_dims(a.width(), a.height(), b.width(), b.height())?;
    let (mut intersection, mut union) = (0, 0);
    for (&x, &y) in a.cells().iter().zip(b.cells()) {
        intersection += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(Overlap {
        intersection,
        union,
    })
}

pub fn iou(a: &GazeMask, b: &GazeMask) -> Result<f64> {
    overlap(a, b).map(|o| o.iou())
}

/// IoU of one reader's diagnosis-task and VTT-task masks on the same image.
pub fn shared_attention(diagnosis_mask: &GazeMask, vtt_mask: &GazeMask) -> Result<f64> {
    iou(diagnosis_mask, vtt_mask)
}

/// Pearson correlation over all cells.
pub fn cc(a: &AttentionMap, b: &AttentionMap) -> Result<f64> {
    check_dims(a.width(), a.height(), b.width(), b.height())?;
    let n = a.cells().len() as f64;
    let mean_a = a.cells().iter().sum::<f64>() / n;
    let mean_b = b.cells().iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.cells().iter().zip(b.cells()) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantMap);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// `sum p * ln(p / (q + eps))` over cells where `p > 0`.
pub fn kld(p: &AttentionMap, q: &AttentionMap, params: &MetricParams) -> Result<f64> {
    check_dims(p.width(), p.height(), q.width(), q.height())?;
    p.ensure_sum_one()?;
    q.ensure_sum_one()?;
    let eps = params.kld_epsilon;
    Ok(p.cells()
        .iter()
        .zip(q.cells())
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / (qi + eps)).ln())
        .sum())
}

/// The smallest value [`kld`] can take on a grid of `cells` cells:
/// `-ln(1 + eps * cells)`.
pub fn kld_lower_bound(cells: usize, params: &MetricParams) -> f64 {
    -(params.kld_epsilon * cells as f64).ln_1p()
}

/// Histogram intersection of two sum-normalized maps.
pub fn sim(a: &AttentionMap, b: &AttentionMap) -> Result<f64> {
    check_dims(a.width(), a.height(), b.width(), b.height())?;
    a.ensure_sum_one()?;
    b.ensure_sum_one()?;
    let s: f64 = a.cells().iter().zip(b.cells()).map(|(&x, &y)| x.min(y)).sum();
    Ok(s.clamp(0.0, 1.0))
}
