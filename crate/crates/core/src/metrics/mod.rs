//! Saliency metrics: KL divergence, Pearson CC, NSS and AUC-Judd, with
//! optional cos-latitude weighting of the distribution metrics.

mod ablation;
mod report;

pub use ablation::{ablation_report, AblationInput, AblationRow, AblationTable, SCENARIOS};
pub use report::{aggregate, evaluate, Aggregate, MetricOptions, MetricReport, ReportTable};

use crate::error::{Error, Result};
use crate::geometry::row_latitude;
use crate::raster::Raster;

/// Default `eps` inside the KL divergence.
pub const KL_EPS: f64 = 1e-7;

fn check_map(m: &Raster, what: &str) -> Result<()> {
    if m.channels() != 1 {
        return Err(Error::ShapeMismatch(format!("{what} must be single-channel")));
    }
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} contains non-finite values")));
    }
    Ok(())
}

fn check_pair(a: &Raster, b: &Raster) -> Result<()> {
    check_map(a, "prediction")?;
    check_map(b, "ground truth")?;
    if !a.same_dims(b) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Pixel locations `(x, y)` of recorded or synthesized fixations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixationSet {
    width: usize,
    height: usize,
    points: Vec<(usize, usize)>,
    synthesized: bool,
}

impl FixationSet {
    pub fn new(points: Vec<(usize, usize)>, width: usize, height: usize) -> Result<Self> {
        if let Some(&(x, y)) = points.iter().find(|&&(x, y)| x >= width || y >= height) {
            return Err(Error::OutOfRange {
                x: x as f64,
                y: y as f64,
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            points,
            synthesized: false,
        })
    }

    /// Fixations at every positive pixel of a binary map.
    pub fn from_map(m: &Raster) -> Self {
        let w = m.width();
        let points = (0..m.data().len())
            .filter(|&i| m.data()[i] > 0.0)
            .map(|i| (i % w, i / w))
            .collect();
        Self {
            width: w,
            height: m.height(),
            points,
            synthesized: false,
        }
    }

    /// The top `percent` of pixels of a continuous map (at least one);
    /// ties go to the earlier pixel in row-major order.
    pub fn synthesize(gt: &Raster, percent: f64) -> Result<Self> {
        check_map(gt, "ground truth")?;
        if !(percent > 0.0 && percent <= 100.0) {
            return Err(Error::InvalidArgument(format!("fixation percentage {percent} not in (0, 100]")));
        }
        let n = gt.data().len();
        let k = ((n as f64 * percent / 100.0).round() as usize).clamp(1, n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| gt.data()[b].total_cmp(&gt.data()[a]).then(a.cmp(&b)));
        let w = gt.width();
        let mut points: Vec<(usize, usize)> = idx[..k].iter().map(|&i| (i % w, i / w)).collect();
        points.sort_by_key(|&(x, y)| (y, x));
        Ok(Self {
            width: w,
            height: gt.height(),
            points,
            synthesized: true,
        })
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_synthesized(&self) -> bool {
        self.synthesized
    }

    fn check_against(&self, m: &Raster) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::EmptyFixations);
        }
        if (self.width, self.height) != (m.width(), m.height()) {
            return Err(Error::ShapeMismatch(format!(
                "fixations for {}x{} used on a {}x{} map",
                self.width,
                self.height,
                m.width(),
                m.height()
            )));
        }
        Ok(())
    }
}

/// `p_i = w_i m_i / sum_j w_j m_j` with `w_i = cos(latitude)` when
/// weighted, else 1.
pub fn to_distribution(m: &Raster, latitude_weighted: bool) -> Result<Raster> {
    check_map(m, "saliency map")?;
    if m.data().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("saliency map has negative values".into()));
    }
    let (w, h) = (m.width(), m.height());
    let weights: Vec<f64> = (0..h)
        .map(|j| if latitude_weighted { row_latitude(j, h).cos() } else { 1.0 })
        .collect();
    let mut out = Raster::from_fn(w, h, 1, |_, x, y| weights[y] * m.get(0, x, y));
    let total: f64 = out.data().iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZero);
    }
    out.data_mut().iter_mut().for_each(|v| *v /= total);
    Ok(out)
}

/// `sum gt_i ln(gt_i / (pred_i + eps) + eps)`; ground truth is the
/// reference distribution.
pub fn kl_divergence(pred: &Raster, gt: &Raster, eps: f64) -> Result<f64> {
    check_pair(pred, gt)?;
    Ok(pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&p, &g)| g * (g / (p + eps) + eps).ln())
        .sum())
}

/// Population mean and standard deviation; exactly 0 for a constant
/// slice (summation roundoff would otherwise leave a tiny residue).
fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.iter().all(|&x| x == v[0]) {
        return (v[0], 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn pearson_cc(pred: &Raster, gt: &Raster) -> Result<f64> {
    check_pair(pred, gt)?;
    let (mp, sp) = mean_std(pred.data());
    let (mg, sg) = mean_std(gt.data());
    if sp == 0.0 || sg == 0.0 {
        return Err(Error::ConstantInput);
    }
    let n = pred.data().len() as f64;
    let cov = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&p, &g)| (p - mp) * (g - mg))
        .sum::<f64>()
        / n;
    Ok((cov / (sp * sg)).clamp(-1.0, 1.0))
}

/// Mean z-score of `pred` at the fixations; 0 for a constant map.
pub fn nss(pred: &Raster, fx: &FixationSet) -> Result<f64> {
    check_map(pred, "prediction")?;
    fx.check_against(pred)?;
    let (mean, std) = mean_std(pred.data());
    if std == 0.0 {
        return Ok(0.0);
    }
    let total: f64 = fx.points().iter().map(|&(x, y)| (pred.get(0, x, y) - mean) / std).sum();
    Ok(total / fx.len() as f64)
}

/// AUC-Judd: one ROC point per distinct predicted value at a fixation,
/// counting pixels at or above the threshold as positive, closed with
/// (0, 0) and (1, 1); trapezoidal area.
pub fn auc_judd(pred: &Raster, fx: &FixationSet) -> Result<f64> {
    check_map(pred, "prediction")?;
    fx.check_against(pred)?;
    let w = pred.width();
    let n = pred.data().len();
    let mut is_fix = vec![false; n];
    for &(x, y) in fx.points() {
        is_fix[y * w + x] = true;
    }
    let n_fix_px = is_fix.iter().filter(|&&f| f).count();
    let n_other = (n - n_fix_px).max(1) as f64;
    let mut fix_vals: Vec<f64> = fx.points().iter().map(|&(x, y)| pred.get(0, x, y)).collect();
    fix_vals.sort_by(|a, b| b.total_cmp(a));
    let mut other_vals: Vec<f64> = (0..n).filter(|&i| !is_fix[i]).map(|i| pred.data()[i]).collect();
    other_vals.sort_by(|a, b| b.total_cmp(a));

    let n_fix = fix_vals.len() as f64;
    let (mut fi, mut oi) = (0, 0);
    let (mut prev_tp, mut prev_fp) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < fix_vals.len() {
        let thr = fix_vals[i];
        while fi < fix_vals.len() && fix_vals[fi] >= thr {
            fi += 1;
        }
        while oi < other_vals.len() && other_vals[oi] >= thr {
            oi += 1;
        }
        let (tp, fp) = (fi as f64 / n_fix, oi as f64 / n_other);
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
        (prev_tp, prev_fp) = (tp, fp);
        i = fi;
    }
    area += (1.0 - prev_fp) * (1.0 + prev_tp) / 2.0;
    Ok(area)
}
