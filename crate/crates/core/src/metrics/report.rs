use std::fmt::Write as _;

use super::{auc_judd, kl_divergence, nss, pearson_cc, to_distribution, FixationSet, KL_EPS};
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    /// Weight KL and CC by cos(latitude).
    pub latitude_weighted: bool,
    pub kl_eps: f64,
    /// Share of ground-truth pixels (percent) taken as fixations when no
    /// fixation set is given.
    pub fixation_percent: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            latitude_weighted: true,
            kl_eps: KL_EPS,
            fixation_percent: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub kl: f64,
    pub cc: f64,
    pub nss: f64,
    pub auc: f64,
    /// NSS and AUC used fixations synthesized from the ground-truth map.
    pub fixations_synthesized: bool,
}

impl MetricReport {
    pub fn values(&self) -> [f64; 4] {
        [self.kl, self.cc, self.nss, self.auc]
    }

    fn from_values(v: [f64; 4], synthesized: bool) -> Self {
        Self {
            kl: v[0],
            cc: v[1],
            nss: v[2],
            auc: v[3],
            fixations_synthesized: synthesized,
        }
    }
}

/// All four metrics. KL and CC compare `to_distribution` of both maps;
/// NSS and AUC score the raw prediction at the fixations.
pub fn evaluate(pred: &Raster, gt: &Raster, fx: Option<&FixationSet>, opts: &MetricOptions) -> Result<MetricReport> {
    if !pred.same_dims(gt) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{}x{} vs ground truth {}x{}x{}",
            pred.width(),
            pred.height(),
            pred.channels(),
            gt.width(),
            gt.height(),
            gt.channels()
        )));
    }
    let p = to_distribution(pred, opts.latitude_weighted)?;
    let g = to_distribution(gt, opts.latitude_weighted)?;
    let synthesized;
    let fx = match fx {
        Some(f) => {
            synthesized = f.is_synthesized();
            f.clone()
        }
        None => {
            synthesized = true;
            FixationSet::synthesize(gt, opts.fixation_percent)?
        }
    };
    Ok(MetricReport {
        kl: kl_divergence(&p, &g, opts.kl_eps)?,
        cc: pearson_cc(&p, &g)?,
        nss: nss(pred, &fx)?,
        auc: auc_judd(pred, &fx)?,
        fixations_synthesized: synthesized,
    })
}

/// Per-metric mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: MetricReport,
    pub std: MetricReport,
}

pub fn aggregate(reports: &[MetricReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = reports.len() as f64;
    let synthesized = reports.iter().any(|r| r.fixations_synthesized);
    let mut mean = [0.0; 4];
    for r in reports {
        for (m, v) in mean.iter_mut().zip(r.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; 4];
    for r in reports {
        for ((s, v), m) in var.iter_mut().zip(r.values()).zip(mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.map(|s| (s / n).sqrt());
    Ok(Aggregate {
        mean: MetricReport::from_values(mean, synthesized),
        std: MetricReport::from_values(std, synthesized),
    })
}

/// Labelled rows followed by mean and std rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub rows: Vec<(String, MetricReport)>,
}

impl ReportTable {
    pub fn new(rows: Vec<(String, MetricReport)>) -> Self {
        Self { rows }
    }

    pub fn aggregate(&self) -> Result<Aggregate> {
        aggregate(&self.rows.iter().map(|(_, r)| *r).collect::<Vec<_>>())
    }

    /// `image_id,kl,cc,nss,auc`, one line per row, then `mean` and `std`.
    /// Values use the shortest representation that reads back exactly.
    pub fn to_csv(&self) -> Result<String> {
        let agg = self.aggregate()?;
        let mut out = String::from("image_id,kl,cc,nss,auc\n");
        let rows = self
            .rows
            .iter()
            .map(|(id, r)| (id.as_str(), r))
            .chain([("mean", &agg.mean), ("std", &agg.std)]);
        for (id, r) in rows {
            let [kl, cc, nss, auc] = r.values();
            writeln!(out, "{id},{kl},{cc},{nss},{auc}").unwrap();
        }
        Ok(out)
    }

    /// Aligned plain-text table; rows scored on synthesized fixations are
    /// marked with `*`.
    pub fn to_text(&self) -> Result<String> {
        let agg = self.aggregate()?;
        let width = self
            .rows
            .iter()
            .map(|(id, _)| id.len() + 1)
            .chain([8])
            .max()
            .unwrap_or(8);
        let mut out = format!("{:<width$} {:>9} {:>9} {:>9} {:>9}\n", "image", "KL", "CC", "NSS", "AUC");
        let line = |out: &mut String, label: &str, r: &MetricReport| {
            writeln!(
                out,
                "{label:<width$} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                r.kl, r.cc, r.nss, r.auc
            )
            .unwrap();
        };
        for (id, r) in &self.rows {
            let label = if r.fixations_synthesized { format!("{id}*") } else { id.clone() };
            line(&mut out, &label, r);
        }
        line(&mut out, "Mean", &agg.mean);
        line(&mut out, "Std.Dev.", &agg.std);
        if self.rows.iter().any(|(_, r)| r.fixations_synthesized) {
            out.push_str("* NSS/AUC on fixations synthesized from the ground-truth map\n");
        }
        Ok(out)
    }

    /// Parses the output of [`ReportTable::to_csv`], dropping the mean and
    /// std rows.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::InvalidArgument(format!("metric CSV: {reason}"));
        let mut lines = text.lines();
        if lines.next() != Some("image_id,kl,cc,nss,auc") {
            return Err(bad("missing header".into()));
        }
        let mut rows = Vec::new();
        for l in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("bad line {l:?}")));
            }
            if f[0] == "mean" || f[0] == "std" {
                continue;
            }
            let mut v = [0.0; 4];
            for (slot, s) in v.iter_mut().zip(&f[1..]) {
                *slot = s.parse().map_err(|_| bad(format!("bad value {s:?}")))?;
            }
            rows.push((f[0].to_owned(), MetricReport::from_values(v, false)));
        }
        Ok(Self { rows })
    }
}
