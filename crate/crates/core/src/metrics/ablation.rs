use std::fmt::Write as _;

use super::{aggregate, evaluate, Aggregate, FixationSet, MetricOptions, MetricReport};
use crate::error::{Error, Result};
use crate::model::SalNet;
use crate::pipeline::{predict_odi, predict_views, predict_whole, PipelineConfig, ViewModel};
use crate::raster::Raster;

/// Row labels of the comparison, in order.
pub const SCENARIOS: [&str; 3] = [
    "Whole ODI (base CNN)",
    "Six patches (base CNN)",
    "Six patches + spherical coords",
];

/// One image of the ablation corpus.
#[derive(Debug, Clone, Copy)]
pub struct AblationInput<'a> {
    pub id: &'a str,
    pub odi: &'a Raster,
    pub gt: &'a Raster,
    pub fixations: Option<&'a FixationSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub scenario: &'static str,
    pub per_image: Vec<MetricReport>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    /// `scenario,kl,cc,nss,auc` with the per-scenario means.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,kl,cc,nss,auc\n");
        for r in &self.rows {
            let [kl, cc, nss, auc] = r.aggregate.mean.values();
            writeln!(out, "{},{kl},{cc},{nss},{auc}", r.scenario).unwrap();
        }
        out
    }

    /// Means with the standard deviation in parentheses.
    pub fn to_text(&self) -> String {
        let width = SCENARIOS.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut out = format!(
            "{:<width$} {:>17} {:>17} {:>17} {:>17}\n",
            "scenario", "KL", "CC", "NSS", "AUC"
        );
        for r in &self.rows {
            write!(out, "{:<width$}", r.scenario).unwrap();
            for (m, s) in r.aggregate.mean.values().iter().zip(r.aggregate.std.values()) {
                write!(out, " {:>17}", format!("{m:.4} ({s:.4})")).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Scores each image under the three scenarios: the whole image through
/// the base network at `cfg.whole_w x cfg.whole_h`; six views through the
/// base network and recombined; the full pipeline.
pub fn ablation_report(
    net: &SalNet,
    inputs: &[AblationInput],
    cfg: &PipelineConfig,
    opts: &MetricOptions,
) -> Result<AblationTable> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut per: [Vec<MetricReport>; 3] = Default::default();
    for inp in inputs {
        let preds = [
            predict_whole(net, inp.odi, cfg)?,
            predict_views(net, inp.odi, cfg, ViewModel::Base)?,
            predict_odi(net, inp.odi, cfg)?,
        ];
        for (slot, pred) in per.iter_mut().zip(&preds) {
            slot.push(evaluate(pred, inp.gt, inp.fixations, opts)?);
        }
        log::debug!("ablation: scored {}", inp.id);
    }
    let rows = SCENARIOS
        .iter()
        .zip(per)
        .map(|(&scenario, per_image)| {
            Ok(AblationRow {
                scenario,
                aggregate: aggregate(&per_image)?,
                per_image,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationTable { rows })
}
