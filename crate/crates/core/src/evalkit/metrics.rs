//! Blocking and linkage quality metrics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::blocking::{prepare, BlockingConfig};
use crate::error::{Error, Result};
use crate::intersect::Threshold;
use crate::pipeline::oracle;

type Pairs = BTreeSet<(String, String)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Pairs completeness: share of true pairs surviving blocking.
    pub pc: f64,
    /// Reduction ratio: share of the comparison space removed by blocking.
    pub rr: f64,
    /// Harmonic mean of PC and RR.
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    /// |T|, all cross pairs.
    pub total_pairs: usize,
    /// |T'|, pairs sharing a blocking key.
    pub candidate_pairs: usize,
    /// |M|, true pairs.
    pub true_pairs: usize,
    pub true_blocked: usize,
    pub matched: usize,
    pub true_matched: usize,
}

fn ratio(num: usize, den: usize, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// An empty gold standard counts as fully recovered and an empty match
/// set as fully precise.
pub fn compute_metrics(gold: &Pairs, blocked: &Pairs, matched: &Pairs, total_pairs: usize) -> Result<MetricsReport> {
    if blocked.len() > total_pairs {
        return Err(Error::invalid(format!(
            "{} blocked pairs exceed the {total_pairs} possible",
            blocked.len()
        )));
    }
    let true_blocked = gold.intersection(blocked).count();
    let true_matched = gold.intersection(matched).count();
    let pc = ratio(true_blocked, gold.len(), 1.0);
    let rr = if total_pairs == 0 {
        0.0
    } else {
        1.0 - blocked.len() as f64 / total_pairs as f64
    };
    Ok(MetricsReport {
        pc,
        rr,
        f_score: harmonic(pc, rr),
        precision: ratio(true_matched, matched.len(), 1.0),
        recall: ratio(true_matched, gold.len(), 1.0),
        total_pairs,
        candidate_pairs: blocked.len(),
        true_pairs: gold.len(),
        true_blocked,
        matched: matched.len(),
        true_matched,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub b: usize,
    pub r: usize,
    pub metrics: MetricsReport,
}

pub const METRICS_HEADER: &str =
    "threshold,b,r,pc,rr,f_score,precision,recall,total_pairs,candidate_pairs,true_pairs,true_blocked,matched,true_matched";

pub fn metrics_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        let m = &row.metrics;
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{}\n",
            row.threshold,
            row.b,
            row.r,
            m.pc,
            m.rr,
            m.f_score,
            m.precision,
            m.recall,
            m.total_pairs,
            m.candidate_pairs,
            m.true_pairs,
            m.true_blocked,
            m.matched,
            m.true_matched
        ));
    }
    out
}

/// Cleartext blocking plus Jaccard linkage at each threshold, used both as
/// the blocking threshold and the match threshold (rounded to hundredths).
pub fn expected_performance_sweep(ds: &Dataset, base: &BlockingConfig, thresholds: &[f64]) -> Result<Vec<SweepRow>> {
    thresholds
        .iter()
        .map(|&t| {
            let config = BlockingConfig {
                threshold: t,
                ..base.clone()
            };
            let o1 = prepare(&ds.d1, &config)?;
            let o2 = prepare(&ds.d2, &config)?;
            let jt = Threshold::new((t * 100.0).round() as u64, 100)?;
            let blocked: Pairs = oracle::blocked_pairs(&o1, &o2).into_iter().collect();
            let matched: Pairs = oracle::link(&o1, &o2, jt).into_iter().collect();
            Ok(SweepRow {
                threshold: t,
                b: o1.plan.b,
                r: o1.plan.r,
                metrics: compute_metrics(&ds.gold.pairs, &blocked, &matched, ds.total_pairs())?,
            })
        })
        .collect()
}
