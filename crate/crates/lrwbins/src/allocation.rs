//! Validation-driven allocation of combined bins between the two stages.
//!
//! Both models are scored per combined bin on the validation set. Bins are
//! sorted by how much the second stage beats the first, then a cumulative
//! sweep evaluates, for every prefix of that order, the hybrid metric over
//! the whole validation set with prefix bins answered by the first stage.
//! The cutoff picks the largest coverage whose hybrid quality stays within
//! tolerance of the pure second stage.

use std::collections::BTreeSet;

use crate::binning::BinId;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::first_stage::{predict_first_stage, FirstStageResult, LRwBinsModel};
use crate::gbdt::{predict_gbdt, GbdtModel};
use crate::metrics::{accuracy, roc_auc};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Accuracy,
    RocAuc,
}

impl MetricKind {
    fn compute(self, scores: &[f64], labels: &[u8]) -> Option<f64> {
        match self {
            MetricKind::Accuracy => {
                if scores.is_empty() {
                    None
                } else {
                    Some(accuracy(scores, labels, 0.5))
                }
            }
            MetricKind::RocAuc => roc_auc(scores, labels).ok(),
        }
    }
}

/// Per-bin validation comparison of the two stages.
#[derive(Debug, Clone)]
pub struct BinReport {
    pub bin: BinId,
    /// Validation rows in the bin.
    pub rows: usize,
    /// First-stage metric; `None` when the bin has no weights or the metric
    /// is undefined on its rows.
    pub first_metric: Option<f64>,
    pub second_metric: Option<f64>,
    /// `second - first`; `+inf` marks bins never eligible for the first
    /// stage.
    pub delta: f64,
}

/// Scores for every validation row under both models, grouped by bin.
struct ValScores {
    bins: Vec<u32>,
    first: Vec<Option<f64>>,
    second: Vec<f64>,
}

fn score_validation(first: &LRwBinsModel, second: &GbdtModel, val: &Dataset) -> Result<ValScores> {
    let mut bins = Vec::with_capacity(val.n_rows());
    let mut first_scores = Vec::with_capacity(val.n_rows());
    let mut second_scores = Vec::with_capacity(val.n_rows());
    for r in 0..val.n_rows() {
        let row = val.row(r);
        bins.push(crate::first_stage::model_bin(first, row).0);
        first_scores.push(match predict_first_stage(first, row) {
            FirstStageResult::Score(p) => Some(p),
            FirstStageResult::Miss => None,
        });
        second_scores.push(predict_gbdt(second, row)?);
    }
    Ok(ValScores {
        bins,
        first: first_scores,
        second: second_scores,
    })
}

/// Evaluate the chosen metric for both stages on every combined bin holding
/// validation rows.
pub fn evaluate_per_bin(
    first: &LRwBinsModel,
    second: &GbdtModel,
    val: &Dataset,
    metric: MetricKind,
) -> Result<Vec<BinReport>> {
    let scores = score_validation(first, second, val)?;
    let mut by_bin: std::collections::BTreeMap<u32, Vec<usize>> = std::collections::BTreeMap::new();
    for (r, &bin) in scores.bins.iter().enumerate() {
        by_bin.entry(bin).or_default().push(r);
    }

    let reports = by_bin
        .into_iter()
        .map(|(bin, rows)| {
            let labels: Vec<u8> = rows.iter().map(|&r| val.label(r)).collect();
            let second_scores: Vec<f64> = rows.iter().map(|&r| scores.second[r]).collect();
            let second_metric = metric.compute(&second_scores, &labels);
            let first_scores: Option<Vec<f64>> =
                rows.iter().map(|&r| scores.first[r]).collect();
            let first_metric = first_scores.and_then(|s| metric.compute(&s, &labels));
            let delta = match (first_metric, second_metric) {
                (Some(f), Some(s)) => s - f,
                _ => f64::INFINITY,
            };
            BinReport {
                bin: BinId(bin),
                rows: rows.len(),
                first_metric,
                second_metric,
                delta,
            }
        })
        .collect();
    Ok(reports)
}

#[derive(Debug, Clone)]
pub struct CurvePoint {
    /// Number of bins in the first-stage prefix.
    pub cut_index: usize,
    /// Fraction of validation rows answered by the first stage.
    pub coverage: f64,
    /// Hybrid metrics over the full validation set.
    pub hybrid_accuracy: f64,
    pub hybrid_auc: f64,
    /// Metric of the tagged kind over prefix rows only, first-stage scores
    /// (the cumulative per-prefix view); `None` when undefined or empty.
    pub prefix_metric: Option<f64>,
    /// Second-stage metric minus hybrid metric, tagged kind.
    pub delta_vs_second: f64,
}

#[derive(Debug, Clone)]
pub struct CoverageCurve {
    pub metric: MetricKind,
    pub points: Vec<CurvePoint>,
    /// Pure second-stage metrics on the full validation set.
    pub second_accuracy: f64,
    pub second_auc: f64,
    /// Bins in sweep order with their validation row counts.
    pub sorted_bins: Vec<(BinId, usize)>,
}

impl CoverageCurve {
    pub fn hybrid_metric(&self, point: &CurvePoint) -> f64 {
        match self.metric {
            MetricKind::Accuracy => point.hybrid_accuracy,
            MetricKind::RocAuc => point.hybrid_auc,
        }
    }

    pub fn second_metric(&self) -> f64 {
        match self.metric {
            MetricKind::Accuracy => self.second_accuracy,
            MetricKind::RocAuc => self.second_auc,
        }
    }

    /// CSV export: one line per sweep point.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("cut_index,coverage,hybrid_accuracy,hybrid_auc,prefix_metric,delta_vs_second\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{},{:.6}\n",
                p.cut_index,
                p.coverage,
                p.hybrid_accuracy,
                p.hybrid_auc,
                p.prefix_metric
                    .map_or(String::new(), |m| format!("{m:.6}")),
                p.delta_vs_second
            ));
        }
        out
    }
}

/// Cumulative sweep over bins sorted by ascending delta (ties: more rows
/// first, then lower bin id). Point `k` evaluates the hybrid that answers
/// the first `k` bins with the first stage and everything else with the
/// second stage.
pub fn sweep(
    reports: &[BinReport],
    first: &LRwBinsModel,
    second: &GbdtModel,
    val: &Dataset,
    metric: MetricKind,
) -> Result<CoverageCurve> {
    let scores = score_validation(first, second, val)?;
    let labels = val.labels();
    let n = val.n_rows();

    let mut eligible: Vec<&BinReport> = reports.iter().filter(|r| r.delta.is_finite()).collect();
    eligible.sort_by(|a, b| {
        a.delta
            .partial_cmp(&b.delta)
            .unwrap()
            .then(b.rows.cmp(&a.rows))
            .then(a.bin.cmp(&b.bin))
    });

    let second_accuracy = accuracy(&scores.second, labels, 0.5);
    let second_auc = roc_auc(&scores.second, labels)?;
    let second_metric = match metric {
        MetricKind::Accuracy => second_accuracy,
        MetricKind::RocAuc => second_auc,
    };

    let mut in_prefix: BTreeSet<u32> = BTreeSet::new();
    let mut hybrid: Vec<f64> = scores.second.clone();
    let mut covered = 0usize;
    let mut points = Vec::with_capacity(eligible.len() + 1);

    for k in 0..=eligible.len() {
        if k > 0 {
            let report = eligible[k - 1];
            in_prefix.insert(report.bin.0);
            for (r, h) in hybrid.iter_mut().enumerate() {
                if scores.bins[r] == report.bin.0 {
                    *h = scores.first[r].expect("eligible bin rows have first-stage scores");
                    covered += 1;
                }
            }
        }
        let hybrid_accuracy = accuracy(&hybrid, labels, 0.5);
        let hybrid_auc = roc_auc(&hybrid, labels)?;
        let hybrid_metric = match metric {
            MetricKind::Accuracy => hybrid_accuracy,
            MetricKind::RocAuc => hybrid_auc,
        };
        let prefix_rows: Vec<usize> = (0..n)
            .filter(|&r| in_prefix.contains(&scores.bins[r]))
            .collect();
        let prefix_metric = if prefix_rows.is_empty() {
            None
        } else {
            let s: Vec<f64> = prefix_rows.iter().map(|&r| hybrid[r]).collect();
            let l: Vec<u8> = prefix_rows.iter().map(|&r| labels[r]).collect();
            metric.compute(&s, &l)
        };
        points.push(CurvePoint {
            cut_index: k,
            coverage: covered as f64 / n as f64,
            hybrid_accuracy,
            hybrid_auc,
            prefix_metric,
            delta_vs_second: second_metric - hybrid_metric,
        });
    }

    Ok(CoverageCurve {
        metric,
        points,
        second_accuracy,
        second_auc,
        sorted_bins: eligible.iter().map(|r| (r.bin, r.rows)).collect(),
    })
}

/// The chosen first-stage bin set.
#[derive(Debug, Clone)]
pub struct Allocation {
    pub first_stage_bins: BTreeSet<u32>,
    /// Validation coverage at the chosen cut.
    pub coverage: f64,
    pub tolerance: f64,
    pub metric: MetricKind,
}

fn allocation_at(curve: &CoverageCurve, cut_index: usize, tolerance: f64) -> Allocation {
    Allocation {
        first_stage_bins: curve.sorted_bins[..cut_index]
            .iter()
            .map(|&(bin, _)| bin.0)
            .collect(),
        coverage: curve.points[cut_index].coverage,
        tolerance,
        metric: curve.metric,
    }
}

/// Largest-coverage point whose hybrid metric trails the pure second stage
/// by at most `tolerance`.
pub fn select_cutoff(curve: &CoverageCurve, second_stage_metric: f64, tolerance: f64) -> Allocation {
    let mut best = 0usize;
    for (k, p) in curve.points.iter().enumerate() {
        let delta = second_stage_metric - curve.hybrid_metric(p);
        if delta <= tolerance && p.coverage >= curve.points[best].coverage {
            best = k;
        }
    }
    allocation_at(curve, best, tolerance)
}

/// The sweep point whose coverage is closest to `target` (used by the
/// latency benchmark to pin coverage).
pub fn select_coverage(curve: &CoverageCurve, target: f64) -> Allocation {
    let mut best = 0usize;
    for (k, p) in curve.points.iter().enumerate() {
        if (p.coverage - target).abs() < (curve.points[best].coverage - target).abs() {
            best = k;
        }
    }
    allocation_at(curve, best, f64::NAN)
}

/// Restrict a model to the allocated bins; every other bin becomes a miss.
pub fn filter_model(first: &LRwBinsModel, allocation: &Allocation) -> LRwBinsModel {
    first.retain_bins(|bin| allocation.first_stage_bins.contains(&bin))
}
