//! Grid search over the first-stage shape `(b, n, m)` on validation data.

use crate::allocation::{evaluate_per_bin, select_cutoff, sweep, MetricKind};
use crate::binning::fit_bins;
use crate::dataset::{Dataset, FeatureKind, Normalizer};
use crate::error::{Error, Result};
use crate::first_stage::{predict_first_stage, train_lrwbins, FirstStageResult, LrParams};
use crate::gbdt::GbdtModel;
use crate::metrics::{accuracy, roc_auc};
use crate::ranking::FeatureRanking;

#[derive(Debug, Clone)]
pub struct TuneGrid {
    pub b_values: Vec<usize>,
    pub n_values: Vec<usize>,
    /// Inference feature counts; values are clamped to the feature count, so
    /// `usize::MAX` means "all features".
    pub m_values: Vec<usize>,
    /// Cells whose estimated combined-bin count exceeds this are skipped.
    pub bin_budget: u64,
}

impl Default for TuneGrid {
    fn default() -> Self {
        Self {
            b_values: vec![2, 3, 4],
            n_values: vec![3, 5, 7, 9],
            m_values: vec![10, 20, usize::MAX],
            bin_budget: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Objective {
    MaxAuc,
    MaxCoverageAtTolerance(f64),
}

#[derive(Debug, Clone)]
pub enum CellStatus {
    Evaluated,
    /// Estimated bin count that blew the budget.
    Skipped(u64),
}

#[derive(Debug, Clone)]
pub struct TuneCell {
    pub b: usize,
    pub n: usize,
    pub m: usize,
    pub status: CellStatus,
    /// First-stage metrics over validation rows the model scores (bin hits).
    pub val_roc_auc: Option<f64>,
    pub val_accuracy: Option<f64>,
    /// Coverage chosen by the standard cutoff at the given tolerance.
    pub coverage_at_tolerance: Option<f64>,
    pub total_bins: u64,
    pub trained_bins: usize,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub cells: Vec<TuneCell>,
    /// Index of the winning cell in `cells`.
    pub winner: usize,
}

impl TuneResult {
    pub fn winner_cell(&self) -> &TuneCell {
        &self.cells[self.winner]
    }

    /// CSV export: the full grid table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "b,n,m,status,total_bins,trained_bins,val_roc_auc,val_accuracy,coverage_at_tolerance,winner\n",
        );
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        for (i, c) in self.cells.iter().enumerate() {
            let status = match c.status {
                CellStatus::Evaluated => "evaluated".to_string(),
                CellStatus::Skipped(est) => format!("skipped({est})"),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                c.b,
                c.n,
                c.m,
                status,
                c.total_bins,
                c.trained_bins,
                fmt(c.val_roc_auc),
                fmt(c.val_accuracy),
                fmt(c.coverage_at_tolerance),
                i == self.winner
            ));
        }
        out
    }
}

/// Upper bound on the combined-bin count of a cell, from schema radices
/// alone (edge collapse can only shrink it).
pub fn estimate_total_bins(dataset: &Dataset, ranking: &FeatureRanking, n: usize, b: usize) -> u64 {
    ranking
        .top(n)
        .into_iter()
        .map(|j| match dataset.schema().feature(j).kind {
            FeatureKind::Numeric => b as u64,
            FeatureKind::Boolean => 2,
            FeatureKind::Categorical { cardinality } => cardinality as u64 + 1,
        })
        .fold(1u64, |acc, r| acc.saturating_mul(r))
}

struct CellScore {
    objective: f64,
    total_bins: u64,
    m: usize,
}

/// Exhaustive evaluation of every in-budget cell. The winner maximizes the
/// objective; ties break toward fewer total bins, then smaller m.
#[allow(clippy::too_many_arguments)]
pub fn tune(
    train: &Dataset,
    val: &Dataset,
    ranking: &FeatureRanking,
    normalizer: &Normalizer,
    second: &GbdtModel,
    grid: &TuneGrid,
    objective: Objective,
    lr: &LrParams,
    min_bin_rows: usize,
) -> Result<TuneResult> {
    if grid.b_values.is_empty() || grid.n_values.is_empty() || grid.m_values.is_empty() {
        return Err(Error::InvalidParameter("empty tune grid".into()));
    }
    let f = train.n_features();
    let metric = MetricKind::Accuracy;
    let tolerance = match objective {
        Objective::MaxCoverageAtTolerance(t) => t,
        Objective::MaxAuc => 0.002,
    };

    let mut cells = Vec::new();
    let mut best: Option<(usize, CellScore)> = None;

    for &b in &grid.b_values {
        for &n in &grid.n_values {
            for &m in &grid.m_values {
                let n = n.min(f);
                let m = m.min(f);
                let estimate = estimate_total_bins(train, ranking, n, b);
                if estimate > grid.bin_budget {
                    cells.push(TuneCell {
                        b,
                        n,
                        m,
                        status: CellStatus::Skipped(estimate),
                        val_roc_auc: None,
                        val_accuracy: None,
                        coverage_at_tolerance: None,
                        total_bins: 0,
                        trained_bins: 0,
                    });
                    continue;
                }

                let spec = fit_bins(train, ranking, n, b)?;
                let total_bins = spec.total_bins();
                let model =
                    train_lrwbins(train, spec, ranking.top(m), normalizer, lr, min_bin_rows)?;

                // first-stage quality over validation rows it can score
                let mut scores = Vec::new();
                let mut labels = Vec::new();
                for r in 0..val.n_rows() {
                    if let FirstStageResult::Score(p) = predict_first_stage(&model, val.row(r)) {
                        scores.push(p);
                        labels.push(val.label(r));
                    }
                }
                let val_auc = roc_auc(&scores, &labels).ok();
                let val_acc = if scores.is_empty() {
                    None
                } else {
                    Some(accuracy(&scores, &labels, 0.5))
                };

                let reports = evaluate_per_bin(&model, second, val, metric)?;
                let curve = sweep(&reports, &model, second, val, metric)?;
                let allocation = select_cutoff(&curve, curve.second_metric(), tolerance);
                let coverage = allocation.coverage;

                let cell_objective = match objective {
                    Objective::MaxAuc => val_auc.unwrap_or(f64::NEG_INFINITY),
                    Objective::MaxCoverageAtTolerance(_) => coverage,
                };

                let idx = cells.len();
                cells.push(TuneCell {
                    b,
                    n,
                    m,
                    status: CellStatus::Evaluated,
                    val_roc_auc: val_auc,
                    val_accuracy: val_acc,
                    coverage_at_tolerance: Some(coverage),
                    total_bins,
                    trained_bins: model.trained_bins(),
                });

                let score = CellScore {
                    objective: cell_objective,
                    total_bins,
                    m,
                };
                let wins = match &best {
                    None => true,
                    Some((_, cur)) => {
                        score.objective > cur.objective
                            || (score.objective == cur.objective
                                && (score.total_bins < cur.total_bins
                                    || (score.total_bins == cur.total_bins && score.m < cur.m)))
                    }
                };
                if wins {
                    best = Some((idx, score));
                }
            }
        }
    }

    match best {
        Some((winner, _)) => Ok(TuneResult { cells, winner }),
        None => Err(Error::EmptyGridAfterBudget),
    }
}
