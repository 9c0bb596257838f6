//! Classification metrics and the analytic multistage latency model.

use std::time::Duration;

use crate::error::{Error, Result};

/// ROC AUC by the Mann-Whitney rank statistic: sort scores once, assign
/// average ranks to tied groups, and normalize the positive-class rank sum.
/// Equal to the pairwise definition with ties counting 1/2.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len());
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied block [i, j) shares the average rank
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }

    let u = rank_sum_pos - (pos as f64) * (pos as f64 + 1.0) / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Fraction of rows where `(score >= threshold)` agrees with the label.
pub fn accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
    assert_eq!(scores.len(), labels.len());
    if scores.is_empty() {
        return 0.0;
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|&(&s, &l)| (s >= threshold) == (l == 1))
        .count();
    correct as f64 / scores.len() as f64
}

/// Mean latency of the multistage path: the first stage is always attempted,
/// the second stage is added on a miss.
pub fn projected_multistage_latency(t1: Duration, t2: Duration, coverage: f64) -> Duration {
    assert!((0.0..=1.0).contains(&coverage), "coverage in [0,1]");
    let t1 = t1.as_secs_f64();
    let t2 = t2.as_secs_f64();
    Duration::from_secs_f64(coverage * t1 + (1.0 - coverage) * (t1 + t2))
}

/// Per-model quality summary, plus coverage and deltas for the hybrid.
#[derive(Debug, Clone)]
pub struct ModelEval {
    pub name: String,
    pub roc_auc: f64,
    pub accuracy: f64,
    pub n_rows: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub models: Vec<ModelEval>,
    pub coverage: f64,
    pub delta_auc: f64,
    pub delta_acc: f64,
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelEval> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,roc_auc,accuracy,n_rows,coverage,delta_auc_vs_second,delta_acc_vs_second\n");
        for m in &self.models {
            let (cov, dauc, dacc) = if m.name == "hybrid" {
                (
                    format!("{:.6}", self.coverage),
                    format!("{:.6}", self.delta_auc),
                    format!("{:.6}", self.delta_acc),
                )
            } else {
                (String::new(), String::new(), String::new())
            };
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{},{},{}\n",
                m.name, m.roc_auc, m.accuracy, m.n_rows, cov, dauc, dacc
            ));
        }
        out
    }
}
