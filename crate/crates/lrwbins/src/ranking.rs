//! Relative feature importance: MRMR (model-free) or GBDT split gain
//! (model-based).

use crate::dataset::{Dataset, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};
use crate::gbdt::{train_gbdt, GbdtParams, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMethod {
    Mrmr,
    GbdtGain,
}

/// A permutation of all feature indices, best first, with the score each
/// feature had when it was selected.
#[derive(Debug, Clone)]
pub struct FeatureRanking {
    pub method: RankMethod,
    order: Vec<(usize, f64)>,
}

impl FeatureRanking {
    pub fn new(method: RankMethod, order: Vec<(usize, f64)>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &(idx, _) in &order {
            if idx >= order.len() || seen[idx] {
                return Err(Error::InvalidParameter(
                    "ranking must be a permutation of feature indices".into(),
                ));
            }
            seen[idx] = true;
        }
        Ok(Self { method, order })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[(usize, f64)] {
        &self.order
    }

    /// Indices of the `n` best features.
    pub fn top(&self, n: usize) -> Vec<usize> {
        self.order.iter().take(n).map(|&(idx, _)| idx).collect()
    }

    /// Text export: `rank,index,name,score` per line.
    pub fn to_text(&self, schema: &FeatureSchema) -> String {
        let mut out = String::from("rank,index,name,score\n");
        for (rank, &(idx, score)) in self.order.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{:.6}\n",
                rank,
                idx,
                schema.feature(idx).name,
                score
            ));
        }
        out
    }
}

/// Discretize a column for mutual-information estimation: numeric values go
/// into equal-frequency cells (nearest-rank edges), Booleans and categorical
/// codes are used as-is.
fn discretize(d: &Dataset, feature: usize, bins: usize) -> (Vec<usize>, usize) {
    let n = d.n_rows();
    match d.schema().feature(feature).kind {
        FeatureKind::Boolean => ((0..n).map(|r| d.value(r, feature) as usize).collect(), 2),
        FeatureKind::Categorical { cardinality } => (
            (0..n).map(|r| d.value(r, feature) as usize).collect(),
            cardinality,
        ),
        FeatureKind::Numeric => {
            let mut values: Vec<f64> = (0..n).map(|r| d.value(r, feature)).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut edges: Vec<f64> = Vec::with_capacity(bins - 1);
            for k in 1..bins {
                let pos = (k * n).div_ceil(bins) - 1;
                let e = values[pos];
                if edges.last() != Some(&e) {
                    edges.push(e);
                }
            }
            let cells = (0..n)
                .map(|r| {
                    let v = d.value(r, feature);
                    edges.partition_point(|&e| e < v)
                })
                .collect();
            (cells, edges.len() + 1)
        }
    }
}

/// Plug-in mutual information (natural log) between two discretized columns.
fn mutual_information(a: &[usize], a_card: usize, b: &[usize], b_card: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0usize; a_card * b_card];
    let mut ma = vec![0usize; a_card];
    let mut mb = vec![0usize; b_card];
    for (&ai, &bi) in a.iter().zip(b) {
        joint[ai * b_card + bi] += 1;
        ma[ai] += 1;
        mb[bi] += 1;
    }
    let mut mi = 0.0;
    for ai in 0..a_card {
        if ma[ai] == 0 {
            continue;
        }
        for bi in 0..b_card {
            let c = joint[ai * b_card + bi];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / n;
            let px = ma[ai] as f64 / n;
            let py = mb[bi] as f64 / n;
            mi += pxy * (pxy / (px * py)).ln();
        }
    }
    mi.max(0.0)
}

/// Greedy MRMR in difference form: pick the feature maximizing relevance to
/// the label minus mean redundancy to the already-selected set. Ties break
/// toward the lower feature index. The score recorded for each feature is
/// its criterion value at selection time.
pub fn rank_mrmr(d: &Dataset, discretization_bins: usize) -> Result<FeatureRanking> {
    if discretization_bins < 2 {
        return Err(Error::InvalidParameter(
            "discretization_bins must be >= 2".into(),
        ));
    }
    let f = d.n_features();
    let cells: Vec<(Vec<usize>, usize)> = (0..f)
        .map(|j| discretize(d, j, discretization_bins))
        .collect();
    let label_cells: Vec<usize> = d.labels().iter().map(|&l| l as usize).collect();
    let relevance: Vec<f64> = (0..f)
        .map(|j| mutual_information(&cells[j].0, cells[j].1, &label_cells, 2))
        .collect();

    let mut selected: Vec<(usize, f64)> = Vec::with_capacity(f);
    let mut remaining: Vec<usize> = (0..f).collect();
    let mut redundancy_sum = vec![0.0f64; f];

    while !remaining.is_empty() {
        let (pos, best, score) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &j)| {
                let score = if selected.is_empty() {
                    relevance[j]
                } else {
                    relevance[j] - redundancy_sum[j] / selected.len() as f64
                };
                (pos, j, score)
            })
            // strict > keeps the earliest (lowest-index) feature on ties
            .fold(None, |acc: Option<(usize, usize, f64)>, cand| match acc {
                Some(best) if cand.2 <= best.2 => Some(best),
                _ => Some(cand),
            })
            .expect("remaining is non-empty");
        selected.push((best, score));
        remaining.swap_remove(pos);
        for &j in &remaining {
            redundancy_sum[j] +=
                mutual_information(&cells[j].0, cells[j].1, &cells[best].0, cells[best].1);
        }
    }

    FeatureRanking::new(RankMethod::Mrmr, selected)
}

/// Gain-based ranking from an already-trained model (the production case: a
/// GBDT exists anyway). Features never split on score zero and rank after
/// every used feature, by index.
pub fn ranking_from_model(model: &crate::gbdt::GbdtModel) -> Result<FeatureRanking> {
    let mut gains = vec![0.0f64; model.feature_count()];
    for tree in model.trees() {
        for node in tree.nodes() {
            if let Node::Split { feature, gain, .. } = node {
                gains[*feature as usize] += gain;
            }
        }
    }
    let mut order: Vec<(usize, f64)> = gains.into_iter().enumerate().collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    FeatureRanking::new(RankMethod::GbdtGain, order)
}

/// Rank by total split gain of a GBDT trained on the data.
pub fn rank_gbdt_gain(d: &Dataset, params: &GbdtParams) -> Result<FeatureRanking> {
    ranking_from_model(&train_gbdt(d, params)?)
}
