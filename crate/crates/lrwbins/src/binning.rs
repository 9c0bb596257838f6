//! Quantile binning of the top-ranked features and the combined-bin index.
//!
//! Numeric features get `b-1` cut values at nearest-rank quantiles of the
//! training data; Boolean features split into their two natural bins;
//! categorical features get one bin per code plus a reserved UNKNOWN bin.
//! The ordered tuple of per-feature bin digits addresses a combined bin via
//! mixed-radix encoding with the most important feature as the most
//! significant digit.
//!
//! Edges are quantized to `f32` when fitted, so the training-side scorer and
//! the table-driven scorer compare rows against bit-identical cut values.
//! Nearest-rank quantiles commute with the affine standardization the
//! normalizer applies, so cuts are computed and stored on the raw value
//! scale.

use crate::dataset::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::ranking::FeatureRanking;

/// Combined-bin identifier in `[0, total_bins)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BinId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureBins {
    /// Strictly increasing cut values; cells are right-closed, so a value
    /// equal to a cut lands in the lower cell.
    Numeric { edges: Vec<f32> },
    Boolean,
    /// One bin per code in `[0, cardinality)`, plus bin `cardinality` for
    /// codes never seen at training time.
    Categorical { cardinality: usize },
}

#[derive(Debug, Clone)]
pub struct BinnedFeature {
    /// Index into the dataset schema.
    pub feature: usize,
    pub bins: FeatureBins,
}

impl BinnedFeature {
    pub fn bin_count(&self) -> usize {
        match &self.bins {
            FeatureBins::Numeric { edges } => edges.len() + 1,
            FeatureBins::Boolean => 2,
            FeatureBins::Categorical { cardinality } => cardinality + 1,
        }
    }

    /// Per-feature bin digit for a raw feature value.
    pub fn digit(&self, v: f64) -> usize {
        match &self.bins {
            FeatureBins::Numeric { edges } => edges.partition_point(|&e| (e as f64) < v),
            FeatureBins::Boolean => usize::from(v != 0.0),
            FeatureBins::Categorical { cardinality } => {
                if v >= 0.0 && v < *cardinality as f64 {
                    v as usize
                } else {
                    *cardinality
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BinSpec {
    /// Binned features in importance order, most important first.
    features: Vec<BinnedFeature>,
    /// Quantile count requested at fit time.
    quantiles: usize,
    radices: Vec<usize>,
    total_bins: u64,
}

impl BinSpec {
    pub fn new(features: Vec<BinnedFeature>, quantiles: usize) -> Result<Self> {
        let radices: Vec<usize> = features.iter().map(|f| f.bin_count()).collect();
        let total_bins = radices
            .iter()
            .try_fold(1u64, |acc, &r| acc.checked_mul(r as u64))
            .ok_or_else(|| Error::InvalidParameter("combined bin count overflows u64".into()))?;
        if total_bins > u32::MAX as u64 {
            return Err(Error::InvalidParameter(format!(
                "{total_bins} combined bins exceed the 32-bit id space"
            )));
        }
        Ok(Self {
            features,
            quantiles,
            radices,
            total_bins,
        })
    }

    pub fn features(&self) -> &[BinnedFeature] {
        &self.features
    }

    pub fn quantiles(&self) -> usize {
        self.quantiles
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn total_bins(&self) -> u64 {
        self.total_bins
    }
}

/// Nearest-rank quantile cuts: the cut at level `k/b` is the sorted value at
/// index `ceil(k*n/b) - 1`. Duplicate cuts collapse, and a cut at the
/// maximum value is dropped (its upper cell would be empty), so a feature
/// may end up with fewer than `b` cells; a constant feature keeps one.
fn numeric_edges(mut values: Vec<f64>, b: usize) -> Vec<f32> {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    let max = values[n - 1] as f32;
    let mut edges: Vec<f32> = Vec::with_capacity(b - 1);
    for k in 1..b {
        let pos = (k * n).div_ceil(b) - 1;
        let edge = values[pos] as f32;
        if edge < max && edges.last() != Some(&edge) {
            edges.push(edge);
        }
    }
    edges
}

/// Fit bins for the `n` most important features.
pub fn fit_bins(train: &Dataset, ranking: &FeatureRanking, n: usize, b: usize) -> Result<BinSpec> {
    if train.n_rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if n < 1 || n > train.n_features() {
        return Err(Error::InvalidParameter(format!(
            "n = {n} outside 1..={}",
            train.n_features()
        )));
    }
    if b < 2 {
        return Err(Error::InvalidParameter("b must be at least 2".into()));
    }
    let features = ranking
        .top(n)
        .into_iter()
        .map(|feature| {
            let bins = match train.schema().feature(feature).kind {
                FeatureKind::Numeric => {
                    let values: Vec<f64> = (0..train.n_rows())
                        .map(|r| train.value(r, feature))
                        .collect();
                    FeatureBins::Numeric {
                        edges: numeric_edges(values, b),
                    }
                }
                FeatureKind::Boolean => FeatureBins::Boolean,
                FeatureKind::Categorical { cardinality } => FeatureBins::Categorical { cardinality },
            };
            BinnedFeature { feature, bins }
        })
        .collect();
    BinSpec::new(features, b)
}

/// Mixed-radix combined-bin index of a row, most important feature most
/// significant.
pub fn combined_bin_index(row: &[f64], spec: &BinSpec) -> BinId {
    let mut idx: u64 = 0;
    for (bf, &radix) in spec.features.iter().zip(&spec.radices) {
        idx = idx * radix as u64 + bf.digit(row[bf.feature]) as u64;
    }
    debug_assert!(idx < spec.total_bins);
    BinId(idx as u32)
}
