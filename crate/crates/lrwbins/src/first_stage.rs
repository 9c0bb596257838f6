//! Per-combined-bin logistic regression: the embeddable first-stage model.
//!
//! Training partitions the data by combined bin and fits an L2-regularized
//! logistic regression per bin by full-batch gradient descent with Armijo
//! backtracking. The model's scoring inputs are scalars derived from the
//! top-m inference features: numeric features standardized with the training
//! normalizer, Booleans passed through, and categorical features expanded
//! into one-hot indicators (one scalar per code). Stored constants are
//! rounded to `f32` so the exported config table carries exactly the values
//! the training-side scorer uses.

use std::collections::BTreeMap;

use crate::binning::{combined_bin_index, BinId, BinSpec};
use crate::dataset::{Dataset, FeatureKind, Normalizer};
use crate::error::{Error, Result};

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Class-rate clamp for single-class bins.
const RATE_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LrParams {
    /// L2 penalty on the weights (bias unregularized), in sum-of-losses scale.
    pub l2: f64,
    /// Convergence threshold on the gradient infinity norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Reserved for stochastic solvers; the full-batch solver is
    /// deterministic and does not consume it.
    pub seed: u64,
}

impl Default for LrParams {
    fn default() -> Self {
        Self {
            l2: 1.0,
            tol: 1e-6,
            max_iter: 500,
            seed: 0,
        }
    }
}

/// Bias plus one weight per scoring input.
#[derive(Debug, Clone, PartialEq)]
pub struct LRWeights {
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl LRWeights {
    /// Round every constant to its nearest `f32`, the precision the config
    /// table stores.
    pub fn quantized(&self) -> LRWeights {
        LRWeights {
            bias: self.bias as f32 as f64,
            weights: self.weights.iter().map(|&w| w as f32 as f64).collect(),
        }
    }
}

/// Regularized negative log-likelihood (sum over rows) and its gradient.
/// The margin buffer is reused across calls.
fn objective(
    x: &[f64],
    cols: usize,
    labels: &[u8],
    l2: f64,
    bias: f64,
    w: &[f64],
    margins: &mut [f64],
) -> f64 {
    let mut obj = 0.0;
    for (i, row) in x.chunks_exact(cols).enumerate() {
        let z = bias + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        margins[i] = z;
        let sp = if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        obj += sp - f64::from(labels[i]) * z;
    }
    obj + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

fn gradient(
    x: &[f64],
    cols: usize,
    labels: &[u8],
    l2: f64,
    w: &[f64],
    margins: &[f64],
    grad_w: &mut [f64],
) -> f64 {
    grad_w.iter_mut().for_each(|g| *g = 0.0);
    let mut grad_b = 0.0;
    for (i, row) in x.chunks_exact(cols).enumerate() {
        let r = sigmoid(margins[i]) - f64::from(labels[i]);
        grad_b += r;
        for (g, &v) in grad_w.iter_mut().zip(row) {
            *g += r * v;
        }
    }
    for (g, &wv) in grad_w.iter_mut().zip(w) {
        *g += l2 * wv;
    }
    grad_b
}

/// Fit a logistic regression on a flat row-major design matrix.
///
/// Full-batch gradient descent with Armijo backtracking (beta 0.5, c 1e-4);
/// converged when the gradient infinity norm drops below `tol`. Single-class
/// data short-circuits to `bias = logit(rate)` with the rate clamped away
/// from 0 and 1.
pub fn train_lr(x: &[f64], cols: usize, labels: &[u8], params: &LrParams) -> Result<LRWeights> {
    let rows = labels.len();
    if rows == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if cols == 0 {
        return Err(Error::InvalidParameter("design matrix has no columns".into()));
    }
    assert_eq!(x.len(), rows * cols, "design matrix shape");
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if params.l2 < 0.0 {
        return Err(Error::InvalidParameter("l2 must be >= 0".into()));
    }

    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == rows {
        let rate = (positives as f64 / rows as f64).clamp(RATE_CLAMP, 1.0 - RATE_CLAMP);
        return Ok(LRWeights {
            bias: logit(rate),
            weights: vec![0.0; cols],
        });
    }

    const ARMIJO_C: f64 = 1e-4;
    const BACKTRACK_BETA: f64 = 0.5;

    let mut w = vec![0.0f64; cols];
    let mut bias = 0.0f64;
    let mut margins = vec![0.0f64; rows];
    let mut grad_w = vec![0.0f64; cols];
    let mut trial_w = vec![0.0f64; cols];
    let mut trial_margins = vec![0.0f64; rows];

    let mut obj = objective(x, cols, labels, params.l2, bias, &w, &mut margins);
    // warm-started step: growing it back each iteration keeps the Armijo
    // backtrack count near one instead of re-descending from 1.0 every time
    let mut last_step = 1.0f64;
    for _iter in 0..params.max_iter {
        let grad_b = gradient(x, cols, labels, params.l2, &w, &margins, &mut grad_w);
        let inf_norm = grad_w
            .iter()
            .fold(grad_b.abs(), |acc, g| acc.max(g.abs()));
        if inf_norm < params.tol {
            break;
        }
        let grad_sq = grad_b * grad_b + grad_w.iter().map(|g| g * g).sum::<f64>();

        let mut step = (last_step * 2.0).min(1.0);
        let mut accepted = false;
        while step > 1e-18 {
            for ((t, &wv), &g) in trial_w.iter_mut().zip(&w).zip(&grad_w) {
                *t = wv - step * g;
            }
            let trial_bias = bias - step * grad_b;
            let trial_obj = objective(
                x,
                cols,
                labels,
                params.l2,
                trial_bias,
                &trial_w,
                &mut trial_margins,
            );
            if trial_obj <= obj - ARMIJO_C * step * grad_sq {
                assert!(trial_obj <= obj, "line search accepted an ascent step");
                std::mem::swap(&mut w, &mut trial_w);
                std::mem::swap(&mut margins, &mut trial_margins);
                bias = trial_bias;
                obj = trial_obj;
                last_step = step;
                accepted = true;
                break;
            }
            step *= BACKTRACK_BETA;
        }
        if !accepted {
            break; // step underflow: gradient is numerically flat
        }
    }

    Ok(LRWeights { bias, weights: w })
}

/// One scalar scoring input derived from a raw feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarInput {
    /// Standardized numeric feature; constants stored at `f32` precision.
    Numeric { feature: usize, mean: f32, stddev: f32 },
    Boolean { feature: usize },
    /// Indicator for one categorical code.
    OneHot { feature: usize, code: u16 },
}

impl ScalarInput {
    pub fn feature(&self) -> usize {
        match *self {
            ScalarInput::Numeric { feature, .. } => feature,
            ScalarInput::Boolean { feature } => feature,
            ScalarInput::OneHot { feature, .. } => feature,
        }
    }

    pub fn value(&self, row: &[f64]) -> f64 {
        match *self {
            ScalarInput::Numeric { feature, mean, stddev } => {
                (row[feature] - mean as f64) / stddev as f64
            }
            ScalarInput::Boolean { feature } => row[feature],
            ScalarInput::OneHot { feature, code } => {
                f64::from(row[feature] == code as f64)
            }
        }
    }
}

/// Expand raw inference features into the scalar input list.
pub fn build_inputs(
    features: &[usize],
    dataset: &Dataset,
    normalizer: &Normalizer,
) -> Vec<ScalarInput> {
    let mut inputs = Vec::new();
    for &feature in features {
        match dataset.schema().feature(feature).kind {
            FeatureKind::Numeric => {
                let (mean, std) = normalizer.stats(feature).expect("numeric feature has stats");
                inputs.push(ScalarInput::Numeric {
                    feature,
                    mean: mean as f32,
                    stddev: std as f32,
                });
            }
            FeatureKind::Boolean => inputs.push(ScalarInput::Boolean { feature }),
            FeatureKind::Categorical { cardinality } => {
                for code in 0..cardinality {
                    inputs.push(ScalarInput::OneHot {
                        feature,
                        code: code as u16,
                    });
                }
            }
        }
    }
    inputs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstStageResult {
    Score(f64),
    Miss,
}

impl FirstStageResult {
    pub fn score(self) -> Option<f64> {
        match self {
            FirstStageResult::Score(p) => Some(p),
            FirstStageResult::Miss => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LRwBinsModel {
    spec: BinSpec,
    /// Raw inference feature indices, importance order.
    inference_features: Vec<usize>,
    /// One-hot-expanded scalar inputs; weights align to this list.
    inputs: Vec<ScalarInput>,
    weights_by_bin: BTreeMap<u32, LRWeights>,
    /// Standardization stats per feature at export precision; `None` for
    /// non-numeric features.
    normalizer_stats: Vec<Option<(f32, f32)>>,
    /// Code dictionaries for every categorical feature, copied from the
    /// training data so exported tables can map raw strings.
    dictionaries: Vec<Vec<String>>,
    schema_fingerprint: u64,
    feature_count: usize,
    min_bin_rows: usize,
}

impl LRwBinsModel {
    pub fn spec(&self) -> &BinSpec {
        &self.spec
    }

    pub fn inference_features(&self) -> &[usize] {
        &self.inference_features
    }

    pub fn inputs(&self) -> &[ScalarInput] {
        &self.inputs
    }

    pub fn weights_by_bin(&self) -> &BTreeMap<u32, LRWeights> {
        &self.weights_by_bin
    }

    pub fn normalizer_stats(&self) -> &[Option<(f32, f32)>] {
        &self.normalizer_stats
    }

    pub fn dictionaries(&self) -> &[Vec<String>] {
        &self.dictionaries
    }

    pub fn schema_fingerprint(&self) -> u64 {
        self.schema_fingerprint
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn min_bin_rows(&self) -> usize {
        self.min_bin_rows
    }

    pub fn trained_bins(&self) -> usize {
        self.weights_by_bin.len()
    }

    /// Keep only the given bins; every other bin becomes a miss.
    pub(crate) fn retain_bins(&self, keep: impl Fn(u32) -> bool) -> LRwBinsModel {
        let mut filtered = self.clone();
        filtered.weights_by_bin.retain(|&bin, _| keep(bin));
        filtered
    }
}

/// Train one logistic regression per combined bin holding at least
/// `min_bin_rows` training rows.
pub fn train_lrwbins(
    train: &Dataset,
    spec: BinSpec,
    inference_features: Vec<usize>,
    normalizer: &Normalizer,
    lr: &LrParams,
    min_bin_rows: usize,
) -> Result<LRwBinsModel> {
    if inference_features.is_empty() {
        return Err(Error::InvalidParameter("no inference features".into()));
    }
    let inputs = build_inputs(&inference_features, train, normalizer);
    let cols = inputs.len();

    let mut rows_by_bin: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for r in 0..train.n_rows() {
        let bin = combined_bin_index(train.row(r), &spec);
        rows_by_bin.entry(bin.0).or_default().push(r);
    }

    let mut weights_by_bin = BTreeMap::new();
    for (bin, rows) in rows_by_bin {
        if rows.len() < min_bin_rows {
            continue;
        }
        let mut x = Vec::with_capacity(rows.len() * cols);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in &rows {
            let row = train.row(r);
            x.extend(inputs.iter().map(|input| input.value(row)));
            labels.push(train.label(r));
        }
        let fitted = train_lr(&x, cols, &labels, lr)?;
        weights_by_bin.insert(bin, fitted.quantized());
    }

    let normalizer_stats = (0..train.n_features())
        .map(|j| normalizer.stats(j).map(|(m, s)| (m as f32, s as f32)))
        .collect();

    Ok(LRwBinsModel {
        spec,
        inference_features,
        inputs,
        weights_by_bin,
        normalizer_stats,
        dictionaries: train.dictionaries().to_vec(),
        schema_fingerprint: train.schema().fingerprint(),
        feature_count: train.n_features(),
        min_bin_rows,
    })
}

/// Score a raw row: bin lookup, then the bin's logistic model over the
/// scalar inputs. Returns [`FirstStageResult::Miss`] when the row's bin has
/// no stored weights.
pub fn predict_first_stage(model: &LRwBinsModel, row: &[f64]) -> FirstStageResult {
    let bin = combined_bin_index(row, &model.spec);
    match model.weights_by_bin.get(&bin.0) {
        Some(w) => {
            let z = w.bias
                + model
                    .inputs
                    .iter()
                    .zip(&w.weights)
                    .map(|(input, &wi)| wi * input.value(row))
                    .sum::<f64>();
            FirstStageResult::Score(sigmoid(z))
        }
        None => FirstStageResult::Miss,
    }
}

/// Convenience: the combined-bin id the model would use for a row.
pub fn model_bin(model: &LRwBinsModel, row: &[f64]) -> BinId {
    combined_bin_index(row, &model.spec)
}
