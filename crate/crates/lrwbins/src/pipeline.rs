//! End-to-end training: split, rank, bin, train both stages, allocate.

use crate::allocation::{
    evaluate_per_bin, filter_model, select_cutoff, sweep, Allocation, BinReport, CoverageCurve,
    MetricKind,
};
use crate::binning::fit_bins;
use crate::dataset::{fit_normalizer, split, Dataset, Normalizer};
use crate::error::Result;
use crate::first_stage::{
    build_inputs, predict_first_stage, sigmoid, train_lr, train_lrwbins, FirstStageResult,
    LRWeights, LRwBinsModel, LrParams, ScalarInput,
};
use crate::gbdt::{predict_gbdt, train_gbdt, GbdtModel, GbdtParams};
use crate::metrics::{accuracy, roc_auc, EvalReport, ModelEval};
use crate::ranking::{rank_mrmr, ranking_from_model, FeatureRanking, RankMethod};

#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub fractions: (f64, f64, f64),
    pub seed: u64,
    /// Quantiles per binned numeric feature.
    pub b: usize,
    /// Features forming the combined bins.
    pub n: usize,
    /// Inference features (clamped to the feature count).
    pub m: usize,
    pub min_bin_rows: usize,
    pub lr: LrParams,
    pub gbdt: GbdtParams,
    pub rank_method: RankMethod,
    pub mrmr_bins: usize,
    pub metric: MetricKind,
    pub tolerance: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            fractions: (0.7, 0.15, 0.15),
            seed: 42,
            b: 3,
            n: 7,
            m: 20,
            min_bin_rows: 30,
            lr: LrParams::default(),
            gbdt: GbdtParams::default(),
            rank_method: RankMethod::GbdtGain,
            mrmr_bins: 10,
            metric: MetricKind::Accuracy,
            tolerance: 0.002,
        }
    }
}

/// Everything the pipeline produced, splits included.
pub struct PipelineArtifacts {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub normalizer: Normalizer,
    pub ranking: FeatureRanking,
    /// Global logistic regression over the same inference inputs (baseline).
    pub plain_lr: (Vec<ScalarInput>, LRWeights),
    /// All trained bins, before allocation.
    pub first_full: LRwBinsModel,
    pub second: GbdtModel,
    pub reports: Vec<BinReport>,
    pub curve: CoverageCurve,
    pub allocation: Allocation,
    /// Filtered to the allocated bins; what gets exported.
    pub first: LRwBinsModel,
}

pub fn run_pipeline(data: &Dataset, params: &PipelineParams) -> Result<PipelineArtifacts> {
    let (train, val, test) = split(data, params.fractions, params.seed)?;
    let normalizer = fit_normalizer(&train);

    let mut gbdt_params = params.gbdt.clone();
    gbdt_params.seed = params.seed;
    let second = train_gbdt(&train, &gbdt_params)?;

    let ranking = match params.rank_method {
        RankMethod::GbdtGain => ranking_from_model(&second)?,
        RankMethod::Mrmr => rank_mrmr(&train, params.mrmr_bins)?,
    };

    let f = train.n_features();
    let n = params.n.clamp(1, f);
    let m = params.m.clamp(1, f);
    let spec = fit_bins(&train, &ranking, n, params.b)?;
    let inference_features = ranking.top(m);

    let mut lr_params = params.lr.clone();
    lr_params.seed = params.seed;
    let first_full = train_lrwbins(
        &train,
        spec,
        inference_features.clone(),
        &normalizer,
        &lr_params,
        params.min_bin_rows,
    )?;

    // global LR baseline on the same inputs
    let inputs = build_inputs(&inference_features, &train, &normalizer);
    let mut x = Vec::with_capacity(train.n_rows() * inputs.len());
    for r in 0..train.n_rows() {
        let row = train.row(r);
        x.extend(inputs.iter().map(|i| i.value(row)));
    }
    let plain = train_lr(&x, inputs.len(), train.labels(), &lr_params)?.quantized();

    let reports = evaluate_per_bin(&first_full, &second, &val, params.metric)?;
    let curve = sweep(&reports, &first_full, &second, &val, params.metric)?;
    let allocation = select_cutoff(&curve, curve.second_metric(), params.tolerance);
    let first = filter_model(&first_full, &allocation);

    Ok(PipelineArtifacts {
        train,
        val,
        test,
        normalizer,
        ranking,
        plain_lr: (inputs, plain),
        first_full,
        second,
        reports,
        curve,
        allocation,
        first,
    })
}

impl PipelineArtifacts {
    pub fn plain_lr_score(&self, row: &[f64]) -> f64 {
        let (inputs, w) = &self.plain_lr;
        let z = w.bias
            + inputs
                .iter()
                .zip(&w.weights)
                .map(|(input, &wi)| wi * input.value(row))
                .sum::<f64>();
        sigmoid(z)
    }

    /// Standalone LRwBins score: per-bin model on a hit, global LR backoff
    /// on rows whose bin was never trained.
    pub fn lrwbins_score(&self, row: &[f64]) -> f64 {
        match predict_first_stage(&self.first_full, row) {
            FirstStageResult::Score(p) => p,
            FirstStageResult::Miss => self.plain_lr_score(row),
        }
    }

    /// Hybrid score and whether the first stage answered.
    pub fn hybrid_score(&self, row: &[f64]) -> Result<(f64, bool)> {
        match predict_first_stage(&self.first, row) {
            FirstStageResult::Score(p) => Ok((p, true)),
            FirstStageResult::Miss => Ok((predict_gbdt(&self.second, row)?, false)),
        }
    }

    /// Quality of every model on a held-out dataset (the Tables 1-2 view).
    pub fn evaluate(&self, held_out: &Dataset) -> Result<EvalReport> {
        let n = held_out.n_rows();
        let labels = held_out.labels();
        let mut lr = Vec::with_capacity(n);
        let mut lrwbins = Vec::with_capacity(n);
        let mut gbdt = Vec::with_capacity(n);
        let mut hybrid = Vec::with_capacity(n);
        let mut first_hits = 0usize;
        for r in 0..n {
            let row = held_out.row(r);
            lr.push(self.plain_lr_score(row));
            lrwbins.push(self.lrwbins_score(row));
            gbdt.push(predict_gbdt(&self.second, row)?);
            let (p, hit) = self.hybrid_score(row)?;
            hybrid.push(p);
            first_hits += usize::from(hit);
        }

        let eval = |name: &str, scores: &[f64]| -> Result<ModelEval> {
            Ok(ModelEval {
                name: name.to_string(),
                roc_auc: roc_auc(scores, labels)?,
                accuracy: accuracy(scores, labels, 0.5),
                n_rows: n,
            })
        };
        let gbdt_eval = eval("gbdt", &gbdt)?;
        let hybrid_eval = eval("hybrid", &hybrid)?;
        let delta_auc = gbdt_eval.roc_auc - hybrid_eval.roc_auc;
        let delta_acc = gbdt_eval.accuracy - hybrid_eval.accuracy;
        Ok(EvalReport {
            models: vec![eval("lr", &lr)?, eval("lrwbins", &lrwbins)?, gbdt_eval, hybrid_eval],
            coverage: first_hits as f64 / n as f64,
            delta_auc,
            delta_acc,
        })
    }
}
