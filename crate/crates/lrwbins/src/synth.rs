//! Deterministic synthetic binary-classification data for tests and scaling
//! runs.
//!
//! The label depends on a latent score mixing linear terms, a sign
//! interaction, a quadratic, and per-category offsets. The separating
//! surface is close to linear inside quantile cells of the leading features
//! but not globally, so a per-bin linear first stage covers a real (not
//! degenerate) fraction of rows.

use crate::dataset::{Dataset, FeatureDef, FeatureKind, FeatureSchema};
use crate::first_stage::sigmoid;
use crate::rng::SplitMix64;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub rows: usize,
    pub numeric_features: usize,
    pub boolean_features: usize,
    pub categorical_features: usize,
    pub cardinality: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rows: 10_000,
            numeric_features: 12,
            boolean_features: 2,
            categorical_features: 1,
            cardinality: 6,
            seed: 7,
        }
    }
}

pub fn generate(config: &SynthConfig) -> Dataset {
    assert!(config.rows >= 2);
    assert!(config.numeric_features >= 5, "the latent score uses x0..x4");
    let mut rng = SplitMix64::new(config.seed);

    let mut features = Vec::new();
    for j in 0..config.numeric_features {
        features.push(FeatureDef {
            name: format!("num{j}"),
            kind: FeatureKind::Numeric,
        });
    }
    for j in 0..config.boolean_features {
        features.push(FeatureDef {
            name: format!("flag{j}"),
            kind: FeatureKind::Boolean,
        });
    }
    for j in 0..config.categorical_features {
        features.push(FeatureDef {
            name: format!("cat{j}"),
            kind: FeatureKind::Categorical {
                cardinality: config.cardinality,
            },
        });
    }
    let schema = FeatureSchema::new(features).unwrap();

    let cat_effect: Vec<f64> = (0..config.cardinality)
        .map(|c| (c as f64 - config.cardinality as f64 / 2.0) * 0.35)
        .collect();

    let f = schema.len();
    let mut rows = Vec::with_capacity(config.rows * f);
    let mut labels = Vec::with_capacity(config.rows);
    for _ in 0..config.rows {
        let start = rows.len();
        for j in 0..config.numeric_features {
            // a few different scales, like real tabular data
            let scale = [1.0, 4.0, 0.5][j % 3];
            rows.push(rng.next_normal() * scale);
        }
        for _ in 0..config.boolean_features {
            rows.push(f64::from(rng.next_f64() < 0.5));
        }
        for _ in 0..config.categorical_features {
            rows.push(rng.next_below(config.cardinality as u64) as f64);
        }

        let x = &rows[start..];
        let mut z = 1.2 * x[0] - 0.25 * x[1];
        // slope reversal across the x0 median: useless to a global linear
        // model, strong inside x0 bins
        z += if x[0] > 0.0 { 2.4 * x[2] } else { -2.4 * x[2] };
        z += 0.5 * (x[3] * x[3] - 1.0);
        z += 0.6 * x[4].tanh();
        if config.boolean_features > 0 {
            z += 0.8 * x[config.numeric_features];
        }
        if config.categorical_features > 0 {
            let code = x[config.numeric_features + config.boolean_features] as usize;
            z += cat_effect[code];
        }
        labels.push(u8::from(rng.next_f64() < sigmoid(0.9 * z)));
    }

    let dictionaries = schema
        .iter()
        .map(|def| match def.kind {
            FeatureKind::Categorical { cardinality } => {
                (0..cardinality).map(|c| format!("{}_{c}", def.name)).collect()
            }
            _ => Vec::new(),
        })
        .collect();

    Dataset::from_parts(schema, rows, labels, dictionaries).unwrap()
}
