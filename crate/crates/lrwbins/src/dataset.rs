//! Typed tabular datasets with binary labels.
//!
//! A [`Dataset`] is a row-major matrix of `f64` values plus a
//! [`FeatureSchema`]: numeric columns hold the raw value, Boolean columns
//! hold 0/1, and categorical columns hold dense integer codes assigned in
//! first-seen order during CSV loading. The code dictionaries are kept so
//! that models can be exported together with the string-to-code mapping.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Stddev floor so standardization never divides by zero.
pub const STDDEV_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    Boolean,
    Categorical { cardinality: usize },
}

#[derive(Debug, Clone)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone)]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            if seen.insert(f.name.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate feature name {:?}",
                    f.name
                )));
            }
            if let FeatureKind::Categorical { cardinality } = f.kind {
                if cardinality < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "categorical feature {:?} needs cardinality >= 2",
                        f.name
                    )));
                }
            }
        }
        Ok(Self { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, index: usize) -> &FeatureDef {
        &self.features[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureDef> {
        self.features.iter()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// FNV-1a over names, kinds, and cardinalities; identifies the schema a
    /// model was trained against.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100_0000_01b3);
            }
        };
        for f in &self.features {
            eat(f.name.as_bytes());
            match f.kind {
                FeatureKind::Numeric => eat(&[0]),
                FeatureKind::Boolean => eat(&[1]),
                FeatureKind::Categorical { cardinality } => {
                    eat(&[2]);
                    eat(&(cardinality as u64).to_le_bytes());
                }
            }
        }
        h
    }
}

/// Feature kind as declared in a sidecar schema file, before cardinalities
/// are known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclKind {
    Numeric,
    Boolean,
    Categorical,
}

/// Parse a sidecar schema: one `name=kind` per line, `#` comments allowed.
pub fn parse_schema_decl(text: &str) -> Result<Vec<(String, DeclKind)>> {
    let mut decls = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, kind) = line.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("schema line {}: expected name=kind", lineno + 1))
        })?;
        let kind = match kind.trim() {
            "numeric" => DeclKind::Numeric,
            "boolean" => DeclKind::Boolean,
            "categorical" => DeclKind::Categorical,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "schema line {}: unknown kind {:?}",
                    lineno + 1,
                    other
                )))
            }
        };
        decls.push((name.trim().to_string(), kind));
    }
    if decls.is_empty() {
        return Err(Error::InvalidParameter("empty schema".into()));
    }
    Ok(decls)
}

#[derive(Debug, Clone)]
pub struct Dataset {
    schema: FeatureSchema,
    /// Row-major, `n_rows x n_features`.
    rows: Vec<f64>,
    labels: Vec<u8>,
    /// Per feature: code -> string, empty for non-categorical features.
    dictionaries: Vec<Vec<String>>,
}

impl Dataset {
    /// Build a dataset from raw parts, validating every invariant: at least
    /// one row, finite values, Boolean cells in {0,1}, categorical codes
    /// below their declared cardinality.
    pub fn from_parts(
        schema: FeatureSchema,
        rows: Vec<f64>,
        labels: Vec<u8>,
        dictionaries: Vec<Vec<String>>,
    ) -> Result<Self> {
        let f = schema.len();
        if labels.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if rows.len() != labels.len() * f {
            return Err(Error::InvalidParameter(format!(
                "rows length {} != {} rows x {} features",
                rows.len(),
                labels.len(),
                f
            )));
        }
        if dictionaries.len() != f {
            return Err(Error::InvalidParameter(
                "one dictionary slot per feature required".into(),
            ));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::NonBinaryLabel {
                row: labels.iter().position(|&l| l > 1).unwrap(),
                value: labels[labels.iter().position(|&l| l > 1).unwrap()].to_string(),
            });
        }
        for (j, def) in schema.iter().enumerate() {
            for r in 0..labels.len() {
                let v = rows[r * f + j];
                if !v.is_finite() {
                    return Err(Error::NonFiniteInput);
                }
                match def.kind {
                    FeatureKind::Boolean if v != 0.0 && v != 1.0 => {
                        return Err(Error::UnparseableValue {
                            row: r,
                            column: def.name.clone(),
                            value: v.to_string(),
                        });
                    }
                    FeatureKind::Categorical { cardinality }
                        if (v < 0.0 || v.fract() != 0.0 || (v as usize) >= cardinality) => {
                            return Err(Error::UnparseableValue {
                                row: r,
                                column: def.name.clone(),
                                value: v.to_string(),
                            });
                        }
                    _ => {}
                }
            }
        }
        Ok(Self {
            schema,
            rows,
            labels,
            dictionaries,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.rows[row * self.schema.len() + feature]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let f = self.schema.len();
        &self.rows[row * f..(row + 1) * f]
    }

    pub fn label(&self, row: usize) -> u8 {
        self.labels[row]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn dictionary(&self, feature: usize) -> &[String] {
        &self.dictionaries[feature]
    }

    pub fn dictionaries(&self) -> &[Vec<String>] {
        &self.dictionaries
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().map(|&l| l as usize).sum()
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        let f = self.schema.len();
        let mut rows = Vec::with_capacity(indices.len() * f);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            rows.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            schema: self.schema.clone(),
            rows,
            labels,
            dictionaries: self.dictionaries.clone(),
        }
    }
}

/// Split a CSV line on commas. Only the RFC-4180 subset without embedded
/// separators is supported; surrounding quotes and whitespace are stripped.
fn split_csv_line(line: &str) -> Vec<&str> {
    line.split(',')
        .map(|cell| {
            let cell = cell.trim();
            cell.strip_prefix('"')
                .and_then(|c| c.strip_suffix('"'))
                .unwrap_or(cell)
        })
        .collect()
}

/// Load a comma-delimited file with a header row. Features are taken in
/// schema-declaration order regardless of their position in the file;
/// categorical strings become dense codes in first-seen order.
pub fn load_csv(
    path: impl AsRef<Path>,
    decls: &[(String, DeclKind)],
    label_column: &str,
) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::EmptyTrainingSet)?;
    let header: Vec<&str> = split_csv_line(header);

    let label_idx = header
        .iter()
        .position(|&h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let mut col_of_feature = Vec::with_capacity(decls.len());
    for (name, _) in decls {
        let idx = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        col_of_feature.push(idx);
    }

    let f = decls.len();
    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut dicts: Vec<Vec<String>> = vec![Vec::new(); f];
    let mut code_maps: Vec<HashMap<String, usize>> = vec![HashMap::new(); f];

    for (r, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells = split_csv_line(line);
        if cells.len() != header.len() {
            return Err(Error::UnparseableValue {
                row: r,
                column: "<row>".into(),
                value: format!("{} cells, expected {}", cells.len(), header.len()),
            });
        }
        let label_cell = cells[label_idx];
        labels.push(match label_cell {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::NonBinaryLabel {
                    row: r,
                    value: other.to_string(),
                })
            }
        });
        for (j, (name, kind)) in decls.iter().enumerate() {
            let cell = cells[col_of_feature[j]];
            let v = match kind {
                DeclKind::Numeric => {
                    let parsed: f64 = cell.parse().map_err(|_| Error::UnparseableValue {
                        row: r,
                        column: name.clone(),
                        value: cell.to_string(),
                    })?;
                    if !parsed.is_finite() {
                        return Err(Error::UnparseableValue {
                            row: r,
                            column: name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    parsed
                }
                DeclKind::Boolean => match cell.to_ascii_lowercase().as_str() {
                    "0" | "false" => 0.0,
                    "1" | "true" => 1.0,
                    _ => {
                        return Err(Error::UnparseableValue {
                            row: r,
                            column: name.clone(),
                            value: cell.to_string(),
                        })
                    }
                },
                DeclKind::Categorical => {
                    if cell.is_empty() {
                        return Err(Error::UnparseableValue {
                            row: r,
                            column: name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    let next = dicts[j].len();
                    let code = *code_maps[j].entry(cell.to_string()).or_insert(next);
                    if code == next {
                        dicts[j].push(cell.to_string());
                    }
                    code as f64
                }
            };
            rows.push(v);
        }
    }

    let features = decls
        .iter()
        .enumerate()
        .map(|(j, (name, kind))| FeatureDef {
            name: name.clone(),
            kind: match kind {
                DeclKind::Numeric => FeatureKind::Numeric,
                DeclKind::Boolean => FeatureKind::Boolean,
                DeclKind::Categorical => FeatureKind::Categorical {
                    cardinality: dicts[j].len().max(2),
                },
            },
        })
        .collect();
    Dataset::from_parts(FeatureSchema::new(features)?, rows, labels, dicts)
}

/// Deterministic shuffled partition into train/validation/test. Sizes are
/// floor-rounded; the remainder goes to train.
pub fn split(d: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (ft, fv, fe) = fractions;
    if ft <= 0.0 || fv <= 0.0 || fe <= 0.0 {
        return Err(Error::BadFractions("fractions must be positive".into()));
    }
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::BadFractions(format!(
            "fractions sum to {}",
            ft + fv + fe
        )));
    }
    let n = d.n_rows();
    let mut indices: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut indices);

    let n_val = (fv * n as f64).floor() as usize;
    let n_test = (fe * n as f64).floor() as usize;
    let n_train = n - n_val - n_test;
    let train = d.subset(&indices[..n_train]);
    let val = d.subset(&indices[n_train..n_train + n_val]);
    let test = d.subset(&indices[n_train + n_val..]);
    Ok((train, val, test))
}

/// Per-numeric-feature standardization statistics fitted on the training
/// split. Population (divide by N) convention.
#[derive(Debug, Clone)]
pub struct Normalizer {
    /// `Some((mean, stddev))` for numeric features, `None` otherwise.
    stats: Vec<Option<(f64, f64)>>,
}

pub fn fit_normalizer(train: &Dataset) -> Normalizer {
    let n = train.n_rows() as f64;
    let stats = train
        .schema()
        .iter()
        .enumerate()
        .map(|(j, def)| match def.kind {
            FeatureKind::Numeric => {
                let mean = (0..train.n_rows()).map(|r| train.value(r, j)).sum::<f64>() / n;
                let var = (0..train.n_rows())
                    .map(|r| {
                        let d = train.value(r, j) - mean;
                        d * d
                    })
                    .sum::<f64>()
                    / n;
                Some((mean, var.sqrt().max(STDDEV_EPSILON)))
            }
            _ => None,
        })
        .collect();
    Normalizer { stats }
}

impl Normalizer {
    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    /// `(mean, stddev)` for a numeric feature, `None` for Boolean and
    /// categorical features.
    pub fn stats(&self, feature: usize) -> Option<(f64, f64)> {
        self.stats[feature]
    }

    pub fn normalize_value(&self, feature: usize, v: f64) -> f64 {
        match self.stats[feature] {
            Some((mean, std)) => (v - mean) / std,
            None => v,
        }
    }

    /// Standardize numeric columns; Boolean and categorical columns pass
    /// through untouched.
    pub fn apply(&self, d: &Dataset) -> Dataset {
        assert_eq!(self.stats.len(), d.n_features(), "normalizer/schema mismatch");
        let f = d.n_features();
        let mut rows = Vec::with_capacity(d.n_rows() * f);
        for r in 0..d.n_rows() {
            for j in 0..f {
                rows.push(self.normalize_value(j, d.value(r, j)));
            }
        }
        Dataset {
            schema: d.schema.clone(),
            rows,
            labels: d.labels.clone(),
            dictionaries: d.dictionaries.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp_file(name: &str, contents: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(format!("lrwbins_test_{}_{}", std::process::id(), name));
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    fn numeric_schema(names: &[&str]) -> Vec<(String, DeclKind)> {
        names
            .iter()
            .map(|n| (n.to_string(), DeclKind::Numeric))
            .collect()
    }

    #[test]
    fn load_minimal_csv() {
        let path = tmp_file("minimal.csv", "x,y\n1.5,0\n2.5,1\n");
        let d = load_csv(&path, &numeric_schema(&["x"]), "y").unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.n_features(), 1);
        assert_eq!(d.value(0, 0), 1.5);
        assert_eq!(d.labels(), &[0, 1]);
        fs::remove_file(path).ok();
    }

    #[test]
    fn load_rejects_non_binary_label() {
        let path = tmp_file("badlabel.csv", "x,y\n1.0,2\n");
        let err = load_csv(&path, &numeric_schema(&["x"]), "y").unwrap_err();
        assert!(matches!(err, Error::NonBinaryLabel { row: 0, .. }));
        fs::remove_file(path).ok();
    }

    #[test]
    fn load_reports_missing_column() {
        let path = tmp_file("missing.csv", "x,y\n1.0,0\n");
        let err = load_csv(&path, &numeric_schema(&["z"]), "y").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(name) if name == "z"));
        fs::remove_file(path).ok();
    }

    #[test]
    fn load_reports_unparseable_cell() {
        let path = tmp_file("unparseable.csv", "x,y\n1.0,0\nfoo,1\n");
        let err = load_csv(&path, &numeric_schema(&["x"]), "y").unwrap_err();
        match err {
            Error::UnparseableValue { row, column, value } => {
                assert_eq!(row, 1);
                assert_eq!(column, "x");
                assert_eq!(value, "foo");
            }
            other => panic!("unexpected error {other:?}"),
        }
        fs::remove_file(path).ok();
    }

    #[test]
    fn categorical_codes_first_seen() {
        let path = tmp_file(
            "cats.csv",
            "c,y\nred,0\nblue,1\nred,0\ngreen,1\n",
        );
        let d = load_csv(
            &path,
            &[("c".to_string(), DeclKind::Categorical)],
            "y",
        )
        .unwrap();
        assert_eq!(d.dictionary(0), &["red", "blue", "green"]);
        assert_eq!(
            (0..4).map(|r| d.value(r, 0)).collect::<Vec<_>>(),
            vec![0.0, 1.0, 0.0, 2.0]
        );
        assert_eq!(
            d.schema().feature(0).kind,
            FeatureKind::Categorical { cardinality: 3 }
        );
        fs::remove_file(path).ok();
    }

    fn toy(n: usize) -> Dataset {
        let schema = FeatureSchema::new(vec![FeatureDef {
            name: "x".into(),
            kind: FeatureKind::Numeric,
        }])
        .unwrap();
        let rows: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::from_parts(schema, rows, labels, vec![Vec::new()]).unwrap()
    }

    #[test]
    fn split_sizes_floor_with_remainder_to_train() {
        let d = toy(10);
        let (tr, va, te) = split(&d, (0.6, 0.2, 0.2), 7).unwrap();
        assert_eq!((tr.n_rows(), va.n_rows(), te.n_rows()), (6, 2, 2));

        let d = toy(7);
        let (tr, va, te) = split(&d, (0.5, 0.25, 0.25), 7).unwrap();
        assert_eq!((tr.n_rows(), va.n_rows(), te.n_rows()), (5, 1, 1));
    }

    #[test]
    fn split_deterministic_and_partitions() {
        let d = toy(101);
        for seed in 0..20u64 {
            let (a1, b1, c1) = split(&d, (0.7, 0.15, 0.15), seed).unwrap();
            let (a2, b2, c2) = split(&d, (0.7, 0.15, 0.15), seed).unwrap();
            let collect = |ds: &Dataset| (0..ds.n_rows()).map(|r| ds.value(r, 0)).collect::<Vec<_>>();
            assert_eq!(collect(&a1), collect(&a2));
            assert_eq!(collect(&b1), collect(&b2));
            assert_eq!(collect(&c1), collect(&c2));

            let mut all: Vec<f64> = collect(&a1);
            all.extend(collect(&b1));
            all.extend(collect(&c1));
            all.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let expected: Vec<f64> = (0..101).map(|i| i as f64).collect();
            assert_eq!(all, expected);
        }
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let d = toy(10);
        assert!(matches!(
            split(&d, (0.5, 0.2, 0.2), 1),
            Err(Error::BadFractions(_))
        ));
        assert!(matches!(
            split(&d, (1.0, 0.0, 0.0), 1),
            Err(Error::BadFractions(_))
        ));
    }

    #[test]
    fn normalizer_population_convention() {
        let d = toy(3); // values 0, 1, 2
        let n = fit_normalizer(&d);
        let out = n.apply(&d);
        let expect = 1.224744871391589; // sqrt(3/2)
        assert!((out.value(0, 0) + expect).abs() < 1e-12);
        assert!(out.value(1, 0).abs() < 1e-12);
        assert!((out.value(2, 0) - expect).abs() < 1e-12);
    }

    #[test]
    fn normalizer_handles_constant_feature() {
        let schema = FeatureSchema::new(vec![FeatureDef {
            name: "x".into(),
            kind: FeatureKind::Numeric,
        }])
        .unwrap();
        let d = Dataset::from_parts(schema, vec![5.0, 5.0, 5.0], vec![0, 1, 0], vec![Vec::new()])
            .unwrap();
        let n = fit_normalizer(&d);
        let out = n.apply(&d);
        for r in 0..3 {
            assert_eq!(out.value(r, 0), 0.0);
        }
    }

    #[test]
    fn normalizer_leaves_boolean_untouched() {
        let schema = FeatureSchema::new(vec![FeatureDef {
            name: "b".into(),
            kind: FeatureKind::Boolean,
        }])
        .unwrap();
        let d = Dataset::from_parts(schema, vec![0.0, 1.0, 1.0], vec![0, 1, 0], vec![Vec::new()])
            .unwrap();
        let n = fit_normalizer(&d);
        let out = n.apply(&d);
        assert_eq!(
            (0..3).map(|r| out.value(r, 0)).collect::<Vec<_>>(),
            vec![0.0, 1.0, 1.0]
        );
    }

    #[test]
    fn normalized_moments_near_zero_one() {
        let mut rng = SplitMix64::new(11);
        let schema = FeatureSchema::new(vec![FeatureDef {
            name: "x".into(),
            kind: FeatureKind::Numeric,
        }])
        .unwrap();
        let rows: Vec<f64> = (0..500).map(|_| rng.next_normal() * 11.0 + 3.0).collect();
        let labels = vec![1; 500];
        let d = Dataset::from_parts(schema, rows, labels, vec![Vec::new()]).unwrap();
        let out = fit_normalizer(&d).apply(&d);
        let mean = (0..500).map(|r| out.value(r, 0)).sum::<f64>() / 500.0;
        let var = (0..500).map(|r| (out.value(r, 0) - mean).powi(2)).sum::<f64>() / 500.0;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn schema_parse_roundtrip() {
        let decls = parse_schema_decl("a=numeric\n# comment\nb=boolean\nc=categorical\n").unwrap();
        assert_eq!(decls.len(), 3);
        assert_eq!(decls[0], ("a".to_string(), DeclKind::Numeric));
        assert_eq!(decls[2], ("c".to_string(), DeclKind::Categorical));
        assert!(parse_schema_decl("a:numeric\n").is_err());
    }
}
