//! Compact binary config tables for both stages.
//!
//! `.lrwb` holds everything first-stage inference needs: quantile edges of
//! the binned features, the scalar-input descriptors (with `f32` normalizer
//! constants), categorical code dictionaries, and the per-bin weight rows.
//! `.gbdt` holds the serialized tree ensemble. Both files are little-endian,
//! fixed-width, and end in a CRC32 footer over every preceding byte.
//!
//! [`FirstStageTable`] is the table-driven scorer: it rebuilds an
//! open-addressing hash map from bin id to weight row at load time and
//! implements the scoring path independently of
//! [`crate::first_stage::predict_first_stage`]. The two paths must agree to
//! within `f32` quantization on every row.
//!
//! Byte layouts are documented field by field in `docs/format.md`.

use std::fs;
use std::path::Path;

use crate::binning::{BinSpec, BinnedFeature, FeatureBins};
use crate::error::{Error, Result};
use crate::first_stage::{LRwBinsModel, ScalarInput};
use crate::gbdt::{GbdtModel, Node, SplitKind, Tree};

pub const FIRST_STAGE_MAGIC: [u8; 4] = *b"LRWB";
pub const SECOND_STAGE_MAGIC: [u8; 4] = *b"GBDT";
pub const FORMAT_VERSION: u16 = 1;

// ---------------------------------------------------------------------------
// CRC32 (IEEE, reflected)
// ---------------------------------------------------------------------------

fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

pub fn crc32(bytes: &[u8]) -> u32 {
    static TABLE: std::sync::OnceLock<[u32; 256]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(crc32_table);
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c = table[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    c ^ 0xFFFF_FFFF
}

// ---------------------------------------------------------------------------
// Little-endian writer / reader
// ---------------------------------------------------------------------------

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }
    /// Append the CRC32 footer and return the finished buffer.
    fn seal(mut self) -> Vec<u8> {
        let crc = crc32(&self.buf);
        self.u32(crc);
        self.buf
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CorruptTable("unexpected end of table".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::CorruptTable(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Strip and verify the CRC footer, check magic and version, and hand back
/// the body after the magic/version prefix.
fn open_table<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<Reader<'a>> {
    if bytes.len() < 10 {
        return Err(Error::CorruptTable("file too short".into()));
    }
    let (body, footer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(footer.try_into().unwrap());
    if crc32(body) != stored {
        return Err(Error::CorruptTable("checksum mismatch".into()));
    }
    let mut r = Reader::new(body);
    if r.take(4)? != magic {
        return Err(Error::CorruptTable("bad magic".into()));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// First-stage table
// ---------------------------------------------------------------------------

/// Decoded table contents; the exact image that is serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct TableImage {
    pub feature_count: u16,
    pub schema_fingerprint: u64,
    pub n: u16,
    pub b: u16,
    pub m_features: u16,
    pub total_bins: u32,
    pub min_bin_rows: u32,
    pub binned: Vec<(u16, FeatureBins)>,
    pub inputs: Vec<TableInput>,
    /// `(feature index, code strings)` sorted by feature index.
    pub dictionaries: Vec<(u16, Vec<String>)>,
    /// Sorted by bin id.
    pub entries: Vec<WeightEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableInput {
    Numeric { feature: u16, mean: f32, stddev: f32 },
    Boolean { feature: u16 },
    OneHot { feature: u16, code: u16 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub bin: u32,
    pub bias: f32,
    pub weights: Vec<f32>,
}

impl TableImage {
    pub fn from_model(model: &LRwBinsModel) -> Self {
        let binned = model
            .spec()
            .features()
            .iter()
            .map(|bf: &BinnedFeature| (bf.feature as u16, bf.bins.clone()))
            .collect();
        let inputs = model
            .inputs()
            .iter()
            .map(|input| match *input {
                ScalarInput::Numeric { feature, mean, stddev } => TableInput::Numeric {
                    feature: feature as u16,
                    mean,
                    stddev,
                },
                ScalarInput::Boolean { feature } => TableInput::Boolean {
                    feature: feature as u16,
                },
                ScalarInput::OneHot { feature, code } => TableInput::OneHot {
                    feature: feature as u16,
                    code,
                },
            })
            .collect();
        let dictionaries = model
            .dictionaries()
            .iter()
            .enumerate()
            .filter(|(_, d)| !d.is_empty())
            .map(|(j, d)| (j as u16, d.clone()))
            .collect();
        let entries = model
            .weights_by_bin()
            .iter()
            .map(|(&bin, w)| WeightEntry {
                bin,
                bias: w.bias as f32,
                weights: w.weights.iter().map(|&v| v as f32).collect(),
            })
            .collect();
        TableImage {
            feature_count: model.feature_count() as u16,
            schema_fingerprint: model.schema_fingerprint(),
            n: model.spec().features().len() as u16,
            b: model.spec().quantiles() as u16,
            m_features: model.inference_features().len() as u16,
            total_bins: model.spec().total_bins() as u32,
            min_bin_rows: model.min_bin_rows() as u32,
            binned,
            inputs,
            dictionaries,
            entries,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(&FIRST_STAGE_MAGIC);
        w.u16(FORMAT_VERSION);
        w.u16(self.feature_count);
        w.u64(self.schema_fingerprint);
        w.u16(self.n);
        w.u16(self.b);
        w.u16(self.m_features);
        w.u16(self.inputs.len() as u16);
        w.u32(self.total_bins);
        w.u32(self.min_bin_rows);
        for (feature, bins) in &self.binned {
            w.u16(*feature);
            match bins {
                FeatureBins::Numeric { edges } => {
                    w.u8(0);
                    w.u16(edges.len() as u16);
                    for &e in edges {
                        w.f32(e);
                    }
                }
                FeatureBins::Boolean => w.u8(1),
                FeatureBins::Categorical { cardinality } => {
                    w.u8(2);
                    w.u16(*cardinality as u16);
                }
            }
        }
        for input in &self.inputs {
            match *input {
                TableInput::Numeric { feature, mean, stddev } => {
                    w.u16(feature);
                    w.u8(0);
                    w.f32(mean);
                    w.f32(stddev);
                }
                TableInput::Boolean { feature } => {
                    w.u16(feature);
                    w.u8(1);
                }
                TableInput::OneHot { feature, code } => {
                    w.u16(feature);
                    w.u8(2);
                    w.u16(code);
                }
            }
        }
        w.u16(self.dictionaries.len() as u16);
        for (feature, entries) in &self.dictionaries {
            w.u16(*feature);
            w.u16(entries.len() as u16);
            for s in entries {
                w.u16(s.len() as u16);
                w.bytes(s.as_bytes());
            }
        }
        w.u32(self.entries.len() as u32);
        for e in &self.entries {
            w.u32(e.bin);
            w.f32(e.bias);
            for &v in &e.weights {
                w.f32(v);
            }
        }
        w.seal()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = open_table(bytes, &FIRST_STAGE_MAGIC)?;
        let feature_count = r.u16()?;
        let schema_fingerprint = r.u64()?;
        let n = r.u16()?;
        let b = r.u16()?;
        let m_features = r.u16()?;
        let m_inputs = r.u16()?;
        let total_bins = r.u32()?;
        let min_bin_rows = r.u32()?;

        let mut binned = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let feature = r.u16()?;
            let bins = match r.u8()? {
                0 => {
                    let count = r.u16()?;
                    let mut edges = Vec::with_capacity(count as usize);
                    for _ in 0..count {
                        edges.push(r.f32()?);
                    }
                    if edges.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::CorruptTable("edges not strictly increasing".into()));
                    }
                    FeatureBins::Numeric { edges }
                }
                1 => FeatureBins::Boolean,
                2 => FeatureBins::Categorical {
                    cardinality: r.u16()? as usize,
                },
                k => return Err(Error::CorruptTable(format!("bad bin kind {k}"))),
            };
            binned.push((feature, bins));
        }

        let mut inputs = Vec::with_capacity(m_inputs as usize);
        for _ in 0..m_inputs {
            let feature = r.u16()?;
            inputs.push(match r.u8()? {
                0 => TableInput::Numeric {
                    feature,
                    mean: r.f32()?,
                    stddev: r.f32()?,
                },
                1 => TableInput::Boolean { feature },
                2 => TableInput::OneHot {
                    feature,
                    code: r.u16()?,
                },
                k => return Err(Error::CorruptTable(format!("bad input kind {k}"))),
            });
        }

        let dict_count = r.u16()?;
        let mut dictionaries = Vec::with_capacity(dict_count as usize);
        for _ in 0..dict_count {
            let feature = r.u16()?;
            let entries = r.u16()?;
            let mut strings = Vec::with_capacity(entries as usize);
            for _ in 0..entries {
                let len = r.u16()? as usize;
                let s = std::str::from_utf8(r.take(len)?)
                    .map_err(|_| Error::CorruptTable("dictionary entry not utf-8".into()))?;
                strings.push(s.to_string());
            }
            dictionaries.push((feature, strings));
        }

        let entry_count = r.u32()?;
        let mut entries = Vec::with_capacity(entry_count as usize);
        let mut prev: Option<u32> = None;
        for _ in 0..entry_count {
            let bin = r.u32()?;
            if bin >= total_bins {
                return Err(Error::CorruptTable(format!("bin id {bin} out of range")));
            }
            if let Some(p) = prev {
                if bin <= p {
                    return Err(Error::CorruptTable("weight entries not sorted".into()));
                }
            }
            prev = Some(bin);
            let bias = r.f32()?;
            let mut weights = Vec::with_capacity(m_inputs as usize);
            for _ in 0..m_inputs {
                weights.push(r.f32()?);
            }
            entries.push(WeightEntry { bin, bias, weights });
        }
        r.done()?;

        Ok(TableImage {
            feature_count,
            schema_fingerprint,
            n,
            b,
            m_features,
            total_bins,
            min_bin_rows,
            binned,
            inputs,
            dictionaries,
            entries,
        })
    }
}

/// Section byte counts of a serialized first-stage table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableSizes {
    pub total_bytes: usize,
    pub header_bytes: usize,
    pub quantile_section_bytes: usize,
    /// Raw edge payload inside the quantile section (4 bytes per edge).
    pub edge_payload_bytes: usize,
    pub input_section_bytes: usize,
    pub dictionary_section_bytes: usize,
    pub weights_section_bytes: usize,
}

/// Inference-only first-stage model backed by a decoded config table.
///
/// Bin lookup goes through an open-addressing hash map built at load; the
/// digit computation, mixed-radix index, and dot product are implemented
/// here from table data, independent of the training-side scorer.
#[derive(Debug, Clone)]
pub struct FirstStageTable {
    image: TableImage,
    radices: Vec<u32>,
    /// Open addressing: slot -> entry index + 1, zero means empty.
    slots: Vec<u32>,
    mask: u64,
    /// Flat weight rows, `(1 + m_inputs)` floats per entry.
    rows: Vec<f32>,
    stride: usize,
}

fn mix_bin_id(id: u32) -> u64 {
    let mut z = (id as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl FirstStageTable {
    pub fn from_image(image: TableImage) -> Result<Self> {
        let radices: Vec<u32> = image
            .binned
            .iter()
            .map(|(_, bins)| match bins {
                FeatureBins::Numeric { edges } => edges.len() as u32 + 1,
                FeatureBins::Boolean => 2,
                FeatureBins::Categorical { cardinality } => *cardinality as u32 + 1,
            })
            .collect();
        let product = radices.iter().fold(1u64, |acc, &r| acc * r as u64);
        if product != image.total_bins as u64 {
            return Err(Error::CorruptTable(format!(
                "radix product {product} != header total_bins {}",
                image.total_bins
            )));
        }

        let stride = image.inputs.len() + 1;
        let capacity = (image.entries.len().max(1) * 2).next_power_of_two() as u64;
        let mask = capacity - 1;
        let mut slots = vec![0u32; capacity as usize];
        let mut rows = Vec::with_capacity(image.entries.len() * stride);
        for (i, e) in image.entries.iter().enumerate() {
            rows.push(e.bias);
            rows.extend_from_slice(&e.weights);
            let mut at = mix_bin_id(e.bin) & mask;
            while slots[at as usize] != 0 {
                at = (at + 1) & mask;
            }
            slots[at as usize] = i as u32 + 1;
        }

        Ok(Self {
            image,
            radices,
            slots,
            mask,
            rows,
            stride,
        })
    }

    pub fn image(&self) -> &TableImage {
        &self.image
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.image.to_bytes()
    }

    pub fn feature_count(&self) -> usize {
        self.image.feature_count as usize
    }

    pub fn schema_fingerprint(&self) -> u64 {
        self.image.schema_fingerprint
    }

    pub fn total_bins(&self) -> u64 {
        self.image.total_bins as u64
    }

    pub fn stored_bins(&self) -> usize {
        self.image.entries.len()
    }

    /// Code dictionary for a feature, if the table carries one.
    pub fn dictionary(&self, feature: usize) -> Option<&[String]> {
        self.image
            .dictionaries
            .iter()
            .find(|(f, _)| *f as usize == feature)
            .map(|(_, d)| d.as_slice())
    }

    fn digit(&self, which: usize, v: f64) -> u64 {
        match &self.image.binned[which].1 {
            FeatureBins::Numeric { edges } => {
                // lower bound: count of edges strictly below v (right-closed
                // cells, value on an edge goes to the lower cell)
                let mut lo = 0usize;
                let mut hi = edges.len();
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if (edges[mid] as f64) < v {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                lo as u64
            }
            FeatureBins::Boolean => u64::from(v != 0.0),
            FeatureBins::Categorical { cardinality } => {
                if v >= 0.0 && v < *cardinality as f64 {
                    v as u64
                } else {
                    *cardinality as u64
                }
            }
        }
    }

    /// Combined-bin id of a full-width row.
    pub fn bin_of(&self, row: &[f64]) -> u32 {
        let mut idx: u64 = 0;
        for (which, (feature, _)) in self.image.binned.iter().enumerate() {
            idx = idx * self.radices[which] as u64 + self.digit(which, row[*feature as usize]);
        }
        idx as u32
    }

    fn lookup(&self, bin: u32) -> Option<&[f32]> {
        let mut at = mix_bin_id(bin) & self.mask;
        loop {
            let slot = self.slots[at as usize];
            if slot == 0 {
                return None;
            }
            let entry = (slot - 1) as usize;
            if self.image.entries[entry].bin == bin {
                let start = entry * self.stride;
                return Some(&self.rows[start..start + self.stride]);
            }
            at = (at + 1) & self.mask;
        }
    }

    /// First-stage probability, or `None` on a miss.
    pub fn predict(&self, row: &[f64]) -> Option<f64> {
        let weights = self.lookup(self.bin_of(row))?;
        let mut z = weights[0] as f64;
        for (input, &w) in self.image.inputs.iter().zip(&weights[1..]) {
            let x = match *input {
                TableInput::Numeric { feature, mean, stddev } => {
                    (row[feature as usize] - mean as f64) / stddev as f64
                }
                TableInput::Boolean { feature } => row[feature as usize],
                TableInput::OneHot { feature, code } => {
                    f64::from(row[feature as usize] == code as f64)
                }
            };
            z += w as f64 * x;
        }
        Some(crate::first_stage::sigmoid(z))
    }

    /// Byte-count breakdown of the serialized form.
    pub fn size_breakdown(&self) -> TableSizes {
        let header_bytes = 4 + 2 + 2 + 8 + 2 + 2 + 2 + 2 + 4 + 4;
        let mut quantile = 0usize;
        let mut edge_payload = 0usize;
        for (_, bins) in &self.image.binned {
            quantile += 3; // feature index + kind tag
            match bins {
                FeatureBins::Numeric { edges } => {
                    quantile += 2 + 4 * edges.len();
                    edge_payload += 4 * edges.len();
                }
                FeatureBins::Boolean => {}
                FeatureBins::Categorical { .. } => quantile += 2,
            }
        }
        let input_section = self
            .image
            .inputs
            .iter()
            .map(|i| match i {
                TableInput::Numeric { .. } => 3 + 8,
                TableInput::Boolean { .. } => 3,
                TableInput::OneHot { .. } => 3 + 2,
            })
            .sum::<usize>();
        let dict_section = 2 + self
            .image
            .dictionaries
            .iter()
            .map(|(_, d)| 4 + d.iter().map(|s| 2 + s.len()).sum::<usize>())
            .sum::<usize>();
        let weights_section =
            4 + self.image.entries.len() * (4 + 4 * (1 + self.image.inputs.len()));
        TableSizes {
            total_bytes: header_bytes
                + quantile
                + input_section
                + dict_section
                + weights_section
                + 4,
            header_bytes,
            quantile_section_bytes: quantile,
            edge_payload_bytes: edge_payload,
            input_section_bytes: input_section,
            dictionary_section_bytes: dict_section,
            weights_section_bytes: weights_section,
        }
    }
}

/// Serialize a (filtered) first-stage model. Returns the byte count written.
pub fn export_first_stage(model: &LRwBinsModel, path: impl AsRef<Path>) -> Result<u64> {
    let bytes = TableImage::from_model(model).to_bytes();
    fs::write(path, &bytes)?;
    Ok(bytes.len() as u64)
}

/// Load a first-stage table for inference.
pub fn import_first_stage(path: impl AsRef<Path>) -> Result<FirstStageTable> {
    let bytes = fs::read(path)?;
    FirstStageTable::from_image(TableImage::from_bytes(&bytes)?)
}

/// Rebuild a [`BinSpec`] from a decoded image (used by tests and tools that
/// want training-side semantics for an imported table).
pub fn image_bin_spec(image: &TableImage) -> Result<BinSpec> {
    let features = image
        .binned
        .iter()
        .map(|(feature, bins)| BinnedFeature {
            feature: *feature as usize,
            bins: bins.clone(),
        })
        .collect();
    BinSpec::new(features, image.b as usize)
}

// ---------------------------------------------------------------------------
// Second-stage table
// ---------------------------------------------------------------------------

/// Serialize the GBDT ensemble. Returns the byte count written.
pub fn export_second_stage(model: &GbdtModel, path: impl AsRef<Path>) -> Result<u64> {
    let bytes = second_stage_bytes(model);
    fs::write(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn second_stage_bytes(model: &GbdtModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(&SECOND_STAGE_MAGIC);
    w.u16(FORMAT_VERSION);
    w.u16(model.feature_count() as u16);
    w.u64(model.schema_fingerprint());
    w.f64(model.base_score());
    w.u32(model.trees().len() as u32);
    for tree in model.trees() {
        w.u32(tree.nodes().len() as u32);
        for node in tree.nodes() {
            match node {
                Node::Leaf { value } => {
                    w.u8(0);
                    w.f64(*value);
                }
                Node::Split {
                    feature,
                    kind: SplitKind::NumericLt(th),
                    left,
                    right,
                    ..
                } => {
                    w.u8(1);
                    w.u16(*feature);
                    w.f64(*th);
                    w.u32(*left);
                    w.u32(*right);
                }
                Node::Split {
                    feature,
                    kind: SplitKind::CategoryEq(code),
                    left,
                    right,
                    ..
                } => {
                    w.u8(2);
                    w.u16(*feature);
                    w.u16(*code);
                    w.u32(*left);
                    w.u32(*right);
                }
            }
        }
    }
    w.seal()
}

pub fn import_second_stage(path: impl AsRef<Path>) -> Result<GbdtModel> {
    let bytes = fs::read(path)?;
    second_stage_from_bytes(&bytes)
}

pub fn second_stage_from_bytes(bytes: &[u8]) -> Result<GbdtModel> {
    let mut r = open_table(bytes, &SECOND_STAGE_MAGIC)?;
    let feature_count = r.u16()?;
    let fingerprint = r.u64()?;
    let base_score = r.f64()?;
    let num_trees = r.u32()?;
    let mut trees = Vec::with_capacity(num_trees as usize);
    for _ in 0..num_trees {
        let node_count = r.u32()?;
        let mut nodes = Vec::with_capacity(node_count as usize);
        for _ in 0..node_count {
            let node = match r.u8()? {
                0 => Node::Leaf { value: r.f64()? },
                1 => {
                    let feature = r.u16()?;
                    let th = r.f64()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    Node::Split {
                        feature,
                        kind: SplitKind::NumericLt(th),
                        left,
                        right,
                        gain: 0.0,
                    }
                }
                2 => {
                    let feature = r.u16()?;
                    let code = r.u16()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    Node::Split {
                        feature,
                        kind: SplitKind::CategoryEq(code),
                        left,
                        right,
                        gain: 0.0,
                    }
                }
                k => return Err(Error::CorruptTable(format!("bad node kind {k}"))),
            };
            nodes.push(node);
        }
        // structural check: child indices in range
        for node in &nodes {
            if let Node::Split { left, right, .. } = node {
                if *left as usize >= nodes.len() || *right as usize >= nodes.len() {
                    return Err(Error::CorruptTable("child index out of range".into()));
                }
            }
        }
        trees.push(Tree::from_nodes(nodes));
    }
    r.done()?;
    Ok(GbdtModel::from_parts(
        trees,
        base_score,
        feature_count,
        fingerprint,
    ))
}
