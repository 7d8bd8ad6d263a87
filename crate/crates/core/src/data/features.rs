//! Extracted features with target labels, plus the FSET binary layout.
//!
//! FSET layout (all little-endian):
//!
//! ```text
//! b"FSET" | u32 version = 1 | u64 N | u64 D | u64 C
//! N*D f64 features (row-major) | N u32 labels | N*C f64 source probabilities (if C > 0)
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::DataError;

pub const FSET_MAGIC: &[u8; 4] = b"FSET";
pub const FSET_VERSION: u32 = 1;

const PROB_TOLERANCE: f64 = 1e-6;

/// Features extracted by a source model on target data, with labels densified
/// to `[0, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    label_names: Vec<String>,
    source_probs: Option<DMatrix<f64>>,
}

impl FeatureSet {
    /// Builds a feature set from raw labels. Distinct labels are mapped to
    /// `0..K` in ascending order (numeric when every label parses as an
    /// integer, lexicographic otherwise).
    pub fn new<S: AsRef<str>>(
        features: DMatrix<f64>,
        raw_labels: &[S],
        source_probs: Option<DMatrix<f64>>,
    ) -> Result<Self, DataError> {
        let (labels, label_names) = densify(raw_labels);
        Self::from_dense(features, labels, label_names, source_probs)
    }

    /// Builds a feature set from labels that are already dense indices.
    pub fn from_dense(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        label_names: Vec<String>,
        source_probs: Option<DMatrix<f64>>,
    ) -> Result<Self, DataError> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(DataError::Format(format!(
                "{} labels for {n} feature rows",
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Format("non-finite feature value".into()));
        }
        let k = label_names.len();
        let mut seen = vec![false; k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(DataError::Format(format!(
                    "label {l} at row {i} is outside [0, {k})"
                )));
            }
            seen[l] = true;
        }
        if let Some(absent) = seen.iter().position(|s| !s) {
            return Err(DataError::Format(format!("class {absent} has no samples")));
        }
        if let Some(p) = &source_probs {
            if p.nrows() != n {
                return Err(DataError::Format(format!(
                    "{} probability rows for {n} samples",
                    p.nrows()
                )));
            }
            for (i, row) in p.row_iter().enumerate() {
                if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(DataError::Format(format!(
                        "negative or non-finite probability in row {i}"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOLERANCE {
                    return Err(DataError::Format(format!(
                        "probability row {i} sums to {sum}"
                    )));
                }
            }
        }
        Ok(Self {
            features,
            labels,
            label_names,
            source_probs,
        })
    }

    /// N x D feature matrix.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Original label for each dense class index.
    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// N x C source-class probabilities, if supplied.
    pub fn source_probs(&self) -> Option<&DMatrix<f64>> {
        self.source_probs.as_ref()
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    /// Number of samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn densify<S: AsRef<str>>(raw: &[S]) -> (Vec<usize>, Vec<String>) {
    let numeric: Option<Vec<i64>> = raw.iter().map(|s| s.as_ref().trim().parse().ok()).collect();
    let mut names: Vec<String> = match &numeric {
        Some(values) => {
            let mut v = values.clone();
            v.sort_unstable();
            v.dedup();
            v.into_iter().map(|x| x.to_string()).collect()
        }
        None => {
            let mut v: Vec<String> = raw.iter().map(|s| s.as_ref().trim().to_string()).collect();
            v.sort();
            v.dedup();
            v
        }
    };
    names.shrink_to_fit();
    let index: BTreeMap<String, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    let labels = match numeric {
        Some(values) => values.iter().map(|v| index[&v.to_string()]).collect(),
        None => raw.iter().map(|s| index[s.as_ref().trim()]).collect(),
    };
    (labels, names)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DataError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| DataError::Format(format!("truncated payload while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, DataError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64, DataError> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>, DataError> {
        let len = count
            .checked_mul(8)
            .ok_or_else(|| DataError::Format(format!("{what} size overflows")))?;
        let b = self.take(len, what)?;
        Ok(b
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Decodes an FSET byte buffer.
pub fn decode_fset(bytes: &[u8]) -> Result<FeatureSet, DataError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != FSET_MAGIC {
        return Err(DataError::Format("magic mismatch, expected FSET".into()));
    }
    let version = cur.u32("version")?;
    if version != FSET_VERSION {
        return Err(DataError::Format(format!("unsupported FSET version {version}")));
    }
    let dim = |v: u64| usize::try_from(v).map_err(|_| DataError::Format("dimension overflow".into()));
    let n = dim(cur.u64("N")?)?;
    let d = dim(cur.u64("D")?)?;
    let c = dim(cur.u64("C")?)?;
    let nd = n
        .checked_mul(d)
        .ok_or_else(|| DataError::Format("N*D overflows".into()))?;
    let features = cur.f64s(nd, "features")?;
    let raw_labels = cur.take(
        n.checked_mul(4)
            .ok_or_else(|| DataError::Format("N overflows".into()))?,
        "labels",
    )?;
    let labels: Vec<String> = raw_labels
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")).to_string())
        .collect();
    let probs = if c > 0 {
        let nc = n
            .checked_mul(c)
            .ok_or_else(|| DataError::Format("N*C overflows".into()))?;
        Some(DMatrix::from_row_slice(n, c, &cur.f64s(nc, "source probabilities")?))
    } else {
        None
    };
    if cur.pos != bytes.len() {
        return Err(DataError::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }
    FeatureSet::new(DMatrix::from_row_slice(n, d, &features), &labels, probs)
}

/// Encodes a feature set as FSET. Labels are written as their original
/// integer names when those are integers, dense indices otherwise.
pub fn encode_fset(fs: &FeatureSet) -> Vec<u8> {
    let (n, d) = fs.features.shape();
    let c = fs.source_probs.as_ref().map_or(0, |p| p.ncols());
    let mut out = Vec::with_capacity(32 + 8 * n * (d + c) + 4 * n);
    out.extend_from_slice(FSET_MAGIC);
    out.extend_from_slice(&FSET_VERSION.to_le_bytes());
    for v in [n, d, c] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for i in 0..n {
        for j in 0..d {
            out.extend_from_slice(&fs.features[(i, j)].to_le_bytes());
        }
    }
    for &l in &fs.labels {
        let raw = fs.label_names[l].parse::<u32>().unwrap_or(l as u32);
        out.extend_from_slice(&raw.to_le_bytes());
    }
    if let Some(p) = &fs.source_probs {
        for i in 0..n {
            for j in 0..c {
                out.extend_from_slice(&p[(i, j)].to_le_bytes());
            }
        }
    }
    out
}

pub fn save_fset(fs: &FeatureSet, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| DataError::io(path, e))?);
    w.write_all(&encode_fset(fs))
        .and_then(|_| w.flush())
        .map_err(|e| DataError::io(path, e))
}

/// Parses the CSV fallback: columns `f0..f{D-1},label[,p0..p{C-1}]`.
pub fn read_feature_csv<R: Read>(reader: R) -> Result<FeatureSet, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| DataError::Parse {
            line: 1,
            message: "missing `label` column".into(),
        })?;
    let d = label_col;
    let c = header.len() - label_col - 1;
    for (j, h) in header[..d].iter().enumerate() {
        if *h != format!("f{j}") {
            return Err(DataError::Parse {
                line: 1,
                message: format!("expected column `f{j}`, found `{h}`"),
            });
        }
    }
    for (j, h) in header[label_col + 1..].iter().enumerate() {
        if *h != format!("p{j}") {
            return Err(DataError::Parse {
                line: 1,
                message: format!("expected column `p{j}`, found `{h}`"),
            });
        }
    }

    let mut feats = Vec::new();
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |j: usize| -> Result<f64, DataError> {
            let raw = record.get(j).unwrap_or("").trim();
            raw.parse().map_err(|_| DataError::Parse {
                line,
                message: format!("invalid number `{raw}` in column `{}`", header[j]),
            })
        };
        for j in 0..d {
            feats.push(num(j)?);
        }
        labels.push(record.get(label_col).unwrap_or("").trim().to_string());
        for j in 0..c {
            probs.push(num(label_col + 1 + j)?);
        }
    }
    let n = labels.len();
    let probs = (c > 0).then(|| DMatrix::from_row_slice(n, c, &probs));
    FeatureSet::new(DMatrix::from_row_slice(n, d, &feats), &labels, probs)
}

/// Loads a feature set, trying FSET first and the CSV fallback when the file
/// does not start with the FSET magic.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureSet, DataError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| DataError::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| DataError::io(path, e))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv && !bytes.starts_with(FSET_MAGIC) {
        read_feature_csv(bytes.as_slice())
    } else {
        decode_fset(&bytes)
    }
}
