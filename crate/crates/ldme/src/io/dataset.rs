//! In-memory dataset and its binary and CSV encodings.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! "LDME1\n" | N: u64 | d: u64 | N·d f64 row-major | [count: u64 | count × u64 inlier indices]
//! ```

use std::fs;
use std::path::Path;

use super::IoError;

pub const MAGIC: &[u8; 6] = b"LDME1\n";

/// `N` points in `R^d`, row-major, with optional ground-truth inlier indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
    inliers: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self, IoError> {
        if values.len() != n * d {
            return Err(IoError::Shape { expected: n * d, got: values.len() });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(IoError::NonFinite { index: pos });
        }
        Ok(Self { n, d, values, inliers: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, IoError> {
        let d = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(IoError::Shape { expected: d, got: bad.len() });
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn with_inliers(mut self, inliers: Vec<usize>) -> Result<Self, IoError> {
        if let Some(&bad) = inliers.iter().find(|&&i| i >= self.n) {
            return Err(IoError::InlierOutOfRange { index: bad, n: self.n });
        }
        self.inliers = Some(inliers);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn inliers(&self) -> Option<&[usize]> {
        self.inliers.as_deref()
    }

    /// Mean of the listed rows.
    pub fn mean_of(&self, idx: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for &i in idx {
            for (a, b) in m.iter_mut().zip(self.row(i)) {
                *a += b;
            }
        }
        let c = 1.0 / idx.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v *= c);
        m
    }

    /// Copy with every entry multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { n: self.n, d: self.d, values: self.values.iter().map(|v| v * s).collect(), inliers: self.inliers.clone() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(22 + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&(self.d as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(idx) = &self.inliers {
            out.extend_from_slice(&(idx.len() as u64).to_le_bytes());
            for &i in idx {
                out.extend_from_slice(&(i as u64).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IoError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(MAGIC.len(), "magic")?;
        if magic != MAGIC {
            return Err(IoError::BadMagic { offset: 0 });
        }
        let n = r.u64("row count")? as usize;
        let d = r.u64("column count")? as usize;
        let total = n.checked_mul(d).ok_or(IoError::Truncated { offset: r.pos, what: "payload" })?;
        let mut values = Vec::with_capacity(total.min(bytes.len() / 8));
        for idx in 0..total {
            let off = r.pos;
            let v = f64::from_le_bytes(r.take(8, "payload")?.try_into().expect("eight bytes"));
            if !v.is_finite() {
                return Err(IoError::NonFiniteAt { offset: off, index: idx });
            }
            values.push(v);
        }
        let mut ds = Self::new(n, d, values)?;
        if r.pos < bytes.len() {
            let count = r.u64("inlier count")? as usize;
            let mut idx = Vec::with_capacity(count.min(bytes.len() / 8));
            for _ in 0..count {
                let off = r.pos;
                let i = r.u64("inlier index")? as usize;
                if i >= n {
                    return Err(IoError::InlierAt { offset: off, index: i, n });
                }
                idx.push(i);
            }
            if r.pos != bytes.len() {
                return Err(IoError::TrailingBytes { offset: r.pos });
            }
            ds.inliers = Some(idx);
        }
        Ok(ds)
    }

    pub fn write_binary(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_bytes()).map_err(|e| IoError::Fs(path.display().to_string(), e.to_string()))
    }

    pub fn read_binary(path: &Path) -> Result<Self, IoError> {
        let bytes = fs::read(path).map_err(|e| IoError::Fs(path.display().to_string(), e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    /// CSV with header `x1,…,xd`; values use the shortest round-trip decimal
    /// form.
    pub fn to_csv(&self) -> Result<String, IoError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
        w.write_record(&header).map_err(|e| IoError::Csv(e.to_string()))?;
        for i in 0..self.n {
            let rec: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            w.write_record(&rec).map_err(|e| IoError::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| IoError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| IoError::Csv(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self, IoError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| IoError::Csv(e.to_string()))?.clone();
        let d = header.len();
        for (j, h) in header.iter().enumerate() {
            if h.trim() != format!("x{}", j + 1) {
                return Err(IoError::Csv(format!("unexpected header column {:?} at position {}", h, j + 1)));
            }
        }
        let mut values = Vec::new();
        let mut n = 0;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| IoError::Csv(e.to_string()))?;
            if rec.len() != d {
                return Err(IoError::Csv(format!("record {} has {} fields, expected {}", line + 1, rec.len(), d)));
            }
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| IoError::Csv(format!("record {}: cannot parse {:?}", line + 1, field)))?;
                values.push(v);
            }
            n += 1;
        }
        Self::new(n, d, values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_csv()?).map_err(|e| IoError::Fs(path.display().to_string(), e.to_string()))
    }

    pub fn read_csv(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| IoError::Fs(path.display().to_string(), e.to_string()))?;
        Self::from_csv(&text)
    }

    /// Reads either encoding, chosen by the `.csv` extension.
    pub fn read_any(path: &Path) -> Result<Self, IoError> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::read_csv(path)
        } else {
            Self::read_binary(path)
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &'static str) -> Result<&'a [u8], IoError> {
        if self.pos + len > self.bytes.len() {
            return Err(IoError::Truncated { offset: self.pos, what });
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("eight bytes")))
    }
}
