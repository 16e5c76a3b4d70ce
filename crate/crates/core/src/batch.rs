//! Points and sample batches, with binary and CSV serialization.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! offset  size  field
//!      0     8  magic: b"SYMCLTB\x01" (unweighted) or b"SYMCLTW\x01" (weighted)
//!      8     8  n     (u64, dimension)
//!     16     8  N     (u64, rows)
//!     24     8  seed  (u64)
//!     32  8·N·n rows, row-major f64
//!      …    8·N  weights, f64 (weighted files only)
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Deref;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::stream_rng;
use crate::samplers::DistributionSpec;

pub const MAGIC_UNWEIGHTED: [u8; 8] = *b"SYMCLTB\x01";
pub const MAGIC_WEIGHTED: [u8; 8] = *b"SYMCLTW\x01";
pub const HEADER_BYTES: usize = 32;

/// A point of ℝⁿ with `n ≥ 2` finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return domain(format!("vectors need n >= 2, got n = {}", coords.len()));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return domain("vector has non-finite coordinates");
        }
        Ok(Vector(coords))
    }

    /// Standard basis vector `e_i` (0-based).
    pub fn basis(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return domain(format!("basis index {i} out of range for n = {n}"));
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Vector::new(v)
    }

    /// The principal diagonal `n^{-1/2}(1, …, 1)`.
    pub fn diagonal(n: usize) -> Result<Self> {
        Vector::new(vec![1.0 / (n as f64).sqrt(); n])
    }

    /// A direction uniform on the unit sphere, from a Gaussian draw.
    pub fn random_unit(n: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, u64::MAX);
        Vector::new(random_unit_with(n, &mut rng))?.normalized()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm2();
        if norm == 0.0 {
            return domain("cannot normalize the zero vector");
        }
        Vector::new(self.0.iter().map(|v| v / norm).collect())
    }

    /// Check `‖self‖₂ = 1` to `tol`.
    pub fn ensure_unit(&self, tol: f64) -> Result<()> {
        let norm = self.norm2();
        if (norm - 1.0).abs() > tol {
            return domain(format!("expected a unit vector, got ‖θ‖₂ = {norm}"));
        }
        Ok(())
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub(crate) fn random_unit_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `N` samples of an `n`-dimensional law, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    data: Vec<f64>,
    n: usize,
    count: usize,
    seed: u64,
    weights: Option<Vec<f64>>,
    spec: Option<DistributionSpec>,
}

impl SampleBatch {
    pub fn from_rows(data: Vec<f64>, n: usize, seed: u64) -> Result<Self> {
        if n == 0 || data.len() % n != 0 {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: data.len(),
            });
        }
        let count = data.len() / n;
        if count == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return domain("sample batch has non-finite entries");
        }
        Ok(SampleBatch {
            data,
            n,
            count,
            seed,
            weights: None,
            spec: None,
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.count {
            return Err(Error::DimensionMismatch {
                expected: self.count,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return domain("weights must be positive and finite");
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn with_spec(mut self, spec: DistributionSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> Option<&DistributionSpec> {
        self.spec.as_ref()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let magic = if self.weights.is_some() {
            MAGIC_WEIGHTED
        } else {
            MAGIC_UNWEIGHTED
        };
        w.write_all(&magic)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.count as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        if let Some(weights) = &self.weights {
            for v in weights {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut header = [0u8; HEADER_BYTES];
        r.read_exact(&mut header)?;
        let weighted = match &header[..8] {
            m if m == MAGIC_UNWEIGHTED => false,
            m if m == MAGIC_WEIGHTED => true,
            _ => return Err(Error::Format("not a sample batch file (bad magic)".into())),
        };
        let word = |k: usize| u64::from_le_bytes(header[8 * k..8 * k + 8].try_into().unwrap());
        let (n, count, seed) = (word(1) as usize, word(2) as usize, word(3));
        let read_f64s = |r: &mut BufReader<R>, len: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(len);
            let mut buf = [0u8; 8];
            for _ in 0..len {
                r.read_exact(&mut buf)?;
                out.push(f64::from_le_bytes(buf));
            }
            Ok(out)
        };
        let total = n
            .checked_mul(count)
            .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
        let data = read_f64s(&mut r, total)?;
        let batch = SampleBatch::from_rows(data, n, seed)?;
        if weighted {
            let weights = read_f64s(&mut r, count)?;
            batch.with_weights(weights)
        } else {
            Ok(batch)
        }
    }

    /// CSV with a header `x1,…,xn[,weight]`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        if self.weights.is_some() {
            header.push("weight".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for (i, row) in self.rows().enumerate() {
            let mut fields: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            if let Some(weights) = &self.weights {
                fields.push(format!("{:e}", weights[i]));
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, seed: u64) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty CSV".into()))??;
        let columns: Vec<&str> = header.split(',').collect();
        let weighted = columns.last() == Some(&"weight");
        let n = columns.len() - usize::from(weighted);
        let mut data = Vec::new();
        let mut weights = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("bad CSV number: {e}")))?;
            if values.len() != columns.len() {
                return Err(Error::DimensionMismatch {
                    expected: columns.len(),
                    got: values.len(),
                });
            }
            data.extend_from_slice(&values[..n]);
            if weighted {
                weights.push(values[n]);
            }
        }
        let batch = SampleBatch::from_rows(data, n, seed)?;
        if weighted {
            batch.with_weights(weights)
        } else {
            Ok(batch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_invariants() {
        assert!(Vector::new(vec![1.0]).is_err());
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        let d = Vector::diagonal(16).unwrap();
        assert!((d.norm2() - 1.0).abs() < 1e-15);
        let r = Vector::random_unit(40, 3).unwrap();
        assert!((r.norm2() - 1.0).abs() < 1e-14);
        assert_eq!(r, Vector::random_unit(40, 3).unwrap());
    }

    #[test]
    fn header_is_32_bytes_and_round_trips() {
        let batch = SampleBatch::from_rows(vec![1.0, -2.5, 3.0, 0.25], 2, 99).unwrap();
        let mut bytes = Vec::new();
        batch.write_binary(&mut bytes).unwrap();
        assert_eq!(bytes.len(), HEADER_BYTES + 4 * 8);
        assert_eq!(&bytes[..8], b"SYMCLTB\x01");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 99);
        assert_eq!(f64::from_le_bytes(bytes[40..48].try_into().unwrap()), -2.5);
        let back = SampleBatch::read_binary(&bytes[..]).unwrap();
        assert_eq!(back, batch);
    }

    #[test]
    fn weighted_files_carry_weights() {
        let batch = SampleBatch::from_rows(vec![1.0, 2.0, 3.0, 4.0], 2, 1)
            .unwrap()
            .with_weights(vec![0.5, 1.5])
            .unwrap();
        let mut bytes = Vec::new();
        batch.write_binary(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"SYMCLTW\x01");
        let back = SampleBatch::read_binary(&bytes[..]).unwrap();
        assert_eq!(back.weights(), Some(&[0.5, 1.5][..]));

        let mut csv = Vec::new();
        batch.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv.clone()).unwrap();
        assert!(text.starts_with("x1,x2,weight\n"));
        let parsed = SampleBatch::read_csv(&csv[..], 1).unwrap();
        assert_eq!(parsed, batch);
    }

    #[test]
    fn rejects_bad_magic_and_bad_shapes() {
        let bytes = [0u8; 40];
        assert!(matches!(SampleBatch::read_binary(&bytes[..]), Err(Error::Format(_))));
        assert!(SampleBatch::from_rows(vec![1.0, 2.0, 3.0], 2, 0).is_err());
        assert!(SampleBatch::from_rows(vec![], 2, 0).is_err());
    }
}
