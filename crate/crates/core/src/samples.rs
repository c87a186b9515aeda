use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which of the three extraction strategies produced a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Spatial,
    Temporal,
    Spectral,
}

/// An ordered set of fixed-dimension points drawn from one data stream.
///
/// Points are stored row-major in one flat buffer; point `i` occupies
/// `data[i * dim..(i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
    pub source_id: String,
    pub domain: Domain,
}

impl SampleSet {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("point dimension must be at least 1"));
        }
        if data.is_empty() {
            return Err(Error::input("sample set is empty"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::input(format!(
                "buffer of {} values is not a whole number of {dim}-dimensional points",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite coordinate in point {}",
                pos / dim
            )));
        }
        Ok(Self {
            dim,
            data,
            source_id: String::new(),
            domain: Domain::Temporal,
        })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::input("sample set is empty"))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::input(format!(
                    "point {i} has dimension {} but the set uses {dim}",
                    p.len()
                )));
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(dim, data)
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec())
    }

    pub fn with_source(mut self, source_id: impl Into<String>, domain: Domain) -> Self {
        self.source_id = source_id.into();
        self.domain = domain;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Coordinatewise mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for p in self.points() {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// The first `k` points (all of them when `k >= len`).
    pub fn head(&self, k: usize) -> SampleSet {
        let k = k.min(self.len());
        SampleSet {
            dim: self.dim,
            data: self.data[..k * self.dim].to_vec(),
            source_id: self.source_id.clone(),
            domain: self.domain,
        }
    }

    /// One coordinate of every point as a one-dimensional set.
    pub fn channel(&self, c: usize) -> SampleSet {
        assert!(c < self.dim, "channel {c} out of range for dim {}", self.dim);
        SampleSet {
            dim: 1,
            data: self.points().map(|p| p[c]).collect(),
            source_id: self.source_id.clone(),
            domain: self.domain,
        }
    }

    /// Adds `offset` to every point.
    pub fn translated(&self, offset: &[f64]) -> SampleSet {
        assert_eq!(offset.len(), self.dim);
        let mut data = self.data.clone();
        for p in data.chunks_exact_mut(self.dim) {
            for (v, o) in p.iter_mut().zip(offset) {
                *v += o;
            }
        }
        SampleSet {
            dim: self.dim,
            data,
            source_id: self.source_id.clone(),
            domain: self.domain,
        }
    }

    /// Concatenates two sets of the same dimension.
    pub fn pooled(&self, other: &SampleSet) -> Result<SampleSet> {
        check_same_dim(self, other)?;
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(SampleSet {
            dim: self.dim,
            data,
            source_id: self.source_id.clone(),
            domain: self.domain,
        })
    }
}

pub(crate) fn check_same_dim(a: &SampleSet, b: &SampleSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(SampleSet::from_points(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(SampleSet::from_scalars(&[1.0, f64::NAN]).is_err());
        assert!(SampleSet::from_scalars(&[]).is_err());
    }

    #[test]
    fn mean_and_translate() {
        let s = SampleSet::from_points(&[[1.0, 10.0], [3.0, 20.0]]).unwrap();
        assert_eq!(s.mean(), vec![2.0, 15.0]);
        let t = s.translated(&[1.0, -15.0]);
        assert_eq!(t.mean(), vec![3.0, 0.0]);
        assert_eq!(s.channel(1).as_flat(), &[10.0, 20.0]);
    }
}
