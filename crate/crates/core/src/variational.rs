//! Per-entry densities `q_{k,i}`: a point mass for observed cells, a
//! truncated normal with cached moments for censored ones.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{CensoringBound, Dataset, TargetEntry};
use crate::truncnorm::{TnMoments, TruncatedNormal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TnEntry {
    pub mu: f64,
    pub sigma: f64,
    pub bound: CensoringBound,
    pub moments: TnMoments,
}

impl TnEntry {
    pub fn new(mu: f64, sigma: f64, bound: CensoringBound) -> Result<Self> {
        let moments = TruncatedNormal::new(mu, sigma, bound)?.moments();
        Ok(TnEntry {
            mu,
            sigma,
            bound,
            moments,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QEntry {
    Point(f64),
    TruncNorm(TnEntry),
}

impl QEntry {
    pub fn mean(&self) -> f64 {
        match self {
            QEntry::Point(v) => *v,
            QEntry::TruncNorm(t) => t.moments.mean,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            QEntry::Point(v) => v * v,
            QEntry::TruncNorm(t) => t.moments.second_moment,
        }
    }

    /// `E[t^2] - E[t]^2`, taken from the stable cached value.
    pub fn variance(&self) -> f64 {
        match self {
            QEntry::Point(_) => 0.0,
            QEntry::TruncNorm(t) => t.moments.variance,
        }
    }

    /// Differential entropy; point masses contribute nothing to the
    /// objective so they report zero.
    pub fn entropy(&self) -> f64 {
        match self {
            QEntry::Point(_) => 0.0,
            QEntry::TruncNorm(t) => t.moments.entropy,
        }
    }
}

/// The m x n grid of per-entry densities, target-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    m: usize,
    n: usize,
    entries: Vec<QEntry>,
}

impl VariationalState {
    /// Point masses on observed entries, `TN(fill, sigma, bound)` on censored
    /// ones, with `fill` the nearest finite bound.
    pub fn initial(data: &Dataset, sigma: f64) -> Result<Self> {
        let entries = data
            .entries()
            .iter()
            .map(|e| match *e {
                TargetEntry::Observed(v) => Ok(QEntry::Point(v)),
                TargetEntry::Censored(b) => Ok(QEntry::TruncNorm(TnEntry::new(b.nearest_finite(), sigma, b)?)),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VariationalState {
            m: data.m(),
            n: data.n(),
            entries,
        })
    }

    pub fn from_entries(m: usize, n: usize, entries: Vec<QEntry>) -> Result<Self> {
        if entries.len() != m * n {
            return Err(Error::Dimension("variational grid must have m * n entries"));
        }
        Ok(VariationalState { m, n, entries })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize) -> &QEntry {
        &self.entries[k * self.n + i]
    }

    pub(crate) fn set(&mut self, k: usize, i: usize, entry: QEntry) {
        self.entries[k * self.n + i] = entry;
    }

    /// Replaces a censored entry's density. Fails on point masses.
    pub fn set_truncated(&mut self, k: usize, i: usize, mu: f64, sigma: f64) -> Result<TnEntry> {
        match *self.get(k, i) {
            QEntry::Point(_) => Err(Error::NotCensored { target: k, example: i }),
            QEntry::TruncNorm(old) => {
                let entry = TnEntry::new(mu, sigma, old.bound)?;
                self.set(k, i, QEntry::TruncNorm(entry));
                Ok(entry)
            }
        }
    }

    pub fn entries(&self) -> &[QEntry] {
        &self.entries
    }

    pub fn mean(&self, k: usize, i: usize) -> f64 {
        self.get(k, i).mean()
    }

    /// Matrix of means, target-major.
    pub fn means(&self) -> Vec<f64> {
        self.entries.iter().map(QEntry::mean).collect()
    }

    /// Largest relative disagreement between the cached moments and a fresh
    /// evaluation from `(mu, sigma, bound)`.
    pub fn cache_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for e in &self.entries {
            if let QEntry::TruncNorm(t) = e {
                let fresh = TruncatedNormal::new(t.mu, t.sigma, t.bound)
                    .map(|tn| tn.moments())
                    .unwrap_or(t.moments);
                let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
                worst = worst
                    .max(rel(t.moments.mean, fresh.mean))
                    .max(rel(t.moments.second_moment, fresh.second_moment));
            }
        }
        worst
    }
}
