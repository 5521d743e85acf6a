//! Finite pointed metric spaces and the pointed Gromov-Hausdorff distance.
//!
//! A [`PointedFiniteMetricSpace`] is the desk-scale stand-in for a pointed
//! proper metric space: a finite sample with a full distance matrix and a
//! basepoint. The pointed GH distance is the series
//! `sum_n 2^-n min(1, d_n)` where `d_n` compares the closed `n`-balls around
//! the basepoints. Two routes are provided:
//!
//! - [`exact_pointed_gh_small`]: exhaustive search for tiny spaces, used as
//!   an oracle.
//! - [`gh_bounds`]: certified lower bound plus a correspondence-search upper
//!   bound that scales to a few hundred points.

mod bounds;
mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bounds::{gh_bounds, gh_bounds_hinted, gh_bounds_with, GhBounds, SearchConfig};
pub use oracle::{exact_pointed_gh_small, ORACLE_MAX_PAIRS};

/// Absolute tolerance used when validating symmetry and triangle inequalities.
pub const TRIANGLE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct PointedFiniteMetricSpace {
    points: Vec<String>,
    dist: Vec<f64>,
    basepoint: usize,
}

impl PointedFiniteMetricSpace {
    /// Builds a space from a full distance matrix, validating every invariant.
    pub fn new(points: Vec<String>, dist: Vec<Vec<f64>>, basepoint: usize) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "metric space needs at least one point".into(),
            ));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput(format!(
                "distance matrix must be {n}x{n} to match the point list"
            )));
        }
        let flat: Vec<f64> = dist.into_iter().flatten().collect();
        let space = Self {
            points,
            dist: flat,
            basepoint,
        };
        space.validate()?;
        Ok(space)
    }

    /// Builds a space with generated labels `"0"`, `"1"`, ...
    pub fn from_matrix(dist: Vec<Vec<f64>>, basepoint: usize) -> Result<Self> {
        let labels = (0..dist.len()).map(|i| i.to_string()).collect();
        Self::new(labels, dist, basepoint)
    }

    /// Points on the real line with the absolute-difference metric.
    pub fn from_line(coords: &[f64], basepoint: usize) -> Result<Self> {
        let dist = coords
            .iter()
            .map(|a| coords.iter().map(|b| (a - b).abs()).collect())
            .collect();
        Self::from_matrix(dist, basepoint)
    }

    fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.basepoint >= n {
            return Err(Error::InvalidInput(format!(
                "basepoint {} out of range for {n} points",
                self.basepoint
            )));
        }
        for i in 0..n {
            if self.d(i, i).abs() > TRIANGLE_TOL {
                return Err(Error::InvalidInput(format!("dist[{i}][{i}] is not zero")));
            }
            for j in 0..n {
                let dij = self.d(i, j);
                if !dij.is_finite() || dij < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "dist[{i}][{j}] = {dij} is not a nonnegative real"
                    )));
                }
                if (dij - self.d(j, i)).abs() > TRIANGLE_TOL {
                    return Err(Error::InvalidInput(format!(
                        "dist is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let dij = self.d(i, j);
                for k in 0..n {
                    if self.d(i, k) > dij + self.d(j, k) + TRIANGLE_TOL {
                        return Err(Error::InvalidInput(format!(
                            "triangle inequality fails for ({i}, {j}, {k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    pub fn labels(&self) -> &[String] {
        &self.points
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.points.len() + j]
    }

    /// Distance from the basepoint.
    #[inline]
    pub fn radius_of(&self, i: usize) -> f64 {
        self.d(self.basepoint, i)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.dist[i * n..(i + 1) * n]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Hausdorff distance between two nonempty subsets given by index lists.
    pub fn hausdorff_distance(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Domain(
                "Hausdorff distance needs nonempty subsets".into(),
            ));
        }
        if let Some(&bad) = a.iter().chain(b).find(|&&i| i >= self.len()) {
            return Err(Error::Domain(format!(
                "index {bad} is not a point of the space"
            )));
        }
        let one_sided = |from: &[usize], to: &[usize]| {
            from.iter()
                .map(|&p| {
                    to.iter()
                        .map(|&q| self.d(p, q))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        Ok(one_sided(a, b).max(one_sided(b, a)))
    }

    /// Restriction to a subset of indices; `basepoint` is a position in `indices`.
    pub fn restrict(&self, indices: &[usize], basepoint: usize) -> Self {
        let n = indices.len();
        let mut dist = Vec::with_capacity(n * n);
        for &i in indices {
            for &j in indices {
                dist.push(self.d(i, j));
            }
        }
        Self {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            dist,
            basepoint,
        }
    }

    /// Indices of the points in the closed ball of `radius` around the basepoint.
    pub fn ball_indices(&self, radius: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.radius_of(i) <= radius + 1e-12)
            .collect()
    }

    /// Closed ball around the basepoint, as a pointed space in its own right.
    pub fn truncated_ball(&self, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::Domain(format!(
                "ball radius must be nonnegative, got {radius}"
            )));
        }
        let idx = self.ball_indices(radius);
        let base = idx
            .iter()
            .position(|&i| i == self.basepoint)
            .expect("basepoint in ball");
        Ok(self.restrict(&idx, base))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RawSpace::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawSpace = serde_json::from_str(text)?;
        let points = raw.points.into_iter().map(Label::into_string).collect();
        Self::new(points, raw.dist, raw.basepoint)
    }
}

/// Labels may be written as strings or numbers in JSON.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Label {
    Text(String),
    Number(serde_json::Number),
}

impl Label {
    fn into_string(self) -> String {
        match self {
            Label::Text(s) => s,
            Label::Number(n) => n.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    points: Vec<Label>,
    basepoint: usize,
    dist: Vec<Vec<f64>>,
}

impl From<&PointedFiniteMetricSpace> for RawSpace {
    fn from(s: &PointedFiniteMetricSpace) -> Self {
        RawSpace {
            points: s.points.iter().cloned().map(Label::Text).collect(),
            basepoint: s.basepoint,
            dist: (0..s.len()).map(|i| s.row(i).to_vec()).collect(),
        }
    }
}
