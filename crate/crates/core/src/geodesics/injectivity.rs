use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{integrate_geodesic, GeodesicState};
use crate::chart::MetricChart;
use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InjectivityConfig {
    pub n_directions: usize,
    /// Sample spacing along each geodesic and the collision tolerance, in
    /// `g`-length. Defaults to `search_radius / 400`.
    pub mesh: Option<f64>,
    /// Two samples only count as distinct preimages when their tangent
    /// vectors differ by more than this fraction of the larger length
    /// (and by at least four meshes).
    pub separation_ratio: f64,
}

impl InjectivityConfig {
    pub fn for_dim(d: usize) -> Self {
        InjectivityConfig {
            n_directions: if d <= 2 { 256 } else { 1024 },
            mesh: None,
            separation_ratio: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityEstimate {
    pub radius: f64,
    /// No collision was found below the search radius.
    pub censored: bool,
    pub n_directions: usize,
    pub mesh: f64,
}

/// Unit vectors in `R^d`: equally spaced angles in the plane, a Fibonacci
/// lattice on the 2-sphere, seeded Gaussian draws otherwise.
pub fn sphere_directions(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| 2.0 * PI * k as f64 / n as f64)
            .map(|a| vec![a.cos(), a.sin()])
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - (2 * k + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x1f0c);
            (0..n)
                .map(|_| {
                    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                    v.into_iter().map(|c| c / len).collect()
                })
                .collect()
        }
    }
}

struct Sample {
    dir: usize,
    s: f64,
    x: Vec<f64>,
}

pub fn injectivity_radius_estimate(
    chart: &MetricChart,
    p: &[f64],
    search_radius: f64,
    n_directions: usize,
) -> Result<InjectivityEstimate> {
    let cfg = InjectivityConfig {
        n_directions,
        ..InjectivityConfig::for_dim(chart.dim())
    };
    injectivity_radius_estimate_with(chart, p, search_radius, &cfg)
}

/// Shoot unit-speed geodesics from `p` and report the smallest parameter at
/// which two samples with clearly different tangent vectors meet within one
/// mesh. Direction sampling can only miss collisions, so this over-estimates.
pub fn injectivity_radius_estimate_with(
    chart: &MetricChart,
    p: &[f64],
    search_radius: f64,
    cfg: &InjectivityConfig,
) -> Result<InjectivityEstimate> {
    if !(search_radius > 0.0) || !search_radius.is_finite() {
        return Err(Error::InvalidInput(format!(
            "search radius must be positive, got {search_radius}"
        )));
    }
    if cfg.n_directions == 0 {
        return Err(Error::InvalidInput("need at least one direction".into()));
    }
    let d = chart.dim();
    let g = chart.checked_metric(p)?;
    let l = g
        .cholesky()
        .ok_or(Error::Degenerate {
            point: p.to_vec(),
            min_eigenvalue: 0.0,
        })?
        .l();
    let frame = l
        .transpose()
        .try_inverse()
        .expect("Cholesky factor is invertible");
    let mesh = cfg.mesh.unwrap_or(search_radius / 400.0);
    let dirs = sphere_directions(d, cfg.n_directions);
    let paths = par::try_map_slice(&dirs, |u| -> Result<Vec<Sample>> {
        let v = &frame * DVector::from_column_slice(u);
        let path = integrate_geodesic(
            chart,
            &GeodesicState::new(p, v.as_slice()),
            search_radius,
            mesh,
        )?;
        Ok(path
            .t
            .iter()
            .zip(path.states)
            .map(|(&s, st)| Sample { dir: 0, s, x: st.x })
            .collect())
    })?;
    let mut samples: Vec<Sample> = Vec::new();
    for (k, path) in paths.into_iter().enumerate() {
        samples.extend(path.into_iter().map(|s| Sample { dir: k, ..s }));
    }
    // half-widths of the coordinate box holding the g-ball of radius mesh
    let reach: Vec<Vec<f64>> = par::map_slice(&samples, |s| {
        let gi = chart
            .metric(&s.x)
            .try_inverse()
            .unwrap_or_else(|| DMatrix::zeros(d, d));
        (0..d).map(|k| mesh * gi[(k, k)].max(0.0).sqrt()).collect()
    });
    let dom = chart.domain();
    let cell: Vec<f64> = (0..d)
        .map(|k| {
            reach
                .iter()
                .map(|w| w[k])
                .fold(f64::INFINITY, f64::min)
                .max(1e-12)
        })
        .collect();
    let ncells: Vec<Option<i64>> = (0..d)
        .map(|k| dom.period[k].map(|p| ((p / cell[k]).floor() as i64).max(1)))
        .collect();
    let coord = |x: f64, k: usize| -> i64 { ((x - dom.lo[k]) / cell[k]).floor() as i64 };
    let wrap = |c: i64, k: usize| -> i64 {
        match ncells[k] {
            Some(n) => c.rem_euclid(n),
            None => c,
        }
    };
    let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        let key: Vec<i64> = (0..d).map(|k| wrap(coord(s.x[k], k), k)).collect();
        cells.entry(key).or_default().push(i);
    }
    let tangent = |s: &Sample| -> Vec<f64> { dirs[s.dir].iter().map(|c| c * s.s).collect() };
    let hits = par::map_range(samples.len(), |i| {
        let a = &samples[i];
        let ga = chart.metric(&a.x);
        let ta = tangent(a);
        // cell ranges per axis, each listed once even when wrapping
        let ranges: Vec<Vec<i64>> = (0..d)
            .map(|k| {
                let lo = coord(a.x[k] - reach[i][k], k);
                let hi = coord(a.x[k] + reach[i][k], k);
                let mut r: Vec<i64> = match ncells[k] {
                    Some(n) if hi - lo + 1 >= n => (0..n).collect(),
                    _ => (lo..=hi).map(|c| wrap(c, k)).collect(),
                };
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        let total: usize = ranges.iter().map(|r| r.len()).product();
        let mut best = f64::INFINITY;
        let mut key = vec![0i64; d];
        for mut f in 0..total {
            for k in 0..d {
                key[k] = ranges[k][f % ranges[k].len()];
                f /= ranges[k].len();
            }
            let Some(bucket) = cells.get(&key) else {
                continue;
            };
            for &j in bucket {
                if j == i {
                    continue;
                }
                let b = &samples[j];
                let r = a.s.max(b.s);
                if r >= best {
                    continue;
                }
                let disp = DVector::from_vec(dom.displacement(&a.x, &b.x));
                let gap = (disp.transpose() * &ga * &disp)[(0, 0)].max(0.0).sqrt();
                if gap >= mesh {
                    continue;
                }
                let sep = ta
                    .iter()
                    .zip(tangent(b))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if sep > (4.0 * mesh).max(cfg.separation_ratio * r) {
                    best = r;
                }
            }
        }
        best
    });
    let hit = hits.into_iter().fold(f64::INFINITY, f64::min);
    Ok(InjectivityEstimate {
        radius: hit.min(search_radius),
        censored: !hit.is_finite(),
        n_directions: dirs.len(),
        mesh,
    })
}
