use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{exp_map, log_map};
use crate::chart::{Domain, MetricChart};
use crate::error::{Error, Result};
use crate::par;

/// Values on a regular grid, interpolated by tensor-product Catmull-Rom
/// cubics. Each node holds `width` numbers.
#[derive(Clone, Debug)]
struct CubicGrid {
    lo: f64,
    h: f64,
    n: usize,
    d: usize,
    width: usize,
    values: Vec<f64>,
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let (t2, t3) = (t * t, t * t * t);
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

impl CubicGrid {
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut base = vec![0usize; self.d];
        let mut w = vec![[0.0; 4]; self.d];
        for k in 0..self.d {
            let s = (x[k] - self.lo) / self.h;
            let b = (s.floor() as i64).clamp(1, self.n as i64 - 3) as usize;
            base[k] = b - 1;
            w[k] = catmull_rom(s - b as f64);
        }
        let mut out = vec![0.0; self.width];
        for flat in 0..4usize.pow(self.d as u32) {
            let mut f = flat;
            let mut weight = 1.0;
            let mut idx = 0;
            let mut stride = 1;
            for k in 0..self.d {
                let o = f % 4;
                f /= 4;
                weight *= w[k][o];
                idx += (base[k] + o) * stride;
                stride *= self.n;
            }
            if weight != 0.0 {
                for (c, v) in out
                    .iter_mut()
                    .zip(&self.values[idx * self.width..(idx + 1) * self.width])
                {
                    *c += weight * v;
                }
            }
        }
        out
    }
}

/// Metric pulled back through `y -> exp_p(frame * y)`, tabulated on a grid.
#[derive(Clone, Debug)]
pub struct NormalChartResult {
    pub center: Vec<f64>,
    /// Columns are a `g`-orthonormal basis at the center.
    pub frame: DMatrix<f64>,
    /// Pullback metric in normal coordinates on `[-radius, radius]^d`;
    /// values are meaningful on the ball of that radius.
    pub chart: MetricChart,
    pub radius: f64,
    source: MetricChart,
    step: f64,
    nodes: Vec<Vec<f64>>,
    coeffs: Vec<Vec<f64>>,
}

/// `exp` and its Jacobian at `y` by central differences.
fn exp_jacobian(
    chart: &MetricChart,
    p: &[f64],
    frame: &DMatrix<f64>,
    y: &[f64],
    step: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = y.len();
    let at = |y: &[f64]| -> Result<Vec<f64>> {
        let v = frame * DVector::from_column_slice(y);
        exp_map(chart, p, v.as_slice(), step)
    };
    let x = at(y)?;
    let h = 1e-4;
    let mut jac = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[i] += h;
        ym[i] -= h;
        let diff = chart.domain().displacement(&at(&ym)?, &at(&yp)?);
        for k in 0..d {
            jac[(k, i)] = diff[k] / (2.0 * h);
        }
    }
    Ok((x, jac))
}

/// Tabulate the normal-coordinate metric at `p` on `resolution` nodes per
/// axis over `[-radius, radius]^d`. Fails with an injectivity error when the
/// exponential map folds (non-positive Jacobian) or sends two well separated
/// nodes of the ball to the same place.
pub fn normal_pullback_metric(
    chart: &MetricChart,
    p: &[f64],
    radius: f64,
    resolution: usize,
) -> Result<NormalChartResult> {
    normal_pullback_metric_with_step(chart, p, radius, resolution, 1e-2)
}

pub fn normal_pullback_metric_with_step(
    chart: &MetricChart,
    p: &[f64],
    radius: f64,
    resolution: usize,
    step: f64,
) -> Result<NormalChartResult> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if resolution < 5 {
        return Err(Error::InvalidInput(
            "normal charts need at least 5 nodes per axis".into(),
        ));
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
    let h = 2.0 * radius / (resolution - 1) as f64;
    let total = resolution.pow(d as u32);
    let nodes: Vec<Vec<f64>> = (0..total)
        .map(|mut f| {
            (0..d)
                .map(|_| {
                    let c = f % resolution;
                    f /= resolution;
                    -radius + c as f64 * h
                })
                .collect()
        })
        .collect();
    let norm = |y: &[f64]| y.iter().map(|c| c * c).sum::<f64>().sqrt();
    // nodes whose interpolation stencil can touch the ball
    let reach = radius + 2.0 * h * (d as f64).sqrt();
    let computed: Vec<Option<(Vec<f64>, DMatrix<f64>)>> =
        par::try_map_slice(&nodes, |y| -> Result<_> {
            if norm(y) > reach {
                return Ok(None);
            }
            match exp_jacobian(chart, p, &frame, y, step) {
                Ok(r) => Ok(Some(r)),
                Err(Error::BoundaryExit { .. }) if norm(y) > radius => Ok(None),
                Err(e) => Err(e),
            }
        })?;
    let mut coeffs = vec![vec![f64::NAN; d * d]; total];
    let mut images: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut fold = f64::INFINITY;
    for (i, c) in computed.iter().enumerate() {
        let Some((x, jac)) = c else { continue };
        let gx = chart.metric(x);
        let pulled = jac.transpose() * gx * jac;
        coeffs[i] = pulled.transpose().as_slice().to_vec();
        if norm(&nodes[i]) <= radius {
            if !(jac.determinant() > 0.0) {
                fold = fold.min(norm(&nodes[i]));
            }
            images.push((i, x.clone()));
        }
    }
    // two ball nodes more than two cells apart landing within half a cell
    let collision = par::map_slice(&images, |(i, xi)| {
        let gi = chart.metric(xi);
        images
            .iter()
            .filter(|(j, _)| j > i)
            .filter(|(j, _)| {
                let sep = norm(
                    &nodes[*i]
                        .iter()
                        .zip(&nodes[*j])
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                );
                sep > 2.0 * h * (d as f64).sqrt()
            })
            .filter(|(_, xj)| {
                let disp = DVector::from_vec(chart.domain().displacement(xi, xj));
                (disp.transpose() * &gi * &disp)[(0, 0)].sqrt() < 0.5 * h
            })
            .map(|(j, _)| norm(&nodes[*i]).max(norm(&nodes[*j])))
            .fold(f64::INFINITY, f64::min)
    })
    .into_iter()
    .fold(fold, f64::min);
    if collision.is_finite() {
        return Err(Error::Injectivity {
            radius,
            estimate: collision,
        });
    }
    let grid = Arc::new(CubicGrid {
        lo: -radius,
        h,
        n: resolution,
        d,
        width: d * d,
        values: coeffs.concat(),
    });
    let domain = Domain::boxed(&vec![-radius; d], &vec![radius; d]);
    let pulled = MetricChart::from_fn(
        format!("normal({})", chart.name()),
        domain,
        move |y: &[f64]| grid.eval(y),
    )
    .with_fd_step(h / 8.0);
    Ok(NormalChartResult {
        center: p.to_vec(),
        frame,
        chart: pulled,
        radius,
        source: chart.clone(),
        step,
        nodes,
        coeffs,
    })
}

impl NormalChartResult {
    /// `psi(y)` in the source chart.
    pub fn to_source(&self, y: &[f64]) -> Result<Vec<f64>> {
        let v = &self.frame * DVector::from_column_slice(y);
        exp_map(&self.source, &self.center, v.as_slice(), self.step)
    }

    /// Inverse of [`Self::to_source`] near the center.
    pub fn from_source(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = log_map(&self.source, &self.center, x, self.step)?;
        let y = self
            .frame
            .clone()
            .try_inverse()
            .expect("frame is invertible")
            * DVector::from_vec(v);
        Ok(y.as_slice().to_vec())
    }

    /// Tabulated nodes inside the ball with their pullback coefficients.
    pub fn ball_samples(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.nodes
            .iter()
            .zip(&self.coeffs)
            .filter(|(y, c)| {
                y.iter().map(|a| a * a).sum::<f64>().sqrt() <= self.radius && c[0].is_finite()
            })
            .map(|(y, c)| (y.as_slice(), c.as_slice()))
    }

    /// Largest absolute pullback coefficient over the ball nodes.
    pub fn coefficient_sup(&self) -> f64 {
        self.ball_samples()
            .flat_map(|(_, c)| c.iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }

    /// Transition map `y -> other^{-1}(self(y))`.
    pub fn transition(&self, other: &NormalChartResult, y: &[f64]) -> Result<Vec<f64>> {
        other.from_source(&self.to_source(y)?)
    }

    /// Operator norm of the transition map's Jacobian at `y`.
    pub fn transition_derivative_norm(&self, other: &NormalChartResult, y: &[f64]) -> Result<f64> {
        let d = y.len();
        let h = 1e-4;
        let mut jac = DMatrix::zeros(d, d);
        for i in 0..d {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[i] += h;
            ym[i] -= h;
            let a = self.transition(other, &yp)?;
            let b = self.transition(other, &ym)?;
            for k in 0..d {
                jac[(k, i)] = (a[k] - b[k]) / (2.0 * h);
            }
        }
        Ok(jac.singular_values().max())
    }
}
