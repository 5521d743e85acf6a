//! Geodesics on a chart: integration, exponential and log maps, distances,
//! normal coordinates and injectivity-radius estimates.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chart::MetricChart;
use crate::error::{Error, Result};

mod distance;
mod injectivity;
mod normal;

pub use distance::{riemannian_distance, riemannian_distance_with, DistanceConfig, GridGraph};
pub use injectivity::{
    injectivity_radius_estimate, injectivity_radius_estimate_with, InjectivityConfig,
    InjectivityEstimate,
};
pub use normal::{normal_pullback_metric, NormalChartResult};

/// Default integration step, in parameter units.
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl GeodesicState {
    pub fn new(x: &[f64], v: &[f64]) -> Self {
        GeodesicState {
            x: x.to_vec(),
            v: v.to_vec(),
        }
    }
}

/// Sampled geodesic, one state per integration step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub t: Vec<f64>,
    pub states: Vec<GeodesicState>,
    /// The path left the chart before reaching the requested parameter.
    pub hit_boundary: bool,
    /// Largest deviation of the `g`-speed from its initial value.
    pub speed_drift: f64,
}

impl GeodesicPath {
    pub fn last(&self) -> &GeodesicState {
        self.states.last().expect("paths hold the initial state")
    }

    pub fn end_time(&self) -> f64 {
        *self.t.last().expect("paths hold the initial state")
    }

    /// Rows `t, x1..xd, v1..vd` with a header line.
    pub fn to_csv(&self) -> String {
        let d = self.states[0].x.len();
        let mut out = String::from("t");
        for i in 1..=d {
            write!(out, ",x{i}").unwrap();
        }
        for i in 1..=d {
            write!(out, ",v{i}").unwrap();
        }
        out.push('\n');
        for (t, s) in self.t.iter().zip(&self.states) {
            write!(out, "{t}").unwrap();
            for c in s.x.iter().chain(&s.v) {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// `Gamma^k_ij` at `x`, flat with index `(i * d + j) * d + k`.
pub fn christoffel_flat(chart: &MetricChart, x: &[f64]) -> Result<Vec<f64>> {
    let d = chart.dim();
    let jet = chart.metric_jet(x, 1)?;
    let g = DMatrix::from_fn(d, d, |i, j| jet[i * d + j].value());
    let gi = g
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Degenerate {
            point: x.to_vec(),
            min_eigenvalue: g.symmetric_eigenvalues().min(),
        })?;
    // dg[(l * d + i) * d + j] = d_l g_ij
    let mut dg = vec![0.0; d * d * d];
    for l in 0..d {
        let mut alpha = vec![0u8; d];
        alpha[l] = 1;
        for ij in 0..d * d {
            dg[l * d * d + ij] = jet[ij].derivative(&alpha);
        }
    }
    let mut out = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    let lowered =
                        dg[(j * d + i) * d + l] + dg[(i * d + l) * d + j] - dg[(l * d + i) * d + j];
                    s += gi[(k, l)] * lowered;
                }
                out[(i * d + j) * d + k] = 0.5 * s;
            }
        }
    }
    Ok(out)
}

fn acceleration(chart: &MetricChart, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let d = x.len();
    let gamma = christoffel_flat(chart, x)?;
    Ok((0..d)
        .map(|k| {
            let mut a = 0.0;
            for i in 0..d {
                for j in 0..d {
                    a -= gamma[(i * d + j) * d + k] * v[i] * v[j];
                }
            }
            a
        })
        .collect())
}

// Dormand-Prince nodes, fifth-order weights.
const A: [&[f64]; 6] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];

enum Step {
    Done(GeodesicState),
    Outside,
}

fn rk_step(chart: &MetricChart, s: &GeodesicState, h: f64) -> Result<Step> {
    let d = s.x.len();
    let mut kx: Vec<Vec<f64>> = Vec::with_capacity(6);
    let mut kv: Vec<Vec<f64>> = Vec::with_capacity(6);
    for a in A.iter() {
        let mut x = s.x.clone();
        let mut v = s.v.clone();
        for (m, &c) in a.iter().enumerate() {
            for i in 0..d {
                x[i] += h * c * kx[m][i];
                v[i] += h * c * kv[m][i];
            }
        }
        if !chart.domain().contains(&x) {
            return Ok(Step::Outside);
        }
        kv.push(acceleration(chart, &x, &v)?);
        kx.push(v);
    }
    let mut next = s.clone();
    for m in 0..6 {
        for i in 0..d {
            next.x[i] += h * B[m] * kx[m][i];
            next.v[i] += h * B[m] * kv[m][i];
        }
    }
    if !chart.domain().contains(&next.x) {
        return Ok(Step::Outside);
    }
    chart.domain().wrap(&mut next.x);
    Ok(Step::Done(next))
}

/// Solve `x'' + Gamma(x)(x', x') = 0` from `state0` to parameter `t_end`
/// with a fixed-step fifth-order Runge-Kutta scheme. The step is shrunk so
/// that `t_end` is hit exactly. Leaving the chart ends the path early with
/// `hit_boundary` set.
pub fn integrate_geodesic(
    chart: &MetricChart,
    state0: &GeodesicState,
    t_end: f64,
    step: f64,
) -> Result<GeodesicPath> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!(
            "integration step must be positive, got {step}"
        )));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidInput(format!(
            "end parameter must be non-negative, got {t_end}"
        )));
    }
    chart.checked_metric(&state0.x)?;
    if state0.v.len() != chart.dim() || state0.v.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(
            "initial velocity must be finite with one entry per axis".into(),
        ));
    }
    let mut x0 = state0.x.clone();
    chart.domain().wrap(&mut x0);
    let s0 = GeodesicState {
        x: x0,
        v: state0.v.clone(),
    };
    let speed0 = chart.speed(&s0.x, &s0.v);
    let n = (t_end / step).ceil().max(0.0) as usize;
    let h = if n == 0 { 0.0 } else { t_end / n as f64 };
    let mut path = GeodesicPath {
        t: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        hit_boundary: false,
        speed_drift: 0.0,
    };
    path.t.push(0.0);
    path.states.push(s0);
    for k in 1..=n {
        match rk_step(chart, path.last(), h)? {
            Step::Outside => {
                path.hit_boundary = true;
                break;
            }
            Step::Done(next) => {
                if next.x.iter().chain(&next.v).any(|c| !c.is_finite()) {
                    let last = path.last();
                    return Err(Error::Integration {
                        t: path.end_time(),
                        x: last.x.clone(),
                    });
                }
                path.speed_drift = path
                    .speed_drift
                    .max((chart.speed(&next.x, &next.v) - speed0).abs());
                path.t.push(k as f64 * h);
                path.states.push(next);
            }
        }
    }
    Ok(path)
}

/// Endpoint at parameter 1 of the geodesic with initial data `(p, v)`.
pub fn exp_map(chart: &MetricChart, p: &[f64], v: &[f64], step: f64) -> Result<Vec<f64>> {
    let path = integrate_geodesic(chart, &GeodesicState::new(p, v), 1.0, step)?;
    if path.hit_boundary {
        return Err(Error::BoundaryExit {
            t: path.end_time(),
            t_end: 1.0,
        });
    }
    Ok(path.last().x.clone())
}

/// Tolerance, in `g`-length, for accepting a shooting solution.
const SHOOT_TOL: f64 = 1e-10;

/// Find `v` with `exp_p(v) = q` by Newton iteration from `guess`.
/// The residual is measured along the short way round periodic axes.
pub fn shoot(
    chart: &MetricChart,
    p: &[f64],
    q: &[f64],
    guess: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let d = chart.dim();
    let g_q = chart.checked_metric(q)?;
    let residual = |v: &[f64]| -> Result<DVector<f64>> {
        let end = exp_map(chart, p, v, step)?;
        Ok(DVector::from_vec(chart.domain().displacement(q, &end)))
    };
    let glen = |r: &DVector<f64>| (r.transpose() * &g_q * r)[(0, 0)].max(0.0).sqrt();
    let mut v = DVector::from_column_slice(guess);
    let mut r = residual(v.as_slice())?;
    let scale = glen(&v).max(1e-3);
    for _ in 0..30 {
        if glen(&r) < SHOOT_TOL * scale.max(1.0) {
            return Ok(v.as_slice().to_vec());
        }
        let eps = 1e-6 * scale;
        let mut jac = DMatrix::zeros(d, d);
        for i in 0..d {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += eps;
            vm[i] -= eps;
            let col = (residual(vp.as_slice())? - residual(vm.as_slice())?) / (2.0 * eps);
            jac.set_column(i, &col);
        }
        let delta = jac.lu().solve(&r).ok_or(Error::Shooting(
            "singular shooting Jacobian (conjugate point?)".into(),
        ))?;
        // damped update: halve until the residual decreases
        let mut lambda = 1.0;
        loop {
            let cand = &v - &delta * lambda;
            match residual(cand.as_slice()) {
                Ok(rc) if glen(&rc) < glen(&r) => {
                    v = cand;
                    r = rc;
                    break;
                }
                _ if lambda > 1.0 / 64.0 => lambda *= 0.5,
                Ok(_) | Err(_) => {
                    return Err(Error::Shooting("shooting stalled".into()));
                }
            }
        }
    }
    if glen(&r) < 1e-7 * scale.max(1.0) {
        Ok(v.as_slice().to_vec())
    } else {
        Err(Error::Shooting(format!(
            "shooting did not converge, residual {:e}",
            glen(&r)
        )))
    }
}

/// `v` with `exp_p(v) = q`, starting from the chart displacement.
pub fn log_map(chart: &MetricChart, p: &[f64], q: &[f64], step: f64) -> Result<Vec<f64>> {
    chart.checked_metric(p)?;
    let guess = chart.domain().displacement(p, q);
    shoot(chart, p, q, &guess, step)
}

#[cfg(test)]
mod tests;
