//! Local tensor calculus on a [`MetricChart`].
//!
//! Everything is computed on jets: the metric jet at a point is inverted,
//! differentiated into Christoffel symbols, then into curvature, and
//! covariant derivatives are taken coefficientwise. Orders drop by one with
//! each derivative, so `|nabla^k R|` needs a metric jet of order `k + 2`.
//!
//! Index layout: Christoffel symbols `Gamma^k_ij` are stored with slots
//! `[Co i, Co j, Contra k]`; the curvature tensor `R^l_ijk` uses
//! `[Co i, Co j, Co k, Contra l]`; a covariant derivative prepends a new
//! covariant slot for the differentiation direction.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chart::{fd_jet, Domain, MetricChart, DEFAULT_FD_STEP};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::par;
use crate::tensor::{Slot, Tensor, TensorFieldValue};

/// Default points per axis for sups over a region.
pub const DEFAULT_GRID: usize = 17;
/// Highest curvature derivative order served by [`curvature_derivative_norms`].
pub const MAX_CURVATURE_DERIVATIVE: usize = 3;

/// Index placement used for the curvature tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CurvatureConvention {
    /// `d_j G^l_ki - d_k G^l_ji + G^l_jm G^m_ki - G^l_km G^m_ji`.
    #[default]
    Standard,
    /// `d_j G^l_ki - d_k G^l_jk + G^k_jm G^m_ki - G^l_km G^m_ji`, with the
    /// repeated `k` read literally (no summation).
    AsPrinted,
}

fn jet_matrix_mul(a: &[Jet], b: &[Jet], d: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = &a[i * d] * &b[j];
            for k in 1..d {
                acc = &acc + &(&a[i * d + k] * &b[k * d + j]);
            }
            out.push(acc);
        }
    }
    out
}

/// Jet of the inverse matrix via the terminating Neumann series around the
/// constant part.
pub fn inverse_jet(g: &[Jet], d: usize) -> Result<Vec<Jet>> {
    let order = g[0].order();
    let g0 = DMatrix::from_fn(d, d, |i, j| g[i * d + j].value());
    let g0_inv = g0.clone().try_inverse().ok_or_else(|| Error::Degenerate {
        point: vec![],
        min_eigenvalue: g0.symmetric_eigenvalues().min(),
    })?;
    let inv0: Vec<Jet> = (0..d * d)
        .map(|k| g[0].like(g0_inv[(k / d, k % d)]))
        .collect();
    // a = -g0^{-1} (g - g0)
    let mut e = g.to_vec();
    for (k, ek) in e.iter_mut().enumerate() {
        *ek = ek.clone() - g0[(k / d, k % d)];
    }
    let a: Vec<Jet> = jet_matrix_mul(&inv0, &e, d)
        .into_iter()
        .map(|j| -j)
        .collect();
    let mut term = inv0.clone();
    let mut sum = inv0;
    for _ in 0..order {
        term = jet_matrix_mul(&a, &term, d);
        sum = sum.iter().zip(&term).map(|(s, t)| s + t).collect();
    }
    Ok(sum)
}

/// Christoffel jets `Gamma^k_ij = 1/2 g^{kl} (d_j g_il + d_i g_lj - d_l g_ij)`,
/// one order below the metric jet.
pub fn christoffel_jet(g: &[Jet], d: usize) -> Result<Tensor<Jet>> {
    let order = g[0].order();
    if order == 0 {
        return Err(Error::Refused(
            "Christoffel symbols need a first-order metric jet".into(),
        ));
    }
    let g_inv: Vec<Jet> = inverse_jet(g, d)?
        .into_iter()
        .map(|j| j.truncate(order - 1))
        .collect();
    // dg[l][i*d+j] = d_l g_ij
    let dg: Vec<Vec<Jet>> = (0..d)
        .map(|l| g.iter().map(|c| c.partial(l)).collect())
        .collect();
    let zero = g[0].truncate(order - 1).like(0.0);
    let mut out = Tensor::filled(d, vec![Slot::Co, Slot::Co, Slot::Contra], zero.clone());
    for i in 0..d {
        for j in 0..d {
            let lowered: Vec<Jet> = (0..d)
                .map(|l| &(&dg[j][i * d + l] + &dg[i][l * d + j]) - &dg[l][i * d + j])
                .collect();
            for k in 0..d {
                let mut acc = zero.clone();
                for l in 0..d {
                    acc = &acc + &(&g_inv[k * d + l] * &lowered[l]);
                }
                out.set(&[i, j, k], acc * 0.5);
            }
        }
    }
    Ok(out)
}

/// `Gamma^k_ij` read from a Christoffel tensor.
#[inline]
fn gam(gamma: &Tensor<Jet>, k: usize, i: usize, j: usize) -> &Jet {
    gamma.get(&[i, j, k])
}

/// Curvature jets `R^l_ijk` from Christoffel jets, one order lower.
pub fn curvature_jet(gamma: &Tensor<Jet>, convention: CurvatureConvention) -> Result<Tensor<Jet>> {
    let d = gamma.dim();
    let order = gamma.coeffs()[0].order();
    if order == 0 {
        return Err(Error::Refused(
            "curvature needs a second-order metric jet".into(),
        ));
    }
    let low = |j: &Jet| j.truncate(order - 1);
    let zero = low(&gamma.coeffs()[0]).like(0.0);
    let mut out = Tensor::filled(
        d,
        vec![Slot::Co, Slot::Co, Slot::Co, Slot::Contra],
        zero.clone(),
    );
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let v = match convention {
                        CurvatureConvention::Standard => {
                            let mut v =
                                &gam(gamma, l, k, i).partial(j) - &gam(gamma, l, j, i).partial(k);
                            for m in 0..d {
                                let a = low(gam(gamma, l, j, m)) * low(gam(gamma, m, k, i));
                                let b = low(gam(gamma, l, k, m)) * low(gam(gamma, m, j, i));
                                v = &v + &(&a - &b);
                            }
                            v
                        }
                        CurvatureConvention::AsPrinted => {
                            let mut v =
                                &gam(gamma, l, k, i).partial(j) - &gam(gamma, l, j, k).partial(k);
                            for m in 0..d {
                                let a = low(gam(gamma, k, j, m)) * low(gam(gamma, m, k, i));
                                let b = low(gam(gamma, l, k, m)) * low(gam(gamma, m, j, i));
                                v = &v + &(&a - &b);
                            }
                            v
                        }
                    };
                    out.set(&[i, j, k, l], v);
                }
            }
        }
    }
    Ok(out)
}

/// Covariant derivative of a jet tensor; the direction slot comes first.
pub fn covariant_derivative_jet(t: &Tensor<Jet>, gamma: &Tensor<Jet>) -> Result<Tensor<Jet>> {
    let d = t.dim();
    let t_order = t.coeffs()[0].order();
    if t_order == 0 {
        return Err(Error::Refused(
            "covariant derivative needs a first-order tensor jet".into(),
        ));
    }
    let order = (t_order - 1).min(gamma.coeffs()[0].order());
    let rank = t.rank();
    let mut slots = vec![Slot::Co];
    slots.extend_from_slice(t.slots());
    let n_out = d.pow(rank as u32 + 1);
    let low_t: Vec<Jet> = t.coeffs().iter().map(|j| j.truncate(order)).collect();
    let low_g: Vec<Jet> = gamma.coeffs().iter().map(|j| j.truncate(order)).collect();
    let low_gamma = Tensor::new(d, gamma.slots().to_vec(), low_g)?;
    let out: Vec<Jet> = par::map_range(n_out, |flat| {
        let stride_y = d.pow(rank as u32);
        let y = flat / stride_y;
        let rest = flat % stride_y;
        let idx = t.multi_index(rest);
        let mut v = t.coeffs()[rest].partial(y).truncate(order);
        for (s, slot) in t.slots().iter().enumerate() {
            let mut moved = idx.clone();
            for m in 0..d {
                moved[s] = m;
                let tm = &low_t[t.flat_index(&moved)];
                match slot {
                    Slot::Co => v = &v - &(gam(&low_gamma, m, y, idx[s]) * tm),
                    Slot::Contra => v = &v + &(gam(&low_gamma, idx[s], y, m) * tm),
                }
            }
        }
        v
    });
    Tensor::new(d, slots, out)
}

fn values(t: &Tensor<Jet>) -> TensorFieldValue {
    t.map(|j| j.value())
}

/// Metric and inverse at `x` from a metric jet.
fn metric_pair(g: &[Jet], d: usize, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let gm = DMatrix::from_fn(d, d, |i, j| g[i * d + j].value());
    let lambda = gm.clone().symmetric_eigenvalues().min();
    if !(lambda > crate::chart::MIN_EIGENVALUE) {
        return Err(Error::Degenerate {
            point: x.to_vec(),
            min_eigenvalue: lambda,
        });
    }
    let gi = gm.clone().try_inverse().ok_or(Error::Degenerate {
        point: x.to_vec(),
        min_eigenvalue: lambda,
    })?;
    Ok((gm, gi))
}

pub fn inverse_metric(chart: &MetricChart, x: &[f64]) -> Result<DMatrix<f64>> {
    chart.inverse_metric(x)
}

pub fn christoffel(chart: &MetricChart, x: &[f64]) -> Result<TensorFieldValue> {
    chart.checked_metric(x)?;
    let g = chart.metric_jet(x, 1)?;
    Ok(values(&christoffel_jet(&g, chart.dim())?))
}

pub fn curvature_tensor(chart: &MetricChart, x: &[f64]) -> Result<TensorFieldValue> {
    curvature_tensor_with(chart, x, CurvatureConvention::Standard)
}

pub fn curvature_tensor_with(
    chart: &MetricChart,
    x: &[f64],
    convention: CurvatureConvention,
) -> Result<TensorFieldValue> {
    chart.checked_metric(x)?;
    let g = chart.metric_jet(x, 2)?;
    let gamma = christoffel_jet(&g, chart.dim())?;
    Ok(values(&curvature_jet(&gamma, convention)?))
}

/// Sectional curvature of the coordinate plane spanned by axes `a`, `b`.
pub fn sectional_curvature(chart: &MetricChart, x: &[f64], a: usize, b: usize) -> Result<f64> {
    let r = curvature_tensor(chart, x)?;
    let g = chart.metric(x);
    // <R(e_a, e_b) e_b, e_a> with R(e_j, e_k) e_i = R^l_ijk e_l
    let mut num = 0.0;
    for l in 0..chart.dim() {
        num += g[(l, a)] * r.get(&[b, a, b, l]);
    }
    let den = g[(a, a)] * g[(b, b)] - g[(a, b)] * g[(a, b)];
    Ok(num / den)
}

pub fn tensor_norm(chart: &MetricChart, x: &[f64], t: &TensorFieldValue) -> Result<f64> {
    if t.dim() != chart.dim() {
        return Err(Error::ShapeMismatch(format!(
            "tensor dimension {} on a chart of dimension {}",
            t.dim(),
            chart.dim()
        )));
    }
    let g = chart.checked_metric(x)?;
    let gi = chart.inverse_metric(x)?;
    t.norm_with(&g, &gi)
}

type FieldFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type FieldJetFn = dyn Fn(&[f64], usize) -> Vec<Jet> + Send + Sync;

/// A tensor field on a chart, given by its coefficient function.
#[derive(Clone)]
pub struct TensorField {
    dim: usize,
    slots: Vec<Slot>,
    eval: Arc<FieldFn>,
    jet: Option<Arc<FieldJetFn>>,
    fd_step: f64,
}

impl TensorField {
    pub fn from_fn(
        dim: usize,
        slots: Vec<Slot>,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        TensorField {
            dim,
            slots,
            eval: Arc::new(f),
            jet: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    /// The metric itself as a `(0, 2)` tensor field.
    pub fn metric_of(chart: &MetricChart) -> Self {
        let c1 = chart.clone();
        let c2 = chart.clone();
        TensorField {
            dim: chart.dim(),
            slots: vec![Slot::Co, Slot::Co],
            eval: Arc::new(move |x| c1.coefficients(x)),
            jet: Some(Arc::new(move |x, order| {
                c2.metric_jet(x, order)
                    .expect("metric jet inside the checked domain")
            })),
            fd_step: chart.fd_step(),
        }
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn value(&self, x: &[f64]) -> Result<TensorFieldValue> {
        Tensor::new(self.dim, self.slots.clone(), (self.eval)(x))
    }

    pub fn jet(&self, x: &[f64], order: usize) -> Result<Tensor<Jet>> {
        let n = self.dim.pow(self.slots.len() as u32);
        let coeffs = match &self.jet {
            Some(f) => f(x, order),
            None => fd_jet(&*self.eval, x, order, self.fd_step, n),
        };
        Tensor::new(self.dim, self.slots.clone(), coeffs)
    }
}

fn check_field_margin(
    chart: &MetricChart,
    field: &TensorField,
    x: &[f64],
    order: usize,
) -> Result<()> {
    if field.jet.is_none() {
        let reach = (1..=order)
            .map(|m| m.div_ceil(2) as f64 * crate::chart::fd_step_for(field.fd_step, m))
            .fold(0.0, f64::max);
        if chart.domain().margin(x) < reach {
            return Err(Error::Margin {
                point: x.to_vec(),
                margin: reach,
            });
        }
    }
    Ok(())
}

/// `nabla T` at `x`, with the direction slot first.
pub fn covariant_derivative_tensor(
    chart: &MetricChart,
    x: &[f64],
    field: &TensorField,
) -> Result<TensorFieldValue> {
    if field.dim != chart.dim() {
        return Err(Error::ShapeMismatch(
            "field and chart dimensions differ".into(),
        ));
    }
    chart.checked_metric(x)?;
    check_field_margin(chart, field, x, 1)?;
    let g = chart.metric_jet(x, 1)?;
    let gamma = christoffel_jet(&g, chart.dim())?;
    let t = field.jet(x, 1)?;
    Ok(values(&covariant_derivative_jet(&t, &gamma)?))
}

/// `|nabla^i T|_g` for `i = 0..=k` at a point.
pub fn covariant_derivative_norms(
    chart: &MetricChart,
    x: &[f64],
    field: &TensorField,
    k: usize,
) -> Result<Vec<f64>> {
    chart.checked_metric(x)?;
    check_field_margin(chart, field, x, k)?;
    let g = chart.metric_jet(x, k + 1)?;
    let (gm, gi) = metric_pair(&g, chart.dim(), x)?;
    let gamma = christoffel_jet(&g, chart.dim())?;
    let mut t = field.jet(x, k)?;
    let mut norms = vec![values(&t).norm_with(&gm, &gi)?];
    for _ in 0..k {
        t = covariant_derivative_jet(&t, &gamma)?;
        norms.push(values(&t).norm_with(&gm, &gi)?);
    }
    Ok(norms)
}

/// `|nabla^k R|_g` for `k = 0..=k_max`.
pub fn curvature_derivative_norms(
    chart: &MetricChart,
    x: &[f64],
    k_max: usize,
) -> Result<Vec<f64>> {
    if k_max > MAX_CURVATURE_DERIVATIVE {
        return Err(Error::Refused(format!(
            "curvature derivatives are served up to order {MAX_CURVATURE_DERIVATIVE}, got {k_max}"
        )));
    }
    chart.checked_metric(x)?;
    let d = chart.dim();
    let g = chart.metric_jet(x, k_max + 2)?;
    let (gm, gi) = metric_pair(&g, d, x)?;
    let gamma = christoffel_jet(&g, d)?;
    let mut r = curvature_jet(&gamma, CurvatureConvention::Standard)?;
    let mut norms = vec![values(&r).norm_with(&gm, &gi)?];
    for _ in 0..k_max {
        r = covariant_derivative_jet(&r, &gamma)?;
        norms.push(values(&r).norm_with(&gm, &gi)?);
    }
    Ok(norms)
}

/// `b = max((1 - a)^{-1/2}, (1 + a)^{1/2})`: lengths measured with a metric
/// within relative defect `a` of another change by at most a factor `b`.
pub fn bilipschitz_factor(a: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::Domain(format!(
            "bilipschitz factor needs 0 <= a < 1, got {a}"
        )));
    }
    Ok((1.0 - a).powf(-0.5).max((1.0 + a).sqrt()))
}

/// Uniform grid of `n` points per axis over a box.
pub fn grid_points(region: &Domain, n: usize) -> Vec<Vec<f64>> {
    let d = region.dim();
    let n = n.max(1);
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut flat| {
            let mut p = vec![0.0; d];
            for (k, pk) in p.iter_mut().enumerate() {
                let i = flat % n;
                flat /= n;
                let t = if n == 1 {
                    0.5
                } else {
                    i as f64 / (n - 1) as f64
                };
                *pk = region.lo[k] + t * (region.hi[k] - region.lo[k]);
            }
            p
        })
        .collect()
}

/// Largest grid spacing of [`grid_points`] over `region`.
pub fn grid_mesh(region: &Domain, n: usize) -> f64 {
    region
        .widths()
        .into_iter()
        .map(|w| w / (n.max(2) - 1) as f64)
        .fold(0.0, f64::max)
}

/// `sup { |nabla^i (g_pulled - g_ref)|_{g_ref} : x in region, i <= k }` on a
/// uniform grid, where `nabla` is the reference connection.
pub fn smooth_convergence_defect(
    reference: &MetricChart,
    pulled_back: &MetricChart,
    region: &Domain,
    k: usize,
) -> Result<f64> {
    smooth_convergence_defect_on_grid(reference, pulled_back, region, k, DEFAULT_GRID)
}

pub fn smooth_convergence_defect_on_grid(
    reference: &MetricChart,
    pulled_back: &MetricChart,
    region: &Domain,
    k: usize,
    points_per_axis: usize,
) -> Result<f64> {
    if reference.dim() != pulled_back.dim() || region.dim() != reference.dim() {
        return Err(Error::ShapeMismatch(format!(
            "dimensions differ: reference {}, pulled back {}, region {}",
            reference.dim(),
            pulled_back.dim(),
            region.dim()
        )));
    }
    let d = reference.dim();
    let pts = grid_points(region, points_per_axis);
    let per_point = par::try_map_slice(&pts, |x| -> Result<f64> {
        let g_ref = reference.metric_jet(x, k + 1)?;
        let g_pb = pulled_back.metric_jet(x, k)?;
        let (gm, gi) = metric_pair(&g_ref, d, x)?;
        let gamma = christoffel_jet(&g_ref, d)?;
        let diff: Vec<Jet> = g_pb
            .iter()
            .zip(&g_ref)
            .map(|(a, b)| a - &b.truncate(k))
            .collect();
        let mut t = Tensor::new(d, vec![Slot::Co, Slot::Co], diff)?;
        let mut worst = values(&t).norm_with(&gm, &gi)?;
        for _ in 0..k {
            t = covariant_derivative_jet(&t, &gamma)?;
            worst = worst.max(values(&t).norm_with(&gm, &gi)?);
        }
        Ok(worst)
    })?;
    Ok(per_point.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests;
