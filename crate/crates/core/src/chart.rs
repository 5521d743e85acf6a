//! Coordinate charts carrying a Riemannian metric.
//!
//! A [`MetricChart`] evaluates the coefficient matrix `g_ij(x)` on an
//! axis-aligned box (some axes may be periodic) and can produce the Taylor
//! jet of `g` at a point. Jets come from an exact oracle when the chart was
//! built from a formula or an embedding, and from central finite
//! differences otherwise.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::jet::{Jet, Real, MAX_ORDER};

/// Smallest eigenvalue accepted for a metric coefficient matrix.
pub const MIN_EIGENVALUE: f64 = 1e-12;
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// `Some(period)` for axes that wrap; such axes span `[lo, lo + period)`.
    pub period: Vec<Option<f64>>,
}

impl Domain {
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        Domain {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            period: vec![None; lo.len()],
        }
    }

    pub fn with_period(mut self, axis: usize, period: f64) -> Self {
        self.period[axis] = Some(period);
        self.hi[axis] = self.lo[axis] + period;
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.period[axis].is_some()
    }

    /// Maps periodic coordinates back into their fundamental interval.
    pub fn wrap(&self, x: &mut [f64]) {
        for (k, p) in self.period.iter().enumerate() {
            if let Some(p) = p {
                x[k] = self.lo[k] + (x[k] - self.lo[k]).rem_euclid(*p);
            }
        }
    }

    /// Coordinate difference `b - a`, taking the short way round periodic axes.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        (0..a.len())
            .map(|k| {
                let mut d = b[k] - a[k];
                if let Some(p) = self.period[k] {
                    d -= p * (d / p).round();
                }
                d
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(k, &v)| {
            v.is_finite() && (self.period[k].is_some() || (v >= self.lo[k] && v <= self.hi[k]))
        })
    }

    /// Distance from `x` to the nearest non-periodic face.
    pub fn margin(&self, x: &[f64]) -> f64 {
        (0..x.len())
            .filter(|&k| self.period[k].is_none())
            .map(|k| (x[k] - self.lo[k]).min(self.hi[k] - x[k]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }
}

/// A metric given by a formula, evaluable on floats and on jets.
pub trait MetricFormula: Send + Sync + 'static {
    fn dim(&self) -> usize;
    /// Row-major `d x d` coefficient matrix at `x`.
    fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T>;
}

/// A map into Euclidean space; the chart carries the pulled-back metric.
pub trait Embedding: Send + Sync + 'static {
    fn dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn embed<T: Real>(&self, x: &[T]) -> Vec<T>;
}

type CoeffFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type JetFn = dyn Fn(&[f64], usize) -> Vec<Jet> + Send + Sync;

#[derive(Clone)]
pub struct MetricChart {
    name: String,
    domain: Domain,
    coeff: Arc<CoeffFn>,
    jet: Option<Arc<JetFn>>,
    fd_step: f64,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("exact_derivatives", &self.jet.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl MetricChart {
    /// Chart with finite-difference derivatives only.
    pub fn from_fn(
        name: impl Into<String>,
        domain: Domain,
        coeff: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        MetricChart {
            name: name.into(),
            domain,
            coeff: Arc::new(coeff),
            jet: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn from_formula<M: MetricFormula>(
        name: impl Into<String>,
        domain: Domain,
        formula: M,
    ) -> Self {
        assert_eq!(
            formula.dim(),
            domain.dim(),
            "formula and domain dimensions differ"
        );
        let formula = Arc::new(formula);
        let f1 = formula.clone();
        let f2 = formula;
        MetricChart {
            name: name.into(),
            domain,
            coeff: Arc::new(move |x: &[f64]| f1.coefficients(x)),
            jet: Some(Arc::new(move |x: &[f64], order: usize| {
                f2.coefficients(&Jet::point(x, order))
            })),
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn from_embedding<E: Embedding>(
        name: impl Into<String>,
        domain: Domain,
        embedding: E,
    ) -> Self {
        assert_eq!(
            embedding.dim(),
            domain.dim(),
            "embedding and domain dimensions differ"
        );
        let emb = Arc::new(embedding);
        let e1 = emb.clone();
        let e2 = emb;
        MetricChart {
            name: name.into(),
            domain,
            coeff: Arc::new(move |x: &[f64]| {
                pullback(&*e1, x, 0)
                    .into_iter()
                    .map(|j| j.value())
                    .collect()
            }),
            jet: Some(Arc::new(move |x: &[f64], order: usize| {
                pullback(&*e2, x, order)
            })),
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    /// Drops the exact derivative oracle, forcing finite differences.
    pub fn without_oracle(mut self) -> Self {
        self.jet = None;
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        assert_eq!(domain.dim(), self.domain.dim());
        self.domain = domain;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn has_oracle(&self) -> bool {
        self.jet.is_some()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!(
                "point has {} coordinates, chart `{}` has dimension {}",
                x.len(),
                self.name,
                self.dim()
            )));
        }
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!(
                "point {x:?} is outside chart `{}`",
                self.name
            )));
        }
        Ok(())
    }

    /// Raw coefficients without validation.
    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        (self.coeff)(x)
    }

    pub fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.coefficients(x))
    }

    /// Metric at `x` after checking it is symmetric positive definite.
    pub fn checked_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let g = self.metric(x);
        let sym = (&g + g.transpose()) * 0.5;
        let lambda = SymmetricEigen::new(sym).eigenvalues.min();
        if !(lambda > MIN_EIGENVALUE) {
            return Err(Error::Degenerate {
                point: x.to_vec(),
                min_eigenvalue: lambda,
            });
        }
        Ok(g)
    }

    /// `g^{ij}` at `x`.
    pub fn inverse_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.checked_metric(x)?;
        g.clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::Degenerate {
                point: x.to_vec(),
                min_eigenvalue: SymmetricEigen::new(g).eigenvalues.min(),
            })
    }

    /// `g`-length of a coordinate vector at `x`.
    pub fn speed(&self, x: &[f64], v: &[f64]) -> f64 {
        let c = self.coefficients(x);
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += c[i * d + j] * v[i] * v[j];
            }
        }
        s.max(0.0).sqrt()
    }

    /// Jet of the metric coefficients at `x`, to total order `order`.
    pub fn metric_jet(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.check_point(x)?;
        if order > MAX_ORDER {
            return Err(Error::Refused(format!(
                "derivative order {order} exceeds {MAX_ORDER}"
            )));
        }
        match &self.jet {
            Some(f) => Ok(f(x, order)),
            None => {
                self.check_fd_margin(x, order)?;
                let coeff = self.coeff.clone();
                Ok(fd_jet(
                    &*coeff,
                    x,
                    order,
                    self.fd_step,
                    self.dim() * self.dim(),
                ))
            }
        }
    }

    /// Stencil reach needed for finite differences up to `order`.
    pub fn fd_reach(&self, order: usize) -> f64 {
        (1..=order)
            .map(|m| stencil_reach(m) as f64 * fd_step_for(self.fd_step, m))
            .fold(0.0, f64::max)
    }

    fn check_fd_margin(&self, x: &[f64], order: usize) -> Result<()> {
        let reach = self.fd_reach(order);
        if self.domain.margin(x) < reach {
            return Err(Error::Margin {
                point: x.to_vec(),
                margin: reach,
            });
        }
        Ok(())
    }
}

/// Pull back the Euclidean metric through an embedding: `g_ij = <d_i h, d_j h>`.
fn pullback<E: Embedding + ?Sized>(e: &E, x: &[f64], order: usize) -> Vec<Jet> {
    let d = e.dim();
    let pts = Jet::point(x, order + 1);
    let h = e.embed(&pts);
    let dh: Vec<Vec<Jet>> = (0..d)
        .map(|i| h.iter().map(|c| c.partial(i)).collect())
        .collect();
    let mut g = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = dh[i][0].like(0.0);
            for (a, b) in dh[i].iter().zip(&dh[j]) {
                acc = &acc + &(a * b);
            }
            g.push(acc);
        }
    }
    g
}

/// Step used for derivatives of total order `m`. Orders 1 and 2 use the
/// nominal step, so their error is O(step^2); higher orders grow the step to
/// balance truncation against cancellation.
pub fn fd_step_for(step: f64, m: usize) -> f64 {
    if m <= 2 {
        step
    } else {
        step.powf(4.0 / (m as f64 + 2.0))
    }
}

fn stencil_reach(order: usize) -> usize {
    order.div_ceil(2)
}

/// Second-order central difference weights for the `k`-th derivative, at
/// offsets `-reach..=reach`.
fn central_weights(k: usize) -> Vec<f64> {
    match k {
        0 => vec![1.0],
        1 => vec![-0.5, 0.0, 0.5],
        2 => vec![1.0, -2.0, 1.0],
        3 => vec![-0.5, 1.0, 0.0, -1.0, 0.5],
        4 => vec![1.0, -4.0, 6.0, -4.0, 1.0],
        5 => vec![-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5],
        6 => vec![1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0],
        7 => vec![-0.5, 3.0, -7.0, 7.0, 0.0, -7.0, 7.0, -3.0, 0.5],
        _ => vec![1.0, -8.0, 28.0, -56.0, 70.0, -56.0, 28.0, -8.0, 1.0],
    }
}

/// Jet of a vector-valued function estimated by tensor-product central
/// differences.
pub fn fd_jet(
    f: &(dyn Fn(&[f64]) -> Vec<f64> + Send + Sync),
    x: &[f64],
    order: usize,
    step: f64,
    outputs: usize,
) -> Vec<Jet> {
    let vars = x.len();
    let mut jets: Vec<Jet> = (0..outputs)
        .map(|_| Jet::constant(vars, order, 0.0))
        .collect();
    let base = f(x);
    for (j, v) in jets.iter_mut().zip(&base) {
        *j = j.clone() + *v;
    }
    if order == 0 {
        return jets;
    }
    let alphas = multi_indices(vars, order);
    let mut coeffs = vec![vec![0.0; alphas.len()]; outputs];
    for (slot, alpha) in alphas.iter().enumerate() {
        let m: usize = alpha.iter().map(|&a| a as usize).sum();
        if m == 0 {
            for (o, c) in coeffs.iter_mut().enumerate() {
                c[slot] = base[o];
            }
            continue;
        }
        let h = fd_step_for(step, m);
        let weights: Vec<Vec<f64>> = alpha.iter().map(|&a| central_weights(a as usize)).collect();
        let mut acc = vec![0.0; outputs];
        let mut idx = vec![0usize; vars];
        let mut pt = x.to_vec();
        loop {
            let mut w = 1.0;
            for k in 0..vars {
                let reach = (weights[k].len() - 1) / 2;
                w *= weights[k][idx[k]];
                pt[k] = x[k] + (idx[k] as f64 - reach as f64) * h;
            }
            if w != 0.0 {
                for (a, v) in acc.iter_mut().zip(f(&pt)) {
                    *a += w * v;
                }
            }
            let mut k = 0;
            while k < vars {
                idx[k] += 1;
                if idx[k] < weights[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == vars {
                break;
            }
        }
        let fact: f64 = alpha
            .iter()
            .map(|&a| (1..=a as u32).map(|v| v as f64).product::<f64>())
            .product();
        let scale = h.powi(m as i32) * fact;
        for (o, c) in coeffs.iter_mut().enumerate() {
            c[slot] = acc[o] / scale;
        }
    }
    jets.iter_mut()
        .zip(coeffs)
        .map(|(j, c)| Jet::from_taylor(vars, j.order(), c))
        .collect()
}

/// Multi-indices of total degree `<= order` in the graded order used by jets.
pub fn multi_indices(vars: usize, order: usize) -> Vec<Vec<u8>> {
    Jet::monomials(vars, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Polar;
    impl MetricFormula for Polar {
        fn dim(&self) -> usize {
            2
        }
        fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T> {
            let r2 = x[0].clone() * x[0].clone();
            vec![x[0].lift(1.0), x[0].lift(0.0), x[0].lift(0.0), r2]
        }
    }

    #[test]
    fn inverse_of_diagonal_metric() {
        let c = MetricChart::from_fn("diag", Domain::boxed(&[-1.0, -1.0], &[1.0, 1.0]), |_| {
            vec![4.0, 0.0, 0.0, 9.0]
        });
        let gi = c.inverse_metric(&[0.0, 0.0]).unwrap();
        assert!((gi[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((gi[(1, 1)] - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let c = MetricChart::from_fn("bad", Domain::boxed(&[-1.0, -1.0], &[1.0, 1.0]), |_| {
            vec![1.0, 1.0, 1.0, 1.0]
        });
        assert!(matches!(
            c.inverse_metric(&[0.0, 0.0]),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn finite_differences_agree_with_the_oracle_at_second_order() {
        let domain = Domain::boxed(&[0.5, -3.0], &[3.0, 3.0]);
        let exact = MetricChart::from_formula("polar", domain.clone(), Polar);
        let x = [1.3, 0.2];
        let jet = exact.metric_jet(&x, 2).unwrap();
        let err = |step: f64| {
            let fd = MetricChart::from_formula("polar", domain.clone(), Polar)
                .without_oracle()
                .with_fd_step(step);
            let j = fd.metric_jet(&x, 2).unwrap();
            (j[3].derivative(&[1, 0]) - jet[3].derivative(&[1, 0])).abs()
                + (j[3].derivative(&[2, 0]) - jet[3].derivative(&[2, 0])).abs()
        };
        // central differences are exact on quadratics up to rounding
        assert!(err(1e-2) < 1e-9);
    }

    #[test]
    fn fd_error_falls_fourfold_when_step_halves() {
        let domain = Domain::boxed(&[-2.0, -2.0], &[2.0, 2.0]);
        let f = |x: &[f64]| vec![x[0].sin().exp(), 0.0, 0.0, 1.0 + x[1].powi(4)];
        let exact = |x: &[f64]| x[0].cos() * x[0].sin().exp();
        let x = [0.4, 0.3];
        let err = |h: f64| {
            let c = MetricChart::from_fn("t", domain.clone(), f).with_fd_step(h);
            let j = c.metric_jet(&x, 1).unwrap();
            (j[0].derivative(&[1, 0]) - exact(&x)).abs()
        };
        let ratio = err(2e-2) / err(1e-2);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn margin_error_near_boundary() {
        let c = MetricChart::from_fn("t", Domain::boxed(&[0.0], &[1.0]), |_| vec![1.0]);
        assert!(matches!(
            c.metric_jet(&[1e-6], 2),
            Err(Error::Margin { .. })
        ));
        assert!(c.metric_jet(&[0.5], 2).is_ok());
    }

    #[test]
    fn periodic_wrap_and_displacement() {
        let d = Domain::boxed(&[0.0, 0.0], &[1.0, 1.0]).with_period(0, 1.0);
        let mut x = [1.25, 0.5];
        d.wrap(&mut x);
        assert!((x[0] - 0.25).abs() < 1e-15);
        let disp = d.displacement(&[0.9, 0.0], &[0.1, 0.0]);
        assert!((disp[0] - 0.2).abs() < 1e-12);
        assert!(d.contains(&[7.0, 0.5]));
        assert!(!d.contains(&[0.5, 1.5]));
    }
}
