//! Built-in example metrics, addressable by registry strings such as
//! `"flat"`, `"polar"`, `"sphere:2"`, `"hyperbolic"` or `"torus:1"`.

use std::f64::consts::PI;

use crate::chart::{Domain, MetricChart, MetricFormula};
use crate::error::{Error, Result};
use crate::jet::Real;

/// Euclidean metric in `d` dimensions.
pub struct Flat(pub usize);

impl MetricFormula for Flat {
    fn dim(&self) -> usize {
        self.0
    }
    fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T> {
        let d = self.0;
        (0..d * d)
            .map(|k| x[0].lift(if k / d == k % d { 1.0 } else { 0.0 }))
            .collect()
    }
}

/// Constant symmetric positive definite coefficients.
pub struct Constant(pub Vec<f64>, pub usize);

impl MetricFormula for Constant {
    fn dim(&self) -> usize {
        self.1
    }
    fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T> {
        self.0.iter().map(|&v| x[0].lift(v)).collect()
    }
}

/// `dr^2 + r^2 dtheta^2` in coordinates `(r, theta)`.
pub struct Polar;

impl MetricFormula for Polar {
    fn dim(&self) -> usize {
        2
    }
    fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T> {
        let z = x[0].lift(0.0);
        vec![x[0].lift(1.0), z.clone(), z, x[0].clone() * x[0].clone()]
    }
}

/// Round sphere of radius `rho` in coordinates `(theta, phi)`:
/// `rho^2 (dtheta^2 + sin^2 theta dphi^2)`.
pub struct Sphere(pub f64);

impl MetricFormula for Sphere {
    fn dim(&self) -> usize {
        2
    }
    fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T> {
        let r2 = self.0 * self.0;
        let s = x[0].sin();
        let z = x[0].lift(0.0);
        vec![x[0].lift(r2), z.clone(), z, s.clone() * s * r2]
    }
}

/// Upper half-plane `(dx^2 + dy^2) / y^2`, curvature -1.
pub struct Hyperbolic;

impl MetricFormula for Hyperbolic {
    fn dim(&self) -> usize {
        2
    }
    fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T> {
        let w = x[1].powi(-2);
        let z = x[0].lift(0.0);
        vec![w.clone(), z.clone(), z, w]
    }
}

/// Conformally flat `e^{2 x^1} delta_ij` in two dimensions.
pub struct Conformal;

impl MetricFormula for Conformal {
    fn dim(&self) -> usize {
        2
    }
    fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T> {
        let w = (x[0].clone() * 2.0).exp();
        let z = x[0].lift(0.0);
        vec![w.clone(), z.clone(), z, w]
    }
}

/// Flat cylinder of radius `rho` in coordinates `(theta, z)`.
pub struct Cylinder(pub f64);

impl MetricFormula for Cylinder {
    fn dim(&self) -> usize {
        2
    }
    fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T> {
        let z = x[0].lift(0.0);
        vec![x[0].lift(self.0 * self.0), z.clone(), z, x[0].lift(1.0)]
    }
}

/// Product of the round sphere of radius `rho` with a line, `(theta, phi, w)`.
pub struct SphereLine(pub f64);

impl MetricFormula for SphereLine {
    fn dim(&self) -> usize {
        3
    }
    fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T> {
        let r2 = self.0 * self.0;
        let s = x[0].sin();
        let z = x[0].lift(0.0);
        let mut g = vec![z; 9];
        g[0] = x[0].lift(r2);
        g[4] = s.clone() * s * r2;
        g[8] = x[0].lift(1.0);
        g
    }
}

pub fn flat_chart(d: usize, half_width: f64) -> MetricChart {
    MetricChart::from_formula(
        format!("flat:{d}"),
        Domain::boxed(&vec![-half_width; d], &vec![half_width; d]),
        Flat(d),
    )
}

pub fn polar_chart() -> MetricChart {
    MetricChart::from_formula(
        "polar",
        Domain::boxed(&[0.05, 0.0], &[10.0, 2.0 * PI]).with_period(1, 2.0 * PI),
        Polar,
    )
}

/// Sphere chart; `theta` stays `0.02` away from the coordinate poles.
pub fn sphere_chart(rho: f64) -> MetricChart {
    MetricChart::from_formula(
        format!("sphere:{rho}"),
        Domain::boxed(&[0.02, 0.0], &[PI - 0.02, 2.0 * PI]).with_period(1, 2.0 * PI),
        Sphere(rho),
    )
}

pub fn hyperbolic_chart() -> MetricChart {
    MetricChart::from_formula(
        "hyperbolic",
        Domain::boxed(&[-10.0, 0.01], &[10.0, 10.0]),
        Hyperbolic,
    )
}

pub fn conformal_chart() -> MetricChart {
    MetricChart::from_formula(
        "conformal",
        Domain::boxed(&[-3.0, -3.0], &[3.0, 3.0]),
        Conformal,
    )
}

/// Flat torus with both sides of length `side`.
pub fn torus_chart(side: f64) -> MetricChart {
    MetricChart::from_formula(
        format!("torus:{side}"),
        Domain::boxed(&[0.0, 0.0], &[side, side])
            .with_period(0, side)
            .with_period(1, side),
        Flat(2),
    )
}

/// Flat cylinder `(theta, z)` of radius `rho`, `z` in `[-z_max, z_max]`.
pub fn cylinder_chart(rho: f64, z_max: f64) -> MetricChart {
    MetricChart::from_formula(
        format!("cylinder:{rho}"),
        Domain::boxed(&[0.0, -z_max], &[2.0 * PI, z_max]).with_period(0, 2.0 * PI),
        Cylinder(rho),
    )
}

pub fn sphere_line_chart(rho: f64) -> MetricChart {
    MetricChart::from_formula(
        format!("sphere_line:{rho}"),
        Domain::boxed(&[0.02, 0.0, -10.0], &[PI - 0.02, 2.0 * PI, 10.0]).with_period(1, 2.0 * PI),
        SphereLine(rho),
    )
}

pub fn registry_names() -> &'static [&'static str] {
    &[
        "flat[:d]",
        "polar",
        "sphere[:rho]",
        "hyperbolic",
        "conformal",
        "torus[:side]",
        "cylinder[:rho]",
        "sphere_line[:rho]",
    ]
}

/// Looks up a chart by registry string.
pub fn chart_by_name(id: &str) -> Result<MetricChart> {
    let (head, arg) = match id.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (id, None),
    };
    let num = |default: f64| -> Result<f64> {
        match arg {
            None => Ok(default),
            Some(a) => {
                let v: f64 = a
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad numeric parameter in `{id}`")))?;
                if v > 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::InvalidInput(format!(
                        "parameter in `{id}` must be positive"
                    )))
                }
            }
        }
    };
    match head {
        "flat" => {
            let d = num(2.0)? as usize;
            if !(1..=4).contains(&d) {
                return Err(Error::InvalidInput("flat dimension must be 1..=4".into()));
            }
            Ok(flat_chart(d, 10.0))
        }
        "polar" => Ok(polar_chart()),
        "sphere" => Ok(sphere_chart(num(1.0)?)),
        "hyperbolic" => Ok(hyperbolic_chart()),
        "conformal" => Ok(conformal_chart()),
        "torus" => Ok(torus_chart(num(1.0)?)),
        "cylinder" => Ok(cylinder_chart(num(1.0)?, 50.0)),
        "sphere_line" => Ok(sphere_line_chart(num(1.0)?)),
        _ => Err(Error::InvalidInput(format!(
            "unknown metric `{id}`; known: {}",
            registry_names().join(", ")
        ))),
    }
}
