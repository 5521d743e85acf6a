use super::*;
use crate::chart::{Embedding, MetricFormula};
use crate::jet::Real;
use crate::metrics::*;
use std::f64::consts::PI;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn gamma_at(c: &MetricChart, x: &[f64], k: usize, i: usize, j: usize) -> f64 {
    *christoffel(c, x).unwrap().get(&[i, j, k])
}

#[test]
fn polar_christoffel() {
    let c = polar_chart();
    let x = [2.0, 0.7];
    assert!(close(gamma_at(&c, &x, 0, 1, 1), -2.0, 1e-12));
    assert!(close(gamma_at(&c, &x, 1, 0, 1), 0.5, 1e-12));
    assert!(close(gamma_at(&c, &x, 1, 1, 0), 0.5, 1e-12));
    assert!(close(gamma_at(&c, &x, 0, 0, 0), 0.0, 1e-12));
    assert!(curvature_tensor(&c, &x).unwrap().max_abs() < 1e-10);
}

#[test]
fn sphere_christoffel_and_curvature() {
    for rho in [0.5, 1.0, 2.0] {
        let c = sphere_chart(rho);
        let th = 1.1;
        let x = [th, 0.3];
        assert!(close(
            gamma_at(&c, &x, 0, 1, 1),
            -th.sin() * th.cos(),
            1e-12
        ));
        assert!(close(gamma_at(&c, &x, 1, 0, 1), th.cos() / th.sin(), 1e-12));
        let k = sectional_curvature(&c, &x, 0, 1).unwrap();
        assert!(close(k, 1.0 / (rho * rho), 1e-10), "{k}");
        let n = curvature_derivative_norms(&c, &x, 2).unwrap();
        assert!(close(n[0], 2.0 / (rho * rho), 1e-10));
        assert!(n[1] < 1e-9 && n[2] < 1e-8, "{n:?}");
    }
}

#[test]
fn hyperbolic_and_conformal() {
    let h = hyperbolic_chart();
    let x = [0.4, 0.7];
    assert!(close(
        sectional_curvature(&h, &x, 0, 1).unwrap(),
        -1.0,
        1e-10
    ));
    // y^{-2} delta: Gamma^x_xy = -1/y, Gamma^y_xx = 1/y, Gamma^y_yy = -1/y
    assert!(close(gamma_at(&h, &x, 0, 0, 1), -1.0 / 0.7, 1e-12));
    assert!(close(gamma_at(&h, &x, 1, 0, 0), 1.0 / 0.7, 1e-12));
    assert!(close(gamma_at(&h, &x, 1, 1, 1), -1.0 / 0.7, 1e-12));

    let c = conformal_chart();
    let x = [0.3, -0.2];
    assert!(close(gamma_at(&c, &x, 0, 0, 0), 1.0, 1e-12));
    assert!(close(gamma_at(&c, &x, 0, 1, 1), -1.0, 1e-12));
    assert!(close(gamma_at(&c, &x, 1, 0, 1), 1.0, 1e-12));
    assert!(curvature_tensor(&c, &x).unwrap().max_abs() < 1e-10);
}

#[test]
fn metric_is_parallel() {
    for c in [
        polar_chart(),
        sphere_chart(1.5),
        hyperbolic_chart(),
        conformal_chart(),
    ] {
        let x = [1.2, 0.4];
        let f = TensorField::metric_of(&c);
        let dg = covariant_derivative_tensor(&c, &x, &f).unwrap();
        assert!(dg.max_abs() < 1e-12, "{} {}", c.name(), dg.max_abs());
    }
}

#[test]
fn fd_matches_oracle() {
    let c = sphere_chart(1.0);
    let fd = c.clone().without_oracle().with_fd_step(1e-3);
    let x = [1.0, 0.5];
    let a = curvature_tensor(&c, &x).unwrap();
    let b = curvature_tensor(&fd, &x).unwrap();
    assert!(a.sub(&b).unwrap().max_abs() < 1e-4);
    let f = TensorField::metric_of(&fd);
    assert!(covariant_derivative_tensor(&fd, &x, &f).unwrap().max_abs() < 1e-6);
}

#[test]
fn curvature_symmetries() {
    let c = MetricChart::from_fn(
        "skew",
        Domain::boxed(&[-1.0; 3], &[1.0; 3]),
        |x: &[f64]| {
            let a = 1.0 + 0.3 * x[0] * x[1];
            let b = 2.0 + x[2].sin() * 0.4;
            let e = 0.2 * x[0];
            vec![a, e, 0.1, e, b, 0.0, 0.1, 0.0, 1.0 + x[1] * x[1]]
        },
    );
    let x = [0.2, -0.3, 0.5];
    let r = curvature_tensor(&c, &x).unwrap();
    let g = c.metric(&x);
    // lower to R_ijkl = g_lm R^m_ijk
    let low = |i, j, k, l| {
        (0..3)
            .map(|m| g[(l, m)] * r.get(&[i, j, k, m]))
            .sum::<f64>()
    };
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let v = low(i, j, k, l);
                    assert!(close(v, -low(i, k, j, l), 1e-6));
                    assert!(close(v, -low(l, j, k, i), 1e-6));
                    assert!(close(v, low(j, i, l, k), 1e-6));
                }
                let b = r.get(&[i, j, k, 0]) + r.get(&[j, k, i, 0]) + r.get(&[k, i, j, 0]);
                assert!(b.abs() < 1e-6);
            }
        }
    }
}

#[test]
fn printed_convention_differs() {
    let c = sphere_chart(1.0);
    let x = [1.0, 0.0];
    let a = curvature_tensor_with(&c, &x, CurvatureConvention::Standard).unwrap();
    let b = curvature_tensor_with(&c, &x, CurvatureConvention::AsPrinted).unwrap();
    assert!(a.sub(&b).unwrap().max_abs() > 1e-3);
    let na = tensor_norm(&c, &x, &a).unwrap();
    let nb = tensor_norm(&c, &x, &b).unwrap();
    assert!(close(na, 2.0, 1e-10));
    assert!((nb - 2.0).abs() > 1e-2, "{nb}");
}

struct Warped;
impl MetricFormula for Warped {
    fn dim(&self) -> usize {
        2
    }
    fn coefficients<T: Real>(&self, x: &[T]) -> Vec<T> {
        let f = x[0].clone() + x[0].powi(3);
        vec![
            T::lift(&x[0], 1.0),
            T::lift(&x[0], 0.0),
            T::lift(&x[0], 0.0),
            f.powi(2),
        ]
    }
}

#[test]
fn curvature_derivatives_on_warped_product() {
    // dr^2 + f^2 dth^2 with f = r + r^3: K = -6 / (1 + r^2), |nabla R| = 2|K'|,
    // |nabla^2 R| = 2 sqrt(K''^2 + (f' K' / f)^2)
    let c = MetricChart::from_formula("warped", Domain::boxed(&[0.1, -4.0], &[3.0, 4.0]), Warped);
    let r: f64 = 1.0;
    let n = curvature_derivative_norms(&c, &[r, 0.2], 2).unwrap();
    let k = -6.0 / (1.0 + r * r);
    let k1 = 12.0 * r / (1.0 + r * r).powi(2);
    let k2 = 12.0 * (1.0 - 3.0 * r * r) / (1.0 + r * r).powi(3);
    let (f, f1) = (r + r.powi(3), 1.0 + 3.0 * r * r);
    assert!(close(n[0], 2.0 * k.abs(), 1e-10));
    assert!(close(n[1], 2.0 * k1.abs(), 1e-9));
    assert!(
        close(n[2], 2.0 * (k2 * k2 + (f1 * k1 / f).powi(2)).sqrt(), 1e-8),
        "{n:?}"
    );
}

#[test]
fn norms_are_coordinate_invariant() {
    // the same round sphere through an embedding, in a rotated chart
    struct Tilted;
    impl Embedding for Tilted {
        fn dim(&self) -> usize {
            2
        }
        fn ambient_dim(&self) -> usize {
            3
        }
        fn embed<T: Real>(&self, x: &[T]) -> Vec<T> {
            let (th, ph) = (&x[0], &x[1]);
            vec![th.sin() * ph.cos(), th.cos(), th.sin() * ph.sin()]
        }
    }
    let c = MetricChart::from_embedding("tilted", Domain::boxed(&[0.3, -3.0], &[2.8, 3.0]), Tilted);
    let n = curvature_derivative_norms(&c, &[0.9, 0.4], 1).unwrap();
    assert!(close(n[0], 2.0, 1e-9) && n[1] < 1e-8, "{n:?}");
}

#[test]
fn product_and_refusals() {
    let c = sphere_line_chart(2.0);
    let n = curvature_derivative_norms(&c, &[1.0, 0.0, 0.5], 1).unwrap();
    assert!(close(n[0], 0.5, 1e-10) && n[1] < 1e-10);
    assert!(matches!(
        curvature_derivative_norms(&c, &[1.0, 0.0, 0.5], 4),
        Err(Error::Refused(_))
    ));
}

#[test]
fn bilipschitz_values() {
    assert!(close(bilipschitz_factor(0.75).unwrap(), 2.0, 1e-12));
    assert!(close(
        bilipschitz_factor(0.21).unwrap(),
        1.0 / 0.79f64.sqrt(),
        1e-12
    ));
    assert!(close(bilipschitz_factor(0.0).unwrap(), 1.0, 0.0));
    assert!(bilipschitz_factor(1.0).is_err());
    assert!(bilipschitz_factor(-0.1).is_err());
}

#[test]
fn defect_of_scaled_metric() {
    let reference = flat_chart(2, 2.0);
    let region = Domain::boxed(&[-1.0, -1.0], &[1.0, 1.0]);
    for eps in [0.5, 0.1, 0.01] {
        let pulled = MetricChart::from_formula(
            "scaled",
            reference.domain().clone(),
            Constant(vec![1.0 + eps, 0.0, 0.0, 1.0 + eps], 2),
        );
        let d = smooth_convergence_defect(&reference, &pulled, &region, 2).unwrap();
        assert!(close(d, eps * 2f64.sqrt(), 1e-12));
    }
    // a position-dependent perturbation picks up derivative terms
    let bump = MetricChart::from_fn("bump", reference.domain().clone(), |x: &[f64]| {
        let s = 1.0 + 0.01 * (3.0 * x[0]).sin();
        vec![s, 0.0, 0.0, 1.0]
    });
    let d0 = smooth_convergence_defect(&reference, &bump, &region, 0).unwrap();
    let d1 = smooth_convergence_defect(&reference, &bump, &region, 1).unwrap();
    assert!(d0 <= 0.0101 && d1 > 0.029, "{d0} {d1}");
}

#[test]
fn sphere_defect_against_scaled_sphere() {
    let a = sphere_chart(1.0);
    let b = sphere_chart(1.1);
    let region = Domain::boxed(&[0.5, -1.0], &[PI - 0.5, 1.0]);
    let d = smooth_convergence_defect(&a, &b, &region, 1).unwrap();
    assert!(close(d, 0.21 * 2f64.sqrt(), 1e-9), "{d}");
}
