use super::*;
use crate::metrics::*;
use std::f64::consts::{FRAC_PI_2, PI};

fn embed(x: &[f64]) -> [f64; 3] {
    [x[0].sin() * x[1].cos(), x[0].sin() * x[1].sin(), x[0].cos()]
}

/// Great circle on the unit sphere in spherical coordinates.
fn great_circle(p: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    let (th, ph) = (p[0], p[1]);
    let e_th = [th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin()];
    let e_ph = [-th.sin() * ph.sin(), th.sin() * ph.cos(), 0.0];
    let tan: Vec<f64> = (0..3).map(|k| e_th[k] * v[0] + e_ph[k] * v[1]).collect();
    let speed = tan.iter().map(|c| c * c).sum::<f64>().sqrt();
    let e = embed(p);
    let q: Vec<f64> = (0..3)
        .map(|k| e[k] * (speed * t).cos() + tan[k] / speed * (speed * t).sin())
        .collect();
    vec![q[2].acos(), q[1].atan2(q[0]).rem_euclid(2.0 * PI)]
}

fn gap(c: &MetricChart, a: &[f64], b: &[f64]) -> f64 {
    c.domain()
        .displacement(a, b)
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

#[test]
fn flat_lines() {
    let c = flat_chart(3, 10.0);
    let path = integrate_geodesic(
        &c,
        &GeodesicState::new(&[0.1, 0.2, 0.3], &[1.0, -2.0, 0.5]),
        2.0,
        0.1,
    )
    .unwrap();
    assert!(gap(&c, &path.last().x, &[2.1, -3.8, 1.3]) < 1e-12);
    assert_eq!(
        exp_map(&c, &[1.0, 1.0, 1.0], &[0.0; 3], 0.1).unwrap(),
        vec![1.0; 3]
    );
    assert!(
        gap(
            &c,
            &exp_map(&c, &[0.0; 3], &[0.3, 0.4, 0.5], 0.1).unwrap(),
            &[0.3, 0.4, 0.5]
        ) < 1e-12
    );
}

#[test]
fn great_circles_close_up() {
    let c = sphere_chart(1.0);
    let p = [FRAC_PI_2, 0.0];
    for v in [[0.0, 1.0], [0.6, 0.8], [-0.28, 0.96]] {
        let path =
            integrate_geodesic(&c, &GeodesicState::new(&p, &v), 2.0 * PI, DEFAULT_STEP).unwrap();
        assert!(!path.hit_boundary);
        assert!(
            gap(&c, &path.last().x, &p) < 1e-4,
            "{v:?} {:?}",
            path.last().x
        );
        assert!(path.speed_drift <= 1e-6 * 2.0 * PI, "{}", path.speed_drift);
        let mid = great_circle(&p, &v, path.t[2000]);
        assert!(gap(&c, &path.states[2000].x, &mid) < 1e-8);
    }
}

#[test]
fn fifth_order_convergence() {
    let c = sphere_chart(1.0);
    let (p, v) = ([1.2, 0.3], [0.5, 0.7]);
    let exact = great_circle(&p, &v, 2.0);
    let err = |h: f64| {
        let path = integrate_geodesic(&c, &GeodesicState::new(&p, &v), 2.0, h).unwrap();
        gap(&c, &path.last().x, &exact)
    };
    let (e1, e2) = (err(0.2), err(0.1));
    assert!(e1 / e2 >= 8.0, "{e1:e} {e2:e}");
}

#[test]
fn radial_rays_in_polar_coordinates() {
    let c = polar_chart();
    let path =
        integrate_geodesic(&c, &GeodesicState::new(&[1.0, 0.4], &[1.5, 0.0]), 2.0, 0.01).unwrap();
    let end = &path.last().x;
    assert!((end[0] - 4.0).abs() < 1e-12 && (end[1] - 0.4).abs() < 1e-12);
    // an oblique line in polar coordinates stays a Euclidean line
    let path =
        integrate_geodesic(&c, &GeodesicState::new(&[1.0, 0.0], &[0.0, 1.0]), 1.0, 0.01).unwrap();
    let end = &path.last().x;
    assert!(
        (end[0] * end[1].cos() - 1.0).abs() < 1e-10 && (end[0] * end[1].sin() - 1.0).abs() < 1e-10
    );
}

#[test]
fn antipode_and_boundary() {
    let c = sphere_chart(1.0);
    let v = [0.6 * PI, 0.8 * PI];
    let q = exp_map(&c, &[FRAC_PI_2, 0.0], &v, DEFAULT_STEP).unwrap();
    assert!(gap(&c, &q, &[FRAC_PI_2, PI]) < 1e-4);
    let f = flat_chart(2, 1.0);
    let path =
        integrate_geodesic(&f, &GeodesicState::new(&[0.0, 0.0], &[1.0, 0.0]), 3.0, 0.1).unwrap();
    assert!(path.hit_boundary && path.end_time() <= 1.0 + 1e-12);
    assert!(matches!(
        exp_map(&f, &[0.0, 0.0], &[2.0, 0.0], 0.1),
        Err(Error::BoundaryExit { .. })
    ));
    assert!(matches!(
        integrate_geodesic(&f, &GeodesicState::new(&[0.0, 0.0], &[1.0, 0.0]), 1.0, 0.0),
        Err(Error::InvalidInput(_))
    ));
    assert!(
        integrate_geodesic(&f, &GeodesicState::new(&[3.0, 0.0], &[1.0, 0.0]), 1.0, 0.1).is_err()
    );
}

#[test]
fn csv_rows() {
    let c = flat_chart(2, 5.0);
    let path =
        integrate_geodesic(&c, &GeodesicState::new(&[0.0, 0.0], &[1.0, 2.0]), 1.0, 0.5).unwrap();
    let csv = path.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,x1,x2,v1,v2");
    assert_eq!(lines.len(), 4);
    let last: Vec<f64> = lines[3].split(',').map(|c| c.parse().unwrap()).collect();
    for (a, b) in last.iter().zip([1.0, 1.0, 2.0, 1.0, 2.0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn log_inverts_exp() {
    let c = hyperbolic_chart();
    let p = [0.2, 1.0];
    let v = [0.7, 0.4];
    let q = exp_map(&c, &p, &v, 0.01).unwrap();
    let w = log_map(&c, &p, &q, 0.01).unwrap();
    assert!(
        (w[0] - v[0]).abs() < 1e-8 && (w[1] - v[1]).abs() < 1e-8,
        "{w:?}"
    );
}

#[test]
fn distances() {
    let f = flat_chart(2, 3.0);
    assert_eq!(
        riemannian_distance(&f, &[0.5, 0.5], &[0.5, 0.5]).unwrap(),
        0.0
    );
    let d = riemannian_distance(&f, &[-1.0, 0.2], &[1.3, 0.9]).unwrap();
    assert!((d - (2.3f64.powi(2) + 0.49).sqrt()).abs() < 1e-8, "{d}");

    let s = sphere_chart(1.0);
    let p = [FRAC_PI_2, 0.0];
    for theta in [0.3, 1.0, 2.0] {
        let v = [0.6 * theta, 0.8 * theta];
        let q = great_circle(&p, &v, 1.0);
        let d = riemannian_distance(&s, &p, &q).unwrap();
        assert!((d - theta).abs() < 0.01 * theta, "{theta} {d}");
        let back = riemannian_distance(&s, &q, &p).unwrap();
        assert!((back - d).abs() < 1e-6);
        let mut cfg = DistanceConfig::for_dim(2);
        cfg.refine = false;
        let graph = riemannian_distance_with(&s, &p, &q, &cfg).unwrap();
        assert!(graph >= d - 1e-9 && graph < 1.03 * theta, "{theta} {graph}");
    }
    // the short way round the torus
    let t = torus_chart(1.0);
    let d = riemannian_distance(&t, &[0.05, 0.5], &[0.95, 0.5]).unwrap();
    assert!((d - 0.1).abs() < 1e-8, "{d}");
}

#[test]
fn grid_graph_on_hyperbolic_plane() {
    let c = hyperbolic_chart();
    let region = crate::chart::Domain::boxed(&[-2.0, 0.5], &[2.0, 4.0]);
    let g = GridGraph::new(&c, &region, 161, 3).unwrap();
    let field = g.distance_field(&[0.0, 1.0]).unwrap();
    // vertical distance is ln(y1 / y0)
    let d = g.distance_to(&field, &[0.0, 3.0]).unwrap();
    assert!((d - 3f64.ln()).abs() < 0.01, "{d}");
    let path = g.path_to(&field, &[0.0, 3.0]).unwrap();
    assert!(path.len() > 2);
}

#[test]
fn normal_charts() {
    let f = flat_chart(2, 5.0);
    let n = normal_pullback_metric(&f, &[0.3, -0.2], 1.0, 11).unwrap();
    for (_, c) in n.ball_samples() {
        assert!((c[0] - 1.0).abs() < 1e-8 && c[1].abs() < 1e-8 && (c[3] - 1.0).abs() < 1e-8);
    }

    let s = sphere_chart(1.0);
    let n = normal_pullback_metric(&s, &[FRAC_PI_2, 1.0], 1.0, 21).unwrap();
    let closed = |y: &[f64]| {
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let q = if r == 0.0 { 1.0 } else { (r.sin() / r).powi(2) };
        let u = if r == 0.0 {
            [0.0, 0.0]
        } else {
            [y[0] / r, y[1] / r]
        };
        [
            u[0] * u[0] + q * (1.0 - u[0] * u[0]),
            (1.0 - q) * u[0] * u[1],
            (1.0 - q) * u[0] * u[1],
            u[1] * u[1] + q * (1.0 - u[1] * u[1]),
        ]
    };
    let mut count = 0;
    for (y, c) in n.ball_samples() {
        let e = closed(y);
        for k in 0..4 {
            assert!((c[k] - e[k]).abs() < 1e-6, "{y:?} {c:?} {e:?}");
        }
        // radial unit vectors keep unit length
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        if r > 0.0 {
            let u = [y[0] / r, y[1] / r];
            let l = c[0] * u[0] * u[0] + 2.0 * c[1] * u[0] * u[1] + c[3] * u[1] * u[1];
            assert!((l - 1.0).abs() < 1e-6);
        }
        count += 1;
    }
    assert!(count > 250);
    for y in [[0.13, -0.41], [0.55, 0.62], [-0.3, 0.05]] {
        let c = n.chart.coefficients(&y);
        let e = closed(&y);
        for k in 0..4 {
            assert!((c[k] - e[k]).abs() < 1e-3);
        }
    }
    assert!((n.chart.coefficients(&[0.0, 0.0])[0] - 1.0).abs() < 1e-8);
    assert!(n.coefficient_sup() <= 1.0 + 1e-8);
}

#[test]
fn normal_chart_refuses_past_injectivity() {
    let t = torus_chart(1.0);
    assert!(normal_pullback_metric(&t, &[0.5, 0.5], 0.4, 21).is_ok());
    assert!(matches!(
        normal_pullback_metric(&t, &[0.5, 0.5], 0.8, 21),
        Err(Error::Injectivity { .. })
    ));
}

#[test]
fn torus_transitions_are_rigid() {
    let t = torus_chart(1.0);
    let a = normal_pullback_metric(&t, &[0.3, 0.3], 0.2, 9).unwrap();
    let b = normal_pullback_metric(&t, &[0.35, 0.32], 0.2, 9).unwrap();
    for y in [[0.0, 0.0], [0.05, -0.1], [-0.1, 0.08]] {
        let n = a.transition_derivative_norm(&b, &y).unwrap();
        assert!((n - 1.0).abs() < 1e-6);
        let z = a.transition(&b, &y).unwrap();
        assert!((z[0] - (y[0] - 0.05)).abs() < 1e-8 && (z[1] - (y[1] - 0.02)).abs() < 1e-8);
    }
}

#[test]
fn injectivity_estimates() {
    let f = flat_chart(2, 10.0);
    let e = injectivity_radius_estimate(&f, &[0.0, 0.0], 2.0, 64).unwrap();
    assert!(e.censored && e.radius == 2.0);

    let t = torus_chart(1.0);
    let e = injectivity_radius_estimate(&t, &[0.3, 0.7], 1.0, 256).unwrap();
    assert!(!e.censored && (e.radius - 0.5).abs() < 0.025, "{e:?}");

    let s = sphere_chart(1.0);
    let e = injectivity_radius_estimate(&s, &[FRAC_PI_2, 0.0], 3.5, 256).unwrap();
    assert!(!e.censored && (e.radius - PI).abs() < 0.05 * PI, "{e:?}");
}
