//! Threaded versus single-worker timings of the data-parallel kernels.

use std::f64::consts::{FRAC_PI_2, PI};

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use leafscope::calculus::smooth_convergence_defect_on_grid;
use leafscope::chart::Domain;
use leafscope::geodesics::injectivity_radius_estimate;
use leafscope::metric_space::{gh_bounds, PointedFiniteMetricSpace};
use leafscope::metrics::sphere_chart;
use leafscope::par;

fn circle(n: usize, phase: f64, radius: f64) -> PointedFiniteMetricSpace {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let a = phase + 2.0 * PI * k as f64 / n as f64;
            (radius * a.cos(), radius * a.sin())
        })
        .collect();
    let dist = pts
        .iter()
        .map(|a| {
            pts.iter()
                .map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
                .collect()
        })
        .collect();
    PointedFiniteMetricSpace::from_matrix(dist, 0).unwrap()
}

fn compare<R: Send>(c: &mut Criterion, group: &str, f: impl Fn() -> R + Sync + Send + Copy) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| black_box(f())));
    g.bench_function("sequential", |b| b.iter(|| black_box(par::sequential(f))));
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let x = circle(160, 0.0, 2.0);
    let y = circle(150, 0.1, 2.1);
    compare(c, "gh_bounds", || gh_bounds(&x, &y, 4));

    let sphere = sphere_chart(1.0);
    compare(c, "injectivity", || {
        injectivity_radius_estimate(&sphere, &[FRAC_PI_2, 0.0], 3.5, 64).unwrap()
    });

    let scaled = sphere_chart(1.1);
    let region = Domain::boxed(&[0.5, 0.5], &[2.5, 2.5]);
    compare(c, "defect_grid", || {
        smooth_convergence_defect_on_grid(&sphere, &scaled, &region, 2, 33).unwrap()
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
