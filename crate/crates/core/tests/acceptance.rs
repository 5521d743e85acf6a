//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails. Pass substrings as arguments to run a subset.

#![allow(clippy::needless_range_loop)]

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use leafscope::calculus::{
    christoffel, covariant_derivative_tensor, curvature_tensor, TensorField,
};
use leafscope::chart::MetricChart;
use leafscope::experiments::{run_experiment, ConvergenceReport, ExperimentConfig, ExperimentId};
use leafscope::foliation::{
    holonomy_cover, holonomy_map, holonomy_return, leaf_at, Example, ExampleId, HolonomyProbe,
    LeafParametrization, LeafSelector, HOLONOMY_MESH,
};
use leafscope::geodesics::{
    exp_map, injectivity_radius_estimate, integrate_geodesic, riemannian_distance, GeodesicState,
    DEFAULT_STEP,
};
use leafscope::metric_space::{
    exact_pointed_gh_small, gh_bounds, PointedFiniteMetricSpace, ORACLE_MAX_PAIRS,
};
use leafscope::metrics::{flat_chart, hyperbolic_chart, polar_chart, sphere_chart, torus_chart};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1

fn random_space(rng: &mut ChaCha8Rng, n: usize) -> PointedFiniteMetricSpace {
    // shortest paths on a random weighted complete graph: generally not Euclidean
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = rng.gen_range(0.2..2.5);
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = f64::min(d[i][j], d[i][k] + d[k][j]);
            }
        }
    }
    PointedFiniteMetricSpace::from_matrix(d, rng.gen_range(0..n)).unwrap()
}

fn gh_sandwich() -> Outcome {
    let step = 0.02;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_low, mut worst_up) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut count = 0;
    while count < 200 {
        let nx = rng.gen_range(1..=4);
        let ny = rng.gen_range(1..=4);
        if nx * ny > ORACLE_MAX_PAIRS {
            continue;
        }
        let x = random_space(&mut rng, nx);
        let y = random_space(&mut rng, ny);
        let b = gh_bounds(&x, &y, 4);
        let exact = exact_pointed_gh_small(&x, &y, 4, step).map_err(|e| e.to_string())?;
        worst_low = worst_low.max(b.lower - exact);
        worst_up = worst_up.max(exact - b.upper);
        count += 1;
    }
    ensure(
        worst_low <= step && worst_up <= step,
        format!("200 pairs; max(lower - exact) = {worst_low:.3e}, max(exact - upper) = {worst_up:.3e}, tolerance {step}"),
    )
}

// 2

/// `gamma[k][i][j]` in closed form.
fn christoffel_closed_form(name: &str, x: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let mut g = vec![vec![vec![0.0; 2]; 2]; 2];
    match name {
        "polar" => {
            g[0][1][1] = -x[0];
            g[1][0][1] = 1.0 / x[0];
            g[1][1][0] = 1.0 / x[0];
        }
        "hyperbolic" => {
            let y = x[1];
            g[0][0][1] = -1.0 / y;
            g[0][1][0] = -1.0 / y;
            g[1][0][0] = 1.0 / y;
            g[1][1][1] = -1.0 / y;
        }
        s if s.starts_with("sphere") => {
            g[0][1][1] = -x[0].sin() * x[0].cos();
            g[1][0][1] = x[0].cos() / x[0].sin();
            g[1][1][0] = x[0].cos() / x[0].sin();
        }
        _ => {}
    }
    g
}

/// Worst entrywise gaps of Christoffel symbols and `R^l_ijk` against the
/// constant-curvature closed forms.
fn oracle_gaps(chart: &MetricChart, k: f64, x: &[f64]) -> Result<(f64, f64), String> {
    let gamma = christoffel(chart, x).map_err(|e| e.to_string())?;
    let r = curvature_tensor(chart, x).map_err(|e| e.to_string())?;
    let g = chart.metric(x);
    let exact = christoffel_closed_form(chart.name(), x);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let (mut eg, mut er) = (0.0f64, 0.0f64);
    for i in 0..2 {
        for j in 0..2 {
            for l in 0..2 {
                eg = eg.max((gamma.get(&[i, j, l]) - exact[l][i][j]).abs());
                for m in 0..2 {
                    // R(e_j, e_m) e_i = K (g_mi e_j - g_ji e_m)
                    let want = k * (delta(l, j) * g[(m, i)] - delta(l, m) * g[(j, i)]);
                    er = er.max((r.get(&[i, j, m, l]) - want).abs());
                }
            }
        }
    }
    Ok((eg, er))
}

fn tensor_oracles() -> Outcome {
    let charts: Vec<(MetricChart, f64, Vec<[f64; 2]>)> = vec![
        (flat_chart(2, 5.0), 0.0, vec![[0.3, -1.2], [2.0, 4.0]]),
        (polar_chart(), 0.0, vec![[0.5, 0.2], [2.0, 4.0], [7.5, 6.0]]),
        (
            sphere_chart(0.5),
            4.0,
            vec![[0.4, 1.0], [1.6, 5.0], [2.9, 0.1]],
        ),
        (
            sphere_chart(1.0),
            1.0,
            vec![[0.4, 1.0], [1.6, 5.0], [2.9, 0.1]],
        ),
        (
            sphere_chart(2.0),
            0.25,
            vec![[0.4, 1.0], [1.6, 5.0], [2.9, 0.1]],
        ),
        (
            hyperbolic_chart(),
            -1.0,
            vec![[0.0, 0.3], [-2.0, 1.0], [4.0, 6.0]],
        ),
    ];
    let (mut analytic, mut fd, mut parallel) = (0.0f64, 0.0f64, 0.0f64);
    for (chart, k, points) in &charts {
        let fd_chart = chart.clone().without_oracle();
        let metric = TensorField::metric_of(chart);
        for x in points {
            let (a, b) = oracle_gaps(chart, *k, x)?;
            analytic = analytic.max(a).max(b);
            let (a, b) = oracle_gaps(&fd_chart, *k, x)?;
            fd = fd.max(a).max(b);
            let dg = covariant_derivative_tensor(chart, x, &metric).map_err(|e| e.to_string())?;
            parallel = parallel.max(dg.max_abs());
        }
    }
    ensure(
        analytic <= 1e-6 && fd <= 1e-4 && parallel <= 1e-8,
        format!("analytic gap {analytic:.2e} (1e-6), fd gap {fd:.2e} (1e-4), |nabla g| {parallel:.2e} (1e-8)"),
    )
}

// 3

fn chart_gap(c: &MetricChart, a: &[f64], b: &[f64]) -> f64 {
    c.domain()
        .displacement(a, b)
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

fn great_circle(p: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    let (th, ph) = (p[0], p[1]);
    let e = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
    let e_th = [th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin()];
    let e_ph = [-th.sin() * ph.sin(), th.sin() * ph.cos(), 0.0];
    let tan: Vec<f64> = (0..3).map(|k| e_th[k] * v[0] + e_ph[k] * v[1]).collect();
    let speed = tan.iter().map(|c| c * c).sum::<f64>().sqrt();
    let q: Vec<f64> = (0..3)
        .map(|k| e[k] * (speed * t).cos() + tan[k] / speed * (speed * t).sin())
        .collect();
    vec![q[2].acos(), q[1].atan2(q[0]).rem_euclid(2.0 * PI)]
}

fn geodesic_closed_forms() -> Outcome {
    let err = |e: leafscope::Error| e.to_string();
    let sphere = sphere_chart(1.0);
    let p = [FRAC_PI_2, 0.0];
    let mut ret = 0.0f64;
    for v in [[0.0, 1.0], [0.6, 0.8], [-0.28, 0.96]] {
        let path = integrate_geodesic(&sphere, &GeodesicState::new(&p, &v), 2.0 * PI, DEFAULT_STEP)
            .map_err(err)?;
        ret = ret.max(chart_gap(&sphere, &path.last().x, &p));
    }

    let mut rel = 0.0f64;
    let cases: Vec<(MetricChart, Vec<f64>, Vec<Vec<f64>>)> = vec![
        (
            sphere,
            p.to_vec(),
            vec![vec![0.3, 0.4], vec![-1.2, 0.5], vec![1.5, -1.8]],
        ),
        (
            hyperbolic_chart(),
            vec![0.0, 1.0],
            vec![vec![0.5, 0.2], vec![-0.8, 0.9], vec![0.1, -1.2]],
        ),
    ];
    for (chart, p, vs) in &cases {
        let inj = injectivity_radius_estimate(chart, p, 3.0, 128).map_err(err)?;
        for v in vs {
            let len = chart.speed(p, v);
            if len >= inj.radius {
                return Err(format!(
                    "{}: |v| = {len} not below the injectivity estimate {}",
                    chart.name(),
                    inj.radius
                ));
            }
            let q = exp_map(chart, p, v, DEFAULT_STEP).map_err(err)?;
            let d = riemannian_distance(chart, p, &q).map_err(err)?;
            rel = rel.max((d - len).abs() / len);
        }
    }

    let s = sphere_chart(1.0);
    let (p, v) = ([1.2, 0.3], [0.5, 0.7]);
    let exact = great_circle(&p, &v, 2.0);
    let mut errors = Vec::new();
    for h in [0.4, 0.2, 0.1] {
        let path = integrate_geodesic(&s, &GeodesicState::new(&p, &v), 2.0, h).map_err(err)?;
        errors.push(chart_gap(&s, &path.last().x, &exact));
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order_ok = orders.iter().all(|o| (o - 5.0).abs() <= 1.0);
    ensure(
        ret <= 1e-4 && rel <= 0.01 && order_ok,
        format!("return gap {ret:.2e} (1e-4), |d - |v|| / |v| {rel:.2e} (1%), observed orders {orders:.2?} (5 +- 1)"),
    )
}

// 4

fn injectivity_radii() -> Outcome {
    let err = |e: leafscope::Error| e.to_string();
    let t = injectivity_radius_estimate(&torus_chart(1.0), &[0.3, 0.7], 1.0, 256).map_err(err)?;
    let s = injectivity_radius_estimate(&sphere_chart(1.0), &[FRAC_PI_2, 0.0], 3.5, 256)
        .map_err(err)?;
    let et = (t.radius - 0.5).abs() / 0.5;
    let es = (s.radius - PI).abs() / PI;
    ensure(
        !t.censored && !s.censored && et <= 0.05 && es <= 0.05,
        format!(
            "torus {:.4} ({:.2}%), sphere {:.4} ({:.2}%)",
            t.radius,
            100.0 * et,
            s.radius,
            100.0 * es
        ),
    )
}

// 5 to 9

fn experiment(id: ExperimentId) -> Result<ConvergenceReport, String> {
    run_experiment(id, &ExperimentConfig::default()).map_err(|e| e.to_string())
}

fn uppers(r: &ConvergenceReport) -> Vec<f64> {
    r.gh_to_target.iter().map(|b| b.upper).collect()
}

fn sci(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn reeb_component_limit() -> Outcome {
    let r = experiment(ExperimentId::ReebComponentLimit)?;
    let up = uppers(&r);
    let lows: Vec<f64> = r
        .gh_to_decoy
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|b| b.lower)
        .collect();
    if up.is_empty() || lows.len() != up.len() {
        return Err("missing GH bounds in report".into());
    }
    let ratio = up[0] / up[up.len() - 1];
    let margin = r.reference_value("decoy_margin").unwrap_or(0.0);
    let min_low = lows.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(
        ratio >= 5.0 && margin > 0.0 && min_low >= margin,
        format!("cylinder upper {:.3e} -> {:.3e} ({ratio:.0}x, need 5x); torus lower min {min_low:.4} vs margin {margin:.4}", up[0], up[up.len() - 1]),
    )
}

fn reeb_cylinder_continuity() -> Outcome {
    let r = experiment(ExperimentId::ReebCylinderContinuity)?;
    let up = uppers(&r);
    if up.len() < 4 {
        return Err(format!("need at least 4 parameters, got {}", up.len()));
    }
    let ratio = up[up.len() - 1] / up[0];
    let monotone = strictly_decreasing(&up);
    ensure(
        monotone && ratio < 0.2,
        format!(
            "uppers [{}]; last / first {ratio:.3e} (< 0.2), monotone {monotone}",
            sci(&up)
        ),
    )
}

fn vinyl_discontinuity() -> Outcome {
    let r = experiment(ExperimentId::VinylDiscontinuity)?;
    let lows: Vec<f64> = r.gh_to_target.iter().map(|b| b.lower).collect();
    let min_low = lows.iter().cloned().fold(f64::INFINITY, f64::min);
    let gap = r.reference_value("circle_line_gap").unwrap_or(0.0);
    ensure(
        !lows.is_empty() && min_low > 0.0 && min_low >= 0.5 * gap,
        format!(
            "lowers {lows:.4?}; min {min_low:.4} vs half the circle-line gap {:.4}",
            0.5 * gap
        ),
    )
}

fn transition_volume() -> Outcome {
    let r = experiment(ExperimentId::ReebTransitionVolume)?;
    let v = r.volumes.clone().unwrap_or_default();
    if v.is_empty() {
        return Err("missing volumes in report".into());
    }
    let base = 4.0 * PI;
    let rel0 = (v[0] - base).abs() / base;
    let last = v[v.len() - 1] / base;
    ensure(
        strictly_increasing(&v) && rel0 <= 0.01 && last > 10.0,
        format!(
            "volumes {v:.2?}; sin t = 0 off 4 pi by {:.2e}; last / 4 pi = {last:.1}",
            rel0
        ),
    )
}

fn smooth_defect() -> Outcome {
    let r = experiment(ExperimentId::SmoothDefect)?;
    let d = r.defects.clone().unwrap_or_default();
    let up = uppers(&r);
    if d.len() < 4 || up.len() < 4 {
        return Err("missing defects or GH bounds in report".into());
    }
    let coupling = r
        .check("bilipschitz_coupling")
        .map(|c| c.passed)
        .unwrap_or(false);
    let dr = d[d.len() - 1] / d[0];
    let ur = up[up.len() - 1] / up[0];
    ensure(
        strictly_decreasing(&d) && strictly_decreasing(&up) && dr < 0.2 && ur < 0.2 && coupling,
        format!("defect last / first {dr:.3e}, gh upper last / first {ur:.3e}, bilipschitz coupling {coupling}"),
    )
}

// 10

fn probe(
    leaf: &LeafParametrization,
    start: &[f64],
    axis: usize,
    turns: i32,
    eps: f64,
) -> Result<HolonomyProbe, String> {
    let path = leaf
        .coordinate_loop(start, axis, turns, 400)
        .map_err(|e| e.to_string())?;
    HolonomyProbe::new(leaf.clone(), path, eps).map_err(|e| e.to_string())
}

fn holonomy_suite() -> Outcome {
    let err = |e: leafscope::Error| e.to_string();
    let ex = Example::new;
    let mesh = HOLONOMY_MESH;

    let trivial = [
        (
            leaf_at(&ex(ExampleId::BrokenRecord), 1.75, LeafSelector::Generic).map_err(err)?,
            vec![0.4],
            0,
            0.05,
        ),
        (
            leaf_at(&ex(ExampleId::ReebComponent), 0.0, LeafSelector::Boundary).map_err(err)?,
            vec![0.0, 0.5],
            0,
            0.1,
        ),
        (
            leaf_at(&ex(ExampleId::ReebTransition), 1.0, LeafSelector::Generic).map_err(err)?,
            vec![1.0, 0.0],
            1,
            0.3,
        ),
        (
            leaf_at(
                &ex(ExampleId::ReebTransition),
                FRAC_PI_2,
                LeafSelector::Torus,
            )
            .map_err(err)?,
            vec![0.3, 0.0],
            0,
            0.3,
        ),
    ];
    let mut worst_trivial = 0.0f64;
    for (leaf, start, axis, eps) in &trivial {
        let h = holonomy_return(&probe(leaf, start, *axis, 1, *eps)?).map_err(err)?;
        worst_trivial = worst_trivial.max(h.abs());
    }

    let torus = leaf_at(&ex(ExampleId::ReebComponent), 0.0, LeafSelector::Boundary).map_err(err)?;
    let longitude = holonomy_return(&probe(&torus, &[0.0, 0.5], 1, -1, 0.1)?).map_err(err)?;

    let cases = [
        (torus.clone(), vec![0.0, 0.5], 1, -1, 0.1),
        (
            leaf_at(&ex(ExampleId::VinylRecord), 1.0, LeafSelector::Boundary).map_err(err)?,
            vec![0.0],
            0,
            1,
            0.2,
        ),
        (
            leaf_at(&ex(ExampleId::BrokenRecord), 1.0, LeafSelector::Boundary).map_err(err)?,
            vec![0.0],
            0,
            -1,
            0.15,
        ),
        (
            leaf_at(
                &ex(ExampleId::ReebTransition),
                FRAC_PI_2,
                LeafSelector::Torus,
            )
            .map_err(err)?,
            vec![0.3, 0.0],
            1,
            1,
            0.3,
        ),
    ];
    let mut worst_group = 0.0f64;
    for (leaf, start, axis, turns, eps) in &cases {
        let once = holonomy_map(&probe(leaf, start, *axis, *turns, *eps)?).map_err(err)?;
        let twice = holonomy_map(&probe(leaf, start, *axis, *turns, once)?).map_err(err)?;
        let double = holonomy_map(&probe(leaf, start, *axis, 2 * turns, *eps)?).map_err(err)?;
        let undo = holonomy_map(&probe(leaf, start, *axis, -turns, once)?).map_err(err)?;
        worst_group = worst_group
            .max((twice - double).abs())
            .max((undo - eps).abs());
    }

    let covers = [
        (ExampleId::ReebComponent, 0.0, LeafSelector::Boundary),
        (ExampleId::ReebCylinder, 0.0, LeafSelector::Boundary),
        (ExampleId::ReebCylinder, 0.0, LeafSelector::Generic),
        (ExampleId::ReebTransition, FRAC_PI_2, LeafSelector::Torus),
        (ExampleId::ReebTransition, 0.7, LeafSelector::Generic),
        (ExampleId::VinylRecord, 1.0, LeafSelector::Boundary),
        (ExampleId::VinylRecord, 1.5, LeafSelector::Generic),
        (ExampleId::BrokenRecord, 1.0, LeafSelector::Boundary),
        (ExampleId::BrokenRecord, 1.5, LeafSelector::Generic),
    ];
    let mut worst_cover = 0.0f64;
    for (id, t, which) in covers {
        let cover = holonomy_cover(&ex(id), t, which).map_err(err)?;
        worst_cover = worst_cover.max(cover.isometry_defect(100, 7).map_err(err)?);
    }

    ensure(
        worst_trivial <= mesh && longitude > mesh && worst_group <= mesh && worst_cover <= 1e-8,
        format!(
            "trivial loops {worst_trivial:.1e}, longitude {longitude:.4}, composition/reversal {worst_group:.1e} (mesh {mesh:.1e}), cover isometry {worst_cover:.1e} (1e-8)"
        ),
    )
}

fn main() -> ExitCode {
    let minutes = |m: u64| Duration::from_secs(60 * m);
    let criteria = [
        Criterion {
            name: "01 gh oracle sandwich",
            budget: minutes(5),
            run: gh_sandwich,
        },
        Criterion {
            name: "02 tensor calculus oracles",
            budget: minutes(1),
            run: tensor_oracles,
        },
        Criterion {
            name: "03 geodesic closed forms",
            budget: minutes(2),
            run: geodesic_closed_forms,
        },
        Criterion {
            name: "04 injectivity radius",
            budget: minutes(2),
            run: injectivity_radii,
        },
        Criterion {
            name: "05 reeb component limit",
            budget: minutes(15),
            run: reeb_component_limit,
        },
        Criterion {
            name: "06 reeb cylinder continuity",
            budget: minutes(10),
            run: reeb_cylinder_continuity,
        },
        Criterion {
            name: "07 vinyl record discontinuity",
            budget: minutes(5),
            run: vinyl_discontinuity,
        },
        Criterion {
            name: "08 reeb transition volume",
            budget: minutes(10),
            run: transition_volume,
        },
        Criterion {
            name: "09 smooth vs gh coupling",
            budget: minutes(5),
            run: smooth_defect,
        },
        Criterion {
            name: "10 holonomy suite",
            budget: minutes(5),
            run: holonomy_suite,
        },
    ];
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for c in criteria
        .iter()
        .filter(|c| filters.is_empty() || filters.iter().any(|f| c.name.contains(f.as_str())))
    {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (
                false,
                format!("{d}; over the {}s budget", c.budget.as_secs()),
            ),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "{} {} [{:.1}s]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
