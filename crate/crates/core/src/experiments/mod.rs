//! Desk-scale numerical checks of leaf-function behaviour on the example
//! foliations: sampled leaf balls, pointed GH runs, leaf volumes, smooth
//! convergence defects, and empirical bounded-geometry budgets.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::calculus::{bilipschitz_factor, curvature_derivative_norms, smooth_convergence_defect};
use crate::chart::{Domain, MetricChart};
use crate::error::{Error, Result};
use crate::foliation::{
    holonomy_cover, leaf_at, reeb_polar_leaf, Example, ExampleId, LeafSelector, ReebProfile,
};
use crate::geodesics::{
    injectivity_radius_estimate_with, normal_pullback_metric, InjectivityConfig,
};
use crate::metric_space::{
    gh_bounds, gh_bounds_hinted, GhBounds, PointedFiniteMetricSpace, SearchConfig,
};
use crate::metrics::{flat_chart, sphere_chart};
use crate::par;

mod sampling;
mod volume;

pub use sampling::{
    sample_chart_ball, sample_chart_ball_keeping, sample_leaf_ball, BallSampling, ChartBallSample,
    LeafSample,
};
pub use volume::{leaf_volume, VolumeEstimate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    ReebComponentLimit,
    ReebCylinderContinuity,
    ReebTransitionVolume,
    VinylDiscontinuity,
    SmoothDefect,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::ReebComponentLimit,
        ExperimentId::ReebCylinderContinuity,
        ExperimentId::ReebTransitionVolume,
        ExperimentId::VinylDiscontinuity,
        ExperimentId::SmoothDefect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::ReebComponentLimit => "reeb_component_limit",
            ExperimentId::ReebCylinderContinuity => "reeb_cylinder_continuity",
            ExperimentId::ReebTransitionVolume => "reeb_transition_volume",
            ExperimentId::VinylDiscontinuity => "vinyl_discontinuity",
            ExperimentId::SmoothDefect => "smooth_defect",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentId::ReebComponentLimit => {
                "interior Reeb-component leaves near the boundary torus vs its cylinder cover (target) and the torus (decoy)"
            }
            ExperimentId::ReebCylinderContinuity => "interior Reeb-cylinder leaves vs the boundary cylinder",
            ExperimentId::ReebTransitionVolume => "sphere-leaf volumes of the Reeb transition as sin t -> 1",
            ExperimentId::VinylDiscontinuity => "vinyl-record spirals accumulating on the inner circle vs that circle",
            ExperimentId::SmoothDefect => "metrics (1 + 1/n) g on a sphere of radius 2: normal-chart defect and GH",
        }
    }

    pub fn parameter_name(self) -> &'static str {
        match self {
            ExperimentId::ReebComponentLimit | ExperimentId::ReebCylinderContinuity => {
                "boundary_distance"
            }
            ExperimentId::ReebTransitionVolume => "sin_t",
            ExperimentId::VinylDiscontinuity => "radius_squared_minus_one",
            ExperimentId::SmoothDefect => "n",
        }
    }

    pub fn default_parameters(self) -> Vec<f64> {
        match self {
            ExperimentId::ReebComponentLimit => vec![1e-1, 1e-2, 1e-3, 1e-4],
            ExperimentId::ReebCylinderContinuity => vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            ExperimentId::ReebTransitionVolume => vec![0.0, 0.5, 0.8, 0.9, 0.95, 0.99],
            ExperimentId::VinylDiscontinuity => vec![1e-1, 1e-2, 1e-3, 1e-4],
            ExperimentId::SmoothDefect => vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
        }
    }

    /// Fixed seed recorded with every report of this experiment.
    pub fn seed(self) -> u64 {
        0x5eed_0000 + self as u64
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Overrides the experiment's default parameter sequence.
    pub parameters: Option<Vec<f64>>,
    /// Radius of the sampled balls.
    pub radius: f64,
    /// Terms of the pointed GH series.
    pub n_max: usize,
    pub sampling: BallSampling,
    pub profile: ReebProfile,
    /// Translation period of the Reeb component.
    pub period: f64,
    /// Polar cells per unit of `1 / (1 - sin t)` for volumes.
    pub volume_cells: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            parameters: None,
            radius: 3.0,
            n_max: 4,
            sampling: BallSampling {
                shell_gap: 0.05,
                ..BallSampling::default()
            },
            profile: ReebProfile::default(),
            period: 1.0,
            volume_cells: 40,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.n_max == 0 || self.n_max > 16 {
            return Err(Error::InvalidInput(format!(
                "n_max must be in 1..=16, got {}",
                self.n_max
            )));
        }
        if self.sampling.nodes_per_axis < 8 || self.sampling.stride == 0 {
            return Err(Error::InvalidInput(
                "sampling needs at least 8 nodes per axis and a positive stride".into(),
            ));
        }
        if !(self.sampling.shell_gap >= 0.0 && self.sampling.shell_gap < 0.5) {
            return Err(Error::InvalidInput("shell_gap must be in [0, 0.5)".into()));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        if let Some(p) = &self.parameters {
            if p.is_empty() || p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "parameters must be a nonempty list of finite numbers".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment_id: String,
    pub parameter_name: String,
    pub parameter_sequence: Vec<f64>,
    /// Empty for experiments without GH comparisons.
    pub gh_to_target: Vec<GhBounds>,
    pub gh_to_decoy: Option<Vec<GhBounds>>,
    pub volumes: Option<Vec<f64>>,
    pub volume_errors: Option<Vec<f64>>,
    pub defects: Option<Vec<f64>>,
    pub mesh: f64,
    pub runtime_seconds: f64,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Reference values derived during the run (margins, gaps).
    pub reference: Vec<(String, f64)>,
    pub checks: Vec<TrendCheck>,
    pub notes: Vec<String>,
}

impl ConvergenceReport {
    fn new(id: ExperimentId, parameters: Vec<f64>, config: &ExperimentConfig) -> Self {
        ConvergenceReport {
            experiment_id: id.as_str().into(),
            parameter_name: id.parameter_name().into(),
            parameter_sequence: parameters,
            gh_to_target: Vec::new(),
            gh_to_decoy: None,
            volumes: None,
            volume_errors: None,
            defects: None,
            mesh: 0.0,
            runtime_seconds: 0.0,
            seed: id.seed(),
            config: config.clone(),
            reference: Vec::new(),
            checks: Vec::new(),
            notes: vec![
                "thresholds in checks are desk-scale conventions, not quantitative claims".into(),
                format!(
                    "GH values are series over n = 1..{} on balls sampled to radius {}; the omitted tail is at most {}",
                    config.n_max,
                    config.radius,
                    0.5f64.powi(config.n_max as i32)
                ),
            ],
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&TrendCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn reference_value(&self, name: &str) -> Option<f64> {
        self.reference
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
    }

    fn push_check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(TrendCheck {
            name: name.into(),
            passed,
            detail,
        });
    }

    /// Columns `parameter,gh_lower,gh_upper,volume,defect`; absent values
    /// are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,gh_lower,gh_upper,volume,defect\n");
        let cell = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for (k, p) in self.parameter_sequence.iter().enumerate() {
            let gh = self.gh_to_target.get(k);
            let vol = self.volumes.as_ref().and_then(|v| v.get(k).copied());
            let def = self.defects.as_ref().and_then(|v| v.get(k).copied());
            out.push_str(&format!(
                "{p:e},{},{},{},{}\n",
                cell(gh.map(|g| g.lower)),
                cell(gh.map(|g| g.upper)),
                cell(vol),
                cell(def)
            ));
        }
        out
    }

    /// Lists that are present have one entry per parameter.
    pub fn lengths_consistent(&self) -> bool {
        let n = self.parameter_sequence.len();
        let ok = |len: Option<usize>| len.is_none_or(|l| l == n);
        (self.gh_to_target.is_empty() || self.gh_to_target.len() == n)
            && ok(self.gh_to_decoy.as_ref().map(Vec::len))
            && ok(self.volumes.as_ref().map(Vec::len))
            && ok(self.volume_errors.as_ref().map(Vec::len))
            && ok(self.defects.as_ref().map(Vec::len))
            && self.mesh > 0.0
    }
}

/// "Converges to 0": strictly decreasing and the last value below 0.2 of
/// the first.
pub fn converges_to_zero(values: &[f64]) -> (bool, String) {
    let monotone = values.windows(2).all(|w| w[1] < w[0]);
    let (first, last) = (values[0], values[values.len() - 1]);
    let ok = values.len() >= 4 && monotone && last < 0.2 * first;
    (
        ok,
        format!("monotone {monotone}, last / first = {:.3e}", last / first),
    )
}

pub fn run_experiment(id: ExperimentId, config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let start = Instant::now();
    let params = config
        .parameters
        .clone()
        .unwrap_or_else(|| id.default_parameters());
    let mut report = ConvergenceReport::new(id, params.clone(), config);
    match id {
        ExperimentId::ReebComponentLimit => {
            reeb_limit(&mut report, config, ExampleId::ReebComponent)
        }
        ExperimentId::ReebCylinderContinuity => {
            reeb_limit(&mut report, config, ExampleId::ReebCylinder)
        }
        ExperimentId::ReebTransitionVolume => transition_volume(&mut report, config),
        ExperimentId::VinylDiscontinuity => vinyl(&mut report, config),
        ExperimentId::SmoothDefect => smooth_defect(&mut report, config),
    }
    .map_err(|e| e.context(format!("experiment {id}")))?;
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn identity_hint(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|k| (k, k)).collect()
}

/// Flat torus `[0, a) x [0, b)` sampled on a grid of about `spacing`, with
/// closed-form distances, restricted to the ball of `radius` about the origin.
fn flat_torus_ball(a: f64, b: f64, spacing: f64, radius: f64) -> Result<PointedFiniteMetricSpace> {
    let (na, nb) = (
        (a / spacing).round().max(1.0) as usize,
        (b / spacing).round().max(1.0) as usize,
    );
    let wrapped = |v: f64, p: f64| {
        let r = v.rem_euclid(p);
        r.min(p - r)
    };
    let pts: Vec<(f64, f64)> = (0..na)
        .flat_map(|i| (0..nb).map(move |j| (i as f64 * a / na as f64, j as f64 * b / nb as f64)))
        .filter(|&(x, y)| wrapped(x, a).hypot(wrapped(y, b)) <= radius)
        .collect();
    let dist = pts
        .iter()
        .map(|p| {
            pts.iter()
                .map(|q| wrapped(p.0 - q.0, a).hypot(wrapped(p.1 - q.1, b)))
                .collect()
        })
        .collect();
    PointedFiniteMetricSpace::from_matrix(dist, 0)
}

fn reeb_limit(report: &mut ConvergenceReport, cfg: &ExperimentConfig, id: ExampleId) -> Result<()> {
    let ex = Example::new(id)
        .with_profile(cfg.profile)
        .with_period(cfg.period);
    let rb = cfg.profile.boundary_radius();
    let reach = cfg.radius + 0.5;
    let region = Domain::boxed(&[0.0, -reach], &[2.0 * PI, reach]).with_period(0, 2.0 * PI);
    let target_chart = match id {
        ExampleId::ReebComponent => holonomy_cover(&ex, 0.0, LeafSelector::Boundary)?.cover,
        _ => leaf_at(&ex, 0.0, LeafSelector::Boundary)?.pullback,
    };
    let origin = [0.0, 0.0];
    let target = sample_chart_ball(&target_chart, &region, &origin, cfg.radius, &cfg.sampling)?;
    report.mesh = target.mesh;
    for &delta in &report.parameter_sequence {
        if !(delta > 0.0 && delta < rb) {
            return Err(Error::Domain(format!(
                "boundary distance must lie in (0, {rb}), got {delta}"
            )));
        }
    }
    let decoy = if id == ExampleId::ReebComponent {
        Some(flat_torus_ball(
            2.0 * PI * rb,
            cfg.period,
            target.spacing,
            cfg.radius,
        )?)
    } else {
        None
    };
    let search = SearchConfig::default();
    let mut targets = Vec::new();
    let mut decoys = Vec::new();
    for &delta in &report.parameter_sequence {
        let w = cfg.profile.depth_for_boundary_distance(delta);
        let leaf = reeb_polar_leaf(&ex, 0.0, w, -reach, reach)?;
        let sample = sample_chart_ball_keeping(
            &leaf.pullback,
            &region,
            &origin,
            cfg.radius,
            &cfg.sampling,
            Some(&target),
        )?;
        let hint = identity_hint(sample.nodes.len());
        targets.push(gh_bounds_hinted(
            &sample.space,
            &target.space,
            cfg.n_max,
            &search,
            &hint,
        ));
        if let Some(torus) = &decoy {
            decoys.push(gh_bounds(&sample.space, torus, cfg.n_max));
        }
    }
    let uppers: Vec<f64> = targets.iter().map(|g| g.upper).collect();
    report.gh_to_target = targets;
    report.notes.push(format!(
        "leaf and target balls share one grid of {} nodes per axis in (angle, depth) coordinates; points within {} of a whole radius are dropped",
        cfg.sampling.nodes_per_axis, cfg.sampling.shell_gap
    ));
    match id {
        ExampleId::ReebComponent => {
            let ratio = uppers[0] / uppers[uppers.len() - 1];
            report.push_check(
                "target_upper_decreases_5x",
                ratio >= 5.0,
                format!("first / last upper = {ratio:.3}"),
            );
            let lowers: Vec<f64> = decoys.iter().map(|g| g.lower).collect();
            let margin = 0.5 * lowers[0];
            let min = lowers.iter().cloned().fold(f64::INFINITY, f64::min);
            report.reference.push(("decoy_margin".into(), margin));
            report.push_check(
                "decoy_lower_above_margin",
                margin > 0.0 && min >= margin,
                format!("min decoy lower {min:.4} vs margin {margin:.4} (half the first run)"),
            );
            report.gh_to_decoy = Some(decoys);
        }
        _ => {
            let (ok, detail) = converges_to_zero(&uppers);
            report.push_check("target_upper_converges", ok, detail);
        }
    }
    Ok(())
}

fn transition_volume(report: &mut ConvergenceReport, cfg: &ExperimentConfig) -> Result<()> {
    let ex = Example::new(ExampleId::ReebTransition);
    let results = par::try_map_slice(&report.parameter_sequence, |&sin_t| {
        if !(0.0..1.0).contains(&sin_t) {
            return Err(Error::Domain(format!(
                "sin t must lie in [0, 1), got {sin_t}"
            )));
        }
        let leaf = leaf_at(&ex, sin_t.asin(), LeafSelector::Generic)?;
        let a = 1.0 - sin_t;
        let polar = ((cfg.volume_cells as f64 * PI / a).ceil() as usize).max(64);
        leaf_volume(&leaf, None, &[polar, 8])
    })?;
    let vols: Vec<f64> = results.iter().map(|v| v.value).collect();
    report.volume_errors = Some(results.iter().map(|v| v.error).collect());
    report.mesh = report
        .parameter_sequence
        .iter()
        .map(|s| (1.0 - s) / cfg.volume_cells as f64)
        .fold(f64::INFINITY, f64::min);
    let sphere = 4.0 * PI;
    let monotone = vols.windows(2).all(|w| w[1] > w[0]);
    report.push_check("volumes_increase", monotone, format!("{vols:.4?}"));
    if let Some(k) = report.parameter_sequence.iter().position(|&s| s == 0.0) {
        let rel = (vols[k] - sphere).abs() / sphere;
        report.push_check(
            "round_sphere_volume",
            rel <= 0.01,
            format!("relative error {rel:.2e} against 4 pi"),
        );
    }
    let last = vols[vols.len() - 1];
    report.push_check(
        "volume_exceeds_10x",
        last > 10.0 * sphere,
        format!("last / (4 pi) = {:.2}", last / sphere),
    );
    report.volumes = Some(vols);
    Ok(())
}

fn vinyl(report: &mut ConvergenceReport, cfg: &ExperimentConfig) -> Result<()> {
    let ex = Example::new(ExampleId::VinylRecord);
    let s1 = BallSampling {
        shell_gap: cfg.sampling.shell_gap,
        ..BallSampling::for_dim(1)
    };
    let reach = cfg.radius + 0.5;
    let circle_leaf = leaf_at(&ex, 1.0, LeafSelector::Boundary)?;
    let circle = sample_chart_ball(
        &circle_leaf.pullback,
        circle_leaf.pullback.domain(),
        &[0.0],
        cfg.radius,
        &s1,
    )?;
    let line_chart = flat_chart(1, reach);
    let line = sample_chart_ball(&line_chart, line_chart.domain(), &[0.0], cfg.radius, &s1)?;
    let gap = gh_bounds(&circle.space, &line.space, cfg.n_max).lower;
    report.reference.push(("circle_line_gap".into(), gap));
    report.mesh = circle.mesh;
    let mut out = Vec::new();
    for &e in &report.parameter_sequence {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::Domain(format!(
                "x^2 + y^2 - 1 must lie in (0, 1), got {e}"
            )));
        }
        let leaf = leaf_at(&ex, 1.0 + e, LeafSelector::Generic)?;
        let region = Domain::boxed(&[-reach], &[reach]);
        let spiral = sample_chart_ball(&leaf.pullback, &region, &[0.0], cfg.radius, &s1)?;
        out.push(gh_bounds(&spiral.space, &circle.space, cfg.n_max));
    }
    let min = out.iter().map(|g| g.lower).fold(f64::INFINITY, f64::min);
    report.push_check(
        "lower_bound_persists",
        gap > 0.0 && min >= 0.5 * gap,
        format!(
            "min lower {min:.4} vs half the circle-line gap {:.4}",
            0.5 * gap
        ),
    );
    report.gh_to_target = out;
    Ok(())
}

fn smooth_defect(report: &mut ConvergenceReport, cfg: &ExperimentConfig) -> Result<()> {
    let rho = 2.0;
    let base = sphere_chart(rho);
    let p = [FRAC_PI_2, 0.0];
    let normal_radius = 1.0;
    let box_half = 0.6;
    let normal_region = Domain::boxed(&[-box_half, -box_half], &[box_half, box_half]);
    let fixed_region = Domain::boxed(&[0.1, 0.0], &[PI - 0.1, 2.0 * PI]).with_period(1, 2.0 * PI);
    let reference_normal = normal_pullback_metric(&base, &p, normal_radius, 33)?;
    let region = base.domain().clone();
    let target = sample_chart_ball(&base, &region, &p, cfg.radius, &cfg.sampling)?;
    report.mesh = target.mesh;
    let search = SearchConfig::default();
    let mut defects = Vec::new();
    let mut ghs = Vec::new();
    let mut coupling_ok = true;
    let mut worst_slack = f64::NEG_INFINITY;
    for &n in &report.parameter_sequence {
        if !(n >= 1.0) {
            return Err(Error::Domain(format!("n must be at least 1, got {n}")));
        }
        let c = (1.0 + 1.0 / n).sqrt();
        let chart: MetricChart = sphere_chart(rho * c);
        let normal = normal_pullback_metric(&chart, &p, normal_radius, 33)?;
        defects.push(smooth_convergence_defect(
            &reference_normal.chart,
            &normal.chart,
            &normal_region,
            2,
        )?);
        let a = smooth_convergence_defect(&base, &chart, &fixed_region, 0)?;
        let b = bilipschitz_factor(a)?;
        let sample = sample_chart_ball_keeping(
            &chart,
            &region,
            &p,
            cfg.radius,
            &cfg.sampling,
            Some(&target),
        )?;
        let m = sample.space.len();
        for i in 0..m {
            for j in 0..i {
                let (dn, d) = (sample.space.d(i, j), target.space.d(i, j));
                let slack = (dn - d).abs() - (b - 1.0) * d;
                worst_slack = worst_slack.max(slack);
                coupling_ok &= slack <= 1e-9;
            }
        }
        ghs.push(gh_bounds_hinted(
            &sample.space,
            &target.space,
            cfg.n_max,
            &search,
            &identity_hint(m),
        ));
    }
    let uppers: Vec<f64> = ghs.iter().map(|g| g.upper).collect();
    let (ok_d, det_d) = converges_to_zero(&defects);
    report.push_check("defect_converges", ok_d, det_d);
    let (ok_g, det_g) = converges_to_zero(&uppers);
    report.push_check("gh_upper_converges", ok_g, det_g);
    report.push_check(
        "bilipschitz_coupling",
        coupling_ok,
        format!("max of |d_n - d| - (b_n - 1) d over sampled pairs: {worst_slack:.3e}"),
    );
    report
        .notes
        .push("defect: sup over normal coordinates |y| < 0.6 of derivatives up to order 2".into());
    report.defects = Some(defects);
    report.gh_to_target = ghs;
    Ok(())
}

/// Empirical bounded-geometry constants over a family of leaves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedGeometryBudget {
    pub example: ExampleId,
    pub selector: LeafSelector,
    pub parameters: Vec<f64>,
    /// Smallest injectivity estimate over the sampled leaves and points.
    pub injectivity_radius: f64,
    /// True when every injectivity estimate hit the search radius.
    pub censored: bool,
    /// `C_k`: largest `|nabla^k R|` seen, `k = 0..=k_max`.
    pub curvature_bounds: Vec<f64>,
    pub points_per_leaf: usize,
}

pub fn estimate_geometry_bounds(
    example: &Example,
    which: LeafSelector,
    parameters: &[f64],
    k_max: usize,
    search_radius: f64,
) -> Result<BoundedGeometryBudget> {
    if parameters.is_empty() {
        return Err(Error::InvalidInput("need at least one parameter".into()));
    }
    let per_leaf = par::try_map_slice(parameters, |&t| {
        let leaf = leaf_at(example, t, which)?;
        let chart = &leaf.pullback;
        let dom = chart.domain();
        let center: Vec<f64> = (0..dom.dim())
            .map(|k| 0.5 * (dom.lo[k] + dom.hi[k]))
            .collect();
        let shrunk = Domain::boxed(
            &(0..dom.dim())
                .map(|k| 0.75 * dom.lo[k] + 0.25 * dom.hi[k])
                .collect::<Vec<_>>(),
            &(0..dom.dim())
                .map(|k| 0.25 * dom.lo[k] + 0.75 * dom.hi[k])
                .collect::<Vec<_>>(),
        );
        let mut points = crate::calculus::grid_points(&shrunk, 3);
        points.push(center.clone());
        let mut c = vec![0.0f64; k_max + 1];
        for x in &points {
            for (ck, v) in c
                .iter_mut()
                .zip(curvature_derivative_norms(chart, x, k_max)?)
            {
                *ck = ck.max(v);
            }
        }
        let inj = injectivity_radius_estimate_with(
            chart,
            &center,
            search_radius,
            &InjectivityConfig::for_dim(chart.dim()),
        )?;
        Ok::<_, Error>((c, inj, points.len()))
    })?;
    let mut curvature_bounds = vec![0.0f64; k_max + 1];
    for (c, _, _) in &per_leaf {
        for (a, b) in curvature_bounds.iter_mut().zip(c) {
            *a = a.max(*b);
        }
    }
    Ok(BoundedGeometryBudget {
        example: example.id,
        selector: which,
        parameters: parameters.to_vec(),
        injectivity_radius: per_leaf
            .iter()
            .map(|(_, i, _)| i.radius)
            .fold(f64::INFINITY, f64::min),
        censored: per_leaf.iter().all(|(_, i, _)| i.censored),
        curvature_bounds,
        points_per_leaf: per_leaf[0].2,
    })
}
