//! The example foliations: leaf parametrizations with their leafwise
//! metrics, transversal structure for holonomy, and analytic holonomy covers.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chart::{Domain, Embedding, MetricChart};
use crate::error::{Error, Result};
use crate::metrics::{Constant, Cylinder, Flat};

mod holonomy;
pub mod leaves;

pub use holonomy::{
    holonomy_cover, holonomy_map, holonomy_return, HolonomyCoverSpec, HolonomyProbe, HOLONOMY_MESH,
};
pub use leaves::ReebProfile;
use leaves::{logit, ReebCartesian, ReebPolar, Spiral, TransitionLeaf, TWO_PI};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleId {
    VinylRecord,
    ReebCylinder,
    ReebComponent,
    ReebTransition,
    BrokenRecord,
}

impl ExampleId {
    pub const ALL: [ExampleId; 5] = [
        ExampleId::VinylRecord,
        ExampleId::ReebCylinder,
        ExampleId::ReebComponent,
        ExampleId::ReebTransition,
        ExampleId::BrokenRecord,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExampleId::VinylRecord => "vinyl_record",
            ExampleId::ReebCylinder => "reeb_cylinder",
            ExampleId::ReebComponent => "reeb_component",
            ExampleId::ReebTransition => "reeb_transition",
            ExampleId::BrokenRecord => "broken_record",
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExampleId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown example `{s}`")))
    }
}

/// An example together with its free choices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: ExampleId,
    #[serde(default)]
    pub profile: ReebProfile,
    /// Axial translation period of the Reeb component.
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    1.0
}

impl Example {
    pub fn new(id: ExampleId) -> Self {
        Example {
            id,
            profile: ReebProfile::default(),
            period: 1.0,
        }
    }

    pub fn with_profile(mut self, profile: ReebProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = period;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafTopology {
    Line,
    Circle,
    Plane,
    Cylinder,
    Torus,
    Sphere,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafKind {
    pub selector: &'static str,
    pub condition: &'static str,
    pub topology: LeafTopology,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleDescriptor {
    pub id: ExampleId,
    pub ambient: &'static str,
    /// Meaning and range of the transversal parameter `t` of [`leaf_at`].
    pub transversal: &'static str,
    pub leaves: Vec<LeafKind>,
}

pub fn example_registry() -> Vec<ExampleDescriptor> {
    use LeafTopology::*;
    let k = |selector, condition, topology| LeafKind {
        selector,
        condition,
        topology,
    };
    vec![
        ExampleDescriptor {
            id: ExampleId::VinylRecord,
            ambient: "annulus 1 <= x^2 + y^2 <= 2 in R^2",
            transversal: "t = x^2 + y^2 where the leaf crosses the ray y = 0, x > 0; t in [1, 2]",
            leaves: vec![
                k("generic", "1 < t < 2", Line),
                k("generic", "t = 1 or t = 2", Circle),
                k("boundary", "inner circle", Circle),
                k("outer_boundary", "outer circle", Circle),
            ],
        },
        ExampleDescriptor {
            id: ExampleId::ReebCylinder,
            ambient: "solid cylinder x^2 + y^2 <= pi/2 in R^3, leaves z = t - tan(x^2 + y^2)^2",
            transversal: "t = height where the leaf meets the axis; any real t",
            leaves: vec![k("generic", "any t", Plane), k("boundary", "x^2 + y^2 = pi/2", Cylinder)],
        },
        ExampleDescriptor {
            id: ExampleId::ReebComponent,
            ambient: "Reeb cylinder modulo the translation z -> z + L (default L = 1)",
            transversal: "t = height where the leaf meets the axis, modulo L",
            leaves: vec![k("generic", "any t", Plane), k("boundary", "x^2 + y^2 = pi/2", Torus)],
        },
        ExampleDescriptor {
            id: ExampleId::ReebTransition,
            ambient: "S^2 x S^1 x S^1, product metric, coordinates ((x, y, z), s, t)",
            transversal: "t = angle of the last circle factor; any real t",
            leaves: vec![
                k("generic", "sin t < 1", Sphere),
                k("plane_positive", "sin t = 1, x > 0", Plane),
                k("plane_negative", "sin t = 1, x < 0", Plane),
                k("torus", "sin t = 1, x = 0", Torus),
            ],
        },
        ExampleDescriptor {
            id: ExampleId::BrokenRecord,
            ambient: "annulus 1 <= x^2 + y^2 <= 2 cut into bands 1 + 1/(n+1) <= x^2 + y^2 <= 1 + 1/n, trivially foliated for odd n and vinyl for even n",
            transversal: "t = x^2 + y^2 where the leaf crosses the ray y = 0, x > 0; t in [1, 2]",
            leaves: vec![
                k("generic", "t in an odd band or on a band edge", Circle),
                k("generic", "t inside an even band", Line),
                k("boundary", "center circle x^2 + y^2 = 1", Circle),
                k("outer_boundary", "outer circle", Circle),
            ],
        },
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafSelector {
    Generic,
    Boundary,
    OuterBoundary,
    Torus,
    PlanePositive,
    PlaneNegative,
}

impl LeafSelector {
    pub fn as_str(self) -> &'static str {
        match self {
            LeafSelector::Generic => "generic",
            LeafSelector::Boundary => "boundary",
            LeafSelector::OuterBoundary => "outer_boundary",
            LeafSelector::Torus => "torus",
            LeafSelector::PlanePositive => "plane_positive",
            LeafSelector::PlaneNegative => "plane_negative",
        }
    }
}

impl FromStr for LeafSelector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            LeafSelector::Generic,
            LeafSelector::Boundary,
            LeafSelector::OuterBoundary,
            LeafSelector::Torus,
            LeafSelector::PlanePositive,
            LeafSelector::PlaneNegative,
        ]
        .into_iter()
        .find(|l| l.as_str() == s)
        .ok_or_else(|| Error::InvalidInput(format!("unknown leaf selector `{s}`")))
    }
}

type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type LabelFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;
type CellFn = dyn Fn(f64) -> (f64, f64) + Send + Sync;

/// Transversal structure near a leaf.
///
/// Points near the leaf are written `(x, e)` with `x` unwrapped leaf
/// coordinates and `e` a transversal coordinate; `label(x, e)` is constant
/// along each nearby leaf inside the saturated open interval `cell(e)`.
/// Offsets measure `e` from the leaf toward its foliated side.
#[derive(Clone)]
pub struct Transversal {
    pub origin: f64,
    pub sign: f64,
    label: Arc<LabelFn>,
    cell: Arc<CellFn>,
}

impl Transversal {
    fn new(
        origin: f64,
        sign: f64,
        label: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        cell: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static,
    ) -> Self {
        Transversal {
            origin,
            sign,
            label: Arc::new(label),
            cell: Arc::new(cell),
        }
    }

    pub fn coordinate(&self, offset: f64) -> f64 {
        self.origin + self.sign * offset
    }

    pub fn offset(&self, e: f64) -> f64 {
        (e - self.origin) * self.sign
    }

    pub fn label(&self, x: &[f64], e: f64) -> f64 {
        (self.label)(x, e)
    }

    pub fn cell(&self, e: f64) -> (f64, f64) {
        (self.cell)(e)
    }
}

impl fmt::Debug for Transversal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transversal")
            .field("origin", &self.origin)
            .field("sign", &self.sign)
            .finish()
    }
}

#[derive(Clone)]
pub struct LeafParametrization {
    pub example: Example,
    pub t: f64,
    pub selector: LeafSelector,
    pub topology: LeafTopology,
    /// Leafwise metric in leaf coordinates.
    pub pullback: MetricChart,
    map: Arc<MapFn>,
    transversal: Option<Transversal>,
}

impl fmt::Debug for LeafParametrization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LeafParametrization")
            .field("example", &self.example.id)
            .field("t", &self.t)
            .field("selector", &self.selector)
            .field("topology", &self.topology)
            .field("chart", &self.pullback.name())
            .finish()
    }
}

impl LeafParametrization {
    pub fn dim(&self) -> usize {
        self.pullback.dim()
    }

    /// Ambient point at leaf coordinates `x`.
    pub fn map(&self, x: &[f64]) -> Vec<f64> {
        (self.map)(x)
    }

    pub fn transversal(&self) -> Option<&Transversal> {
        self.transversal.as_ref()
    }

    /// Closed loop running `turns` times along the periodic axis `axis`
    /// from `start`, `samples` points per turn; negative turns run backwards.
    /// Points are unwrapped, so the last one differs from the first by whole
    /// periods.
    pub fn coordinate_loop(
        &self,
        start: &[f64],
        axis: usize,
        turns: i32,
        samples: usize,
    ) -> Result<Vec<Vec<f64>>> {
        let dom = self.pullback.domain();
        if start.len() != self.dim() || axis >= self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "loop start {start:?} / axis {axis} for a {}-dimensional leaf",
                self.dim()
            )));
        }
        let Some(period) = dom.period[axis] else {
            return Err(Error::InvalidInput(format!(
                "axis {axis} of {} is not periodic",
                self.pullback.name()
            )));
        };
        if turns == 0 {
            return Err(Error::InvalidInput("a loop needs at least one turn".into()));
        }
        let n = samples.max(4) * turns.unsigned_abs() as usize;
        Ok((0..=n)
            .map(|k| {
                let mut x = start.to_vec();
                x[axis] += period * turns as f64 * k as f64 / n as f64;
                x
            })
            .collect())
    }

    fn embedded<E: Embedding + Copy>(
        example: &Example,
        t: f64,
        selector: LeafSelector,
        topology: LeafTopology,
        domain: Domain,
        e: E,
        ambient: impl Fn(Vec<f64>) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let name = format!("{}:{}:{t}", example.id, selector.as_str());
        LeafParametrization {
            example: *example,
            t,
            selector,
            topology,
            pullback: MetricChart::from_embedding(name, domain, e),
            map: Arc::new(move |x| ambient(e.embed(x))),
            transversal: None,
        }
    }

    fn with_transversal(mut self, tr: Transversal) -> Self {
        self.transversal = Some(tr);
        self
    }
}

/// Half-width, in the spiral angle, of the charts used for spiral leaves.
pub const LINE_CHART_HALF_WIDTH: f64 = 60.0;
/// Half-width of the Cartesian chart of interior Reeb leaves.
pub const REEB_CARTESIAN_HALF_WIDTH: f64 = 3.0;
/// Margin kept from the coordinate poles of sphere-leaf charts.
pub const POLE_MARGIN: f64 = 0.02;

pub fn leaf_at(example: &Example, t: f64, which: LeafSelector) -> Result<LeafParametrization> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(
            "transversal parameter must be finite".into(),
        ));
    }
    match example.id {
        ExampleId::VinylRecord => annulus_leaf(example, t, which, vinyl_band),
        ExampleId::BrokenRecord => annulus_leaf(example, t, which, broken_band),
        ExampleId::ReebCylinder | ExampleId::ReebComponent => reeb_leaf(example, t, which),
        ExampleId::ReebTransition => transition_leaf(example, t, which),
    }
}

/// Band of `x^2 + y^2` values containing `r2` and whether it holds spirals.
type BandFn = fn(f64) -> (f64, f64, bool);

fn vinyl_band(_: f64) -> (f64, f64, bool) {
    (1.0, 2.0, true)
}

fn broken_band(r2: f64) -> (f64, f64, bool) {
    let e = r2 - 1.0;
    if e <= 0.0 {
        return (1.0, 1.0, false);
    }
    let mut n = (1.0 / e).floor().max(1.0) as u64;
    // floor can land one band off at the edges
    if 1.0 + 1.0 / n as f64 <= r2 && n > 1 && r2 < 2.0 {
        n -= 1;
    }
    let (lo, hi) = (1.0 + 1.0 / (n + 1) as f64, 1.0 + 1.0 / n as f64);
    (lo, hi, n.is_multiple_of(2))
}

fn annulus_leaf(
    example: &Example,
    t: f64,
    which: LeafSelector,
    band: BandFn,
) -> Result<LeafParametrization> {
    let r2 = match which {
        LeafSelector::Generic => t,
        LeafSelector::Boundary => 1.0,
        LeafSelector::OuterBoundary => 2.0,
        _ => {
            return Err(Error::InvalidInput(format!(
                "selector {} does not apply to {}",
                which.as_str(),
                example.id
            )))
        }
    };
    if !(1.0..=2.0).contains(&r2) {
        return Err(Error::Domain(format!(
            "{}: x^2 + y^2 = {r2} is outside [1, 2]",
            example.id
        )));
    }
    let (lo, hi, spirals) = band(r2);
    if spirals && r2 > lo && r2 < hi {
        let sp = Spiral {
            lo,
            hi,
            c: -logit((r2 - lo) / (hi - lo)),
        };
        return Ok(LeafParametrization::embedded(
            example,
            t,
            which,
            LeafTopology::Line,
            Domain::boxed(&[-LINE_CHART_HALF_WIDTH], &[LINE_CHART_HALF_WIDTH]),
            sp,
            |p| p,
        ));
    }
    let rho = r2.sqrt();
    let leaf = LeafParametrization {
        example: *example,
        t,
        selector: which,
        topology: LeafTopology::Circle,
        pullback: MetricChart::from_formula(
            format!("{}:circle:{r2}", example.id),
            Domain::boxed(&[0.0], &[TWO_PI]).with_period(0, TWO_PI),
            Constant(vec![r2], 1),
        ),
        map: Arc::new(move |x| leaves::circle_point(rho, x[0])),
        transversal: None,
    };
    let sign = if r2 >= 2.0 { -1.0 } else { 1.0 };
    let label = move |x: &[f64], e: f64| {
        let (lo, hi, spirals) = band(e);
        if spirals && e > lo && e < hi {
            x[0] - logit((e - lo) / (hi - lo))
        } else {
            e
        }
    };
    let cell = move |e: f64| {
        let (lo, hi, _) = band(e);
        (lo, hi)
    };
    Ok(leaf.with_transversal(Transversal::new(r2, sign, label, cell)))
}

fn reeb_leaf(example: &Example, t: f64, which: LeafSelector) -> Result<LeafParametrization> {
    let profile = example.profile;
    let rb = profile.boundary_radius();
    let component = example.id == ExampleId::ReebComponent;
    let period = example.period;
    if component && !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "Reeb component period must be positive, got {period}"
        )));
    }
    let wrap_z = move |mut p: Vec<f64>| {
        if component {
            p[2] = p[2].rem_euclid(period);
        }
        p
    };
    match which {
        LeafSelector::Generic => {
            let h = REEB_CARTESIAN_HALF_WIDTH;
            let leaf = LeafParametrization::embedded(
                example,
                t,
                which,
                LeafTopology::Plane,
                Domain::boxed(&[-h, -h], &[h, h]),
                ReebCartesian { profile, t },
                wrap_z,
            );
            // coordinate: height at the axis
            Ok(leaf.with_transversal(Transversal::new(
                t,
                1.0,
                |_, e| e,
                |_| (f64::NEG_INFINITY, f64::INFINITY),
            )))
        }
        LeafSelector::Boundary => {
            let (domain, topology) = if component {
                (
                    Domain::boxed(&[0.0, 0.0], &[TWO_PI, period])
                        .with_period(0, TWO_PI)
                        .with_period(1, period),
                    LeafTopology::Torus,
                )
            } else {
                (
                    Domain::boxed(&[0.0, -1e6], &[TWO_PI, 1e6]).with_period(0, TWO_PI),
                    LeafTopology::Cylinder,
                )
            };
            let leaf = LeafParametrization {
                example: *example,
                t,
                selector: which,
                topology,
                pullback: MetricChart::from_formula(
                    format!("{}:boundary", example.id),
                    domain,
                    Cylinder(rb),
                ),
                map: Arc::new(move |x| wrap_z(vec![rb * x[0].cos(), rb * x[0].sin(), x[1]])),
                transversal: None,
            };
            // coordinate: radius; nearby leaves are z + depth(r) = const
            let tr = Transversal::new(
                rb,
                -1.0,
                move |x, r| x[1] + profile.depth_at_radius(r),
                move |_| (0.0, rb),
            );
            Ok(leaf.with_transversal(tr))
        }
        _ => Err(Error::InvalidInput(format!(
            "selector {} does not apply to {}",
            which.as_str(),
            example.id
        ))),
    }
}

/// Interior Reeb leaf of height `t` in coordinates `(theta, v)` covering
/// depths `w_ref + v`, `v` in `[v_lo, v_hi]`.
pub fn reeb_polar_leaf(
    example: &Example,
    t: f64,
    w_ref: f64,
    v_lo: f64,
    v_hi: f64,
) -> Result<LeafParametrization> {
    if !matches!(
        example.id,
        ExampleId::ReebCylinder | ExampleId::ReebComponent
    ) {
        return Err(Error::InvalidInput(format!(
            "{} has no Reeb leaves",
            example.id
        )));
    }
    if !(w_ref + v_lo > 0.0 && v_hi > v_lo) {
        return Err(Error::Domain(format!(
            "depth window [{}, {}] must be positive and nonempty",
            w_ref + v_lo,
            w_ref + v_hi
        )));
    }
    let component = example.id == ExampleId::ReebComponent;
    let period = example.period;
    let shift = t - w_ref;
    Ok(LeafParametrization::embedded(
        example,
        t,
        LeafSelector::Generic,
        LeafTopology::Plane,
        Domain::boxed(&[0.0, v_lo], &[TWO_PI, v_hi]).with_period(0, TWO_PI),
        ReebPolar {
            profile: example.profile,
            t,
            w_ref,
        },
        move |mut p| {
            p[2] += shift;
            if component {
                p[2] = p[2].rem_euclid(period);
            }
            p
        },
    ))
}

fn transition_leaf(example: &Example, t: f64, which: LeafSelector) -> Result<LeafParametrization> {
    let sin_t = t.sin();
    let critical = 1.0 - sin_t < 1e-12;
    let tau = t.rem_euclid(TWO_PI);
    let ambient = move |p: Vec<f64>| vec![p[0], p[1], p[2], p[3].rem_euclid(TWO_PI), tau];
    let sphere_domain =
        |lo: f64, hi: f64| Domain::boxed(&[lo, 0.0], &[hi, TWO_PI]).with_period(1, TWO_PI);
    match which {
        LeafSelector::Generic if !critical => {
            let leaf = LeafParametrization::embedded(
                example,
                t,
                which,
                LeafTopology::Sphere,
                sphere_domain(POLE_MARGIN, PI - POLE_MARGIN),
                TransitionLeaf { sin_t, c: 0.0 },
                ambient,
            );
            // coordinate: shift in s; every nearby leaf is a rotated copy
            Ok(leaf.with_transversal(Transversal::new(0.0, 1.0, |_, e| e, |_| (-PI, PI))))
        }
        LeafSelector::Generic => Err(Error::InvalidInput(
            "at sin t = 1 the leaves are plane_positive, plane_negative or torus".into(),
        )),
        LeafSelector::PlanePositive | LeafSelector::PlaneNegative if critical => {
            let (lo, hi) = if which == LeafSelector::PlanePositive {
                (POLE_MARGIN, FRAC_PI_2 - 0.05)
            } else {
                (FRAC_PI_2 + 0.05, PI - POLE_MARGIN)
            };
            Ok(LeafParametrization::embedded(
                example,
                t,
                which,
                LeafTopology::Plane,
                sphere_domain(lo, hi),
                TransitionLeaf { sin_t: 1.0, c: 0.0 },
                ambient,
            ))
        }
        LeafSelector::Torus if critical => {
            // great circle x = 0 times the s circle, coordinates (alpha, s)
            let leaf = LeafParametrization {
                example: *example,
                t,
                selector: which,
                topology: LeafTopology::Torus,
                pullback: MetricChart::from_formula(
                    "reeb_transition:torus",
                    Domain::boxed(&[0.0, 0.0], &[TWO_PI, TWO_PI])
                        .with_period(0, TWO_PI)
                        .with_period(1, TWO_PI),
                    Flat(2),
                ),
                map: Arc::new(move |x| {
                    vec![0.0, x[0].cos(), x[0].sin(), x[1].rem_euclid(TWO_PI), tau]
                }),
                transversal: None,
            };
            // coordinate: x on the sphere factor; nearby leaves are s = c + 1/x
            let tr = Transversal::new(0.0, 1.0, |x, e| x[1] - 1.0 / e, |_| (0.0, 1.0));
            Ok(leaf.with_transversal(tr))
        }
        _ => Err(Error::InvalidInput(format!(
            "selector {} needs sin t = 1, got sin t = {sin_t}",
            which.as_str()
        ))),
    }
}
