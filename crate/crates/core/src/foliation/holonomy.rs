//! Holonomy by leafwise continuation, and the tabulated holonomy covers.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{leaf_at, Example, ExampleId, LeafParametrization, LeafSelector, LeafTopology};
use crate::chart::{Domain, MetricChart};
use crate::error::{Error, Result};
use crate::metrics::{Constant, Cylinder, Flat};

use super::leaves::TWO_PI;

/// Transversal tolerance of the lifts: each vertex is solved by bisection to
/// floating-point resolution, so returns are reliable well below this.
pub const HOLONOMY_MESH: f64 = 1e-9;

/// A closed leafwise curve and the offset of the nearby leaf to lift it to.
#[derive(Clone, Debug)]
pub struct HolonomyProbe {
    pub leaf: LeafParametrization,
    pub path: Vec<Vec<f64>>,
    pub offset: f64,
}

impl HolonomyProbe {
    pub fn new(leaf: LeafParametrization, path: Vec<Vec<f64>>, offset: f64) -> Result<Self> {
        if path.len() < 2 {
            return Err(Error::InvalidInput(
                "a loop needs at least two points".into(),
            ));
        }
        let dom = leaf.pullback.domain();
        if path.iter().any(|p| p.len() != dom.dim()) {
            return Err(Error::ShapeMismatch(
                "loop points must match the leaf dimension".into(),
            ));
        }
        let gap = dom.displacement(&path[0], &path[path.len() - 1]);
        if gap.iter().any(|g| g.abs() > 1e-9) {
            return Err(Error::InvalidInput(format!(
                "loop is not closed: end differs by {gap:?}"
            )));
        }
        if !(offset > 0.0 && offset.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "transversal offset must be positive, got {offset}"
            )));
        }
        Ok(HolonomyProbe { leaf, path, offset })
    }
}

/// Offset of the lifted endpoint after following the loop on the nearby leaf
/// that starts at the probe's offset.
pub fn holonomy_map(probe: &HolonomyProbe) -> Result<f64> {
    let tr = probe.leaf.transversal().ok_or_else(|| {
        Error::Unsupported(format!("{:?} carries no transversal structure", probe.leaf))
    })?;
    let dom = probe.leaf.pullback.domain();
    let e0 = tr.coordinate(probe.offset);
    let (lo, hi) = tr.cell(e0);
    if !(e0 > lo && e0 < hi) {
        return Err(Error::Domain(format!(
            "offset {} leaves the transversal range ({lo}, {hi})",
            probe.offset
        )));
    }
    let mut x = probe.path[0].clone();
    let target = tr.label(&x, e0);
    let mut e = e0;
    for w in probe.path.windows(2) {
        for (xi, di) in x.iter_mut().zip(dom.displacement(&w[0], &w[1])) {
            *xi += di;
        }
        e = solve_label(|v| tr.label(&x, v) - target, e, lo, hi)?;
    }
    Ok(tr.offset(e))
}

/// Signed transversal displacement of the lift: positive when the lift ends
/// closer to the leaf than it started.
pub fn holonomy_return(probe: &HolonomyProbe) -> Result<f64> {
    Ok(probe.offset - holonomy_map(probe)?)
}

/// Root of a monotone `f` in `(lo, hi)`, searched outward from `start`.
fn solve_label(f: impl Fn(f64) -> f64, start: f64, lo: f64, hi: f64) -> Result<f64> {
    let f0 = f(start);
    if f0 == 0.0 {
        return Ok(start);
    }
    let scale = start.abs().max(1e-3);
    let mut step = 1e-9 * scale;
    let inside = |v: f64| v > lo && v < hi;
    let mut bracket = None;
    while bracket.is_none() {
        let mut any = false;
        for v in [start + step, start - step] {
            let v = v.clamp(next_up(lo), next_down(hi));
            if !inside(v) {
                continue;
            }
            any = true;
            let fv = f(v);
            if fv.is_finite() && fv.signum() != f0.signum() {
                bracket = Some(if v > start { (start, v) } else { (v, start) });
                break;
            }
        }
        let reached_edges = start + step >= hi && start - step <= lo;
        if bracket.is_none() && (!any || reached_edges) {
            return Err(Error::Continuation(format!(
                "nearby leaf leaves the transversal range ({lo}, {hi}) near {start}"
            )));
        }
        step *= 2.0;
    }
    let (mut a, mut b) = bracket.expect("bracket found");
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

fn next_up(v: f64) -> f64 {
    if v.is_finite() {
        v + v.abs().max(1.0) * 1e-15
    } else {
        v
    }
}

fn next_down(v: f64) -> f64 {
    if v.is_finite() {
        v - v.abs().max(1.0) * 1e-15
    } else {
        v
    }
}

type ProjectionFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Analytic holonomy cover of a leaf.
#[derive(Clone)]
pub struct HolonomyCoverSpec {
    pub leaf: LeafParametrization,
    pub cover: MetricChart,
    /// True when the leaf has trivial holonomy and the cover is the leaf.
    pub is_leaf_itself: bool,
    projection: Arc<ProjectionFn>,
}

impl std::fmt::Debug for HolonomyCoverSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HolonomyCoverSpec")
            .field("leaf", &self.leaf)
            .field("cover", &self.cover.name())
            .field("is_leaf_itself", &self.is_leaf_itself)
            .finish()
    }
}

/// Window used when sampling unbounded cover directions.
const SAMPLE_WINDOW: f64 = 20.0;

impl HolonomyCoverSpec {
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        (self.projection)(y)
    }

    /// Largest entrywise gap between the cover metric and the pulled back
    /// leaf metric over `samples` random cover points, relative to
    /// `max(1, |g|)`.
    pub fn isometry_defect(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dom = self.cover.domain();
        let leaf_dom = self.leaf.pullback.domain();
        let d = dom.dim();
        let h = 1e-3;
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let y: Vec<f64> = (0..d)
                .map(|k| {
                    let (a, b) = (dom.lo[k].max(-SAMPLE_WINDOW), dom.hi[k].min(SAMPLE_WINDOW));
                    let m = if dom.is_periodic(k) { 0.0 } else { 2.0 * h };
                    rng.gen_range(a + m..b - m)
                })
                .collect();
            let x = self.project(&y);
            let g = self.leaf.pullback.checked_metric(&x)?;
            let mut jac = vec![vec![0.0; d]; d];
            for k in 0..d {
                let (mut yp, mut ym) = (y.clone(), y.clone());
                yp[k] += h;
                ym[k] -= h;
                let dx = leaf_dom.displacement(&self.project(&ym), &self.project(&yp));
                for i in 0..d {
                    jac[i][k] = dx[i] / (2.0 * h);
                }
            }
            let gc = self.cover.checked_metric(&y)?;
            for a in 0..d {
                for b in 0..d {
                    let mut pulled = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            pulled += jac[i][a] * g[(i, j)] * jac[j][b];
                        }
                    }
                    worst = worst.max((pulled - gc[(a, b)]).abs() / gc[(a, b)].abs().max(1.0));
                }
            }
        }
        Ok(worst)
    }
}

fn wrap_axes(dom: Domain) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync {
    move |y| {
        let mut x = y.to_vec();
        dom.wrap(&mut x);
        x
    }
}

/// Holonomy cover of the leaf `leaf_at(example, t, which)`.
pub fn holonomy_cover(example: &Example, t: f64, which: LeafSelector) -> Result<HolonomyCoverSpec> {
    let leaf = leaf_at(example, t, which)?;
    let itself = |leaf: LeafParametrization| {
        let dom = leaf.pullback.domain().clone();
        HolonomyCoverSpec {
            cover: leaf.pullback.clone(),
            leaf,
            is_leaf_itself: true,
            projection: Arc::new(wrap_axes(dom)),
        }
    };
    let unwrap = |leaf: LeafParametrization, cover: MetricChart| {
        let dom = leaf.pullback.domain().clone();
        HolonomyCoverSpec {
            leaf,
            cover,
            is_leaf_itself: false,
            projection: Arc::new(wrap_axes(dom)),
        }
    };
    const REACH: f64 = 1e3;
    Ok(match (example.id, leaf.topology) {
        (ExampleId::ReebComponent, LeafTopology::Torus) => {
            let rb = example.profile.boundary_radius();
            let cover = MetricChart::from_formula(
                "reeb_component:boundary_cover",
                Domain::boxed(&[0.0, -REACH], &[TWO_PI, REACH]).with_period(0, TWO_PI),
                Cylinder(rb),
            );
            unwrap(leaf, cover)
        }
        (ExampleId::ReebTransition, LeafTopology::Torus) => {
            let cover = MetricChart::from_formula(
                "reeb_transition:torus_cover",
                Domain::boxed(&[0.0, -REACH], &[TWO_PI, REACH]).with_period(0, TWO_PI),
                Flat(2),
            );
            unwrap(leaf, cover)
        }
        (ExampleId::VinylRecord | ExampleId::BrokenRecord, LeafTopology::Circle) => {
            let r2 = match which {
                LeafSelector::Boundary => 1.0,
                LeafSelector::OuterBoundary => 2.0,
                _ => t,
            };
            let (lo, hi, spirals) = if example.id == ExampleId::VinylRecord {
                super::vinyl_band(r2)
            } else {
                super::broken_band(r2)
            };
            if !spirals && r2 > lo && r2 < hi {
                itself(leaf)
            } else {
                let cover = MetricChart::from_formula(
                    format!("{}:circle_cover:{r2}", example.id),
                    Domain::boxed(&[-REACH], &[REACH]),
                    Constant(vec![r2], 1),
                );
                unwrap(leaf, cover)
            }
        }
        (
            _,
            LeafTopology::Line
            | LeafTopology::Plane
            | LeafTopology::Sphere
            | LeafTopology::Cylinder,
        ) => itself(leaf),
        (id, topo) => {
            return Err(Error::Unsupported(format!(
                "no tabulated holonomy cover for a {topo:?} leaf of {id}"
            )))
        }
    })
}
