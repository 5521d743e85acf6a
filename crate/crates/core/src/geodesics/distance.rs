use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{shoot, DEFAULT_STEP};
use crate::chart::{Domain, MetricChart};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceConfig {
    /// Grid nodes along each axis of the search box.
    pub nodes_per_axis: usize,
    /// Edges join nodes whose offsets are primitive integer vectors of
    /// sup-norm at most this radius.
    pub stencil_radius: usize,
    /// The search box is the bounding box of the endpoints grown by this
    /// fraction of its largest side on every side.
    pub padding: f64,
    /// Refine the graph distance by two-point shooting.
    pub refine: bool,
    pub step: f64,
}

impl DistanceConfig {
    pub fn for_dim(d: usize) -> Self {
        DistanceConfig {
            nodes_per_axis: match d {
                1 => 1025,
                2 => 129,
                _ => 33,
            },
            stencil_radius: if d <= 2 { 3 } else { 1 },
            padding: 0.5,
            refine: true,
            step: 1e-2,
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn stencil(d: usize, r: usize) -> Vec<Vec<i64>> {
    let r = r.max(1) as i64;
    let side = (2 * r + 1) as usize;
    let mut out = Vec::new();
    for flat in 0..side.pow(d as u32) {
        let mut f = flat;
        let o: Vec<i64> = (0..d)
            .map(|_| {
                let c = (f % side) as i64 - r;
                f /= side;
                c
            })
            .collect();
        if o.iter().fold(0, |g, &c| gcd(g, c)) == 1 {
            out.push(o);
        }
    }
    out
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distances from a source, with predecessors for path recovery.
#[derive(Clone, Debug)]
pub struct DistanceField {
    pub dist: Vec<f64>,
    pred: Vec<usize>,
}

/// A box of grid nodes on a chart with metric-weighted edges.
///
/// Edge lengths average the `g`-lengths of the coordinate offset measured at
/// both ends. Axes that are periodic on the chart and spanned in full wrap
/// around.
#[derive(Clone, Debug)]
pub struct GridGraph {
    chart: MetricChart,
    lo: Vec<f64>,
    spacing: Vec<f64>,
    n: Vec<usize>,
    wrap: Vec<bool>,
    g: Vec<f64>,
    offsets: Vec<Vec<i64>>,
    radius: usize,
}

const NO_PRED: usize = usize::MAX;

impl GridGraph {
    pub fn new(
        chart: &MetricChart,
        region: &Domain,
        nodes_per_axis: usize,
        stencil_radius: usize,
    ) -> Result<Self> {
        let d = chart.dim();
        if region.dim() != d {
            return Err(Error::ShapeMismatch(
                "region and chart dimensions differ".into(),
            ));
        }
        if nodes_per_axis < 2 {
            return Err(Error::InvalidInput(
                "a grid needs at least two nodes per axis".into(),
            ));
        }
        let dom = chart.domain();
        let mut lo = Vec::with_capacity(d);
        let mut spacing = Vec::with_capacity(d);
        let mut wrap = Vec::with_capacity(d);
        for k in 0..d {
            let (a, b) = (region.lo[k], region.hi[k]);
            match dom.period[k] {
                Some(p) if b - a >= p - 1e-12 => {
                    lo.push(dom.lo[k]);
                    spacing.push(p / nodes_per_axis as f64);
                    wrap.push(true);
                }
                Some(_) => {
                    lo.push(a);
                    spacing.push((b - a) / (nodes_per_axis - 1) as f64);
                    wrap.push(false);
                }
                None => {
                    let (a, b) = (a.max(dom.lo[k]), b.min(dom.hi[k]));
                    if !(b > a) {
                        return Err(Error::Domain(format!("empty search box on axis {k}")));
                    }
                    lo.push(a);
                    spacing.push((b - a) / (nodes_per_axis - 1) as f64);
                    wrap.push(false);
                }
            }
        }
        let n = vec![nodes_per_axis; d];
        let total = nodes_per_axis.pow(d as u32);
        let mut graph = GridGraph {
            chart: chart.clone(),
            lo,
            spacing,
            n,
            wrap,
            g: Vec::new(),
            offsets: stencil(d, stencil_radius),
            radius: stencil_radius.max(1),
        };
        let g: Vec<Vec<f64>> = crate::par::map_range(total, |i| {
            let mut x = graph.node(i);
            dom.wrap(&mut x);
            let c = chart.coefficients(&x);
            if c.iter().all(|v| v.is_finite()) {
                c
            } else {
                vec![f64::NAN; d * d]
            }
        });
        graph.g = g.concat();
        Ok(graph)
    }

    pub fn len(&self) -> usize {
        self.g.len() / (self.dim() * self.dim())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    /// Largest coordinate spacing.
    pub fn mesh(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn chart(&self) -> &MetricChart {
        &self.chart
    }

    fn index_of(&self, ijk: &[i64]) -> Option<usize> {
        let mut flat = 0;
        let mut stride = 1;
        for k in 0..self.dim() {
            let n = self.n[k] as i64;
            let mut c = ijk[k];
            if self.wrap[k] {
                c = c.rem_euclid(n);
            } else if c < 0 || c >= n {
                return None;
            }
            flat += c as usize * stride;
            stride *= self.n[k];
        }
        Some(flat)
    }

    fn multi(&self, mut flat: usize) -> Vec<i64> {
        self.n
            .iter()
            .map(|&n| {
                let c = flat % n;
                flat /= n;
                c as i64
            })
            .collect()
    }

    /// Coordinates of node `i`.
    pub fn node(&self, i: usize) -> Vec<f64> {
        self.multi(i)
            .iter()
            .enumerate()
            .map(|(k, &c)| self.lo[k] + c as f64 * self.spacing[k])
            .collect()
    }

    fn quad(c: &[f64], v: &[f64]) -> f64 {
        let d = v.len();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += c[i * d + j] * v[i] * v[j];
            }
        }
        s.max(0.0).sqrt()
    }

    fn gnode(&self, i: usize) -> &[f64] {
        let dd = self.dim() * self.dim();
        &self.g[i * dd..(i + 1) * dd]
    }

    fn link(&self, x: &[f64], gx: &[f64], node: usize) -> f64 {
        let disp = self.chart.domain().displacement(x, &self.node(node));
        0.5 * (Self::quad(gx, &disp) + Self::quad(self.gnode(node), &disp))
    }

    /// Nodes within the stencil box around an arbitrary point.
    fn nearby(&self, x: &[f64]) -> Vec<usize> {
        let d = self.dim();
        let r = self.radius as i64;
        let base: Vec<i64> = (0..d)
            .map(|k| {
                let mut off = x[k] - self.lo[k];
                if let Some(p) = self.chart.domain().period[k] {
                    off = off.rem_euclid(p);
                }
                (off / self.spacing[k]).floor() as i64
            })
            .collect();
        let side = (2 * r + 2) as usize;
        let mut out = Vec::new();
        for flat in 0..side.pow(d as u32) {
            let mut f = flat;
            let ijk: Vec<i64> = base
                .iter()
                .map(|&b| {
                    let c = b - r + (f % side) as i64;
                    f /= side;
                    c
                })
                .collect();
            if let Some(i) = self.index_of(&ijk) {
                if self.gnode(i)[0].is_finite() {
                    out.push(i);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Integer lattice position of node `i`.
    pub fn lattice(&self, i: usize) -> Vec<i64> {
        self.multi(i)
    }

    /// Node nearest to `x` in coordinates, if `x` lies in the box.
    pub fn nearest_node(&self, x: &[f64]) -> Option<usize> {
        let ijk: Vec<i64> = (0..self.dim())
            .map(|k| {
                let mut off = x[k] - self.lo[k];
                if self.wrap[k] {
                    if let Some(p) = self.chart.domain().period[k] {
                        off = off.rem_euclid(p);
                    }
                }
                (off / self.spacing[k]).round() as i64
            })
            .collect();
        self.index_of(&ijk)
            .filter(|&i| self.gnode(i)[0].is_finite())
    }

    /// True when node `i` sits on a face of the box that does not wrap.
    pub fn on_edge(&self, i: usize) -> bool {
        self.multi(i)
            .iter()
            .enumerate()
            .any(|(k, &c)| !self.wrap[k] && (c == 0 || c == self.n[k] as i64 - 1))
    }

    /// Dijkstra from node `i`; distances between nodes are exact graph
    /// distances and so form a metric.
    pub fn node_distance_field(&self, i: usize) -> DistanceField {
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut pred = vec![NO_PRED; self.len()];
        let mut heap = BinaryHeap::new();
        dist[i] = 0.0;
        heap.push(Entry(0.0, i));
        self.relax(&mut dist, &mut pred, heap);
        DistanceField { dist, pred }
    }

    fn relax(&self, dist: &mut [f64], pred: &mut [usize], mut heap: BinaryHeap<Entry>) {
        let d = self.dim();
        let mut disp = vec![0.0; d];
        let mut ijk = vec![0i64; d];
        while let Some(Entry(du, u)) = heap.pop() {
            if du > dist[u] {
                continue;
            }
            let base = self.multi(u);
            let gu = self.gnode(u);
            for o in &self.offsets {
                for k in 0..d {
                    ijk[k] = base[k] + o[k];
                    disp[k] = o[k] as f64 * self.spacing[k];
                }
                let Some(w) = self.index_of(&ijk) else {
                    continue;
                };
                let gw = self.gnode(w);
                if !gw[0].is_finite() {
                    continue;
                }
                let nd = du + 0.5 * (Self::quad(gu, &disp) + Self::quad(gw, &disp));
                if nd < dist[w] {
                    dist[w] = nd;
                    pred[w] = u;
                    heap.push(Entry(nd, w));
                }
            }
        }
    }

    /// Dijkstra from an arbitrary point of the box.
    pub fn distance_field(&self, source: &[f64]) -> Result<DistanceField> {
        self.chart.check_point(source)?;
        let gs = self.chart.coefficients(source);
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut pred = vec![NO_PRED; self.len()];
        let mut heap = BinaryHeap::new();
        for i in self.nearby(source) {
            let l = self.link(source, &gs, i);
            if l < dist[i] {
                dist[i] = l;
                heap.push(Entry(l, i));
            }
        }
        if heap.is_empty() {
            return Err(Error::Domain(format!(
                "point {source:?} is outside the search grid"
            )));
        }
        self.relax(&mut dist, &mut pred, heap);
        Ok(DistanceField { dist, pred })
    }

    /// Graph distance from the field's source to `q`.
    pub fn distance_to(&self, field: &DistanceField, q: &[f64]) -> Result<f64> {
        self.chart.check_point(q)?;
        self.best_exit(field, q).map(|(l, _)| l)
    }

    fn best_exit(&self, field: &DistanceField, q: &[f64]) -> Result<(f64, usize)> {
        let gq = self.chart.coefficients(q);
        self.nearby(q)
            .into_iter()
            .map(|i| (field.dist[i] + self.link(q, &gq, i), i))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .filter(|(l, _)| l.is_finite())
            .ok_or_else(|| {
                Error::Domain(format!("point {q:?} is not reachable on the search grid"))
            })
    }

    /// Node sequence of the graph path from the source towards `q`.
    pub fn path_to(&self, field: &DistanceField, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (_, mut i) = self.best_exit(field, q)?;
        let mut nodes = vec![q.to_vec()];
        loop {
            nodes.push(self.node(i));
            if field.pred[i] == NO_PRED {
                break;
            }
            i = field.pred[i];
        }
        nodes.reverse();
        Ok(nodes)
    }
}

/// Search box around two points, respecting periodic axes.
fn search_box(chart: &MetricChart, p: &[f64], q: &[f64], padding: f64) -> Domain {
    let dom = chart.domain();
    let disp = dom.displacement(p, q);
    let span = disp.iter().map(|c| c.abs()).fold(0.0, f64::max).max(1e-9);
    let pad = padding * span;
    let lo: Vec<f64> = (0..p.len())
        .map(|k| p[k].min(p[k] + disp[k]) - pad)
        .collect();
    let hi: Vec<f64> = (0..p.len())
        .map(|k| p[k].max(p[k] + disp[k]) + pad)
        .collect();
    let mut b = Domain::boxed(&lo, &hi);
    for k in 0..p.len() {
        if let Some(per) = dom.period[k] {
            if hi[k] - lo[k] >= per {
                b.lo[k] = dom.lo[k];
                b.hi[k] = dom.lo[k] + per;
            }
        }
    }
    b
}

pub fn riemannian_distance(chart: &MetricChart, p: &[f64], q: &[f64]) -> Result<f64> {
    riemannian_distance_with(chart, p, q, &DistanceConfig::for_dim(chart.dim()))
}

/// Graph distance on a grid around `p` and `q`, lowered to the length of a
/// connecting geodesic when shooting finds a shorter one.
pub fn riemannian_distance_with(
    chart: &MetricChart,
    p: &[f64],
    q: &[f64],
    cfg: &DistanceConfig,
) -> Result<f64> {
    chart.checked_metric(p)?;
    chart.checked_metric(q)?;
    let disp = chart.domain().displacement(p, q);
    if disp.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    let region = search_box(chart, p, q, cfg.padding);
    let graph = GridGraph::new(chart, &region, cfg.nodes_per_axis, cfg.stencil_radius)?;
    let field = graph.distance_field(p)?;
    let mut best = graph.distance_to(&field, q)?;
    // two endpoints inside one stencil cell: the direct segment is a path too
    let direct = 0.5 * (chart.speed(p, &disp) + chart.speed(q, &disp));
    if disp
        .iter()
        .zip(&graph.spacing)
        .all(|(c, s)| c.abs() <= graph.radius as f64 * s)
    {
        best = best.min(direct);
    }
    if cfg.refine {
        let path = graph.path_to(&field, q)?;
        let mut guesses = vec![disp.clone()];
        // secant through the graph path at a tenth of its nodes
        let k = (path.len() / 10).max(1).min(path.len() - 1);
        let frac = k as f64 / (path.len() - 1) as f64;
        let sec = chart.domain().displacement(p, &path[k]);
        guesses.push(sec.iter().map(|c| c / frac).collect());
        for guess in guesses {
            if let Ok(v) = shoot(chart, p, q, &guess, cfg.step.min(DEFAULT_STEP * 10.0)) {
                best = best.min(chart.speed(p, &v));
            }
        }
    }
    Ok(best)
}
