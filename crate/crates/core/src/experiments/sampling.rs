use serde::{Deserialize, Serialize};

use crate::chart::{Domain, MetricChart};
use crate::error::{Error, Result};
use crate::foliation::{LeafParametrization, LeafTopology};
use crate::geodesics::GridGraph;
use crate::metric_space::PointedFiniteMetricSpace;
use crate::par;

/// How a geodesic ball is discretized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BallSampling {
    /// Graph nodes per axis of the search box.
    pub nodes_per_axis: usize,
    /// Every `stride`-th node along each axis is a sample point.
    pub stride: usize,
    pub stencil_radius: usize,
    /// Sample points whose distance to the basepoint lies within this gap of
    /// a whole number are dropped, so that integer-radius balls are not
    /// decided by rounding.
    pub shell_gap: f64,
    /// Refuse balls that reach a non-periodic face of the box. Off for
    /// compact leaves whose chart faces are coordinate singularities.
    pub check_edges: bool,
}

impl Default for BallSampling {
    fn default() -> Self {
        BallSampling {
            nodes_per_axis: 129,
            stride: 5,
            stencil_radius: 3,
            shell_gap: 0.0,
            check_edges: true,
        }
    }
}

impl BallSampling {
    pub fn for_dim(d: usize) -> Self {
        match d {
            1 => BallSampling {
                nodes_per_axis: 1025,
                stride: 8,
                stencil_radius: 1,
                shell_gap: 0.0,
                check_edges: true,
            },
            2 => BallSampling::default(),
            _ => BallSampling {
                nodes_per_axis: 25,
                stride: 3,
                stencil_radius: 1,
                shell_gap: 0.0,
                check_edges: true,
            },
        }
    }
}

/// Sampled geodesic ball of a chart, points labelled by graph node.
#[derive(Clone, Debug)]
pub struct ChartBallSample {
    pub space: PointedFiniteMetricSpace,
    pub coords: Vec<Vec<f64>>,
    pub nodes: Vec<usize>,
    /// Coordinate spacing of the graph.
    pub mesh: f64,
    /// Largest `g`-length of a graph edge between sample neighbours.
    pub spacing: f64,
}

impl ChartBallSample {
    /// Index pairs of points that share a graph node with `other`.
    pub fn node_matching(&self, other: &ChartBallSample) -> Vec<(usize, usize)> {
        let pos: std::collections::HashMap<usize, usize> = other
            .nodes
            .iter()
            .enumerate()
            .map(|(k, &n)| (n, k))
            .collect();
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(k, n)| pos.get(n).map(|&j| (k, j)))
            .collect()
    }
}

fn near_whole(v: f64, gap: f64) -> bool {
    gap > 0.0 && v > 0.0 && (v - v.round()).abs() < gap
}

/// Samples the ball of `radius` about `basepoint` (snapped to the nearest
/// graph node) on a grid graph over `region`.
pub fn sample_chart_ball(
    chart: &MetricChart,
    region: &Domain,
    basepoint: &[f64],
    radius: f64,
    sampling: &BallSampling,
) -> Result<ChartBallSample> {
    sample_chart_ball_keeping(chart, region, basepoint, radius, sampling, None)
}

/// As [`sample_chart_ball`], deciding which nodes to keep by the distances
/// of `selector` (a sample of another chart on the same grid) when given.
pub fn sample_chart_ball_keeping(
    chart: &MetricChart,
    region: &Domain,
    basepoint: &[f64],
    radius: f64,
    sampling: &BallSampling,
    selector: Option<&ChartBallSample>,
) -> Result<ChartBallSample> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    let graph = GridGraph::new(
        chart,
        region,
        sampling.nodes_per_axis,
        sampling.stencil_radius,
    )?;
    let base = graph.nearest_node(basepoint).ok_or_else(|| {
        Error::Domain(format!(
            "basepoint {basepoint:?} is outside the sampling region"
        ))
    })?;
    let field = graph.node_distance_field(base);
    let achieved = (0..graph.len())
        .filter(|&i| graph.on_edge(i))
        .map(|i| field.dist[i])
        .fold(f64::INFINITY, f64::min);
    if sampling.check_edges && achieved < radius {
        return Err(Error::PartialSample {
            achieved,
            requested: radius,
        });
    }
    let stride = sampling.stride.max(1) as i64;
    let anchor = graph.lattice(base);
    let nodes: Vec<usize> = match selector {
        Some(sel) => sel.nodes.clone(),
        None => (0..graph.len())
            .filter(|&i| {
                let d = field.dist[i];
                d <= radius
                    && (i == base || !near_whole(d, sampling.shell_gap))
                    && graph
                        .lattice(i)
                        .iter()
                        .zip(&anchor)
                        .all(|(c, a)| (c - a).rem_euclid(stride) == 0)
            })
            .collect(),
    };
    if !nodes.contains(&base) {
        return Err(Error::InvalidInput(
            "selector sample does not contain this basepoint".into(),
        ));
    }
    let rows = par::map_slice(&nodes, |&i| {
        let f = graph.node_distance_field(i);
        nodes.iter().map(|&j| f.dist[j]).collect::<Vec<f64>>()
    });
    let n = nodes.len();
    let mut dist = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..a {
            let v = rows[a][b].min(rows[b][a]);
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "sample nodes {} and {} are not connected",
                    nodes[a], nodes[b]
                )));
            }
            dist[a][b] = v;
            dist[b][a] = v;
        }
    }
    let spacing = (0..n)
        .map(|a| {
            (0..n)
                .filter(|&b| b != a)
                .map(|b| dist[a][b])
                .fold(f64::INFINITY, f64::min)
        })
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let labels = nodes.iter().map(|i| i.to_string()).collect();
    let bp = nodes
        .iter()
        .position(|&i| i == base)
        .expect("basepoint kept");
    let space = PointedFiniteMetricSpace::new(labels, dist, bp)?;
    Ok(ChartBallSample {
        space,
        coords: nodes.iter().map(|&i| graph.node(i)).collect(),
        nodes,
        mesh: graph.mesh(),
        spacing,
    })
}

/// Sampled leafwise ball.
#[derive(Clone, Debug)]
pub struct LeafSample {
    pub leaf: LeafParametrization,
    pub basepoint: Vec<f64>,
    pub radius: f64,
    pub resolution: usize,
    pub sample: ChartBallSample,
}

impl LeafSample {
    pub fn space(&self) -> &PointedFiniteMetricSpace {
        &self.sample.space
    }
}

/// Ball of `radius` about `basepoint` on the leaf, on a graph with
/// `resolution` nodes per axis over the leaf chart (periodic axes in full,
/// other axes cut to the basepoint's box of coordinate half-width
/// `radius / sqrt(min eigenvalue)` when that is smaller).
pub fn sample_leaf_ball(
    leaf: &LeafParametrization,
    basepoint: &[f64],
    radius: f64,
    resolution: usize,
) -> Result<LeafSample> {
    if resolution < 2 {
        return Err(Error::InvalidInput("resolution must be at least 2".into()));
    }
    let d = leaf.dim();
    let compact = matches!(
        leaf.topology,
        LeafTopology::Sphere | LeafTopology::Torus | LeafTopology::Circle
    );
    let sampling = BallSampling {
        nodes_per_axis: resolution,
        stride: (resolution / 24).max(1),
        check_edges: !compact,
        ..BallSampling::for_dim(d)
    };
    let region = leaf_region(leaf, basepoint, radius)?;
    let sample = sample_chart_ball(&leaf.pullback, &region, basepoint, radius, &sampling)?;
    Ok(LeafSample {
        leaf: leaf.clone(),
        basepoint: basepoint.to_vec(),
        radius,
        resolution,
        sample,
    })
}

fn leaf_region(leaf: &LeafParametrization, basepoint: &[f64], radius: f64) -> Result<Domain> {
    let chart = &leaf.pullback;
    let g = chart.checked_metric(basepoint)?;
    let lam = g.symmetric_eigenvalues().min();
    let reach = 1.5 * radius / lam.sqrt();
    let dom = chart.domain();
    let mut lo = dom.lo.clone();
    let mut hi = dom.hi.clone();
    for k in 0..dom.dim() {
        if !dom.is_periodic(k) {
            lo[k] = lo[k].max(basepoint[k] - reach);
            hi[k] = hi[k].min(basepoint[k] + reach);
        }
    }
    let mut region = Domain::boxed(&lo, &hi);
    for k in 0..dom.dim() {
        if let Some(p) = dom.period[k] {
            region = region.with_period(k, p);
        }
    }
    Ok(region)
}
