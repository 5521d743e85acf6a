use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chart::Domain;
use crate::error::{Error, Result};
use crate::foliation::{LeafParametrization, LeafTopology};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    /// Difference to the estimate on the half-resolution grid, scaled by the
    /// midpoint rule's order.
    pub error: f64,
    pub cells: usize,
}

/// Midpoint-rule volume of `sqrt(det g)` over `region` with `cells[k]`
/// cells along axis `k`. Without a region the leaf must be compact; sphere
/// leaves are then integrated over the full polar range.
pub fn leaf_volume(
    leaf: &LeafParametrization,
    region: Option<&Domain>,
    cells: &[usize],
) -> Result<VolumeEstimate> {
    let d = leaf.dim();
    if cells.len() != d || cells.iter().any(|&c| c < 2) {
        return Err(Error::InvalidInput(format!(
            "need {d} cell counts of at least 2, got {cells:?}"
        )));
    }
    let region = match region {
        Some(r) if r.dim() == d => r.clone(),
        Some(_) => {
            return Err(Error::ShapeMismatch(
                "region dimension differs from the leaf".into(),
            ))
        }
        None => compact_region(leaf)?,
    };
    let fine = midpoint(leaf, &region, cells);
    let coarse_cells: Vec<usize> = cells.iter().map(|&c| (c / 2).max(1)).collect();
    let coarse = midpoint(leaf, &region, &coarse_cells);
    Ok(VolumeEstimate {
        value: fine,
        error: (fine - coarse).abs() / 3.0,
        cells: cells.iter().product(),
    })
}

fn compact_region(leaf: &LeafParametrization) -> Result<Domain> {
    let dom = leaf.pullback.domain();
    match leaf.topology {
        LeafTopology::Circle | LeafTopology::Torus => Ok(dom.clone()),
        LeafTopology::Sphere => {
            let mut lo = dom.lo.clone();
            let mut hi = dom.hi.clone();
            lo[0] = 0.0;
            hi[0] = PI;
            Ok(Domain::boxed(&lo, &hi))
        }
        t => Err(Error::Refused(format!(
            "a {t:?} leaf is not compact; give a region"
        ))),
    }
}

fn midpoint(leaf: &LeafParametrization, region: &Domain, cells: &[usize]) -> f64 {
    let d = cells.len();
    let h: Vec<f64> = (0..d)
        .map(|k| (region.hi[k] - region.lo[k]) / cells[k] as f64)
        .collect();
    let cell_volume: f64 = h.iter().product();
    let outer = cells[0];
    let inner: usize = cells[1..].iter().product();
    let rows = par::map_range(outer, |i| {
        let mut x = vec![0.0; d];
        x[0] = region.lo[0] + (i as f64 + 0.5) * h[0];
        let mut s = 0.0;
        for flat in 0..inner {
            let mut f = flat;
            for k in 1..d {
                x[k] = region.lo[k] + ((f % cells[k]) as f64 + 0.5) * h[k];
                f /= cells[k];
            }
            s += leaf.pullback.metric(&x).determinant().max(0.0).sqrt();
        }
        s
    });
    rows.iter().sum::<f64>() * cell_volume
}
