//! Exhaustive pointed-GH oracle for very small spaces.
//!
//! For each `n` the closed `n`-balls are compared by enumerating every
//! relation between them that covers both sides. Each relation, together
//! with a gap `t` (relation pairs) and `s` (basepoints) drawn from a grid,
//! induces a cross-distance matrix by gluing along the relation:
//!
//! `c(i, j) = min( min_{(a,b) in R} d_X(i,a) + t + d_Y(b,j), d_X(i,o) + s + d_Y(o',j) )`
//!
//! The glued union matrix is validated against every triangle inequality
//! and the objective `d(o, o') + d_H` is evaluated on it directly. Every
//! admissible union metric is dominated by one of these glued matrices, so
//! the grid minimum converges to `d_n` from above as the step shrinks.

use super::PointedFiniteMetricSpace;
use crate::error::{Error, Result};

/// Largest `|X| * |Y|` the oracle accepts.
pub const ORACLE_MAX_PAIRS: usize = 12;

pub fn exact_pointed_gh_small(
    x: &PointedFiniteMetricSpace,
    y: &PointedFiniteMetricSpace,
    n_max: usize,
    grid_step: f64,
) -> Result<f64> {
    if x.len() * y.len() > ORACLE_MAX_PAIRS {
        return Err(Error::Refused(format!(
            "exact oracle handles |X||Y| <= {ORACLE_MAX_PAIRS}, got {}x{}",
            x.len(),
            y.len()
        )));
    }
    if !(grid_step > 0.0) {
        return Err(Error::Domain(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for n in 1..=n_max {
        weight *= 0.5;
        let bx = x.truncated_ball(n as f64)?;
        let by = y.truncated_ball(n as f64)?;
        total += weight * oracle_dn(&bx, &by, grid_step)?.min(1.0);
    }
    Ok(total)
}

fn snap_up(value: f64, step: f64) -> f64 {
    ((value / step) - 1e-9).ceil().max(0.0) * step
}

fn oracle_dn(x: &PointedFiniteMetricSpace, y: &PointedFiniteMetricSpace, step: f64) -> Result<f64> {
    let (a, b) = (x.len(), y.len());
    let pairs = a * b;
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << pairs) {
        let rel: Vec<(usize, usize)> = (0..pairs)
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| (k / b, k % b))
            .collect();
        let covers_x = (0..a).all(|i| rel.iter().any(|&(p, _)| p == i));
        let covers_y = (0..b).all(|j| rel.iter().any(|&(_, q)| q == j));
        if !covers_x || !covers_y {
            continue;
        }
        let mut distortion: f64 = 0.0;
        let mut radial: f64 = 0.0;
        for &(i, j) in &rel {
            radial = radial.max((x.radius_of(i) - y.radius_of(j)).abs());
            for &(i2, j2) in &rel {
                distortion = distortion.max((x.d(i, i2) - y.d(j, j2)).abs());
            }
        }
        let mut t = snap_up(distortion / 2.0, step);
        let s = snap_up((radial - t).max(0.0), step);
        // grid rounding can leave a triangle marginally violated; step up
        for _ in 0..4 {
            if let Ok(union) = glue(x, y, &rel, t, s) {
                let value = union.d(x.basepoint(), a + y.basepoint())
                    + union.hausdorff_distance(
                        &(0..a).collect::<Vec<_>>(),
                        &(a..a + b).collect::<Vec<_>>(),
                    )?;
                best = best.min(value);
                break;
            }
            t += step;
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        // the all-pairs relation is always admissible for large enough t
        Err(Error::Domain(
            "no admissible cross-distance matrix on the grid".into(),
        ))
    }
}

fn glue(
    x: &PointedFiniteMetricSpace,
    y: &PointedFiniteMetricSpace,
    rel: &[(usize, usize)],
    t: f64,
    s: f64,
) -> Result<PointedFiniteMetricSpace> {
    let (a, b) = (x.len(), y.len());
    let (ox, oy) = (x.basepoint(), y.basepoint());
    let mut m = vec![vec![0.0; a + b]; a + b];
    for i in 0..a {
        for i2 in 0..a {
            m[i][i2] = x.d(i, i2);
        }
    }
    for j in 0..b {
        for j2 in 0..b {
            m[a + j][a + j2] = y.d(j, j2);
        }
    }
    for i in 0..a {
        for j in 0..b {
            let via_base = x.d(i, ox) + s + y.d(oy, j);
            let c = rel
                .iter()
                .map(|&(p, q)| x.d(i, p) + t + y.d(q, j))
                .fold(via_base, f64::min);
            m[i][a + j] = c;
            m[a + j][i] = c;
        }
    }
    PointedFiniteMetricSpace::from_matrix(m, ox)
}
