//! Embeddings of the example leaves. Each maps leaf coordinates into a
//! Euclidean space whose metric agrees with the ambient one up to first
//! order, so the pulled-back metric is the leafwise metric.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::chart::Embedding;
use crate::jet::Real;

/// `atan(q) / q`, analytic at 0.
pub fn atanc<T: Real>(q: &T) -> T {
    if q.val().abs() < 1e-3 {
        let q2 = q.clone() * q.clone();
        let coeff = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 } / (2 * k + 1) as f64;
        let mut acc = q.lift(coeff(5));
        for k in (0..5).rev() {
            acc = (q2.clone() * acc).lift_add(coeff(k));
        }
        acc
    } else {
        q.atan() * q.recip()
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic_t<T: Real>(x: &T) -> T {
    (x.clone() * -1.0).exp().lift_add(1.0).recip()
}

trait LiftAdd {
    fn lift_add(self, c: f64) -> Self;
}

impl<T: Real> LiftAdd for T {
    fn lift_add(self, c: f64) -> Self {
        let k = self.lift(c);
        self + k
    }
}

/// Which reading of the Reeb leaf profile `z = t - tan(x^2 + y^2)^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ReebProfile {
    /// `z = t - (tan(r^2))^2`, boundary radius `sqrt(pi / 2)`.
    #[default]
    SquaredTangent,
    /// `z = t - tan(r^4)`, boundary radius `(pi / 2)^(1/4)`.
    SquaredArgument,
}

impl ReebProfile {
    pub fn boundary_radius(self) -> f64 {
        match self {
            ReebProfile::SquaredTangent => FRAC_PI_2.sqrt(),
            ReebProfile::SquaredArgument => FRAC_PI_2.sqrt().sqrt(),
        }
    }

    /// Depth `t - z` of the leaf at radius `r`.
    pub fn depth_at_radius(self, r: f64) -> f64 {
        match self {
            ReebProfile::SquaredTangent => (r * r).tan().powi(2),
            ReebProfile::SquaredArgument => r.powi(4).tan(),
        }
    }

    /// Radius of the leaf at depth `w = t - z >= 0`.
    pub fn radius_at_depth<T: Real>(self, w: &T) -> T {
        match self {
            ReebProfile::SquaredTangent => w.sqrt().atan().sqrt(),
            ReebProfile::SquaredArgument => w.atan().sqrt().sqrt(),
        }
    }

    /// Depth at which the leaf is `delta` away from the boundary cylinder.
    pub fn depth_for_boundary_distance(self, delta: f64) -> f64 {
        self.depth_at_radius(self.boundary_radius() - delta)
    }
}

/// Interior Reeb leaf as a graph over the plane: with `s = a^2 + b^2`,
/// `(a, b) -> (a F(s), b F(s), t - s^2)` where `|(x, y)|` solves the profile
/// at depth `s^2`.
#[derive(Clone, Copy, Debug)]
pub struct ReebCartesian {
    pub profile: ReebProfile,
    pub t: f64,
}

impl Embedding for ReebCartesian {
    fn dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn embed<T: Real>(&self, x: &[T]) -> Vec<T> {
        let s = x[0].clone() * x[0].clone() + x[1].clone() * x[1].clone();
        let f = match self.profile {
            ReebProfile::SquaredTangent => atanc(&s).sqrt(),
            ReebProfile::SquaredArgument => atanc(&(s.clone() * s.clone())).sqrt().sqrt(),
        };
        let z = s.clone() * s * -1.0;
        vec![
            x[0].clone() * f.clone(),
            x[1].clone() * f,
            z.lift_add(self.t),
        ]
    }
}

/// Interior Reeb leaf in `(theta, v)` with depth `w = w_ref + v`:
/// `(r(w) cos theta, r(w) sin theta, t - w)`.
#[derive(Clone, Copy, Debug)]
pub struct ReebPolar {
    pub profile: ReebProfile,
    pub t: f64,
    pub w_ref: f64,
}

impl Embedding for ReebPolar {
    fn dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn embed<T: Real>(&self, x: &[T]) -> Vec<T> {
        let w = x[1].clone().lift_add(self.w_ref);
        let r = self.profile.radius_at_depth(&w);
        // height relative to t - w_ref keeps coordinates small
        vec![r.clone() * x[0].cos(), r * x[0].sin(), x[1].clone() * -1.0]
    }
}

/// Spiral `theta -> rho(theta) (cos theta, sin theta)` with
/// `rho^2 = lo + (hi - lo) sigma(theta - c)`.
#[derive(Clone, Copy, Debug)]
pub struct Spiral {
    pub lo: f64,
    pub hi: f64,
    pub c: f64,
}

impl Spiral {
    pub fn radius_squared(&self, theta: f64) -> f64 {
        self.lo + (self.hi - self.lo) * logistic(theta - self.c)
    }
}

impl Embedding for Spiral {
    fn dim(&self) -> usize {
        1
    }
    fn ambient_dim(&self) -> usize {
        2
    }
    fn embed<T: Real>(&self, x: &[T]) -> Vec<T> {
        let sig = logistic_t(&x[0].clone().lift_add(-self.c));
        let rho = (sig * (self.hi - self.lo)).lift_add(self.lo).sqrt();
        vec![rho.clone() * x[0].cos(), rho * x[0].sin()]
    }
}

/// Sphere leaf of the Reeb transition: polar axis along `x`,
/// `(theta, phi) -> (cos theta, sin theta cos phi, sin theta sin phi, s)` with
/// `s = c - (sin t / a) atan(cos theta / a)`, `a = 1 - sin t`; for `a = 0`,
/// `s = c + 1 / cos theta`.
#[derive(Clone, Copy, Debug)]
pub struct TransitionLeaf {
    pub sin_t: f64,
    pub c: f64,
}

impl TransitionLeaf {
    pub fn a(&self) -> f64 {
        1.0 - self.sin_t
    }

    /// `s` as a function of `x` on this leaf.
    pub fn s_of_x<T: Real>(&self, x: &T) -> T {
        let a = self.a();
        if a == 0.0 {
            x.recip().lift_add(self.c)
        } else {
            ((x.clone() * (1.0 / a)).atan() * (-self.sin_t / a)).lift_add(self.c)
        }
    }
}

impl Embedding for TransitionLeaf {
    fn dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        4
    }
    fn embed<T: Real>(&self, x: &[T]) -> Vec<T> {
        let (th, ph) = (&x[0], &x[1]);
        let cx = th.cos();
        let s = self.s_of_x(&cx);
        vec![cx, th.sin() * ph.cos(), th.sin() * ph.sin(), s]
    }
}

/// Circle of radius `rho` by arc angle.
pub fn circle_point(rho: f64, theta: f64) -> Vec<f64> {
    vec![rho * theta.cos(), rho * theta.sin()]
}

pub const TWO_PI: f64 = 2.0 * PI;
