//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] holds the Taylor coefficients of a smooth function of `vars`
//! variables around a point, up to total degree `order`. Arithmetic and the
//! elementary functions propagate the coefficients exactly, so evaluating a
//! metric on variable jets yields all of its partial derivatives at a point
//! to machine precision. Monomials are stored in graded order, so the
//! coefficients of a lower-order truncation are a prefix of a higher one.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;

/// Highest supported total degree.
pub const MAX_ORDER: usize = 8;
/// Highest supported number of variables.
pub const MAX_VARS: usize = 4;

struct Layout {
    monos: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// Number of monomials of total degree <= k.
    count: Vec<usize>,
    /// Product table `(a, b, c)`: mono[a] * mono[b] = mono[c], sorted by deg(c).
    mul: Vec<(u32, u32, u32)>,
    /// Prefix lengths of `mul` for each result order.
    mul_end: Vec<usize>,
}

impl Layout {
    fn build(vars: usize) -> Layout {
        let mut monos: Vec<Vec<u8>> = Vec::new();
        let mut count = Vec::new();
        for deg in 0..=MAX_ORDER {
            let mut level = Vec::new();
            compositions(vars, deg, &mut vec![0; vars], 0, &mut level);
            // lexicographically descending keeps x^2 before xy before y^2
            level.sort_by(|a, b| b.cmp(a));
            monos.extend(level);
            count.push(monos.len());
        }
        let index: HashMap<Vec<u8>, usize> = monos
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let deg = |m: &[u8]| m.iter().map(|&e| e as usize).sum::<usize>();
        let mut mul = Vec::new();
        for (a, ma) in monos.iter().enumerate() {
            for (b, mb) in monos.iter().enumerate() {
                if deg(ma) + deg(mb) > MAX_ORDER {
                    continue;
                }
                let mc: Vec<u8> = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
                mul.push((a as u32, b as u32, index[&mc] as u32));
            }
        }
        mul.sort_by_key(|&(_, _, c)| c);
        let mul_end = count
            .iter()
            .map(|&n| {
                mul.iter()
                    .take_while(|&&(_, _, c)| (c as usize) < n)
                    .count()
            })
            .collect();
        Layout {
            monos,
            index,
            count,
            mul,
            mul_end,
        }
    }
}

fn compositions(
    vars: usize,
    remaining: usize,
    cur: &mut Vec<u8>,
    pos: usize,
    out: &mut Vec<Vec<u8>>,
) {
    if pos + 1 == vars {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        return;
    }
    for e in 0..=remaining {
        cur[pos] = e as u8;
        compositions(vars, remaining - e, cur, pos + 1, out);
    }
}

static LAYOUTS: Lazy<Mutex<HashMap<usize, Arc<Layout>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn layout(vars: usize) -> Arc<Layout> {
    assert!(
        (1..=MAX_VARS).contains(&vars),
        "jets support 1..={MAX_VARS} variables"
    );
    let mut map = LAYOUTS.lock().expect("layout cache poisoned");
    map.entry(vars)
        .or_insert_with(|| Arc::new(Layout::build(vars)))
        .clone()
}

#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    vars: usize,
    order: usize,
    c: Vec<f64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("c", &self.c)
            .finish()
    }
}

impl Jet {
    pub fn constant(vars: usize, order: usize, value: f64) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let layout = layout(vars);
        let mut c = vec![0.0; layout.count[order]];
        c[0] = value;
        Jet {
            layout,
            vars,
            order,
            c,
        }
    }

    /// The coordinate function `x_i` expanded around `value`.
    pub fn variable(vars: usize, order: usize, i: usize, value: f64) -> Jet {
        let mut j = Jet::constant(vars, order, value);
        if order > 0 {
            let mut m = vec![0u8; vars];
            m[i] = 1;
            let k = j.layout.index[&m];
            j.c[k] = 1.0;
        }
        j
    }

    /// Variable jets for every coordinate of `point`.
    pub fn point(point: &[f64], order: usize) -> Vec<Jet> {
        let vars = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(vars, order, i, v))
            .collect()
    }

    /// Jet from Taylor coefficients `d^alpha f / alpha!` in graded order.
    pub fn from_taylor(vars: usize, order: usize, c: Vec<f64>) -> Jet {
        let layout = layout(vars);
        assert_eq!(
            c.len(),
            layout.count[order],
            "wrong number of Taylor coefficients"
        );
        Jet {
            layout,
            vars,
            order,
            c,
        }
    }

    /// Multi-indices of total degree `<= order`, in storage order.
    pub fn monomials(vars: usize, order: usize) -> Vec<Vec<u8>> {
        let layout = layout(vars);
        layout.monos[..layout.count[order]].to_vec()
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn like(&self, value: f64) -> Jet {
        Jet::constant(self.vars, self.order, value)
    }

    /// Partial derivative `d^alpha f` at the expansion point.
    pub fn derivative(&self, alpha: &[u8]) -> f64 {
        let deg: usize = alpha.iter().map(|&e| e as usize).sum();
        if deg > self.order {
            return f64::NAN;
        }
        let k = self.layout.index[alpha];
        let fact: f64 = alpha
            .iter()
            .map(|&e| (1..=e as u32).product::<u32>() as f64)
            .product();
        self.c[k] * fact
    }

    /// The jet of `d f / d x_i`, one order lower.
    pub fn partial(&self, i: usize) -> Jet {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let n = self.layout.count[order];
        let mut c = vec![0.0; n];
        let mut m = vec![0u8; self.vars];
        for (k, slot) in c.iter_mut().enumerate() {
            m.copy_from_slice(&self.layout.monos[k]);
            m[i] += 1;
            let src = self.layout.index[&m];
            *slot = self.c[src] * m[i] as f64;
        }
        Jet {
            layout: self.layout.clone(),
            vars: self.vars,
            order,
            c,
        }
    }

    /// Truncates to a lower order.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            layout: self.layout.clone(),
            vars: self.vars,
            order,
            c: self.c[..self.layout.count[order]].to_vec(),
        }
    }

    fn mul_ref(&self, other: &Jet) -> Jet {
        debug_assert_eq!(self.vars, other.vars);
        let order = self.order.min(other.order);
        let n = self.layout.count[order];
        let mut c = vec![0.0; n];
        for &(a, b, k) in &self.layout.mul[..self.layout.mul_end[order]] {
            c[k as usize] += self.c[a as usize] * other.c[b as usize];
        }
        Jet {
            layout: self.layout.clone(),
            vars: self.vars,
            order,
            c,
        }
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order.min(other.order);
        let n = self.layout.count[order];
        let c = (0..n).map(|k| f(self.c[k], other.c[k])).collect();
        Jet {
            layout: self.layout.clone(),
            vars: self.vars,
            order,
            c,
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Jet {
        Jet {
            c: self.c.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// `g(self)` for a univariate `g` with Taylor coefficients `taylor` at `self.value()`.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut acc = self.like(taylor[self.order]);
        for k in (0..self.order).rev() {
            acc = acc.mul_ref(&h);
            acc.c[0] += taylor[k];
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let t: Vec<f64> = (0..=self.order).map(|k| e / factorial(k)).collect();
        self.compose(&t)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let t: Vec<f64> = (0..=self.order)
            .map(|k| [s, c, -s, -c][k % 4] / factorial(k))
            .collect();
        self.compose(&t)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let t: Vec<f64> = (0..=self.order)
            .map(|k| [c, -s, -c, s][k % 4] / factorial(k))
            .collect();
        self.compose(&t)
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let mut t = vec![a.ln()];
        for k in 1..=self.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            t.push(sign / (k as f64 * a.powi(k as i32)));
        }
        self.compose(&t)
    }

    pub fn powf(&self, p: f64) -> Jet {
        let a = self.value();
        let mut t = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            t.push(a.powf(p - k as f64) * binom);
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&t)
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let t: Vec<f64> = (0..=self.order)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / a.powi(k as i32 + 1))
            .collect();
        self.compose(&t)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = self.like(1.0);
        for _ in 0..n {
            acc = acc.mul_ref(self);
        }
        acc
    }

    pub fn tan(&self) -> Jet {
        self.sin().mul_ref(&self.cos().recip())
    }

    pub fn atan(&self) -> Jet {
        // atan' = 1 / (1 + x^2); expand q(h) = 1 + (a + h)^2 and invert the series
        let a = self.value();
        let n = self.order;
        let q = [1.0 + a * a, 2.0 * a, 1.0];
        let mut r = vec![0.0; n.max(1)];
        r[0] = 1.0 / q[0];
        for k in 1..r.len() {
            let mut s = 0.0;
            for (j, &qj) in q.iter().enumerate().skip(1) {
                if j <= k {
                    s += qj * r[k - j];
                }
            }
            r[k] = -s / q[0];
        }
        let mut t = vec![a.atan()];
        for k in 1..=n {
            t.push(r[k - 1] / k as f64);
        }
        self.compose(&t)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        self.zip(&o, |a, b| a + b)
    }
}
impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self.zip(&o, |a, b| a - b)
    }
}
impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        self.mul_ref(&o)
    }
}
impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self.mul_ref(&o.recip())
    }
}
impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a + b)
    }
}
impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a - b)
    }
}
impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        self.mul_ref(o)
    }
}
impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|v| -v)
    }
}
impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, v: f64) -> Jet {
        self.c[0] += v;
        self
    }
}
impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, v: f64) -> Jet {
        self.c[0] -= v;
        self
    }
}
impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, v: f64) -> Jet {
        self.map(|c| c * v)
    }
}
impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, v: f64) -> Jet {
        self.map(|c| c / v)
    }
}

/// Scalar abstraction so metric formulas can be written once and evaluated
/// either on plain floats or on jets.
pub trait Real:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant of the same kind as `self`.
    fn lift(&self, v: f64) -> Self;
    fn val(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn atan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn recip(&self) -> Self;
}

impl Real for f64 {
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn val(&self) -> f64 {
        *self
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn tan(&self) -> f64 {
        f64::tan(*self)
    }
    fn atan(&self) -> f64 {
        f64::atan(*self)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> f64 {
        f64::powi(*self, n)
    }
    fn powf(&self, p: f64) -> f64 {
        f64::powf(*self, p)
    }
    fn recip(&self) -> f64 {
        f64::recip(*self)
    }
}

impl Real for Jet {
    fn lift(&self, v: f64) -> Jet {
        self.like(v)
    }
    fn val(&self) -> f64 {
        self.value()
    }
    fn sin(&self) -> Jet {
        Jet::sin(self)
    }
    fn cos(&self) -> Jet {
        Jet::cos(self)
    }
    fn tan(&self) -> Jet {
        Jet::tan(self)
    }
    fn atan(&self) -> Jet {
        Jet::atan(self)
    }
    fn exp(&self) -> Jet {
        Jet::exp(self)
    }
    fn ln(&self) -> Jet {
        Jet::ln(self)
    }
    fn sqrt(&self) -> Jet {
        Jet::sqrt(self)
    }
    fn powi(&self, n: i32) -> Jet {
        Jet::powi(self, n)
    }
    fn powf(&self, p: f64) -> Jet {
        Jet::powf(self, p)
    }
    fn recip(&self) -> Jet {
        Jet::recip(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        // f = x^2 y + 3 y^3 at (2, -1)
        let p = Jet::point(&[2.0, -1.0], 3);
        let f = &(&p[0] * &p[0]) * &p[1] + p[1].powi(3) * 3.0;
        assert_eq!(f.value(), -4.0 - 3.0);
        assert_eq!(f.derivative(&[1, 0]), -4.0);
        assert_eq!(f.derivative(&[0, 1]), 4.0 + 9.0);
        assert_eq!(f.derivative(&[1, 1]), 4.0);
        assert_eq!(f.derivative(&[0, 2]), -18.0);
        assert_eq!(f.derivative(&[0, 3]), 18.0);
        assert_eq!(f.derivative(&[2, 1]), 2.0);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x = Jet::variable(1, 6, 0, 0.3);
        let d = |j: &Jet, k: u8| j.derivative(&[k]);
        // d^k exp = exp
        for k in 0..=6 {
            assert!(close(d(&x.exp(), k), 0.3f64.exp(), 1e-13));
        }
        // sin''' = -cos
        assert!(close(d(&x.sin(), 3), -(0.3f64.cos()), 1e-13));
        assert!(close(d(&x.cos(), 2), -(0.3f64.cos()), 1e-13));
        // ln'' = -1/x^2
        assert!(close(d(&x.ln(), 2), -1.0 / 0.09, 1e-12));
        // (1/x)''' = -6/x^4
        assert!(close(d(&x.recip(), 3), -6.0 / 0.3f64.powi(4), 1e-12));
        // sqrt'' = -1/4 x^-3/2
        assert!(close(d(&x.sqrt(), 2), -0.25 * 0.3f64.powf(-1.5), 1e-12));
        // tan' = 1 + tan^2, tan'' = 2 tan (1 + tan^2)
        let t = 0.3f64.tan();
        assert!(close(d(&x.tan(), 1), 1.0 + t * t, 1e-13));
        assert!(close(d(&x.tan(), 2), 2.0 * t * (1.0 + t * t), 1e-12));
        // atan'' = -2x / (1 + x^2)^2
        assert!(close(d(&x.atan(), 2), -0.6 / 1.09f64.powi(2), 1e-12));
        assert!(close(d(&x.atan(), 1), 1.0 / 1.09, 1e-13));
    }

    #[test]
    fn partial_lowers_order_and_commutes() {
        let p = Jet::point(&[0.4, 0.7], 4);
        let f = (p[0].clone() * p[1].clone()).sin() + p[0].exp() * p[1].powi(2);
        let fx_y = f.partial(0).partial(1);
        let fy_x = f.partial(1).partial(0);
        assert_eq!(fx_y.order(), 2);
        for k in 0..fx_y.c.len() {
            assert!((fx_y.c[k] - fy_x.c[k]).abs() < 1e-13);
        }
        assert!((fx_y.value() - f.derivative(&[1, 1])).abs() < 1e-13);
    }

    #[test]
    fn atan_matches_finite_differences_in_two_variables() {
        let g = |x: f64, y: f64| (x * y + 0.2).atan();
        let p = Jet::point(&[0.5, -0.8], 2);
        let f = (p[0].clone() * p[1].clone() + 0.2).atan();
        let h = 1e-4;
        let fd = (g(0.5 + h, -0.8 + h) - g(0.5 + h, -0.8 - h) - g(0.5 - h, -0.8 + h)
            + g(0.5 - h, -0.8 - h))
            / (4.0 * h * h);
        assert!((f.derivative(&[1, 1]) - fd).abs() < 1e-6);
    }
}
