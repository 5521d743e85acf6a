//! Scalable two-sided bounds on the truncated pointed GH series.
//!
//! For closed balls `B_X` (basepoint `o`) and `B_Y` (basepoint `o'`), any
//! admissible union metric with `d(o, o') = s` and Hausdorff distance `t`
//! yields the correspondence `R = {(x, y) : d(x, y) <= t}` with
//! `dis(R) <= 2t` and `|d(o, x) - d(o', y)| <= s + t` on `R`. Conversely
//! gluing along a correspondence realises `max(dis(R)/2, max_R |r_X - r_Y|)`.
//!
//! Lower bound: every `x` must be paired with some `y` whose distance row is
//! within `2 d_n` in Hausdorff distance (as subsets of the real line) and
//! whose radius is within `d_n`, and vice versa.
//!
//! Upper bound: greedy anchor-based matching refined by a bottleneck local
//! search, then evaluated through the explicitly glued cross distances.

use serde::{Deserialize, Serialize};

use super::PointedFiniteMetricSpace;
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhBounds {
    pub lower: f64,
    pub upper: f64,
    pub n_max: usize,
    /// Per-term bounds on `min(1, d_n)` for `n = 1..=n_max`.
    pub terms_lower: Vec<f64>,
    pub terms_upper: Vec<f64>,
}

impl GhBounds {
    /// Bound on the omitted tail `sum_{n > n_max} 2^-n min(1, d_n)`.
    pub fn truncation_remainder(&self) -> f64 {
        0.5f64.powi(self.n_max as i32)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchConfig {
    pub max_iters: usize,
    pub anchor_candidates: usize,
    pub bottleneck_entries: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_iters: 300,
            anchor_candidates: 6,
            bottleneck_entries: 4,
        }
    }
}

pub fn gh_bounds(
    x: &PointedFiniteMetricSpace,
    y: &PointedFiniteMetricSpace,
    n_max: usize,
) -> GhBounds {
    gh_bounds_with(x, y, n_max, &SearchConfig::default())
}

pub fn gh_bounds_with(
    x: &PointedFiniteMetricSpace,
    y: &PointedFiniteMetricSpace,
    n_max: usize,
    config: &SearchConfig,
) -> GhBounds {
    gh_bounds_hinted(x, y, n_max, config, &[])
}

/// As [`gh_bounds_with`], additionally seeding the upper-bound search with a
/// known pairing of point indices `(i in x, j in y)`. Pairs are restricted to
/// each ball and completed radially; the result is never worse than without.
pub fn gh_bounds_hinted(
    x: &PointedFiniteMetricSpace,
    y: &PointedFiniteMetricSpace,
    n_max: usize,
    config: &SearchConfig,
    hint: &[(usize, usize)],
) -> GhBounds {
    let n_max = n_max.max(1);
    let (cx, ox) = canonical(x);
    let (cy, oy) = canonical(y);
    // hint in canonical indices
    let pos = |order: &[usize]| {
        let mut inv = vec![0; order.len()];
        for (k, &i) in order.iter().enumerate() {
            inv[i] = k;
        }
        inv
    };
    let (px, py) = (pos(&ox), pos(&oy));
    let hint: Vec<(usize, usize)> = hint
        .iter()
        .filter(|&&(i, j)| i < px.len() && j < py.len())
        .map(|&(i, j)| (px[i], py[j]))
        .collect();
    let mut terms_lower = Vec::with_capacity(n_max);
    let mut terms_upper = Vec::with_capacity(n_max);
    let mut previous: Option<(usize, usize, f64, f64)> = None;
    for n in 1..=n_max {
        let bx = Ball::new(&cx, n as f64);
        let by = Ball::new(&cy, n as f64);
        let (lo, up) = match previous {
            Some((sx, sy, lo, up)) if sx == bx.len() && sy == by.len() => (lo, up),
            _ => {
                let lo = lower_dn(&bx, &by).min(1.0);
                let up = if lo >= 1.0 {
                    1.0
                } else {
                    upper_dn(&bx, &by, config, &hint).min(1.0)
                };
                (lo, up.max(lo))
            }
        };
        previous = Some((bx.len(), by.len(), lo, up));
        terms_lower.push(lo);
        terms_upper.push(up);
    }
    let series = |terms: &[f64]| {
        terms
            .iter()
            .enumerate()
            .map(|(k, v)| 0.5f64.powi(k as i32 + 1) * v)
            .sum::<f64>()
    };
    GhBounds {
        lower: series(&terms_lower),
        upper: series(&terms_upper),
        n_max,
        terms_lower,
        terms_upper,
    }
}

/// Reorders points by (radius, eccentricity, row sum) so results do not
/// depend on input labelling.
fn canonical(s: &PointedFiniteMetricSpace) -> (PointedFiniteMetricSpace, Vec<usize>) {
    let n = s.len();
    let key = |i: usize| {
        let row = s.row(i);
        (
            s.radius_of(i),
            row.iter().copied().fold(0.0, f64::max),
            row.iter().sum::<f64>(),
        )
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(a.cmp(&b))
    });
    let base = order
        .iter()
        .position(|&i| i == s.basepoint())
        .expect("basepoint present");
    (s.restrict(&order, base), order)
}

struct Ball {
    n: usize,
    /// Position in the ball of each point of the parent space.
    slot: Vec<Option<usize>>,
    d: Vec<f64>,
    r: Vec<f64>,
    base: usize,
    sorted_rows: Vec<Vec<f64>>,
}

impl Ball {
    fn new(s: &PointedFiniteMetricSpace, radius: f64) -> Self {
        let idx = s.ball_indices(radius);
        let n = idx.len();
        let mut d = Vec::with_capacity(n * n);
        for &i in &idx {
            for &j in &idx {
                d.push(s.d(i, j));
            }
        }
        let base = idx
            .iter()
            .position(|&i| i == s.basepoint())
            .expect("basepoint in ball");
        let r = (0..n).map(|i| d[base * n + i]).collect();
        let sorted_rows = (0..n)
            .map(|i| {
                let mut row = d[i * n..(i + 1) * n].to_vec();
                row.sort_by(f64::total_cmp);
                row
            })
            .collect();
        let mut slot = vec![None; s.len()];
        for (k, &i) in idx.iter().enumerate() {
            slot[i] = Some(k);
        }
        Ball {
            n,
            slot,
            d,
            r,
            base,
            sorted_rows,
        }
    }

    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn d(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Directed Hausdorff distance between two sorted lists of reals.
fn directed_sorted(a: &[f64], b: &[f64]) -> f64 {
    let mut k = 0;
    let mut worst: f64 = 0.0;
    for &v in a {
        while k + 1 < b.len() && b[k + 1] <= v {
            k += 1;
        }
        let mut best = (v - b[k]).abs();
        if k + 1 < b.len() {
            best = best.min((b[k + 1] - v).abs());
        }
        worst = worst.max(best);
    }
    worst
}

fn hausdorff_sorted(a: &[f64], b: &[f64]) -> f64 {
    directed_sorted(a, b).max(directed_sorted(b, a))
}

fn lower_one_side(x: &Ball, y: &Ball) -> f64 {
    let per_point = par::map_range(x.len(), |i| {
        let mut best = f64::INFINITY;
        for j in 0..y.len() {
            let radial = (x.r[i] - y.r[j]).abs();
            if radial >= best {
                continue;
            }
            let v = radial.max(0.5 * hausdorff_sorted(&x.sorted_rows[i], &y.sorted_rows[j]));
            best = best.min(v);
        }
        best
    });
    per_point.into_iter().fold(0.0, f64::max)
}

fn lower_dn(x: &Ball, y: &Ball) -> f64 {
    lower_one_side(x, y).max(lower_one_side(y, x))
}

fn upper_dn(x: &Ball, y: &Ball, config: &SearchConfig, hint: &[(usize, usize)]) -> f64 {
    let seed: Vec<(usize, usize)> = hint
        .iter()
        .filter_map(|&(i, j)| Some((x.slot[i]?, y.slot[j]?)))
        .collect();
    let flipped_seed: Vec<(usize, usize)> = seed.iter().map(|&(i, j)| (j, i)).collect();
    let a = Matching::search(x, y, config, &seed);
    let b = Matching::search(y, x, config, &flipped_seed);
    let (best, flipped) = if b.cost < a.cost {
        (b, true)
    } else {
        (a, false)
    };
    let rel: Vec<(usize, usize)> = if flipped {
        best.entries.iter().map(|&(p, q)| (q, p)).collect()
    } else {
        best.entries
    };
    glued_value(x, y, &rel)
}

/// Objective `d(o, o') + d_H` of the union metric glued along `rel`.
fn glued_value(x: &Ball, y: &Ball, rel: &[(usize, usize)]) -> f64 {
    let mut distortion: f64 = 0.0;
    let mut radial: f64 = 0.0;
    for &(i, j) in rel {
        radial = radial.max((x.r[i] - y.r[j]).abs());
    }
    let rows = par::map_slice(rel, |&(i, j)| {
        rel.iter()
            .map(|&(p, q)| (x.d(i, p) - y.d(j, q)).abs())
            .fold(0.0, f64::max)
    });
    for v in rows {
        distortion = distortion.max(v);
    }
    let t = 0.5 * distortion;
    let s = (radial - t).max(0.0);
    let cross = par::map_range(x.len(), |i| {
        (0..y.len())
            .map(|j| {
                let via_base = x.r[i] + s + y.r[j];
                rel.iter()
                    .map(|&(p, q)| x.d(i, p) + t + y.d(q, j))
                    .fold(via_base, f64::min)
            })
            .collect::<Vec<f64>>()
    });
    let from_x = cross
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min));
    let mut h: f64 = from_x.fold(0.0, f64::max);
    for j in 0..y.len() {
        let m = cross.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min);
        h = h.max(m);
    }
    cross[x.base][y.base] + h
}

/// A correspondence stored as `x -> f(x)` entries followed by `g(y) -> y`.
struct Matching<'a> {
    x: &'a Ball,
    y: &'a Ball,
    entries: Vec<(usize, usize)>,
    /// Largest pair value `|dX - dY| / 2` per entry, plus its runner-up.
    top: Vec<[(f64, usize); 2]>,
    cost: f64,
}

impl<'a> Matching<'a> {
    fn search(
        x: &'a Ball,
        y: &'a Ball,
        config: &SearchConfig,
        seed: &[(usize, usize)],
    ) -> Matching<'a> {
        let mut inits = initial_matchings(x, y, config);
        if !seed.is_empty() {
            inits.push(complete_seed(x, y, seed));
        }
        let mut best: Option<Matching<'a>> = None;
        for entries in inits {
            let mut m = Matching::new(x, y, entries);
            m.local_search(config);
            if best.as_ref().is_none_or(|b| m.cost < b.cost) {
                best = Some(m);
            }
        }
        best.expect("at least one initial matching")
    }

    fn new(x: &'a Ball, y: &'a Ball, entries: Vec<(usize, usize)>) -> Self {
        let mut m = Matching {
            x,
            y,
            entries,
            top: Vec::new(),
            cost: 0.0,
        };
        m.refresh();
        m
    }

    #[inline]
    fn pair_value(&self, e: (usize, usize), f: (usize, usize)) -> f64 {
        0.5 * (self.x.d(e.0, f.0) - self.y.d(e.1, f.1)).abs()
    }

    #[inline]
    fn radial(&self, e: (usize, usize)) -> f64 {
        (self.x.r[e.0] - self.y.r[e.1]).abs()
    }

    fn refresh(&mut self) {
        let entries = &self.entries;
        let top = par::map_range(entries.len(), |k| {
            let mut t = [(0.0, usize::MAX), (0.0, usize::MAX)];
            for (l, &f) in entries.iter().enumerate() {
                if l == k {
                    continue;
                }
                let v = self.pair_value(entries[k], f);
                if v > t[0].0 {
                    t[1] = t[0];
                    t[0] = (v, l);
                } else if v > t[1].0 {
                    t[1] = (v, l);
                }
            }
            t
        });
        self.top = top;
        self.cost = self.scores().into_iter().fold(0.0, f64::max);
    }

    fn scores(&self) -> Vec<f64> {
        self.entries
            .iter()
            .zip(&self.top)
            .map(|(&e, t)| self.radial(e).max(t[0].0))
            .collect()
    }

    /// Row maximum of entry `l` once entry `k` is removed.
    #[inline]
    fn excluding(&self, l: usize, k: usize) -> f64 {
        let t = &self.top[l];
        if t[0].1 == k {
            t[1].0
        } else {
            t[0].0
        }
    }

    /// (cost, total score) after replacing entry `k` by `cand`.
    fn evaluate_move(&self, k: usize, cand: (usize, usize)) -> (f64, f64) {
        let mut row_k: f64 = 0.0;
        let mut cost: f64 = 0.0;
        let mut total = 0.0;
        for (l, &f) in self.entries.iter().enumerate() {
            if l == k {
                continue;
            }
            let v = self.pair_value(cand, f);
            row_k = row_k.max(v);
            let s = self.radial(f).max(self.excluding(l, k)).max(v);
            cost = cost.max(s);
            total += s;
        }
        let sk = self.radial(cand).max(row_k);
        (cost.max(sk), total + sk)
    }

    fn local_search(&mut self, config: &SearchConfig) {
        let nx = self.x.len();
        for _ in 0..config.max_iters {
            let scores = self.scores();
            let current_total: f64 = scores.iter().sum();
            let mut order: Vec<usize> = (0..self.entries.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            let mut best: Option<(f64, f64, usize, (usize, usize))> = None;
            for &k in order.iter().take(config.bottleneck_entries) {
                let e = self.entries[k];
                let alternatives = if k < nx { self.y.len() } else { nx };
                let evals = par::map_range(alternatives, |c| {
                    let cand = if k < nx { (e.0, c) } else { (c, e.1) };
                    if cand == e {
                        return None;
                    }
                    let (cost, total) = self.evaluate_move(k, cand);
                    Some((cost, total, cand))
                });
                for (cost, total, cand) in evals.into_iter().flatten() {
                    let better = match best {
                        None => true,
                        Some((bc, bt, _, _)) => {
                            cost < bc - 1e-12 || (cost <= bc + 1e-12 && total < bt - 1e-12)
                        }
                    };
                    if better {
                        best = Some((cost, total, k, cand));
                    }
                }
            }
            match best {
                Some((cost, total, k, cand))
                    if cost < self.cost - 1e-12
                        || (cost <= self.cost + 1e-12 && total < current_total - 1e-9) =>
                {
                    self.entries[k] = cand;
                    self.refresh();
                }
                _ => break,
            }
        }
    }
}

fn initial_matchings(x: &Ball, y: &Ball, config: &SearchConfig) -> Vec<Vec<(usize, usize)>> {
    let mut inits = Vec::new();
    // purely radial matching
    inits.push(match_by(x, y, |i, j| (x.r[i] - y.r[j]).abs()));
    if x.len() < 3 || y.len() < 3 {
        return inits;
    }
    let argmax = |n: usize, f: &dyn Fn(usize) -> f64| {
        (0..n).fold(0, |best, i| if f(i) > f(best) { i } else { best })
    };
    let a1 = argmax(x.len(), &|i| x.r[i]);
    let a2 = argmax(x.len(), &|i| x.r[i].min(x.d(i, a1)));
    let ranked = |score: &dyn Fn(usize) -> f64, take: usize| {
        let mut js: Vec<usize> = (0..y.len()).collect();
        js.sort_by(|&p, &q| score(p).total_cmp(&score(q)).then(p.cmp(&q)));
        js.truncate(take);
        js
    };
    let mut candidates = Vec::new();
    for b1 in ranked(&|j| (y.r[j] - x.r[a1]).abs(), config.anchor_candidates) {
        let score2 = |j: usize| (y.r[j] - x.r[a2]).abs() + (y.d(j, b1) - x.d(a2, a1)).abs();
        for b2 in ranked(&score2, 2) {
            candidates.push((b1, b2));
        }
    }
    let built = par::map_slice(&candidates, |&(b1, b2)| {
        let entries = match_by(x, y, |i, j| {
            (x.r[i] - y.r[j]).abs()
                + (x.d(i, a1) - y.d(j, b1)).abs()
                + (x.d(i, a2) - y.d(j, b2)).abs()
        });
        let cost = Matching::new(x, y, entries.clone()).cost;
        (cost, entries)
    });
    let mut built: Vec<(f64, Vec<(usize, usize)>)> = built;
    built.sort_by(|a, b| a.0.total_cmp(&b.0));
    inits.extend(built.into_iter().take(2).map(|(_, e)| e));
    inits
}

/// Seed pairs first, then radial partners for points the seed misses, laid
/// out as `x -> f(x)` followed by `g(y) -> y`.
fn complete_seed(x: &Ball, y: &Ball, seed: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut fx: Vec<Option<usize>> = vec![None; x.len()];
    let mut gy: Vec<Option<usize>> = vec![None; y.len()];
    for &(i, j) in seed {
        fx[i].get_or_insert(j);
        gy[j].get_or_insert(i);
    }
    let radial = match_by(x, y, |i, j| (x.r[i] - y.r[j]).abs());
    let mut entries = Vec::with_capacity(x.len() + y.len());
    for i in 0..x.len() {
        entries.push((i, fx[i].unwrap_or(radial[i].1)));
    }
    for j in 0..y.len() {
        entries.push((gy[j].unwrap_or(radial[x.len() + j].0), j));
    }
    entries
}

/// Each side picks its cheapest partner; lowest index wins ties.
fn match_by(x: &Ball, y: &Ball, cost: impl Fn(usize, usize) -> f64 + Sync) -> Vec<(usize, usize)> {
    let mut entries = Vec::with_capacity(x.len() + y.len());
    for i in 0..x.len() {
        let j = (0..y.len()).fold(0, |b, j| if cost(i, j) < cost(i, b) { j } else { b });
        entries.push((i, j));
    }
    for j in 0..y.len() {
        let i = (0..x.len()).fold(0, |b, i| if cost(i, j) < cost(b, j) { i } else { b });
        entries.push((i, j));
    }
    entries
}
