//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use marlot::fuzzer::{FuzzerConfig, PatternKind};
use marlot::marl::Mlp;
use marlot::sim::{Maneuver, Vec2};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use Maneuver::{Accelerate as A, Brake as B, Decelerate as D, LeftLaneChange as L, RightLaneChange as R};

pub fn cross(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain, counter-clockwise.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut hull: Vec<Vec2> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Even-odd ray casting towards +x.
pub fn ray_cast_inside(poly: &[Vec2], p: Vec2) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn oracle_enclosed(agents: &[Vec2], evader: Vec2) -> bool {
    let hull = convex_hull(agents);
    hull.len() >= 3 && ray_cast_inside(&hull, evader)
}

/// Partition cells written out as independent predicates.
pub fn cells(v: Vec2) -> [(Maneuver, bool); 5] {
    let straight = v.x.abs() <= 0.01;
    [
        (L, v.x < -0.01),
        (R, v.x > 0.01),
        (A, straight && v.y > 0.02),
        (D, straight && (0.0..=0.02).contains(&v.y)),
        (B, straight && v.y < 0.0),
    ]
}

pub fn runs(seq: &[Maneuver]) -> Vec<(Maneuver, usize)> {
    let mut out: Vec<(Maneuver, usize)> = Vec::new();
    for &m in seq {
        match out.last_mut() {
            Some((last, n)) if *last == m => *n += 1,
            _ => out.push((m, 1)),
        }
    }
    out
}

/// Acceptor of the pattern automata. `forced` sequences were cut at the
/// horizon and must be a prefix of an accepted word.
pub fn accepts(kind: PatternKind, seq: &[Maneuver], forced: bool, cut_in: Option<Maneuver>, cfg: &FuzzerConfig) -> bool {
    let (k_dec, k_brk, lc) = (cfg.k_dec, cfg.k_brk, cfg.lane_change_steps);
    let all = |s: &[Maneuver], m: Maneuver| s.iter().all(|&x| x == m);
    match kind {
        PatternKind::Ahead => {
            let r = runs(seq);
            !forced
                && (r == [(D, k_dec)] || r == [(B, k_brk)] || r == [(L, lc), (R, lc)] || r == [(R, lc), (L, lc)])
        }
        PatternKind::SideFront => {
            let Some(first) = cut_in else {
                return false;
            };
            if forced || seq.len() < lc || !all(&seq[..lc], first) {
                return false;
            }
            let rest = &seq[lc..];
            (rest.len() == k_dec && all(rest, D))
                || (rest.len() == k_brk && all(rest, B))
                || (rest.len() == lc && (all(rest, L) || all(rest, R)))
        }
        PatternKind::Behind => {
            // A* X^lc A*, X a lane change
            let start = seq.iter().position(|&m| m != A).unwrap_or(seq.len());
            let tail = &seq[start..];
            if tail.is_empty() {
                return forced;
            }
            let x = tail[0];
            if x != L && x != R {
                return false;
            }
            let width = tail.iter().take_while(|&&m| m == x).count();
            if width < lc {
                return forced && width == tail.len();
            }
            width == lc && all(&tail[lc..], A)
        }
        PatternKind::SideBehind => all(seq, A),
    }
}

/// Mean squared error of a scalar-output net and its analytic gradient.
pub fn mse_and_grad(net: &Mlp, x: &Array2<f64>, y: &Array2<f64>) -> (f64, Vec<f64>) {
    let (out, cache) = net.forward_cached(x.view());
    let err = &out - y;
    let b = x.nrows() as f64;
    let loss = err.mapv(|e| e * e).sum() / b;
    let (g, _) = net.backward(&cache, &(err * (2.0 / b)));
    (loss, g.flatten())
}

pub fn mse(net: &Mlp, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let out = net.forward(x.view());
    (&out - y).mapv(|e| e * e).sum() / x.nrows() as f64
}

pub fn check_gradients(sizes: &[usize], rng: &mut ChaCha8Rng) -> f64 {
    let net = Mlp::new(sizes, rng);
    let batch = 6;
    let x = Array2::from_shape_fn((batch, sizes[0]), |_| rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_fn((batch, *sizes.last().unwrap()), |_| rng.random_range(-1.0..1.0));
    let (_, analytic) = mse_and_grad(&net, &x, &y);
    let base = net.params();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let mut plus = net.clone();
        let mut minus = net.clone();
        let mut p = base.clone();
        p[k] += h;
        plus.set_params(&p);
        p[k] -= 2.0 * h;
        minus.set_params(&p);
        let numeric = (mse(&plus, &x, &y) - mse(&minus, &x, &y)) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
