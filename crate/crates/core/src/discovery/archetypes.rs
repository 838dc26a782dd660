//! Archetypal analysis by alternating simplex-constrained least squares.
//!
//! Points `X` (n×3) are approximated by `A·Z` where the archetypes
//! `Z = B·X` (k×3) and both `A` (n×k) and `B` (k×n) are row-stochastic.
//! Both half-steps are away-step Frank-Wolfe solves with exact line search
//! and only accept non-increasing residuals, so the outer RSS trace is
//! monotone.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once the relative RSS improvement of an outer iteration drops below this.
    pub tol: f64,
    pub inner_iters: usize,
}

impl Default for ArchetypeConfig {
    fn default() -> Self {
        ArchetypeConfig {
            k: 8,
            max_iters: 200,
            tol: 1e-6,
            inner_iters: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchetypeSet {
    pub archetypes: Vec<Point>,
    /// n×k data-to-archetype weights.
    pub alpha: Vec<Vec<f64>>,
    /// k×n archetype-to-data weights.
    pub beta: Vec<Vec<f64>>,
    pub rss: f64,
    /// RSS after initialisation followed by one entry per outer iteration.
    pub rss_trace: Vec<f64>,
    pub converged: bool,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn combine(w: &[f64], pts: &[Point]) -> Point {
    let mut out = [0.0; 3];
    for (wi, p) in w.iter().zip(pts) {
        if *wi != 0.0 {
            for d in 0..3 {
                out[d] += wi * p[d];
            }
        }
    }
    out
}

fn row_rss(x: Point, a: &[f64], z: &[Point]) -> f64 {
    let r = sub(x, combine(a, z));
    dot(r, r)
}

fn total_rss(x: &[Point], alpha: &[Vec<f64>], z: &[Point]) -> f64 {
    x.iter().zip(alpha).map(|(xi, a)| row_rss(*xi, a, z)).sum()
}

fn gram_cols(rows: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; k]; k];
    for r in rows {
        for i in 0..k {
            if r[i] != 0.0 {
                for j in 0..k {
                    g[i][j] += r[i] * r[j];
                }
            }
        }
    }
    g
}

/// Greedy selection of mutually distant points, starting from the point
/// furthest from the centroid.
fn furthest_sum(x: &[Point], k: usize) -> Vec<usize> {
    let dist = |a: Point, b: Point| {
        let d = sub(a, b);
        dot(d, d).sqrt()
    };
    let first = (0..x.len())
        .fold((0, -1.0), |(bi, bd), i| {
            let d = dist(x[i], [0.0; 3]);
            if d > bd { (i, d) } else { (bi, bd) }
        })
        .0;
    let mut chosen = vec![first];
    let mut score: Vec<f64> = x.iter().map(|p| dist(*p, x[first])).collect();
    while chosen.len() < k {
        let next = (0..x.len())
            .filter(|i| !chosen.contains(i))
            .fold((usize::MAX, -1.0), |(bi, bd), i| if score[i] > bd { (i, score[i]) } else { (bi, bd) })
            .0;
        chosen.push(next);
        for (s, p) in score.iter_mut().zip(x) {
            *s += dist(*p, x[next]);
        }
    }
    chosen
}

/// Solves each row of `alpha` over the simplex by Frank-Wolfe with away
/// steps and exact line search; a row is kept only if its residual shrank.
fn alpha_step(x: &[Point], alpha: &mut [Vec<f64>], z: &[Point], inner: usize, tol: f64) {
    let k = z.len();
    let mut a = vec![0.0; k];
    for (xi, row) in x.iter().zip(alpha.iter_mut()) {
        let f0 = row_rss(*xi, row, z);
        if f0 == 0.0 {
            continue;
        }
        a.copy_from_slice(row);
        let mut fit = combine(&a, z);
        for _ in 0..inner {
            let r = sub(*xi, fit);
            let rr = dot(r, r);
            // moving the fit towards z_j changes the residual at rate -2 r·(z_j - fit)
            let (mut fw, mut fw_val) = (0, f64::INFINITY);
            let (mut away, mut away_val) = (usize::MAX, f64::NEG_INFINITY);
            for j in 0..k {
                let v = -dot(r, z[j]);
                if v < fw_val {
                    (fw, fw_val) = (j, v);
                }
                if a[j] > 0.0 && v > away_val {
                    (away, away_val) = (j, v);
                }
            }
            let base = -dot(r, fit);
            let toward = fw_val - base;
            let from = base - away_val;
            let (dir, gamma_max, is_away) = if toward <= from {
                (sub(z[fw], fit), 1.0, false)
            } else if a[away] < 1.0 {
                (sub(fit, z[away]), a[away] / (1.0 - a[away]), true)
            } else {
                break;
            };
            let (slope, curv) = (-dot(r, dir), dot(dir, dir));
            if slope >= 0.0 || curv <= 0.0 {
                break;
            }
            let gamma = (-slope / curv).min(gamma_max);
            if is_away {
                a.iter_mut().for_each(|w| *w *= 1.0 + gamma);
                a[away] = (a[away] - gamma).max(0.0);
            } else {
                a.iter_mut().for_each(|w| *w *= 1.0 - gamma);
                a[fw] += gamma;
            }
            for d in 0..3 {
                fit[d] += gamma * dir[d];
            }
            let gain = gamma * (-slope) - gamma * gamma * curv / 2.0;
            if gain <= tol * rr {
                break;
            }
        }
        let s: f64 = a.iter().sum();
        a.iter_mut().for_each(|w| *w /= s);
        if row_rss(*xi, &a, z) <= f0 {
            row.copy_from_slice(&a);
        }
    }
}

/// Minimises the residual over archetypes `z_j ∈ conv(X)` by block-wise
/// Frank-Wolfe with away steps and exact line search; `beta` holds the
/// convex weights of each archetype.
fn beta_step(x: &[Point], alpha: &[Vec<f64>], beta: &mut [Vec<f64>], inner: usize, tol: f64) {
    let k = beta.len();
    let start_beta = beta.to_vec();
    let start_z: Vec<Point> = beta.iter().map(|b| combine(b, x)).collect();
    let start = total_rss(x, alpha, &start_z);
    // F(Z) = const - 2 tr(ZᵀP) + tr(ZᵀMZ) with M = AᵀA, P = AᵀX
    let m = gram_cols(alpha, k);
    let mut p = vec![[0.0; 3]; k];
    for (xi, a) in x.iter().zip(alpha) {
        for j in 0..k {
            for d in 0..3 {
                p[j][d] += a[j] * xi[d];
            }
        }
    }
    let mut z = start_z;
    for _ in 0..inner {
        let mut gain = 0.0;
        for j in 0..k {
            if m[j][j] <= 0.0 {
                continue;
            }
            let g: Point = std::array::from_fn(|d| {
                2.0 * ((0..k).map(|l| m[j][l] * z[l][d]).sum::<f64>() - p[j][d])
            });
            let gz = dot(g, z[j]);
            let (mut fw, mut fw_val) = (0, f64::INFINITY);
            let (mut away, mut away_val) = (usize::MAX, f64::NEG_INFINITY);
            for (l, xl) in x.iter().enumerate() {
                let v = dot(g, *xl);
                if v < fw_val {
                    (fw, fw_val) = (l, v);
                }
                if beta[j][l] > 0.0 && v > away_val {
                    (away, away_val) = (l, v);
                }
            }
            // directional derivatives of the toward and away moves
            let toward = fw_val - gz;
            let from = gz - away_val;
            let (dir, slope, gamma_max, is_away) = if toward <= from {
                (sub(x[fw], z[j]), toward, 1.0, false)
            } else {
                let w = beta[j][away];
                if w >= 1.0 {
                    continue;
                }
                (sub(z[j], x[away]), from, w / (1.0 - w), true)
            };
            let curv = m[j][j] * dot(dir, dir);
            if slope >= 0.0 || curv <= 0.0 {
                continue;
            }
            let gamma = (-slope / (2.0 * curv)).min(gamma_max);
            if gamma <= 0.0 {
                continue;
            }
            gain += -(gamma * slope + gamma * gamma * curv);
            let b = &mut beta[j];
            if is_away {
                b.iter_mut().for_each(|w| *w *= 1.0 + gamma);
                b[away] = (b[away] - gamma).max(0.0);
            } else {
                b.iter_mut().for_each(|w| *w *= 1.0 - gamma);
                b[fw] += gamma;
            }
            for d in 0..3 {
                z[j][d] += gamma * dir[d];
            }
        }
        if gain <= tol * start {
            break;
        }
    }
    for b in beta.iter_mut() {
        let s: f64 = b.iter().sum();
        b.iter_mut().for_each(|w| *w /= s);
    }
    let z: Vec<Point> = beta.iter().map(|b| combine(b, x)).collect();
    if total_rss(x, alpha, &z) > start {
        beta.clone_from_slice(&start_beta);
    }
}

pub fn archetypal_analysis(points: &[Point], config: &ArchetypeConfig) -> Result<ArchetypeSet> {
    let n = points.len();
    let k = config.k;
    if k == 0 || k > n {
        return Err(Error::Domain(format!("archetype count k = {k} must be in 1..={n}")));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("archetypal analysis input".into()));
    }
    if points.iter().all(|p| *p == points[0]) {
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        return Ok(ArchetypeSet {
            archetypes: vec![points[0]],
            alpha: vec![vec![1.0]; n],
            beta: vec![b],
            rss: 0.0,
            rss_trace: vec![0.0],
            converged: true,
        });
    }
    // the residual is translation invariant for stochastic A and B
    let mean: Point = std::array::from_fn(|d| points.iter().map(|p| p[d]).sum::<f64>() / n as f64);
    let x: Vec<Point> = points.iter().map(|p| sub(*p, mean)).collect();

    let mut beta: Vec<Vec<f64>> = furthest_sum(&x, k)
        .into_iter()
        .map(|i| {
            let mut b = vec![0.0; n];
            b[i] = 1.0;
            b
        })
        .collect();
    let z0: Vec<Point> = beta.iter().map(|b| combine(b, &x)).collect();
    let mut alpha: Vec<Vec<f64>> = x
        .iter()
        .map(|p| {
            let nearest = (0..k)
                .map(|j| dot(sub(*p, z0[j]), sub(*p, z0[j])))
                .enumerate()
                .fold((0, f64::INFINITY), |(bi, bd), (j, d)| if d < bd { (j, d) } else { (bi, bd) })
                .0;
            let mut a = vec![0.0; k];
            a[nearest] = 1.0;
            a
        })
        .collect();

    let mut rss = total_rss(&x, &alpha, &z0);
    let mut trace = vec![rss];
    let mut converged = rss == 0.0;
    for _ in 0..config.max_iters {
        if converged {
            break;
        }
        let z: Vec<Point> = beta.iter().map(|b| combine(b, &x)).collect();
        alpha_step(&x, &mut alpha, &z, config.inner_iters, config.tol * 1e-3);
        beta_step(&x, &alpha, &mut beta, config.inner_iters, config.tol * 1e-3);
        let z: Vec<Point> = beta.iter().map(|b| combine(b, &x)).collect();
        let next = total_rss(&x, &alpha, &z);
        trace.push(next);
        converged = next == 0.0 || rss - next <= config.tol * rss;
        rss = next;
    }
    let archetypes = beta
        .iter()
        .map(|b| {
            let c = combine(b, &x);
            [c[0] + mean[0], c[1] + mean[1], c[2] + mean[2]]
        })
        .collect();
    Ok(ArchetypeSet {
        archetypes,
        alpha,
        beta,
        rss,
        rss_trace: trace,
        converged,
    })
}

/// Index of the point nearest to each archetype; ties go to the lower index.
pub fn nearest_indices(points: &[Point], archetypes: &[Point]) -> Vec<usize> {
    archetypes
        .iter()
        .map(|a| {
            let mut best = (0, f64::INFINITY);
            for (i, p) in points.iter().enumerate() {
                let d = sub(*p, *a);
                let d = dot(d, d);
                if d < best.1 {
                    best = (i, d);
                }
            }
            best.0
        })
        .collect()
}

/// Triangular faces of the convex hull of a small point set, by brute force
/// over all triples. Degenerate (coplanar or collinear) inputs yield no faces.
pub fn hull_faces(pts: &[Point]) -> Vec<[usize; 3]> {
    let n = pts.len();
    let scale = pts
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let eps = 1e-12 * scale * scale * scale;
    let mut faces = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for l in j + 1..n {
                let (u, v) = (sub(pts[j], pts[i]), sub(pts[l], pts[i]));
                let normal = [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                if dot(normal, normal).sqrt() <= eps {
                    continue;
                }
                let side: Vec<f64> = (0..n)
                    .filter(|m| ![i, j, l].contains(m))
                    .map(|m| dot(normal, sub(pts[m], pts[i])))
                    .collect();
                let above = side.iter().any(|s| *s > eps);
                let below = side.iter().any(|s| *s < -eps);
                if above != below {
                    faces.push([i, j, l]);
                }
            }
        }
    }
    faces
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = crate::rng::seeded(seed);
        (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
    }

    fn assert_simplex(w: &[f64]) {
        assert!(w.iter().all(|x| *x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn invariants_hold_on_random_sets(n in 3usize..40, k in 1usize..6, seed in any::<u64>()) {
            let pts = random_points(n, seed);
            let k = k.min(n);
            let set = archetypal_analysis(&pts, &ArchetypeConfig { k, max_iters: 30, ..Default::default() }).unwrap();
            prop_assert!(set.rss_trace.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(set.alpha.len(), n);
            set.alpha.iter().for_each(|a| assert_simplex(a));
            set.beta.iter().for_each(|b| assert_simplex(b));
            for (z, b) in set.archetypes.iter().zip(&set.beta) {
                let direct = combine(b, &pts);
                for d in 0..3 {
                    prop_assert!((z[d] - direct[d]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn k_one_is_centroid() {
        let pts = random_points(40, 3);
        let set = archetypal_analysis(&pts, &ArchetypeConfig { k: 1, tol: 0.0, max_iters: 300, ..Default::default() }).unwrap();
        let c: Point = std::array::from_fn(|d| pts.iter().map(|p| p[d]).sum::<f64>() / 40.0);
        for d in 0..3 {
            assert!((set.archetypes[0][d] - c[d]).abs() < 1e-6, "{:?} vs {c:?}", set.archetypes[0]);
        }
    }

    #[test]
    fn k_equals_n_has_zero_rss() {
        let pts = random_points(6, 9);
        let set = archetypal_analysis(&pts, &ArchetypeConfig { k: 6, ..Default::default() }).unwrap();
        assert!(set.rss < 1e-20, "{}", set.rss);
    }

    #[test]
    fn rss_monotone_and_weights_stochastic() {
        for seed in 0..5 {
            let pts = random_points(50, seed);
            let set = archetypal_analysis(&pts, &ArchetypeConfig { k: 4, ..Default::default() }).unwrap();
            assert!(set.rss_trace.windows(2).all(|w| w[1] <= w[0]));
            assert!(set.rss_trace.len() >= 2);
            set.alpha.iter().for_each(|a| assert_simplex(a));
            set.beta.iter().for_each(|b| assert_simplex(b));
            assert_eq!(set.archetypes.len(), 4);
        }
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let pts = vec![[1.0, 2.0, 3.0]; 5];
        let set = archetypal_analysis(&pts, &ArchetypeConfig { k: 3, ..Default::default() }).unwrap();
        assert_eq!(set.archetypes, vec![[1.0, 2.0, 3.0]]);
        assert!(archetypal_analysis(&pts, &ArchetypeConfig { k: 6, ..Default::default() }).is_err());
        assert!(archetypal_analysis(&pts, &ArchetypeConfig { k: 0, ..Default::default() }).is_err());
        assert!(archetypal_analysis(&[[f64::NAN, 0.0, 0.0]], &ArchetypeConfig { k: 1, ..Default::default() }).is_err());
    }

    #[test]
    fn nearest_prefers_exact_match_then_lower_index() {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        assert_eq!(nearest_indices(&pts, &[[1.0, 0.0, 0.0], [0.5, 0.0, 0.0]]), vec![1, 0]);
        assert_eq!(nearest_indices(&pts[..1], &[[5.0; 3], [-5.0; 3]]), vec![0, 0]);
    }

    #[test]
    fn tetrahedron_faces() {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.1, 0.1, 0.1]];
        let faces = hull_faces(&pts);
        assert_eq!(faces.len(), 4);
        assert!(faces.iter().all(|f| !f.contains(&4)));
    }
}
