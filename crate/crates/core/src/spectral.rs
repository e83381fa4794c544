//! Algebraic connectivity: the second-smallest Laplacian eigenvalue.
//!
//! [`lambda2`] runs Lanczos on the Laplacian restricted to the complement
//! of the all-ones vector, with full reorthogonalization, so the smallest
//! Ritz value it tracks converges to λ₂ directly. The Laplacian is only
//! ever applied, never stored. [`lambda2_dense`] is an independent Jacobi
//! eigensolver for small graphs, used to cross-check the iterative route.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::graph::PhysicalGraph;
use crate::rng::splitmix64;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Largest graph accepted by [`lambda2_dense`].
pub const DENSE_CAP: usize = 64;

/// Outcome of an iterative λ₂ computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda2: f64,
    /// Laplacian applications performed.
    pub iterations: usize,
    /// `‖Lx − λx‖ / ‖x‖` for the returned Ritz pair.
    pub residual: f64,
    /// The graph has more than one component; `lambda2` is exactly 0.
    pub disconnected: bool,
}

/// `(Lx)_v = deg(v)·x_v − Σ_{u∼v} x_u`.
pub fn laplacian_apply(g: &PhysicalGraph, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != g.num_vertices() {
        return domain(format!(
            "laplacian_apply: vector has length {}, graph has {} vertices",
            x.len(),
            g.num_vertices()
        ));
    }
    let mut out = vec![0.0; x.len()];
    apply_into(g, x, &mut out);
    Ok(out)
}

fn apply_into(g: &PhysicalGraph, x: &[f64], out: &mut [f64]) {
    for (v, o) in out.iter_mut().enumerate() {
        let nbrs = g.neighbors(v);
        let mut acc = nbrs.len() as f64 * x[v];
        for &u in nbrs {
            acc -= x[u];
        }
        *o = acc;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

// Pseudo-random start derived from vertex labels, projected off 1⃗.
fn starting_vector(g: &PhysicalGraph) -> Vec<f64> {
    let mut x: Vec<f64> = g
        .labels()
        .iter()
        .map(|&l| (splitmix64(l as u64) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
        .collect();
    remove_mean(&mut x);
    let nx = norm(&x);
    if nx < 1e-8 {
        // only reachable for tiny graphs with unlucky labels
        x = (0..g.num_vertices()).map(|i| i as f64).collect();
        remove_mean(&mut x);
    }
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    x
}

/// λ₂ of the graph Laplacian with residual at most `tol`.
///
/// Disconnected graphs report `lambda2 = 0` with `disconnected` set. The
/// iteration budget is `50·|V|` Laplacian applications.
pub fn lambda2(g: &PhysicalGraph, tol: f64) -> Result<SpectralReport> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return domain(format!("lambda2: tolerance {tol} outside (0, 1e-2]"));
    }
    let n = g.num_vertices();
    if n < 2 {
        return domain("lambda2 needs at least two vertices");
    }
    if !g.is_connected() {
        return Ok(SpectralReport {
            lambda2: 0.0,
            iterations: 0,
            residual: 0.0,
            disconnected: true,
        });
    }
    let budget = 50 * n;
    let dim = n - 1;
    let mut iterations = 0;
    let mut best_residual = f64::INFINITY;
    let mut start = starting_vector(g);
    let mut w = vec![0.0; n];

    loop {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let j = basis.len() - 1;
            debug_assert!(basis[j].iter().sum::<f64>().abs() < 1e-8 * (n as f64).sqrt());
            apply_into(g, &basis[j], &mut w);
            iterations += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                remove_mean(&mut w);
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
                }
            }
            let b = norm(&w);
            let (_, y) = smallest_tridiagonal_eigenpair(&alpha, &beta);
            let bound = b * y[y.len() - 1].abs();
            let exhausted = basis.len() >= dim || b <= 1e-12 * (1.0 + a.abs());
            if bound <= 0.25 * tol || exhausted || iterations >= budget {
                let mut x = vec![0.0; n];
                for (coef, q) in y.iter().zip(&basis) {
                    x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += coef * qi);
                }
                remove_mean(&mut x);
                let nx = norm(&x);
                x.iter_mut().for_each(|v| *v /= nx);
                apply_into(g, &x, &mut w);
                iterations += 1;
                let rq = dot(&x, &w);
                let residual = w.iter().zip(&x).map(|(lx, xi)| (lx - rq * xi).powi(2)).sum::<f64>().sqrt();
                best_residual = best_residual.min(residual);
                if residual <= tol {
                    return Ok(SpectralReport {
                        lambda2: rq.max(0.0),
                        iterations,
                        residual,
                        disconnected: false,
                    });
                }
                if iterations >= budget {
                    return Err(Error::Solver {
                        iterations,
                        best_residual,
                    });
                }
                start = x;
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
    }
}

// Number of eigenvalues of the symmetric tridiagonal (alpha, beta) below x
// (Sturm sequence count).
fn count_below(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..alpha.len() {
        let off = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] / q };
        q = alpha[i] - x - off;
        if q == 0.0 {
            q = -f64::EPSILON * (1.0 + x.abs());
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

// Smallest eigenvalue by bisection, eigenvector by inverse iteration.
fn smallest_tridiagonal_eigenpair(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    if m == 1 {
        return (alpha[0], vec![1.0]);
    }
    let radius = |i: usize| {
        let left = if i > 0 { beta[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < m { beta[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..m).map(|i| alpha[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..m).map(|i| alpha[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    while hi - lo > 4.0 * f64::EPSILON * scale {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(alpha, beta, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let mut y = vec![1.0; m];
    for _ in 0..3 {
        y = solve_shifted_tridiagonal(alpha, beta, theta, y, scale);
        let ny = norm(&y);
        y.iter_mut().for_each(|v| *v /= ny);
    }
    (theta, y)
}

// Solves (T − shift·I) y = rhs by LU with partial pivoting; exactly zero
// pivots are nudged so inverse iteration can proceed.
fn solve_shifted_tridiagonal(alpha: &[f64], beta: &[f64], shift: f64, mut b: Vec<f64>, scale: f64) -> Vec<f64> {
    let n = alpha.len();
    let tiny = f64::EPSILON * scale;
    let mut d: Vec<f64> = alpha.iter().map(|a| a - shift).collect();
    let mut dl = beta.to_vec();
    let mut du = beta.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n.saturating_sub(1)];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            dl[i] = fact;
            d[i + 1] -= fact * du[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -fact;
            }
            swapped[i] = true;
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    for i in 0..n - 1 {
        if swapped[i] {
            let temp = b[i];
            b[i] = b[i + 1];
            b[i + 1] = temp - dl[i] * b[i];
        } else {
            b[i + 1] -= dl[i] * b[i];
        }
    }
    b[n - 1] /= d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
    b
}

/// λ₂ from a full cyclic-Jacobi eigendecomposition of the dense Laplacian.
pub fn lambda2_dense(g: &PhysicalGraph) -> Result<f64> {
    let n = g.num_vertices();
    if n > DENSE_CAP {
        return Err(Error::Capacity {
            size: n,
            limit: DENSE_CAP,
            hint: "use the iterative lambda2 solver",
        });
    }
    if n < 2 {
        return domain("lambda2_dense needs at least two vertices");
    }
    let mut eig = jacobi_eigenvalues(dense_laplacian(g));
    eig.sort_by(f64::total_cmp);
    Ok(eig[1])
}

/// Dense row-major Laplacian.
pub fn dense_laplacian(g: &PhysicalGraph) -> Vec<Vec<f64>> {
    let n = g.num_vertices();
    let mut l = vec![vec![0.0; n]; n];
    for (v, row) in l.iter_mut().enumerate() {
        row[v] = g.degree(v) as f64;
        for &u in g.neighbors(v) {
            row[u] = -1.0;
        }
    }
    l
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    let total: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total.max(1.0) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (head, tail) = a.split_at_mut(q);
                for (xp, xq) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    let (apk, aqk) = (*xp, *xq);
                    *xp = c * apk - s * aqk;
                    *xq = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: u32, edges: &[(u32, u32)]) -> PhysicalGraph {
        PhysicalGraph::from_edges(0..n, edges.iter().copied()).unwrap()
    }

    fn complete(n: u32) -> PhysicalGraph {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        graph(n, &edges)
    }

    #[test]
    fn laplacian_examples() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(laplacian_apply(&g, &[1.0; 4]).unwrap(), vec![0.0; 4]);
        assert_eq!(
            laplacian_apply(&g, &[1.0, -1.0, 1.0, -1.0]).unwrap(),
            vec![4.0, -4.0, 4.0, -4.0]
        );
        let e = graph(2, &[(0, 1)]);
        assert_eq!(laplacian_apply(&e, &[1.0, -1.0]).unwrap(), vec![2.0, -2.0]);
        assert!(laplacian_apply(&e, &[1.0]).is_err());
    }

    #[test]
    fn closed_forms() {
        let cases = [
            (graph(3, &[(0, 1), (1, 2)]), 1.0),
            (graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]), 2.0),
            (complete(4), 4.0),
            (graph(4, &[(0, 1), (0, 2), (0, 3)]), 1.0),
            (graph(2, &[(0, 1)]), 2.0),
        ];
        for (g, want) in cases {
            let r = lambda2(&g, DEFAULT_TOLERANCE).unwrap();
            assert!((r.lambda2 - want).abs() < 1e-8, "{} vs {want}", r.lambda2);
            assert!(r.residual <= DEFAULT_TOLERANCE);
            assert!(!r.disconnected);
            assert!((lambda2_dense(&g).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn disconnected_reports_zero() {
        let g = graph(4, &[(0, 1), (2, 3)]);
        let r = lambda2(&g, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.lambda2, 0.0);
        assert!(r.disconnected);
        assert!(lambda2_dense(&g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn argument_checks() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        assert!(lambda2(&g, 0.0).is_err());
        assert!(lambda2(&g, 0.5).is_err());
        assert!(lambda2(&graph(1, &[]), 1e-8).is_err());
        assert!(matches!(lambda2_dense(&graph(65, &[])), Err(Error::Capacity { .. })));
    }

    #[test]
    fn long_cycle_matches_closed_form() {
        // C_n: λ₂ = 2 − 2cos(2π/n), doubly degenerate
        for n in [10u32, 50, 200] {
            let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            let g = graph(n, &edges);
            let want = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
            let r = lambda2(&g, 1e-10).unwrap();
            assert!((r.lambda2 - want).abs() < 1e-9, "n={n}: {} vs {want}", r.lambda2);
        }
    }

    #[test]
    fn tridiagonal_eigenpair() {
        // path Laplacian on 3 vertices as a tridiagonal: eigenvalues 0, 1, 3
        let (theta, y) = smallest_tridiagonal_eigenpair(&[1.0, 2.0, 1.0], &[-1.0, -1.0]);
        assert!(theta.abs() < 1e-12);
        let s = 1.0 / 3f64.sqrt();
        for v in y {
            assert!((v.abs() - s).abs() < 1e-9);
        }
    }
}
