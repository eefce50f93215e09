//! Quasi-Newton minimization.
//!
//! The objective returns `None` outside its domain; the line search treats
//! that as an infinitely high value and backs off.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with an inverse-Hessian update and backtracking Armijo line search.
/// Convergence is declared when an accepted step improves the objective by
/// less than `tol` relative to its magnitude, or when no descent is
/// possible from a freshly reset search direction.
pub(crate) fn bfgs<F>(mut objective: F, x0: Vec<f64>, max_iter: usize, tol: f64) -> Option<Outcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let (mut f, mut g) = objective(&x0)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut x = x0;
    if n == 0 {
        return Some(Outcome { x, f, iterations: 0, converged: true });
    }
    let mut h = identity(n, 1.0 / sqrt(dot(&g, &g)).max(1.0));
    let mut fresh = true;
    let mut first_update = true;
    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];

    for iter in 0..max_iter {
        for i in 0..n {
            dir[i] = -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            h = identity(n, 1.0 / sqrt(dot(&g, &g)).max(1.0));
            for i in 0..n {
                dir[i] = -h[i * n + i] * g[i];
            }
            slope = dot(&dir, &g);
            fresh = true;
            if !(slope < 0.0) {
                return Some(Outcome { x, f, iterations: iter, converged: true });
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        while step > MIN_STEP {
            for i in 0..n {
                trial[i] = x[i] + step * dir[i];
            }
            match objective(&trial) {
                Some((ft, gt)) if ft.is_finite() && gt.iter().all(|v| v.is_finite()) => {
                    if ft <= f + ARMIJO * step * slope {
                        accepted = Some((ft, gt));
                        break;
                    }
                    // safeguarded quadratic interpolation
                    let denom = 2.0 * (ft - f - step * slope);
                    let next = if denom > 0.0 { -slope * step * step / denom } else { 0.5 * step };
                    step = next.clamp(0.1 * step, 0.5 * step);
                }
                _ => step *= 0.2,
            }
        }

        let Some((f_new, g_new)) = accepted else {
            if fresh {
                return Some(Outcome { x, f, iterations: iter + 1, converged: true });
            }
            h = identity(n, 1.0 / sqrt(dot(&g, &g)).max(1.0));
            fresh = true;
            continue;
        };

        let s: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let improvement = f - f_new;
        x.copy_from_slice(&trial);
        f = f_new;
        g = g_new;
        fresh = false;

        if improvement <= tol * f.abs().max(1.0) {
            return Some(Outcome { x, f, iterations: iter + 1, converged: true });
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * sqrt(dot(&s, &s) * dot(&y, &y)) {
            if first_update {
                let scale = sy / dot(&y, &y);
                h = identity(n, scale);
                first_update = false;
            }
            update_inverse(&mut h, &s, &y, sy, n);
        }
    }
    Some(Outcome { x, f, iterations: max_iter, converged: false })
}

fn identity(n: usize, scale: f64) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = scale;
    }
    h
}

/// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ.
fn update_inverse(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Some((v, g))
        };
        let out = bfgs(f, vec![-1.2, 1.0], 1000, 1e-14).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4, "{:?}", out.x);
    }

    #[test]
    fn respects_domain_wall() {
        // minimum of (x-3)^2 restricted to x <= 2 sits at the wall
        let f = |x: &[f64]| if x[0] > 2.0 { None } else { Some(((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)])) };
        let out = bfgs(f, vec![0.0], 200, 1e-12).unwrap();
        assert!(out.x[0] <= 2.0 && out.x[0] > 1.99);
    }

    #[test]
    fn iteration_cap_is_honoured() {
        let f = |x: &[f64]| Some((x[0].powi(4) + x[1].powi(2) * 1e3, vec![4.0 * x[0].powi(3), 2e3 * x[1]]));
        let out = bfgs(f, vec![5.0, 5.0], 3, 1e-30).unwrap();
        assert_eq!(out.iterations, 3);
        assert!(!out.converged);
    }
}
