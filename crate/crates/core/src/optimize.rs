//! Derivative-free local minimization for small dense problems.
//!
//! [`minimize`] runs BFGS on central finite-difference gradients and falls
//! back to Nelder–Mead from the current iterate when the line search cannot
//! make progress while the gradient is still significant.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    /// Stop once an iteration improves the objective by less than
    /// `tol · |f|` (plus a tiny absolute floor).
    pub tol: f64,
    pub max_iters: usize,
    /// Central-difference step per coordinate.
    pub fd_step: f64,
    /// Gradient norm treated as stationary when the line search stalls.
    pub grad_tol: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions { tol: 1e-10, max_iters: 1000, fd_step: 1e-6, grad_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

fn fd_gradient<F: FnMut(&[f64]) -> f64>(f: &mut Counted<F>, x: &[f64], h: f64, g: &mut [f64]) {
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f.call(&probe);
        probe[i] = x[i] - h;
        let fm = f.call(&probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
}

fn improved_enough(prev: f64, next: f64, tol: f64) -> bool {
    prev - next > tol * prev.abs() + 1e-300
}

/// Minimizes `f` starting at `x0`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &LocalOptions) -> LocalResult {
    let n = x0.len();
    let mut f = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    let mut fx = f.call(&x);
    if n == 0 || !fx.is_finite() {
        return LocalResult { x, f: fx, iters: 0, evals: f.evals, converged: n == 0 };
    }

    let mut h_inv = identity(n);
    let mut g = vec![0.0; n];
    fd_gradient(&mut f, &x, opts.fd_step, &mut g);
    let mut iters = 0;
    let mut converged = false;
    let mut fresh = true;

    while iters < opts.max_iters {
        iters += 1;
        let gnorm = norm(&g);
        if !gnorm.is_finite() {
            break;
        }
        if gnorm == 0.0 {
            converged = true;
            break;
        }
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h_inv[i], &g)).collect();
        let mut slope = dot(&p, &g);
        if !(slope < 0.0) {
            // Lost descent direction; restart from steepest descent.
            h_inv = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
            fresh = true;
        }
        let mut step = 1.0;
        if fresh {
            // Unscaled steepest descent: cap the first trial move at unit length.
            let pn = norm(&p);
            if pn > 1.0 {
                step = 1.0 / pn;
            }
        }

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + step * pi).collect();
            let ft = f.call(&trial);
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }

        let Some((x_new, f_new)) = accepted else {
            if !fresh {
                h_inv = identity(n);
                fresh = true;
                continue;
            }
            if gnorm <= opts.grad_tol {
                converged = true;
                break;
            }
            let polished = nelder_mead(&mut f, &x, fx, opts);
            let better = polished.1 < fx;
            x = polished.0;
            fx = polished.1;
            converged = !better || gnorm <= opts.grad_tol;
            if better {
                fd_gradient(&mut f, &x, opts.fd_step, &mut g);
                h_inv = identity(n);
                continue;
            }
            break;
        };

        let mut g_new = vec![0.0; n];
        fd_gradient(&mut f, &x_new, opts.fd_step, &mut g_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let made_progress = improved_enough(fx, f_new, opts.tol);
        if sy > 1e-300 {
            if fresh {
                // Scale the initial inverse Hessian to the observed curvature.
                let scale = sy / dot(&y, &y);
                h_inv = identity(n);
                for (i, row) in h_inv.iter_mut().enumerate() {
                    row[i] = scale;
                }
            }
            bfgs_update(&mut h_inv, &s, &y, sy);
            fresh = false;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if !made_progress {
            converged = true;
            break;
        }
    }

    LocalResult { x, f: fx, iters, evals: f.evals, converged }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect()
}

// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: &mut Counted<F>,
    x0: &[f64],
    f0: f64,
    opts: &LocalOptions,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1e-3 { 0.05 * v[i].abs() } else { 1e-3 };
        let fv = f.call(&v);
        simplex.push((v, fv));
    }
    let max_iters = 200 * n;
    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= opts.tol * best.abs() + 1e-300 {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|v| v.0[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64, w: &[f64]| -> Vec<f64> {
            centroid.iter().zip(w).map(|(c, wi)| c + t * (c - wi)).collect()
        };
        let xr = along(1.0, &simplex[n].0);
        let fr = f.call(&xr);
        if fr < best {
            let xe = along(2.0, &simplex[n].0);
            let fe = f.call(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(0.5, &simplex[n].0);
                let fc = f.call(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5, &simplex[n].0);
                let fc = f.call(&xc);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (vj, bj) in v.0.iter_mut().zip(&x_best) {
                        *vj = bj + 0.5 * (*vj - bj);
                    }
                    v.1 = f.call(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn quadratic_bowl() {
        let r = minimize(
            |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2) + 0.5 * x[2] * x[2],
            &[0.0, 0.0, 5.0],
            &LocalOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-5 && (r.x[1] + 1.0).abs() < 1e-5 && r.x[2].abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn rosenbrock_valley() {
        let r = minimize(rosenbrock, &[-1.2, 1.0], &LocalOptions { tol: 1e-14, ..Default::default() });
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn nan_region_is_avoided() {
        let r = minimize(
            |x: &[f64]| if x[0] <= 0.0 { f64::NAN } else { (x[0].ln() - 1.0).powi(2) },
            &[0.5],
            &LocalOptions::default(),
        );
        assert!((r.x[0] - core::f64::consts::E).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn deterministic() {
        let a = minimize(rosenbrock, &[-1.2, 1.0], &LocalOptions::default());
        let b = minimize(rosenbrock, &[-1.2, 1.0], &LocalOptions::default());
        assert_eq!(a, b);
    }

    #[test]
    fn simplex_fallback_improves() {
        let mut c = Counted { f: |x: &[f64]| (x[0] - 0.3).abs() + (x[1] + 0.2).abs(), evals: 0 };
        let (x, fx) = nelder_mead(&mut c, &[0.0, 0.0], 0.5, &LocalOptions { tol: 1e-12, ..Default::default() });
        assert!(fx < 1e-6, "{x:?} {fx}");
    }
}
