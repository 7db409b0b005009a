//! Box-constrained local minimization via projected L-BFGS with finite
//! difference gradients. Used to polish acquisition maximizers and to fit GP
//! hyperparameters; the implementation is fully deterministic.

use std::collections::VecDeque;

/// Tuning knobs for [`minimize_box`].
#[derive(Debug, Clone)]
pub struct OptimOptions {
    /// Maximum outer iterations.
    pub max_iters: usize,
    /// Number of curvature pairs kept for the L-BFGS direction.
    pub memory: usize,
    /// Central finite difference step.
    pub grad_step: f64,
    /// Stop when the projected gradient sup-norm falls below this.
    pub pg_tol: f64,
    /// Stop after two consecutive relative objective decreases below this.
    pub f_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iters: 60,
            memory: 8,
            grad_step: 1e-6,
            pg_tol: 1e-9,
            f_tol: 1e-12,
        }
    }
}

fn clamp_into(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].max(lo[i]).min(hi[i]);
    }
}

fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Two-loop recursion producing the L-BFGS descent direction `-H g`.
fn lbfgs_direction(history: &VecDeque<(Vec<f64>, Vec<f64>)>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push((rho, a));
    }
    let gamma = history
        .back()
        .map(|(s, y)| dot(s, y) / dot(y, y))
        .unwrap_or(1.0);
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y), (rho, a)) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `f` over the box `[lo, hi]`, starting from `x0` (clamped onto the
/// box). Returns the best point found and its objective value. Non-finite
/// objective values are treated as infinitely bad; if the starting point
/// itself is non-finite the start is returned unchanged.
pub fn minimize_box<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &OptimOptions,
) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    clamp_into(&mut x, lo, hi);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return (x, fx);
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(opts.memory);
    let mut g = fd_gradient(&f, &x, opts.grad_step);
    let mut small_steps = 0usize;

    for _ in 0..opts.max_iters {
        // Projected gradient stationarity test.
        let pg_norm = x
            .iter()
            .zip(&g)
            .zip(lo.iter().zip(hi))
            .map(|((xi, gi), (l, h))| (xi - (xi - gi).max(*l).min(*h)).abs())
            .fold(0.0f64, f64::max);
        if pg_norm <= opts.pg_tol {
            break;
        }

        let mut dir = lbfgs_direction(&history, &g);
        let descent = dot(&dir, &g);
        if !descent.is_finite() || descent >= 0.0 {
            dir = g.iter().map(|gi| -gi).collect();
        }

        // Backtracking Armijo search along the projected path.
        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..30 {
            let mut xc: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            clamp_into(&mut xc, lo, hi);
            let step: Vec<f64> = xc.iter().zip(&x).map(|(a, b)| a - b).collect();
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            let fc = f(&xc);
            if fc.is_finite() && fc <= fx + 1e-4 * dot(&g, &step) {
                accepted = Some((xc, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            break;
        };

        let gn = fd_gradient(&f, &xn, opts.grad_step);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y));
        }

        let rel_drop = (fx - fn_).abs() / (1.0 + fn_.abs());
        x = xn;
        fx = fn_;
        g = gn;
        if rel_drop <= opts.f_tol {
            small_steps += 1;
            if small_steps >= 2 {
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_quadratic_in_interior() {
        let target = [0.3, -0.2, 0.7];
        let f = |x: &[f64]| {
            x.iter()
                .zip(&target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let (x, fx) = minimize_box(
            f,
            &[0.9, 0.9, -0.9],
            &[-1.0; 3],
            &[1.0; 3],
            &OptimOptions::default(),
        );
        for (a, b) in x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6, "{x:?}");
        }
        assert!(fx < 1e-12);
    }

    #[test]
    fn respects_active_bounds() {
        let f = |x: &[f64]| (x[0] - 2.0) * (x[0] - 2.0) + x[1] * x[1];
        let (x, _) = minimize_box(f, &[0.0, 0.5], &[-1.0, -1.0], &[1.0, 1.0], &OptimOptions::default());
        assert!((x[0] - 1.0).abs() < 1e-9, "should stick to the bound, got {x:?}");
        assert!(x[1].abs() < 1e-6);
    }

    #[test]
    fn handles_rosenbrock() {
        let f = |x: &[f64]| {
            let a = 1.0 - x[0];
            let b = x[1] - x[0] * x[0];
            a * a + 100.0 * b * b
        };
        let opts = OptimOptions {
            max_iters: 400,
            ..OptimOptions::default()
        };
        let (x, fx) = minimize_box(f, &[-0.5, 0.5], &[-2.0, -2.0], &[2.0, 2.0], &opts);
        assert!(fx < 1e-8, "fx = {fx}, x = {x:?}");
    }

    #[test]
    fn non_finite_start_is_returned() {
        let f = |_: &[f64]| f64::NAN;
        let (x, fx) = minimize_box(f, &[0.5], &[0.0], &[1.0], &OptimOptions::default());
        assert_eq!(x, vec![0.5]);
        assert!(fx.is_nan());
    }

    #[test]
    fn is_deterministic() {
        let f = |x: &[f64]| (x[0].sin() * 3.0).cos() + x[1] * x[1];
        let run = || minimize_box(&f, &[0.2, 0.9], &[-1.0; 2], &[1.0; 2], &OptimOptions::default());
        let (x1, f1) = run();
        let (x2, f2) = run();
        assert_eq!(x1, x2);
        assert_eq!(f1.to_bits(), f2.to_bits());
    }
}
