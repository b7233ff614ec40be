//! Box-constrained quasi-Newton minimisation with finite-difference gradients.
//!
//! A projected BFGS: the inverse-Hessian approximation acts on the free
//! variables only, steps are projected back into the box, and the line search
//! is an Armijo backtrack along the projected path.

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Infinity norm of the projected gradient at `x`.
    pub projected_gradient: f64,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &l), &u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(l, u);
    }
}

fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], fx: f64, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = (1e-5 * x[i].abs().max(1.0)).min(0.25 * (upper[i] - lower[i]));
        let up_ok = x[i] + h <= upper[i];
        let down_ok = x[i] - h >= lower[i];
        g[i] = match (down_ok, up_ok) {
            (true, true) => {
                probe[i] = x[i] + h;
                let fp = f(&probe);
                probe[i] = x[i] - h;
                let fm = f(&probe);
                (fp - fm) / (2.0 * h)
            }
            (false, true) => {
                probe[i] = x[i] + h;
                (f(&probe) - fx) / h
            }
            (true, false) => {
                probe[i] = x[i] - h;
                (fx - f(&probe)) / h
            }
            (false, false) => 0.0,
        };
        probe[i] = x[i];
    }
    g
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&l, &u))| ((xi - gi).clamp(l, u) - xi).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f` over the box `[lower, upper]` starting from `x0`.
///
/// Convergence is declared when the projected gradient infinity norm drops to `tol`.
pub fn minimize_box<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    tol: f64,
    max_iter: usize,
) -> OptimResult {
    let d = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut fx = f(&x);
    let mut g = gradient(&f, &x, fx, lower, upper);
    let mut h = identity(d);
    let mut fresh = true;

    for iter in 0..max_iter {
        let pg = projected_gradient_norm(&x, &g, lower, upper);
        if pg <= tol {
            return OptimResult { x, value: fx, converged: true, iterations: iter, projected_gradient: pg };
        }
        let eps = 1e-10;
        let free: Vec<bool> = (0..d)
            .map(|i| !((x[i] <= lower[i] + eps && g[i] > 0.0) || (x[i] >= upper[i] - eps && g[i] < 0.0)))
            .collect();
        let mut dir = vec![0.0; d];
        for i in (0..d).filter(|&i| free[i]) {
            dir[i] = -(0..d).filter(|&j| free[j]).map(|j| h[i][j] * g[j]).sum::<f64>();
        }
        if dot(&dir, &g) >= 0.0 {
            h = identity(d);
            fresh = true;
            for i in 0..d {
                dir[i] = if free[i] { -g[i] } else { 0.0 };
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, lower, upper);
            let decrease: f64 = g.iter().zip(trial.iter().zip(&x)).map(|(gi, (t, xi))| gi * (t - xi)).sum();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * decrease {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if fresh {
                return OptimResult { x, value: fx, converged: false, iterations: iter, projected_gradient: pg };
            }
            h = identity(d);
            fresh = true;
            continue;
        };

        let g_new = gradient(&f, &x_new, f_new, lower, upper);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            bfgs_update(&mut h, &s, &y, sy);
            fresh = false;
        }
        let stalled = s.iter().all(|v| v.abs() == 0.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if stalled {
            let pg = projected_gradient_norm(&x, &g, lower, upper);
            return OptimResult { x, value: fx, converged: pg <= tol, iterations: iter + 1, projected_gradient: pg };
        }
    }
    let pg = projected_gradient_norm(&x, &g, lower, upper);
    OptimResult { x, value: fx, converged: pg <= tol, iterations: max_iter, projected_gradient: pg }
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Inverse-Hessian BFGS update `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..d).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..d {
        for j in 0..d {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
