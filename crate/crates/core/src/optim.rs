//! Damped Newton ascent with analytic gradients and a finite-difference
//! Hessian, falling back to steepest ascent with backtracking whenever the
//! Hessian is not negative definite.

use nalgebra::{Cholesky, DMatrix, DVector};

pub(crate) struct OptimOptions {
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
    /// Parameter-magnitude bound signalling separation.
    pub bound: f64,
    /// Only the first `bound_dims` components are checked against `bound`
    /// (lets the Heckman log-sigma coordinate run to the boundary).
    pub bound_dims: usize,
}

pub(crate) struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub separated: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub(crate) fn maximize<F, G>(f: F, grad: G, x0: Vec<f64>, opts: &OptimOptions) -> OptimOutcome
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let dim = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut outcome = OptimOutcome {
        x: x.clone(),
        value: fx,
        grad_norm: f64::INFINITY,
        iterations: 0,
        converged: false,
        separated: false,
    };
    if !fx.is_finite() {
        return outcome;
    }

    for iter in 0..opts.max_iterations {
        outcome.iterations = iter + 1;
        let g = grad(&x);
        let gnorm = inf_norm(&g);
        outcome.grad_norm = gnorm;
        if gnorm <= opts.grad_tol {
            outcome.converged = true;
            break;
        }
        if inf_norm(&x[..opts.bound_dims.min(dim)]) > opts.bound {
            outcome.separated = true;
            break;
        }

        // Hessian by forward differences of the analytic gradient.
        let mut hess = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let h = 1e-7 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            xp[j] += h;
            let gp = grad(&xp);
            for i in 0..dim {
                hess[(i, j)] = (gp[i] - g[i]) / h;
            }
        }
        for i in 0..dim {
            for j in 0..i {
                let avg = 0.5 * (hess[(i, j)] + hess[(j, i)]);
                hess[(i, j)] = avg;
                hess[(j, i)] = avg;
            }
        }

        let gvec = DVector::from_column_slice(&g);
        let newton = Cholesky::new(-hess).map(|ch| ch.solve(&gvec));
        let mut dir: Vec<f64> = match newton {
            Some(step) if step.iter().all(|v| v.is_finite()) => step.iter().copied().collect(),
            _ => g.clone(),
        };
        let mut dd: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if dd <= 0.0 {
            dir = g.clone();
            dd = g.iter().map(|v| v * v).sum();
        }

        // Backtracking Armijo line search.
        let mut alpha = 1.0f64;
        let mut accepted = false;
        while alpha >= 1e-15 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft >= fx + 1e-4 * alpha * dd {
                let step_norm = alpha * inf_norm(&dir);
                x = trial;
                fx = ft;
                accepted = true;
                if step_norm <= opts.step_tol {
                    outcome.converged = true;
                }
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No ascent direction makes progress at any step length.
            outcome.converged = gnorm <= opts.grad_tol * 100.0;
            break;
        }
        if outcome.converged {
            break;
        }
    }

    if outcome.converged {
        outcome.grad_norm = inf_norm(&grad(&x));
    }
    outcome.x = x;
    outcome.value = fx;
    outcome
}
