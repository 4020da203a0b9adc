//! Small dense Levenberg–Marquardt solver.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    /// Stop when the step is this small relative to the parameters.
    pub step_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            cost_tolerance: 1.5e-8,
            step_tolerance: 1.5e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimise `Σ r_i(p)²`.
///
/// `eval` returns the residual vector and its Jacobian at `p`; `project`
/// maps a trial point back into the feasible set (bounds).
pub fn levenberg_marquardt<E, P>(eval: E, project: P, p0: &[f64], options: &LmOptions) -> LmOutcome
where
    E: Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>),
    P: Fn(&mut [f64]),
{
    let n = p0.len();
    let mut p = p0.to_vec();
    project(&mut p);
    let (mut r, mut jac) = eval(&p);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        if grad.amax() == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            project(&mut trial);
            let (r_new, jac_new) = eval(&trial);
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new <= cost {
                let rel_step = trial
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b).abs() / (b.abs() + 1e-12))
                    .fold(0.0, f64::max);
                let rel_cost = (cost - cost_new) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                r = r_new;
                jac = jac_new;
                cost = cost_new;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_step < options.step_tolerance || rel_cost < options.cost_tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        // no downhill step at any damping: a (local) minimum
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
    }

    LmOutcome {
        params: p,
        cost,
        iterations,
        converged,
    }
}
